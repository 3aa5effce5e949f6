#pragma once

// Simulated Quantum Hamiltonian Descent on QUBO problems.
//
// The wavefunction evolves under H(t) = a(t) (-L/2) + p(t) F, where L is the
// graph Laplacian of the hypercube {0,1}^dim (a tensor sum of 2x2 stencils
// [[-1,1],[1,-1]]) and F is the diagonal of QUBO energies. a(t) and p(t) are
// the kinetic and potential coefficients of the schedule.
//
// Integration is Strang splitting with fixed step dt: kinetic half-step,
// potential full step, kinetic half-step, all coefficients sampled at the
// step midpoint. Every factor is an exact unitary, so the norm is preserved
// to rounding. The per-axis kinetic propagator is
//   exp(-i tau a/2 (I - X)) = e^{-i theta} (cos(theta) I + i sin(theta) X),
//   theta = a tau / 2.
//
// Two backends:
//  * exact: full 2^dim state vector, bit v of the basis index is variable v.
//  * meanfield: dim independent two-level states; variable i feels the
//    effective potential diag(0, eps_i) with
//    eps_i = Q_ii + b_i + 2 sum_j Q_ij <x_j>, refreshed every step.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qhdpart/parallel.hpp"
#include "qhdpart/qubo.hpp"
#include "qhdpart/random.hpp"

namespace qhdpart {

using Complex = std::complex<double>;

enum class SchedulePreset { linear_ramp, power_law, custom };

class QhdSchedule {
 public:
  using Coefficient = std::function<double(double)>;

  QhdSchedule() : QhdSchedule(linear_ramp()) {}

  /// a(t) = 1 - t/T, p(t) = t/T.
  static QhdSchedule linear_ramp(double t_final = 10.0, std::size_t steps = 1000) {
    return QhdSchedule(SchedulePreset::linear_ramp, t_final, steps,
                       [t_final](double t) { return std::max(0.0, 1.0 - t / t_final); },
                       [t_final](double t) { return std::min(1.0, t / t_final); });
  }

  /// a(t) = (t + t0)^-3, p(t) = (t + t0)^3.
  static QhdSchedule power_law(double t_final = 10.0, std::size_t steps = 1000, double t0 = 0.1) {
    if (!(t0 > 0.0)) throw std::invalid_argument("power-law offset t0 must be positive");
    QhdSchedule s(SchedulePreset::power_law, t_final, steps,
                  [t0](double t) { return std::pow(t + t0, -3.0); },
                  [t0](double t) { return std::pow(t + t0, 3.0); });
    s.t0_ = t0;
    return s;
  }

  static QhdSchedule custom(double t_final, std::size_t steps, Coefficient kinetic, Coefficient potential) {
    return QhdSchedule(SchedulePreset::custom, t_final, steps, std::move(kinetic), std::move(potential));
  }

  /// "linear" or "power".
  static QhdSchedule from_name(const std::string& name, double t_final = 10.0, std::size_t steps = 1000) {
    if (name == "linear" || name == "linear-ramp") return linear_ramp(t_final, steps);
    if (name == "power" || name == "power-law") return power_law(t_final, steps);
    throw std::invalid_argument("unknown schedule preset '" + name + "' (expected linear or power)");
  }

  SchedulePreset preset() const { return preset_; }
  std::string name() const {
    switch (preset_) {
      case SchedulePreset::linear_ramp: return "linear";
      case SchedulePreset::power_law: return "power";
      default: return "custom";
    }
  }
  double t_final() const { return t_final_; }
  std::size_t steps() const { return steps_; }
  double step_size() const { return t_final_ / static_cast<double>(steps_); }
  double t0() const { return t0_; }
  double kinetic(double t) const { return kinetic_(t); }
  double potential(double t) const { return potential_(t); }
  /// Midpoint of step s, where all coefficients of that step are sampled.
  double midpoint(std::size_t s) const { return (static_cast<double>(s) + 0.5) * step_size(); }

  /// Coefficients must be finite and nonnegative at every sampled time.
  void validate() const {
    if (!(t_final_ > 0.0) || !std::isfinite(t_final_)) throw std::invalid_argument("t_final must be finite and > 0");
    if (steps_ == 0) throw std::invalid_argument("schedule needs at least one step");
    auto check = [&](double t) {
      const double a = kinetic_(t), p = potential_(t);
      if (!std::isfinite(a) || !std::isfinite(p) || a < 0.0 || p < 0.0)
        throw std::invalid_argument("schedule coefficients must be finite and nonnegative (t=" + std::to_string(t) + ")");
    };
    check(0.0);
    check(t_final_);
    for (std::size_t s = 0; s < steps_; ++s) check(midpoint(s));
  }

 private:
  QhdSchedule(SchedulePreset preset, double t_final, std::size_t steps, Coefficient kinetic, Coefficient potential)
      : preset_(preset), t_final_(t_final), steps_(steps), kinetic_(std::move(kinetic)), potential_(std::move(potential)) {}

  SchedulePreset preset_;
  double t_final_;
  std::size_t steps_;
  Coefficient kinetic_;
  Coefficient potential_;
  double t0_ = 0.0;
};

enum class Backend { automatic, exact, meanfield };

inline std::string to_string(Backend b) {
  switch (b) {
    case Backend::exact: return "exact";
    case Backend::meanfield: return "meanfield";
    default: return "auto";
  }
}

inline Backend backend_from_string(const std::string& s) {
  if (s == "auto" || s == "automatic") return Backend::automatic;
  if (s == "exact") return Backend::exact;
  if (s == "meanfield" || s == "mean-field") return Backend::meanfield;
  throw std::invalid_argument("unknown backend '" + s + "' (expected auto, exact or meanfield)");
}

struct WaveState {
  Backend backend = Backend::exact;
  std::size_t dim = 0;
  /// exact: 2^dim amplitudes. meanfield: (psi_i^0, psi_i^1) pairs, 2*dim entries.
  std::vector<Complex> amplitudes;

  /// Largest deviation from unit norm (per variable for meanfield).
  double norm_error() const {
    if (backend == Backend::exact) {
      double s = 0.0;
      for (const auto& a : amplitudes) s += std::norm(a);
      return std::abs(std::sqrt(s) - 1.0);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
      worst = std::max(worst, std::abs(std::sqrt(std::norm(amplitudes[2 * i]) + std::norm(amplitudes[2 * i + 1])) - 1.0));
    return worst;
  }

  /// Probability that variable i reads 1.
  double marginal(std::size_t i) const {
    if (backend == Backend::meanfield) return std::norm(amplitudes[2 * i + 1]);
    const std::size_t bit = std::size_t{1} << i;
    double p = 0.0;
    for (std::size_t x = 0; x < amplitudes.size(); ++x)
      if (x & bit) p += std::norm(amplitudes[x]);
    return p;
  }

  /// Basis-state probabilities (exact backend only).
  std::vector<double> probabilities() const {
    if (backend != Backend::exact) throw std::logic_error("probabilities() needs an exact state");
    std::vector<double> out(amplitudes.size());
    for (std::size_t x = 0; x < amplitudes.size(); ++x) out[x] = std::norm(amplitudes[x]);
    return out;
  }
};

/// Bitstring for basis index `index` (bit v is variable v).
inline BitVector bits_of(std::size_t index, std::size_t dim) {
  BitVector x(dim);
  for (std::size_t v = 0; v < dim; ++v) x[v] = static_cast<std::uint8_t>((index >> v) & 1u);
  return x;
}

inline std::size_t index_of(std::span<const std::uint8_t> x) {
  std::size_t index = 0;
  for (std::size_t v = 0; v < x.size(); ++v)
    if (x[v]) index |= std::size_t{1} << v;
  return index;
}

namespace detail {

struct KineticPropagator {
  Complex diag;
  Complex off;
};

/// exp(-i tau a/2 (I - X)) for one two-level axis.
inline KineticPropagator kinetic_propagator(double kinetic, double tau) {
  const double theta = 0.5 * kinetic * tau;
  const Complex phase = std::polar(1.0, -theta);
  return {phase * std::cos(theta), phase * Complex(0.0, std::sin(theta))};
}

inline void apply_kinetic_exact(std::vector<Complex>& psi, std::size_t dim, const KineticPropagator& k) {
  const std::size_t size = psi.size();
  for (std::size_t v = 0; v < dim; ++v) {
    const std::size_t stride = std::size_t{1} << v;
    for (std::size_t base = 0; base < size; base += 2 * stride) {
      for (std::size_t j = base; j < base + stride; ++j) {
        const Complex a = psi[j], b = psi[j + stride];
        psi[j] = k.diag * a + k.off * b;
        psi[j + stride] = k.off * a + k.diag * b;
      }
    }
  }
}

}  // namespace detail

/// Diagonal of F: QUBO energy of every basis state.
inline std::vector<double> potential_diagonal(const QuboProblem& q) {
  const std::size_t size = std::size_t{1} << q.dim();
  std::vector<double> f(size);
  BitVector x(q.dim());
  for (std::size_t index = 0; index < size; ++index) {
    for (std::size_t v = 0; v < q.dim(); ++v) x[v] = static_cast<std::uint8_t>((index >> v) & 1u);
    f[index] = q.energy_unchecked(x);
  }
  return f;
}

/// Applies a(t)(-L/2) to a full state without the time step: the generator
/// of the kinetic part, used to check that L has zero row sums.
inline std::vector<Complex> apply_laplacian(std::span<const Complex> psi, std::size_t dim) {
  std::vector<Complex> out(psi.size(), Complex{});
  for (std::size_t v = 0; v < dim; ++v) {
    const std::size_t bit = std::size_t{1} << v;
    for (std::size_t x = 0; x < psi.size(); ++x) out[x] += psi[x ^ bit] - psi[x];
  }
  return out;
}

struct ExactOptions {
  std::size_t dim_cap = 14;
  /// Called after each step with (step index, state).
  std::function<void(std::size_t, const WaveState&)> observer;
};

inline WaveState evolve_exact(const QuboProblem& q, const QhdSchedule& schedule, const ExactOptions& options = {}) {
  if (q.dim() > options.dim_cap)
    throw CapacityError("exact backend supports dim <= " + std::to_string(options.dim_cap) + ", got " +
                        std::to_string(q.dim()));
  schedule.validate();
  const std::size_t size = std::size_t{1} << q.dim();
  WaveState state{Backend::exact, q.dim(), std::vector<Complex>(size, Complex(1.0 / std::sqrt(double(size)), 0.0))};
  const std::vector<double> f = potential_diagonal(q);
  const double dt = schedule.step_size();
  for (std::size_t s = 0; s < schedule.steps(); ++s) {
    const double t = schedule.midpoint(s);
    const auto half = detail::kinetic_propagator(schedule.kinetic(t), 0.5 * dt);
    const double p = schedule.potential(t);
    detail::apply_kinetic_exact(state.amplitudes, q.dim(), half);
    for (std::size_t x = 0; x < size; ++x) state.amplitudes[x] *= std::polar(1.0, -p * dt * f[x]);
    detail::apply_kinetic_exact(state.amplitudes, q.dim(), half);
    if (options.observer) options.observer(s, state);
  }
  return state;
}

struct MeanFieldOptions {
  /// Members 1.. start from (1, e^{i phi})/sqrt(2) with phi uniform in
  /// [-phase_noise, phase_noise]; member 0 starts unperturbed.
  double phase_noise = std::numbers::pi;
  std::size_t threads = 1;
  std::function<void(std::size_t, const std::vector<WaveState>&)> observer;
};

/// Effective single-variable potentials for every batch member:
/// eps[i * batch + b] = Q_ii + b_i + 2 sum_j Q_ij p[j * batch + b].
inline void meanfield_fields(const QuboProblem& q, std::span<const double> p, std::size_t batch,
                             std::span<double> eps, std::size_t threads = 1) {
  parallel_for(q.dim(), threads, [&](std::size_t i) {
    double* out = eps.data() + i * batch;
    for (std::size_t b = 0; b < batch; ++b) out[b] = 0.0;
    for (const auto& c : q.couplings(i)) {
      const double* pj = p.data() + std::size_t{c.col} * batch;
      for (std::size_t b = 0; b < batch; ++b) out[b] += c.value * pj[b];
    }
    const double self = q.diagonal(i) + q.linear()[i];
    for (std::size_t b = 0; b < batch; ++b) out[b] = self + 2.0 * out[b];
  });
}

inline std::vector<WaveState> evolve_meanfield(const QuboProblem& q, const QhdSchedule& schedule, std::size_t batch,
                                               std::uint64_t seed, const MeanFieldOptions& options = {}) {
  if (batch == 0) throw std::invalid_argument("batch must be at least 1");
  schedule.validate();
  const std::size_t dim = q.dim();
  std::vector<WaveState> states(batch);
  const double amp = 1.0 / std::numbers::sqrt2;
  for (std::size_t b = 0; b < batch; ++b) {
    auto& st = states[b];
    st.backend = Backend::meanfield;
    st.dim = dim;
    st.amplitudes.resize(2 * dim);
    Rng rng(derive_seed(seed, b));
    for (std::size_t i = 0; i < dim; ++i) {
      const double phi = b == 0 ? 0.0 : rng.uniform(-options.phase_noise, options.phase_noise);
      st.amplitudes[2 * i] = Complex(amp, 0.0);
      st.amplitudes[2 * i + 1] = std::polar(amp, phi);
    }
  }
  std::vector<double> p(dim * batch), eps(dim * batch);
  const double dt = schedule.step_size();
  auto kinetic = [&](const detail::KineticPropagator& k) {
    parallel_for(batch, options.threads, [&](std::size_t b) {
      auto& a = states[b].amplitudes;
      for (std::size_t i = 0; i < dim; ++i) {
        const Complex x0 = a[2 * i], x1 = a[2 * i + 1];
        a[2 * i] = k.diag * x0 + k.off * x1;
        a[2 * i + 1] = k.off * x0 + k.diag * x1;
      }
    });
  };
  for (std::size_t s = 0; s < schedule.steps(); ++s) {
    const double t = schedule.midpoint(s);
    const auto half = detail::kinetic_propagator(schedule.kinetic(t), 0.5 * dt);
    const double pot = schedule.potential(t);
    kinetic(half);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < dim; ++i) p[i * batch + b] = std::norm(states[b].amplitudes[2 * i + 1]);
    meanfield_fields(q, p, batch, eps, options.threads);
    parallel_for(batch, options.threads, [&](std::size_t b) {
      auto& a = states[b].amplitudes;
      for (std::size_t i = 0; i < dim; ++i) a[2 * i + 1] *= std::polar(1.0, -pot * dt * eps[i * batch + b]);
    });
    kinetic(half);
    if (options.observer) options.observer(s, states);
  }
  return states;
}

// ---------------------------------------------------------------------------
// Rounding

/// Repeatedly flips the lowest-index bit whose flip lowers the energy until
/// no single flip does. Returns the final energy. `on_flip(i, delta)` is
/// called before each flip is applied.
template <class OnFlip>
double greedy_descent(const QuboProblem& q, BitVector& x, OnFlip&& on_flip) {
  const std::size_t dim = q.dim();
  if (x.size() != dim) throw std::invalid_argument("vector length does not match QUBO dimension");
  std::vector<double> field(dim);
  for (std::size_t i = 0; i < dim; ++i) field[i] = q.local_field(x, i);
  auto delta = [&](std::size_t i) { return x[i] ? -field[i] : field[i]; };
  auto improving = [&](std::size_t i) { return delta(i) < -1e-12 * (1.0 + std::abs(field[i])); };
  std::size_t cursor = 0;
  while (true) {
    while (cursor < dim && !improving(cursor)) ++cursor;
    if (cursor == dim) break;
    const std::size_t i = cursor;
    on_flip(i, delta(i));
    x[i] ^= 1u;
    const double sign = x[i] ? 2.0 : -2.0;
    for (const auto& c : q.couplings(i)) {
      field[c.col] += sign * c.value;
      if (c.col < cursor && improving(c.col)) cursor = c.col;
    }
  }
  return q.energy_unchecked(x);
}

inline double greedy_descent(const QuboProblem& q, BitVector& x) {
  return greedy_descent(q, x, [](std::size_t, double) {});
}

struct RoundOptions {
  bool record_samples = false;
  std::size_t threads = 1;
  /// Number of distinct descended vectors to keep, lowest energy first.
  std::size_t keep_candidates = 0;
};

struct Candidate {
  BitVector bits;
  double energy = 0.0;
};

struct RoundResult {
  BitVector bits;
  double energy = std::numeric_limits<double>::infinity();
  std::size_t samples_drawn = 0;
  /// Best energy after each state's samples, cumulative over states.
  std::vector<double> best_energy_trace;
  /// Pre-descent samples with their energies (only with record_samples).
  std::vector<BitVector> raw_samples;
  std::vector<double> raw_energies;
  /// Up to keep_candidates distinct descended vectors ordered by energy
  /// (earlier samples first on ties).
  std::vector<Candidate> candidates;
};

/// Draws bitstrings from each state (|psi|^2 for exact states, independent
/// bits with P(1) = |psi_i^1|^2 for meanfield states), runs greedy descent
/// on every sample and keeps the lowest energy; the earliest sample wins ties.
inline RoundResult sample_and_round(std::span<const WaveState> states, const QuboProblem& q,
                                    std::size_t samples_per_state, std::uint64_t seed,
                                    const RoundOptions& options = {}) {
  if (states.empty()) throw std::invalid_argument("no states to sample");
  if (samples_per_state == 0) throw std::invalid_argument("samples_per_state must be at least 1");
  struct PerState {
    BitVector bits;
    double energy = std::numeric_limits<double>::infinity();
    std::vector<BitVector> raw;
    std::vector<double> raw_energies;
    std::vector<Candidate> descended;
  };
  std::vector<PerState> per_state(states.size());
  parallel_for(states.size(), options.threads, [&](std::size_t s) {
    const WaveState& st = states[s];
    if (st.dim != q.dim()) throw std::invalid_argument("state dimension does not match QUBO");
    Rng rng(derive_seed(seed, s));
    std::vector<double> cumulative;
    if (st.backend == Backend::exact) {
      cumulative.resize(st.amplitudes.size());
      double acc = 0.0;
      for (std::size_t x = 0; x < st.amplitudes.size(); ++x) cumulative[x] = acc += std::norm(st.amplitudes[x]);
    }
    auto& out = per_state[s];
    BitVector x(q.dim());
    for (std::size_t k = 0; k < samples_per_state; ++k) {
      if (st.backend == Backend::exact) {
        const double u = rng.uniform() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        std::size_t index = static_cast<std::size_t>(it - cumulative.begin());
        if (index >= cumulative.size()) index = cumulative.size() - 1;
        x = bits_of(index, q.dim());
      } else {
        for (std::size_t i = 0; i < q.dim(); ++i) x[i] = rng.uniform() < std::norm(st.amplitudes[2 * i + 1]) ? 1 : 0;
      }
      if (options.record_samples) {
        out.raw.push_back(x);
        out.raw_energies.push_back(q.energy_unchecked(x));
      }
      const double e = greedy_descent(q, x);
      if (options.keep_candidates > 0) out.descended.push_back({x, e});
      if (e < out.energy) {
        out.energy = e;
        out.bits = x;
      }
    }
  });
  RoundResult result;
  for (auto& ps : per_state) {
    if (ps.energy < result.energy) {
      result.energy = ps.energy;
      result.bits = ps.bits;
    }
    result.best_energy_trace.push_back(result.energy);
    result.samples_drawn += samples_per_state;
    for (std::size_t k = 0; k < ps.raw.size(); ++k) {
      result.raw_samples.push_back(std::move(ps.raw[k]));
      result.raw_energies.push_back(ps.raw_energies[k]);
    }
  }
  if (options.keep_candidates > 0) {
    std::vector<Candidate> all;
    for (auto& ps : per_state)
      for (auto& c : ps.descended) all.push_back(std::move(c));
    std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) { return a.energy < b.energy; });
    for (auto& c : all) {
      if (result.candidates.size() == options.keep_candidates) break;
      const bool duplicate = std::any_of(result.candidates.begin(), result.candidates.end(),
                                         [&](const Candidate& o) { return o.bits == c.bits; });
      if (!duplicate) result.candidates.push_back(std::move(c));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Orchestration

struct SolverParams {
  QhdSchedule schedule = QhdSchedule::linear_ramp();
  Backend backend = Backend::automatic;
  std::size_t batch = 8;
  std::size_t samples = 32;
  std::uint64_t seed = 0;
  double phase_noise = std::numbers::pi;
  std::size_t exact_dim_cap = 14;
  std::size_t threads = 1;
  /// Distinct low-energy vectors returned besides the best (0 = none).
  std::size_t keep_candidates = 0;

  void validate() const {
    if (batch == 0) throw std::invalid_argument("batch must be at least 1");
    if (samples == 0) throw std::invalid_argument("samples must be at least 1");
    if (!(phase_noise >= 0.0)) throw std::invalid_argument("phase_noise must be >= 0");
    schedule.validate();
  }
};

struct SolverStats {
  Backend backend = Backend::exact;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::size_t samples = 0;
  double max_norm_error = 0.0;
  std::vector<double> best_energy_trace;
};

struct QuboSolution {
  BitVector bits;
  double energy = 0.0;
  SolverStats stats;
  std::vector<Candidate> candidates;
};

inline Backend select_backend(const QuboProblem& q, const SolverParams& params) {
  if (params.backend != Backend::automatic) return params.backend;
  return q.dim() <= params.exact_dim_cap ? Backend::exact : Backend::meanfield;
}

inline QuboSolution solve_qubo(const QuboProblem& q, const SolverParams& params) {
  params.validate();
  if (q.dim() == 0) throw std::invalid_argument("QUBO has no variables");
  const auto start = std::chrono::steady_clock::now();
  QuboSolution out;
  out.stats.backend = select_backend(q, params);
  out.stats.steps = params.schedule.steps();
  out.stats.samples = params.samples;
  std::vector<WaveState> states;
  if (out.stats.backend == Backend::exact) {
    ExactOptions eo;
    eo.dim_cap = params.exact_dim_cap;
    states.push_back(evolve_exact(q, params.schedule, eo));
    out.stats.batch = 1;
  } else {
    MeanFieldOptions mo;
    mo.phase_noise = params.phase_noise;
    mo.threads = params.threads;
    states = evolve_meanfield(q, params.schedule, params.batch, params.seed, mo);
    out.stats.batch = params.batch;
  }
  for (const auto& s : states) out.stats.max_norm_error = std::max(out.stats.max_norm_error, s.norm_error());
  RoundOptions ro;
  ro.threads = params.threads;
  ro.keep_candidates = params.keep_candidates;
  auto rounded = sample_and_round(states, q, params.samples, derive_seed(params.seed, 0x5a5a), ro);
  out.bits = std::move(rounded.bits);
  out.energy = rounded.energy;
  out.stats.best_energy_trace = std::move(rounded.best_energy_trace);
  out.candidates = std::move(rounded.candidates);
  out.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace qhdpart
