#pragma once

// Reference solvers: exhaustive QUBO enumeration, exhaustive modularity
// search, and Metropolis simulated annealing.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <vector>

#include "qhdpart/graph.hpp"
#include "qhdpart/parallel.hpp"
#include "qhdpart/qubo.hpp"
#include "qhdpart/random.hpp"

namespace qhdpart {

struct SolveResult {
  BitVector bits;                    ///< QUBO solvers
  std::optional<Partition> partition;  ///< partition solvers
  double objective = 0.0;            ///< energy (QUBO) or modularity (partition)
  bool proven_optimal = false;       ///< only exhaustive enumeration sets this
  double wall_seconds = 0.0;
  std::uint64_t evaluations = 0;
};

namespace detail {

/// a < b lexicographically, x[0] most significant.
inline bool lex_less(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace detail

struct BruteForceOptions {
  std::size_t dim_cap = 24;
  std::size_t threads = 1;
};

/// Minimum-energy vector over all 2^dim assignments; energies within 1e-9
/// relative count as ties and resolve to the lexicographically smallest
/// vector.
inline SolveResult brute_force_qubo(const QuboProblem& q, const BruteForceOptions& options = {}) {
  const std::size_t dim = q.dim();
  if (dim > options.dim_cap)
    throw CapacityError("brute force supports dim <= " + std::to_string(options.dim_cap) + ", got " + std::to_string(dim));
  const auto start = std::chrono::steady_clock::now();
  // The top `high` bits pick a chunk; the rest are walked in Gray-code order.
  const std::size_t high = std::min<std::size_t>(dim, 6);
  const std::size_t low = dim - high;
  const std::size_t chunks = std::size_t{1} << high;
  struct Best {
    BitVector x;
    double energy = std::numeric_limits<double>::infinity();
  };
  std::vector<Best> best(chunks);
  auto consider = [](Best& b, double e, const BitVector& x) {
    if (b.x.empty() || (e < b.energy && !detail::nearly_equal(e, b.energy))) {
      b.energy = e;
      b.x = x;
    } else if (detail::nearly_equal(e, b.energy) && detail::lex_less(x, b.x)) {
      b.x = x;
      b.energy = std::min(b.energy, e);
    }
  };
  parallel_for(chunks, options.threads, [&](std::size_t chunk) {
    BitVector x(dim, 0);
    for (std::size_t h = 0; h < high; ++h) x[low + h] = static_cast<std::uint8_t>((chunk >> h) & 1u);
    std::vector<double> field(dim);
    for (std::size_t i = 0; i < dim; ++i) field[i] = q.local_field(x, i);
    double e = q.energy_unchecked(x);
    Best& b = best[chunk];
    consider(b, e, x);
    const std::size_t steps = std::size_t{1} << low;
    for (std::size_t g = 1; g < steps; ++g) {
      const auto i = static_cast<std::size_t>(std::countr_zero(g));
      e += x[i] ? -field[i] : field[i];
      x[i] ^= 1u;
      const double sign = x[i] ? 2.0 : -2.0;
      for (const auto& c : q.couplings(i)) field[c.col] += sign * c.value;
      consider(b, e, x);
    }
  });
  Best overall;
  for (const auto& b : best) consider(overall, b.energy, b.x);
  SolveResult r;
  r.bits = std::move(overall.x);
  r.objective = q.energy(r.bits);
  r.proven_optimal = true;
  r.evaluations = std::uint64_t{1} << dim;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct BruteForceModularityOptions {
  double search_cap = 1e7;
};

/// Maximum modularity over all assignments with node 0 fixed in group 0
/// (removes relabelling symmetry). Groups may stay empty. Ties keep the
/// first assignment in lexicographic order.
inline SolveResult brute_force_modularity(const Graph& g, GroupId k, const BruteForceModularityOptions& options = {}) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  detail::require_weight(g);
  const std::size_t n = g.node_count();
  const double space = std::pow(static_cast<double>(k), static_cast<double>(n) - 1.0);
  if (space > options.search_cap) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "search space k^(n-1) = %u^%zu ~ %.3g exceeds the brute-force cap of %.3g",
                  static_cast<unsigned>(k), n - 1, space, static_cast<double>(options.search_cap));
    throw CapacityError(buf);
  }
  const auto start = std::chrono::steady_clock::now();
  ModularityTracker tracker(g, Partition(n, k));
  std::vector<GroupId> best(n, 0);
  double best_q = tracker.modularity();
  std::uint64_t evaluations = 1;
  std::vector<GroupId> digits(n, 0);
  bool finished = n <= 1;
  while (!finished) {
    // Odometer step, last node least significant.
    for (std::size_t pos = n - 1;; --pos) {
      if (digits[pos] + 1 < k) {
        ++digits[pos];
        tracker.move(static_cast<NodeId>(pos), digits[pos]);
        break;
      }
      digits[pos] = 0;
      tracker.move(static_cast<NodeId>(pos), 0);
      if (pos == 1) {
        finished = true;
        break;
      }
    }
    if (finished) break;
    ++evaluations;
    if ((evaluations & 0xffff) == 0) tracker = ModularityTracker(g, Partition(digits, k));  // bound drift
    const double q = tracker.modularity();
    if (q > best_q + 1e-12) {
      best_q = q;
      best = digits;
    }
  }
  SolveResult r;
  r.partition = Partition(std::move(best), k);
  r.objective = modularity(g, *r.partition);
  r.proven_optimal = true;
  r.evaluations = evaluations;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct AnnealingParams {
  std::size_t sweeps = 1000;
  /// Length of one annealing cycle; each cycle restarts from a fresh random
  /// vector drawn from the same stream, so a longer budget replays every
  /// shorter one as a prefix.
  std::size_t sweeps_per_restart = 1000;
  /// 0 selects automatic temperatures from the coefficient magnitudes.
  double t_initial = 0.0;
  double t_final = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

/// Hot and cold temperatures: a flip costing the largest possible energy is
/// accepted with probability 1/2 at the start; one costing the smallest
/// nonzero coefficient with probability 1/100 at the end.
inline std::pair<double, double> auto_temperatures(const QuboProblem& q) {
  double max_delta = 0.0;
  double min_delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double self = std::abs(q.diagonal(i) + q.linear()[i]);
    double total = self;
    if (self > 0.0) min_delta = std::min(min_delta, self);
    for (const auto& c : q.couplings(i)) {
      const double v = 2.0 * std::abs(c.value);
      total += v;
      if (v > 0.0) min_delta = std::min(min_delta, v);
    }
    max_delta = std::max(max_delta, total);
  }
  if (max_delta == 0.0) return {1.0, 1.0};
  return {max_delta / std::log(2.0), min_delta / std::log(100.0)};
}

}  // namespace detail

/// Metropolis single-bit-flip annealing with a geometric temperature ramp
/// inside each cycle. The best state is sampled at the end of every sweep.
inline SolveResult simulated_annealing_qubo(const QuboProblem& q, const AnnealingParams& params = {}) {
  if (params.sweeps == 0 || params.sweeps_per_restart == 0) throw std::invalid_argument("sweep counts must be positive");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t dim = q.dim();
  auto [t_hot, t_cold] = detail::auto_temperatures(q);
  if (params.t_initial > 0.0) t_hot = params.t_initial;
  if (params.t_final > 0.0) t_cold = params.t_final;
  if (!(t_hot > 0.0) || !(t_cold > 0.0)) throw std::invalid_argument("temperatures must be positive");

  Rng rng(params.seed);
  const std::size_t cycle = params.sweeps_per_restart;
  BitVector x(dim), best;
  std::vector<double> field(dim);
  double energy = 0.0;
  double best_energy = std::numeric_limits<double>::infinity();
  for (std::size_t sweep = 0; sweep < params.sweeps; ++sweep) {
    const std::size_t pos = sweep % cycle;
    if (pos == 0) {
      for (auto& b : x) b = rng.uniform() < 0.5 ? 1 : 0;
      for (std::size_t i = 0; i < dim; ++i) field[i] = q.local_field(x, i);
      energy = q.energy_unchecked(x);
    }
    const double frac = cycle > 1 ? static_cast<double>(pos) / static_cast<double>(cycle - 1) : 1.0;
    const double temperature = t_hot * std::pow(t_cold / t_hot, frac);
    for (std::size_t i = 0; i < dim; ++i) {
      const double delta = x[i] ? -field[i] : field[i];
      const double u = rng.uniform();
      if (delta <= 0.0 || u < std::exp(-delta / temperature)) {
        x[i] ^= 1u;
        energy += delta;
        const double sign = x[i] ? 2.0 : -2.0;
        for (const auto& c : q.couplings(i)) field[c.col] += sign * c.value;
      }
    }
    if (energy < best_energy) {
      // Re-score exactly so drift in the running energy cannot fake progress.
      const double exact = q.energy_unchecked(x);
      energy = exact;
      if (exact < best_energy) {
        best_energy = exact;
        best = x;
      }
    }
  }
  SolveResult r;
  r.bits = std::move(best);
  r.objective = q.energy(r.bits);
  r.evaluations = static_cast<std::uint64_t>(params.sweeps) * dim;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace qhdpart
