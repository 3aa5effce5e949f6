#pragma once

// Method dispatch, run records and benchmark manifests.
//
// Manifest: one `<path> <k>` pair per line, '#' starts a comment, relative
// paths resolve against the manifest's directory.
//
// CSV columns (header always written):
//   instance,n,m,density_pct,k,method,modularity,energy,wall_time,seed,config_digest,status,error

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qhdpart/graph.hpp"
#include "qhdpart/multilevel.hpp"
#include "qhdpart/oracles.hpp"
#include "qhdpart/parallel.hpp"
#include "qhdpart/qhd.hpp"
#include "qhdpart/qubo.hpp"

namespace qhdpart {

enum class Method { qhd, sa, brute, greedy };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::qhd: return "qhd";
    case Method::sa: return "sa";
    case Method::brute: return "brute";
    default: return "greedy";
  }
}

inline Method method_from_string(const std::string& s) {
  if (s == "qhd") return Method::qhd;
  if (s == "sa") return Method::sa;
  if (s == "brute") return Method::brute;
  if (s == "greedy") return Method::greedy;
  throw std::invalid_argument("unknown method '" + s + "' (expected qhd, sa, brute or greedy)");
}

struct MethodOptions {
  PipelineConfig pipeline;  ///< k, solver params and seed live here
  AnnealingParams annealing;
  BruteForceModularityOptions brute;
};

/// Applies a JSON config object. Recognised keys:
///   method, k, theta, alpha, beta, sweep_cap, candidates, variable_cap,
///   schedule, t_final, steps, batch, samples, seed, backend, phase_noise,
///   threads, weights{w1,lambda_a,lambda_s,w3},
///   annealing{sweeps,sweeps_per_restart,t_initial,t_final}, search_cap.
/// Unknown keys are rejected. Returns the method when one is given.
inline std::optional<Method> apply_config(const nlohmann::json& j, MethodOptions& o) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::vector<std::string> known{
      "method", "k", "theta", "alpha", "beta", "sweep_cap", "candidates", "variable_cap", "schedule", "t_final",
      "steps", "batch", "samples", "seed", "backend", "phase_noise", "threads", "weights", "annealing", "search_cap"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown config key '" + key + "'");
  auto& p = o.pipeline;
  auto& s = p.solver;
  std::optional<Method> method;
  try {
    if (j.contains("method")) method = method_from_string(j["method"].get<std::string>());
    if (j.contains("k")) p.k = j["k"].get<GroupId>();
    if (j.contains("theta")) p.theta = j["theta"].get<std::size_t>();
    if (j.contains("alpha")) p.match.alpha = j["alpha"].get<double>();
    if (j.contains("beta")) p.match.beta = j["beta"].get<double>();
    if (j.contains("sweep_cap")) p.sweep_cap = j["sweep_cap"].get<std::size_t>();
    if (j.contains("candidates")) p.base_candidates = j["candidates"].get<std::size_t>();
    if (j.contains("variable_cap")) p.qubo.variable_cap = j["variable_cap"].get<std::size_t>();
    const std::string preset = j.value("schedule", s.schedule.name());
    const double t_final = j.value("t_final", s.schedule.t_final());
    const std::size_t steps = j.value("steps", s.schedule.steps());
    if (j.contains("schedule") || j.contains("t_final") || j.contains("steps"))
      s.schedule = QhdSchedule::from_name(preset, t_final, steps);
    if (j.contains("batch")) s.batch = j["batch"].get<std::size_t>();
    if (j.contains("samples")) s.samples = j["samples"].get<std::size_t>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("backend")) s.backend = backend_from_string(j["backend"].get<std::string>());
    if (j.contains("phase_noise")) s.phase_noise = j["phase_noise"].get<double>();
    if (j.contains("threads")) s.threads = j["threads"].get<std::size_t>();
    if (j.contains("weights")) {
      PenaltyWeights w = p.weights.value_or(PenaltyWeights{});
      const auto& jw = j["weights"];
      w.w1 = jw.value("w1", w.w1);
      w.lambda_a = jw.value("lambda_a", w.lambda_a);
      w.lambda_s = jw.value("lambda_s", w.lambda_s);
      w.w3 = jw.value("w3", w.w3);
      p.weights = w;
    }
    if (j.contains("annealing")) {
      const auto& ja = j["annealing"];
      o.annealing.sweeps = ja.value("sweeps", o.annealing.sweeps);
      o.annealing.sweeps_per_restart = ja.value("sweeps_per_restart", o.annealing.sweeps_per_restart);
      o.annealing.t_initial = ja.value("t_initial", o.annealing.t_initial);
      o.annealing.t_final = ja.value("t_final", o.annealing.t_final);
    }
    if (j.contains("search_cap")) o.brute.search_cap = j["search_cap"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return method;
}

/// Canonical description of everything that influences a run's output.
inline nlohmann::json config_json(Method method, const MethodOptions& o) {
  const auto& p = o.pipeline;
  const auto& s = p.solver;
  nlohmann::json j = {
      {"method", to_string(method)},
      {"k", p.k},
      {"seed", s.seed},
  };
  switch (method) {
    case Method::qhd:
      j["theta"] = p.theta;
      j["alpha"] = p.match.alpha;
      j["beta"] = p.match.beta;
      j["sweep_cap"] = p.sweep_cap;
      j["candidates"] = p.base_candidates;
      j["schedule"] = s.schedule.name();
      j["t_final"] = s.schedule.t_final();
      j["steps"] = s.schedule.steps();
      j["batch"] = s.batch;
      j["samples"] = s.samples;
      j["backend"] = to_string(s.backend);
      j["phase_noise"] = s.phase_noise;
      j["variable_cap"] = p.qubo.variable_cap;
      break;
    case Method::sa:
      j["sweeps"] = o.annealing.sweeps;
      j["sweeps_per_restart"] = o.annealing.sweeps_per_restart;
      j["t_initial"] = o.annealing.t_initial;
      j["t_final"] = o.annealing.t_final;
      j["variable_cap"] = p.qubo.variable_cap;
      break;
    case Method::brute:
      j["search_cap"] = o.brute.search_cap;
      break;
    case Method::greedy:
      j["sweep_cap"] = p.sweep_cap;
      break;
  }
  if (p.weights && method != Method::brute && method != Method::greedy)
    j["weights"] = {{"w1", p.weights->w1}, {"lambda_a", p.weights->lambda_a}, {"lambda_s", p.weights->lambda_s}, {"w3", p.weights->w3}};
  return j;
}

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
inline std::string config_digest(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct MethodOutcome {
  Partition partition;
  double modularity = 0.0;
  /// Penalised objective -w1 Q + lambda_s Q_S of the final partition.
  double energy = 0.0;
  nlohmann::json report;
  double wall_seconds = 0.0;
};

inline MethodOutcome run_method(const Graph& g, Method method, const MethodOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = o.pipeline;
  if (cfg.k < 2) throw std::invalid_argument("k must be at least 2, got " + std::to_string(cfg.k));
  detail::require_weight(g);
  MethodOutcome out;
  switch (method) {
    case Method::qhd: {
      PipelineResult r = partition_graph(g, cfg);
      out.partition = std::move(r.partition);
      out.report = to_json(r.report);
      break;
    }
    case Method::sa: {
      const PenaltyWeights w = cfg.weights.value_or(PenaltyWeights::defaults(g));
      QuboProblem q = build_qubo(g, cfg.k, w, cfg.qubo);
      AnnealingParams ap = o.annealing;
      ap.seed = cfg.solver.seed;
      SolveResult sa = simulated_annealing_qubo(q, ap);
      DecodeResult decoded = decode_assignment(g, q, sa.bits, true);
      out.partition = std::move(decoded.partition);
      out.report = {{"qubo_dim", q.dim()},
                    {"qubo_energy", sa.objective},
                    {"repaired_nodes", decoded.repaired.size()},
                    {"evaluations", sa.evaluations},
                    {"solver_seconds", sa.wall_seconds}};
      break;
    }
    case Method::brute: {
      SolveResult bf = brute_force_modularity(g, cfg.k, o.brute);
      out.partition = std::move(*bf.partition);
      out.report = {{"proven_optimal", bf.proven_optimal}, {"evaluations", bf.evaluations}, {"solver_seconds", bf.wall_seconds}};
      break;
    }
    case Method::greedy: {
      Partition start_p = random_partition(g.node_count(), cfg.k, derive_seed(cfg.solver.seed, 0x9ee0));
      RefineResult r = refine(g, std::move(start_p), cfg.sweep_cap);
      out.report = {{"initial_modularity", r.initial_modularity}, {"sweeps", r.sweeps}, {"moves", r.moves}};
      out.partition = std::move(r.partition);
      break;
    }
  }
  out.modularity = modularity(g, out.partition);
  out.energy = partition_objective(g, out.partition, cfg.weights.value_or(PenaltyWeights::defaults(g)));
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct RunRecord {
  std::string instance;
  std::size_t n = 0;
  std::size_t m = 0;
  double density_pct = 0.0;
  std::size_t k = 0;
  std::string method;
  double modularity = 0.0;
  double energy = 0.0;
  double wall_time = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string status = "ok";
  std::string error;
};

struct ManifestEntry {
  std::string path;
  std::size_t k = 0;
  std::size_t line = 0;
};

inline std::vector<ManifestEntry> read_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string path, extra;
    long long k = 0;
    if (!(ls >> path)) continue;
    if (!(ls >> k) || (ls >> extra)) throw ParseError(line_no, "expected '<path> <k>'");
    if (k < 2) throw ParseError(line_no, "k must be at least 2");
    std::filesystem::path p(path);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    out.push_back({p.string(), static_cast<std::size_t>(k), line_no});
  }
  return out;
}

inline std::vector<ManifestEntry> read_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
  return read_manifest(in, std::filesystem::path(path).parent_path());
}

inline std::string instance_name(const std::string& path) { return std::filesystem::path(path).stem().string(); }

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

inline const char* csv_header() {
  return "instance,n,m,density_pct,k,method,modularity,energy,wall_time,seed,config_digest,status,error";
}

inline void write_csv_row(std::ostream& out, const RunRecord& r) {
  const bool ok = r.status == "ok";
  out << detail::csv_escape(r.instance) << ',' << r.n << ',' << r.m << ',' << detail::fmt(r.density_pct, "%.4f") << ','
      << r.k << ',' << r.method << ',' << (ok ? detail::fmt(r.modularity) : "") << ','
      << (ok ? detail::fmt(r.energy) : "") << ',' << detail::fmt(r.wall_time, "%.3f") << ',' << r.seed << ','
      << r.config_digest << ',' << r.status << ',' << detail::csv_escape(r.error) << '\n';
}

/// Instance | Nodes | Edges | Density % | one modularity column per method.
inline void write_markdown_summary(std::ostream& out, const std::vector<RunRecord>& records,
                                   const std::vector<std::string>& methods) {
  out << "| Instance | Nodes | Edges | Density % |";
  for (const auto& m : methods) out << ' ' << m << " |";
  out << "\n|---|---:|---:|---:|";
  for (std::size_t i = 0; i < methods.size(); ++i) out << "---:|";
  out << '\n';
  std::vector<std::string> seen;
  for (const auto& r : records) {
    if (std::find(seen.begin(), seen.end(), r.instance + "\x1f" + std::to_string(r.k)) != seen.end()) continue;
    seen.push_back(r.instance + "\x1f" + std::to_string(r.k));
    out << "| " << r.instance << " | " << r.n << " | " << r.m << " | " << detail::fmt(r.density_pct, "%.2f") << " |";
    for (const auto& m : methods) {
      auto it = std::find_if(records.begin(), records.end(), [&](const RunRecord& x) {
        return x.instance == r.instance && x.k == r.k && x.method == m;
      });
      if (it == records.end() || it->status != "ok")
        out << " n/a |";
      else
        out << ' ' << detail::fmt(it->modularity, "%.4f") << " |";
    }
    out << '\n';
  }
}

struct BenchOptions {
  std::vector<Method> methods{Method::qhd};
  MethodOptions method_options;
  std::size_t parallel = 1;
  /// Called once per finished record (from worker threads, serialised).
  std::function<void(const RunRecord&)> on_record;
};

/// Runs every method on every manifest instance. Failures become records
/// with status "error"; the run continues. Records come back in manifest
/// order regardless of `parallel`.
inline std::vector<RunRecord> run_bench(const std::vector<ManifestEntry>& manifest, const BenchOptions& options) {
  std::vector<std::vector<RunRecord>> slots(manifest.size());
  std::mutex report_mutex;
  parallel_for(manifest.size(), std::max<std::size_t>(1, options.parallel), [&](std::size_t i) {
    const auto& entry = manifest[i];
    RunRecord base;
    base.instance = instance_name(entry.path);
    base.k = entry.k;
    base.seed = options.method_options.pipeline.solver.seed;
    std::optional<Graph> g;
    std::string load_error;
    try {
      g = load_edge_list_file(entry.path);
      base.n = g->node_count();
      base.m = g->edge_count();
      base.density_pct = 100.0 * edge_density(*g);
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    for (Method method : options.methods) {
      RunRecord r = base;
      r.method = to_string(method);
      MethodOptions mo = options.method_options;
      mo.pipeline.k = static_cast<GroupId>(entry.k);
      r.config_digest = config_digest(config_json(method, mo));
      if (!g) {
        r.status = "error";
        r.error = load_error;
      } else {
        try {
          MethodOutcome out = run_method(*g, method, mo);
          r.modularity = out.modularity;
          r.energy = out.energy;
          r.wall_time = out.wall_seconds;
        } catch (const std::exception& e) {
          r.status = "error";
          r.error = e.what();
        }
      }
      if (options.on_record) {
        std::lock_guard lock(report_mutex);
        options.on_record(r);
      }
      slots[i].push_back(std::move(r));
    }
  });
  std::vector<RunRecord> records;
  for (auto& s : slots)
    for (auto& r : s) records.push_back(std::move(r));
  return records;
}

}  // namespace qhdpart
