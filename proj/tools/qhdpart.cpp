// qhdpart command-line frontend: partition, bench, qubo.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qhdpart/bench.hpp"
#include "qhdpart/qubo_io.hpp"

namespace {

using namespace qhdpart;
using nlohmann::json;

struct SolverFlags {
  std::string config;
  GroupId k = 0;
  std::size_t theta = 0;
  std::string schedule;
  double t_final = 0.0;
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::string backend;
  std::size_t threads = 0;
  std::size_t candidates = 0;
  std::size_t sa_sweeps = 0;
  std::size_t variable_cap = 0;
  CLI::App* app = nullptr;

  void attach(CLI::App& sub, bool with_k) {
    app = &sub;
    sub.add_option("--config", config, "JSON config file (flags override it)");
    if (with_k) sub.add_option("--k", k, "number of groups (>= 2)");
    sub.add_option("--theta", theta, "coarsening threshold");
    sub.add_option("--schedule", schedule, "damping schedule: linear or power");
    sub.add_option("--t-final", t_final, "evolution time");
    sub.add_option("--steps", steps, "integration steps");
    sub.add_option("--batch", batch, "mean-field batch size");
    sub.add_option("--samples", samples, "samples per state");
    sub.add_option("--seed", seed, "master seed");
    sub.add_option("--backend", backend, "auto, exact or meanfield");
    sub.add_option("--threads", threads, "worker threads inside one solve");
    sub.add_option("--candidates", candidates, "base solutions refined before picking the best");
    sub.add_option("--sa-sweeps", sa_sweeps, "simulated annealing sweeps");
    sub.add_option("--variable-cap", variable_cap, "maximum QUBO size n*k");
  }

  bool given(const std::string& flag) const { return app->get_option(flag)->count() > 0; }

  /// Config file first, then explicit flags.
  std::optional<Method> apply(MethodOptions& o) const {
    std::optional<Method> method;
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw std::runtime_error("cannot open config '" + config + "'");
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw std::invalid_argument("config '" + config + "' is not valid JSON: " + e.what());
      }
      method = apply_config(j, o);
    }
    json overrides = json::object();
    if (app->get_option_no_throw("--k") && given("--k")) overrides["k"] = k;
    if (given("--theta")) overrides["theta"] = theta;
    if (given("--schedule")) overrides["schedule"] = schedule;
    if (given("--t-final")) overrides["t_final"] = t_final;
    if (given("--steps")) overrides["steps"] = steps;
    if (given("--batch")) overrides["batch"] = batch;
    if (given("--samples")) overrides["samples"] = samples;
    if (given("--seed")) overrides["seed"] = seed;
    if (given("--backend")) overrides["backend"] = backend;
    if (given("--threads")) overrides["threads"] = threads;
    if (given("--candidates")) overrides["candidates"] = candidates;
    if (given("--variable-cap")) overrides["variable_cap"] = variable_cap;
    if (given("--sa-sweeps")) overrides["annealing"] = {{"sweeps", sa_sweeps}};
    apply_config(overrides, o);
    return method;
  }
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::string k_message(GroupId k) {
  if (k == 0) return "--k is required (or 'k' in the config)";
  return "--k must be at least 2 (got " + std::to_string(k) + ")";
}

std::string format_fixed(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int cmd_partition(const std::string& input, const std::string& output, const std::string& method_flag,
                  const SolverFlags& flags) {
  MethodOptions options;
  options.pipeline.k = 0;  // must come from --k or the config
  std::optional<Method> method = flags.apply(options);
  if (!method_flag.empty()) method = method_from_string(method_flag);
  if (!method) method = Method::qhd;
  if (options.pipeline.k < 2)
    throw std::invalid_argument(k_message(options.pipeline.k));
  Graph g = load_edge_list_file(input);
  MethodOutcome out = run_method(g, *method, options);

  const std::string name = instance_name(input);
  if (!output.empty()) {
    json assignment = json::object();
    for (NodeId u = 0; u < g.node_count(); ++u) assignment[g.label(u)] = out.partition[u];
    const json config = config_json(*method, options);
    json doc = {{"format", "qhdpart-result"},
                {"instance", name},
                {"n", g.node_count()},
                {"m", g.edge_count()},
                {"total_weight", g.total_weight()},
                {"k", options.pipeline.k},
                {"method", to_string(*method)},
                {"seed", options.pipeline.solver.seed},
                {"modularity", out.modularity},
                {"energy", out.energy},
                {"group_sizes", std::vector<std::size_t>(out.partition.group_sizes().begin(), out.partition.group_sizes().end())},
                {"assignment", assignment},
                {"config", config},
                {"config_digest", config_digest(config)},
                {"report", out.report},
                {"wall_seconds", out.wall_seconds}};
    auto file = open_output(output);
    file << doc.dump(2) << '\n';
    if (!file) throw std::runtime_error("failed writing '" + output + "'");
  }
  std::cout << name << ' ' << g.node_count() << ' ' << g.edge_count() << ' ' << options.pipeline.k << ' '
            << to_string(*method) << ' ' << format_fixed(out.modularity, "%.6f") << ' '
            << format_fixed(out.wall_seconds, "%.3f") << "s\n";
  return 0;
}

std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(method_from_string(item));
  if (out.empty()) throw std::invalid_argument("--methods needs at least one method");
  return out;
}

int cmd_bench(const std::string& manifest_path, const std::string& methods, const std::string& csv_path,
              const std::string& md_path, std::size_t parallel, const SolverFlags& flags) {
  BenchOptions bench;
  flags.apply(bench.method_options);
  bench.methods = parse_methods(methods);
  bench.parallel = parallel;
  bench.on_record = [](const RunRecord& r) {
    std::cerr << r.instance << ' ' << r.method << ' ' << r.status;
    if (r.status == "ok") std::cerr << " Q=" << format_fixed(r.modularity, "%.6f");
    else std::cerr << ": " << r.error;
    std::cerr << '\n';
  };
  const auto manifest = read_manifest_file(manifest_path);
  // Open outputs before running so an unwritable path fails fast.
  std::ofstream csv_file, md_file;
  if (!csv_path.empty()) csv_file = open_output(csv_path);
  if (!md_path.empty()) md_file = open_output(md_path);
  const auto records = run_bench(manifest, bench);

  std::ostream& csv = csv_path.empty() ? std::cout : csv_file;
  csv << csv_header() << '\n';
  for (const auto& r : records) write_csv_row(csv, r);
  if (!md_path.empty()) {
    std::vector<std::string> names;
    for (auto m : bench.methods) names.push_back(to_string(m));
    write_markdown_summary(md_file, records, names);
  }
  return 0;
}

int cmd_qubo(const std::string& input, const std::string& output, std::string sidecar, bool fold,
             const SolverFlags& flags, const std::optional<double>& w1, const std::optional<double>& lambda_a,
             const std::optional<double>& lambda_s, const std::optional<double>& w3) {
  MethodOptions options;
  options.pipeline.k = 0;
  flags.apply(options);
  if (options.pipeline.k < 2)
    throw std::invalid_argument(k_message(options.pipeline.k));
  Graph g = load_edge_list_file(input);
  PenaltyWeights w = options.pipeline.weights.value_or(PenaltyWeights::defaults(g));
  if (w1) w.w1 = *w1;
  if (lambda_a) w.lambda_a = *lambda_a;
  if (lambda_s) w.lambda_s = *lambda_s;
  if (w3) w.w3 = *w3;
  QuboProblem q = build_qubo(g, options.pipeline.k, w, options.pipeline.qubo);
  {
    auto out = open_output(output);
    write_qubo_coo(out, q, fold ? LinearEncoding::folded : LinearEncoding::separate);
    if (!out) throw std::runtime_error("failed writing '" + output + "'");
  }
  if (sidecar.empty()) sidecar = output + ".json";
  json doc = {{"format", "qhdpart-qubo-sidecar"},
              {"qubo_file", std::filesystem::path(output).filename().string()},
              {"instance", instance_name(input)},
              {"dim", q.dim()},
              {"nnz", q.quadratic().size()},
              {"layout", {{"nodes", q.layout().nodes}, {"groups", q.layout().groups}, {"index", "i*k+c"}}},
              {"weights", weights_to_json(w)},
              {"offset", q.offset()},
              {"linear_encoding", fold ? "folded" : "separate"},
              {"labels", g.labels()}};
  auto side = open_output(sidecar);
  side << doc.dump(2) << '\n';
  std::cout << instance_name(input) << ' ' << q.dim() << " variables " << q.quadratic().size() << " terms -> " << output
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modularity partitioning through QUBO and simulated Quantum Hamiltonian Descent"};
  app.require_subcommand(1);

  auto* partition = app.add_subcommand("partition", "partition one graph");
  std::string p_input, p_output, p_method;
  SolverFlags p_flags;
  partition->add_option("--input", p_input, "edge list")->required();
  partition->add_option("--output", p_output, "result JSON path");
  partition->add_option("--method", p_method, "qhd, sa, brute or greedy");
  p_flags.attach(*partition, true);

  auto* bench = app.add_subcommand("bench", "run methods over a manifest of instances");
  std::string b_manifest, b_methods = "qhd", b_csv, b_md;
  std::size_t b_parallel = 1;
  SolverFlags b_flags;
  bench->add_option("--manifest", b_manifest, "manifest file: '<path> <k>' per line")->required();
  bench->add_option("--methods", b_methods, "comma-separated methods");
  bench->add_option("--output-csv", b_csv, "CSV path (stdout when omitted)");
  bench->add_option("--output-md", b_md, "Markdown summary path");
  bench->add_option("--parallel", b_parallel, "instances run concurrently");
  b_flags.attach(*bench, false);

  auto* qubo = app.add_subcommand("qubo", "export the QUBO of a graph");
  std::string q_input, q_output, q_sidecar;
  bool q_fold = false;
  std::optional<double> q_w1, q_la, q_ls, q_w3;
  SolverFlags q_flags;
  qubo->add_option("--input", q_input, "edge list")->required();
  qubo->add_option("--output", q_output, "COO output path")->required();
  qubo->add_option("--sidecar", q_sidecar, "JSON sidecar path (default <output>.json)");
  qubo->add_flag("--fold-linear", q_fold, "fold linear terms into the diagonal");
  qubo->add_option("--w1", q_w1, "modularity weight");
  qubo->add_option("--lambda-a", q_la, "assignment penalty");
  qubo->add_option("--lambda-s", q_ls, "balance penalty");
  qubo->add_option("--w3", q_w3, "intra-group edge bonus");
  q_flags.attach(*qubo, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*partition) return cmd_partition(p_input, p_output, p_method, p_flags);
    if (*bench) return cmd_bench(b_manifest, b_methods, b_csv, b_md, b_parallel, b_flags);
    if (*qubo) return cmd_qubo(q_input, q_output, q_sidecar, q_fold, q_flags, q_w1, q_la, q_ls, q_w3);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
