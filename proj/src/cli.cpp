#include "hswarm/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "hswarm/config.hpp"
#include "hswarm/errors.hpp"
#include "hswarm/metrics.hpp"
#include "hswarm/orchestrator.hpp"
#include "hswarm/remote.hpp"

namespace hswarm {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Published search grid for the PSO coefficients.
const std::vector<double> kGridInertia{0.1, 0.2, 0.3};
const std::vector<double> kGridCognitive{0.1, 0.2, 0.3, 0.4, 0.5};
const std::vector<double> kGridSocial{0.2, 0.3, 0.4, 0.5, 0.6};
const std::vector<double> kGridRepel{0.01, 0.05, 0.1};
const std::vector<double> kGridStepLength{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

std::atomic<bool> g_stop_requested{false};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw std::runtime_error(path + " is not valid JSON");
  return j;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

/// Applies command-line overrides on top of the config document and
/// validates the result as a whole.
AppConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                      const std::optional<std::size_t>& jobs, const std::string& mode) {
  json doc = json::object();
  if (!path.empty()) {
    const auto text = read_file(path);
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      doc = json::parse(text, nullptr, false);
      if (doc.is_discarded()) throw ConfigError("<root>", path + " is not valid JSON");
    }
  }
  if (!doc.is_object()) throw ConfigError("<root>", "must be an object");
  if (seed) doc["seed"] = *seed;
  if (jobs) doc["jobs"] = *jobs;
  if (!mode.empty()) doc["mode"] = mode;
  return parse_config_text(doc.dump());
}

PsoHyperparams draw_pso(SeededStream& rng) {
  auto pick = [&rng](const std::vector<double>& grid) { return grid[rng.index(grid.size())]; };
  PsoHyperparams hp;
  hp.inertia = pick(kGridInertia);
  hp.cognitive = pick(kGridCognitive);
  hp.social = pick(kGridSocial);
  hp.repel = pick(kGridRepel);
  hp.step_length = pick(kGridStepLength);
  return hp;
}

json pso_json(const PsoHyperparams& hp) {
  return {{"step_length", hp.step_length},
          {"inertia", hp.inertia},
          {"cognitive", hp.cognitive},
          {"social", hp.social},
          {"repel", hp.repel}};
}

std::size_t iteration_calls(const RunTrace& trace) {
  std::size_t total = 0;
  for (const auto& r : trace.records()) total += r.evaluator_calls;
  return total;
}

std::string stop_reason(const RunResult& r, const RunConfig& cfg) {
  if (r.stopped_early) return "interrupted";
  if (!r.trace.records().empty() && r.trace.records().back().stale >= cfg.patience) return "patience";
  return "max_iterations";
}

json run_report(const AppConfig& cfg, const Workload& w, const RunResult& r) {
  json report = {{"config", to_json(cfg)},
                 {"utility", w.utility->name()},
                 {"dataset_size", w.utility->dataset_size()},
                 {"iterations", r.trace.size()},
                 {"stop_reason", stop_reason(r, cfg.run)},
                 {"final_utility", r.system.utility},
                 {"recorded_utility", r.system.recorded_utility},
                 {"best_utility", r.trace.records().empty() ? json(nullptr) : json(r.trace.records().back().best_utility)},
                 {"edges", r.system.dag.edges.size()},
                 {"evaluator_calls",
                  {{"iterations", iteration_calls(r.trace)},
                   {"setup", r.setup_evaluator_calls},
                   {"final", r.final_evaluator_calls},
                   {"total", iteration_calls(r.trace) + r.setup_evaluator_calls + r.final_evaluator_calls}}}};
  report["config"].erase("jobs");
  if (w.hidden_dag) {
    report["hidden_dag"] = to_json(*w.hidden_dag);
    report["hidden_edit_distance"] = edge_edit_distance(r.system.dag, *w.hidden_dag);
  }
  return report;
}

void write_task_file(const fs::path& path, const UtilityFunction& u) {
  const auto* affine = dynamic_cast<const AffineTargetUtility*>(&u);
  if (!affine) return;
  std::string body;
  for (std::size_t k = 0; k < affine->inputs().size(); ++k)
    body += json{{"input", affine->inputs()[k]}, {"target", affine->targets()[k]}}.dump() + "\n";
  write_file(path, body);
}

struct OptimizeArgs {
  std::string config, mode, out = "out", pool;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::size_t stop_after = 0;
  bool resume = false;
  bool quiet = false;
};

int cmd_optimize(const OptimizeArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(a.config, a.seed, a.jobs, a.mode);
  auto w = make_workload(cfg);
  if (!a.pool.empty()) {
    w.initial_pool = load_pool(a.pool);
    if (w.initial_pool.size() != cfg.run.n_experts)
      throw ConfigError("--pool", "pool has " + std::to_string(w.initial_pool.size()) + " experts, n_experts is " +
                                      std::to_string(cfg.run.n_experts));
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const auto ckpt = dir / "checkpoint.json";

  OptimizeOptions opts;
  opts.checkpoint_path = ckpt.string();
  opts.stop_after = a.stop_after;
  if (a.resume && fs::exists(ckpt)) opts.resume = read_json(ckpt.string());
  if (!a.quiet)
    opts.on_iteration = [&err](const IterationRecord& r) {
      err << "iteration " << r.iteration << (r.ran_role ? " role" : "") << (r.ran_weight ? " weight" : "")
          << " best=" << r.best_utility << " calls=" << r.evaluator_calls << '\n';
    };

  const auto result = optimize(cfg.run, w.initial_pool, *w.utility, opts);
  write_file(dir / "best_system.json", to_json(result.system).dump(2) + "\n");
  write_file(dir / "trace.jsonl", result.trace.to_jsonl());
  write_file(dir / "metrics.csv", trace_to_csv(result.trace));
  const auto report = run_report(cfg, w, result);
  write_file(dir / "report.json", report.dump(2) + "\n");
  save_pool((dir / "pool").string(), result.system.experts);
  write_task_file(dir / "task.jsonl", *w.utility);

  out << json{{"out", dir.string()},
              {"iterations", result.trace.size()},
              {"stop_reason", report["stop_reason"]},
              {"final_utility", result.system.utility}}
             .dump()
      << '\n';
  return 0;
}

struct DecodeArgs {
  std::string matrix, out;
  double top_p = 0.8;
  std::optional<double> tau;
  std::uint64_t seed = 0;
  std::size_t samples = 1;
};

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
  auto m = matrix_from_json(read_json(a.matrix));
  if (a.tau) m = prune_threshold(m, *a.tau);
  if (!(a.top_p > 0.0 && a.top_p <= 1.0)) throw ConfigError("--top-p", "must lie in (0, 1]");
  SeededStream rng(a.seed);
  json result;
  if (a.samples == 1) {
    result = to_json(g_decode(m, a.top_p, rng));
  } else {
    result = json::array();
    for (std::size_t k = 0; k < a.samples; ++k) result.push_back(to_json(g_decode(m, a.top_p, rng)));
  }
  if (a.out.empty())
    out << result.dump() << '\n';
  else
    write_file(a.out, result.dump(2) + "\n");
  return 0;
}

struct EvaluateArgs {
  std::string system, task;
  long timeout_ms = 30000;
  int retries = 0;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto system = system_from_json(read_json(a.system));
  std::ifstream in(a.task);
  if (!in) throw std::runtime_error("cannot read " + a.task);
  std::vector<std::vector<double>> inputs, targets;
  std::vector<TextExample> texts;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("input"))
      throw std::runtime_error(a.task + ":" + std::to_string(lineno) + ": expected an object with \"input\"");
    if (j["input"].is_string()) {
      texts.push_back({j["input"].get<std::string>(), j.value("answer", std::string{})});
    } else {
      inputs.push_back(j["input"].get<std::vector<double>>());
      targets.push_back(j.at("target").get<std::vector<double>>());
    }
  }
  if (!texts.empty() && !inputs.empty()) throw std::runtime_error("task file mixes text and vector examples");
  if (texts.empty() && inputs.empty()) throw std::runtime_error("task file " + a.task + " has no examples");

  json result;
  if (!inputs.empty()) {
    AffineTargetUtility u(inputs, targets);
    AffineEvaluator eval;
    json outputs = json::array();
    for (const auto& x : inputs)
      outputs.push_back(execute(system.dag, system.assignment, system.experts, Message{x}, eval).output.vec());
    result = {{"utility", u.evaluate(system.dag, system.assignment, system.experts).value},
              {"examples", inputs.size()},
              {"outputs", outputs}};
  } else {
    RemoteOptions opts;
    opts.timeout = std::chrono::milliseconds(a.timeout_ms);
    opts.retries = a.retries;
    auto evaluator = std::make_shared<RemoteEvaluator>(remote_options_from_env(opts));
    json outputs = json::array();
    for (const auto& ex : texts)
      outputs.push_back(execute(system.dag, system.assignment, system.experts, Message{ex.input}, *evaluator).output.text());
    ExactMatchUtility u(texts, evaluator);
    result = {{"utility", u.evaluate(system.dag, system.assignment, system.experts).value},
              {"examples", texts.size()},
              {"outputs", outputs}};
  }
  out << result.dump() << '\n';
  return 0;
}

struct AnalyzeArgs {
  std::string correct, trace, csv, out;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  if (a.correct.empty() && a.trace.empty()) throw ConfigError("--correct", "give --correct and/or --trace");
  json result = json::object();
  if (!a.correct.empty()) {
    const auto doc = read_json(a.correct);
    const auto experts = doc.at("experts").get<std::vector<std::vector<bool>>>();
    const auto system = doc.at("system").get<std::vector<bool>>();
    std::vector<AblationInput> ablations;
    for (const auto& x : doc.value("ablations", json::array()))
      ablations.push_back({x.value("name", std::string{}), x.at("wo_role").get<double>(), x.at("wo_weight").get<double>(),
                           x.at("role_baseline_avg").get<double>(), x.at("weight_baseline_avg").get<double>()});
    result = analysis_report(bucketize(experts, system), ablations);
  }
  if (!a.trace.empty()) {
    RunTrace trace;
    std::ifstream in(a.trace);
    if (!in) throw std::runtime_error("cannot read " + a.trace);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) trace.append(iteration_record_from_json(json::parse(line)));
    const auto csv = trace_to_csv(trace);
    if (!a.csv.empty()) write_file(a.csv, csv);
    result["trace_iterations"] = trace.size();
    if (trace.size() > 0) result["trace_best_utility"] = trace.records().back().best_utility;
  }
  if (a.out.empty())
    out << result.dump() << '\n';
  else
    write_file(a.out, result.dump(2) + "\n");
  return 0;
}

struct SweepArgs {
  std::string config, mode, out = "sweep";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::size_t runs = 50;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const auto base = load_config(a.config, a.seed, a.jobs, a.mode);
  if (a.runs < 1) throw ConfigError("--runs", "must be >= 1");
  const auto w = make_workload(base);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  auto rng = SeededStream(base.run.seed).derive({key(StreamTag::sweep)});

  std::string lines;
  std::optional<RunResult> best;
  json best_entry;
  for (std::size_t k = 0; k < a.runs; ++k) {
    RunConfig cfg = base.run;
    cfg.role_pso = draw_pso(rng);
    cfg.weight_pso = draw_pso(rng);
    cfg.seed = base.run.seed + 1 + k;
    auto r = optimize(cfg, w.initial_pool, *w.utility);
    json entry = {{"run", k},
                  {"seed", cfg.seed},
                  {"role_pso", pso_json(cfg.role_pso)},
                  {"weight_pso", pso_json(cfg.weight_pso)},
                  {"iterations", r.trace.size()},
                  {"final_utility", r.system.utility},
                  {"evaluator_calls", iteration_calls(r.trace) + r.setup_evaluator_calls + r.final_evaluator_calls}};
    lines += entry.dump() + "\n";
    err << "run " << k << " utility=" << r.system.utility << '\n';
    if (!best || r.system.utility > best->system.utility) {
      best = std::move(r);
      best_entry = entry;
    }
  }
  write_file(dir / "sweep.jsonl", lines);
  write_file(dir / "best_system.json", to_json(best->system).dump(2) + "\n");
  out << json{{"out", dir.string()}, {"runs", a.runs}, {"best", best_entry}}.dump() << '\n';
  return 0;
}

struct StubArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve_stub(const StubArgs& a, std::ostream& out) {
  EchoStubServer server;
  server.start(a.host, a.port);
  out << json{{"url", server.url()}}.dump() << std::endl;
  g_stop_requested = false;
  auto previous_int = std::signal(SIGINT, [](int) { g_stop_requested = true; });
  auto previous_term = std::signal(SIGTERM, [](int) { g_stop_requested = true; });
  while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  server.stop();
  return 0;
}

json error_json(const std::exception& e) {
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) return {{"error", "config"}, {"key", c->key()}, {"message", e.what()}};
  if (const auto* s = dynamic_cast<const StepError*>(&e))
    return {{"error", "step"}, {"step", s->step()}, {"index", s->index()}, {"message", e.what()}};
  if (const auto* x = dynamic_cast<const ExecutionError*>(&e)) return {{"error", "execution"}, {"node", x->node()}, {"message", e.what()}};
  if (dynamic_cast<const ContractViolation*>(&e)) return {{"error", "contract"}, {"message", e.what()}};
  if (dynamic_cast<const json::exception*>(&e)) return {{"error", "format"}, {"message", e.what()}};
  return {{"error", "runtime"}, {"message", e.what()}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint structure and weight search for multi-expert systems"};
  app.name("hswarm");
  app.require_subcommand(1);

  OptimizeArgs opt;
  auto* optimize_cmd = app.add_subcommand("optimize", "Run the alternating role/weight search");
  optimize_cmd->add_option("--config", opt.config, "JSON config file (absent keys take defaults)");
  optimize_cmd->add_option("--seed", opt.seed, "Seed; overrides the config");
  optimize_cmd->add_option("--jobs", opt.jobs, "Parallel evaluations per step");
  optimize_cmd->add_option("--mode", opt.mode, "full, role_only or weight_only")
      ->check(CLI::IsMember({"full", "role_only", "weight_only"}));
  optimize_cmd->add_option("--out", opt.out, "Output directory")->capture_default_str();
  optimize_cmd->add_option("--pool", opt.pool, "Initial expert pool directory");
  optimize_cmd->add_flag("--resume", opt.resume, "Continue from <out>/checkpoint.json when present");
  optimize_cmd->add_option("--stop-after", opt.stop_after, "Interrupt after this many iterations");
  optimize_cmd->add_flag("--quiet", opt.quiet, "No per-iteration progress on stderr");

  DecodeArgs dec;
  auto* decode_cmd = app.add_subcommand("decode", "Decode a continuous adjacency matrix into a DAG");
  decode_cmd->add_option("--matrix", dec.matrix, "JSON file holding the matrix as an array of rows")->required();
  decode_cmd->add_option("--top-p", dec.top_p, "Top-p threshold")->capture_default_str();
  decode_cmd->add_option("--tau", dec.tau, "Prune entries <= tau before decoding");
  decode_cmd->add_option("--seed", dec.seed, "Seed")->capture_default_str();
  decode_cmd->add_option("--samples", dec.samples, "Number of decodes")->check(CLI::PositiveNumber)->capture_default_str();
  decode_cmd->add_option("--out", dec.out, "Write to this file instead of stdout");

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Execute a saved system on a JSONL task file");
  evaluate_cmd->add_option("--system", ev.system, "best_system.json")->required();
  evaluate_cmd->add_option("--task", ev.task, "JSONL of {input, target} or {input, answer}")->required();
  evaluate_cmd->add_option("--timeout-ms", ev.timeout_ms, "Remote request timeout")->capture_default_str();
  evaluate_cmd->add_option("--retries", ev.retries, "Remote retries")->capture_default_str();

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Collaborative-gain and ablation report");
  analyze_cmd->add_option("--correct", an.correct, "JSON {experts, system, ablations}");
  analyze_cmd->add_option("--trace", an.trace, "trace.jsonl to summarize");
  analyze_cmd->add_option("--csv", an.csv, "Write the trace as CSV here");
  analyze_cmd->add_option("--out", an.out, "Write the report here instead of stdout");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Random search over the PSO hyperparameter grid");
  sweep_cmd->add_option("--config", sw.config, "JSON config file");
  sweep_cmd->add_option("--runs", sw.runs, "Number of runs")->capture_default_str();
  sweep_cmd->add_option("--seed", sw.seed, "Base seed");
  sweep_cmd->add_option("--jobs", sw.jobs, "Parallel evaluations per step");
  sweep_cmd->add_option("--mode", sw.mode, "full, role_only or weight_only")
      ->check(CLI::IsMember({"full", "role_only", "weight_only"}));
  sweep_cmd->add_option("--out", sw.out, "Output directory")->capture_default_str();

  StubArgs st;
  auto* stub_cmd = app.add_subcommand("serve-stub", "Serve the echo stub for remote-mode tests");
  stub_cmd->add_option("--host", st.host, "Bind address")->capture_default_str();
  stub_cmd->add_option("--port", st.port, "Port (0 picks a free one)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (optimize_cmd->parsed()) return cmd_optimize(opt, out, err);
    if (decode_cmd->parsed()) return cmd_decode(dec, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ev, out);
    if (analyze_cmd->parsed()) return cmd_analyze(an, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sw, out, err);
    if (stub_cmd->parsed()) return cmd_serve_stub(st, out);
  } catch (const ConfigError& e) {
    err << error_json(e).dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << error_json(e).dump() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hswarm
