#include "hswarm/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hswarm/errors.hpp"
#include "hswarm/parallel.hpp"

namespace hswarm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSetupIteration = std::numeric_limits<std::uint64_t>::max();

// JSON has no infinities; unscored records are stored as null.
nlohmann::json score_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double score_from(const nlohmann::json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

void check_unit(const std::string& key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
}

void check_pso(const std::string& key, const PsoHyperparams& hp) {
  try {
    hp.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(key, e.what());
  }
}

nlohmann::json to_json(const PsoHyperparams& hp) {
  return {{"step_length", hp.step_length},
          {"inertia", hp.inertia},
          {"cognitive", hp.cognitive},
          {"social", hp.social},
          {"repel", hp.repel}};
}

nlohmann::json to_json(const Tensor& t) { return {{"shape", t.shape}, {"values", t.values}}; }
Tensor tensor_from(const nlohmann::json& j) {
  return Tensor{j.at("shape").get<std::vector<std::size_t>>(), j.at("values").get<std::vector<double>>()};
}

nlohmann::json to_json(const std::vector<Particle>& particles, const SwarmState& state) {
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : particles)
    ps.push_back({{"position", to_json(p.position)},
                  {"velocity", to_json(p.velocity)},
                  {"personal_best", to_json(p.personal_best)},
                  {"personal_best_score", score_json(p.personal_best_score)}});
  return {{"particles", ps},
          {"state",
           {{"global_best", to_json(state.global_best)},
            {"global_best_score", score_json(state.global_best_score)},
            {"global_worst", to_json(state.global_worst)},
            {"global_worst_score", score_json(state.global_worst_score)}}}};
}

void swarm_from(const nlohmann::json& j, std::vector<Particle>& particles, SwarmState& state) {
  particles.clear();
  for (const auto& p : j.at("particles")) {
    Particle q;
    q.position = tensor_from(p.at("position"));
    q.velocity = tensor_from(p.at("velocity"));
    q.personal_best = tensor_from(p.at("personal_best"));
    q.personal_best_score = score_from(p.at("personal_best_score"), kNegInf);
    particles.push_back(std::move(q));
  }
  const auto& s = j.at("state");
  state.global_best = tensor_from(s.at("global_best"));
  state.global_best_score = score_from(s.at("global_best_score"), kNegInf);
  state.global_worst = tensor_from(s.at("global_worst"));
  state.global_worst_score = score_from(s.at("global_worst_score"), std::numeric_limits<double>::infinity());
}

nlohmann::json pool_json(const ExpertPool& pool) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : pool) {
    nlohmann::json x = {{"params", e.params}};
    if (!e.endpoint.empty()) x["endpoint"] = e.endpoint;
    out.push_back(x);
  }
  return out;
}

ExpertPool pool_from(const nlohmann::json& j) {
  ExpertPool pool;
  for (const auto& x : j) pool.push_back({x.at("params").get<std::vector<double>>(), x.value("endpoint", std::string{})});
  return pool;
}

void write_atomically(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out << body;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::full:
      return "full";
    case RunMode::role_only:
      return "role_only";
    case RunMode::weight_only:
      return "weight_only";
  }
  return "full";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "full") return RunMode::full;
  if (s == "role_only") return RunMode::role_only;
  if (s == "weight_only") return RunMode::weight_only;
  throw ConfigError("mode", "unknown mode '" + s + "' (full, role_only, weight_only)");
}

void RunConfig::validate() const {
  if (n_experts < 1) throw ConfigError("n_experts", "must be >= 1");
  if (swarm_size < 1) throw ConfigError("N", "must be >= 1");
  if (assignments < 1) throw ConfigError("M", "must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p", "must lie in (0, 1]");
  if (max_iterations < 1) throw ConfigError("max_iterations", "must be >= 1");
  if (patience < 1) throw ConfigError("patience", "must be >= 1");
  check_pso("role_pso", role_pso);
  check_pso("weight_pso", weight_pso);
  check_unit("sparsity.tau", sparsity.tau);
  if (!(sparsity.l1_coeff >= 0.0) || !std::isfinite(sparsity.l1_coeff))
    throw ConfigError("sparsity.l1_coeff", "must be >= 0");
  check_unit("dropout.d_r", dropout.role);
  check_unit("dropout.d_w", dropout.weight);
  if (pool.distinct < 1 || pool.repeats < 1) throw ConfigError("pool", "distinct and repeats must be >= 1");
  if (pool.distinct * pool.repeats != n_experts)
    throw ConfigError("pool", "distinct * repeats must equal n_experts");
  if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {{"n_experts", cfg.n_experts},
          {"N", cfg.swarm_size},
          {"M", cfg.assignments},
          {"top_p", cfg.top_p},
          {"max_iterations", cfg.max_iterations},
          {"patience", cfg.patience},
          {"role_pso", to_json(cfg.role_pso)},
          {"weight_pso", to_json(cfg.weight_pso)},
          {"sparsity", {{"mode", to_string(cfg.sparsity.mode)}, {"tau", cfg.sparsity.tau}, {"l1_coeff", cfg.sparsity.l1_coeff}}},
          {"dropout", {{"d_r", cfg.dropout.role}, {"d_w", cfg.dropout.weight}}},
          {"mode", to_string(cfg.mode)},
          {"pool", {{"distinct", cfg.pool.distinct}, {"repeats", cfg.pool.repeats}}},
          {"seed", cfg.seed}};
}

DropoutDecision dropout_gate(double d_r, double d_w, SeededStream& rng) {
  if (!(d_r >= 0.0 && d_r <= 1.0 && d_w >= 0.0 && d_w <= 1.0))
    throw ContractViolation("dropout probabilities must lie in [0, 1]");
  DropoutDecision d;
  d.run_role = !(rng.uniform() < d_r);
  d.run_weight = !(rng.uniform() < d_w);
  if (!d.run_role && !d.run_weight) {
    if (d_r <= d_w)
      d.run_role = true;
    else
      d.run_weight = true;
  }
  return d;
}

void RunTrace::append(IterationRecord record) {
  if (!records_.empty()) {
    if (record.iteration <= records_.back().iteration) throw ContractViolation("trace iterations must increase");
    if (record.best_utility < records_.back().best_utility) throw ContractViolation("trace best utility decreased");
  }
  records_.push_back(std::move(record));
}

nlohmann::json to_json(const IterationRecord& r, bool with_wall_time) {
  nlohmann::json steps = nlohmann::json::array();
  if (r.ran_role) steps.push_back("role");
  if (r.ran_weight) steps.push_back("weight");
  nlohmann::json j = {{"iteration", r.iteration},
                      {"steps", steps},
                      {"best_role_utility", score_json(r.best_role_utility)},
                      {"best_utility", score_json(r.best_utility)},
                      {"iteration_role_best", r.iteration_role_best ? score_json(*r.iteration_role_best) : nlohmann::json(nullptr)},
                      {"iteration_weight_best", r.iteration_weight_best ? score_json(*r.iteration_weight_best) : nlohmann::json(nullptr)},
                      {"jfk_scores", r.jfk_scores},
                      {"best_jfk", r.jfk_scores.empty() ? nlohmann::json(nullptr)
                                                        : nlohmann::json(*std::max_element(r.jfk_scores.begin(), r.jfk_scores.end()))},
                      {"evaluator_calls", r.evaluator_calls},
                      {"improved", r.improved},
                      {"stale", r.stale}};
  if (with_wall_time) j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

IterationRecord iteration_record_from_json(const nlohmann::json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<std::size_t>();
  for (const auto& s : j.at("steps")) {
    r.ran_role = r.ran_role || s == "role";
    r.ran_weight = r.ran_weight || s == "weight";
  }
  r.best_role_utility = score_from(j.at("best_role_utility"), kNegInf);
  r.best_utility = score_from(j.at("best_utility"), kNegInf);
  if (!j.at("iteration_role_best").is_null()) r.iteration_role_best = j["iteration_role_best"].get<double>();
  if (!j.at("iteration_weight_best").is_null()) r.iteration_weight_best = j["iteration_weight_best"].get<double>();
  r.jfk_scores = j.at("jfk_scores").get<std::vector<double>>();
  r.evaluator_calls = j.at("evaluator_calls").get<std::size_t>();
  r.improved = j.at("improved").get<bool>();
  r.stale = j.at("stale").get<std::size_t>();
  r.wall_time_ms = j.value("wall_time_ms", 0.0);
  return r;
}

std::string RunTrace::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    out += to_json(r, false).dump();
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const OptimizedSystem& s) {
  return {{"dag", to_json(s.dag)},
          {"assignment", s.assignment.slots},
          {"experts", pool_json(s.experts)},
          {"matrix", to_json(s.matrix)},
          {"recorded_utility", score_json(s.recorded_utility)},
          {"utility", score_json(s.utility)}};
}

OptimizedSystem system_from_json(const nlohmann::json& j) {
  OptimizedSystem s;
  s.dag = dag_from_json(j.at("dag"));
  s.assignment.slots = j.at("assignment").get<std::vector<std::size_t>>();
  s.experts = pool_from(j.at("experts"));
  s.matrix = matrix_from_json(j.at("matrix"));
  s.recorded_utility = score_from(j.value("recorded_utility", nlohmann::json(nullptr)), kNegInf);
  s.utility = score_from(j.value("utility", nlohmann::json(nullptr)), kNegInf);
  if (s.assignment.slots.size() != s.dag.n) throw ContractViolation("system assignment length differs from dag size");
  return s;
}

namespace {

/// Everything the loop needs to continue; serialized as the checkpoint.
struct LoopState {
  RoleSwarm role;
  ExpertSwarm experts;
  ExpertPool pool;
  std::optional<DagStructure> fixed_dag;
  double best_utility = kNegInf;
  std::size_t stale = 0;
  std::size_t next_iteration = 0;
  bool finished = false;
  RunTrace trace;
  std::size_t setup_calls = 0;
};

nlohmann::json checkpoint_json(const RunConfig& cfg, const LoopState& s) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& r : s.trace.records()) trace.push_back(to_json(r, true));
  nlohmann::json role_best = nullptr;
  if (s.role.best.valid())
    role_best = {{"matrix", to_json(s.role.best.matrix)}, {"dag", to_json(s.role.best.dag)}, {"utility", score_json(s.role.best.utility)}};
  return {{"format", "hswarm-checkpoint"},
          {"format_version", kCheckpointFormatVersion},
          {"config", to_json(cfg)},
          {"next_iteration", s.next_iteration},
          {"finished", s.finished},
          {"best_utility", score_json(s.best_utility)},
          {"stale", s.stale},
          {"setup_evaluator_calls", s.setup_calls},
          {"role_swarm", to_json(s.role.particles, s.role.state)},
          {"role_best", role_best},
          {"expert_swarm", s.experts.particles.empty() ? nlohmann::json(nullptr) : to_json(s.experts.particles, s.experts.state)},
          {"pool", pool_json(s.pool)},
          {"fixed_dag", s.fixed_dag ? to_json(*s.fixed_dag) : nlohmann::json(nullptr)},
          {"trace", trace}};
}

LoopState state_from_checkpoint(const RunConfig& cfg, const nlohmann::json& j) {
  if (j.value("format", "") != "hswarm-checkpoint") throw ContractViolation("not a checkpoint document");
  if (j.value("format_version", 0) != kCheckpointFormatVersion)
    throw ContractViolation("unsupported checkpoint format_version");
  if (j.at("config") != to_json(cfg)) throw ContractViolation("checkpoint was written for a different config");
  LoopState s;
  s.next_iteration = j.at("next_iteration").get<std::size_t>();
  s.finished = j.at("finished").get<bool>();
  s.best_utility = score_from(j.at("best_utility"), kNegInf);
  s.stale = j.at("stale").get<std::size_t>();
  s.setup_calls = j.at("setup_evaluator_calls").get<std::size_t>();
  swarm_from(j.at("role_swarm"), s.role.particles, s.role.state);
  if (!j.at("role_best").is_null()) {
    const auto& b = j["role_best"];
    s.role.best.matrix = matrix_from_json(b.at("matrix"));
    s.role.best.dag = dag_from_json(b.at("dag"));
    s.role.best.utility = score_from(b.at("utility"), kNegInf);
  }
  if (!j.at("expert_swarm").is_null()) swarm_from(j["expert_swarm"], s.experts.particles, s.experts.state);
  s.pool = pool_from(j.at("pool"));
  if (!j.at("fixed_dag").is_null()) s.fixed_dag = dag_from_json(j["fixed_dag"]);
  for (const auto& r : j.at("trace")) s.trace.append(iteration_record_from_json(r));
  return s;
}

LoopState initial_state(const RunConfig& cfg, const ExpertPool& initial_pool, const UtilityFunction& utility,
                        const SeededStream& root) {
  LoopState s;
  auto init_rng = root.derive({key(StreamTag::init_matrices)});
  s.role = RoleSwarm::from_matrices(init_adjacency_swarm(cfg.n_experts, cfg.swarm_size, init_rng));
  s.pool = initial_pool;
  if (cfg.mode != RunMode::role_only) s.experts = ExpertSwarm::from_pool(s.pool);

  if (cfg.mode == RunMode::weight_only) {
    // Fixed structure: the best of the initial decodes.
    const auto identity = Assignment::identity(cfg.n_experts);
    const auto streams = root.derive({key(StreamTag::role_decode), kSetupIteration});
    std::vector<DagStructure> dags(s.role.size());
    std::vector<UtilityResult> scores(s.role.size());
    parallel_for(s.role.size(), cfg.jobs, [&](std::size_t i) {
      auto rng = streams.derive({i});
      dags[i] = g_decode(s.role.matrix(i), cfg.top_p, rng);
      try {
        scores[i] = utility.evaluate(dags[i], identity, s.pool);
      } catch (const std::exception& e) {
        throw StepError("setup", i, e.what());
      }
    });
    std::size_t best = 0;
    for (std::size_t i = 0; i < dags.size(); ++i) {
      s.setup_calls += scores[i].evaluator_calls;
      if (scores[i].value > scores[best].value) best = i;
    }
    s.fixed_dag = dags[best];
    s.role.best = {s.role.matrix(best), dags[best], scores[best].value};
  }
  return s;
}

}  // namespace

RunResult optimize(const RunConfig& cfg, const ExpertPool& initial_pool, const UtilityFunction& utility,
                   const OptimizeOptions& options) {
  cfg.validate();
  if (initial_pool.size() != cfg.n_experts)
    throw ConfigError("n_experts", "pool has " + std::to_string(initial_pool.size()) + " experts, config expects " +
                                       std::to_string(cfg.n_experts));
  const SeededStream root(cfg.seed);
  LoopState s = options.resume ? state_from_checkpoint(cfg, *options.resume) : initial_state(cfg, initial_pool, utility, root);

  const auto identity = Assignment::identity(cfg.n_experts);
  RoleStepOptions role_opts{cfg.top_p, cfg.role_pso, cfg.sparsity, cfg.jobs};
  WeightStepOptions weight_opts{cfg.assignments, cfg.weight_pso, cfg.jobs};

  RunResult result;
  std::size_t ran_here = 0;
  while (!s.finished && s.next_iteration < cfg.max_iterations) {
    if (options.stop_after > 0 && ran_here >= options.stop_after) {
      result.stopped_early = true;
      break;
    }
    const auto it = s.next_iteration;
    const auto t0 = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = it;

    DropoutDecision gate;
    switch (cfg.mode) {
      case RunMode::full: {
        auto rng = root.derive({key(StreamTag::dropout), it});
        gate = dropout_gate(cfg.dropout.role, cfg.dropout.weight, rng);
        // The weight-step needs a structure to assign into.
        if (!s.role.best.valid()) gate.run_role = true;
        break;
      }
      case RunMode::role_only:
        gate = {true, false};
        break;
      case RunMode::weight_only:
        gate = {false, true};
        break;
    }

    double candidate = kNegInf;
    if (gate.run_role) {
      auto rr = role_step(s.role, s.pool, identity, utility, role_opts, root.derive({key(StreamTag::role_decode), it}));
      rec.ran_role = true;
      rec.evaluator_calls += rr.evaluator_calls;
      rec.iteration_role_best = *std::max_element(rr.raw_utilities.begin(), rr.raw_utilities.end());
    }
    if (s.role.best.valid()) candidate = s.role.best.utility;
    if (gate.run_weight) {
      const DagStructure& dag = s.fixed_dag ? *s.fixed_dag : s.role.best.dag;
      auto wr = weight_step(s.experts, s.pool, dag, utility, weight_opts, root.derive({key(StreamTag::weight_assign), it}));
      rec.ran_weight = true;
      rec.evaluator_calls += wr.evaluator_calls;
      rec.jfk_scores = wr.report.scores;
      rec.iteration_weight_best = *std::max_element(wr.report.utilities.begin(), wr.report.utilities.end());
      candidate = std::max(candidate, *rec.iteration_weight_best);
    }

    rec.improved = candidate > s.best_utility;
    if (rec.improved) {
      s.best_utility = candidate;
      s.stale = 0;
    } else {
      ++s.stale;
    }
    rec.best_utility = s.best_utility;
    rec.best_role_utility = s.role.best.utility;
    rec.stale = s.stale;
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    s.trace.append(rec);
    s.next_iteration = it + 1;
    s.finished = s.stale >= cfg.patience;
    ++ran_here;

    if (!options.checkpoint_path.empty()) write_atomically(options.checkpoint_path, checkpoint_json(cfg, s).dump());
    if (options.on_iteration) options.on_iteration(rec);
  }

  result.trace = s.trace;
  result.setup_evaluator_calls = s.setup_calls;
  auto& sys = result.system;
  sys.dag = s.role.best.dag;
  sys.matrix = s.role.best.matrix;
  sys.assignment = identity;
  sys.experts = s.pool;
  sys.recorded_utility = s.role.best.utility;
  if (!result.stopped_early && s.role.best.valid()) {
    auto u = utility.evaluate(sys.dag, sys.assignment, sys.experts);
    sys.utility = u.value;
    result.final_evaluator_calls = u.evaluator_calls;
  } else {
    sys.utility = sys.recorded_utility;
  }
  return result;
}

}  // namespace hswarm
