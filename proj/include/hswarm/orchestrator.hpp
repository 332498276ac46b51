#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hswarm/exec.hpp"
#include "hswarm/graph.hpp"
#include "hswarm/pso.hpp"
#include "hswarm/random.hpp"
#include "hswarm/role.hpp"
#include "hswarm/utility.hpp"
#include "hswarm/weight.hpp"

namespace hswarm {

enum class RunMode { full, role_only, weight_only };

const char* to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

struct DropoutConfig {
  double role = 0.0;    // d_r
  double weight = 0.0;  // d_w
};

/// `distinct` experts each repeated `repeats` times.
struct PoolSpec {
  std::size_t distinct = 10;
  std::size_t repeats = 1;
};

struct RunConfig {
  std::size_t n_experts = 10;
  std::size_t swarm_size = 10;   // N
  std::size_t assignments = 10;  // M
  double top_p = 0.8;
  std::size_t max_iterations = 20;
  std::size_t patience = 6;
  PsoHyperparams role_pso;
  PsoHyperparams weight_pso;
  SparsityConfig sparsity;
  DropoutConfig dropout;
  RunMode mode = RunMode::full;
  PoolSpec pool;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

struct DropoutDecision {
  bool run_role = true;
  bool run_weight = true;
};

/// Skip the role-step with probability d_r and the weight-step with
/// probability d_w. If both come up skipped, the step with the smaller
/// dropout probability runs (the role-step on ties).
DropoutDecision dropout_gate(double d_r, double d_w, SeededStream& rng);

struct IterationRecord {
  std::size_t iteration = 0;
  bool ran_role = false;
  bool ran_weight = false;
  /// Raw utility of the best structure recorded so far.
  double best_role_utility = 0.0;
  /// Best raw utility of any system evaluated so far (drives patience).
  double best_utility = 0.0;
  std::optional<double> iteration_role_best;
  std::optional<double> iteration_weight_best;
  std::vector<double> jfk_scores;
  std::size_t evaluator_calls = 0;
  bool improved = false;
  std::size_t stale = 0;
  double wall_time_ms = 0.0;
};

/// Append-only per-iteration log. JSONL output omits wall time so equal
/// (config, seed) pairs give byte-identical traces.
class RunTrace {
 public:
  void append(IterationRecord record);
  const std::vector<IterationRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::string to_jsonl() const;

 private:
  std::vector<IterationRecord> records_;
};

nlohmann::json to_json(const IterationRecord& r, bool with_wall_time);
IterationRecord iteration_record_from_json(const nlohmann::json& j);

/// The returned system: best recorded structure with the final experts in
/// the identity assignment.
struct OptimizedSystem {
  DagStructure dag;
  Assignment assignment;
  ExpertPool experts;
  AdjacencyMatrix matrix;
  double recorded_utility = 0.0;
  double utility = 0.0;
};

nlohmann::json to_json(const OptimizedSystem& system);
OptimizedSystem system_from_json(const nlohmann::json& j);

struct RunResult {
  OptimizedSystem system;
  RunTrace trace;
  /// Evaluator calls spent before the first iteration (weight_only picks its
  /// fixed graph from the initial decodes) and on the final evaluation.
  std::size_t setup_evaluator_calls = 0;
  std::size_t final_evaluator_calls = 0;
  bool stopped_early = false;
};

struct OptimizeOptions {
  /// Written after every iteration when non-empty.
  std::string checkpoint_path;
  /// Continue from a checkpoint produced by an earlier run of the same config.
  std::optional<nlohmann::json> resume;
  /// Return after this many iterations of this invocation (0: no limit); used
  /// to interrupt runs for resumption.
  std::size_t stop_after = 0;
  std::function<void(const IterationRecord&)> on_iteration;
};

inline constexpr int kCheckpointFormatVersion = 1;

/// Alternate role-steps and weight-steps until the best utility stops
/// improving for `patience` iterations or `max_iterations` is reached.
RunResult optimize(const RunConfig& cfg, const ExpertPool& initial_pool, const UtilityFunction& utility,
                   const OptimizeOptions& options = {});

}  // namespace hswarm
