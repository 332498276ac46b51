#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hswarm/exec.hpp"
#include "hswarm/graph.hpp"
#include "hswarm/pso.hpp"
#include "hswarm/random.hpp"
#include "hswarm/utility.hpp"

namespace hswarm {

/// Credit assignment for one weight-step. counts[j][i] is how often expert i
/// fills a position in assignment j, so every row sums to the graph size.
struct JfkReport {
  std::vector<Assignment> assignments;
  std::vector<double> utilities;
  std::vector<std::vector<std::size_t>> counts;
  std::vector<double> scores;
};

nlohmann::json to_json(const JfkReport& report);

/// `m` assignments with every slot drawn uniformly from the pool. With
/// `repair_coverage`, experts missing from all assignments are swapped in
/// (whenever m * dag.n >= pool_size) over slots held by experts that occur
/// more than once.
std::vector<Assignment> sample_assignments(const DagStructure& dag, std::size_t pool_size, std::size_t m,
                                           SeededStream& rng, bool repair_coverage = true);

/// counts[j][i] for the given assignments.
std::vector<std::vector<std::size_t>> assignment_counts(std::span<const Assignment> assignments, std::size_t pool_size);

/// score_i = sum_j cnt_ij * f(X^j) / sum_j cnt_ij. An expert that never
/// appears gets the mean of all utilities.
std::vector<double> jfk_scores(std::span<const Assignment> assignments, std::span<const double> utilities,
                               std::size_t pool_size);

/// Expert parameter vectors as PSO particles.
struct ExpertSwarm {
  std::vector<Particle> particles;
  SwarmState state;

  /// Rejects pools without parameter vectors (remote experts).
  static ExpertSwarm from_pool(const ExpertPool& pool);
  /// Current positions written back into a pool (endpoints preserved).
  ExpertPool to_pool(const ExpertPool& templ) const;
  std::size_t size() const { return particles.size(); }
};

struct WeightStepOptions {
  std::size_t assignments = 10;  // M
  PsoHyperparams pso;
  std::size_t jobs = 1;
};

struct WeightStepResult {
  std::size_t best_expert_index = 0;
  JfkReport report;
  std::size_t evaluator_calls = 0;
};

/// Sample M assignments into `dag`, score each on `utility`, turn them into
/// JFK scores and move the experts with one PSO step on those scores. `pool`
/// is updated to the moved parameters. Failures surface as StepError with the
/// assignment index.
WeightStepResult weight_step(ExpertSwarm& swarm, ExpertPool& pool, const DagStructure& dag,
                             const UtilityFunction& utility, const WeightStepOptions& options,
                             const SeededStream& streams);

}  // namespace hswarm
