#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hswarm/exec.hpp"
#include "hswarm/graph.hpp"
#include "hswarm/pso.hpp"
#include "hswarm/random.hpp"
#include "hswarm/utility.hpp"

namespace hswarm {

struct SparsityConfig {
  enum class Mode { none, threshold, l1 };
  Mode mode = Mode::none;
  double tau = 0.0;
  /// Weight of the L1 penalty on the adjacency (separate from the PSO step length).
  double l1_coeff = 0.0;

  void validate() const;
};

const char* to_string(SparsityConfig::Mode mode);
SparsityConfig::Mode sparsity_mode_from_string(const std::string& s);

/// none/threshold: raw. l1: raw - l1_coeff * ||A||_1 (off-diagonal entries).
double shaped_utility(double raw, const AdjacencyMatrix& a, const SparsityConfig& cfg);

/// Best structure found so far, frozen at the decode that scored it.
struct RoleRecord {
  AdjacencyMatrix matrix;
  DagStructure dag;
  double utility = -std::numeric_limits<double>::infinity();

  bool valid() const { return dag.n > 0; }
};

/// Swarm of continuous adjacency matrices plus its PSO bookkeeping.
struct RoleSwarm {
  std::vector<Particle> particles;
  SwarmState state;
  RoleRecord best;

  static RoleSwarm from_matrices(const std::vector<AdjacencyMatrix>& matrices);
  AdjacencyMatrix matrix(std::size_t i) const { return AdjacencyMatrix::from_tensor(particles[i].position); }
  std::size_t size() const { return particles.size(); }
};

struct RoleStepOptions {
  double top_p = 0.8;
  PsoHyperparams pso;
  SparsityConfig sparsity;
  std::size_t jobs = 1;
};

struct RoleStepResult {
  std::vector<DagStructure> dags;
  std::vector<double> raw_utilities;
  std::vector<double> shaped_utilities;
  std::size_t best_index = 0;
  std::size_t evaluator_calls = 0;
};

/// Decode each matrix once (threshold-pruned copy when enabled), score it on
/// `utility` with `assignment`, advance the swarm with one PSO step and clamp
/// entries to [0, 1]. `streams` is the per-iteration stream; particle i
/// decodes from streams.derive({i}). Utility failures surface as StepError
/// with the particle index.
RoleStepResult role_step(RoleSwarm& swarm, const ExpertPool& pool, const Assignment& assignment,
                         const UtilityFunction& utility, const RoleStepOptions& options, const SeededStream& streams);

}  // namespace hswarm
