#include "hswarm/role.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "hswarm/errors.hpp"
#include "hswarm/parallel.hpp"

namespace hswarm {

void SparsityConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ContractViolation("sparsity tau must lie in [0, 1]");
  if (!(l1_coeff >= 0.0) || !std::isfinite(l1_coeff)) throw ContractViolation("sparsity l1_coeff must be >= 0");
}

const char* to_string(SparsityConfig::Mode mode) {
  switch (mode) {
    case SparsityConfig::Mode::none:
      return "none";
    case SparsityConfig::Mode::threshold:
      return "threshold";
    case SparsityConfig::Mode::l1:
      return "l1";
  }
  return "none";
}

SparsityConfig::Mode sparsity_mode_from_string(const std::string& s) {
  if (s == "none") return SparsityConfig::Mode::none;
  if (s == "threshold") return SparsityConfig::Mode::threshold;
  if (s == "l1") return SparsityConfig::Mode::l1;
  throw ContractViolation("unknown sparsity mode '" + s + "'");
}

double shaped_utility(double raw, const AdjacencyMatrix& a, const SparsityConfig& cfg) {
  if (cfg.mode != SparsityConfig::Mode::l1) return raw;
  return raw - cfg.l1_coeff * a.l1_norm();
}

RoleSwarm RoleSwarm::from_matrices(const std::vector<AdjacencyMatrix>& matrices) {
  if (matrices.empty()) throw ContractViolation("role swarm needs at least one matrix");
  RoleSwarm swarm;
  for (const auto& m : matrices) swarm.particles.push_back(Particle::at(m.to_tensor()));
  return swarm;
}

RoleStepResult role_step(RoleSwarm& swarm, const ExpertPool& pool, const Assignment& assignment,
                         const UtilityFunction& utility, const RoleStepOptions& options, const SeededStream& streams) {
  if (swarm.particles.empty()) throw ContractViolation("role_step needs a non-empty swarm");
  options.sparsity.validate();
  const std::size_t count = swarm.size();

  RoleStepResult result;
  result.dags.resize(count);
  result.raw_utilities.resize(count);
  result.shaped_utilities.resize(count);
  std::vector<std::size_t> calls(count, 0);

  parallel_for(count, options.jobs, [&](std::size_t i) {
    AdjacencyMatrix a = swarm.matrix(i);
    if (options.sparsity.mode == SparsityConfig::Mode::threshold) a = prune_threshold(a, options.sparsity.tau);
    auto stream = streams.derive({i});
    result.dags[i] = g_decode(a, options.top_p, stream);
    UtilityResult u;
    try {
      u = utility.evaluate(result.dags[i], assignment, pool);
    } catch (const std::exception& e) {
      throw StepError("role_step", i, e.what());
    }
    result.raw_utilities[i] = u.value;
    result.shaped_utilities[i] = shaped_utility(u.value, swarm.matrix(i), options.sparsity);
    calls[i] = u.evaluator_calls;
  });
  for (auto c : calls) result.evaluator_calls += c;

  // Raw-utility record, frozen before the swarm moves.
  for (std::size_t i = 0; i < count; ++i) {
    if (result.raw_utilities[i] > swarm.best.utility) {
      swarm.best.utility = result.raw_utilities[i];
      swarm.best.matrix = swarm.matrix(i);
      swarm.best.dag = result.dags[i];
    }
  }

  auto pso_stream = streams.derive({count, 0xB5ULL});
  result.best_index = pso_step(swarm.particles, result.shaped_utilities, swarm.state, options.pso, pso_stream);
  for (auto& p : swarm.particles)
    for (auto& v : p.position.values) v = std::clamp(v, 0.0, 1.0);
  return result;
}

}  // namespace hswarm
