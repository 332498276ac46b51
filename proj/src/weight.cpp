#include "hswarm/weight.hpp"

#include <exception>
#include <numeric>
#include <string>

#include "hswarm/errors.hpp"
#include "hswarm/parallel.hpp"

namespace hswarm {

nlohmann::json to_json(const JfkReport& report) {
  nlohmann::json assignments = nlohmann::json::array();
  for (const auto& a : report.assignments) assignments.push_back(a.slots);
  return {{"assignments", assignments},
          {"utilities", report.utilities},
          {"counts", report.counts},
          {"scores", report.scores}};
}

std::vector<std::vector<std::size_t>> assignment_counts(std::span<const Assignment> assignments,
                                                        std::size_t pool_size) {
  std::vector<std::vector<std::size_t>> counts(assignments.size(), std::vector<std::size_t>(pool_size, 0));
  for (std::size_t j = 0; j < assignments.size(); ++j)
    for (auto e : assignments[j].slots) {
      if (e >= pool_size) throw ContractViolation("assignment references expert " + std::to_string(e));
      ++counts[j][e];
    }
  return counts;
}

std::vector<Assignment> sample_assignments(const DagStructure& dag, std::size_t pool_size, std::size_t m,
                                           SeededStream& rng, bool repair_coverage) {
  if (pool_size == 0 || m == 0) throw ContractViolation("sample_assignments needs pool_size >= 1 and M >= 1");
  std::vector<Assignment> out(m);
  std::vector<std::size_t> total(pool_size, 0);
  for (auto& a : out) {
    a.slots.resize(dag.n);
    for (auto& s : a.slots) {
      s = rng.index(pool_size);
      ++total[s];
    }
  }
  if (!repair_coverage || m * dag.n < pool_size) return out;

  for (std::size_t expert = 0; expert < pool_size; ++expert) {
    if (total[expert] > 0) continue;
    // Assignments holding at least one duplicated expert; one exists by pigeonhole.
    std::vector<std::size_t> donors;
    for (std::size_t j = 0; j < m; ++j)
      for (auto s : out[j].slots)
        if (total[s] > 1) {
          donors.push_back(j);
          break;
        }
    auto& a = out[donors[rng.index(donors.size())]];
    std::vector<std::size_t> slots;
    for (std::size_t k = 0; k < a.slots.size(); ++k)
      if (total[a.slots[k]] > 1) slots.push_back(k);
    const auto k = slots[rng.index(slots.size())];
    --total[a.slots[k]];
    a.slots[k] = expert;
    ++total[expert];
  }
  return out;
}

std::vector<double> jfk_scores(std::span<const Assignment> assignments, std::span<const double> utilities,
                               std::size_t pool_size) {
  if (assignments.empty() || assignments.size() != utilities.size())
    throw ContractViolation("jfk_scores needs equally many (>= 1) assignments and utilities");
  const auto counts = assignment_counts(assignments, pool_size);
  const double mean = std::accumulate(utilities.begin(), utilities.end(), 0.0) / static_cast<double>(utilities.size());
  std::vector<double> scores(pool_size, mean);
  for (std::size_t i = 0; i < pool_size; ++i) {
    double num = 0.0;
    std::size_t den = 0;
    for (std::size_t j = 0; j < assignments.size(); ++j) {
      num += static_cast<double>(counts[j][i]) * utilities[j];
      den += counts[j][i];
    }
    if (den > 0) scores[i] = num / static_cast<double>(den);
  }
  return scores;
}

ExpertSwarm ExpertSwarm::from_pool(const ExpertPool& pool) {
  if (pool.empty()) throw ContractViolation("expert swarm needs a non-empty pool");
  ExpertSwarm swarm;
  const auto dim = pool.front().params.size();
  for (const auto& e : pool) {
    if (e.params.empty())
      throw ContractViolation("weight optimization needs parameter vectors; remote experts support role-only runs");
    if (e.params.size() != dim) throw ContractViolation("experts must share one parameter dimension");
    swarm.particles.push_back(Particle::at(Tensor::vector(e.params)));
  }
  return swarm;
}

ExpertPool ExpertSwarm::to_pool(const ExpertPool& templ) const {
  ExpertPool pool = templ;
  for (std::size_t i = 0; i < particles.size(); ++i) pool[i].params = particles[i].position.values;
  return pool;
}

WeightStepResult weight_step(ExpertSwarm& swarm, ExpertPool& pool, const DagStructure& dag,
                             const UtilityFunction& utility, const WeightStepOptions& options,
                             const SeededStream& streams) {
  if (swarm.size() != pool.size()) throw ContractViolation("weight_step: swarm and pool sizes differ");
  validate_dag(dag);
  WeightStepResult result;
  auto& report = result.report;
  auto assign_stream = streams.derive({0xA5ULL});
  report.assignments = sample_assignments(dag, pool.size(), options.assignments, assign_stream);
  report.counts = assignment_counts(report.assignments, pool.size());
  report.utilities.resize(report.assignments.size());
  std::vector<std::size_t> calls(report.assignments.size(), 0);

  parallel_for(report.assignments.size(), options.jobs, [&](std::size_t j) {
    try {
      auto u = utility.evaluate(dag, report.assignments[j], pool);
      report.utilities[j] = u.value;
      calls[j] = u.evaluator_calls;
    } catch (const std::exception& e) {
      throw StepError("weight_step", j, e.what());
    }
  });
  for (auto c : calls) result.evaluator_calls += c;

  report.scores = jfk_scores(report.assignments, report.utilities, pool.size());
  auto pso_stream = streams.derive({0x5AULL, 1});
  result.best_expert_index = pso_step(swarm.particles, report.scores, swarm.state, options.pso, pso_stream);
  pool = swarm.to_pool(pool);
  return result;
}

}  // namespace hswarm
