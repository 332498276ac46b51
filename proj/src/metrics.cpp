#include "hswarm/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "hswarm/errors.hpp"

namespace hswarm {

double BucketTable::accuracy(std::size_t n) const {
  if (counts[n] == 0) return expected_accuracy(n);
  return static_cast<double>(system_correct[n]) / static_cast<double>(counts[n]);
}

double BucketTable::expected_accuracy(std::size_t n) const {
  return static_cast<double>(n) / static_cast<double>(experts);
}

BucketTable bucketize(const std::vector<std::vector<bool>>& per_expert_correct, const std::vector<bool>& system_correct) {
  if (per_expert_correct.size() != system_correct.size())
    throw ContractViolation("bucketize: expert rows and system results differ in length");
  if (per_expert_correct.empty()) throw ContractViolation("bucketize: empty dataset");
  BucketTable t;
  t.experts = per_expert_correct.front().size();
  if (t.experts == 0) throw ContractViolation("bucketize: no experts");
  t.dataset_size = per_expert_correct.size();
  t.counts.assign(t.experts + 1, 0);
  t.system_correct.assign(t.experts + 1, 0);
  for (std::size_t q = 0; q < per_expert_correct.size(); ++q) {
    const auto& row = per_expert_correct[q];
    if (row.size() != t.experts) throw ContractViolation("bucketize: ragged expert matrix at row " + std::to_string(q));
    const auto solved = static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
    ++t.counts[solved];
    if (system_correct[q]) ++t.system_correct[solved];
  }
  return t;
}

double collaborative_gain(const BucketTable& table) {
  if (table.dataset_size == 0) throw ContractViolation("collaborative_gain: empty dataset");
  double gain = 0.0;
  for (std::size_t n = 1; n <= table.experts; ++n) {
    if (table.counts[n] == 0) continue;
    const double weight = static_cast<double>(table.counts[n]) / static_cast<double>(table.dataset_size);
    gain += weight * (table.accuracy(n) - table.expected_accuracy(n));
  }
  return gain;
}

double zero_bucket_rate(const BucketTable& table) {
  if (table.counts.empty() || table.counts[0] == 0) return 0.0;
  return static_cast<double>(table.system_correct[0]) / static_cast<double>(table.counts[0]);
}

bool ablation_consistent(double wo_role, double wo_weight, double role_baseline_avg, double weight_baseline_avg) {
  return (wo_role < wo_weight && role_baseline_avg > weight_baseline_avg) ||
         (wo_role > wo_weight && role_baseline_avg < weight_baseline_avg);
}

nlohmann::json analysis_report(const BucketTable& table, const std::vector<AblationInput>& ablations) {
  nlohmann::json buckets = nlohmann::json::array();
  for (std::size_t n = 0; n <= table.experts; ++n)
    buckets.push_back({{"solved_by", n},
                       {"count", table.counts[n]},
                       {"system_correct", table.system_correct[n]},
                       {"accuracy", table.accuracy(n)},
                       {"expected_accuracy", table.expected_accuracy(n)}});
  nlohmann::json abl = nlohmann::json::array();
  for (const auto& a : ablations)
    abl.push_back({{"name", a.name},
                   {"wo_role", a.wo_role},
                   {"wo_weight", a.wo_weight},
                   {"role_baseline_avg", a.role_baseline_avg},
                   {"weight_baseline_avg", a.weight_baseline_avg},
                   {"consistent", ablation_consistent(a.wo_role, a.wo_weight, a.role_baseline_avg, a.weight_baseline_avg)}});
  return {{"experts", table.experts},
          {"dataset_size", table.dataset_size},
          {"buckets", buckets},
          {"collaborative_gain", collaborative_gain(table)},
          {"zero_bucket_rate", zero_bucket_rate(table)},
          {"ablations", abl}};
}

std::string trace_to_csv(const RunTrace& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,steps,best_role_utility,best_utility,iteration_role_best,iteration_weight_best,best_jfk,"
         "evaluator_calls,wall_time_ms\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : trace.records()) {
    std::string steps = r.ran_role ? (r.ran_weight ? "role+weight" : "role") : (r.ran_weight ? "weight" : "none");
    out << r.iteration << ',' << steps << ',' << r.best_role_utility << ',' << r.best_utility << ',';
    opt(r.iteration_role_best);
    out << ',';
    opt(r.iteration_weight_best);
    out << ',';
    if (!r.jfk_scores.empty()) out << *std::max_element(r.jfk_scores.begin(), r.jfk_scores.end());
    out << ',' << r.evaluator_calls << ',' << r.wall_time_ms << '\n';
  }
  return out.str();
}

}  // namespace hswarm
