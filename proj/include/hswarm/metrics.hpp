#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hswarm/orchestrator.hpp"

namespace hswarm {

/// Problems grouped by how many of the component experts solve them alone.
struct BucketTable {
  std::size_t experts = 0;  // N
  std::size_t dataset_size = 0;
  /// Index n: problems solved by exactly n experts.
  std::vector<std::size_t> counts;
  std::vector<std::size_t> system_correct;

  double accuracy(std::size_t n) const;
  double expected_accuracy(std::size_t n) const;
};

/// per_expert_correct[q][i]: expert i solves problem q alone.
BucketTable bucketize(const std::vector<std::vector<bool>>& per_expert_correct, const std::vector<bool>& system_correct);

/// Sum over n >= 1 of |B_n|/|D| * (Acc(B_n) - n/N). Empty buckets contribute 0.
double collaborative_gain(const BucketTable& table);

/// System accuracy on problems no expert solves alone (0 when B_0 is empty).
double zero_bucket_rate(const BucketTable& table);

/// True when the weaker ablation is the one whose baseline family is stronger:
/// (wo_role < wo_weight and B_r > B_w) or (wo_role > wo_weight and B_r < B_w).
bool ablation_consistent(double wo_role, double wo_weight, double role_baseline_avg, double weight_baseline_avg);

struct AblationInput {
  std::string name;
  double wo_role = 0, wo_weight = 0, role_baseline_avg = 0, weight_baseline_avg = 0;
};

nlohmann::json analysis_report(const BucketTable& table, const std::vector<AblationInput>& ablations);

/// iteration,steps,best_role_utility,best_utility,iteration_role_best,
/// iteration_weight_best,best_jfk,evaluator_calls,wall_time_ms
std::string trace_to_csv(const RunTrace& trace);

}  // namespace hswarm
