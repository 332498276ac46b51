#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "hswarm/exec.hpp"
#include "hswarm/graph.hpp"
#include "hswarm/random.hpp"

namespace hswarm {

struct UtilityResult {
  double value = 0.0;
  std::size_t evaluator_calls = 0;
};

/// Task utility f: higher is better. Implementations are pure given their
/// dataset, so concurrent calls are safe.
class UtilityFunction {
 public:
  virtual ~UtilityFunction() = default;
  virtual UtilityResult evaluate(const DagStructure& dag, const Assignment& assignment,
                                 const ExpertPool& pool) const = 0;
  /// Number of task examples |f|; each evaluation executes the system once per example.
  virtual std::size_t dataset_size() const = 0;
  virtual std::string name() const = 0;
};

class ConstantUtility final : public UtilityFunction {
 public:
  explicit ConstantUtility(double value) : value_(value) {}
  UtilityResult evaluate(const DagStructure&, const Assignment&, const ExpertPool&) const override {
    return {value_, 0};
  }
  std::size_t dataset_size() const override { return 1; }
  std::string name() const override { return "constant"; }

 private:
  double value_;
};

/// Directed edges present in exactly one of the two graphs. Nodes are compared
/// by graph position.
std::size_t edge_edit_distance(const DagStructure& a, const DagStructure& b);

/// 1 - edge_edit_distance / (n (n - 1)) against a fixed hidden graph.
class HiddenDagUtility final : public UtilityFunction {
 public:
  explicit HiddenDagUtility(DagStructure hidden);
  UtilityResult evaluate(const DagStructure& dag, const Assignment& assignment, const ExpertPool& pool) const override;
  std::size_t dataset_size() const override { return 1; }
  std::string name() const override { return "hidden_dag"; }
  const DagStructure& hidden() const { return hidden_; }

 private:
  DagStructure hidden_;
};

/// Negative mean squared error between system outputs and targets, with
/// affine experts.
class AffineTargetUtility final : public UtilityFunction {
 public:
  AffineTargetUtility(std::vector<std::vector<double>> inputs, std::vector<std::vector<double>> targets);
  UtilityResult evaluate(const DagStructure& dag, const Assignment& assignment, const ExpertPool& pool) const override;
  std::size_t dataset_size() const override { return inputs_.size(); }
  std::string name() const override { return "affine_target"; }
  std::size_t dim() const { return inputs_.front().size(); }
  const std::vector<std::vector<double>>& inputs() const { return inputs_; }
  const std::vector<std::vector<double>>& targets() const { return targets_; }

 private:
  std::vector<std::vector<double>> inputs_;
  std::vector<std::vector<double>> targets_;
  AffineEvaluator evaluator_;
};

/// Synthetic joint task: a hidden graph over hidden affine experts produces the
/// targets, and the starting pool is a noisy copy of the hidden experts
/// (`distinct` base experts each repeated `repeats` times).
struct AffineTask {
  DagStructure hidden_dag;
  ExpertPool hidden_experts;
  std::shared_ptr<AffineTargetUtility> utility;
  ExpertPool initial_pool;
};

struct AffineTaskSpec {
  std::size_t n_experts = 10;
  std::size_t dim = 2;
  std::size_t dataset_size = 8;
  std::size_t distinct = 10;
  std::size_t repeats = 1;
  double pool_noise = 0.3;
};

AffineTask make_affine_task(const AffineTaskSpec& spec, SeededStream& rng);

/// One text example for exact-match scoring.
struct TextExample {
  std::string input;
  std::string answer;
};

/// Reads JSONL lines of {"input": string, "answer": string}.
std::vector<TextExample> load_text_dataset(const std::string& path);

/// Fraction of examples whose system output equals the answer after trimming
/// surrounding whitespace.
class ExactMatchUtility final : public UtilityFunction {
 public:
  ExactMatchUtility(std::vector<TextExample> examples, std::shared_ptr<const NodeEvaluator> evaluator);
  UtilityResult evaluate(const DagStructure& dag, const Assignment& assignment, const ExpertPool& pool) const override;
  std::size_t dataset_size() const override { return examples_.size(); }
  std::string name() const override { return "remote_dataset"; }

 private:
  std::vector<TextExample> examples_;
  std::shared_ptr<const NodeEvaluator> evaluator_;
};

/// Random DAG drawn through g_decode on a uniform matrix.
DagStructure random_dag(std::size_t n, SeededStream& rng, double top_p = 0.8);

}  // namespace hswarm
