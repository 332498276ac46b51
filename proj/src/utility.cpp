#include "hswarm/utility.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "hswarm/errors.hpp"

namespace hswarm {

std::size_t edge_edit_distance(const DagStructure& a, const DagStructure& b) {
  if (a.n != b.n) throw ContractViolation("edge_edit_distance needs equal node counts");
  std::set<std::pair<NodeId, NodeId>> ea(a.edges.begin(), a.edges.end());
  std::set<std::pair<NodeId, NodeId>> eb(b.edges.begin(), b.edges.end());
  std::size_t d = 0;
  for (const auto& e : ea) d += eb.count(e) == 0;
  for (const auto& e : eb) d += ea.count(e) == 0;
  return d;
}

HiddenDagUtility::HiddenDagUtility(DagStructure hidden) : hidden_(std::move(hidden)) {
  validate_dag(hidden_);
}

UtilityResult HiddenDagUtility::evaluate(const DagStructure& dag, const Assignment&, const ExpertPool&) const {
  if (hidden_.n < 2) return {1.0, 0};
  const double possible = static_cast<double>(hidden_.n * (hidden_.n - 1));
  return {1.0 - static_cast<double>(edge_edit_distance(dag, hidden_)) / possible, 0};
}

AffineTargetUtility::AffineTargetUtility(std::vector<std::vector<double>> inputs,
                                         std::vector<std::vector<double>> targets)
    : inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (inputs_.empty() || inputs_.size() != targets_.size())
    throw ContractViolation("affine target task needs matching, non-empty inputs and targets");
  const auto d = inputs_.front().size();
  for (std::size_t k = 0; k < inputs_.size(); ++k)
    if (inputs_[k].size() != d || targets_[k].size() != d || d == 0)
      throw ContractViolation("affine target task: inconsistent dimensions");
}

UtilityResult AffineTargetUtility::evaluate(const DagStructure& dag, const Assignment& assignment,
                                            const ExpertPool& pool) const {
  UtilityResult r;
  double sq = 0.0;
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    auto run = execute(dag, assignment, pool, Message{inputs_[k]}, evaluator_);
    r.evaluator_calls += run.evaluator_calls;
    const auto& y = run.output.vec();
    for (std::size_t c = 0; c < y.size(); ++c) sq += (y[c] - targets_[k][c]) * (y[c] - targets_[k][c]);
  }
  r.value = -sq / static_cast<double>(inputs_.size());
  return r;
}

DagStructure random_dag(std::size_t n, SeededStream& rng, double top_p) {
  auto m = init_adjacency_swarm(n, 1, rng);
  return g_decode(m.front(), top_p, rng);
}

AffineTask make_affine_task(const AffineTaskSpec& spec, SeededStream& rng) {
  if (spec.n_experts == 0 || spec.dim == 0 || spec.dataset_size == 0)
    throw ContractViolation("affine task needs positive sizes");
  if (spec.distinct * spec.repeats != spec.n_experts)
    throw ContractViolation("affine task: distinct * repeats must equal n_experts");
  const std::size_t d = spec.dim;
  AffineTask task;
  task.hidden_dag = random_dag(spec.n_experts, rng);
  for (std::size_t e = 0; e < spec.n_experts; ++e) {
    Expert x;
    x.params.resize(affine_param_count(d));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        x.params[r * d + c] = (r == c ? 0.5 : 0.0) + (rng.uniform() * 2.0 - 1.0) * 0.5;
    for (std::size_t r = 0; r < d; ++r) x.params[d * d + r] = rng.uniform() * 2.0 - 1.0;
    task.hidden_experts.push_back(std::move(x));
  }

  std::vector<std::vector<double>> inputs, targets;
  const auto identity = Assignment::identity(spec.n_experts);
  AffineEvaluator eval;
  for (std::size_t k = 0; k < spec.dataset_size; ++k) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.uniform() * 2.0 - 1.0;
    targets.push_back(execute(task.hidden_dag, identity, task.hidden_experts, Message{x}, eval).output.vec());
    inputs.push_back(std::move(x));
  }
  task.utility = std::make_shared<AffineTargetUtility>(std::move(inputs), std::move(targets));

  ExpertPool bases;
  for (std::size_t b = 0; b < spec.distinct; ++b) {
    Expert x = task.hidden_experts[b];
    for (auto& v : x.params) v += (rng.uniform() * 2.0 - 1.0) * spec.pool_noise;
    bases.push_back(std::move(x));
  }
  for (const auto& base : bases)
    for (std::size_t r = 0; r < spec.repeats; ++r) task.initial_pool.push_back(base);
  return task;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<TextExample> load_text_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open dataset " + path);
  std::vector<TextExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("input") || !j.contains("answer") || !j["input"].is_string() ||
        !j["answer"].is_string())
      throw ContractViolation(path + ":" + std::to_string(lineno) + ": expected {\"input\": str, \"answer\": str}");
    out.push_back({j["input"].get<std::string>(), j["answer"].get<std::string>()});
  }
  if (out.empty()) throw ContractViolation("dataset " + path + " is empty");
  return out;
}

ExactMatchUtility::ExactMatchUtility(std::vector<TextExample> examples, std::shared_ptr<const NodeEvaluator> evaluator)
    : examples_(std::move(examples)), evaluator_(std::move(evaluator)) {
  if (examples_.empty()) throw ContractViolation("exact-match utility needs examples");
  if (!evaluator_) throw ContractViolation("exact-match utility needs an evaluator");
}

UtilityResult ExactMatchUtility::evaluate(const DagStructure& dag, const Assignment& assignment,
                                          const ExpertPool& pool) const {
  UtilityResult r;
  std::size_t correct = 0;
  for (const auto& ex : examples_) {
    auto run = execute(dag, assignment, pool, Message{ex.input}, *evaluator_);
    r.evaluator_calls += run.evaluator_calls;
    correct += trim(run.output.text()) == trim(ex.answer);
  }
  r.value = static_cast<double>(correct) / static_cast<double>(examples_.size());
  return r;
}

}  // namespace hswarm
