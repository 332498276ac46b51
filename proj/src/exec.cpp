#include "hswarm/exec.hpp"

#include <exception>
#include <string>

#include "hswarm/errors.hpp"

namespace hswarm {

Assignment Assignment::identity(std::size_t n) {
  Assignment a;
  a.slots.resize(n);
  for (std::size_t k = 0; k < n; ++k) a.slots[k] = k;
  return a;
}

const char* to_string(PositionKind kind) {
  switch (kind) {
    case PositionKind::entry:
      return "entry";
    case PositionKind::middle:
      return "middle";
    case PositionKind::end:
      return "end";
  }
  return "?";
}

ExecutionResult execute(const DagStructure& dag, const Assignment& assignment, const ExpertPool& pool,
                        const Message& task_input, const NodeEvaluator& evaluator) {
  if (pool.empty()) throw ContractViolation("execute: empty expert pool");
  if (assignment.slots.size() != dag.n)
    throw ContractViolation("execute: assignment has " + std::to_string(assignment.slots.size()) +
                            " slots for " + std::to_string(dag.n) + " nodes");
  for (auto e : assignment.slots)
    if (e >= pool.size()) throw ContractViolation("execute: assignment references expert " + std::to_string(e));

  const bool text_mode = task_input.is_text();
  const auto preds = dag.predecessors();
  std::vector<Message> outputs(dag.n);
  std::vector<bool> done(dag.n, false);
  ExecutionResult result;
  result.order.reserve(dag.n);

  std::vector<Message> inputs;
  for (NodeId v : dag.topo_order) {
    inputs.clear();
    for (NodeId u : preds[v]) {
      if (!done[u]) throw ContractViolation("execute: topo_order visits node " + std::to_string(v) + " before predecessor");
      inputs.push_back(outputs[u]);
    }
    NodeContext ctx;
    ctx.node = v;
    ctx.is_entry = preds[v].empty();
    ctx.is_end = v == dag.end_node;
    ctx.kind = ctx.is_entry ? PositionKind::entry : (ctx.is_end ? PositionKind::end : PositionKind::middle);
    ctx.expert_index = assignment.slots[v];

    Message out;
    try {
      out = evaluator.evaluate(ctx, pool[ctx.expert_index], inputs, task_input);
    } catch (const ExecutionError&) {
      throw;
    } catch (const ContractViolation&) {
      throw;
    } catch (const std::exception& e) {
      throw ExecutionError(v, e.what());
    }
    ++result.evaluator_calls;
    if (out.is_text() != text_mode) throw ContractViolation("execute: node " + std::to_string(v) + " changed payload kind");
    out.origin = v;
    outputs[v] = std::move(out);
    done[v] = true;
    result.order.push_back(v);
  }
  result.output = outputs[dag.end_node];
  return result;
}

Message synth_affine_evaluator(std::span<const double> params, std::span<const Message> inputs,
                               const Message& task_input) {
  if (task_input.is_text()) throw ContractViolation("affine evaluator needs vector payloads");
  const std::size_t d = task_input.vec().size();
  if (params.size() != affine_param_count(d))
    throw ContractViolation("affine evaluator: expected " + std::to_string(affine_param_count(d)) +
                            " params for dimension " + std::to_string(d) + ", got " + std::to_string(params.size()));
  std::vector<double> mean = task_input.vec();
  for (const auto& m : inputs) {
    if (m.is_text() || m.vec().size() != d) throw ContractViolation("affine evaluator: input dimension mismatch");
    for (std::size_t k = 0; k < d; ++k) mean[k] += m.vec()[k];
  }
  const double count = static_cast<double>(inputs.size() + 1);
  for (auto& x : mean) x /= count;

  std::vector<double> y(d);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = params[d * d + r];
    for (std::size_t c = 0; c < d; ++c) acc += params[r * d + c] * mean[c];
    y[r] = acc;
  }
  return Message{std::move(y)};
}

Message AffineEvaluator::evaluate(const NodeContext& ctx, const Expert& expert, std::span<const Message> inputs,
                                  const Message& task_input) const {
  Message out = synth_affine_evaluator(expert.params, inputs, task_input);
  out.origin = ctx.node;
  return out;
}

}  // namespace hswarm
