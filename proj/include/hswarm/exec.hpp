#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hswarm/graph.hpp"

namespace hswarm {

/// Origin value for the task input, which comes from no node.
inline constexpr NodeId kTaskOrigin = std::numeric_limits<NodeId>::max();

/// Payload passed along edges: a real vector for synthetic experts, text for
/// remote ones. A single execution never mixes the two.
struct Message {
  std::variant<std::vector<double>, std::string> payload;
  NodeId origin = kTaskOrigin;

  bool is_text() const { return std::holds_alternative<std::string>(payload); }
  const std::vector<double>& vec() const { return std::get<std::vector<double>>(payload); }
  const std::string& text() const { return std::get<std::string>(payload); }

  bool operator==(const Message&) const = default;
};

/// slots[k] is the pool index of the expert occupying graph position k.
struct Assignment {
  std::vector<std::size_t> slots;

  static Assignment identity(std::size_t n);
  bool operator==(const Assignment&) const = default;
};

/// An expert is a parameter vector (synthetic mode) or an endpoint (remote).
struct Expert {
  std::vector<double> params;
  std::string endpoint;

  bool operator==(const Expert&) const = default;
};
using ExpertPool = std::vector<Expert>;

enum class PositionKind { entry, middle, end };

const char* to_string(PositionKind kind);

/// Where a node sits in the graph. A single-node graph is both entry and end;
/// its kind is `entry` because it has no prior responses.
struct NodeContext {
  NodeId node = 0;
  PositionKind kind = PositionKind::entry;
  bool is_entry = false;
  bool is_end = false;
  std::size_t expert_index = 0;
};

class NodeEvaluator {
 public:
  virtual ~NodeEvaluator() = default;
  /// `inputs` holds predecessor outputs in topological order of their origin.
  virtual Message evaluate(const NodeContext& ctx, const Expert& expert, std::span<const Message> inputs,
                           const Message& task_input) const = 0;
};

struct ExecutionResult {
  Message output;
  std::size_t evaluator_calls = 0;
  std::vector<NodeId> order;
};

/// Evaluate every node once in topological order; the end node's output is
/// the system output. Evaluator exceptions are rethrown as ExecutionError
/// carrying the node id.
ExecutionResult execute(const DagStructure& dag, const Assignment& assignment, const ExpertPool& pool,
                        const Message& task_input, const NodeEvaluator& evaluator);

/// y = W * mean(task_input, inputs...) + b, where params holds W row-major
/// (d*d values) followed by b (d values).
Message synth_affine_evaluator(std::span<const double> params, std::span<const Message> inputs,
                               const Message& task_input);

/// Parameter count of an affine expert over d-dimensional messages.
constexpr std::size_t affine_param_count(std::size_t d) { return d * d + d; }

class AffineEvaluator final : public NodeEvaluator {
 public:
  Message evaluate(const NodeContext& ctx, const Expert& expert, std::span<const Message> inputs,
                   const Message& task_input) const override;
};

}  // namespace hswarm
