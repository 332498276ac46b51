#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hswarm/pso.hpp"
#include "hswarm/random.hpp"

namespace hswarm {

using NodeId = std::size_t;

/// Continuous n x n adjacency; entry (i, j) is the likelihood of edge i -> j.
/// Stored row-major. The diagonal is never read by decoding.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}
  AdjacencyMatrix(std::size_t n, std::vector<double> entries);

  std::size_t n() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
  std::span<const double> entries() const { return entries_; }

  /// Sum of row i excluding the diagonal.
  double out_degree(std::size_t i) const;
  /// Sum of |a_ij| over off-diagonal entries.
  double l1_norm() const;
  /// Clamp every entry into [0, 1].
  void clamp_unit();

  Tensor to_tensor() const { return Tensor{{n_, n_}, entries_}; }
  static AdjacencyMatrix from_tensor(const Tensor& t);

  bool operator==(const AdjacencyMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

/// Decoded discrete graph. Edges run u -> v; topo_order lists every node so
/// that each edge goes from an earlier to a later position, ending with
/// end_node.
struct DagStructure {
  std::size_t n = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;
  NodeId end_node = 0;
  std::vector<NodeId> topo_order;

  std::vector<std::vector<NodeId>> predecessors() const;
  std::vector<std::size_t> out_degrees() const;
  bool has_edge(NodeId u, NodeId v) const;

  bool operator==(const DagStructure&) const = default;
};

/// Throws ContractViolation naming the first broken invariant: topo order is
/// a permutation consistent with the edges, end_node is the only sink, every
/// node reaches end_node.
void validate_dag(const DagStructure& dag);

nlohmann::json to_json(const DagStructure& dag);
DagStructure dag_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AdjacencyMatrix& a);
AdjacencyMatrix matrix_from_json(const nlohmann::json& j);

/// `count` matrices with entries i.i.d. uniform in [0, 1).
std::vector<AdjacencyMatrix> init_adjacency_swarm(std::size_t n, std::size_t count, SeededStream& rng);

/// Nucleus sampling over non-negative scores: normalize, keep the smallest
/// descending prefix with mass >= p, renormalize and draw. All-zero scores
/// fall back to a uniform draw over every index.
std::size_t top_p_sample(std::span<const double> scores, double p, SeededStream& rng);

/// Added to out-degree sums before taking reciprocals in end-node selection.
inline constexpr double kInverseDegreeEpsilon = 1e-6;

/// Decode a continuous adjacency into a DAG with a single designated end node.
/// Exact-zero entries (pruned or clamped) never yield a sampled edge; a node
/// left without edges gets its highest-likelihood edge forced.
DagStructure g_decode(const AdjacencyMatrix& a, double p, SeededStream& rng);

/// Zero every entry with a_ij <= tau; keep the rest unchanged.
AdjacencyMatrix prune_threshold(const AdjacencyMatrix& a, double tau);

}  // namespace hswarm
