#include "hswarm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hswarm/errors.hpp"

namespace hswarm {

AdjacencyMatrix::AdjacencyMatrix(std::size_t n, std::vector<double> entries)
    : n_(n), entries_(std::move(entries)) {
  if (entries_.size() != n_ * n_)
    throw ContractViolation("adjacency needs " + std::to_string(n_ * n_) + " entries, got " +
                            std::to_string(entries_.size()));
}

double AdjacencyMatrix::out_degree(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < n_; ++j)
    if (j != i) s += (*this)(i, j);
  return s;
}

double AdjacencyMatrix::l1_norm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if (i != j) s += std::abs((*this)(i, j));
  return s;
}

void AdjacencyMatrix::clamp_unit() {
  for (auto& e : entries_) e = std::clamp(e, 0.0, 1.0);
}

AdjacencyMatrix AdjacencyMatrix::from_tensor(const Tensor& t) {
  if (t.shape.size() != 2 || t.shape[0] != t.shape[1])
    throw ContractViolation("adjacency tensor must be square");
  return AdjacencyMatrix(t.shape[0], t.values);
}

std::vector<std::vector<NodeId>> DagStructure::predecessors() const {
  std::vector<std::vector<NodeId>> preds(n);
  std::vector<std::size_t> rank(n, 0);
  for (std::size_t k = 0; k < topo_order.size(); ++k) rank[topo_order[k]] = k;
  for (auto [u, v] : edges) preds[v].push_back(u);
  for (auto& p : preds)
    std::sort(p.begin(), p.end(), [&](NodeId a, NodeId b) { return rank[a] < rank[b]; });
  return preds;
}

std::vector<std::size_t> DagStructure::out_degrees() const {
  std::vector<std::size_t> deg(n, 0);
  for (auto [u, v] : edges) ++deg[u];
  return deg;
}

bool DagStructure::has_edge(NodeId u, NodeId v) const {
  return std::find(edges.begin(), edges.end(), std::pair{u, v}) != edges.end();
}

void validate_dag(const DagStructure& dag) {
  if (dag.n == 0) throw ContractViolation("dag has no nodes");
  if (dag.topo_order.size() != dag.n) throw ContractViolation("topo_order length differs from n");
  std::vector<std::size_t> rank(dag.n, dag.n);
  for (std::size_t k = 0; k < dag.n; ++k) {
    NodeId v = dag.topo_order[k];
    if (v >= dag.n || rank[v] != dag.n) throw ContractViolation("topo_order is not a permutation");
    rank[v] = k;
  }
  if (dag.end_node >= dag.n) throw ContractViolation("end_node out of range");
  for (auto [u, v] : dag.edges) {
    if (u >= dag.n || v >= dag.n) throw ContractViolation("edge endpoint out of range");
    if (u == v) throw ContractViolation("self loop");
    if (rank[u] >= rank[v]) throw ContractViolation("edge violates topo_order (cycle)");
  }
  auto deg = dag.out_degrees();
  if (deg[dag.end_node] != 0) throw ContractViolation("end_node has outgoing edges");
  for (NodeId v = 0; v < dag.n; ++v)
    if (v != dag.end_node && deg[v] == 0) throw ContractViolation("node " + std::to_string(v) + " is a second sink");
  // Reverse reachability from the end node.
  std::vector<bool> reaches(dag.n, false);
  reaches[dag.end_node] = true;
  for (std::size_t k = dag.n; k-- > 0;) {
    NodeId u = dag.topo_order[k];
    for (auto [a, b] : dag.edges)
      if (a == u && reaches[b]) reaches[u] = true;
  }
  for (NodeId v = 0; v < dag.n; ++v)
    if (!reaches[v]) throw ContractViolation("node " + std::to_string(v) + " cannot reach end_node");
}

nlohmann::json to_json(const DagStructure& dag) {
  nlohmann::json edges = nlohmann::json::array();
  for (auto [u, v] : dag.edges) edges.push_back({u, v});
  return {{"n", dag.n}, {"end_node", dag.end_node}, {"edges", edges}, {"topo_order", dag.topo_order}};
}

DagStructure dag_from_json(const nlohmann::json& j) {
  DagStructure dag;
  dag.n = j.at("n").get<std::size_t>();
  dag.end_node = j.at("end_node").get<NodeId>();
  for (const auto& e : j.at("edges")) dag.edges.emplace_back(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
  dag.topo_order = j.at("topo_order").get<std::vector<NodeId>>();
  validate_dag(dag);
  return dag;
}

nlohmann::json to_json(const AdjacencyMatrix& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < a.n(); ++i) {
    std::vector<double> row(a.entries().begin() + i * a.n(), a.entries().begin() + (i + 1) * a.n());
    rows.push_back(row);
  }
  return rows;
}

AdjacencyMatrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ContractViolation("matrix must be a non-empty array of rows");
  const std::size_t n = j.size();
  std::vector<double> entries;
  entries.reserve(n * n);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != n) throw ContractViolation("matrix must be square");
    for (const auto& e : row) entries.push_back(e.get<double>());
  }
  return AdjacencyMatrix(n, std::move(entries));
}

std::vector<AdjacencyMatrix> init_adjacency_swarm(std::size_t n, std::size_t count, SeededStream& rng) {
  if (n == 0 || count == 0) throw ContractViolation("init_adjacency_swarm needs n >= 1 and count >= 1");
  std::vector<AdjacencyMatrix> swarm;
  swarm.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    AdjacencyMatrix a(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform();
    swarm.push_back(std::move(a));
  }
  return swarm;
}

std::size_t top_p_sample(std::span<const double> scores, double p, SeededStream& rng) {
  if (scores.empty()) throw ContractViolation("top_p_sample needs at least one score");
  if (!(p > 0.0 && p <= 1.0)) throw ContractViolation("top_p_sample needs p in (0, 1]");
  double total = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ContractViolation("top_p_sample scores must be finite and >= 0");
    total += s;
  }
  if (total <= 0.0) return rng.index(scores.size());

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Cumulative mass is compared on raw scores to avoid rounding from division.
  const double threshold = p * total;
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < order.size()) {
    mass += scores[order[keep]];
    ++keep;
    if (mass >= threshold) break;
  }
  double u = rng.uniform() * mass;
  for (std::size_t k = 0; k < keep; ++k) {
    u -= scores[order[k]];
    if (u < 0.0) return order[k];
  }
  // Rounding left u marginally non-negative; take the last positive candidate.
  for (std::size_t k = keep; k-- > 0;)
    if (scores[order[k]] > 0.0) return order[k];
  return order[0];
}

DagStructure g_decode(const AdjacencyMatrix& a, double p, SeededStream& rng) {
  const std::size_t n = a.n();
  if (n == 0) throw ContractViolation("g_decode needs n >= 1");

  DagStructure dag;
  dag.n = n;
  std::vector<double> degree(n);
  for (std::size_t i = 0; i < n; ++i) degree[i] = a.out_degree(i);

  std::vector<double> inverse(n);
  for (std::size_t i = 0; i < n; ++i) inverse[i] = 1.0 / (std::max(degree[i], 0.0) + kInverseDegreeEpsilon);
  const NodeId end = top_p_sample(inverse, p, rng);
  dag.end_node = end;

  std::vector<NodeId> remaining;
  for (NodeId v = 0; v < n; ++v)
    if (v != end) remaining.push_back(v);
  std::vector<NodeId> existing{end};

  std::vector<double> candidate_scores;
  while (!remaining.empty()) {
    candidate_scores.clear();
    for (NodeId r : remaining) candidate_scores.push_back(std::max(degree[r], 0.0));
    const std::size_t pick = top_p_sample(candidate_scores, p, rng);
    const NodeId u = remaining[pick];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));

    double denom = 0.0;
    for (NodeId v : existing) denom += std::exp(a(u, v));
    bool added = false;
    for (NodeId v : existing) {
      const double prob = a(u, v) > 0.0 ? std::exp(a(u, v)) / denom : 0.0;
      if (rng.bernoulli(prob)) {
        dag.edges.emplace_back(u, v);
        added = true;
      }
    }
    if (!added) {
      NodeId target = existing.front();
      for (NodeId v : existing)
        if (a(u, v) > a(u, target) || (a(u, v) == a(u, target) && v < target)) target = v;
      dag.edges.emplace_back(u, target);
    }
    existing.push_back(u);
  }
  dag.topo_order.assign(existing.rbegin(), existing.rend());
  return dag;
}

AdjacencyMatrix prune_threshold(const AdjacencyMatrix& a, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ContractViolation("prune_threshold needs tau in [0, 1]");
  AdjacencyMatrix out = a;
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j)
      if (!(a(i, j) > tau)) out(i, j) = 0.0;
  return out;
}

}  // namespace hswarm
