#pragma once
// Independent reference computations for tests. Nothing here calls into the
// library's decode, scoring, or sampling code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Exact distribution of a nucleus draw: probability of each index.
inline std::vector<double> top_p_distribution(const std::vector<double>& scores, double p) {
  const std::size_t n = scores.size();
  double total = 0;
  for (double s : scores) total += s;
  std::vector<double> probs(n, 0.0);
  if (total <= 0) {
    for (auto& q : probs) q = 1.0 / static_cast<double>(n);
    return probs;
  }
  // Selection sort by descending score, lowest index first on ties.
  std::vector<bool> used(n, false);
  std::vector<std::size_t> kept;
  double mass = 0;
  while (mass < p * total) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i] && (best == n || scores[i] > scores[best])) best = i;
    if (best == n) break;
    used[best] = true;
    kept.push_back(best);
    mass += scores[best];
  }
  for (auto i : kept) probs[i] = scores[i] / mass;
  return probs;
}

/// Canonical text key of a decoded graph: end node and sorted edge list.
inline std::string dag_key(std::size_t end, std::vector<std::pair<std::size_t, std::size_t>> edges) {
  std::sort(edges.begin(), edges.end());
  std::string k = "end=" + std::to_string(end) + ":";
  for (auto [u, v] : edges) k += std::to_string(u) + ">" + std::to_string(v) + ",";
  return k;
}

/// Exact distribution over decoded graphs for a small matrix `a` (row-major,
/// n x n), enumerating every branch of the decoder: end-node pick by inverse
/// out-degree, node order by out-degree, independent edge coins with a forced
/// argmax edge when none lands, zero entries never sampled.
inline std::map<std::string, double> g_decode_distribution(const std::vector<double>& a, std::size_t n, double p) {
  auto at = [&](std::size_t i, std::size_t j) { return a[i * n + j]; };
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) deg[i] += at(i, j);

  std::map<std::string, double> dist;
  struct Branch {
    std::vector<std::size_t> existing;
    std::vector<std::size_t> remaining;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    double prob;
  };
  std::vector<Branch> stack;

  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / (deg[i] + 1e-6);
  auto end_probs = top_p_distribution(inv, p);
  for (std::size_t k = 0; k < n; ++k) {
    if (end_probs[k] == 0) continue;
    Branch b;
    b.existing = {k};
    for (std::size_t v = 0; v < n; ++v)
      if (v != k) b.remaining.push_back(v);
    b.prob = end_probs[k];
    stack.push_back(b);
  }
  while (!stack.empty()) {
    Branch b = stack.back();
    stack.pop_back();
    if (b.remaining.empty()) {
      dist[dag_key(b.existing.front(), b.edges)] += b.prob;
      continue;
    }
    std::vector<double> rs;
    for (auto r : b.remaining) rs.push_back(deg[r]);
    auto pick = top_p_distribution(rs, p);
    for (std::size_t idx = 0; idx < b.remaining.size(); ++idx) {
      if (pick[idx] == 0) continue;
      const std::size_t u = b.remaining[idx];
      double denom = 0;
      for (auto v : b.existing) denom += std::exp(at(u, v));
      const std::size_t m = b.existing.size();
      // Every subset of existing nodes as the set of landed coins.
      for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        double pr = 1.0;
        std::vector<std::pair<std::size_t, std::size_t>> added;
        for (std::size_t t = 0; t < m; ++t) {
          const std::size_t v = b.existing[t];
          const double q = at(u, v) > 0 ? std::exp(at(u, v)) / denom : 0.0;
          if (mask & (std::size_t{1} << t)) {
            pr *= q;
            added.emplace_back(u, v);
          } else {
            pr *= 1.0 - q;
          }
        }
        if (pr == 0) continue;
        if (added.empty()) {
          std::size_t target = b.existing.front();
          for (auto v : b.existing)
            if (at(u, v) > at(u, target) || (at(u, v) == at(u, target) && v < target)) target = v;
          added.emplace_back(u, target);
        }
        Branch next = b;
        next.prob = b.prob * pick[idx] * pr;
        next.remaining.erase(next.remaining.begin() + static_cast<std::ptrdiff_t>(idx));
        next.existing.push_back(u);
        next.edges.insert(next.edges.end(), added.begin(), added.end());
        stack.push_back(next);
      }
    }
  }
  return dist;
}

/// Brute-force JFK score straight from the definition, counting occurrences
/// slot by slot.
inline std::vector<double> jfk_brute(const std::vector<std::vector<std::size_t>>& assignments,
                                     const std::vector<double>& utilities, std::size_t pool) {
  std::vector<double> out(pool);
  double mean = 0;
  for (double u : utilities) mean += u;
  mean /= static_cast<double>(utilities.size());
  for (std::size_t i = 0; i < pool; ++i) {
    long double num = 0, den = 0;
    for (std::size_t j = 0; j < assignments.size(); ++j) {
      long double cnt = 0;
      for (std::size_t k = 0; k < assignments[j].size(); ++k)
        if (assignments[j][k] == i) cnt += 1;
      num += cnt * utilities[j];
      den += cnt;
    }
    out[i] = den > 0 ? static_cast<double>(num / den) : mean;
  }
  return out;
}

/// Edge edit distance via dense adjacency comparison over all ordered pairs.
inline std::size_t edit_distance_dense(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& a,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& b) {
  std::vector<int> ma(n * n, 0), mb(n * n, 0);
  for (auto [u, v] : a) ma[u * n + v] = 1;
  for (auto [u, v] : b) mb[u * n + v] = 1;
  std::size_t d = 0;
  for (std::size_t k = 0; k < n * n; ++k) d += ma[k] != mb[k];
  return d;
}

}  // namespace oracle
