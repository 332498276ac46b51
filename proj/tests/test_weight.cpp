#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hswarm/errors.hpp"
#include "hswarm/weight.hpp"
#include "oracles.hpp"

using namespace hswarm;

namespace {

DagStructure chain(std::size_t n) {
  DagStructure d;
  d.n = n;
  for (std::size_t k = 0; k + 1 < n; ++k) d.edges.emplace_back(k, k + 1);
  d.end_node = n - 1;
  for (std::size_t k = 0; k < n; ++k) d.topo_order.push_back(k);
  return d;
}

}  // namespace

TEST_CASE("JFK hand case") {
  // X1 = [m1, m1, m2] with f = 0.9, X2 = [m2, m2, m1] with f = 0.3.
  std::vector<Assignment> as{{{0, 0, 1}}, {{1, 1, 0}}};
  std::vector<double> f{0.9, 0.3};
  auto s = jfk_scores(as, f, 2);
  CHECK(s[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));
  auto counts = assignment_counts(as, 2);
  CHECK(counts[0] == std::vector<std::size_t>{2, 1});
  CHECK(counts[1] == std::vector<std::size_t>{1, 2});
}

TEST_CASE("JFK uniform utility and zero coverage") {
  std::vector<Assignment> as{{{0, 0}}, {{2, 0}}};
  std::vector<double> f{0.4, 0.4};
  auto s = jfk_scores(as, f, 3);
  for (double v : s) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));
  std::vector<double> g{0.2, 0.6};
  auto t = jfk_scores(as, g, 3);
  CHECK(t[1] == doctest::Approx(0.4));  // expert 1 never appears: mean utility
  CHECK_THROWS_AS(jfk_scores(std::vector<Assignment>{}, std::vector<double>{}, 3), ContractViolation);
  CHECK_THROWS_AS(jfk_scores(as, std::vector<double>{0.1}, 3), ContractViolation);
}

TEST_CASE("JFK matches brute force on random cases; bounds and equivariance hold") {
  SeededStream rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t pool = 1 + rng.index(8), m = 1 + rng.index(10), n = 1 + rng.index(8);
    std::vector<Assignment> as(m);
    std::vector<std::vector<std::size_t>> raw(m);
    std::vector<double> f(m);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < n; ++k) as[j].slots.push_back(rng.index(pool));
      raw[j] = as[j].slots;
      f[j] = rng.uniform() * 4 - 2;
    }
    auto got = jfk_scores(as, f, pool);
    auto want = oracle::jfk_brute(raw, f, pool);
    for (std::size_t i = 0; i < pool; ++i) {
      CHECK(std::abs(got[i] - want[i]) <= 1e-12);
      double lo = 1e9, hi = -1e9;
      for (std::size_t j = 0; j < m; ++j)
        if (std::count(raw[j].begin(), raw[j].end(), i)) {
          lo = std::min(lo, f[j]);
          hi = std::max(hi, f[j]);
        }
      if (lo <= hi) CHECK((got[i] >= lo - 1e-12 && got[i] <= hi + 1e-12));
    }
    // Relabel experts with a random permutation.
    std::vector<std::size_t> perm(pool);
    for (std::size_t i = 0; i < pool; ++i) perm[i] = i;
    for (std::size_t i = pool; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    auto relabeled = as;
    for (auto& a : relabeled)
      for (auto& s : a.slots) s = perm[s];
    auto permuted = jfk_scores(relabeled, f, pool);
    for (std::size_t i = 0; i < pool; ++i) CHECK(permuted[perm[i]] == doctest::Approx(got[i]).epsilon(1e-12));
  }
}

TEST_CASE("sample_assignments basics and coverage repair") {
  SeededStream rng(5);
  auto one = sample_assignments(chain(4), 1, 10, rng);
  for (const auto& a : one)
    for (auto s : a.slots) CHECK(s == 0);

  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.index(10), pool = 1 + rng.index(12), m = 1 + rng.index(10);
    auto as = sample_assignments(chain(n), pool, m, rng);
    REQUIRE(as.size() == m);
    auto counts = assignment_counts(as, pool);
    for (const auto& row : counts) {
      std::size_t sum = 0;
      for (auto c : row) sum += c;
      CHECK(sum == n);
    }
    if (m * n >= pool)
      for (std::size_t i = 0; i < pool; ++i) {
        std::size_t total = 0;
        for (const auto& row : counts) total += row[i];
        CHECK(total > 0);
      }
  }
  CHECK_THROWS_AS(sample_assignments(chain(2), 0, 3, rng), ContractViolation);
  CHECK_THROWS_AS(sample_assignments(chain(2), 3, 0, rng), ContractViolation);
}

TEST_CASE("raw slot frequencies are uniform over the pool") {
  SeededStream rng(44);
  const std::size_t pool = 5;
  auto as = sample_assignments(chain(10), pool, 10000, rng, false);  // 10^5 slots
  std::vector<double> freq(pool, 0);
  for (const auto& a : as)
    for (auto s : a.slots) freq[s] += 1e-5;
  for (double f : freq) CHECK(std::abs(f - 1.0 / pool) <= 0.02);
}

TEST_CASE("weight_step with a pool of one") {
  ExpertPool pool{Expert{{0.2, 0.4}, {}}};
  auto swarm = ExpertSwarm::from_pool(pool);
  ConstantUtility u(0.3);
  WeightStepOptions opts;
  auto r = weight_step(swarm, pool, chain(3), u, opts, SeededStream(3));
  CHECK(r.report.scores.size() == 1);
  CHECK(r.report.scores[0] == doctest::Approx(0.3));
  CHECK(r.best_expert_index == 0);
  CHECK(pool[0].params == std::vector<double>{0.2, 0.4});
}

TEST_CASE("weight_step call accounting and report invariants") {
  SeededStream rng(13);
  AffineTaskSpec spec;
  spec.n_experts = 6;
  spec.distinct = 6;
  spec.dataset_size = 4;
  auto task = make_affine_task(spec, rng);
  auto pool = task.initial_pool;
  auto swarm = ExpertSwarm::from_pool(pool);
  WeightStepOptions opts;
  opts.assignments = 7;
  auto dag = task.hidden_dag;
  auto r = weight_step(swarm, pool, dag, *task.utility, opts, SeededStream(1));
  CHECK(r.evaluator_calls == 7 * dag.n * 4);
  CHECK(r.report.assignments.size() == 7);
  CHECK(r.report.utilities.size() == 7);
  for (const auto& row : r.report.counts) {
    std::size_t sum = 0;
    for (auto c : row) sum += c;
    CHECK(sum == dag.n);
  }
  auto j = to_json(r.report);
  CHECK(j["scores"].size() == 6);
  CHECK(pool[0].params == swarm.particles[0].position.values);
}

TEST_CASE("remote experts are rejected by the weight-step") {
  ExpertPool remote(3, Expert{{}, "http://127.0.0.1:9/x"});
  CHECK_THROWS_AS(ExpertSwarm::from_pool(remote), ContractViolation);
}

TEST_CASE("JFK-guided weight-steps improve a synthetic affine task") {
  int improving = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededStream rng(seed);
    AffineTaskSpec spec;
    spec.n_experts = 6;
    spec.distinct = 6;
    spec.pool_noise = 0.5;
    auto task = make_affine_task(spec, rng);
    auto pool = task.initial_pool;
    auto swarm = ExpertSwarm::from_pool(pool);
    WeightStepOptions opts;
    double first = 0, prev = -1e300;
    bool monotone = true;
    for (std::uint64_t it = 0; it < 20; ++it) {
      auto r = weight_step(swarm, pool, task.hidden_dag, *task.utility, opts, SeededStream(seed).derive({it}));
      const double best = swarm.state.global_best_score;
      if (it == 0) first = best;
      monotone = monotone && best >= prev;
      prev = best;
      (void)r;
    }
    improving += monotone && prev >= first;
  }
  CHECK(improving >= 8);
}
