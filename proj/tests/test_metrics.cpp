#include <doctest.h>

#include <algorithm>

#include "hswarm/errors.hpp"
#include "hswarm/metrics.hpp"

using namespace hswarm;

namespace {

/// Straight evaluation of the bucket-weighted gain on a row-major table.
double gain_direct(const std::vector<std::vector<bool>>& experts, const std::vector<bool>& system) {
  const std::size_t N = experts.front().size(), D = experts.size();
  double total = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    std::size_t size = 0, correct = 0;
    for (std::size_t q = 0; q < D; ++q)
      if (static_cast<std::size_t>(std::count(experts[q].begin(), experts[q].end(), true)) == n) {
        ++size;
        correct += system[q];
      }
    if (size > 0) total += static_cast<double>(size) / D * (static_cast<double>(correct) / size - static_cast<double>(n) / N);
  }
  return total;
}

}  // namespace

TEST_CASE("hand bucketing") {
  std::vector<std::vector<bool>> e{{false, false}, {true, false}, {false, true}, {true, true}};
  std::vector<bool> s{true, true, false, true};
  auto t = bucketize(e, s);
  CHECK(t.counts == std::vector<std::size_t>{1, 2, 1});
  CHECK(t.accuracy(0) == 1.0);
  CHECK(t.accuracy(1) == 0.5);
  CHECK(t.accuracy(2) == 1.0);
  CHECK(collaborative_gain(t) == 0.0);
  CHECK(zero_bucket_rate(t) == 1.0);
}

TEST_CASE("all wrong lands in bucket zero") {
  std::vector<std::vector<bool>> e(5, std::vector<bool>(3, false));
  auto t = bucketize(e, std::vector<bool>(5, false));
  CHECK(t.counts[0] == 5);
  CHECK(t.accuracy(0) == 0.0);
  CHECK(collaborative_gain(t) == 0.0);
  CHECK(zero_bucket_rate(t) == 0.0);
}

TEST_CASE("expected accuracy exactly met gives zero gain") {
  // N = 4, each bucket n holds 4 problems of which n are solved.
  std::vector<std::vector<bool>> e;
  std::vector<bool> s;
  for (std::size_t n = 0; n <= 4; ++n)
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<bool> row(4, false);
      for (std::size_t i = 0; i < n; ++i) row[i] = true;
      e.push_back(row);
      s.push_back(k < n);
    }
  CHECK(collaborative_gain(bucketize(e, s)) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("fuzzed gains agree with direct evaluation, stay in range and ignore order") {
  SeededStream rng(77);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t N = 1 + rng.index(10), D = 1 + rng.index(40);
    std::vector<std::vector<bool>> e(D, std::vector<bool>(N));
    std::vector<bool> s(D);
    for (std::size_t q = 0; q < D; ++q) {
      for (std::size_t i = 0; i < N; ++i) e[q][i] = rng.bernoulli(0.5);
      s[q] = rng.bernoulli(0.5);
    }
    auto table = bucketize(e, s);
    const double g = collaborative_gain(table);
    CHECK(g >= -1.0);
    CHECK(g <= 1.0);
    CHECK(g == doctest::Approx(gain_direct(e, s)).epsilon(1e-12));
    std::size_t sum = 0;
    for (std::size_t n = 0; n <= N; ++n) {
      sum += table.counts[n];
      CHECK(table.system_correct[n] <= table.counts[n]);
    }
    CHECK(sum == D);
    std::vector<std::size_t> order(D);
    for (std::size_t q = 0; q < D; ++q) order[q] = q;
    for (std::size_t q = D; q > 1; --q) std::swap(order[q - 1], order[rng.index(q)]);
    std::vector<std::vector<bool>> e2;
    std::vector<bool> s2;
    for (auto q : order) {
      e2.push_back(e[q]);
      s2.push_back(s[q]);
    }
    auto shuffled = bucketize(e2, s2);
    CHECK(shuffled.counts == table.counts);
    CHECK(shuffled.system_correct == table.system_correct);
  }
}

TEST_CASE("published gains are within range") {
  for (double g : {0.143, 0.184, 0.101, 0.426}) {
    CHECK(g >= -1.0);
    CHECK(g <= 1.0);
  }
}

TEST_CASE("ablation consistency") {
  CHECK_FALSE(ablation_consistent(0.24, 0.36, 0.53, 0.54));
  CHECK(ablation_consistent(0.1, 0.2, 0.5, 0.4));
  CHECK(ablation_consistent(0.3, 0.2, 0.4, 0.5));
  CHECK_FALSE(ablation_consistent(0.2, 0.2, 0.5, 0.4));
  CHECK_FALSE(ablation_consistent(0.1, 0.2, 0.5, 0.5));
}

TEST_CASE("dimension mismatches are rejected") {
  std::vector<std::vector<bool>> e{{true, false}, {true}};
  CHECK_THROWS_AS(bucketize(e, {true, false}), ContractViolation);
  CHECK_THROWS_AS(bucketize({{true}}, {true, false}), ContractViolation);
  CHECK_THROWS_AS(bucketize({}, {}), ContractViolation);
}

TEST_CASE("analysis report and trace csv") {
  std::vector<std::vector<bool>> e{{false, false}, {true, false}, {false, true}, {true, true}};
  auto t = bucketize(e, {true, true, false, true});
  auto j = analysis_report(t, {{"NLGraph", 0.24, 0.36, 0.53, 0.54}});
  CHECK(j["buckets"].size() == 3);
  CHECK(j["collaborative_gain"] == 0.0);
  CHECK(j["ablations"][0]["consistent"] == false);

  RunTrace trace;
  IterationRecord r;
  r.ran_role = true;
  r.best_utility = 0.5;
  r.best_role_utility = 0.5;
  r.iteration_role_best = 0.5;
  r.evaluator_calls = 12;
  trace.append(r);
  r.iteration = 1;
  r.ran_role = false;
  r.ran_weight = true;
  r.iteration_role_best.reset();
  r.jfk_scores = {0.1, 0.4};
  trace.append(r);
  auto csv = trace_to_csv(trace);
  CHECK(csv.rfind("iteration,steps,best_role_utility,best_utility,iteration_role_best,iteration_weight_best,best_jfk,"
                  "evaluator_calls,wall_time_ms\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("1,weight,0.5,0.5,,,0.40000000000000002,12,0") != std::string::npos);
}
