#include "hswarm/pso.hpp"

#include <cmath>
#include <string>

#include "hswarm/errors.hpp"

namespace hswarm {

void PsoHyperparams::validate() const {
  const double coeffs[] = {inertia, cognitive, social, repel};
  bool any_positive = false;
  for (double c : coeffs) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ContractViolation("pso coefficients must be finite and >= 0");
    any_positive = any_positive || c > 0.0;
  }
  if (!any_positive) throw ContractViolation("at least one pso coefficient must be > 0");
  if (!(step_length > 0.0) || !std::isfinite(step_length)) throw ContractViolation("pso step_length must be > 0");
}

Particle Particle::at(Tensor position) {
  Particle p;
  p.velocity = Tensor::zeros_like(position);
  p.personal_best = position;
  p.position = std::move(position);
  return p;
}

namespace {

void check_shapes(const std::vector<Particle>& particles, std::span<const double> scores,
                  const SwarmState& state) {
  if (particles.empty()) throw ContractViolation("pso_step needs at least one particle");
  if (scores.size() != particles.size())
    throw ContractViolation("pso_step: " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(particles.size()) + " particles");
  const Tensor& ref = particles.front().position;
  for (const auto& p : particles) {
    if (!p.position.same_shape(ref) || !p.velocity.same_shape(ref) || !p.personal_best.same_shape(ref) ||
        p.position.size() != p.velocity.size() || p.position.size() != p.personal_best.size())
      throw ContractViolation("pso_step: particle tensor shapes differ");
  }
  if (!state.empty() && (!state.global_best.same_shape(ref) || !state.global_worst.same_shape(ref)))
    throw ContractViolation("pso_step: swarm state shape differs from particles");
  for (double s : scores)
    if (std::isnan(s)) throw ContractViolation("pso_step: NaN score");
}

}  // namespace

std::size_t pso_step(std::vector<Particle>& particles, std::span<const double> scores,
                     SwarmState& state, const PsoHyperparams& hp, const WalkSampler& draw) {
  hp.validate();
  check_shapes(particles, scores, state);

  std::size_t best = 0, worst = 0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    auto& p = particles[i];
    if (scores[i] > p.personal_best_score) {
      p.personal_best = p.position;
      p.personal_best_score = scores[i];
    }
    if (scores[i] > scores[best]) best = i;
    if (scores[i] < scores[worst]) worst = i;
  }
  if (state.empty() || scores[best] > state.global_best_score) {
    state.global_best = particles[best].position;
    state.global_best_score = scores[best];
  }
  if (state.global_worst.values.empty() || scores[worst] < state.global_worst_score) {
    state.global_worst = particles[worst].position;
    state.global_worst_score = scores[worst];
  }

  const std::vector<double> g = state.global_best.values;
  const std::vector<double> gw = state.global_worst.values;
  for (auto& p : particles) {
    WalkDraw r;
    double c = 0.0;
    for (int attempt = 0; attempt <= kMaxWalkRedraws; ++attempt) {
      r = draw();
      c = r.r_v * hp.inertia + r.r_p * hp.cognitive + r.r_g * hp.social + r.r_w * hp.repel;
      if (c > 0.0) break;
    }
    if (!(c > 0.0)) throw ContractViolation("pso_step: normalization term stayed zero after redraws");
    const double wv = r.r_v * hp.inertia / c, wp = r.r_p * hp.cognitive / c;
    const double wg = r.r_g * hp.social / c, ww = r.r_w * hp.repel / c;
    auto& x = p.position.values;
    auto& v = p.velocity.values;
    const auto& pb = p.personal_best.values;
    for (std::size_t k = 0; k < x.size(); ++k) {
      v[k] = wv * v[k] + wp * (pb[k] - x[k]) + wg * (g[k] - x[k]) - ww * (gw[k] - x[k]);
      x[k] += hp.step_length * v[k];
    }
  }
  return best;
}

std::size_t pso_step(std::vector<Particle>& particles, std::span<const double> scores,
                     SwarmState& state, const PsoHyperparams& hp, SeededStream& rng) {
  return pso_step(particles, scores, state, hp, [&rng] {
    WalkDraw r;
    r.r_v = rng.uniform();
    r.r_p = rng.uniform();
    r.r_g = rng.uniform();
    r.r_w = rng.uniform();
    return r;
  });
}

}  // namespace hswarm
