#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "hswarm/random.hpp"

namespace hswarm {

/// Dense real tensor; the shape is carried so matrices and vectors cannot be
/// mixed inside one swarm.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  static Tensor zeros_like(const Tensor& other) {
    return Tensor{other.shape, std::vector<double>(other.values.size(), 0.0)};
  }
  static Tensor vector(std::vector<double> v) {
    auto n = v.size();
    return Tensor{{n}, std::move(v)};
  }
  std::size_t size() const { return values.size(); }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool operator==(const Tensor&) const = default;
};

struct PsoHyperparams {
  double step_length = 0.8;  // lambda
  double inertia = 0.2;      // phi_v
  double cognitive = 0.3;    // phi_p
  double social = 0.5;       // phi_g
  double repel = 0.05;       // phi_w

  /// Throws ContractViolation on negative coefficients, all-zero
  /// coefficients, or a non-positive step length.
  void validate() const;
};

struct Particle {
  Tensor position;
  Tensor velocity;
  Tensor personal_best;
  double personal_best_score = -std::numeric_limits<double>::infinity();

  /// Fresh particle: zero velocity, personal best at the start position with
  /// no score recorded yet.
  static Particle at(Tensor position);
};

struct SwarmState {
  Tensor global_best;
  double global_best_score = -std::numeric_limits<double>::infinity();
  Tensor global_worst;
  double global_worst_score = std::numeric_limits<double>::infinity();

  bool empty() const { return global_best.values.empty(); }
};

/// One draw of the four walk-randomness factors for a single particle.
struct WalkDraw {
  double r_v = 0, r_p = 0, r_g = 0, r_w = 0;
};
using WalkSampler = std::function<WalkDraw()>;

/// Maximum redraws when the normalization term comes out zero.
inline constexpr int kMaxWalkRedraws = 8;

/// One swarm step. `scores[i]` is the utility of `particles[i].position` as
/// passed in. Personal and global records are updated from those scores
/// first; then every particle moves from the same snapshot of the global
/// best/worst. Returns the index of the highest input score (lowest index on
/// ties).
std::size_t pso_step(std::vector<Particle>& particles, std::span<const double> scores,
                     SwarmState& state, const PsoHyperparams& hp, SeededStream& rng);

/// Same step with an explicit randomness source, one call per particle.
std::size_t pso_step(std::vector<Particle>& particles, std::span<const double> scores,
                     SwarmState& state, const PsoHyperparams& hp, const WalkSampler& draw);

}  // namespace hswarm
