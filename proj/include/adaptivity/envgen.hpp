#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "adaptivity/optimal_design.hpp"
#include "adaptivity/rng.hpp"

namespace adaptivity {

// Stochastic context distributions.
struct FiniteMultisetSpec {
  std::vector<ContextSet> sets;
  std::vector<double> probs;  // same length as sets, sums to 1
};
struct UniformSphereSpec {};
// The hard family for empirical-design generalization: Y_1 = {e_1} with
// probability 1/(d gamma); Y_i = {sqrt(1-eps^2) e_i + eps e_1, e_i} each with
// probability (1 - 1/(d gamma))/(d-1), where eps = sqrt(d/gamma).
struct CounterexampleD6Spec {
  double gamma = 1e4;
};
using StochasticSpec = std::variant<FiniteMultisetSpec, UniformSphereSpec, CounterexampleD6Spec>;

// Adversarial lower-bound instance: per 2-d block, L = 8M/d stages with its
// own sign sequence u; within stage j the two candidate contexts are constant.
struct LowerBoundSpec {
  int d = 2;       // even
  long T = 0;
  long M = 0;      // switch budget
  std::vector<std::vector<int>> u;  // d/2 blocks, each L entries in {-1, +1}
};

// Derived quantities of a lower-bound instance (all closed-form).
class LowerBoundLayout {
 public:
  explicit LowerBoundLayout(LowerBoundSpec spec);

  const LowerBoundSpec& spec() const { return spec_; }
  long stages_per_block() const { return stages_; }      // L
  long block_steps() const { return block_steps_; }      // T / (d/2)
  double upsilon() const { return upsilon_; }
  double z(long j) const;                                 // j in [1, L]
  double psi(int block, long j) const;                    // psi_j(u^{(block)}), j in [0, L]
  long stage_of(long step_in_block) const;                // 1-based within block
  int block_of(long t) const;                             // 0-based
  ContextSet contexts(long t) const;                      // t in [1, T]
  Eigen::VectorXd theta() const;                          // concatenated blocks

 private:
  LowerBoundSpec spec_;
  long stages_ = 0;
  long block_steps_ = 0;
  double upsilon_ = 0.0;
};

// A bandit environment: hidden theta, a context stream, and seeded Gaussian
// noise.  Learners see contexts and rewards only; the regret meter reads
// theta through meter_theta().
class Environment {
 public:
  struct Outcome {
    double reward;
    double regret;  // max_j theta.x_j - theta.x_i, via the hidden theta
  };

  int d() const { return int(theta_.size()); }
  int max_arms() const { return k_; }
  long horizon() const { return t_horizon_; }
  double noise_scale() const { return noise_scale_; }
  void set_noise_scale(double s) { noise_scale_ = s; }
  std::uint64_t noise_seed() const { return noise_seed_; }

  // Context set for step t (1-based); deterministic in (seeds, t).
  ContextSet contexts(long t) const;

  // Reward draw and instantaneous regret for playing arm i at step t.  Noise
  // comes from the caller's stream so repeated queries stay independent.
  Outcome step(long t, int i, CounterRng& noise_rng) const;

  const Eigen::VectorXd& meter_theta() const { return theta_; }

  friend Environment stochastic_env(StochasticSpec spec, int d, int k, long t_horizon,
                                    std::uint64_t theta_seed, std::uint64_t ctx_seed,
                                    std::uint64_t noise_seed);
  friend Environment stochastic_env_with_theta(StochasticSpec spec, int k, long t_horizon,
                                               Eigen::VectorXd theta, std::uint64_t ctx_seed,
                                               std::uint64_t noise_seed);
  friend Environment scheduled_env(std::vector<ContextSet> schedule, Eigen::VectorXd theta,
                                   std::uint64_t noise_seed);
  friend Environment lower_bound_instance(const LowerBoundSpec& spec, std::uint64_t noise_seed);

 private:
  Environment() = default;

  Eigen::VectorXd theta_;
  int k_ = 0;
  long t_horizon_ = 0;
  std::uint64_t ctx_seed_ = 0;
  std::uint64_t noise_seed_ = 0;
  double noise_scale_ = 1.0;

  struct Scheduled {
    std::vector<ContextSet> sets;
  };
  std::variant<StochasticSpec, Scheduled, LowerBoundLayout> source_{UniformSphereSpec{}};
};

// i.i.d. context sets per step; theta drawn uniformly from the unit sphere.
Environment stochastic_env(StochasticSpec spec, int d, int k, long t_horizon,
                           std::uint64_t theta_seed, std::uint64_t ctx_seed,
                           std::uint64_t noise_seed);

Environment stochastic_env_with_theta(StochasticSpec spec, int k, long t_horizon,
                                      Eigen::VectorXd theta, std::uint64_t ctx_seed,
                                      std::uint64_t noise_seed);

Environment scheduled_env(std::vector<ContextSet> schedule, Eigen::VectorXd theta,
                          std::uint64_t noise_seed);

// Builds the adversarial instance; throws NormViolationError if the
// concatenated theta or any context leaves the unit ball (the guarantee
// depends on the exact scaling, so no silent rescaling).
Environment lower_bound_instance(const LowerBoundSpec& spec, std::uint64_t noise_seed = 0);

// Searches (beam over tail sums) for sign sequences that keep every norm in
// the unit ball AND preserve the per-step suboptimality-gap floor
// upsilon^{-1} / (2 sqrt(T/(d/2))).  In the theory regime (upsilon <= 1/10)
// any signs qualify; at desk-scale horizons upsilon approaches 1 and almost
// all sequences break the norm constraints.  Throws if the search fails.
LowerBoundSpec feasible_lower_bound_spec(int d, long t_horizon, long switch_budget);

// Uniform unit vector, consuming 2d uniforms from rng.
Eigen::VectorXd sphere_point(int d, CounterRng& rng);

}  // namespace adaptivity
