#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adaptivity/dist_design.hpp"
#include "adaptivity/envgen.hpp"
#include "adaptivity/optimal_design.hpp"

namespace adaptivity {

// Regularized least-squares accumulator: Lambda = lambda_reg I + sum x x^T,
// xi = sum r x.
struct RidgeState {
  Eigen::MatrixXd lambda_mat;
  Eigen::VectorXd xi;
  double lambda_reg = 1.0;
  long count = 0;
};

RidgeState make_ridge_state(int d, double lambda_reg);
RidgeState ridge_update(const RidgeState& s, const Eigen::VectorXd& x, double reward);
Eigen::VectorXd ridge_estimate(const RidgeState& s);
double confidence_width(const RidgeState& s, const Eigen::VectorXd& x, double alpha);

// Keeps the arms whose upper confidence bound reaches the best lower bound:
// { j : r_hat_j + omega_j >= max_i (r_hat_i - omega_i) }.  r_hat/omega are
// parallel to survivors; the maximizer always survives, so never empty.
std::vector<int> eliminate(const std::vector<int>& survivors, const Eigen::VectorXd& r_hat,
                           const Eigen::VectorXd& omega);

struct StepRecord {
  long t;
  int arm;
  double regret_step;
  double regret_cum;
  int batch;
  long switches;
};

struct LearnerRecord {
  std::vector<StepRecord> steps;
  int batches_used = 0;
  long switches = 0;
  double total_regret = 0.0;
};

// Test hook: sees the survived set, the sampling distribution over it, and a
// fingerprint of the acting policy (constant while the policy is unchanged).
class StepProbe {
 public:
  virtual ~StepProbe() = default;
  virtual void on_step(long t, int batch, const ContextSet& all_arms,
                       const std::vector<int>& survived, const Design& dist, int chosen_arm,
                       std::uint64_t policy_fingerprint) = 0;
};

struct LearnerOptions {
  // Multiplier on the confidence width constants; 1.0 reproduces the
  // conservative closed forms, smaller values are for regret-curve runs.
  double alpha_scale = 1.0;
  GOptimalParams design_params{};
  double block_multiplier = 1.0;
};

enum class SamplerMode { Uniform, GOptimal };

// Static batch grid T_i = ceil(T^(1 - 2^-i)), i < M, T_M = T, with
// M = ceil(log2 log2 T); equal neighbors merged.
std::vector<long> batch_grid(long t_horizon);

// Grid for the design-learning variant: sqrt(T), 2 sqrt(T), then
// T^(1 - 2^-(i-1)) up to T, with M = ceil(log2 log2 T) + 1.
std::vector<long> dg_batch_grid(long t_horizon);

// Batched elimination learner; samples survivors uniformly or by G-optimal
// design.  Policy changes only at grid boundaries.
LearnerRecord run_batch_elimination(const Environment& env, long t_horizon, double delta,
                                    SamplerMode mode, std::uint64_t learner_seed,
                                    const LearnerOptions& opts = {}, StepProbe* probe = nullptr);

// Batched learner that also learns a sample policy per batch: the batch is
// split into an estimation half and a policy-learning half, and the survived
// sets of the latter feed the core-based design learner.
LearnerRecord run_batch_linucb_dg(const Environment& env, long t_horizon, double delta,
                                  std::uint64_t learner_seed, const LearnerOptions& opts = {},
                                  StepProbe* probe = nullptr);

// Layered UCB learner with determinant-triggered snapshot updates; each
// snapshot refresh (including the initial ones) counts as a policy switch.
LearnerRecord run_sup_linucb(const Environment& env, long t_horizon, double delta, double c_factor,
                             std::uint64_t learner_seed, const LearnerOptions& opts = {},
                             StepProbe* probe = nullptr);

std::uint64_t policy_fingerprint(const SamplePolicy& pi);

}  // namespace adaptivity
