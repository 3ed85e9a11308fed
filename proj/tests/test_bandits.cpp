#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "adaptivity/bandits.hpp"
#include "oracles.hpp"

using namespace adaptivity;

namespace {

// Collects per-step facts for the structural invariants.
struct Recorder : StepProbe {
  std::map<int, std::set<std::uint64_t>> fingerprints_by_batch;
  std::vector<std::vector<int>> survived;
  std::vector<Design> dists;
  std::vector<ContextSet> contexts;

  void on_step(long, int batch, const ContextSet& all, const std::vector<int>& surv,
               const Design& dist, int, std::uint64_t fp) override {
    fingerprints_by_batch[batch].insert(fp);
    survived.push_back(surv);
    dists.push_back(dist);
    contexts.push_back(all);
  }
};

Environment two_arm_gap_env(long t_horizon) {
  // One fixed context set with a clearly best arm under theta = e_1.
  ContextSet only{Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.1, 0.0)};
  Eigen::VectorXd theta = Eigen::Vector2d(1.0, 0.0);
  Environment env = stochastic_env_with_theta(FiniteMultisetSpec{{only}, {1.0}}, 2, t_horizon,
                                              theta, 17, 19);
  env.set_noise_scale(0.0);
  return env;
}

// alpha_scale that turns the width constant into s * sqrt(lambda_reg), the
// value the zero-noise validity argument needs.
double noiseless_alpha_scale(int d, int k, long t, double delta, double lambda_factor, double s) {
  double lambda_reg = lambda_factor * std::log(2.0 * d * double(t) / delta);
  return s * std::sqrt(lambda_reg) / (10.0 * std::sqrt(std::log(2.0 * d * k * double(t) / delta)));
}

}  // namespace

TEST_CASE("ridge accumulator closed forms") {
  RidgeState s = make_ridge_state(3, 1.0);
  RidgeState s1 = ridge_update(s, Eigen::Vector3d(1.0, 0.0, 0.0), 1.0);
  CHECK(s1.lambda_mat(0, 0) == doctest::Approx(2.0));
  CHECK(s1.lambda_mat(1, 1) == doctest::Approx(1.0));
  CHECK(s1.xi(0) == doctest::Approx(1.0));
  CHECK(s1.count == 1);

  // Updates commute in the final state.
  Eigen::Vector3d a(0.3, 0.2, 0.0), b(0.0, -0.4, 0.5);
  RidgeState ab = ridge_update(ridge_update(s, a, 0.7), b, -0.2);
  RidgeState ba = ridge_update(ridge_update(s, b, -0.2), a, 0.7);
  CHECK((ab.lambda_mat - ba.lambda_mat).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ab.xi - ba.xi).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ridge matches the batched matrix-product oracle") {
  CounterRng rng(61, 0);
  const int d = 4;
  RidgeState s = make_ridge_state(d, 2.5);
  Eigen::MatrixXd xs(d, 50);
  Eigen::VectorXd rs(50);
  for (int i = 0; i < 50; ++i) {
    xs.col(i) = oracle::random_vec(d, rng) * 0.3;
    rs(i) = rng.normal();
    s = ridge_update(s, xs.col(i), rs(i));
  }
  Eigen::MatrixXd expect = 2.5 * Eigen::MatrixXd::Identity(d, d) + xs * xs.transpose();
  CHECK((s.lambda_mat - expect).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s.xi - xs * rs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ridge_estimate: empty state, single point, exact recovery") {
  RidgeState s = make_ridge_state(3, 1.0);
  CHECK(ridge_estimate(s).cwiseAbs().maxCoeff() == 0.0);

  RidgeState s1 = ridge_update(s, Eigen::Vector3d(1.0, 0.0, 0.0), 1.0);
  CHECK(ridge_estimate(s1)(0) == doctest::Approx(0.5));

  CounterRng rng(62, 0);
  const int d = 4;
  Eigen::VectorXd theta = oracle::random_vec(d, rng).normalized() * 0.8;
  RidgeState noiseless = make_ridge_state(d, 1e-10);
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd x = oracle::random_vec(d, rng).normalized();
    noiseless = ridge_update(noiseless, x, theta.dot(x));
  }
  CHECK((ridge_estimate(noiseless) - theta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("confidence width: closed form and monotone shrinkage") {
  RidgeState s = make_ridge_state(2, 1.0);
  Eigen::Vector2d e1(1.0, 0.0);
  CHECK(confidence_width(s, e1, 2.0) == doctest::Approx(2.0));
  RidgeState s1 = ridge_update(s, e1, 0.3);
  CHECK(confidence_width(s1, e1, 2.0) < confidence_width(s, e1, 2.0));
}

TEST_CASE("confidence width coverage under planted-theta Gaussian noise") {
  CounterRng rng(63, 0);
  const int d = 3;
  const double lambda_reg = 1.0;
  const double gamma = 3.0;
  const int reps = 2000;
  int violations = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Eigen::VectorXd theta = oracle::random_vec(d, rng).normalized() * 0.9;
    RidgeState s = make_ridge_state(d, lambda_reg);
    for (int i = 0; i < 25; ++i) {
      Eigen::VectorXd x = oracle::random_vec(d, rng).normalized();
      s = ridge_update(s, x, theta.dot(x) + rng.normal());
    }
    Eigen::VectorXd probe = oracle::random_vec(d, rng).normalized();
    double width = confidence_width(s, probe, gamma + std::sqrt(lambda_reg));
    double err = std::abs(probe.dot(ridge_estimate(s) - theta));
    if (err > width) ++violations;
  }
  double p_bound = 2.0 * std::exp(-gamma * gamma / 2.0);
  double slack = 4.0 * std::sqrt(p_bound * (1.0 - p_bound) / reps);
  CHECK(double(violations) / reps <= p_bound + slack);
}

TEST_CASE("eliminate keeps exactly the plausible arms") {
  std::vector<int> all{0, 1, 2};
  Eigen::Vector3d r(1.0, 2.0, 3.0);

  std::vector<int> only_max = eliminate(all, r, Eigen::Vector3d::Zero());
  REQUIRE(only_max.size() == 1);
  CHECK(only_max[0] == 2);

  std::vector<int> everyone = eliminate(all, r, Eigen::Vector3d::Constant(10.0));
  CHECK(everyone.size() == 3);

  // 0.9 + 0.06 < 1.0 - 0.01, so arm 0 falls with arm 2.
  Eigen::Vector3d r2(0.9, 1.0, 0.2), w2(0.06, 0.01, 0.01);
  std::vector<int> one = eliminate(all, r2, w2);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 1);

  // Widening arm 0 to 0.11 puts it back over the threshold.
  Eigen::Vector3d w3(0.11, 0.01, 0.01);
  std::vector<int> two = eliminate(all, r2, w3);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == 0);
  CHECK(two[1] == 1);

  CHECK_THROWS_AS(eliminate({}, Eigen::VectorXd(), Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("batch grids match the closed forms") {
  std::vector<long> g = batch_grid(10000);
  REQUIRE(g.size() == 4);  // ceil(log2 log2 1e4)
  CHECK(g[0] == 100);
  CHECK(g[1] == 1000);
  CHECK(g[2] == 3163);
  CHECK(g[3] == 10000);

  std::vector<long> dg = dg_batch_grid(10000);
  REQUIRE(dg.size() == 5);  // one extra batch
  CHECK(dg[0] == 100);
  CHECK(dg[1] == 200);
  CHECK(dg[2] == 1000);
  CHECK(dg[3] == 3163);
  CHECK(dg[4] == 10000);

  CHECK(batch_grid(4).size() == 1);
  CHECK(dg_batch_grid(16).size() == 3);  // {4, 8, 16}
  CHECK_THROWS_AS(batch_grid(3), std::invalid_argument);
}

TEST_CASE("batch elimination: batch count, switch accounting, plateau, retention") {
  const long t_horizon = 65536;
  Environment env = two_arm_gap_env(t_horizon);
  LearnerOptions opts;
  opts.alpha_scale = noiseless_alpha_scale(2, 2, t_horizon, 0.1, 16.0, 1.05);
  Recorder probe;
  LearnerRecord rec = run_batch_elimination(env, t_horizon, 0.1, SamplerMode::Uniform, 123, opts,
                                            &probe);

  const int m = int(std::ceil(std::log2(std::log2(double(t_horizon)))));
  CHECK(rec.batches_used == m);
  CHECK(rec.switches == m);
  REQUIRE(long(rec.steps.size()) == t_horizon);

  // Policy fingerprint constant within every batch.
  for (const auto& [batch, fps] : probe.fingerprints_by_batch) CHECK(fps.size() == 1);

  // Retention: the best arm (index 0) survives every elimination.
  for (const auto& surv : probe.survived) {
    CHECK(std::find(surv.begin(), surv.end(), 0) != surv.end());
  }

  // Noiseless run with a dominant gap: the final 10% of steps add no regret.
  double tail = 0.0;
  for (size_t i = size_t(t_horizon * 9 / 10); i < rec.steps.size(); ++i) {
    tail += rec.steps[i].regret_step;
  }
  CHECK(tail == 0.0);

  // Per-step regret within [0, 2]; cumulative column is the prefix sum.
  double cum = 0.0;
  long last_switches = 0;
  for (const StepRecord& s : rec.steps) {
    CHECK(s.regret_step >= 0.0);
    CHECK(s.regret_step <= 2.0);
    cum += s.regret_step;
    CHECK(s.regret_cum == doctest::Approx(cum).epsilon(1e-12));
    CHECK(s.switches >= last_switches);
    last_switches = s.switches;
  }
}

TEST_CASE("batch elimination with the G-optimal sampler is well formed") {
  Environment env = stochastic_env(UniformSphereSpec{}, 3, 5, 512, 3, 4, 5);
  LearnerRecord rec = run_batch_elimination(env, 512, 0.1, SamplerMode::GOptimal, 9);
  CHECK(rec.batches_used == int(std::ceil(std::log2(std::log2(512.0)))));
  CHECK(rec.total_regret == doctest::Approx(rec.steps.back().regret_cum));
}

TEST_CASE("design-learning batches: count, boundaries, and the G-optimal first batch") {
  const long t_horizon = 1024;
  Environment env = stochastic_env(UniformSphereSpec{}, 3, 4, t_horizon, 21, 22, 23);
  LearnerOptions opts;
  opts.block_multiplier = 0.5;
  Recorder probe;
  LearnerRecord rec = run_batch_linucb_dg(env, t_horizon, 0.1, 77, opts, &probe);

  const int m = int(std::ceil(std::log2(std::log2(double(t_horizon))))) + 1;
  CHECK(rec.batches_used == m);
  CHECK(rec.switches == m);
  for (const auto& [batch, fps] : probe.fingerprints_by_batch) CHECK(fps.size() == 1);

  // Batch 1 samples from the G-optimal design of the survived (= full) set.
  PolicyEngine engine;
  std::vector<long> grid = dg_batch_grid(t_horizon);
  for (long i = 0; i < grid[0]; ++i) {
    const ContextSet& x = probe.contexts[size_t(i)];
    REQUIRE(probe.survived[size_t(i)].size() == size_t(x.size()));
    Design expect = engine.g_optimal_for(x);
    CHECK((probe.dists[size_t(i)].weights - expect.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sup linucb: giant C keeps only the initial snapshots") {
  Environment env = stochastic_env(UniformSphereSpec{}, 4, 3, 64, 31, 32, 33);
  LearnerRecord rec = run_sup_linucb(env, 64, 0.1, 1e10, 5);
  CHECK(rec.switches == long(std::ceil(std::log2(4.0))) + 1);
  CHECK(rec.batches_used == 1);
}

TEST_CASE("sup linucb: switch count respects the determinant telescoping bound") {
  const long t_horizon = 4000;
  const double c_factor = 2.0;
  const int d = 4;
  Environment env = stochastic_env(UniformSphereSpec{}, d, 6, t_horizon, 41, 42, 43);
  LearnerRecord rec = run_sup_linucb(env, t_horizon, 0.05, c_factor, 13);

  double per_layer =
      std::ceil(d * std::log(1.0 + double(t_horizon) / d) / std::log(c_factor) + 1.0);
  double bound = (std::ceil(std::log2(double(d))) + 1.0) * per_layer;
  CHECK(double(rec.switches) <= bound);
  CHECK(rec.steps.size() == size_t(t_horizon));

  double cum = 0.0;
  for (const StepRecord& s : rec.steps) {
    CHECK(s.regret_step >= 0.0);
    CHECK(s.regret_step <= 2.0);
    cum += s.regret_step;
  }
  CHECK(rec.total_regret == doctest::Approx(cum));
}

TEST_CASE("sup linucb retains the best arm under zero noise") {
  const long t_horizon = 2048;
  Environment env = two_arm_gap_env(t_horizon);
  Recorder probe;
  run_sup_linucb(env, t_horizon, 0.1, 2.0, 3, {}, &probe);
  for (size_t i = 0; i < probe.survived.size(); ++i) {
    const auto& surv = probe.survived[i];
    CHECK(std::find(surv.begin(), surv.end(), 0) != surv.end());
  }
}

TEST_CASE("sup linucb paired sanity bound against the G-optimal batch learner") {
  const long t_horizon = 20000;
  const int n_seeds = 5;
  double sup = 0.0, kw = 0.0;
  for (int i = 0; i < n_seeds; ++i) {
    std::uint64_t seed = 300 + std::uint64_t(i);
    Environment env = stochastic_env(UniformSphereSpec{}, 5, 2, t_horizon, seed, seed, seed);
    LearnerOptions opts;
    opts.alpha_scale = 0.25;
    sup += run_sup_linucb(env, t_horizon, 0.05, 2.0, seed, opts).total_regret;
    kw += run_batch_elimination(env, t_horizon, 0.05, SamplerMode::GOptimal, seed, opts)
              .total_regret;
  }
  CHECK(sup / n_seeds <= 3.0 * kw / n_seeds);
}

TEST_CASE("learner preconditions") {
  Environment env = stochastic_env(UniformSphereSpec{}, 3, 4, 100, 1, 2, 3);
  CHECK_THROWS_AS(run_batch_elimination(env, 3, 0.1, SamplerMode::Uniform, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_batch_linucb_dg(env, 15, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(run_sup_linucb(env, 50, 0.1, 1.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(run_batch_elimination(env, 200, 0.1, SamplerMode::Uniform, 1),
                  EnvironmentExhaustedError);
}
