#include <doctest.h>

#include <cmath>

#include "adaptivity/dist_design.hpp"
#include "oracles.hpp"

using namespace adaptivity;

namespace {

ContextSet basis_set(int d) {
  return ContextSet(Eigen::MatrixXd(Eigen::MatrixXd::Identity(d, d)));
}

std::vector<ContextSet> counterexample_sets(int d, double gamma_param, long copies) {
  double eps = std::sqrt(double(d) / gamma_param);
  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(d, 0);
  std::vector<ContextSet> sets;
  sets.emplace_back(ContextSet{e1});
  for (int i = 1; i < d; ++i) {
    Eigen::VectorXd ei = Eigen::VectorXd::Unit(d, i);
    Eigen::VectorXd tilted = std::sqrt(1.0 - eps * eps) * ei + eps * e1;
    for (long c = 0; c < copies; ++c) sets.emplace_back(ContextSet{tilted, ei});
  }
  return sets;
}

}  // namespace

TEST_CASE("build_mixed_design on a single basis set") {
  const int d = 4;
  PolicyEngine engine;
  std::vector<ContextSet> s{basis_set(d)};
  MixedDesignParams params = build_mixed_design(s, 0.1, DesignFlavor::Argmax, d, 1.0, engine);

  CHECK(params.count() <= int(4.0 * d * std::log2(double(d))));
  double total = 0.0;
  for (const auto& [p, m] : params.components) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  for (const auto& [p, m] : params.components) {
    auto [lo, hi] = eigen_bounds(m);
    CHECK(lo >= 1.0 / d - 1e-8);
    CHECK(hi <= 1.0 / 0.1 + 1e-8);
    CHECK(p >= 1.0 / (d * d * d) - 1e-12);
  }
}

TEST_CASE("build_mixed_design trajectory diagnostics") {
  const int d = 3;
  CounterRng rng(41, 0);
  PolicyEngine engine;
  std::vector<ContextSet> s;
  for (int i = 0; i < 8; ++i) s.push_back(oracle::random_sphere_set(d, 4, rng));

  MixedDesignDiag diag;
  build_mixed_design(s, 0.2, DesignFlavor::Softmax, 4, 1.0, engine, &diag);

  // det U_t never decreases along the trajectory.
  for (size_t i = 1; i < diag.log_det_steps.size(); ++i) {
    CHECK(diag.log_det_steps[i] >= diag.log_det_steps[i - 1] - 1e-12);
  }
  // Stage count bounded by the determinant growth, then by 4 d log2 d + 1.
  double growth = (diag.log_det_final - diag.log_det_u0) / std::log(2.0);
  CHECK(double(diag.stages_total) <= growth + 1.0 + 1e-9);
  CHECK(double(diag.stages_total) <= 4.0 * d * std::log2(double(d)) + 1.0);
  long total = 0;
  for (long len : diag.stage_lengths) total += len;
  CHECK(total == long(diag.log_det_steps.size()));
}

TEST_CASE("build_mixed_design is deterministic bit for bit") {
  const int d = 3;
  CounterRng rng(42, 0);
  PolicyEngine engine_a, engine_b;
  std::vector<ContextSet> s;
  for (int i = 0; i < 6; ++i) s.push_back(oracle::random_sphere_set(d, 5, rng));

  MixedDesignParams a = build_mixed_design(s, 0.1, DesignFlavor::Softmax, 5, 1.0, engine_a);
  MixedDesignParams b = build_mixed_design(s, 0.1, DesignFlavor::Softmax, 5, 1.0, engine_b);
  REQUIRE(a.count() == b.count());
  for (int i = 0; i < a.count(); ++i) {
    CHECK(a.components[size_t(i)].first == b.components[size_t(i)].first);
    CHECK((a.components[size_t(i)].second.mat() - b.components[size_t(i)].second.mat())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("build_mixed_design input validation") {
  PolicyEngine engine;
  std::vector<ContextSet> s{basis_set(3)};
  CHECK_THROWS_AS(build_mixed_design({}, 0.1, DesignFlavor::Argmax, 3, 1.0, engine),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_mixed_design(s, 1.5, DesignFlavor::Argmax, 3, 1.0, engine),
                  std::invalid_argument);
}

TEST_CASE("mixed design variation stays near the d log d scale") {
  const int d = 6;
  const double lambda = 0.05;
  CounterRng rng(43, 0);
  PolicyEngine engine;
  std::vector<ContextSet> s;
  for (int i = 0; i < 50; ++i) s.push_back(oracle::random_sphere_set(d, 8, rng));

  MixedDesignParams params = build_mixed_design(s, lambda, DesignFlavor::Softmax, 8, 1.0, engine);
  SamplePolicy pi = assemble_policy(params);
  double val = engine.empirical_variation(s, pi, lambda);
  CHECK(val <= 30.0 * d * std::log2(double(d)));
}

TEST_CASE("assemble_policy structure") {
  MixedDesignParams one;
  one.flavor = DesignFlavor::Argmax;
  one.k_max = 3;
  one.components.emplace_back(1.0, PsdMatrix::identity(2));
  SamplePolicy pa = assemble_policy(one);
  const auto& mix = std::get<MixedPolicy>(pa.node());
  REQUIRE(mix.components.size() == 2);
  CHECK(mix.components[0].first == doctest::Approx(0.5));
  CHECK(std::holds_alternative<GOptimalPolicy>(mix.components[0].second.node()));
  CHECK(mix.components[1].first == doctest::Approx(0.5));
  CHECK(std::holds_alternative<ArgmaxPolicy>(mix.components[1].second.node()));

  MixedDesignParams two;
  two.flavor = DesignFlavor::Softmax;
  two.k_max = 4;
  two.components.emplace_back(0.5, PsdMatrix::identity(2));
  two.components.emplace_back(0.5, PsdMatrix::identity(2));
  SamplePolicy pb = assemble_policy(two);
  const auto& mix2 = std::get<MixedPolicy>(pb.node());
  REQUIRE(mix2.components.size() == 3);
  CHECK(mix2.components[0].first == doctest::Approx(0.5));
  CHECK(mix2.components[1].first == doctest::Approx(0.25));
  CHECK(mix2.components[2].first == doctest::Approx(0.25));
  const auto& soft = std::get<SoftmaxPolicy>(mix2.components[1].second.node());
  CHECK(soft.alpha == doctest::Approx(std::log(4.0)));
}

TEST_CASE("assembled policy distribution equals the explicit mixture") {
  const int d = 3;
  CounterRng rng(44, 0);
  PolicyEngine engine;
  std::vector<ContextSet> s;
  for (int i = 0; i < 6; ++i) s.push_back(oracle::random_sphere_set(d, 4, rng));
  MixedDesignParams params = build_mixed_design(s, 0.1, DesignFlavor::Softmax, 4, 1.0, engine);
  SamplePolicy pi = assemble_policy(params);

  ContextSet x = oracle::random_sphere_set(d, 4, rng);
  Eigen::VectorXd expect = 0.5 * engine.policy_distribution(SamplePolicy::g_optimal(), x).weights;
  for (const auto& [p, m] : params.components) {
    SamplePolicy sub = SamplePolicy::softmax(m, std::log(double(params.k_max)));
    expect += 0.5 * p * engine.policy_distribution(sub, x).weights;
  }
  Design got = engine.policy_distribution(pi, x);
  CHECK((got.weights - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("core_identification keeps everything when directions are covered") {
  const int d = 3;
  PolicyEngine engine;
  std::vector<ContextSet> s(20, basis_set(d));
  CoreResult core = core_identification(s, 0.1, 6, engine);
  CHECK(core.kept_indices.size() == 20);
  CHECK(core.iterations == 1);
}

TEST_CASE("core_identification prunes the rare direction of the hard family") {
  const int d = 8;
  const int c = 2;
  const double lambda = 1e-6;
  PolicyEngine engine;
  std::vector<ContextSet> s = counterexample_sets(d, 281.0, 40);  // 281 sets, {e_1} once
  const double gamma = double(s.size());

  CoreResult core = core_identification(s, lambda, c, engine);
  // Index 0 is the singleton {e_1}; it must be pruned, everything else kept.
  CHECK(core.kept_indices.size() == s.size() - 1);
  for (int idx : core.kept_indices) CHECK(idx != 0);
  CHECK(core.iterations <= int(std::ceil(3.0 * d * std::log2(2.0 / lambda))));

  // Kept fraction respects the per-iteration Markov bound.
  double bound = 2.0 * std::pow(double(d), 2.0 - c) * double(core.iterations);
  CHECK(double(core.kept_indices.size()) / gamma >= 1.0 - bound);

  // Certificate re-checked verbatim with explicit inverses.
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
  for (int idx : core.kept_indices) {
    const ContextSet& x = s[size_t(idx)];
    sum += engine.g_optimal_for(x).info_matrix(x);
  }
  Eigen::MatrixXd j = sum / gamma + lambda * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd inv = oracle::gauss_jordan_inverse(j);
  double worst = 0.0;
  for (int idx : core.kept_indices) {
    const ContextSet& x = s[size_t(idx)];
    for (int i = 0; i < x.size(); ++i) {
      worst = std::max(worst, x.vector(i).dot(inv * x.vector(i)));
    }
  }
  CHECK(worst <= std::pow(double(d), double(c)));

  // Idempotence: re-running on the kept subset returns everything.
  std::vector<ContextSet> kept_sets;
  for (int idx : core.kept_indices) kept_sets.push_back(s[size_t(idx)]);
  CoreResult again = core_identification(kept_sets, lambda, c, engine);
  CHECK(again.kept_indices.size() == kept_sets.size());
  CHECK(again.iterations == 1);
}

TEST_CASE("core_identification kept fraction on random families") {
  CounterRng rng(45, 0);
  PolicyEngine engine;
  for (int rep = 0; rep < 5; ++rep) {
    int d = 3 + int(rng.below(3));
    std::vector<ContextSet> s;
    for (int i = 0; i < 30; ++i) {
      s.push_back(oracle::random_sphere_set(d, 1 + int(rng.below(5)), rng));
    }
    CoreResult core = core_identification(s, 1e-3, 6, engine);
    double bound = 2.0 * std::pow(double(d), 2.0 - 6.0) * double(core.iterations);
    CHECK(double(core.kept_indices.size()) / double(s.size()) >= 1.0 - bound);
  }
}

TEST_CASE("core_learning returns a usable mixed policy") {
  const int d = 4;
  PolicyEngine engine;
  std::vector<ContextSet> s(20, basis_set(d));
  SamplePolicy pi = core_learning(s, 0.1, d, engine);
  CHECK(std::holds_alternative<MixedPolicy>(pi.node()));

  double dev_pi = engine.empirical_deviation(s, pi, 0.1);
  double dev_unif = engine.empirical_deviation(s, SamplePolicy::uniform(), 0.1);
  CHECK(dev_pi <= dev_unif * 1.5);
}

TEST_CASE("core_learning enforces the lambda range") {
  const int d = 4;
  PolicyEngine engine;
  std::vector<ContextSet> s(5, basis_set(d));
  CHECK_THROWS_AS(core_learning(s, std::exp(-double(d)) / 2.0, d, engine), std::invalid_argument);
  CHECK_THROWS_AS(core_learning(s, 1.0, d, engine), std::invalid_argument);
}
