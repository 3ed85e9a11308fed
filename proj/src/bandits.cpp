#include "adaptivity/bandits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adaptivity {

namespace {

void absorb(RidgeState& s, const Eigen::VectorXd& x, double reward) {
  s.lambda_mat.noalias() += x * x.transpose();
  s.xi.noalias() += reward * x;
  s.count += 1;
}

struct Fnv {
  std::uint64_t h = 14695981039346656037ull;
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void mat(const Eigen::MatrixXd& m) { bytes(m.data(), sizeof(double) * size_t(m.size())); }
  void vec(const Eigen::VectorXd& v) { bytes(v.data(), sizeof(double) * size_t(v.size())); }
};

void fingerprint_policy(Fnv& fp, const SamplePolicy& pi) {
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, UniformPolicy>) {
          fp.u64(1);
        } else if constexpr (std::is_same_v<T, GOptimalPolicy>) {
          fp.u64(2);
        } else if constexpr (std::is_same_v<T, ArgmaxPolicy>) {
          fp.u64(3);
          fp.mat(node.v.mat());
        } else if constexpr (std::is_same_v<T, SoftmaxPolicy>) {
          fp.u64(4);
          fp.f64(node.alpha);
          fp.mat(node.m.mat());
        } else {
          fp.u64(5);
          for (const auto& [w, sub] : node.components) {
            fp.f64(w);
            fingerprint_policy(fp, sub);
          }
        }
      },
      pi.node());
}

// ceil(T^e) with a snap to nearby integers so exact powers stay exact.
long ceil_power(long t_horizon, double exponent) {
  double v = std::pow(double(t_horizon), exponent);
  double r = std::round(v);
  if (std::abs(v - r) < 1e-6 * std::max(1.0, std::abs(v))) return long(r);
  return long(std::ceil(v));
}

std::vector<long> dedupe_grid(std::vector<long> grid, long t_horizon) {
  grid.back() = t_horizon;
  std::vector<long> out;
  for (long v : grid) {
    v = std::min(v, t_horizon);
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  out.back() = t_horizon;
  return out;
}

struct FrozenBatch {
  Eigen::VectorXd theta_hat;
  Eigen::MatrixXd chol;
};

std::vector<int> cascade_eliminate(const ContextSet& x, const std::vector<FrozenBatch>& past,
                                   double alpha) {
  auto survived = std::vector<int>(size_t(x.size()));
  std::iota(survived.begin(), survived.end(), 0);
  for (const FrozenBatch& fb : past) {
    Eigen::VectorXd r_hat(long(survived.size())), omega(long(survived.size()));
    for (size_t j = 0; j < survived.size(); ++j) {
      Eigen::VectorXd v = x.vector(survived[j]);
      r_hat(long(j)) = v.dot(fb.theta_hat);
      omega(long(j)) = alpha * std::sqrt(detail::quad_form_chol(fb.chol, v));
    }
    survived = eliminate(survived, r_hat, omega);
  }
  return survived;
}

Design point_mass(int size, int index) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(size);
  w(index) = 1.0;
  return Design(std::move(w));
}

}  // namespace

std::uint64_t policy_fingerprint(const SamplePolicy& pi) {
  Fnv fp;
  fingerprint_policy(fp, pi);
  return fp.h;
}

RidgeState make_ridge_state(int d, double lambda_reg) {
  if (lambda_reg <= 0.0) throw std::invalid_argument("make_ridge_state: lambda_reg must be > 0");
  return {lambda_reg * Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d), lambda_reg, 0};
}

RidgeState ridge_update(const RidgeState& s, const Eigen::VectorXd& x, double reward) {
  if (x.size() != s.xi.size()) throw std::invalid_argument("ridge_update: dimension mismatch");
  RidgeState out = s;
  absorb(out, x, reward);
  return out;
}

Eigen::VectorXd ridge_estimate(const RidgeState& s) {
  Eigen::MatrixXd chol = detail::chol_factor_raw(s.lambda_mat, 0.0);
  Eigen::VectorXd y = chol.triangularView<Eigen::Lower>().solve(s.xi);
  return chol.transpose().triangularView<Eigen::Upper>().solve(y);
}

double confidence_width(const RidgeState& s, const Eigen::VectorXd& x, double alpha) {
  Eigen::MatrixXd chol = detail::chol_factor_raw(s.lambda_mat, 0.0);
  return alpha * std::sqrt(detail::quad_form_chol(chol, x));
}

std::vector<int> eliminate(const std::vector<int>& survivors, const Eigen::VectorXd& r_hat,
                           const Eigen::VectorXd& omega) {
  if (survivors.empty()) throw std::invalid_argument("eliminate: survivors empty");
  double best_lower = -std::numeric_limits<double>::infinity();
  for (long j = 0; j < long(survivors.size()); ++j) {
    best_lower = std::max(best_lower, r_hat(j) - omega(j));
  }
  std::vector<int> out;
  out.reserve(survivors.size());
  for (long j = 0; j < long(survivors.size()); ++j) {
    if (r_hat(j) + omega(j) >= best_lower) out.push_back(survivors[size_t(j)]);
  }
  return out;
}

std::vector<long> batch_grid(long t_horizon) {
  if (t_horizon < 4) throw std::invalid_argument("batch_grid: T >= 4 required");
  int m = int(std::ceil(std::log2(std::log2(double(t_horizon)))));
  m = std::max(m, 1);
  std::vector<long> grid;
  for (int i = 1; i < m; ++i) {
    grid.push_back(ceil_power(t_horizon, 1.0 - std::pow(2.0, -double(i))));
  }
  grid.push_back(t_horizon);
  return dedupe_grid(std::move(grid), t_horizon);
}

std::vector<long> dg_batch_grid(long t_horizon) {
  if (t_horizon < 16) throw std::invalid_argument("dg_batch_grid: T >= 16 required");
  int m = int(std::ceil(std::log2(std::log2(double(t_horizon))))) + 1;
  std::vector<long> grid;
  grid.push_back(ceil_power(t_horizon, 0.5));
  grid.push_back(long(std::ceil(2.0 * std::sqrt(double(t_horizon)))));
  for (int i = 3; i < m; ++i) {
    grid.push_back(ceil_power(t_horizon, 1.0 - std::pow(2.0, -double(i - 1))));
  }
  grid.push_back(t_horizon);
  return dedupe_grid(std::move(grid), t_horizon);
}

LearnerRecord run_batch_elimination(const Environment& env, long t_horizon, double delta,
                                    SamplerMode mode, std::uint64_t learner_seed,
                                    const LearnerOptions& opts, StepProbe* probe) {
  if (t_horizon < 4) throw std::invalid_argument("run_batch_elimination: T >= 4 required");
  if (env.horizon() < t_horizon) {
    throw EnvironmentExhaustedError("run_batch_elimination: environment shorter than T");
  }
  const int d = env.d();
  const int k_arms = env.max_arms();
  const double alpha =
      opts.alpha_scale * 10.0 * std::sqrt(std::log(2.0 * d * k_arms * double(t_horizon) / delta));
  const double lambda_reg = 16.0 * std::log(2.0 * d * double(t_horizon) / delta);
  const std::vector<long> grid = batch_grid(t_horizon);

  PolicyEngine engine(opts.design_params);
  CounterRng noise_rng(env.noise_seed(), streams::kNoise);
  CounterRng learner_rng(learner_seed, streams::kLearner);

  std::vector<FrozenBatch> past;
  LearnerRecord rec;
  rec.steps.reserve(size_t(t_horizon));
  double cum = 0.0;
  long switches = 0;
  long t = 1;

  for (size_t k = 1; k <= grid.size(); ++k) {
    ++switches;
    Fnv fp;
    fp.u64(0xBA7C);
    fp.u64(std::uint64_t(k));
    fp.u64(mode == SamplerMode::Uniform ? 1 : 2);
    for (const FrozenBatch& fb : past) {
      fp.vec(fb.theta_hat);
      fp.mat(fb.chol);
    }
    const std::uint64_t fpv = fp.h;

    RidgeState ridge = make_ridge_state(d, lambda_reg);
    for (; t <= grid[k - 1]; ++t) {
      ContextSet x = env.contexts(t);
      std::vector<int> survived = cascade_eliminate(x, past, alpha);

      int arm;
      Design dist = point_mass(int(survived.size()), 0);
      if (survived.size() == 1) {
        arm = survived[0];
      } else {
        ContextSet sub = x.subset(survived);
        dist = (mode == SamplerMode::Uniform)
                   ? Design(Eigen::VectorXd::Constant(sub.size(), 1.0 / double(sub.size())))
                   : engine.g_optimal_for(sub);
        arm = survived[size_t(draw_from_design(dist, learner_rng))];
      }

      Environment::Outcome out = env.step(t, arm, noise_rng);
      absorb(ridge, x.vector(arm), out.reward);
      cum += out.regret;
      rec.steps.push_back({t, arm, out.regret, cum, int(k), switches});
      if (probe) probe->on_step(t, int(k), x, survived, dist, arm, fpv);
    }
    past.push_back({ridge_estimate(ridge), detail::chol_factor_raw(ridge.lambda_mat, 0.0)});
  }

  rec.batches_used = int(grid.size());
  rec.switches = switches;
  rec.total_regret = cum;
  return rec;
}

LearnerRecord run_batch_linucb_dg(const Environment& env, long t_horizon, double delta,
                                  std::uint64_t learner_seed, const LearnerOptions& opts,
                                  StepProbe* probe) {
  if (t_horizon < 16) throw std::invalid_argument("run_batch_linucb_dg: T >= 16 required");
  if (env.horizon() < t_horizon) {
    throw EnvironmentExhaustedError("run_batch_linucb_dg: environment shorter than T");
  }
  const int d = env.d();
  const int k_arms = env.max_arms();
  const double alpha =
      opts.alpha_scale * 10.0 * std::sqrt(std::log(2.0 * d * k_arms * double(t_horizon) / delta));
  const double lambda_reg = 32.0 * std::log(2.0 * d * double(t_horizon) / delta);
  // The design-learning regularizer is 1/T whenever T <= e^d; past that,
  // core learning requires lambda > e^{-d}, so clamp up.
  const double lambda_design =
      std::min(0.5, std::max(1.0 / double(t_horizon), std::exp(-double(d)) * (1.0 + 1e-9)));
  const std::vector<long> grid = dg_batch_grid(t_horizon);

  PolicyEngine engine(opts.design_params);
  CounterRng noise_rng(env.noise_seed(), streams::kNoise);
  CounterRng learner_rng(learner_seed, streams::kLearner);

  std::vector<FrozenBatch> past;
  SamplePolicy sample_policy = SamplePolicy::g_optimal();  // pi_0
  LearnerRecord rec;
  rec.steps.reserve(size_t(t_horizon));
  double cum = 0.0;
  long switches = 0;
  long t = 1;

  for (size_t k = 1; k <= grid.size(); ++k) {
    ++switches;
    Fnv fp;
    fp.u64(0xD6);
    fp.u64(std::uint64_t(k));
    for (const FrozenBatch& fb : past) {
      fp.vec(fb.theta_hat);
      fp.mat(fb.chol);
    }
    fingerprint_policy(fp, sample_policy);
    const std::uint64_t fpv = fp.h;

    RidgeState ridge = make_ridge_state(d, lambda_reg);  // estimation half only
    std::vector<ContextSet> policy_half;                 // survived sets, odd offsets
    const long lo = t;
    for (; t <= grid[k - 1]; ++t) {
      ContextSet x = env.contexts(t);
      std::vector<int> survived = cascade_eliminate(x, past, alpha);

      int arm;
      Design dist = point_mass(int(survived.size()), 0);
      ContextSet sub = x.subset(survived);
      if (survived.size() == 1) {
        arm = survived[0];
      } else {
        dist = engine.policy_distribution(sample_policy, sub);
        arm = survived[size_t(draw_from_design(dist, learner_rng))];
      }

      Environment::Outcome out = env.step(t, arm, noise_rng);
      if ((t - lo) % 2 == 0) {
        absorb(ridge, x.vector(arm), out.reward);  // estimation half (even offsets)
      } else {
        policy_half.push_back(std::move(sub));
      }
      cum += out.regret;
      rec.steps.push_back({t, arm, out.regret, cum, int(k), switches});
      if (probe) probe->on_step(t, int(k), x, survived, dist, arm, fpv);
    }

    FrozenBatch fb{ridge_estimate(ridge), detail::chol_factor_raw(ridge.lambda_mat, 0.0)};
    if (k < grid.size()) {
      // Re-eliminate the held-out half with the fresh estimate, then learn
      // the next batch's sample policy from the surviving sets.
      std::vector<ContextSet> learn_sets;
      learn_sets.reserve(policy_half.size());
      for (const ContextSet& s : policy_half) {
        auto idx = std::vector<int>(size_t(s.size()));
        std::iota(idx.begin(), idx.end(), 0);
        Eigen::VectorXd r_hat(s.size()), omega(s.size());
        for (int j = 0; j < s.size(); ++j) {
          Eigen::VectorXd v = s.vector(j);
          r_hat(j) = v.dot(fb.theta_hat);
          omega(j) = alpha * std::sqrt(detail::quad_form_chol(fb.chol, v));
        }
        std::vector<int> kept = eliminate(idx, r_hat, omega);
        learn_sets.push_back(s.subset(kept));
      }
      sample_policy =
          core_learning(learn_sets, lambda_design, k_arms, engine, opts.block_multiplier);
      past.push_back(std::move(fb));
    }
  }

  rec.batches_used = int(grid.size());
  rec.switches = switches;
  rec.total_regret = cum;
  return rec;
}

LearnerRecord run_sup_linucb(const Environment& env, long t_horizon, double delta, double c_factor,
                             std::uint64_t learner_seed, const LearnerOptions& opts,
                             StepProbe* probe) {
  if (t_horizon < env.d()) throw std::invalid_argument("run_sup_linucb: T >= d required");
  if (c_factor < 2.0) throw std::invalid_argument("run_sup_linucb: C >= 2 required");
  if (env.horizon() < t_horizon) {
    throw EnvironmentExhaustedError("run_sup_linucb: environment shorter than T");
  }
  (void)learner_seed;  // arm choice is deterministic in this learner
  const int d = env.d();
  const int k_arms = env.max_arms();
  const int kappa0 = std::max(0, int(std::ceil(std::log2(double(d)))));
  const double alpha0 =
      opts.alpha_scale * 2.0 * std::sqrt(d * std::log(2.0 * double(t_horizon) / delta));
  const double alpha_up =
      opts.alpha_scale * 10.0 * std::sqrt(std::log(2.0 * d * k_arms * double(t_horizon) / delta));
  const double ln_c = std::log(c_factor);

  struct Layer {
    Eigen::MatrixXd chol_cur;   // factor of Lambda_kappa (starts at I)
    Eigen::VectorXd xi_cur;
    double log_det_cur = 0.0;
    Eigen::MatrixXd chol_snap;  // delayed snapshot used for estimates
    Eigen::VectorXd theta_hat;
    double log_det_snap = 0.0;
    double alpha = 1.0;
    double accuracy = 0.0;      // varpi_kappa
  };
  std::vector<Layer> layers(size_t(kappa0) + 1);
  double varpi = std::pow(double(d), 1.5) / std::sqrt(double(t_horizon));
  long switches = 0;
  for (int kap = 0; kap <= kappa0; ++kap) {
    Layer& l = layers[size_t(kap)];
    l.chol_cur = Eigen::MatrixXd::Identity(d, d);
    l.xi_cur = Eigen::VectorXd::Zero(d);
    l.chol_snap = l.chol_cur;
    l.theta_hat = Eigen::VectorXd::Zero(d);
    l.alpha = (kap == 0) ? alpha0 : alpha_up;
    l.accuracy = varpi;
    varpi /= 2.0;
    ++switches;  // each initial snapshot counts as one policy switch
  }

  auto tuple_fingerprint = [&]() {
    Fnv fp;
    fp.u64(0x50B);
    for (const Layer& l : layers) {
      fp.mat(l.chol_snap);
      fp.vec(l.theta_hat);
    }
    return fp.h;
  };
  std::uint64_t fpv = tuple_fingerprint();

  CounterRng noise_rng(env.noise_seed(), streams::kNoise);
  LearnerRecord rec;
  rec.steps.reserve(size_t(t_horizon));
  double cum = 0.0;

  for (long t = 1; t <= t_horizon; ++t) {
    ContextSet x = env.contexts(t);
    const int k = x.size();

    auto width = [&](const Layer& l, int i) {
      return l.alpha * std::sqrt(detail::quad_form_chol(l.chol_snap, x.vector(i)));
    };
    auto estimate = [&](const Layer& l, int i) { return x.vector(i).dot(l.theta_hat); };

    // Layer-0 UCB elimination over all arms.
    auto active = std::vector<int>(size_t(k));
    std::iota(active.begin(), active.end(), 0);
    {
      Eigen::VectorXd r_hat(k), omega(k);
      for (int i = 0; i < k; ++i) {
        r_hat(i) = estimate(layers[0], i);
        omega(i) = width(layers[0], i);
      }
      active = eliminate(active, r_hat, omega);
    }

    int arm = -1;
    int kappa_t = -1;
    for (int kap = 0; kap <= kappa0; ++kap) {
      const Layer& l = layers[size_t(kap)];
      if (kap == kappa0) {
        arm = active.front();
        kappa_t = kap;
        break;
      }
      double widest = -1.0;
      int widest_arm = active.front();
      for (int i : active) {
        double w = width(l, i);
        if (w > widest) {
          widest = w;
          widest_arm = i;
        }
      }
      if (widest <= l.accuracy) {
        // All survivors are accurate at this layer; narrow by estimate.
        double best = -std::numeric_limits<double>::infinity();
        for (int i : active) best = std::max(best, estimate(l, i));
        std::vector<int> next;
        for (int i : active) {
          if (estimate(l, i) >= best - 2.0 * l.accuracy) next.push_back(i);
        }
        active = std::move(next);
      } else {
        arm = widest_arm;  // explore the widest arm at this layer
        kappa_t = kap;
        break;
      }
    }

    Environment::Outcome out = env.step(t, arm, noise_rng);
    Layer& lt = layers[size_t(kappa_t)];
    detail::chol_rank_one_update(lt.chol_cur, x.vector(arm));
    lt.xi_cur.noalias() += out.reward * x.vector(arm);
    lt.log_det_cur = detail::log_det_chol(lt.chol_cur);

    bool snapped = false;
    for (Layer& l : layers) {
      if (l.log_det_cur >= ln_c + l.log_det_snap) {
        l.chol_snap = l.chol_cur;
        l.log_det_snap = l.log_det_cur;
        Eigen::VectorXd y = l.chol_snap.triangularView<Eigen::Lower>().solve(l.xi_cur);
        l.theta_hat = l.chol_snap.transpose().triangularView<Eigen::Upper>().solve(y);
        ++switches;
        snapped = true;
      }
    }
    if (snapped) fpv = tuple_fingerprint();

    cum += out.regret;
    rec.steps.push_back({t, arm, out.regret, cum, 1, switches});
    if (probe) {
      int local = 0;
      for (size_t j = 0; j < active.size(); ++j) {
        if (active[j] == arm) local = int(j);
      }
      probe->on_step(t, 1, x, active, point_mass(int(active.size()), local), arm, fpv);
    }
  }

  rec.batches_used = 1;
  rec.switches = switches;
  rec.total_regret = cum;
  return rec;
}

}  // namespace adaptivity
