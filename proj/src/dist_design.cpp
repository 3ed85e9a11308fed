#include "adaptivity/dist_design.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>

namespace adaptivity {

namespace {

double log2_safe(double x) { return std::log2(std::max(x, 1.0)); }

long design_block_count(int d, double block_multiplier) {
  double raw = std::ceil(block_multiplier * 2.0 * double(d) * double(d) * log2_safe(double(d)));
  double cap = double(d) * double(d) * double(d);
  return long(std::max(1.0, std::min(raw, cap)));
}

Eigen::VectorXd softmax_scores_to_weights(const Eigen::VectorXd& scores, double alpha) {
  double top = scores.maxCoeff();
  if (top <= 0.0) {
    return Eigen::VectorXd::Constant(scores.size(), 1.0 / double(scores.size()));
  }
  Eigen::VectorXd w(scores.size());
  for (int i = 0; i < scores.size(); ++i) {
    double s = std::max(scores(i), 1e-300);
    w(i) = std::exp(alpha * (std::log(s) - std::log(top)));
  }
  return w / w.sum();
}

}  // namespace

void MixedDesignParams::validate(double lambda) const {
  if (components.empty()) throw EmptyOutputError("MixedDesignParams: no components");
  const int d = components.front().second.dim();
  double total = 0.0;
  const double count_bound = std::max(1.0, 4.0 * double(d) * log2_safe(double(d)));
  if (double(count()) > count_bound + 1e-9) {
    throw std::logic_error("MixedDesignParams: component count " + std::to_string(count()) +
                           " exceeds 4 d log2 d = " + std::to_string(count_bound));
  }
  for (const auto& [p, m] : components) {
    total += p;
    if (p < 1.0 / (double(d) * double(d) * double(d)) - 1e-12) {
      throw std::logic_error("MixedDesignParams: weight " + std::to_string(p) +
                             " below 1/d^3");
    }
    auto [lo, hi] = eigen_bounds(m);
    if (lo < 1.0 / double(d) - 1e-8 || hi > 1.0 / lambda + 1e-8) {
      throw std::logic_error("MixedDesignParams: matrix eigenvalues [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "] outside [1/d, 1/lambda]");
    }
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw std::logic_error("MixedDesignParams: weights sum to " + std::to_string(total));
  }
}

MixedDesignParams build_mixed_design(std::span<const ContextSet> s, double lambda,
                                     DesignFlavor flavor, int k_max, double block_multiplier,
                                     PolicyEngine& engine, MixedDesignDiag* diag) {
  if (s.empty()) throw std::invalid_argument("build_mixed_design: empty sample list");
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("build_mixed_design: lambda must lie in (0,1)");
  }
  const int d = s[0].dim();
  const long gamma = long(s.size());
  const long n_blocks = design_block_count(d, block_multiplier);
  const double horizon = double(n_blocks) * double(gamma);  // N * Gamma
  const double alpha = std::log(std::max(1, k_max));

  if (double(gamma) <= 1.0 / lambda) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::fprintf(stderr,
                   "adaptivity: build_mixed_design: sample count %ld <= 1/lambda = %.3g; "
                   "stage discarding may be aggressive (warning printed once)\n",
                   gamma, 1.0 / lambda);
    }
  }

  // U_0 = lambda N Gamma I + (N/2) sum_i Q_{X_i}(pi^G)
  Eigen::MatrixXd u0 = lambda * horizon * Eigen::MatrixXd::Identity(d, d);
  for (const ContextSet& x : s) {
    u0.noalias() += (double(n_blocks) / 2.0) * engine.g_optimal_for(x).info_matrix(x);
  }

  Eigen::MatrixXd chol = detail::chol_factor_raw(u0, 0.0);
  double log_det_u = detail::log_det_chol(chol);
  const double log_det_u0 = log_det_u;

  struct Stage {
    Eigen::MatrixXd chol_w;  // factor of the delayed matrix W_i
    long length = 0;
  };
  std::vector<Stage> stages;
  stages.push_back({chol, 0});
  double log_det_w = log_det_u;

  const long total_steps = n_blocks * gamma;
  const double ln2 = std::log(2.0);
  for (long t = 0; t < total_steps; ++t) {
    const ContextSet& x = s[size_t(t % gamma)];
    Stage& cur = stages.back();
    cur.length += 1;

    const int k = x.size();
    Eigen::VectorXd scores(k);
    for (int i = 0; i < k; ++i) {
      scores(i) = detail::quad_form_chol(cur.chol_w, x.vector(i));
    }

    if (flavor == DesignFlavor::Argmax) {
      int arg = 0;
      double best = scores(0);
      for (int i = 1; i < k; ++i) {
        if (scores(i) > best) {
          best = scores(i);
          arg = i;
        }
      }
      detail::chol_rank_one_update(chol, x.vector(arg));
    } else {
      Eigen::VectorXd w = softmax_scores_to_weights(scores, alpha);
      for (int i = 0; i < k; ++i) {
        if (w(i) > 0.0) detail::chol_rank_one_update(chol, std::sqrt(w(i)) * x.vector(i));
      }
    }
    log_det_u = detail::log_det_chol(chol);
    if (diag) diag->log_det_steps.push_back(log_det_u);

    if (log_det_u > ln2 + log_det_w) {
      stages.push_back({chol, 0});
      log_det_w = log_det_u;
    }
  }

  if (diag) {
    diag->stages_total = int(stages.size());
    diag->log_det_u0 = log_det_u0;
    diag->log_det_final = log_det_u;
    diag->stage_lengths.clear();
    for (const Stage& st : stages) diag->stage_lengths.push_back(st.length);
  }

  long surviving = 0;
  for (const Stage& st : stages) {
    if (st.length >= gamma) surviving += st.length;
  }
  if (surviving == 0) {
    throw EmptyOutputError("build_mixed_design: every stage shorter than the sample count");
  }

  MixedDesignParams params;
  params.flavor = flavor;
  params.k_max = k_max;
  for (const Stage& st : stages) {
    if (st.length < gamma) continue;
    // M_i = N Gamma W_i^{-1}, recovered from the stage factor.
    Eigen::MatrixXd inv = st.chol_w.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(d, d));
    Eigen::MatrixXd w_inv = st.chol_w.transpose().triangularView<Eigen::Upper>().solve(inv);
    params.components.emplace_back(double(st.length) / double(surviving),
                                   PsdMatrix(horizon * 0.5 * (w_inv + w_inv.transpose().eval())));
  }
  params.validate(lambda);
  return params;
}

SamplePolicy assemble_policy(const MixedDesignParams& params) {
  const double alpha = std::log(std::max(1, params.k_max));
  std::vector<std::pair<double, SamplePolicy>> mix;
  mix.reserve(params.components.size() + 1);
  mix.emplace_back(0.5, SamplePolicy::g_optimal());
  for (const auto& [p, m] : params.components) {
    if (params.flavor == DesignFlavor::Argmax) {
      mix.emplace_back(0.5 * p, SamplePolicy::argmax(m));
    } else {
      mix.emplace_back(0.5 * p, SamplePolicy::softmax(m, alpha));
    }
  }
  return SamplePolicy::mixed(std::move(mix));
}

CoreResult core_identification(std::span<const ContextSet> s, double lambda, int c,
                               PolicyEngine& engine) {
  if (s.empty()) throw std::invalid_argument("core_identification: empty sample list");
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("core_identification: lambda must lie in (0,1)");
  }
  if (c < 1) throw std::invalid_argument("core_identification: c must be positive");

  const int d = s[0].dim();
  const long gamma = long(s.size());
  const double threshold = std::pow(double(d), double(c));
  const int iteration_cap = int(std::ceil(3.0 * double(d) * std::log2(2.0 / lambda)));

  // Per-sample G-optimal information matrices; the running sum over the
  // surviving set is updated by subtraction as sets get pruned.
  std::vector<Eigen::MatrixXd> infos;
  infos.reserve(s.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
  for (const ContextSet& x : s) {
    infos.push_back(engine.g_optimal_for(x).info_matrix(x));
    sum += infos.back();
  }

  std::vector<int> kept(s.size());
  for (size_t i = 0; i < s.size(); ++i) kept[i] = int(i);

  CoreResult result;
  for (int iter = 1;; ++iter) {
    if (iter > iteration_cap) {
      throw IterationCapError("core_identification: exceeded " +
                              std::to_string(iteration_cap) + " iterations");
    }
    // J_xi built with the FULL-gamma normalizer, per the pruning rule.
    Eigen::MatrixXd mean = sum / double(gamma);
    Eigen::MatrixXd chol = detail::chol_factor_raw(0.5 * (mean + mean.transpose().eval()), lambda);

    std::vector<double> max_quads(kept.size());
    double worst = 0.0;
    for (size_t j = 0; j < kept.size(); ++j) {
      const ContextSet& x = s[size_t(kept[j])];
      double m = 0.0;
      for (int i = 0; i < x.size(); ++i) {
        m = std::max(m, detail::quad_form_chol(chol, x.vector(i)));
      }
      max_quads[j] = m;
      worst = std::max(worst, m);
    }

    if (worst <= threshold) {
      result.kept_indices = kept;
      result.iterations = iter;
      return result;
    }

    std::vector<int> next;
    next.reserve(kept.size());
    long pruned = 0;
    for (size_t j = 0; j < kept.size(); ++j) {
      if (max_quads[j] <= 0.5 * threshold) {
        next.push_back(kept[j]);
      } else {
        sum -= infos[size_t(kept[j])];
        ++pruned;
      }
    }
    result.pruned_per_iteration.push_back(pruned);
    kept = std::move(next);
    if (kept.empty()) {
      result.kept_indices = kept;
      result.iterations = iter + 1;  // the empty set passes the next check vacuously
      return result;
    }
  }
}

SamplePolicy core_learning(std::span<const ContextSet> s, double lambda, int k_max,
                           PolicyEngine& engine, double block_multiplier) {
  if (s.empty()) throw std::invalid_argument("core_learning: empty sample list");
  const int d = s[0].dim();
  if (!(lambda > std::exp(-double(d)) && lambda < 1.0)) {
    throw std::invalid_argument("core_learning: lambda must lie in (exp(-d), 1)");
  }
  CoreResult core = core_identification(s, lambda, /*c=*/6, engine);
  if (core.kept_indices.empty()) {
    throw EmptyOutputError("core_learning: core identification kept nothing");
  }
  std::vector<ContextSet> kept;
  kept.reserve(core.kept_indices.size());
  for (int idx : core.kept_indices) kept.push_back(s[size_t(idx)]);
  MixedDesignParams params =
      build_mixed_design(kept, lambda, DesignFlavor::Softmax, k_max, block_multiplier, engine);
  return assemble_policy(params);
}

}  // namespace adaptivity
