#include "adaptivity/optimal_design.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace adaptivity {

namespace {

constexpr double kNormSlack = 1e-12;
constexpr double kWeightTol = 1e-10;
constexpr double kScoreFloor = 1e-300;

}  // namespace

ContextSet::ContextSet(Eigen::MatrixXd vectors) : vectors_(std::move(vectors)) {
  if (vectors_.cols() < 1 || vectors_.rows() < 1) {
    throw std::invalid_argument("ContextSet: needs at least one vector");
  }
  for (int i = 0; i < vectors_.cols(); ++i) {
    double n = vectors_.col(i).norm();
    if (!(n <= 1.0 + kNormSlack)) {
      throw NormViolationError("ContextSet: vector norm " + std::to_string(n) + " exceeds 1");
    }
  }
}

ContextSet::ContextSet(std::initializer_list<Eigen::VectorXd> vectors)
    : ContextSet([&] {
        if (vectors.size() == 0) throw std::invalid_argument("ContextSet: empty");
        Eigen::MatrixXd m(vectors.begin()->size(), vectors.size());
        int j = 0;
        for (const auto& v : vectors) m.col(j++) = v;
        return m;
      }()) {}

ContextSet ContextSet::subset(std::span<const int> indices) const {
  Eigen::MatrixXd m(vectors_.rows(), indices.size());
  for (size_t j = 0; j < indices.size(); ++j) m.col(long(j)) = vectors_.col(indices[j]);
  return ContextSet(std::move(m));
}

std::string ContextSet::content_key() const {
  std::string key;
  key.resize(2 * sizeof(int) + sizeof(double) * size_t(vectors_.size()));
  int d = dim(), k = size();
  std::memcpy(key.data(), &d, sizeof(int));
  std::memcpy(key.data() + sizeof(int), &k, sizeof(int));
  std::memcpy(key.data() + 2 * sizeof(int), vectors_.data(), sizeof(double) * size_t(vectors_.size()));
  return key;
}

Design::Design(Eigen::VectorXd w) : weights(std::move(w)) {
  if (weights.size() < 1 || weights.minCoeff() < -kWeightTol) {
    throw std::invalid_argument("Design: nonnegative weights required");
  }
  if (std::abs(weights.sum() - 1.0) > kWeightTol) {
    throw std::invalid_argument("Design: weights must sum to 1, got " +
                                std::to_string(weights.sum()));
  }
}

Eigen::MatrixXd Design::info_matrix(const ContextSet& x) const {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(x.dim(), x.dim());
  for (int i = 0; i < x.size(); ++i) {
    if (weights(i) > 0.0) q.noalias() += weights(i) * x.vector(i) * x.vector(i).transpose();
  }
  return q;
}

SamplePolicy SamplePolicy::uniform() { return SamplePolicy(Node(UniformPolicy{})); }
SamplePolicy SamplePolicy::g_optimal() { return SamplePolicy(Node(GOptimalPolicy{})); }
SamplePolicy SamplePolicy::argmax(PsdMatrix v) { return SamplePolicy(Node(ArgmaxPolicy{std::move(v)})); }

SamplePolicy SamplePolicy::softmax(PsdMatrix m, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("SamplePolicy: softmax alpha must be >= 0");
  return SamplePolicy(Node(SoftmaxPolicy{std::move(m), alpha}));
}

SamplePolicy SamplePolicy::mixed(std::vector<std::pair<double, SamplePolicy>> components) {
  double total = 0.0;
  for (const auto& [w, p] : components) {
    if (w < -kWeightTol) throw std::invalid_argument("SamplePolicy: negative mixture weight");
    total += w;
  }
  if (components.empty() || std::abs(total - 1.0) > kWeightTol) {
    throw std::invalid_argument("SamplePolicy: mixture weights must sum to 1");
  }
  return SamplePolicy(Node(MixedPolicy{std::move(components)}));
}

Design g_optimal_design(const ContextSet& x, double jitter, double tol_factor, int max_iter) {
  const int d = x.dim();
  const int k = x.size();
  const double target = tol_factor * double(d);

  Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / double(k));
  double best = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < k; ++i) {
      if (w(i) > 0.0) info.noalias() += w(i) * x.vector(i) * x.vector(i).transpose();
    }
    Eigen::MatrixXd chol = detail::chol_factor_raw(info, jitter);
    int arg = 0;
    double g = -1.0;
    for (int i = 0; i < k; ++i) {
      double q = detail::quad_form_chol(chol, x.vector(i));
      if (q > g) {
        g = q;
        arg = i;
      }
    }
    best = std::min(best, g);
    if (g <= target) {
      return Design(w / w.sum());
    }
    // Exact line search for the max-variance vertex move.
    double step = (g / double(d) - 1.0) / (g - 1.0);
    step = std::clamp(step, 0.0, 1.0 - 1e-12);
    if (step <= 0.0) {
      // g <= d can only coexist with g > target when tol_factor < 1.
      return Design(w / w.sum());
    }
    w *= (1.0 - step);
    w(arg) += step;
  }
  throw DidNotConvergeError("g_optimal_design: max_iter reached, best max variance " +
                                std::to_string(best),
                            best);
}

Design PolicyEngine::g_optimal_for(const ContextSet& x) {
  std::string key = x.content_key();
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Design d = g_optimal_design(x, params_.jitter, params_.tol_factor, params_.max_iter);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (cache_.size() > 200000) cache_.clear();  // bounded memo footprint
  return cache_.emplace(std::move(key), d).first->second;
}

namespace {

Eigen::VectorXd softmax_weights(const SoftmaxPolicy& sp, const ContextSet& x) {
  const int k = x.size();
  Eigen::VectorXd scores(k);
  for (int i = 0; i < k; ++i) {
    scores(i) = x.vector(i).dot(sp.m.mat() * x.vector(i));
  }
  double top = scores.maxCoeff();
  if (top <= 0.0) {
    // All-zero scores: the formula is 0/0 there, fall back to uniform.
    return Eigen::VectorXd::Constant(k, 1.0 / double(k));
  }
  // w_i proportional to s_i^alpha, computed as exp(alpha (ln s_i - ln s_max)).
  Eigen::VectorXd w(k);
  for (int i = 0; i < k; ++i) {
    double s = std::max(scores(i), kScoreFloor);
    w(i) = std::exp(sp.alpha * (std::log(s) - std::log(top)));
  }
  return w / w.sum();
}

int argmax_index(const ArgmaxPolicy& ap, const ContextSet& x) {
  int arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i) {
    double s = x.vector(i).dot(ap.v.mat() * x.vector(i));
    if (s > best) {  // ties broken deterministically toward the lowest index
      best = s;
      arg = i;
    }
  }
  return arg;
}

}  // namespace

Design PolicyEngine::policy_distribution(const SamplePolicy& pi, const ContextSet& x) {
  const int k = x.size();
  return std::visit(
      [&](const auto& node) -> Design {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, UniformPolicy>) {
          return Design(Eigen::VectorXd::Constant(k, 1.0 / double(k)));
        } else if constexpr (std::is_same_v<T, GOptimalPolicy>) {
          return g_optimal_for(x);
        } else if constexpr (std::is_same_v<T, ArgmaxPolicy>) {
          if (node.v.dim() != x.dim()) throw std::invalid_argument("Argmax: dimension mismatch");
          Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
          w(argmax_index(node, x)) = 1.0;
          return Design(std::move(w));
        } else if constexpr (std::is_same_v<T, SoftmaxPolicy>) {
          if (node.m.dim() != x.dim()) throw std::invalid_argument("Softmax: dimension mismatch");
          return Design(softmax_weights(node, x));
        } else {
          Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
          for (const auto& [cw, sub] : node.components) {
            if (cw > 0.0) w += cw * policy_distribution(sub, x).weights;
          }
          return Design(w / w.sum());
        }
      },
      pi.node());
}

int draw_from_design(const Design& design, CounterRng& rng) {
  double u = rng.uniform();
  double cum = 0.0;
  int last = 0;
  for (int i = 0; i < design.size(); ++i) {
    if (design.weights(i) <= 0.0) continue;
    cum += design.weights(i);
    last = i;
    if (u < cum) return i;
  }
  return last;  // guard against the cumulative sum landing below 1
}

int PolicyEngine::draw_arm(const SamplePolicy& pi, const ContextSet& x, CounterRng& rng) {
  return draw_from_design(policy_distribution(pi, x), rng);
}

PsdMatrix PolicyEngine::policy_info_matrix(const SamplePolicy& pi, const ContextSet& x) {
  return PsdMatrix(policy_distribution(pi, x).info_matrix(x));
}

double PolicyEngine::mean_max_quad(std::span<const ContextSet> samples, const SamplePolicy& pi,
                                   double lambda, bool root) {
  if (samples.empty()) throw std::invalid_argument("empirical variation: samples empty");
  const int d = samples[0].dim();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(d, d);
  for (const ContextSet& x : samples) {
    q += policy_distribution(pi, x).info_matrix(x);
  }
  q /= double(samples.size());
  Eigen::MatrixXd chol = detail::chol_factor_raw(0.5 * (q + q.transpose().eval()), lambda);
  double total = 0.0;
  for (const ContextSet& x : samples) {
    double worst = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      worst = std::max(worst, detail::quad_form_chol(chol, x.vector(i)));
    }
    total += root ? std::sqrt(worst) : worst;
  }
  return total / double(samples.size());
}

double PolicyEngine::empirical_variation(std::span<const ContextSet> samples,
                                         const SamplePolicy& pi, double lambda) {
  return mean_max_quad(samples, pi, lambda, /*root=*/false);
}

double PolicyEngine::empirical_deviation(std::span<const ContextSet> samples,
                                         const SamplePolicy& pi, double lambda) {
  return mean_max_quad(samples, pi, lambda, /*root=*/true);
}

}  // namespace adaptivity
