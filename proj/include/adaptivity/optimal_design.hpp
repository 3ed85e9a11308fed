#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "adaptivity/matrix_kernel.hpp"
#include "adaptivity/rng.hpp"

namespace adaptivity {

// One time step's candidate context vectors, stored as columns of a d x K
// matrix.  Every column must have norm <= 1 (+ tiny slack).
class ContextSet {
 public:
  explicit ContextSet(Eigen::MatrixXd vectors);
  ContextSet(std::initializer_list<Eigen::VectorXd> vectors);

  int dim() const { return int(vectors_.rows()); }
  int size() const { return int(vectors_.cols()); }
  Eigen::VectorXd vector(int i) const { return vectors_.col(i); }
  const Eigen::MatrixXd& matrix() const { return vectors_; }

  // Subset of columns, order preserved.
  ContextSet subset(std::span<const int> indices) const;

  // Byte-level key of (d, K, entries); used by the G-optimal memo cache.
  std::string content_key() const;

 private:
  Eigen::MatrixXd vectors_;
};

// Probability weights over the points of one ContextSet.
struct Design {
  Eigen::VectorXd weights;

  explicit Design(Eigen::VectorXd w);
  int size() const { return int(weights.size()); }

  // Information matrix sum_i w_i x_i x_i^T of this design on X.
  Eigen::MatrixXd info_matrix(const ContextSet& x) const;
};

// Sample policy: maps a ContextSet to a distribution over its points.
class SamplePolicy;

struct UniformPolicy {};
struct GOptimalPolicy {};
struct ArgmaxPolicy {
  PsdMatrix v;
};
struct SoftmaxPolicy {
  PsdMatrix m;
  double alpha;
};
struct MixedPolicy {
  std::vector<std::pair<double, SamplePolicy>> components;  // weights sum to 1
};

class SamplePolicy {
 public:
  using Node = std::variant<UniformPolicy, GOptimalPolicy, ArgmaxPolicy, SoftmaxPolicy, MixedPolicy>;

  static SamplePolicy uniform();
  static SamplePolicy g_optimal();
  static SamplePolicy argmax(PsdMatrix v);
  static SamplePolicy softmax(PsdMatrix m, double alpha);
  static SamplePolicy mixed(std::vector<std::pair<double, SamplePolicy>> components);

  const Node& node() const { return *node_; }

 private:
  explicit SamplePolicy(Node n) : node_(std::make_shared<Node>(std::move(n))) {}
  std::shared_ptr<const Node> node_;  // policies are immutable, sharing is safe
};

struct GOptimalParams {
  double jitter = 1e-9;
  double tol_factor = 2.0;  // stop at tol_factor * d, the computable relaxation
  int max_iter = 10000;
};

// Frank-Wolfe solver on the design simplex: repeatedly moves mass toward the
// current max-variance point with the exact line-search step, stopping once
// max_x x^T (sum w_i x_i x_i^T + jitter I)^{-1} x <= tol_factor * d.
// Throws DidNotConvergeError (carrying the best value) at max_iter.
Design g_optimal_design(const ContextSet& x, double jitter, double tol_factor = 2.0,
                        int max_iter = 10000);

// Evaluates policies against context sets.  Holds the per-run G-optimal memo
// cache (content-hash keyed, safe for concurrent lookup/insert).
class PolicyEngine {
 public:
  explicit PolicyEngine(GOptimalParams params = {}) : params_(params) {}

  const GOptimalParams& params() const { return params_; }

  // Exact probability weights of the policy on X.
  Design policy_distribution(const SamplePolicy& pi, const ContextSet& x);

  // One draw via a single uniform variate and CDF inversion.
  int draw_arm(const SamplePolicy& pi, const ContextSet& x, CounterRng& rng);

  // Q_X(pi) = E_{x ~ pi(X)} x x^T; trace <= 1.
  PsdMatrix policy_info_matrix(const SamplePolicy& pi, const ContextSet& x);

  // lambda-variation over the empirical sample multiset: builds the mean
  // information matrix, then averages the per-set maximal quadratic form.
  double empirical_variation(std::span<const ContextSet> samples, const SamplePolicy& pi,
                             double lambda);

  // Same with the square root inside the outer mean (lambda-deviation).
  double empirical_deviation(std::span<const ContextSet> samples, const SamplePolicy& pi,
                             double lambda);

  // Memoized G-optimal design of X.
  Design g_optimal_for(const ContextSet& x);

 private:
  double mean_max_quad(std::span<const ContextSet> samples, const SamplePolicy& pi,
                       double lambda, bool root);

  GOptimalParams params_;
  std::mutex cache_mutex_;
  std::unordered_map<std::string, Design> cache_;
};

int draw_from_design(const Design& design, CounterRng& rng);

}  // namespace adaptivity
