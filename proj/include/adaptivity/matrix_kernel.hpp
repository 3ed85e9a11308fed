#pragma once

#include <Eigen/Dense>
#include <utility>

#include "adaptivity/errors.hpp"

namespace adaptivity {

// Dense symmetric PSD matrix shared by every module.  Construction averages
// the input with its transpose: rank-one accumulation drifts asymmetrically
// in floating point.
class PsdMatrix {
 public:
  explicit PsdMatrix(Eigen::MatrixXd m);

  static PsdMatrix identity(int d) { return PsdMatrix(Eigen::MatrixXd::Identity(d, d)); }
  static PsdMatrix zero(int d) { return PsdMatrix(Eigen::MatrixXd::Zero(d, d)); }

  int dim() const { return int(mat_.rows()); }
  const Eigen::MatrixXd& mat() const { return mat_; }

  // Full invariant check (symmetry already holds by construction; this
  // verifies eigenvalues >= -1e-10 * max |eigenvalue|).  O(d^3); call at API
  // boundaries and in tests, not in per-step loops.
  void validate() const;

 private:
  Eigen::MatrixXd mat_;
};

// Lower-triangular L with L L^T = A + jitter I.  On failure retries once with
// the default jitter 1e-12 * trace(A)/d, then throws NotPsdError.
Eigen::MatrixXd chol_factor(const PsdMatrix& a, double jitter);

// x^T (A + jitter I)^{-1} x via one factorization and a triangular solve.
double quad_form(const PsdMatrix& a, double jitter, const Eigen::VectorXd& x);

// ln det(A + jitter I) = 2 sum ln L_ii.
double log_det(const PsdMatrix& a, double jitter);

// (min eigenvalue, max eigenvalue) of A.
std::pair<double, double> eigen_bounds(const PsdMatrix& a);

namespace detail {
// Raw-matrix variants for hot loops that maintain PSD-ness by construction.
Eigen::MatrixXd chol_factor_raw(const Eigen::MatrixXd& a, double jitter);
double quad_form_chol(const Eigen::MatrixXd& chol_lower, const Eigen::VectorXd& x);
double log_det_chol(const Eigen::MatrixXd& chol_lower);

// Rank-one Cholesky update: L <- chol(L L^T + v v^T) in place, O(d^2).
void chol_rank_one_update(Eigen::MatrixXd& chol_lower, Eigen::VectorXd v);
}  // namespace detail

}  // namespace adaptivity
