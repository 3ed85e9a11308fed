// Test-only oracles, independent of the library's factorization paths.
#pragma once

#include <Eigen/Dense>

#include "adaptivity/optimal_design.hpp"
#include "adaptivity/rng.hpp"

namespace oracle {

// Explicit inverse by Gauss-Jordan with partial pivoting (hand-rolled so the
// oracle shares nothing with the Cholesky-based implementation).
inline Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd a) {
  const long n = a.rows();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  for (long col = 0; col < n; ++col) {
    long pivot = col;
    for (long r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    a.row(col).swap(a.row(pivot));
    inv.row(col).swap(inv.row(pivot));
    const double p = a(col, col);
    a.row(col) /= p;
    inv.row(col) /= p;
    for (long r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      a.row(r) -= f * a.row(col);
      inv.row(r) -= f * inv.row(col);
    }
  }
  return inv;
}

inline Eigen::MatrixXd random_psd(int d, adaptivity::CounterRng& rng, double scale = 1.0) {
  Eigen::MatrixXd b(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) b(r, c) = rng.normal();
  }
  Eigen::MatrixXd a = scale * (b.transpose() * b) / double(d);
  return 0.5 * (a + a.transpose().eval());
}

inline Eigen::VectorXd random_vec(int d, adaptivity::CounterRng& rng) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

inline adaptivity::ContextSet random_sphere_set(int d, int k, adaptivity::CounterRng& rng) {
  Eigen::MatrixXd m(d, k);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd v = random_vec(d, rng);
    m.col(i) = v / v.norm();
  }
  return adaptivity::ContextSet(std::move(m));
}

}  // namespace oracle
