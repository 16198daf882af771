#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

namespace wavebem {

struct GmresParams {
  int restart = 100;
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  int max_iterations = 1000;
};

struct GmresResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // final residual 2-norm
  bool breakdown = false;
};

// Restarted GMRES with right preconditioning: solves A x = b where
// op(v, out) computes out = A v and prec(v, out) computes out ≈ A⁻¹ v.
// Convergence: |b - A x| <= max(abs_tol, rel_tol |b|).
template <class Op, class Prec>
GmresResult gmres(const Op& op, const Prec& prec, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                  const GmresParams& params) {
  using Eigen::VectorXd;
  const Eigen::Index n = b.size();
  GmresResult res;
  const double bnorm = b.norm();
  const double target = std::max(params.abs_tol, params.rel_tol * bnorm);
  if (x.size() != n) x = VectorXd::Zero(n);
  VectorXd r(n), w(n), z(n);
  op(x, w);
  r = b - w;
  double beta = r.norm();
  res.residual = beta;
  if (beta <= target) {
    res.converged = true;
    return res;
  }
  const int m = std::max(1, params.restart);
  std::vector<VectorXd> V(m + 1, VectorXd(n));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  VectorXd cs(m), sn(m), g(m + 1);
  while (res.iterations < params.max_iterations) {
    V[0] = r / beta;
    g.setZero();
    g[0] = beta;
    int k = 0;
    for (; k < m && res.iterations < params.max_iterations; ++k) {
      ++res.iterations;
      prec(V[k], z);
      op(z, w);
      // Modified Gram-Schmidt with one reorthogonalization pass.
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= k; ++i) {
          const double h = V[i].dot(w);
          H(i, k) += h;
          w -= h * V[i];
        }
      H(k + 1, k) = w.norm();
      const bool lucky = H(k + 1, k) <= 1e-14 * H.col(k).head(k + 1).norm();
      if (!lucky) V[k + 1] = w / H(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double a = H(k, k), c = H(k + 1, k);
      const double d = std::hypot(a, c);
      if (d == 0.0) {
        res.breakdown = true;
        break;
      }
      cs[k] = a / d;
      sn[k] = c / d;
      H(k, k) = d;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) <= target || lucky) {
        ++k;
        break;
      }
    }
    // Back substitution for the Krylov coefficients.
    VectorXd y = VectorXd::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
      y[i] = s / H(i, i);
    }
    VectorXd u = VectorXd::Zero(n);
    for (int i = 0; i < k; ++i) u += y[i] * V[i];
    prec(u, z);
    x += z;
    op(x, w);
    r = b - w;
    beta = r.norm();
    res.residual = beta;
    if (beta <= target) {
      res.converged = true;
      return res;
    }
    if (res.breakdown) return res;
    H.setZero();
  }
  return res;
}

}  // namespace wavebem
