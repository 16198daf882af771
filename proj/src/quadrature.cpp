#include "wavebem/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include "wavebem/common.hpp"

namespace wavebem {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("Gauss rule needs at least one point");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  // P_n(z) and P_n'(z) by the three-term recurrence.
  auto legendre = [n](double z, double& dp) {
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    return p1;
  };
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double dz = legendre(z, dp) / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    legendre(z, dp);
    x[i] = 0.5 * (1.0 - z);
    x[n - 1 - i] = 0.5 * (1.0 + z);
    w[i] = w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

std::vector<QuadPoint> gauss_tensor(int n) {
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  std::vector<QuadPoint> q;
  q.reserve(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) q.push_back({x[i], x[j], w[i] * w[j]});
  return q;
}

std::vector<QuadPoint> singular_rule(double u0, double v0, int n) {
  if (!(u0 >= 0 && u0 <= 1 && v0 >= 0 && v0 <= 1))
    throw std::out_of_range("singular point outside the unit square");
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  const double corners[5][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
  std::vector<QuadPoint> q;
  for (int e = 0; e < 4; ++e) {
    const double ax = corners[e][0] - u0, ay = corners[e][1] - v0;
    const double ex = corners[e + 1][0] - corners[e][0], ey = corners[e + 1][1] - corners[e][1];
    const double area2 = std::abs(ax * ey - ay * ex);
    if (area2 < 1e-14) continue;  // singular point lies on this edge
    for (int i = 0; i < n; ++i) {
      const double s = x[i];
      for (int j = 0; j < n; ++j) {
        const double t = x[j];
        q.push_back({u0 + s * (ax + t * ex), v0 + s * (ay + t * ey), w[i] * w[j] * s * area2});
      }
    }
  }
  return q;
}

}  // namespace wavebem
