#pragma once

#include <vector>

namespace wavebem {

struct QuadPoint {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;
};

// Gauss-Legendre nodes and weights on [0,1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// Tensor Gauss rule on [0,1]^2.
std::vector<QuadPoint> gauss_tensor(int n);

// Rule for integrands with a 1/r singularity at (u0,v0) in [0,1]^2: the square
// is fanned into triangles with apex (u0,v0), each mapped from the unit square
// by the collapsed (Duffy) map, whose Jacobian cancels the singularity.
std::vector<QuadPoint> singular_rule(double u0, double v0, int n);

struct QuadratureRule {
  int regular_order = 4;
  int near_order = 8;
  int singular_order = 8;
  // Collocation points closer than near_factor * diameter use near_order on
  // sub-squares, split while closer than split_factor sub-diameters.
  double near_factor = 4.0;
  double split_factor = 2.0;
};

}  // namespace wavebem
