#include <cmath>
#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "wavebem/laplace_bem.hpp"

using namespace wavebem;

namespace {

ReferenceMesh single_panel(const PanelCorners& x) {
  ReferenceMesh m;
  for (const auto& p : x) m.nodes.push_back(p);
  m.panels.push_back({{0, 1, 2, 3}, Region::free_surface, 0});
  return m;
}

// Brute force: geometric grading towards the corner (0,0), each annulus cut
// into squares integrated with a 20-point tensor Gauss rule.
double graded_corner_integral(int l) {
  std::vector<double> x, w;
  gauss_legendre(20, x, w);
  auto square = [&](double u0, double v0, double s) {
    double sum = 0.0;
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) {
        const double u = u0 + s * x[i], v = v0 + s * x[j];
        const double n[4] = {(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v};
        sum += w[i] * w[j] * s * s * n[l] / (4 * pi * std::sqrt(u * u + v * v));
      }
    return sum;
  };
  double total = 0.0;
  double a = 0.5;
  for (int k = 0; k < 50; ++k, a *= 0.5) {
    const double h = 0.5 * a;
    for (int bi = 0; bi < 4; ++bi)
      for (int bj = 0; bj < 4; ++bj) {
        if (bi < 2 && bj < 2) continue;
        total += square(bi * h, bj * h, h);
      }
  }
  return total;
}

double relative_l2(const std::vector<double>& got, const std::vector<double>& want) {
  double e = 0, n = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    e += (got[i] - want[i]) * (got[i] - want[i]);
    n += want[i] * want[i];
  }
  return std::sqrt(e / n);
}

void expect_rigid_mode(const BemSystem& sys) {
  for (Eigen::Index i = 0; i < sys.N.rows(); ++i) {
    double s = sys.alpha[i];
    for (Eigen::Index j = 0; j < sys.N.cols(); ++j) s += sys.N(i, j);
    ASSERT_LE(std::abs(s), 1e-14) << "row " << i;
  }
}

// Mixed problem phi = x on the unit cube: Dirichlet on top, Neumann phin = n_x
// elsewhere. Returns the relative nodal L2 error of the recovered phi.
double cube_phi_x_error(int n) {
  const auto mesh = make_cube_mesh(n);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto x = dof_positions(mesh, dofs);
  const auto sys = assemble_system(dofs, x);
  expect_rigid_mode(sys);
  auto bc = default_assignment(dofs);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) {
    bc.phi[i] = x[i].x();
    bc.phin[i] = dofs.dof_normal[i].x();
  }
  const auto sol = solve_mixed_bvp(sys, dofs, bc);
  std::vector<double> got, want;
  for (std::size_t i = 0; i < dofs.n_dofs; ++i)
    if (bc.type[i] == BcType::neumann) {
      got.push_back(sol.phi[i]);
      want.push_back(x[i].x());
    }
  return relative_l2(got, want);
}

}  // namespace

TEST(GreenFunction, Values) {
  EXPECT_NEAR(green_function(Vec3(1, 0, 0)), 0.0795775, 1e-7);
  EXPECT_DOUBLE_EQ(green_function(Vec3(0, 2, 0)), 0.5 * green_function(Vec3(0, 1, 0)));
  EXPECT_DOUBLE_EQ(green_function(Vec3(3, 4, 0)), 1.0 / (20 * pi));
  EXPECT_THROW(green_function(Vec3::Zero()), GeometryError);
  const Vec3 r(0.3, -1.2, 0.7);
  EXPECT_EQ(green_function(r), green_function(-r));
}

TEST(GreenFunction, NormalGradient) {
  EXPECT_EQ(green_normal_gradient(Vec3(1, 0, 0), Vec3(0, 0, 1)), 0.0);
  EXPECT_DOUBLE_EQ(green_normal_gradient(Vec3(0, 0, 1), Vec3(0, 0, 1)), -1.0 / (4 * pi));
  const Vec3 r(0.2, 0.5, -0.4), n = Vec3(1, 2, 3).normalized();
  EXPECT_EQ(green_normal_gradient(r, n), -green_normal_gradient(r, -n));
  EXPECT_THROW(green_normal_gradient(Vec3::Zero(), n), GeometryError);
}

TEST(Quadrature, GaussExactness) {
  std::vector<double> x, w;
  for (int n = 1; n <= 12; ++n) {
    gauss_legendre(n, x, w);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += w[i] * std::pow(x[i], p);
      EXPECT_NEAR(s, 1.0 / (p + 1), 1e-14) << "n=" << n << " p=" << p;
    }
  }
}

TEST(Quadrature, SingularRuleWeightsAndArea) {
  for (auto [u0, v0] : {std::pair{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.0}, {0.3, 0.6}}) {
    const auto q = singular_rule(u0, v0, 6);
    double area = 0;
    for (const auto& p : q) {
      EXPECT_GT(p.w, 0.0);
      area += p.w;
    }
    EXPECT_NEAR(area, 1.0, 1e-14);
  }
}

TEST(Quadrature, SingularCornerOneOverR) {
  // Closed form: integral of 1/|x| over the unit square = 2 ln(1 + sqrt 2).
  const auto q = singular_rule(0, 0, 8);
  double s = 0;
  for (const auto& p : q) s += p.w / std::hypot(p.u, p.v);
  EXPECT_NEAR(s / (2 * std::log(1 + std::sqrt(2.0))), 1.0, 1e-8);
  // The brute-force oracle reproduces the same for the sum of the basis.
  double oracle = 0;
  for (int l = 0; l < 4; ++l) oracle += graded_corner_integral(l);
  EXPECT_NEAR(oracle * 4 * pi / (2 * std::log(1 + std::sqrt(2.0))), 1.0, 1e-12);
}

TEST(Assembly, SelfPanelSingularMatchesBruteForce) {
  const PanelCorners x = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  const auto mesh = single_panel(x);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto sys = assemble_system(dofs, dof_positions(mesh, dofs));
  for (int l = 0; l < 4; ++l) {
    const double oracle = graded_corner_integral(l);
    EXPECT_LT(std::abs(sys.D(0, l) - oracle), 1e-8 * std::abs(oracle)) << "l=" << l;
    // Coplanar panel: r . n = 0.
    EXPECT_EQ(sys.N(0, l), 0.0);
  }
}

TEST(Assembly, FarFieldPointSource) {
  ReferenceMesh m;
  const PanelCorners a = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  for (const auto& p : a) m.nodes.push_back(p);
  const Vec3 shift(9.0, 6.0, 11.0);
  const Vec3 e1 = Vec3(1, 0.2, 0).normalized(), e2 = Vec3(0, 0.3, 1).normalized();
  for (const auto& p : {Vec3::Zero().eval(), e1, e2, (e1 + e2).eval()}) m.nodes.push_back(shift + p);
  m.panels.push_back({{0, 1, 2, 3}, Region::free_surface, 0});
  m.panels.push_back({{4, 5, 6, 7}, Region::hull, 1});
  const auto dofs = duplicate_edge_nodes(m);
  const auto x = dof_positions(m, dofs);
  const auto sys = assemble_system(dofs, x);
  const auto g = panel_geometry(dofs.corners(1, x), 0.5, 0.5);
  const double area = surface_area(dofs, x) - 1.0;
  const Vec3 r = g.point - x[0];
  ASSERT_GT(r.norm(), 10 * panel_diameter(dofs.corners(1, x)));
  const double oracle = -area * r.dot(g.normal) / (4 * pi * std::pow(r.norm(), 3));
  double entry = 0;
  for (int l = 0; l < 4; ++l) entry += sys.N(0, dofs.panel_dofs[1][l]);
  EXPECT_NEAR(entry / oracle, 1.0, 0.05);
}

TEST(RigidModes, CubeSolidAngles) {
  const auto mesh = make_cube_mesh(4);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto x = dof_positions(mesh, dofs);
  const auto sys = assemble_system(dofs, x);
  expect_rigid_mode(sys);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) {
    int on = 0;
    for (int c = 0; c < 3; ++c) on += (x[i][c] == 0.0 || x[i][c] == 1.0);
    const double expected = on == 1 ? 0.5 : on == 2 ? 0.25 : 0.125;
    EXPECT_NEAR(sys.alpha[i], expected, 1e-10) << "dof " << i;
  }
}

TEST(MixedBvp, ConstantIsRigidMode) {
  const auto mesh = make_cube_mesh(3);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto sys = assemble_system(dofs, dof_positions(mesh, dofs));
  auto bc = default_assignment(dofs);
  bc.phi.setOnes();
  const auto sol = solve_mixed_bvp(sys, dofs, bc);
  EXPECT_LT((sol.phi - VectorXd::Ones(dofs.n_dofs)).lpNorm<Eigen::Infinity>(), 1e-9);
  EXPECT_LT(sol.phin.lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(MixedBvp, CubeHarmonicFieldConverges) {
  const double e4 = cube_phi_x_error(4);
  const double e8 = cube_phi_x_error(8);
  EXPECT_LE(e8, 0.03);
  EXPECT_LT(e8, e4);
}

TEST(MixedBvp, SphereDirichletToNeumann) {
  const auto mesh = make_sphere_mesh(10);
  ASSERT_EQ(mesh.panels.size(), 600u);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto x = dof_positions(mesh, dofs);
  const auto sys = assemble_system(dofs, x);
  expect_rigid_mode(sys);
  auto bc = default_assignment(dofs);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) bc.phi[i] = x[i].x();
  const auto sol = solve_mixed_bvp(sys, dofs, bc);
  std::vector<double> got(sol.phin.data(), sol.phin.data() + dofs.n_dofs), want;
  for (const auto& p : x) want.push_back(p.x());
  EXPECT_LE(relative_l2(got, want), 0.08);
}

TEST(MixedBvp, Errors) {
  const auto mesh = make_cube_mesh(2);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto sys = assemble_system(dofs, dof_positions(mesh, dofs));
  auto bc = default_assignment(dofs);
  std::fill(bc.type.begin(), bc.type.end(), BcType::neumann);
  EXPECT_THROW(solve_mixed_bvp(sys, dofs, bc), SolverError);
  bc = default_assignment(dofs);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) bc.phi[i] = dof_positions(mesh, dofs)[i].x();
  MixedSolveParams p;
  p.gmres.max_iterations = 1;
  p.lu_fallback = false;
  EXPECT_THROW(solve_mixed_bvp(sys, dofs, bc, p), SolverError);
  p.lu_fallback = true;
  const auto sol = solve_mixed_bvp(sys, dofs, bc, p);
  EXPECT_TRUE(sol.used_lu);
  EXPECT_LT(sol.relative_residual, 1e-12);
}

TEST(InteriorPotential, ConstantLinearAndLinearity) {
  const auto mesh = make_cube_mesh(8);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto x = dof_positions(mesh, dofs);
  const Vec3 c(0.5, 0.5, 0.5);
  VectorXd one = VectorXd::Ones(dofs.n_dofs), zero = VectorXd::Zero(dofs.n_dofs);
  const auto v1 = evaluate_interior_potential(c, one, zero, dofs, x);
  EXPECT_NEAR(v1.value, 1.0, 1e-6);
  EXPECT_FALSE(v1.near_boundary);
  VectorXd phi(dofs.n_dofs), phin(dofs.n_dofs);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) {
    phi[i] = x[i].x();
    phin[i] = dofs.dof_normal[i].x();
  }
  // phi = x - 0.5 vanishes at the centre.
  const auto vx = evaluate_interior_potential(c, phi - 0.5 * one, phin, dofs, x);
  EXPECT_NEAR(vx.value, 0.0, 1e-3);
  const double a = 2.5, b = -0.75;
  const auto lhs = evaluate_interior_potential(c, a * phi + b * one, a * phin, dofs, x).value;
  const auto rhs = a * evaluate_interior_potential(c, phi, phin, dofs, x).value +
                   b * evaluate_interior_potential(c, one, zero, dofs, x).value;
  EXPECT_NEAR(lhs, rhs, 1e-14);
  EXPECT_TRUE(evaluate_interior_potential(Vec3(0.5, 0.5, 0.02), one, zero, dofs, x).near_boundary);
}

TEST(Assembly, DeterministicAcrossThreadCounts) {
  const auto mesh = make_cube_mesh(3);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto x = dof_positions(mesh, dofs);
  setenv("WAVEBEM_THREADS", "1", 1);
  const auto a = assemble_system(dofs, x);
  setenv("WAVEBEM_THREADS", "3", 1);
  const auto b = assemble_system(dofs, x);
  unsetenv("WAVEBEM_THREADS");
  EXPECT_TRUE((a.N.array() == b.N.array()).all());
  EXPECT_TRUE((a.D.array() == b.D.array()).all());
  EXPECT_TRUE((a.alpha.array() == b.alpha.array()).all());
}

TEST(Assembly, MatrixMarketDump) {
  DenseMatrix m = DenseMatrix::Zero(2, 3);
  m(0, 1) = 0.1;
  m(1, 2) = -2.0;
  std::ostringstream os;
  write_matrix_market(os, m);
  EXPECT_EQ(os.str(),
            "%%MatrixMarket matrix coordinate real general\n2 3 2\n1 2 0.10000000000000001\n2 3 -2\n");
}
