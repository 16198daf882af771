#include <cmath>
#include <random>

#include <Eigen/SparseLU>
#include <gtest/gtest.h>

#include "wavebem/free_surface.hpp"

using namespace wavebem;

namespace {

struct Patch {
  ReferenceMesh mesh;
  DofHandler dofs;
  std::vector<Vec3> x;
  std::vector<std::size_t> panels;
};

Patch flat_patch(int nx, int ny, double lx = 1.0, double ly = 1.0) {
  Patch p;
  p.mesh = make_flat_patch(nx, ny, lx, ly);
  p.dofs = duplicate_edge_nodes(p.mesh);
  p.x = dof_positions(p.mesh, p.dofs);
  p.panels = panels_in_region(p.dofs, Region::free_surface);
  return p;
}

SupgEvaluator constant_field(const Vec3& d, double value) {
  return [d, value](std::size_t, const PanelGeometry&, const std::array<double, 4>&,
                    const std::array<Vec3, 4>&) { return SupgPointData{d, value, value}; };
}

}  // namespace

TEST(Beach, ProfileExamples) {
  const BeachParams b{2.0, 1.0, 1.5};
  EXPECT_EQ(beach_mu(1.0, b), 0.0);
  EXPECT_EQ(beach_mu(2.0, b), 0.0);
  EXPECT_NEAR(beach_mu(2.5, b), 1.5 * 0.25, 1e-15);
  EXPECT_NEAR(beach_mu(3.0, b), 1.5, 1e-15);
}

TEST(Frame, TotalVelocityAndSign) {
  const auto f = boat_frame(1.2, 0.0);
  EXPECT_EQ(f.v_inf.x(), 1.2);
  EXPECT_EQ(f.v_sys.x(), -1.2);
  const Vec3 v = total_velocity(Vec3(0.1, 0, 0), 0.5, Vec3(0, 0, 1), f);
  EXPECT_NEAR((v - Vec3(1.3, 0, 0.5)).norm(), 0.0, 1e-15);
  // The frame acceleration cancels against its body force.
  EXPECT_EQ(boat_frame(0, 0.7).a_sys.x(), -0.7);
  EXPECT_EQ(boat_frame(0, 0.7).a_inf.norm(), 0.0);
}

TEST(FreeSurfaceRhs, VPhiExamples) {
  const FrameKinematics still = boat_frame(0, 0);
  FsPoint p;
  EXPECT_EQ(v_phi(p, still, 0.0), 0.0);
  p.x = Vec3(0.3, 0.1, 0.02);
  EXPECT_NEAR(v_phi(p, still, 0.0), -gravity * 0.02, 1e-15);
  // w = v removes the transport term.
  const auto f = boat_frame(1.0, 0.5);
  p.grad_phi = Vec3(0.1, -0.2, 0.05);
  p.phin = 0.3;
  p.w = f.v_inf + p.grad_phi;
  const double mu = 0.4;
  const double expect = -gravity * 0.02 + 0.5 * p.grad_phi.squaredNorm() - mu * 0.3;
  EXPECT_NEAR(v_phi(p, f, mu), expect, 1e-14);
}

TEST(FreeSurfaceRhs, VEtaExamples) {
  FsPoint p;
  const auto f0 = boat_frame(0, 0);
  p.grad_phi = Vec3(0.2, 0.1, 0.7);
  p.w = p.grad_phi;
  p.grad_eta = Vec3(0.3, 0.4, 0);
  EXPECT_NEAR(v_eta(p, f0), 0.7, 1e-15);
  FsPoint q;
  q.grad_eta = Vec3(0.05, 0, 0);
  EXPECT_NEAR(v_eta(q, boat_frame(1.5, 0)), -1.5 * 0.05, 1e-15);
  FsPoint r;
  r.grad_phi = Vec3(0, 0, 0.25);
  r.phin = 0.25;
  EXPECT_NEAR(v_eta(r, f0), 0.25, 1e-15);
}

TEST(FreeSurfaceRhs, EtaGradientFromNormal) {
  // z = 0.1 x - 0.2 y has normal proportional to (-0.1, 0.2, 1).
  const Vec3 n = Vec3(-0.1, 0.2, 1.0).normalized();
  const Vec3 g = eta_gradient(n);
  EXPECT_NEAR(g.x(), 0.1, 1e-15);
  EXPECT_NEAR(g.y(), -0.2, 1e-15);
  EXPECT_EQ(g.z(), 0.0);
}

TEST(Supg, DirectionExamples) {
  const SupgParams s;
  EXPECT_EQ(supg_direction(Vec3(1, 2, 3), Vec3(1, 2, 3), s, 0.1).norm(), 0.0);
  const Vec3 d = supg_direction(Vec3(2, 0, 0), Vec3::Zero(), s, 0.1);
  EXPECT_NEAR((d - Vec3(0.05, 0, 0)).norm(), 0.0, 1e-16);
  const Vec3 d2 = supg_direction(Vec3(7, 0, 0), Vec3::Zero(), s, 0.1);
  EXPECT_NEAR(d2.norm(), d.norm(), 1e-16);
  SupgParams off;
  off.enabled = false;
  EXPECT_EQ(supg_direction(Vec3(2, 0, 0), Vec3::Zero(), off, 0.1).norm(), 0.0);
}

TEST(Supg, GalerkinLimitSymmetricWithRowSums) {
  auto p = flat_patch(5, 4, 1.0, 0.8);
  const auto proj = assemble_supg_projection(p.dofs, p.x, p.panels, constant_field(Vec3::Zero(), 1));
  const Eigen::MatrixXd M(proj.M);
  EXPECT_LT((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  // Row sums equal the integral of each basis function, which is b for V = 1.
  for (Eigen::Index i = 0; i < M.rows(); ++i) EXPECT_NEAR(M.row(i).sum(), proj.b_phi[i], 1e-14);
  EXPECT_NEAR(proj.b_phi.sum(), 0.8, 1e-13);
}

TEST(Supg, ConstantsReproducedForAnyD) {
  auto p = flat_patch(6, 3);
  const auto proj = assemble_supg_projection(p.dofs, p.x, p.panels,
                                             constant_field(Vec3(0.04, -0.02, 0), 2.5));
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(proj.M);
  const VectorXd u = lu.solve(proj.b_phi);
  EXPECT_LT((u.array() - 2.5).abs().maxCoeff(), 1e-12);
}

TEST(Supg, LinearFieldConsistency) {
  auto p = flat_patch(6, 5);
  const Vec3 d(0.05, 0.03, 0);
  const SupgEvaluator eval = [&](std::size_t, const PanelGeometry& g, const std::array<double, 4>&,
                                 const std::array<Vec3, 4>&) {
    const double v = 1.0 + 2.0 * g.point.x() - 0.5 * g.point.y();
    return SupgPointData{d, v, v};
  };
  const auto proj = assemble_supg_projection(p.dofs, p.x, p.panels, eval);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(proj.M);
  const VectorXd u = lu.solve(proj.b_phi);
  for (std::size_t i = 0; i < p.dofs.n_dofs; ++i)
    EXPECT_NEAR(u[i], 1.0 + 2.0 * p.x[i].x() - 0.5 * p.x[i].y(), 1e-12);
}

TEST(Beach, AbsorptionRateNonNegative) {
  auto p = flat_patch(8, 4, 4.0, 1.0);
  const BeachParams b{2.0, 2.0, 1.2};
  EXPECT_EQ(energy_absorption_rate(p.dofs, p.x, p.panels, VectorXd::Zero(p.dofs.n_dofs), b), 0.0);
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd phin(p.dofs.n_dofs);
    for (auto& v : phin) v = nd(rng);
    EXPECT_GE(energy_absorption_rate(p.dofs, p.x, p.panels, phin, b), 0.0);
    EXPECT_EQ(energy_absorption_rate(p.dofs, p.x, p.panels, phin, BeachParams{2.0, 2.0, 0.0}), 0.0);
  }
  // phin = 1 on a beach covering x in [2,4]: nu * int ((x-2)/2)^2 dx = 1.2 * 2/3.
  const double rate = energy_absorption_rate(p.dofs, p.x, p.panels, VectorXd::Ones(p.dofs.n_dofs), b);
  EXPECT_NEAR(rate, 1.2 * 2.0 / 3.0, 1e-12);
}

TEST(Pressure, BernoulliExamples) {
  const double rho = 1000;
  const auto still = boat_frame(0, 0);
  EXPECT_NEAR(pressure_bernoulli(0, Vec3::Zero(), Vec3::Zero(), Vec3(0, 0, -0.3), still, rho),
              rho * gravity * 0.3, 1e-9);
  // phi = 0 in a uniform stream, also while the frame accelerates: the split
  // cancels the dynamic terms and p = p_a on z = 0.
  const auto acc = boat_frame(1.0, 0.5);
  const Vec3 x(2.0, 0.1, 0.0);
  EXPECT_NEAR(pressure_bernoulli(0, Vec3::Zero(), Vec3::Zero(), x, acc, rho), 0.0, 1e-9);
  // Dynamic free-surface condition with w = 0 and mu = 0 gives p = p_a.
  FsPoint q;
  q.x = Vec3(0.2, 0.1, 0.01);
  q.grad_phi = Vec3(0.05, -0.02, 0.01);
  const double vphi = v_phi(q, acc, 0.0);
  EXPECT_NEAR(pressure_bernoulli(vphi, q.grad_phi, q.w, q.x, acc, rho), 0.0, 1e-10);
}

TEST(Pressure, BuoyancyOfSubmergedCube) {
  const double edge = 0.5;
  const auto mesh = make_cube_mesh(4, edge, Vec3(-0.25, -0.25, -1.0), false);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto x = dof_positions(mesh, dofs);
  std::vector<std::size_t> all(dofs.panel_dofs.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const double rho = 1000;
  const auto f = boat_frame(0, 0);
  const Vec3 F = integrate_hull_force(dofs, x, all,
                                      [&](std::size_t, const PanelGeometry& g, const std::array<double, 4>&) {
                                        return pressure_bernoulli(0, Vec3::Zero(), Vec3::Zero(),
                                                                  g.point, f, rho);
                                      });
  const double expect = rho * gravity * edge * edge * edge;
  EXPECT_LT(std::abs(F.z() - expect) / expect, 5e-3);
  EXPECT_LT(std::abs(F.x()) + std::abs(F.y()), 1e-9 * expect);
  // Zero gauge pressure gives zero force; doubling doubles.
  EXPECT_EQ(integrate_hull_force(dofs, x, all, VectorXd::Zero(dofs.n_dofs)).norm(), 0.0);
  VectorXd p(dofs.n_dofs);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) p[i] = -rho * gravity * x[i].z();
  const Vec3 F1 = integrate_hull_force(dofs, x, all, p);
  const Vec3 F2 = integrate_hull_force(dofs, x, all, VectorXd(2.0 * p));
  EXPECT_NEAR((F2 - 2.0 * F1).norm(), 0.0, 1e-9);
  EXPECT_LT(std::abs(F1.z() - expect) / expect, 5e-3);
}
