#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "wavebem/ship_wave_dae.hpp"

using namespace wavebem;

namespace {

Scenario small_scenario(double froude) {
  Scenario s = default_scenario();
  s.froude = froude;
  s.basin.nx_hull = 8;
  s.basin.nz_hull = 2;
  s.basin.nx_inflow = 2;
  s.basin.nx_outflow = 4;
  s.basin.ny = 3;
  s.basin.nz_wall = 1;
  s.ramp_time = 1.0;
  s.finalize();
  return s;
}

struct Fixture {
  explicit Fixture(double froude) : scenario(small_scenario(froude)),
        dae(build_initial_domain(scenario.hull, scenario).mesh, scenario) {}
  Scenario scenario;
  ShipWaveDae dae;
};

double rigid_mode_defect(const BemSystem& b) {
  return (b.alpha + b.N * VectorXd::Ones(b.alpha.size())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(ShipWaveDae, StillWaterResidualIsExactlyZero) {
  Fixture fx(0.0);
  auto& dae = fx.dae;
  const VectorXd y = dae.initial_state();
  const VectorXd yp = VectorXd::Zero(y.size());
  VectorXd r;
  for (double t : {0.0, 0.5, 3.0}) {
    dae.residual(t, y, yp, r);
    EXPECT_EQ(r.cwiseAbs().maxCoeff(), 0.0) << "t = " << t;
  }
  EXPECT_LE(rigid_mode_defect(dae.bem(y)), 1e-14);
}

TEST(ShipWaveDae, FlagsAndLayout) {
  Fixture fx(0.25);
  const auto& dae = fx.dae;
  const auto diff = dae.differential();
  ASSERT_EQ(diff.size(), dae.size());
  std::size_t n_phi = 0, n_eta = 0, n_wl = 0;
  for (std::size_t i = 0; i < dae.dofs().n_dofs; ++i) {
    const bool fs = dae.dofs().dof_region[i] == Region::free_surface;
    n_phi += diff[dae.phi_slot(i)];
    n_eta += diff[dae.x_slot(i, 2)];
    n_wl += diff[dae.x_slot(i, 0)];
    EXPECT_EQ(diff[dae.phin_slot(i)], 0);
    EXPECT_EQ(diff[dae.x_slot(i, 1)], 0);
    if (!fs) EXPECT_EQ(diff[dae.phi_slot(i)], 0);
  }
  std::size_t n_fs = 0;
  for (auto r : dae.dofs().dof_region) n_fs += r == Region::free_surface;
  EXPECT_EQ(n_phi, n_fs);
  EXPECT_EQ(n_eta, n_fs);
  // Waterline nodes except the two stem tops per hull.
  EXPECT_EQ(n_wl, dae.wireframe().waterline.size() - 2);
}

TEST(ShipWaveDae, PerturbedPotentialTouchesOnlyBemAndSupgRows) {
  Fixture fx(0.0);
  auto& dae = fx.dae;
  const auto& dofs = dae.dofs();
  // A free-surface DOF away from the wireframe.
  std::size_t probe = dofs.n_dofs;
  for (std::size_t i = 0; i < dofs.n_dofs && probe == dofs.n_dofs; ++i)
    if (dofs.dof_region[i] == Region::free_surface && !dofs.duplicated(i)) probe = i;
  ASSERT_LT(probe, dofs.n_dofs);
  VectorXd y = dae.initial_state();
  const VectorXd yp = VectorXd::Zero(y.size());
  VectorXd r0, r1;
  dae.residual(0.0, y, yp, r0);
  y[Eigen::Index(dae.phi_slot(probe))] += 1e-3;
  dae.residual(0.0, y, yp, r1);
  std::vector<char> neighbour(dofs.n_dofs, 0);
  for (const auto& pd : dofs.panel_dofs)
    if (std::find(pd.begin(), pd.end(), probe) != pd.end())
      for (auto d : pd) neighbour[d] = 1;
  std::size_t changed_bie = 0;
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) {
    const bool fs = dofs.dof_region[i] == Region::free_surface;
    const std::size_t bie_slot = fs ? dae.phin_slot(i) : dae.phi_slot(i);
    changed_bie += r1[Eigen::Index(bie_slot)] != r0[Eigen::Index(bie_slot)];
    for (int c = 0; c < 3; ++c)
      if (!(fs && c == 2 && neighbour[i])) {
        EXPECT_EQ(r1[Eigen::Index(dae.x_slot(i, c))], r0[Eigen::Index(dae.x_slot(i, c))]) << i;
      }
    if (fs && !neighbour[i]) {
      EXPECT_EQ(r1[Eigen::Index(dae.phi_slot(i))], r0[Eigen::Index(dae.phi_slot(i))]) << i;
    }
    if (!fs) EXPECT_EQ(r1[Eigen::Index(dae.phin_slot(i))], r0[Eigen::Index(dae.phin_slot(i))]) << i;
  }
  // Coplanar free-surface panels have no double-layer coupling, so only the
  // rows collocated off the free surface see the change.
  EXPECT_GT(changed_bie, 0u);
}

TEST(ShipWaveDae, StillWaterStaysAtRestOverTenSteps) {
  Fixture fx(0.0);
  auto& dae = fx.dae;
  BdfParams p;
  p.h_init = 0.01;
  BdfIntegrator bdf(dae, p);
  VectorXd y = dae.initial_state(), yp = VectorXd::Zero(y.size());
  const VectorXd y0 = y;
  EXPECT_EQ(bdf.consistent_initial_conditions(0.0, y, yp), 0);
  bdf.initialize(0.0, y, yp);
  for (int k = 0; k < 10; ++k) bdf.step(1e9);
  EXPECT_EQ(bdf.history().accepted_steps, 10u);
  // y' from the BDF sums is zero up to rounding, hence not bitwise.
  EXPECT_LE((bdf.y() - y0).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(rigid_mode_defect(dae.bem(bdf.y())), 1e-14);
}

TEST(ShipWaveDae, RampStartIsSymmetricAndFinite) {
  Fixture fx(0.25);
  auto& dae = fx.dae;
  BdfParams p;
  p.h_init = 0.01;
  p.h_max = 0.05;
  BdfIntegrator bdf(dae, p);
  VectorXd y = dae.initial_state(), yp = VectorXd::Zero(y.size());
  bdf.consistent_initial_conditions(0.0, y, yp);
  bdf.initialize(0.0, y, yp);
  int steps = 0, newton = 0, linear = 0;
  bdf.on_step = [&](const StepRecord& r) {
    ++steps;
    newton += r.newton_iterations;
    linear += r.linear_iterations;
  };
  bdf.integrate_to(0.3);
  std::printf("steps %d newton %d linear %d assemblies %zu rejected %zu h %g q %d\n", steps, newton,
              linear, dae.bem_assemblies(), bdf.history().rejected_steps, bdf.h(), bdf.order());
  const VectorXd& yn = bdf.y();
  ASSERT_TRUE(yn.allFinite());
  EXPECT_LE(rigid_mode_defect(dae.bem(yn)), 1e-14);
  // Algebraic rows hold at the accepted step.
  VectorXd r;
  dae.residual(bdf.t(), yn, bdf.yp(), r);
  EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-6);

  // Mirror symmetry of the free surface: eta(x, y) = eta(x, -y).
  const auto x = dae.positions(yn);
  const auto eta = dae.eta(yn);
  const auto& dofs = dae.dofs();
  double max_eta = 0.0, asym = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) {
    if (dofs.dof_region[i] != Region::free_surface || x[i].y() <= 1e-9) continue;
    for (std::size_t j = 0; j < dofs.n_dofs; ++j)
      if (dofs.dof_region[j] == Region::free_surface &&
          (x[j] - Vec3(x[i].x(), -x[i].y(), x[j].z())).norm() < 1e-9) {
        asym = std::max(asym, std::abs(eta[Eigen::Index(i)] - eta[Eigen::Index(j)]));
        ++pairs;
      }
    max_eta = std::max(max_eta, std::abs(eta[Eigen::Index(i)]));
  }
  EXPECT_GT(pairs, 10u);
  EXPECT_GT(max_eta, 1e-5);
  EXPECT_LE(asym, 1e-8 * std::max(1.0, max_eta));
  // The hull stays on the Wigley surface.
  for (std::size_t i = 0; i < dofs.n_dofs; ++i)
    if (dofs.dof_region[i] == Region::hull && !dofs.constrained[i]) {
      const double side = x[i].y() > 0 ? 1.0 : -1.0;
      if (std::abs(x[i].y()) > 1e-12) EXPECT_LE(std::abs(fx.scenario.hull.residual(x[i], side)), 1e-9);
    }
}
