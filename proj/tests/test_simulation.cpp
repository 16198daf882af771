#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "wavebem/simulation.hpp"

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
  s.solver.h_init = 0.01;
  s.adapt.enabled = false;
  s.finalize();
  return s;
}

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("wavebem_test_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST(RunLoop, LegalTransitions) {
  using P = RunPhase;
  EXPECT_TRUE(legal_transition(P::initialize, P::integrate));
  EXPECT_TRUE(legal_transition(P::integrate, P::adapt));
  EXPECT_TRUE(legal_transition(P::adapt, P::integrate));
  EXPECT_TRUE(legal_transition(P::integrate, P::finalize));
  EXPECT_FALSE(legal_transition(P::initialize, P::adapt));
  EXPECT_FALSE(legal_transition(P::adapt, P::finalize));
  EXPECT_FALSE(legal_transition(P::finalize, P::integrate));
  EXPECT_FALSE(legal_transition(P::initialize, P::finalize));
}

TEST(RunLoop, SteadyDetectorIsMonotoneInThreshold) {
  auto first_steady = [](double threshold) {
    SteadyDetector d(1.0, threshold);
    for (int k = 0; k <= 100; ++k) {
      const double t = 0.1 * k;
      d.add(t, std::exp(-t));
      if (d.steady(0.0)) return t;
    }
    return 1e9;
  };
  double last = 1e9;
  for (double th : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    const double t = first_steady(th);
    EXPECT_LE(t, last);
    last = t;
  }
  EXPECT_NEAR(first_steady(1e-2), 5.7, 1e-9);  // exp(-(t - 1)) < 1e-2 over the window
  SteadyDetector d(1.0, 1.0);
  d.add(0.5, 0.0);
  EXPECT_FALSE(d.steady(0.0));  // window not yet covered
}

TEST(RunLoop, ExitCodes) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(SolverError("x")), 3);
  EXPECT_EQ(exit_code_for(RecoverableError("x")), 3);
  EXPECT_EQ(exit_code_for(GeometryError("x")), 4);
  EXPECT_EQ(exit_code_for(IoError("x")), 1);
}

TEST(Simulation, StillWaterStaysAtRestWithHydrostaticForce) {
  RunOptions o;
  o.write_outputs = false;
  o.max_steps = 10;
  Simulation sim(small_scenario(0.0), o);
  const auto s = sim.run();
  EXPECT_EQ(s.accepted_steps, 10u);
  EXPECT_EQ(s.reason, "step_limit");
  auto& dae = sim.dae();
  EXPECT_LE(dae.eta(sim.y()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(dae.phi(sim.y()).cwiseAbs().maxCoeff(), 1e-10);
  // Force of the hydrostatic pressure -rho g z on the same panels.
  const auto x = dae.positions(sim.y());
  VectorXd p(Eigen::Index(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) p[Eigen::Index(i)] = -1000.0 * gravity * x[i].z();
  const Vec3 hydro = integrate_hull_force(dae.dofs(), x, dae.hull_panels(), p);
  const Vec3 f = dae.hull_force(sim.t(), sim.y(), sim.yp());
  EXPECT_LE((f - hydro).norm(), 1e-6 * hydro.norm());
  const auto& h = sim.scenario().hull;
  const double volume = 4.0 * h.B * h.L * h.T / 9.0;
  // Chordal panels on the 8 x 2 hull mesh cut about 8% of the volume.
  EXPECT_NEAR(f.z(), 1000.0 * gravity * volume, 0.1 * 1000.0 * gravity * volume);
  EXPECT_LE(std::abs(f.x()) + std::abs(f.y()), 1e-6 * std::abs(f.z()));
}

TEST(Simulation, WritesOutputsAndResumesBitwiseMidRamp) {
  Scenario sc = small_scenario(0.25);
  sc.output.checkpoint_interval = 3;
  sc.output.vtk_interval = 4;

  RunOptions full;
  full.out_dir = temp_dir("full");
  full.max_steps = 8;
  Simulation a(sc, full);
  const auto sa = a.run();
  ASSERT_EQ(sa.accepted_steps, 8u);
  ASSERT_LT(a.t(), sc.ramp_time);
  for (const char* f : {"config.ini", "steps.csv", "diagnostics.csv", "force.csv", "adapt.csv", "profile.csv",
                        "checkpoint.bin", "fields_000000.vtk", "fields_000001.vtk"})
    EXPECT_TRUE(std::filesystem::exists(full.out_dir + "/" + f)) << f;
  EXPECT_EQ(slurp(full.out_dir + "/config.ini"), effective_config(a.scenario()));
  EXPECT_GE(sa.min_beach_rate, 0.0);

  RunOptions first;
  first.out_dir = temp_dir("first");
  first.max_steps = 3;
  Simulation b(sc, first);
  b.run();
  const auto ckpt = load_checkpoint(first.out_dir + "/checkpoint.bin");

  RunOptions second;
  second.out_dir = first.out_dir;
  second.max_steps = 5;
  Simulation c(ckpt, {}, second);
  // Saving straight after the restart reproduces the file.
  std::ostringstream again;
  save_checkpoint(again, c.checkpoint());
  EXPECT_EQ(again.str(), slurp(first.out_dir + "/checkpoint.bin"));
  const double t_resume = c.t();
  EXPECT_EQ(c.dae().frame(t_resume).a_sys.x(), -sc.target_speed() / sc.ramp_time);
  c.run();
  EXPECT_EQ(c.accepted_steps(), 8u);
  EXPECT_EQ(c.t(), a.t());
  EXPECT_EQ((c.y() - a.y()).cwiseAbs().maxCoeff(), 0.0);

  // The profile has both sides, bow to stern, and agrees across the plane.
  const auto [port, starboard] = a.waterline_profiles();
  ASSERT_EQ(port.size(), starboard.size());
  ASSERT_GT(port.size(), 4u);
  for (std::size_t i = 0; i < port.size(); ++i) {
    EXPECT_NEAR(port[i].x_over_l, starboard[i].x_over_l, 1e-12);
    EXPECT_NEAR(port[i].eta_prime, starboard[i].eta_prime, 1e-8);
    if (i > 0) EXPECT_GT(port[i].x_over_l, port[i - 1].x_over_l);
  }
  EXPECT_NEAR(port.front().x_over_l, -0.5, 1e-12);
  EXPECT_NEAR(port.back().x_over_l, 0.5, 1e-12);
}

TEST(Simulation, AdaptWithoutFlagsKeepsTheTrajectory) {
  Scenario sc = small_scenario(0.25);
  sc.adapt.f_refine = 0.0;
  sc.adapt.f_coarsen = 0.0;
  sc.solver.t_end = 0.05;
  RunOptions o;
  o.write_outputs = false;
  Simulation a(sc, o), b(sc, o);
  for (int k = 0; k < 4; ++k) {
    a.step();
    b.step();
  }
  const std::size_t n = b.dae().dofs().n_dofs;
  b.adapt();
  EXPECT_EQ(b.dae().dofs().n_dofs, n);
  EXPECT_EQ(b.integrator().order(), 1);
  // Only the consistency solve touches the state.
  EXPECT_LE((b.y() - a.y()).cwiseAbs().maxCoeff(), 1e-8);
  a.run();
  b.run();
  ASSERT_EQ(b.t(), a.t());
  const double scale = a.y().cwiseAbs().maxCoeff();
  const auto& p = a.integrator().params();
  EXPECT_LE((b.y() - a.y()).cwiseAbs().maxCoeff(), 10.0 * (p.rtol * scale + p.atol));
}

TEST(Simulation, AdaptationRefinesAndKeepsRunning) {
  Scenario sc = small_scenario(0.25);
  sc.adapt.enabled = true;
  sc.adapt.interval = 3;
  RunOptions o;
  o.write_outputs = false;
  o.max_steps = 7;
  Simulation sim(sc, o);
  const std::size_t before = sim.dae().dofs().n_dofs;
  const auto s = sim.run();
  EXPECT_EQ(s.adapt_cycles, 2u);
  EXPECT_GT(s.n_dofs, before);
  EXPECT_TRUE(sim.y().allFinite());
  EXPECT_LE(sim.forest().max_level_jump(), 1);
  const auto& b = sim.dae().bem(sim.y());
  EXPECT_LE((b.alpha + b.N * VectorXd::Ones(b.alpha.size())).cwiseAbs().maxCoeff(), 1e-14);
}
