#pragma once

#include <limits>
#include <string>
#include <vector>

#include "wavebem/free_surface.hpp"
#include "wavebem/quadrature.hpp"
#include "wavebem/surface_mesh.hpp"

namespace wavebem {

struct WigleyHull {
  double L = 2.5;
  double B = 0.25;
  double T = 0.15625;

  // (B/2)[1 - (2x/L)^2][1 - (z/T)^2] without range checks.
  double half_beam(double x, double z) const;
  // d(half_beam)/dx, d(half_beam)/dz.
  Vec2 half_beam_gradient(double x, double z) const;
  // Signed residual |y| - half_beam(x, z) for the side of sign(y).
  double residual(const Vec3& p, double side) const;
  // Newton iteration along the residual gradient until |residual| <= tol.
  // `side` is +1 (port, y > 0) or -1. Throws GeometryError after 50 iterations.
  Vec3 project(const Vec3& p, double side, double tol = 1e-10) const;
  // Outward hull normal (pointing away from the hull into the water) at p.
  Vec3 water_normal(const Vec3& p, double side) const;
};

// Checked version: |x| <= L/2, -T <= z <= 0.
double wigley_surface(double x, double z, const WigleyHull& hull);

double froude_to_speed(double fr, double L);
double speed_to_froude(double v, double L);

struct FrameMotion {
  double speed = 0.0;
  double acceleration = 0.0;
};
FrameMotion velocity_ramp(double t, double v_target, double t_ramp);

inline constexpr double unset = std::numeric_limits<double>::quiet_NaN();

// Lengths left unset default to multiples of the hull length in finalize().
struct BasinParams {
  double inflow = unset;      // bow to inflow wall (m), default 1 L
  double outflow = unset;     // stern to outflow wall (m), default 3 L
  double half_width = unset;  // default 1.5 L
  double depth = unset;       // default 1 L
  int nx_hull = 16;         // waterline panels along the hull
  int nz_hull = 3;          // hull panels over the draft
  int nx_inflow = 4;
  int nx_outflow = 12;
  int ny = 6;               // free-surface panels from hull to side wall
  int nz_wall = 2;          // wall panels over the depth
  double y_growth = 1.6;    // geometric growth of transverse spacing
  double cosine_clustering = 0.6;  // 0 uniform, 1 full cosine along the hull
};

struct AdaptParams {
  bool enabled = true;
  int interval = 50;
  double f_refine = 0.3;
  double f_coarsen = 0.1;
  double h_min = unset;  // default L / 200
  std::size_t max_dofs = 8000;
};

struct SolverParams {
  double rtol = 1e-6;
  double atol = 1e-8;
  int max_order = 5;
  double h_init = 1e-3;
  double h_min = 1e-8;
  double h_max = 0.05;
  int newton_max_iterations = 4;
  int gmres_restart = 100;
  double gmres_tol = 1e-10;
  double t_end = 6.0;
  double steady_threshold = 1e-4;  // times V_inf
  double steady_window = 1.0;
  double wall_clock_limit = 1800.0;
  double rho = 1000.0;
  // Panel quadrature of the time-dependent runs; coarser than the
  // verification default, entries agree to about 1e-5.
  QuadratureRule bem{3, 6, 8, 2.0, 1.0};
};

struct OutputParams {
  std::string dir = "out";
  int vtk_interval = 0;         // accepted steps between VTK files, 0 = final only
  int checkpoint_interval = 0;  // accepted steps between checkpoints, 0 = final only
};

struct Scenario {
  WigleyHull hull;
  double froude = 0.25;
  double speed = 0.0;  // derived from froude when not given
  double ramp_time = 2.0;
  BasinParams basin;
  // Unset beach values default to x_d = stern + outflow / 2, L_d = outflow / 2
  // and nu = V_inf.
  BeachParams beach{unset, unset, unset};
  SupgParams supg;
  AdaptParams adapt;
  SolverParams solver;
  OutputParams output;

  double target_speed() const;
  // Applies defaults that depend on other values (speed, beach, h_min).
  void finalize();
};

Scenario default_scenario();
struct ConfigOverride {
  std::string section, key, value;
};

// INI text with sections [hull] [basin] [beach] [solver] [adapt] [output].
// Overrides are applied after the file, before derived defaults.
Scenario parse_scenario(const std::string& text, const std::vector<ConfigOverride>& overrides = {});
Scenario load_scenario(const std::string& path, const std::vector<ConfigOverride>& overrides = {});
// Deterministic INI rendering of every effective value.
std::string effective_config(const Scenario& s);

// Patch ids of the basin mesh.
enum BasinPatch : int {
  patch_free_surface = 0,
  patch_hull_port = 1,
  patch_hull_starboard = 2,
  patch_bottom = 3,
  patch_inflow = 4,
  patch_outflow = 5,
  patch_side_port = 6,
  patch_side_starboard = 7,
};

struct InitialDomain {
  ReferenceMesh mesh;
  // Waterline nodes (free surface and hull) ordered bow to stern per side.
  std::vector<std::size_t> waterline_port;
  std::vector<std::size_t> waterline_starboard;
};

InitialDomain build_initial_domain(const WigleyHull& hull, const Scenario& s);

}  // namespace wavebem
