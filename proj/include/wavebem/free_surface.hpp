#pragma once

#include <functional>
#include <vector>

#include <Eigen/Sparse>

#include "wavebem/surface_mesh.hpp"

namespace wavebem {

struct BeachParams {
  double x_d = 0.0;     // beach start abscissa (m)
  double length = 1.0;  // L_d (m)
  double nu = 0.0;      // damping coefficient (m/s)
};

// nu * (max(0, x - x_d) / L_d)^2 in m/s.
double beach_mu(double x, const BeachParams& beach);

struct SupgParams {
  double c = 1.0;         // tau = c h / 2
  double cutoff = 1e-8;   // |v - w| below this gives d = 0 (m/s)
  bool enabled = true;
};

// Boat-fixed frame moving with velocity V_sys = -V_inf e_x, V_stream = 0.
struct FrameKinematics {
  Vec3 v_inf = Vec3::Zero();
  Vec3 a_inf = Vec3::Zero();  // acceleration term of the dynamic condition (a_stream)
  Vec3 a_sys = Vec3::Zero();  // frame acceleration
  Vec3 v_boat = Vec3::Zero();
  Vec3 v_sys = Vec3::Zero();
  Vec3 v_stream = Vec3::Zero();
  double g = gravity;
};

// Frame for hull speed U(t) and acceleration dU/dt along +x in the earth frame.
FrameKinematics boat_frame(double speed, double acceleration);

// v = V_inf + grad_s phi + phin n.
Vec3 total_velocity(const Vec3& grad_s_phi, double phin, const Vec3& n, const FrameKinematics& f);

// Free-surface quantities at one evaluation point.
struct FsPoint {
  Vec3 x = Vec3::Zero();          // position (z = eta)
  Vec3 w = Vec3::Zero();          // ALE node velocity
  Vec3 grad_phi = Vec3::Zero();   // full gradient
  Vec3 grad_eta = Vec3::Zero();   // horizontal, z-component 0
  double phin = 0.0;
};

// grad eta from the surface normal of the graph z = eta(x, y).
Vec3 eta_gradient(const Vec3& n);

double v_phi(const FsPoint& p, const FrameKinematics& f, double mu);
double v_eta(const FsPoint& p, const FrameKinematics& f);

Vec3 supg_direction(const Vec3& v, const Vec3& w, const SupgParams& supg, double h_elem);

struct SupgProjection {
  Eigen::SparseMatrix<double> M;  // n_dofs x n_dofs, nonzero only on free-surface rows
  VectorXd b_phi;
  VectorXd b_eta;
};

struct SupgPointData {
  Vec3 d = Vec3::Zero();
  double v_phi = 0.0;
  double v_eta = 0.0;
};

// Called per quadrature point with the panel index, geometry, basis values
// and basis surface gradients.
using SupgEvaluator = std::function<SupgPointData(
    std::size_t panel, const PanelGeometry& g, const std::array<double, 4>& shape,
    const std::array<Vec3, 4>& grad)>;

SupgProjection assemble_supg_projection(const DofHandler& dofs, const std::vector<Vec3>& positions,
                                        const std::vector<std::size_t>& panels,
                                        const SupgEvaluator& eval, int order = 3);

// Integral of mu phin^2 over the given panels (m^5/s^3).
double energy_absorption_rate(const DofHandler& dofs, const std::vector<Vec3>& positions,
                              const std::vector<std::size_t>& panels, const VectorXd& phin,
                              const BeachParams& beach, int order = 3);

// p - p_a = -rho (dphi/dt + V_inf.grad phi + |grad phi|^2/2 + g z - a_inf.x)
// with dphi/dt = dphi_ale - w.grad phi.
double pressure_bernoulli(double dphi_ale, const Vec3& grad_phi, const Vec3& w, const Vec3& x,
                          const FrameKinematics& f, double rho);

// F = integral of (p - p_a) n over the panels; `pressure` returns p - p_a at
// a quadrature point.
using PressureEvaluator = std::function<double(std::size_t panel, const PanelGeometry& g,
                                               const std::array<double, 4>& shape)>;
Vec3 integrate_hull_force(const DofHandler& dofs, const std::vector<Vec3>& positions,
                          const std::vector<std::size_t>& panels, const PressureEvaluator& pressure,
                          int order = 3);
// Same with a nodal (per DOF) pressure field interpolated bilinearly.
Vec3 integrate_hull_force(const DofHandler& dofs, const std::vector<Vec3>& positions,
                          const std::vector<std::size_t>& panels, const VectorXd& nodal_pressure,
                          int order = 3);

// Panels whose region matches.
std::vector<std::size_t> panels_in_region(const DofHandler& dofs, Region r);

}  // namespace wavebem
