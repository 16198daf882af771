#include "wavebem/free_surface.hpp"

#include <cmath>

#include "wavebem/quadrature.hpp"

namespace wavebem {

double beach_mu(double x, const BeachParams& beach) {
  const double s = std::max(0.0, x - beach.x_d) / beach.length;
  return beach.nu * s * s;
}

FrameKinematics boat_frame(double speed, double acceleration) {
  FrameKinematics f;
  f.v_boat = Vec3(speed, 0, 0);
  f.v_sys = -f.v_boat;
  f.v_stream = Vec3::Zero();
  f.v_inf = f.v_stream - f.v_sys;
  // The a_sys.x part of dPhi/dt cancels the frame body force a_sys.x, so
  // only the stream acceleration (zero here) is left.
  f.a_sys = Vec3(-acceleration, 0, 0);
  f.a_inf = Vec3::Zero();
  return f;
}

Vec3 total_velocity(const Vec3& grad_s_phi, double phin, const Vec3& n, const FrameKinematics& f) {
  return f.v_inf + grad_s_phi + phin * n;
}

Vec3 eta_gradient(const Vec3& n) { return Vec3(-n.x() / n.z(), -n.y() / n.z(), 0.0); }

double v_phi(const FsPoint& p, const FrameKinematics& f, double mu) {
  const Vec3 v = f.v_inf + p.grad_phi;
  return (p.w - v).dot(p.grad_phi) - f.g * p.x.z() + f.a_inf.dot(p.x) +
         0.5 * p.grad_phi.squaredNorm() - mu * p.phin;
}

double v_eta(const FsPoint& p, const FrameKinematics& f) {
  const Vec3 v = f.v_inf + p.grad_phi;
  return (p.w - v).dot(p.grad_eta) + v.z();
}

Vec3 supg_direction(const Vec3& v, const Vec3& w, const SupgParams& supg, double h_elem) {
  const Vec3 r = v - w;
  const double s = r.norm();
  if (!supg.enabled || s < supg.cutoff) return Vec3::Zero();
  return (0.5 * supg.c * h_elem / s) * r;
}

SupgProjection assemble_supg_projection(const DofHandler& dofs, const std::vector<Vec3>& positions,
                                        const std::vector<std::size_t>& panels,
                                        const SupgEvaluator& eval, int order) {
  const auto rule = gauss_tensor(order);
  SupgProjection out;
  out.b_phi = VectorXd::Zero(dofs.n_dofs);
  out.b_eta = VectorXd::Zero(dofs.n_dofs);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(panels.size() * 16);
  for (auto k : panels) {
    const auto x = dofs.corners(k, positions);
    const auto& pd = dofs.panel_dofs[k];
    double mk[4][4] = {};
    for (const auto& q : rule) {
      const auto g = panel_geometry(x, q.u, q.v, long(k));
      const auto n = shape_values(q.u, q.v);
      const auto grad = surface_gradient_basis(g, q.u, q.v);
      const auto data = eval(k, g, n, grad);
      const double jw = g.jacobian * q.w;
      for (int i = 0; i < 4; ++i) {
        const double test = (n[i] + data.d.dot(grad[i])) * jw;
        out.b_phi[pd[i]] += data.v_phi * test;
        out.b_eta[pd[i]] += data.v_eta * test;
        for (int j = 0; j < 4; ++j) mk[i][j] += n[j] * test;
      }
    }
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) trip.emplace_back(pd[i], pd[j], mk[i][j]);
  }
  out.M.resize(dofs.n_dofs, dofs.n_dofs);
  out.M.setFromTriplets(trip.begin(), trip.end());
  return out;
}

double energy_absorption_rate(const DofHandler& dofs, const std::vector<Vec3>& positions,
                              const std::vector<std::size_t>& panels, const VectorXd& phin,
                              const BeachParams& beach, int order) {
  const auto rule = gauss_tensor(order);
  double rate = 0.0;
  for (auto k : panels) {
    const auto x = dofs.corners(k, positions);
    const auto& pd = dofs.panel_dofs[k];
    for (const auto& q : rule) {
      const auto g = panel_geometry(x, q.u, q.v, long(k));
      const auto n = shape_values(q.u, q.v);
      double pn = 0.0;
      for (int l = 0; l < 4; ++l) pn += n[l] * phin[pd[l]];
      rate += beach_mu(g.point.x(), beach) * pn * pn * g.jacobian * q.w;
    }
  }
  return rate;
}

double pressure_bernoulli(double dphi_ale, const Vec3& grad_phi, const Vec3& w, const Vec3& x,
                          const FrameKinematics& f, double rho) {
  const double dphi_dt = dphi_ale - w.dot(grad_phi);
  return -rho * (dphi_dt + f.v_inf.dot(grad_phi) + 0.5 * grad_phi.squaredNorm() + f.g * x.z() -
                 f.a_inf.dot(x));
}

Vec3 integrate_hull_force(const DofHandler& dofs, const std::vector<Vec3>& positions,
                          const std::vector<std::size_t>& panels, const PressureEvaluator& pressure,
                          int order) {
  const auto rule = gauss_tensor(order);
  Vec3 f = Vec3::Zero();
  for (auto k : panels) {
    const auto x = dofs.corners(k, positions);
    for (const auto& q : rule) {
      const auto g = panel_geometry(x, q.u, q.v, long(k));
      f += pressure(k, g, shape_values(q.u, q.v)) * g.jacobian * q.w * g.normal;
    }
  }
  return f;
}

Vec3 integrate_hull_force(const DofHandler& dofs, const std::vector<Vec3>& positions,
                          const std::vector<std::size_t>& panels, const VectorXd& nodal_pressure,
                          int order) {
  return integrate_hull_force(
      dofs, positions, panels,
      [&](std::size_t k, const PanelGeometry&, const std::array<double, 4>& n) {
        double p = 0.0;
        for (int l = 0; l < 4; ++l) p += n[l] * nodal_pressure[dofs.panel_dofs[k][l]];
        return p;
      },
      order);
}

std::vector<std::size_t> panels_in_region(const DofHandler& dofs, Region r) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < dofs.panel_dofs.size(); ++k)
    if (dofs.dof_region[dofs.panel_dofs[k][0]] == r) out.push_back(k);
  return out;
}

}  // namespace wavebem
