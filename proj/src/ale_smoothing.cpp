#include "wavebem/ale_smoothing.hpp"

#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "wavebem/quadrature.hpp"

namespace wavebem {

Vec3 waterline_velocity(const Vec3& v, const Vec3& n_w, const Vec3& n_b) {
  const Vec3 a = n_w.normalized(), b = n_b.normalized();
  const Vec3 t = b.cross(a);
  if (t.norm() < std::sin(5.0 * pi / 180.0))
    throw GeometryError("waterline normals closer than 5 degrees");
  Eigen::Matrix3d M;
  M.row(0) = a.transpose();
  M.row(1) = b.transpose();
  M.row(2) = t.normalized().transpose();
  return M.partialPivLu().solve(Vec3(v.dot(a), 0.0, 0.0));
}

Wireframe classify_wireframe(const DofHandler& dofs, std::size_t n_nodes) {
  Wireframe w;
  w.kind.assign(n_nodes, NodeKind::interior);
  w.fs_dof.assign(n_nodes, dofs.n_dofs);
  w.other_dof.assign(n_nodes, dofs.n_dofs);
  for (std::size_t n = 0; n < n_nodes; ++n) {
    const auto& nd = dofs.node_dofs[n];
    if (nd.size() <= 1) continue;
    int fs = 0, hull = 0, wall = 0, bottom = 0;
    for (auto d : nd) {
      switch (dofs.dof_region[d]) {
        case Region::free_surface:
          ++fs;
          w.fs_dof[n] = d;
          break;
        case Region::hull:
          ++hull;
          if (w.other_dof[n] == dofs.n_dofs) w.other_dof[n] = d;
          break;
        case Region::far_field:
          ++wall;
          if (w.other_dof[n] == dofs.n_dofs) w.other_dof[n] = d;
          break;
        case Region::bottom:
          ++bottom;
          break;
      }
    }
    NodeKind k = NodeKind::fixed;
    if (fs == 1 && wall == 0 && bottom == 0 && hull == 1) k = NodeKind::waterline;
    if (fs == 1 && wall == 0 && bottom == 0 && hull == 2) k = NodeKind::stem_top;
    if (fs == 1 && hull == 0 && bottom == 0 && wall == 1) k = NodeKind::fs_wall;
    if (fs == 1 && hull == 0 && bottom == 0 && wall >= 2) k = NodeKind::fs_corner;
    w.kind[n] = k;
    if (k == NodeKind::waterline || k == NodeKind::stem_top) w.waterline.push_back(n);
    if (k == NodeKind::fs_wall || k == NodeKind::fs_corner) w.fs_wall.push_back(n);
    if (bottom > 0 && wall > 0 && fs == 0) w.bottom_wall.push_back(n);
  }
  return w;
}

Eigen::SparseMatrix<double> laplace_beltrami_matrix(const DofHandler& dofs,
                                                    const std::vector<Vec3>& reference, int order) {
  const auto rule = gauss_tensor(order);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(16 * dofs.panel_dofs.size());
  for (std::size_t k = 0; k < dofs.panel_dofs.size(); ++k) {
    const auto x = dofs.corners(k, reference);
    double ke[4][4] = {};
    for (const auto& q : rule) {
      const auto g = panel_geometry(x, q.u, q.v, long(k));
      const auto grad = surface_gradient_basis(g, q.u, q.v);
      const double jw = g.jacobian * q.w;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) ke[i][j] += grad[i].dot(grad[j]) * jw;
    }
    const auto& pd = dofs.panel_dofs[k];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) trip.emplace_back(pd[i], pd[j], ke[i][j]);
  }
  Eigen::SparseMatrix<double> K(dofs.n_dofs, dofs.n_dofs);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

std::vector<char> wireframe_mask(const DofHandler& dofs) {
  std::vector<char> m(dofs.n_dofs, 0);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) m[i] = dofs.duplicated(i) ? 1 : 0;
  return m;
}

SmoothingSystem assemble_laplace_beltrami(const DofHandler& dofs, const std::vector<Vec3>& reference,
                                          const std::vector<char>& dirichlet) {
  const std::size_t n = dofs.n_dofs;
  if (dirichlet.size() != n) throw GeometryError("Dirichlet mask size does not match DOF count");
  SmoothingSystem sys;
  sys.K = laplace_beltrami_matrix(dofs, reference);
  sys.dirichlet = dirichlet;
  std::vector<std::size_t> column(n, n);
  for (std::size_t i = 0; i < n; ++i)
    if (!dofs.constrained[i] && !dirichlet[i]) {
      column[i] = sys.free.size();
      sys.free.push_back(i);
    }
  for (std::size_t i = 0; i < n; ++i)
    if (!dofs.constrained[i] && dirichlet[i]) {
      column[i] = sys.free.size() + sys.fixed.size();
      sys.fixed.push_back(i);
    }
  const std::size_t nf = sys.free.size(), nb = sys.fixed.size();

  // Expansion of every DOF over the independent ones.
  std::vector<std::map<std::size_t, double>> expansion(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!dofs.constrained[i]) expansion[i][column[i]] = 1.0;
  for (auto c : constraint_order(dofs.constraints)) {
    const auto& con = dofs.constraints[c];
    std::map<std::size_t, double> e;
    for (const auto& [m, w] : con.masters)
      for (const auto& [col, v] : expansion[m]) e[col] += w * v;
    expansion[con.dof] = std::move(e);
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [col, v] : expansion[i]) trip.emplace_back(i, col, v);
  sys.E.resize(n, nf + nb);
  sys.E.setFromTriplets(trip.begin(), trip.end());
  const Eigen::SparseMatrix<double> Kc = Eigen::SparseMatrix<double>(sys.E.transpose()) * sys.K * sys.E;
  sys.A = Kc.topLeftCorner(nf, nf);
  sys.B = Kc.topRightCorner(nf, nb);

  // Every free component must reach a Dirichlet DOF.
  std::vector<char> reached(nf, 0);
  std::vector<std::size_t> stack;
  const Eigen::SparseMatrix<double, Eigen::RowMajor> Br(sys.B);
  for (std::size_t i = 0; i < nf; ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Br, Eigen::Index(i)); it; ++it)
      if (it.value() != 0.0 && !reached[i]) {
        reached[i] = 1;
        stack.push_back(i);
      }
  const Eigen::SparseMatrix<double, Eigen::RowMajor> Ar(sys.A);
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ar, Eigen::Index(i)); it; ++it)
      if (it.value() != 0.0 && !reached[std::size_t(it.col())]) {
        reached[std::size_t(it.col())] = 1;
        stack.push_back(std::size_t(it.col()));
      }
  }
  for (std::size_t i = 0; i < nf; ++i)
    if (!reached[i])
      throw GeometryError("smoothing problem has a component without Dirichlet data (DOF " +
                          std::to_string(sys.free[i]) + ")");
  sys.solver = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
  if (nf > 0) {
    sys.solver->compute(sys.A);
    if (sys.solver->info() != Eigen::Success) throw SolverError("smoothing factorization failed");
  }
  return sys;
}

std::vector<Vec3> solve_smoothing_displacement(const SmoothingSystem& sys,
                                               const std::vector<Vec3>& boundary_displacement) {
  const std::size_t nf = sys.free.size(), nb = sys.fixed.size();
  const std::size_t n = std::size_t(sys.E.rows());
  if (boundary_displacement.size() != n) throw GeometryError("displacement size mismatch");
  std::vector<Vec3> out(n, Vec3::Zero());
  for (int c = 0; c < 3; ++c) {
    VectorXd ind(nf + nb);
    VectorXd b(nb);
    for (std::size_t j = 0; j < nb; ++j) b[j] = boundary_displacement[sys.fixed[j]][c];
    if (nf > 0) {
      const VectorXd rhs = -(sys.B * b);
      ind.head(nf) = rhs.isZero(0.0) ? VectorXd::Zero(nf) : VectorXd(sys.solver->solve(rhs));
    }
    ind.tail(nb) = b;
    const VectorXd full = sys.E * ind;
    for (std::size_t i = 0; i < n; ++i) out[i][c] = full[i];
  }
  return out;
}

std::vector<Vec3> solve_smoothing(const SmoothingSystem& sys, const std::vector<Vec3>& reference,
                                  const std::vector<Vec3>& boundary) {
  std::vector<Vec3> d(reference.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = boundary[i] - reference[i];
  auto g = solve_smoothing_displacement(sys, d);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += reference[i];
  return g;
}

HullProjection hull_projection(const DofHandler& dofs, const std::vector<Vec3>& reference,
                               const WigleyHull& hull) {
  HullProjection p;
  p.hull = hull;
  p.side.assign(dofs.n_dofs, 0.0);
  const auto normals = dof_normals(dofs, reference);
  // Normals point out of the fluid, into the hull.
  for (std::size_t i = 0; i < dofs.n_dofs; ++i)
    if (dofs.dof_region[i] == Region::hull) p.side[i] = normals[i].y() < 0 ? 1.0 : -1.0;
  return p;
}

std::vector<Vec3> apply_projection(const DofHandler& dofs, const std::vector<Vec3>& g,
                                   const VectorXd& eta, const HullProjection& hull) {
  std::vector<Vec3> p(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    switch (dofs.dof_region[i]) {
      case Region::hull:
        p[i] = hull.hull.project(g[i], hull.side[i]);
        break;
      case Region::free_surface:
        p[i] = Vec3(g[i].x(), g[i].y(), eta[Eigen::Index(i)]);
        break;
      default:
        p[i] = g[i];
    }
  }
  return p;
}

}  // namespace wavebem
