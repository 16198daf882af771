#include "wavebem/laplace_bem.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Dense>

#include "wavebem/parallel.hpp"

namespace wavebem {

double green_function(const Vec3& r) {
  const double d = r.norm();
  if (!(d > 0.0)) throw GeometryError("Green function evaluated at zero separation");
  return 1.0 / (4.0 * pi * d);
}

double green_normal_gradient(const Vec3& r, const Vec3& n) {
  const double d = r.norm();
  if (!(d > 0.0)) throw GeometryError("Green function gradient evaluated at zero separation");
  return -r.dot(n) / (4.0 * pi * d * d * d);
}

namespace {

// Quadrature points of one panel stored component-wise.
struct PanelQuadrature {
  std::vector<double> px, py, pz;  // point
  std::vector<double> nx, ny, nz;  // n J w
  std::vector<double> jw;          // J w
  std::vector<double> s0, s1, s2, s3;
  std::size_t size() const { return jw.size(); }
};

PanelQuadrature panel_quadrature(const PanelCorners& x, const std::vector<QuadPoint>& rule,
                                 long panel) {
  PanelQuadrature q;
  const std::size_t m = rule.size();
  for (auto* v : {&q.px, &q.py, &q.pz, &q.nx, &q.ny, &q.nz, &q.jw, &q.s0, &q.s1, &q.s2, &q.s3})
    v->resize(m);
  const double diam = panel_diameter(x);
  for (std::size_t k = 0; k < m; ++k) {
    const double u = rule[k].u, v = rule[k].v, w = rule[k].w;
    const Vec3 point = (1 - u) * (1 - v) * x[0] + u * (1 - v) * x[1] + (1 - u) * v * x[2] + u * v * x[3];
    const Vec3 tu = (1 - v) * (x[1] - x[0]) + v * (x[3] - x[2]);
    const Vec3 tv = (1 - u) * (x[2] - x[0]) + u * (x[3] - x[1]);
    const Vec3 c = tu.cross(tv);
    const double jac = c.norm();
    if (!(jac > 1e-12 * diam * diam)) panel_geometry(x, u, v, panel);  // throws with context
    q.px[k] = point.x();
    q.py[k] = point.y();
    q.pz[k] = point.z();
    q.nx[k] = c.x() * w;
    q.ny[k] = c.y() * w;
    q.nz[k] = c.z() * w;
    q.jw[k] = jac * w;
    q.s0[k] = (1 - u) * (1 - v);
    q.s1[k] = u * (1 - v);
    q.s2[k] = (1 - u) * v;
    q.s3[k] = u * v;
  }
  return q;
}

// Accumulates the panel's contribution to one collocation row.
void integrate_row(const Vec3& x0, const PanelQuadrature& q, std::array<double, 4>& dn,
                   std::array<double, 4>& dd) {
  constexpr double c = 1.0 / (4.0 * pi);
  const double x = x0.x(), y = x0.y(), z = x0.z();
  double d0 = 0, d1 = 0, d2 = 0, d3 = 0, n0 = 0, n1 = 0, n2 = 0, n3 = 0;
  const std::size_t m = q.size();
  for (std::size_t p = 0; p < m; ++p) {
    const double rx = q.px[p] - x, ry = q.py[p] - y, rz = q.pz[p] - z;
    const double inv = 1.0 / std::sqrt(rx * rx + ry * ry + rz * rz);
    const double g = inv * q.jw[p];
    const double dg = -inv * inv * inv * (rx * q.nx[p] + ry * q.ny[p] + rz * q.nz[p]);
    d0 += g * q.s0[p];
    d1 += g * q.s1[p];
    d2 += g * q.s2[p];
    d3 += g * q.s3[p];
    n0 += dg * q.s0[p];
    n1 += dg * q.s1[p];
    n2 += dg * q.s2[p];
    n3 += dg * q.s3[p];
  }
  dd[0] += c * d0;
  dd[1] += c * d1;
  dd[2] += c * d2;
  dd[3] += c * d3;
  dn[0] += c * n0;
  dn[1] += c * n1;
  dn[2] += c * n2;
  dn[3] += c * n3;
}

// Tensor Gauss points on (u,v) sub-squares with the same distance bands as
// whole panels: ratio >= near_factor uses `regular`, >= split_factor uses
// `near`, >= split_factor / 2 uses `near` on four quarters, otherwise split.
void near_rule(const PanelCorners& x, const Vec3& x0, double u0, double v0, double s,
               const std::vector<QuadPoint>& regular, const std::vector<QuadPoint>& near,
               const QuadratureRule& quad, double diam, int depth, std::vector<QuadPoint>& out) {
  const double uc = u0 + 0.5 * s, vc = v0 + 0.5 * s;
  const Vec3 c = (1 - uc) * (1 - vc) * x[0] + uc * (1 - vc) * x[1] + (1 - uc) * vc * x[2] +
                 uc * vc * x[3];
  const double ratio = (c - x0).norm() / (s * diam);
  if (depth < 12 && ratio < 0.5 * quad.split_factor) {
    const double h = 0.5 * s;
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i)
        near_rule(x, x0, u0 + i * h, v0 + j * h, h, regular, near, quad, diam, depth + 1, out);
    return;
  }
  if (ratio >= quad.split_factor) {
    const auto& base = ratio >= quad.near_factor ? regular : near;
    for (const auto& p : base) out.push_back({u0 + s * p.u, v0 + s * p.v, s * s * p.w});
    return;
  }
  const double h = 0.5 * s;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      for (const auto& p : near)
        out.push_back({u0 + (i + p.u) * h, v0 + (j + p.v) * h, h * h * p.w});
}

const double corner_uv[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};

// Edge of the unit square whose midpoint coincides with x0, if any.
bool edge_midpoint(const PanelCorners& x, const Vec3& x0, double& u0, double& v0) {
  const int edges[4][2] = {{0, 1}, {2, 3}, {0, 2}, {1, 3}};
  const double mids[4][2] = {{0.5, 0}, {0.5, 1}, {0, 0.5}, {1, 0.5}};
  const double tol = 1e-10 * panel_diameter(x);
  for (int e = 0; e < 4; ++e) {
    if ((0.5 * (x[edges[e][0]] + x[edges[e][1]]) - x0).norm() < tol) {
      u0 = mids[e][0];
      v0 = mids[e][1];
      return true;
    }
  }
  return false;
}

}  // namespace

BemSystem assemble_system(const DofHandler& dofs, const std::vector<Vec3>& positions,
                          const QuadratureRule& quad) {
  const std::size_t n = dofs.n_dofs;
  const std::size_t np = dofs.panel_dofs.size();
  if (positions.size() != n) throw GeometryError("position count does not match DOF count");
  const auto regular = gauss_tensor(quad.regular_order);
  const auto near = gauss_tensor(quad.near_order);
  std::vector<QuadPoint> near_split;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      for (const auto& p : near) near_split.push_back({0.5 * (i + p.u), 0.5 * (j + p.v), 0.25 * p.w});
  // Singular rules at the corners and edge midpoints.
  std::vector<std::pair<std::array<double, 2>, std::vector<QuadPoint>>> singular;
  for (double v : {0.0, 0.5, 1.0})
    for (double u : {0.0, 0.5, 1.0})
      if (u != 0.5 || v != 0.5) singular.push_back({{u, v}, singular_rule(u, v, quad.singular_order)});
  auto singular_cache = [&](double u0, double v0) -> const std::vector<QuadPoint>& {
    for (const auto& [uv, rule] : singular)
      if (uv[0] == u0 && uv[1] == v0) return rule;
    throw std::logic_error("no cached singular rule");
  };
  std::vector<PanelQuadrature> qr(np), qn(np), qs(np);
  std::vector<PanelCorners> corners(np);
  std::vector<Vec3> centroid(np);
  std::vector<double> diameter(np);
  parallel_for(np, [&](std::size_t k) {
    corners[k] = dofs.corners(k, positions);
    qr[k] = panel_quadrature(corners[k], regular, long(k));
    qn[k] = panel_quadrature(corners[k], near, long(k));
    qs[k] = panel_quadrature(corners[k], near_split, long(k));
    centroid[k] = 0.25 * (corners[k][0] + corners[k][1] + corners[k][2] + corners[k][3]);
    diameter[k] = panel_diameter(corners[k]);
  });

  BemSystem sys;
  sys.N = DenseMatrix::Zero(n, n);
  sys.D = DenseMatrix::Zero(n, n);
  parallel_for(n, [&](std::size_t i) {
    const Vec3 x0 = positions[i];
    const std::size_t node = dofs.dof_node[i];
    double* rn = sys.N.row(i).data();
    double* rd = sys.D.row(i).data();
    for (std::size_t k = 0; k < np; ++k) {
      const auto& pd = dofs.panel_dofs[k];
      std::array<double, 4> dn{0, 0, 0, 0}, dd{0, 0, 0, 0};
      int corner = -1;
      for (int l = 0; l < 4; ++l)
        if (dofs.dof_node[pd[l]] == node) corner = l;
      double u0 = 0, v0 = 0;
      bool singular = corner >= 0;
      if (singular) {
        u0 = corner_uv[corner][0];
        v0 = corner_uv[corner][1];
      } else if (dofs.constrained[i] && (x0 - centroid[k]).norm() < diameter[k]) {
        singular = edge_midpoint(corners[k], x0, u0, v0);
      }
      if (singular) {
        const auto& rule = singular_cache(u0, v0);
        integrate_row(x0, panel_quadrature(corners[k], rule, long(k)), dn, dd);
      } else {
        // Distance bands in panel diameters: far, near, split once, adaptive.
        const double ratio = (x0 - centroid[k]).norm() / diameter[k];
        if (ratio >= quad.near_factor) {
          integrate_row(x0, qr[k], dn, dd);
        } else if (ratio >= quad.split_factor) {
          integrate_row(x0, qn[k], dn, dd);
        } else if (ratio >= 0.5 * quad.split_factor) {
          integrate_row(x0, qs[k], dn, dd);
        } else {
          std::vector<QuadPoint> rule;
          near_rule(corners[k], x0, 0, 0, 1, regular, near, quad, diameter[k], 0, rule);
          integrate_row(x0, panel_quadrature(corners[k], rule, long(k)), dn, dd);
        }
      }
      for (int l = 0; l < 4; ++l) {
        rn[pd[l]] += dn[l];
        rd[pd[l]] += dd[l];
      }
    }
  });
  sys.alpha = compute_alpha_rbm(sys.N);
  return sys;
}

VectorXd compute_alpha_rbm(const DenseMatrix& N) {
  VectorXd alpha(N.rows());
  for (Eigen::Index i = 0; i < N.rows(); ++i) {
    double s = 0.0;
    const double* row = N.row(i).data();
    for (Eigen::Index j = 0; j < N.cols(); ++j) s += row[j];
    alpha[i] = -s;
  }
  return alpha;
}

MixedBcAssignment default_assignment(const DofHandler& dofs) {
  MixedBcAssignment bc;
  bc.type.resize(dofs.n_dofs);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i)
    bc.type[i] =
        dofs.dof_region[i] == Region::free_surface ? BcType::dirichlet : BcType::neumann;
  bc.phi = VectorXd::Zero(dofs.n_dofs);
  bc.phin = VectorXd::Zero(dofs.n_dofs);
  return bc;
}

MixedLayout mixed_layout(const DofHandler& dofs, const std::vector<BcType>& type) {
  MixedLayout layout;
  layout.row.assign(dofs.n_dofs, MixedLayout::Row::bie);
  layout.primary.resize(dofs.n_dofs);
  for (const auto& group : dofs.node_dofs) {
    if (group.empty()) continue;
    std::size_t primary = group.front();
    int n_dirichlet = 0;
    for (auto d : group)
      if (type[d] == BcType::dirichlet) {
        if (n_dirichlet++ == 0) primary = d;
      }
    if (n_dirichlet > 1)
      throw SolverError("coincident DOFs with Dirichlet data on both sides are not supported");
    for (auto d : group) {
      layout.primary[d] = primary;
      if (d != primary) layout.row[d] = MixedLayout::Row::continuity;
    }
  }
  for (const auto& c : dofs.constraints) layout.row[c.dof] = MixedLayout::Row::constraint;
  return layout;
}

void build_mixed_system(const BemSystem& sys, const DofHandler& dofs, const MixedBcAssignment& bc,
                        const MixedLayout& layout, Eigen::MatrixXd& A, VectorXd& rhs) {
  const std::size_t n = dofs.n_dofs;
  A = Eigen::MatrixXd::Zero(n, n);
  rhs = VectorXd::Zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (layout.row[i]) {
      case MixedLayout::Row::bie: {
        double r = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double nij = sys.N(i, j) + (i == j ? sys.alpha[i] : 0.0);
          if (bc.type[j] == BcType::dirichlet) {
            A(i, j) = -sys.D(i, j);
            r -= nij * bc.phi[j];
          } else {
            A(i, j) = nij;
            r += sys.D(i, j) * bc.phin[j];
          }
        }
        rhs[i] = r;
        break;
      }
      case MixedLayout::Row::continuity: {
        const std::size_t p = layout.primary[i];
        A(i, i) = 1.0;
        if (bc.type[p] == BcType::dirichlet)
          rhs[i] = bc.phi[p];
        else
          A(i, p) = -1.0;
        break;
      }
      case MixedLayout::Row::constraint:
        break;
    }
  }
  for (const auto& c : dofs.constraints) {
    A.row(c.dof).setZero();
    rhs[c.dof] = 0.0;
    A(c.dof, c.dof) = 1.0;
    for (const auto& [m, w] : c.masters) A(c.dof, m) -= w;
  }
}

MixedSolution solve_mixed_bvp(const BemSystem& sys, const DofHandler& dofs,
                              const MixedBcAssignment& bc, const MixedSolveParams& params) {
  const std::size_t n = dofs.n_dofs;
  if (bc.type.size() != n || std::size_t(bc.phi.size()) != n || std::size_t(bc.phin.size()) != n)
    throw SolverError("boundary condition assignment does not match DOF count");
  bool any_dirichlet = false;
  for (auto t : bc.type) any_dirichlet = any_dirichlet || t == BcType::dirichlet;
  if (!any_dirichlet)
    throw SolverError("pure Neumann problem on a closed boundary is singular (constants)");

  const auto layout = mixed_layout(dofs, bc.type);
  Eigen::MatrixXd A;
  VectorXd rhs;
  build_mixed_system(sys, dofs, bc, layout, A, rhs);
  VectorXd inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = A(i, i);
    inv_diag[i] = std::abs(d) > 1e-300 ? 1.0 / d : 1.0;
  }
  auto op = [&](const VectorXd& v, VectorXd& out) { out.noalias() = A * v; };
  auto prec = [&](const VectorXd& v, VectorXd& out) { out = inv_diag.cwiseProduct(v); };
  VectorXd z = VectorXd::Zero(n);
  const auto res = gmres(op, prec, rhs, z, params.gmres);
  MixedSolution sol;
  sol.iterations = res.iterations;
  const double bnorm = std::max(rhs.norm(), 1e-300);
  sol.relative_residual = res.residual / bnorm;
  if (!res.converged) {
    if (!params.lu_fallback)
      throw SolverError("GMRES did not converge in " + std::to_string(res.iterations) +
                        " iterations (relative residual " +
                        std::to_string(sol.relative_residual) + ")");
    z = A.partialPivLu().solve(rhs);
    sol.used_lu = true;
    sol.relative_residual = (rhs - A * z).norm() / bnorm;
  }
  sol.phi = bc.phi;
  sol.phin = bc.phin;
  for (std::size_t j = 0; j < n; ++j) {
    if (bc.type[j] == BcType::dirichlet)
      sol.phin[j] = z[j];
    else
      sol.phi[j] = z[j];
  }
  return sol;
}

InteriorValue evaluate_interior_potential(const Vec3& x0, const VectorXd& phi, const VectorXd& phin,
                                          const DofHandler& dofs,
                                          const std::vector<Vec3>& positions, int order) {
  const auto rule = gauss_tensor(order);
  InteriorValue out;
  out.min_distance = std::numeric_limits<double>::infinity();
  double value = 0.0;
  for (std::size_t k = 0; k < dofs.panel_dofs.size(); ++k) {
    const auto x = dofs.corners(k, positions);
    const Vec3 c = 0.25 * (x[0] + x[1] + x[2] + x[3]);
    const double dist = (c - x0).norm();
    out.min_distance = std::min(out.min_distance, dist);
    if (dist < panel_diameter(x)) out.near_boundary = true;
    const auto q = panel_quadrature(x, rule, long(k));
    std::array<double, 4> dn{0, 0, 0, 0}, dd{0, 0, 0, 0};
    integrate_row(x0, q, dn, dd);
    const auto& pd = dofs.panel_dofs[k];
    for (int l = 0; l < 4; ++l) value += dd[l] * phin[pd[l]] - dn[l] * phi[pd[l]];
  }
  out.value = value;
  return out;
}

void write_matrix_market(std::ostream& os, const DenseMatrix& m) {
  std::size_t nnz = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) nnz += m(i, j) != 0.0;
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << m.rows() << ' ' << m.cols() << ' ' << nnz << '\n';
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) os << i + 1 << ' ' << j + 1 << ' ' << m(i, j) << '\n';
}

}  // namespace wavebem
