#include "wavebem/ship_wave_dae.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "wavebem/common.hpp"

namespace wavebem {

namespace {

constexpr double corner_uv[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};

double sqrt_eps() { return std::sqrt(std::numeric_limits<double>::epsilon()); }

}  // namespace

ShipWaveDae::ShipWaveDae(const ReferenceMesh& mesh, const Scenario& scenario)
    : mesh_(mesh), scenario_(scenario), quad_(scenario.solver.bem) {
  if (std::isnan(scenario_.beach.nu)) scenario_.finalize();
  mesh_.validate();
  dofs_ = duplicate_edge_nodes(mesh_);
  n_ = dofs_.n_dofs;
  ref_ = dof_positions(mesh_, dofs_);
  wire_ = classify_wireframe(dofs_, mesh_.nodes.size());
  is_fs_.assign(n_, 0);
  std::vector<BcType> type(n_, BcType::neumann);
  for (std::size_t i = 0; i < n_; ++i)
    if (dofs_.dof_region[i] == Region::free_surface) {
      is_fs_[i] = 1;
      type[i] = BcType::dirichlet;
    }
  layout_ = mixed_layout(dofs_, type);
  fs_panels_ = panels_in_region(dofs_, Region::free_surface);
  hull_panels_ = panels_in_region(dofs_, Region::hull);
  dof_panels_.resize(n_);
  for (std::size_t k = 0; k < dofs_.panel_dofs.size(); ++k)
    for (int l = 0; l < 4; ++l) dof_panels_[dofs_.panel_dofs[k][l]].emplace_back(k, l);
  constraint_order_ = constraint_order(dofs_.constraints);
  smoothing_ = assemble_laplace_beltrami(dofs_, ref_, wireframe_mask(dofs_));
  hull_ = hull_projection(dofs_, ref_, scenario_.hull);

  differential_.assign(size(), 0);
  fs_index_.assign(n_, n_);
  for (std::size_t i = 0; i < n_; ++i) {
    if (!is_fs_[i]) continue;
    fs_index_[i] = fs_dofs_.size();
    fs_dofs_.push_back(i);
    if (dofs_.constrained[i]) continue;
    differential_[phi_slot(i)] = 1;
    differential_[x_slot(i, 2)] = 1;
    if (dofs_.duplicated(i) && wire_.kind[dofs_.dof_node[i]] == NodeKind::waterline)
      differential_[x_slot(i, 0)] = 1;
  }
}

VectorXd ShipWaveDae::initial_state() const {
  VectorXd y = VectorXd::Zero(Eigen::Index(size()));
  for (std::size_t i = 0; i < n_; ++i)
    for (int c = 0; c < 3; ++c) y[Eigen::Index(x_slot(i, c))] = ref_[i][c];
  return y;
}

std::vector<Vec3> ShipWaveDae::positions(const VectorXd& y) const {
  std::vector<Vec3> x(n_);
  for (std::size_t i = 0; i < n_; ++i) x[i] = y.segment<3>(Eigen::Index(3 * i));
  return x;
}

VectorXd ShipWaveDae::eta(const VectorXd& y) const {
  VectorXd e = VectorXd::Zero(Eigen::Index(n_));
  for (std::size_t i = 0; i < n_; ++i)
    if (is_fs_[i]) e[Eigen::Index(i)] = y[Eigen::Index(x_slot(i, 2))];
  return e;
}

FrameKinematics ShipWaveDae::frame(double t) const {
  const auto m = velocity_ramp(t, scenario_.target_speed(), scenario_.ramp_time);
  return boat_frame(m.speed, m.acceleration);
}

const BemSystem& ShipWaveDae::bem(const VectorXd& y) {
  const auto x = y.head(Eigen::Index(3 * n_));
  if (bem_valid_ && (bem_x_.array() == x.array()).all()) return bem_;
  if (!x.allFinite()) throw RecoverableError("non-finite node positions");
  bem_ = assemble_system(dofs_, positions(y), quad_);
  bem_x_ = x;
  bem_valid_ = true;
  ++assemblies_;
  return bem_;
}

std::vector<Vec3> ShipWaveDae::nodal_gradient(const VectorXd& y) const {
  const auto x = positions(y);
  const VectorXd p = phi(y), q = phin(y);
  const auto normals = dof_normals(dofs_, x);
  std::vector<Vec3> g(n_, Vec3::Zero());
  for (std::size_t i = 0; i < n_; ++i) {
    if (dof_panels_[i].empty()) continue;
    for (const auto& [k, l] : dof_panels_[i]) {
      const auto geo = panel_geometry(dofs_.corners(k, x), corner_uv[l][0], corner_uv[l][1], long(k));
      const auto grad = surface_gradient_basis(geo, corner_uv[l][0], corner_uv[l][1]);
      for (int m = 0; m < 4; ++m) g[i] += p[Eigen::Index(dofs_.panel_dofs[k][m])] * grad[m];
    }
    g[i] /= double(dof_panels_[i].size());
    g[i] += q[Eigen::Index(i)] * normals[i];
  }
  return g;
}

void ShipWaveDae::residual(double t, const VectorXd& y, const VectorXd& yp, VectorXd& r) {
  if (!y.allFinite() || !yp.allFinite()) throw RecoverableError("non-finite state");
  evaluate(t, y, yp, bem(y), r);
}

void ShipWaveDae::directional_derivative(double t, const VectorXd& y, const VectorXd& yp,
                                         const VectorXd& r, const VectorXd& dy, const VectorXd& dyp,
                                         VectorXd& out) {
  const double vn = std::sqrt(dy.squaredNorm() + dyp.squaredNorm());
  if (vn == 0.0) {
    out = VectorXd::Zero(r.size());
    return;
  }
  const double sigma = sqrt_eps() * (1.0 + y.norm()) / vn;
  VectorXd r1;
  evaluate(t, y + sigma * dy, yp + sigma * dyp, bem(y), r1);
  out = (r1 - r) / sigma;
}

void ShipWaveDae::evaluate(double t, const VectorXd& y, const VectorXd& yp, const BemSystem& b,
                           VectorXd& r) const {
  const std::size_t n = n_;
  const auto ni = [](std::size_t i) { return Eigen::Index(i); };
  r = VectorXd::Zero(ni(size()));
  const auto x = positions(y);
  const auto xp = positions(yp);
  const VectorXd p = phi(y), q = phin(y), pp = phi(yp);
  const auto f = frame(t);
  const auto normals = dof_normals(dofs_, x);

  // Potential rows.
  const VectorXd bie = b.alpha.cwiseProduct(p) + b.N * p - b.D * q;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t slot = is_fs_[i] ? phin_slot(i) : phi_slot(i);
    switch (layout_.row[i]) {
      case MixedLayout::Row::bie:
        r[ni(slot)] = bie[ni(i)];
        break;
      case MixedLayout::Row::continuity:
        r[ni(slot)] = p[ni(i)] - p[ni(layout_.primary[i])];
        break;
      case MixedLayout::Row::constraint:
        break;
    }
  }
  for (const auto& c : dofs_.constraints) {
    double rp = p[ni(c.dof)], rq = q[ni(c.dof)];
    Vec3 rx = x[c.dof];
    for (const auto& [m, w] : c.masters) {
      rp -= w * p[ni(m)];
      rq -= w * q[ni(m)];
      rx -= w * x[m];
    }
    r[ni(phi_slot(c.dof))] = rp;
    r[ni(phin_slot(c.dof))] = rq;
    for (int k = 0; k < 3; ++k) r[ni(x_slot(c.dof, k))] = rx[k];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (is_fs_[i] || dofs_.constrained[i]) continue;
    const double bar = dofs_.dof_region[i] == Region::hull ? -f.v_inf.dot(normals[i]) : 0.0;
    r[ni(phin_slot(i))] = q[ni(i)] - bar;
  }

  // Free-surface evolution, SUPG weak form.
  std::vector<double> h_elem(dofs_.panel_dofs.size(), 0.0);
  for (auto k : fs_panels_) h_elem[k] = longest_diagonal(dofs_.corners(k, x));
  const auto& beach = scenario_.beach;
  const auto& supg = scenario_.supg;
  const auto eval = [&](std::size_t k, const PanelGeometry& g, const std::array<double, 4>& shape,
                        const std::array<Vec3, 4>& grad) {
    const auto& pd = dofs_.panel_dofs[k];
    Vec3 gs = Vec3::Zero(), w = Vec3::Zero();
    double pn = 0.0;
    for (int l = 0; l < 4; ++l) {
      gs += p[ni(pd[l])] * grad[l];
      pn += shape[l] * q[ni(pd[l])];
      w += shape[l] * xp[pd[l]];
    }
    FsPoint pt;
    pt.x = g.point;
    pt.w = w;
    pt.grad_phi = gs + pn * g.normal;
    pt.grad_eta = eta_gradient(g.normal);
    pt.phin = pn;
    const Vec3 v = total_velocity(gs, pn, g.normal, f);
    SupgPointData d;
    d.d = supg.enabled ? supg_direction(v, w, supg, h_elem[k]) : Vec3::Zero();
    d.v_phi = v_phi(pt, f, beach_mu(g.point.x(), beach));
    d.v_eta = v_eta(pt, f);
    return d;
  };
  const auto proj = assemble_supg_projection(dofs_, x, fs_panels_, eval);
  VectorXd ep = VectorXd::Zero(ni(n));
  for (std::size_t i = 0; i < n; ++i)
    if (is_fs_[i]) ep[ni(i)] = xp[i].z();
  VectorXd rphi = proj.M * pp - proj.b_phi;
  VectorXd reta = proj.M * ep - proj.b_eta;
  for (auto it = constraint_order_.rbegin(); it != constraint_order_.rend(); ++it) {
    const auto& c = dofs_.constraints[*it];
    if (!is_fs_[c.dof]) continue;
    for (const auto& [m, w] : c.masters) {
      rphi[ni(m)] += w * rphi[ni(c.dof)];
      reta[ni(m)] += w * reta[ni(c.dof)];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_fs_[i] || dofs_.constrained[i]) continue;
    r[ni(phi_slot(i))] = rphi[ni(i)];
    r[ni(x_slot(i, 2))] = reta[ni(i)];
  }

  // Node positions: wireframe motion, smoothing and projection.
  std::vector<Vec3> disp(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i)
    if (smoothing_.dirichlet[i]) disp[i] = x[i] - ref_[i];
  auto g = solve_smoothing_displacement(smoothing_, disp);
  for (std::size_t i = 0; i < n; ++i) g[i] += ref_[i];
  const auto set = [&](std::size_t i, int c, double v) { r[ni(x_slot(i, c))] = v; };
  for (std::size_t i = 0; i < n; ++i) {
    if (dofs_.constrained[i]) continue;
    const std::size_t pr = layout_.primary[i];
    if (pr != i) {
      for (int c = 0; c < 3; ++c) set(i, c, x[i][c] - x[pr][c]);
      continue;
    }
    const std::size_t node = dofs_.dof_node[i];
    const NodeKind kind = dofs_.duplicated(i) ? wire_.kind[node] : NodeKind::interior;
    switch (kind) {
      case NodeKind::interior: {
        Vec3 target = g[i];
        if (dofs_.dof_region[i] == Region::hull) {
          try {
            target = hull_.hull.project(g[i], hull_.side[i]);
          } catch (const GeometryError& e) {
            throw RecoverableError(e.what());
          }
        }
        const int nc = is_fs_[i] ? 2 : 3;
        for (int c = 0; c < nc; ++c) set(i, c, x[i][c] - target[c]);
        break;
      }
      case NodeKind::waterline: {
        const std::size_t h = wire_.other_dof[node];
        Vec3 gs = Vec3::Zero();
        for (const auto& [k, l] : dof_panels_[i]) {
          const auto geo = panel_geometry(dofs_.corners(k, x), corner_uv[l][0], corner_uv[l][1], long(k));
          const auto grad = surface_gradient_basis(geo, corner_uv[l][0], corner_uv[l][1]);
          for (int m = 0; m < 4; ++m) gs += p[ni(dofs_.panel_dofs[k][m])] * grad[m];
        }
        gs /= double(dof_panels_[i].size());
        const Vec3 v = total_velocity(gs, q[ni(i)], normals[i], f);
        const Vec3 w = waterline_velocity(v, normals[i], normals[h]);
        set(i, 0, xp[i].x() - w.x());
        set(i, 1, x[i].y() - hull_.side[h] * hull_.hull.half_beam(x[i].x(), x[i].z()));
        break;
      }
      case NodeKind::stem_top:
      case NodeKind::fs_wall:
      case NodeKind::fs_corner:
        // Vertical walls and stems: the waterline velocity has no horizontal part.
        for (int c = 0; c < 2; ++c) set(i, c, x[i][c] - ref_[i][c]);
        break;
      case NodeKind::fixed:
        for (int c = 0; c < 3; ++c) set(i, c, x[i][c] - ref_[i][c]);
        break;
    }
  }
}

void ShipWaveDae::setup_jacobian(double t, const VectorXd& y, const VectorXd& yp, double alpha) {
  alpha_ = alpha;
  pc_bem_ = bem(y);
  const auto x = positions(y);
  const VectorXd p = phi(y), q = phin(y);
  const auto f = frame(t);

  // Free-surface block alpha M with constraint rows, shared by phi and eta.
  std::vector<double> h_elem(dofs_.panel_dofs.size(), 0.0);
  for (auto k : fs_panels_) h_elem[k] = longest_diagonal(dofs_.corners(k, x));
  const auto xp = positions(yp);
  const auto eval = [&](std::size_t k, const PanelGeometry& g, const std::array<double, 4>& shape,
                        const std::array<Vec3, 4>& grad) {
    const auto& pd = dofs_.panel_dofs[k];
    Vec3 gs = Vec3::Zero(), w = Vec3::Zero();
    double pn = 0.0;
    for (int l = 0; l < 4; ++l) {
      gs += p[Eigen::Index(pd[l])] * grad[l];
      pn += shape[l] * q[Eigen::Index(pd[l])];
      w += shape[l] * xp[pd[l]];
    }
    SupgPointData d;
    const Vec3 v = total_velocity(gs, pn, g.normal, f);
    d.d = scenario_.supg.enabled ? supg_direction(v, w, scenario_.supg, h_elem[k]) : Vec3::Zero();
    return d;
  };
  const auto proj = assemble_supg_projection(dofs_, x, fs_panels_, eval);
  std::vector<std::map<std::size_t, double>> rows(n_);
  for (int k = 0; k < proj.M.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(proj.M, k); it; ++it)
      rows[std::size_t(it.row())][std::size_t(it.col())] += it.value();
  for (auto it = constraint_order_.rbegin(); it != constraint_order_.rend(); ++it) {
    const auto& c = dofs_.constraints[*it];
    if (!is_fs_[c.dof]) continue;
    for (const auto& [m, w] : c.masters)
      for (const auto& [col, v] : rows[c.dof]) rows[m][col] += w * v;
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (auto i : fs_dofs_) {
    const auto row = Eigen::Index(fs_index_[i]);
    if (dofs_.constrained[i]) continue;
    for (const auto& [col, v] : rows[i])
      if (is_fs_[col]) trip.emplace_back(row, Eigen::Index(fs_index_[col]), alpha * v);
  }
  for (const auto& c : dofs_.constraints) {
    if (!is_fs_[c.dof]) continue;
    const auto row = Eigen::Index(fs_index_[c.dof]);
    trip.emplace_back(row, row, 1.0);
    for (const auto& [m, w] : c.masters) trip.emplace_back(row, Eigen::Index(fs_index_[m]), -w);
  }
  const auto nfs = Eigen::Index(fs_dofs_.size());
  Eigen::SparseMatrix<double> S(nfs, nfs);
  S.setFromTriplets(trip.begin(), trip.end());
  S.makeCompressed();
  fs_lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  fs_lu_->compute(S);
  if (fs_lu_->info() != Eigen::Success) throw RecoverableError("free-surface mass matrix is singular");

  // Mixed BIE block.
  MixedBcAssignment bc;
  bc.type.assign(n_, BcType::neumann);
  for (auto i : fs_dofs_) bc.type[i] = BcType::dirichlet;
  bc.phi = VectorXd::Zero(Eigen::Index(n_));
  bc.phin = VectorXd::Zero(Eigen::Index(n_));
  Eigen::MatrixXd A;
  VectorXd rhs;
  build_mixed_system(pc_bem_, dofs_, bc, layout_, A, rhs);
  bie_lu_ = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXd>>(A);

  pc_beam_gradient_.assign(n_, Vec2::Zero());
  for (auto n : wire_.waterline) {
    const std::size_t i = wire_.fs_dof[n];
    if (wire_.kind[n] == NodeKind::waterline)
      pc_beam_gradient_[i] = hull_.hull.half_beam_gradient(x[i].x(), x[i].z());
  }
}

void ShipWaveDae::precondition(const VectorXd& v, VectorXd& out) {
  const auto ni = [](std::size_t i) { return Eigen::Index(i); };
  out = VectorXd::Zero(v.size());
  if (!fs_lu_ || !bie_lu_) {
    out = v;
    return;
  }
  // Free-surface phi and eta.
  const auto nfs = ni(fs_dofs_.size());
  VectorXd bp(nfs), be(nfs);
  for (Eigen::Index k = 0; k < nfs; ++k) {
    bp[k] = v[ni(phi_slot(fs_dofs_[std::size_t(k)]))];
    be[k] = v[ni(x_slot(fs_dofs_[std::size_t(k)], 2))];
  }
  const VectorXd sp = fs_lu_->solve(bp), se = fs_lu_->solve(be);
  for (Eigen::Index k = 0; k < nfs; ++k) {
    out[ni(phi_slot(fs_dofs_[std::size_t(k)]))] = sp[k];
    out[ni(x_slot(fs_dofs_[std::size_t(k)], 2))] = se[k];
  }
  // Neumann data.
  for (std::size_t i = 0; i < n_; ++i)
    if (!is_fs_[i] && !dofs_.constrained[i]) out[ni(phin_slot(i))] = v[ni(phin_slot(i))];
  for (auto ci : constraint_order_) {
    const auto& c = dofs_.constraints[ci];
    if (is_fs_[c.dof]) continue;
    double s = v[ni(phin_slot(c.dof))];
    for (const auto& [m, w] : c.masters) s += w * out[ni(phin_slot(m))];
    out[ni(phin_slot(c.dof))] = s;
  }
  // BIE block for phin on the free surface and phi elsewhere.
  VectorXd known_phi = VectorXd::Zero(ni(n_)), known_phin = VectorXd::Zero(ni(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    if (is_fs_[i])
      known_phi[ni(i)] = out[ni(phi_slot(i))];
    else
      known_phin[ni(i)] = out[ni(phin_slot(i))];
  }
  const VectorXd known = -(pc_bem_.alpha.cwiseProduct(known_phi) + pc_bem_.N * known_phi) + pc_bem_.D * known_phin;
  VectorXd rhs(ni(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t slot = is_fs_[i] ? phin_slot(i) : phi_slot(i);
    rhs[ni(i)] = v[ni(slot)];
    if (layout_.row[i] == MixedLayout::Row::bie) rhs[ni(i)] += known[ni(i)];
    if (layout_.row[i] == MixedLayout::Row::continuity && is_fs_[layout_.primary[i]])
      rhs[ni(i)] += known_phi[ni(layout_.primary[i])];
  }
  const VectorXd u = bie_lu_->solve(rhs);
  for (std::size_t i = 0; i < n_; ++i) out[ni(is_fs_[i] ? phin_slot(i) : phi_slot(i))] = u[ni(i)];

  // Positions: wireframe, then smoothing of the wireframe increments.
  const auto dx = [&](std::size_t i, int c) -> double& { return out[ni(x_slot(i, c))]; };
  const auto vx = [&](std::size_t i, int c) { return v[ni(x_slot(i, c))]; };
  for (std::size_t i = 0; i < n_; ++i) {
    if (dofs_.constrained[i] || layout_.primary[i] != i || !dofs_.duplicated(i)) continue;
    const std::size_t node = dofs_.dof_node[i];
    switch (wire_.kind[node]) {
      case NodeKind::waterline: {
        const double side = hull_.side[wire_.other_dof[node]];
        dx(i, 0) = vx(i, 0) / alpha_;
        dx(i, 1) = vx(i, 1) + side * (pc_beam_gradient_[i].x() * dx(i, 0) +
                                      pc_beam_gradient_[i].y() * dx(i, 2));
        break;
      }
      case NodeKind::stem_top:
      case NodeKind::fs_wall:
      case NodeKind::fs_corner:
        dx(i, 0) = vx(i, 0);
        dx(i, 1) = vx(i, 1);
        break;
      default:
        for (int c = 0; c < 3; ++c) dx(i, c) = vx(i, c);
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t pr = layout_.primary[i];
    if (dofs_.constrained[i] || pr == i) continue;
    for (int c = 0; c < 3; ++c) dx(i, c) = vx(i, c) + dx(pr, c);
  }
  std::vector<Vec3> disp(n_, Vec3::Zero());
  for (std::size_t i = 0; i < n_; ++i)
    if (smoothing_.dirichlet[i]) disp[i] = Vec3(dx(i, 0), dx(i, 1), dx(i, 2));
  const auto dg = solve_smoothing_displacement(smoothing_, disp);
  for (std::size_t i = 0; i < n_; ++i) {
    if (dofs_.constrained[i] || dofs_.duplicated(i)) continue;
    const int nc = is_fs_[i] ? 2 : 3;
    for (int c = 0; c < nc; ++c) dx(i, c) = vx(i, c) + dg[i][c];
  }
  for (auto ci : constraint_order_) {
    const auto& c = dofs_.constraints[ci];
    for (int k = 0; k < 3; ++k) {
      double s = vx(c.dof, k);
      for (const auto& [m, w] : c.masters) s += w * dx(m, k);
      dx(c.dof, k) = s;
    }
  }
}

VectorXd ShipWaveDae::pressure(double t, const VectorXd& y, const VectorXd& yp) const {
  const auto x = positions(y);
  const auto xp = positions(yp);
  const auto grad = nodal_gradient(y);
  const auto f = frame(t);
  VectorXd pr = VectorXd::Zero(Eigen::Index(n_));
  for (std::size_t i = 0; i < n_; ++i)
    pr[Eigen::Index(i)] = pressure_bernoulli(yp[Eigen::Index(phi_slot(i))], grad[i], xp[i], x[i], f,
                                             scenario_.solver.rho);
  return pr;
}

Vec3 ShipWaveDae::hull_force(double t, const VectorXd& y, const VectorXd& yp) const {
  return integrate_hull_force(dofs_, positions(y), hull_panels_, pressure(t, y, yp));
}

double ShipWaveDae::beach_absorption(const VectorXd& y) const {
  return energy_absorption_rate(dofs_, positions(y), fs_panels_, phin(y), scenario_.beach);
}

}  // namespace wavebem
