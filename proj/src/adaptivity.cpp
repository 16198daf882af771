#include "wavebem/adaptivity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>

#include "wavebem/quadrature.hpp"

namespace wavebem {

namespace {

constexpr int edge_corners[4][2] = {{0, 1}, {1, 3}, {3, 2}, {2, 0}};
constexpr double corner_uv[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};

std::pair<std::size_t, std::size_t> key(std::size_t a, std::size_t b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

AdaptiveMesh::AdaptiveMesh(const ReferenceMesh& mesh) {
  mesh.validate();
  if (!mesh.constraints.empty()) throw GeometryError("adaptive forest needs a conforming initial mesh");
  nodes_ = mesh.nodes;
  origin_.assign(nodes_.size(), NodeOrigin{});
  use_count_.assign(nodes_.size(), 0);
  for (const auto& p : mesh.panels) {
    Cell c;
    c.nodes = p.nodes;
    c.region = p.region;
    c.patch = p.patch;
    roots_.push_back(cells_.size());
    cells_.push_back(c);
    centre_.push_back(-1);
    for (auto n : p.nodes) ++use_count_[n];
  }
}

void AdaptiveMesh::collect(std::size_t cell, std::vector<std::size_t>& out) const {
  const auto& c = cells_[cell];
  if (c.active) {
    out.push_back(cell);
    return;
  }
  for (auto ch : c.children) collect(std::size_t(ch), out);
}

std::vector<std::size_t> AdaptiveMesh::leaves() const {
  std::vector<std::size_t> out;
  for (auto r : roots_) collect(r, out);
  return out;
}

std::size_t AdaptiveMesh::n_leaves() const { return leaves().size(); }

std::size_t AdaptiveMesh::midpoint(std::size_t a, std::size_t b) const {
  const auto it = edge_mid_.find(key(a, b));
  return it == edge_mid_.end() ? npos : it->second;
}

std::size_t AdaptiveMesh::edge_node(std::size_t a, std::size_t b) {
  const auto k = key(a, b);
  const auto it = edge_mid_.find(k);
  if (it != edge_mid_.end()) return it->second;
  const std::size_t m = nodes_.size();
  nodes_.push_back(0.5 * (nodes_[a] + nodes_[b]));
  NodeOrigin o;
  o.kind = NodeOrigin::Kind::edge;
  o.from = {a, b, a, b};
  origin_.push_back(o);
  use_count_.push_back(0);
  edge_mid_[k] = m;
  return m;
}

void AdaptiveMesh::refine(std::size_t cell) {
  if (!cells_[cell].active) throw GeometryError("only leaves can be refined");
  const auto n = cells_[cell].nodes;
  if (cells_[cell].children[0] >= 0) {
    // Unused nodes of earlier splits follow the corners moved since.
    for (auto ch : cells_[cell].children)
      for (auto v : cells_[std::size_t(ch)].nodes) {
        if (used(v)) continue;
        const auto& o = origin_[v];
        if (o.kind == NodeOrigin::Kind::edge) nodes_[v] = 0.5 * (nodes_[o.from[0]] + nodes_[o.from[1]]);
        if (o.kind == NodeOrigin::Kind::centre)
          nodes_[v] = 0.25 * (nodes_[o.from[0]] + nodes_[o.from[1]] + nodes_[o.from[2]] + nodes_[o.from[3]]);
      }
  } else {
    const std::size_t m01 = edge_node(n[0], n[1]), m13 = edge_node(n[1], n[3]);
    const std::size_t m23 = edge_node(n[2], n[3]), m02 = edge_node(n[0], n[2]);
    if (centre_[cell] < 0) {
      centre_[cell] = long(nodes_.size());
      nodes_.push_back(0.25 * (nodes_[n[0]] + nodes_[n[1]] + nodes_[n[2]] + nodes_[n[3]]));
      NodeOrigin o;
      o.kind = NodeOrigin::Kind::centre;
      o.from = n;
      origin_.push_back(o);
      use_count_.push_back(0);
    }
    const std::size_t c = std::size_t(centre_[cell]);
    const std::array<std::array<std::size_t, 4>, 4> kids{{{n[0], m01, m02, c},
                                                          {m01, n[1], c, m13},
                                                          {m02, c, n[2], m23},
                                                          {c, m13, m23, n[3]}}};
    for (int k = 0; k < 4; ++k) {
      Cell child;
      child.nodes = kids[std::size_t(k)];
      child.region = cells_[cell].region;
      child.patch = cells_[cell].patch;
      child.level = cells_[cell].level + 1;
      child.parent = long(cell);
      child.active = false;
      cells_[cell].children[std::size_t(k)] = long(cells_.size());
      cells_.push_back(child);
      centre_.push_back(-1);
    }
  }
  cells_[cell].active = false;
  for (auto v : cells_[cell].nodes) --use_count_[v];
  for (auto ch : cells_[cell].children) {
    cells_[std::size_t(ch)].active = true;
    for (auto v : cells_[std::size_t(ch)].nodes) ++use_count_[v];
  }
}

void AdaptiveMesh::coarsen(std::size_t cell) {
  auto& c = cells_[cell];
  if (c.active || c.children[0] < 0) throw GeometryError("cell has no children to merge");
  for (auto ch : c.children)
    if (!cells_[std::size_t(ch)].active) throw GeometryError("children must be leaves to merge");
  for (auto ch : c.children) {
    cells_[std::size_t(ch)].active = false;
    for (auto v : cells_[std::size_t(ch)].nodes) --use_count_[v];
  }
  c.active = true;
  for (auto v : c.nodes) ++use_count_[v];
}

namespace {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated forest data");
  return v;
}

}  // namespace

void AdaptiveMesh::save(std::ostream& os) const {
  put<std::uint64_t>(os, nodes_.size());
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    for (int c = 0; c < 3; ++c) put(os, nodes_[n][c]);
    put(os, std::uint8_t(origin_[n].kind));
    for (auto f : origin_[n].from) put<std::uint64_t>(os, f);
    put<std::int32_t>(os, use_count_[n]);
  }
  put<std::uint64_t>(os, cells_.size());
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const auto& c = cells_[k];
    for (auto v : c.nodes) put<std::uint64_t>(os, v);
    put(os, std::uint8_t(c.region));
    put<std::int32_t>(os, c.patch);
    put<std::int32_t>(os, c.level);
    put<std::int64_t>(os, c.parent);
    for (auto ch : c.children) put<std::int64_t>(os, ch);
    put(os, std::uint8_t(c.active));
    put<std::int64_t>(os, centre_[k]);
  }
  put<std::uint64_t>(os, roots_.size());
  for (auto r : roots_) put<std::uint64_t>(os, r);
  put<std::uint64_t>(os, edge_mid_.size());
  for (const auto& [k, m] : edge_mid_) {
    put<std::uint64_t>(os, k.first);
    put<std::uint64_t>(os, k.second);
    put<std::uint64_t>(os, m);
  }
}

AdaptiveMesh AdaptiveMesh::load(std::istream& is) {
  AdaptiveMesh m;
  const auto nn = get<std::uint64_t>(is);
  m.nodes_.resize(nn);
  m.origin_.resize(nn);
  m.use_count_.resize(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    for (int c = 0; c < 3; ++c) m.nodes_[n][c] = get<double>(is);
    m.origin_[n].kind = NodeOrigin::Kind(get<std::uint8_t>(is));
    for (auto& f : m.origin_[n].from) f = get<std::uint64_t>(is);
    m.use_count_[n] = get<std::int32_t>(is);
  }
  const auto nc = get<std::uint64_t>(is);
  m.cells_.resize(nc);
  m.centre_.resize(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    auto& c = m.cells_[k];
    for (auto& v : c.nodes) v = get<std::uint64_t>(is);
    c.region = Region(get<std::uint8_t>(is));
    c.patch = get<std::int32_t>(is);
    c.level = get<std::int32_t>(is);
    c.parent = get<std::int64_t>(is);
    for (auto& ch : c.children) ch = get<std::int64_t>(is);
    c.active = get<std::uint8_t>(is) != 0;
    m.centre_[k] = get<std::int64_t>(is);
  }
  m.roots_.resize(get<std::uint64_t>(is));
  for (auto& r : m.roots_) r = get<std::uint64_t>(is);
  const auto ne = get<std::uint64_t>(is);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto a = get<std::uint64_t>(is), b = get<std::uint64_t>(is);
    m.edge_mid_[{a, b}] = get<std::uint64_t>(is);
  }
  return m;
}

int AdaptiveMesh::max_level_jump() const {
  int jump = 0;
  for (auto k : leaves())
    for (const auto& e : edge_corners) {
      const std::size_t a = cells_[k].nodes[std::size_t(e[0])], b = cells_[k].nodes[std::size_t(e[1])];
      std::size_t m = midpoint(a, b);
      if (m == npos || !used(m)) continue;
      int d = 1;
      std::vector<std::pair<std::size_t, std::size_t>> level{{a, m}, {m, b}};
      while (!level.empty()) {
        std::vector<std::pair<std::size_t, std::size_t>> next;
        for (const auto& [p, q] : level) {
          const std::size_t mm = midpoint(p, q);
          if (mm != npos && used(mm)) {
            next.emplace_back(p, mm);
            next.emplace_back(mm, q);
          }
        }
        if (!next.empty()) ++d;
        level = std::move(next);
      }
      jump = std::max(jump, d);
    }
  return jump;
}

LeafMesh AdaptiveMesh::leaf_mesh() const {
  LeafMesh out;
  const auto lv = leaves();
  std::vector<std::size_t> local(nodes_.size(), npos);
  for (std::size_t n = 0; n < nodes_.size(); ++n)
    if (use_count_[n] > 0) {
      local[n] = out.node.size();
      out.node.push_back(n);
      out.mesh.nodes.push_back(nodes_[n]);
    }
  std::set<std::pair<std::size_t, int>> seen;
  for (auto k : lv) {
    const auto& c = cells_[k];
    Panel p;
    for (int l = 0; l < 4; ++l) p.nodes[std::size_t(l)] = local[c.nodes[std::size_t(l)]];
    p.region = c.region;
    p.patch = c.patch;
    out.mesh.panels.push_back(p);
    out.cell.push_back(k);
    for (const auto& e : edge_corners) {
      const std::size_t a = c.nodes[std::size_t(e[0])], b = c.nodes[std::size_t(e[1])];
      const std::size_t m = midpoint(a, b);
      if (m == npos || !used(m) || !seen.insert({m, c.patch}).second) continue;
      HangingConstraint h;
      h.node = local[m];
      h.patch = c.patch;
      h.masters = {{local[a], 0.5}, {local[b], 0.5}};
      out.mesh.constraints.push_back(h);
    }
  }
  return out;
}

std::vector<double> kelly_estimate(const DofHandler& dofs, const std::vector<Vec3>& positions,
                                   const VectorXd& phi, const std::vector<HangingConstraint>& hanging,
                                   int edge_order) {
  const std::size_t np = dofs.panel_dofs.size();
  std::vector<std::array<std::size_t, 4>> pn(np);
  for (std::size_t k = 0; k < np; ++k)
    for (int l = 0; l < 4; ++l) pn[k][std::size_t(l)] = dofs.dof_node[dofs.panel_dofs[k][std::size_t(l)]];
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> edges;
  for (std::size_t k = 0; k < np; ++k)
    for (const auto& e : edge_corners) edges[key(pn[k][std::size_t(e[0])], pn[k][std::size_t(e[1])])].push_back(k);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> hang_mid;
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> hang_masters;
  for (const auto& h : hanging)
    if (h.masters.size() == 2) {
      hang_mid[key(h.masters[0].first, h.masters[1].first)] = h.node;
      hang_masters[h.node] = {h.masters[0].first, h.masters[1].first};
    }

  std::vector<double> xs, ws;
  gauss_legendre(edge_order, xs, ws);
  auto local_corner = [&](std::size_t k, std::size_t node) {
    for (int l = 0; l < 4; ++l)
      if (pn[k][std::size_t(l)] == node) return l;
    return -1;
  };
  // Gradient and outward conormal of panel k at (u,v); `dir` is the (u,v)
  // direction of the edge.
  struct EdgePoint {
    Vec3 grad, conormal, tangent;
  };
  auto edge_point = [&](std::size_t k, double u, double v, double du, double dv) {
    const auto x = dofs.corners(k, positions);
    const auto g = panel_geometry(x, u, v, long(k));
    const auto gb = surface_gradient_basis(g, u, v);
    EdgePoint e;
    e.grad = Vec3::Zero();
    for (int l = 0; l < 4; ++l) e.grad += phi[Eigen::Index(dofs.panel_dofs[k][std::size_t(l)])] * gb[std::size_t(l)];
    e.tangent = du * g.t_u + dv * g.t_v;
    e.conormal = e.tangent.cross(g.normal).normalized();
    const Vec3 inward = (0.5 - u) * g.t_u + (0.5 - v) * g.t_v;
    if (e.conormal.dot(inward) > 0) e.conormal = -e.conormal;
    return e;
  };

  std::vector<double> tau(np, 0.0);
  for (std::size_t k = 0; k < np; ++k) {
    const int patch = dofs.dof_patch[dofs.panel_dofs[k][0]];
    double sum = 0.0;
    for (const auto& e : edge_corners) {
      const std::size_t a = pn[k][std::size_t(e[0])], b = pn[k][std::size_t(e[1])];
      // Segments of this edge with their partner panel and partner edge
      // (c, d); lambda maps nodes to a common coordinate along the line.
      struct Segment {
        double s0, s1;
        std::size_t partner, c, d;
      };
      std::vector<Segment> segs;
      std::map<std::size_t, double> lambda;
      const auto& same = edges[key(a, b)];
      for (auto o : same)
        if (o != k) segs.push_back({0.0, 1.0, o, a, b});
      if (!segs.empty()) {
        lambda = {{a, 0.0}, {b, 1.0}};
      } else if (auto hm = hang_mid.find(key(a, b)); hm != hang_mid.end()) {
        const std::size_t m = hm->second;
        lambda = {{a, 0.0}, {b, 1.0}, {m, 0.5}};
        for (const auto& [c, d, s0, s1] : {std::tuple{a, m, 0.0, 0.5}, std::tuple{m, b, 0.5, 1.0}}) {
          const auto it = edges.find(key(c, d));
          if (it == edges.end()) continue;
          for (auto o : it->second)
            if (o != k) segs.push_back({s0, s1, o, c, d});
        }
      } else {
        for (auto [h, other] : {std::pair{a, b}, std::pair{b, a}}) {
          const auto it = hang_masters.find(h);
          if (it == hang_masters.end()) continue;
          const auto [p, q] = it->second;
          if (other != p && other != q) continue;
          lambda = {{p, 0.0}, {q, 1.0}, {h, 0.5}};
          const auto ce = edges.find(key(p, q));
          if (ce == edges.end()) continue;
          for (auto o : ce->second)
            if (o != k) segs.push_back({0.0, 1.0, o, p, q});
        }
      }
      const int la = e[0], lb = e[1];
      const double du = corner_uv[lb][0] - corner_uv[la][0], dv = corner_uv[lb][1] - corner_uv[la][1];
      for (const auto& sg : segs) {
        if (dofs.dof_patch[dofs.panel_dofs[sg.partner][0]] != patch) continue;
        const int lc = local_corner(sg.partner, sg.c), ld = local_corner(sg.partner, sg.d);
        if (lc < 0 || ld < 0) continue;
        const double pdu = corner_uv[ld][0] - corner_uv[lc][0], pdv = corner_uv[ld][1] - corner_uv[lc][1];
        for (std::size_t g = 0; g < xs.size(); ++g) {
          const double s = sg.s0 + (sg.s1 - sg.s0) * xs[g];
          const double u = corner_uv[la][0] + s * du, v = corner_uv[la][1] + s * dv;
          const double lam = lambda[a] + s * (lambda[b] - lambda[a]);
          const double t = (lam - lambda[sg.c]) / (lambda[sg.d] - lambda[sg.c]);
          const double pu = corner_uv[lc][0] + t * pdu, pv = corner_uv[lc][1] + t * pdv;
          const auto ek = edge_point(k, u, v, du, dv);
          const auto ep = edge_point(sg.partner, pu, pv, pdu, pdv);
          const double jump = ek.grad.dot(ek.conormal) + ep.grad.dot(ep.conormal);
          sum += jump * jump * ek.tangent.norm() * (sg.s1 - sg.s0) * ws[g];
        }
      }
    }
    tau[k] = std::sqrt(panel_diameter(dofs.corners(k, positions)) / 24.0 * sum);
  }
  return tau;
}

std::vector<CellFlag> flag_fixed_fraction(const std::vector<double>& errors, double f_r, double f_c) {
  const std::size_t n = errors.size();
  std::vector<CellFlag> flags(n, CellFlag::keep);
  if (n == 0) return flags;
  const auto count = [&](double f) {
    return std::min(n, std::size_t(std::ceil(f * double(n) - 1e-9 * double(n))));
  };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
  const std::size_t nr = f_r > 0 ? count(f_r) : 0;
  for (std::size_t i = 0; i < nr; ++i) flags[order[i]] = CellFlag::refine;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return errors[a] < errors[b]; });
  const std::size_t nc = f_c > 0 ? count(f_c) : 0;
  for (std::size_t i = 0, done = 0; i < n && done < nc; ++i) {
    if (flags[order[i]] == CellFlag::refine) continue;
    flags[order[i]] = CellFlag::coarsen;
    ++done;
  }
  return flags;
}

namespace {

// Leaf edges with the patches of the leaves on them.
std::map<std::pair<std::size_t, std::size_t>, std::set<int>> leaf_edge_patches(const AdaptiveMesh& m) {
  std::map<std::pair<std::size_t, std::size_t>, std::set<int>> out;
  for (auto k : m.leaves()) {
    const auto& c = m.cells()[k];
    for (const auto& e : edge_corners)
      out[key(c.nodes[std::size_t(e[0])], c.nodes[std::size_t(e[1])])].insert(c.patch);
  }
  return out;
}

bool other_patch(const std::map<std::pair<std::size_t, std::size_t>, std::set<int>>& ep, std::size_t a,
                 std::size_t b, int patch) {
  const auto it = ep.find(key(a, b));
  if (it == ep.end()) return false;
  for (int p : it->second)
    if (p != patch) return true;
  return false;
}

std::size_t estimate_dofs(const AdaptiveMesh& m) {
  std::map<std::size_t, std::set<int>> patches;
  for (auto k : m.leaves())
    for (auto n : m.cells()[k].nodes) patches[n].insert(m.cells()[k].patch);
  std::size_t d = 0;
  for (const auto& [n, p] : patches) d += p.size();
  return d;
}

}  // namespace

RefinementReport execute_refinement(AdaptiveMesh& mesh, const std::vector<CellFlag>& flags,
                                    const WigleyHull* hull, const RefinementLimits& limits) {
  RefinementReport rep;
  const auto lv = mesh.leaves();
  if (flags.size() != lv.size()) throw GeometryError("flag count does not match the leaf count");
  const auto corners = [&](std::size_t cell) {
    const auto& c = mesh.cells()[cell];
    return PanelCorners{mesh.nodes()[c.nodes[0]], mesh.nodes()[c.nodes[1]], mesh.nodes()[c.nodes[2]],
                        mesh.nodes()[c.nodes[3]]};
  };

  // Requested splits.
  std::size_t dofs = estimate_dofs(mesh);
  for (std::size_t i = 0; i < lv.size(); ++i) {
    if (flags[i] != CellFlag::refine) continue;
    if (panel_diameter(corners(lv[i])) < 2.0 * limits.h_min) {
      ++rep.dropped_refine;
      continue;
    }
    if (dofs + 5 > limits.max_dofs) {
      ++rep.dropped_refine;
      continue;
    }
    mesh.refine(lv[i]);
    dofs += 5;
    ++rep.refined;
  }
  if (rep.dropped_refine > 0)
    rep.log.push_back("refinement dropped on " + std::to_string(rep.dropped_refine) +
                      " cells (size floor or DOF ceiling)");

  // Closure: one-level rule and conformity across patch boundaries.
  for (bool changed = true; changed;) {
    changed = false;
    const auto ep = leaf_edge_patches(mesh);
    for (auto k : mesh.leaves()) {
      const auto& c = mesh.cells()[k];
      bool split = false;
      for (const auto& e : edge_corners) {
        const std::size_t a = c.nodes[std::size_t(e[0])], b = c.nodes[std::size_t(e[1])];
        const std::size_t m = mesh.midpoint(a, b);
        if (m == AdaptiveMesh::npos || !mesh.used(m)) continue;
        const std::size_t m1 = mesh.midpoint(a, m), m2 = mesh.midpoint(m, b);
        if ((m1 != AdaptiveMesh::npos && mesh.used(m1)) || (m2 != AdaptiveMesh::npos && mesh.used(m2)) ||
            other_patch(ep, a, m, c.patch) || other_patch(ep, m, b, c.patch)) {
          split = true;
          break;
        }
      }
      if (split) {
        mesh.refine(k);
        ++rep.refined;
        ++rep.closure;
        changed = true;
      }
    }
  }

  // Coarsening of parents whose four children are flagged.
  std::map<std::size_t, CellFlag> by_cell;
  for (std::size_t i = 0; i < lv.size(); ++i) by_cell[lv[i]] = flags[i];
  std::set<std::size_t> parents;
  std::size_t wanted = 0;
  for (std::size_t i = 0; i < lv.size(); ++i)
    if (flags[i] == CellFlag::coarsen) {
      ++wanted;
      if (mesh.cells()[lv[i]].parent >= 0) parents.insert(std::size_t(mesh.cells()[lv[i]].parent));
    }
  std::size_t merged_children = 0;
  for (auto p : parents) {
    const auto& pc = mesh.cells()[p];
    bool ok = true;
    for (auto ch : pc.children) {
      const auto it = by_cell.find(std::size_t(ch));
      if (!mesh.cells()[std::size_t(ch)].active || it == by_cell.end() || it->second != CellFlag::coarsen) ok = false;
    }
    if (!ok) continue;
    const auto ep = leaf_edge_patches(mesh);
    for (const auto& e : edge_corners) {
      const std::size_t a = pc.nodes[std::size_t(e[0])], b = pc.nodes[std::size_t(e[1])];
      const std::size_t m = mesh.midpoint(a, b);
      if (m == AdaptiveMesh::npos) continue;
      const std::size_t m1 = mesh.midpoint(a, m), m2 = mesh.midpoint(m, b);
      if ((m1 != AdaptiveMesh::npos && mesh.used(m1)) || (m2 != AdaptiveMesh::npos && mesh.used(m2)) ||
          other_patch(ep, a, m, pc.patch) || other_patch(ep, m, b, pc.patch))
        ok = false;
    }
    if (!ok) continue;
    mesh.coarsen(p);
    ++rep.coarsened;
    merged_children += 4;
  }
  rep.dropped_coarsen = wanted - merged_children;
  if (rep.dropped_coarsen > 0)
    rep.log.push_back("coarsening dropped on " + std::to_string(rep.dropped_coarsen) +
                      " cells (one-level rule, patch boundary or incomplete family)");

  // Geometric placement: hanging nodes at the master average, other hull
  // nodes on the hull surface.
  const auto leaf = mesh.leaf_mesh();
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> hang;
  for (const auto& h : leaf.mesh.constraints)
    hang[leaf.node[h.node]] = {leaf.node[h.masters[0].first], leaf.node[h.masters[1].first]};
  std::function<void(std::size_t, std::set<std::size_t>&)> place = [&](std::size_t n, std::set<std::size_t>& done) {
    if (!done.insert(n).second) return;
    const auto it = hang.find(n);
    if (it == hang.end()) return;
    place(it->second.first, done);
    place(it->second.second, done);
    mesh.nodes()[n] = 0.5 * (mesh.nodes()[it->second.first] + mesh.nodes()[it->second.second]);
  };
  std::set<std::size_t> done;
  for (const auto& [n, m] : hang) place(n, done);
  if (hull) {
    std::vector<char> on_hull(mesh.nodes().size(), 0), on_fs(mesh.nodes().size(), 0);
    for (auto k : mesh.leaves())
      for (auto n : mesh.cells()[k].nodes) {
        if (mesh.cells()[k].region == Region::hull) on_hull[n] = 1;
        if (mesh.cells()[k].region == Region::free_surface) on_fs[n] = 1;
      }
    for (std::size_t n = 0; n < mesh.nodes().size(); ++n) {
      if (!on_hull[n] || !mesh.used(n) || hang.count(n)) continue;
      Vec3& p = mesh.nodes()[n];
      if (std::abs(p.y()) < 1e-12) continue;
      const double side = p.y() > 0 ? 1.0 : -1.0;
      if (on_fs[n])
        p.y() = side * hull->half_beam(p.x(), p.z());
      else
        p = hull->project(p, side);
    }
  }
  return rep;
}

VectorXd transfer_solution(const AdaptiveMesh& forest, const LeafMesh& from, const DofHandler& from_dofs,
                           const LeafMesh& to, const DofHandler& to_dofs, const VectorXd& values, int stride) {
  const Eigen::Index s = stride;
  if (values.size() != Eigen::Index(from_dofs.n_dofs) * s) throw GeometryError("field size mismatch");
  std::map<std::pair<std::size_t, int>, VectorXd> known;
  for (std::size_t d = 0; d < from_dofs.n_dofs; ++d)
    known[{from.node[from_dofs.dof_node[d]], from_dofs.dof_patch[d]}] = values.segment(Eigen::Index(d) * s, s);
  std::function<VectorXd(std::size_t, int)> value = [&](std::size_t n, int patch) -> VectorXd {
    const auto it = known.find({n, patch});
    if (it != known.end()) return it->second;
    const auto& o = forest.origins()[n];
    VectorXd v = VectorXd::Zero(s);
    switch (o.kind) {
      case AdaptiveMesh::NodeOrigin::Kind::edge:
        v = 0.5 * (value(o.from[0], patch) + value(o.from[1], patch));
        break;
      case AdaptiveMesh::NodeOrigin::Kind::centre:
        for (auto c : o.from) v += 0.25 * value(c, patch);
        break;
      case AdaptiveMesh::NodeOrigin::Kind::root:
        throw GeometryError("transfer found a root node without a value");
    }
    known[{n, patch}] = v;
    return v;
  };
  VectorXd out(Eigen::Index(to_dofs.n_dofs) * s);
  for (std::size_t d = 0; d < to_dofs.n_dofs; ++d)
    out.segment(Eigen::Index(d) * s, s) = value(to.node[to_dofs.dof_node[d]], to_dofs.dof_patch[d]);
  return constrain_hanging(out, to_dofs.constraints, stride);
}

void write_adapt_log_header(std::ostream& os) { os << "step,n_cells,n_dofs,max_tau,min_tau\n"; }

void write_adapt_log(std::ostream& os, std::size_t step, std::size_t n_cells, std::size_t n_dofs,
                     double max_tau, double min_tau) {
  os << std::setprecision(17) << step << ',' << n_cells << ',' << n_dofs << ',' << max_tau << ','
     << min_tau << '\n';
}

}  // namespace wavebem
