#include "wavebem/surface_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Dense>

namespace wavebem {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::free_surface: return "free_surface";
    case Region::hull: return "hull";
    case Region::bottom: return "bottom";
    case Region::far_field: return "far_field";
  }
  return "unknown";
}

Region region_from_string(std::string_view s) {
  if (s == "free_surface") return Region::free_surface;
  if (s == "hull") return Region::hull;
  if (s == "bottom") return Region::bottom;
  if (s == "far_field") return Region::far_field;
  throw IoError("unknown region tag '" + std::string(s) + "'");
}

namespace {

void check_unit(double u, double v) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    std::ostringstream os;
    os << "reference coordinates (" << u << ", " << v << ") outside [0,1]^2";
    throw std::out_of_range(os.str());
  }
}

}  // namespace

std::array<double, 4> shape_values(double u, double v) {
  check_unit(u, v);
  return {(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v};
}

std::array<Vec2, 4> shape_gradients(double u, double v) {
  check_unit(u, v);
  return {Vec2(-(1 - v), -(1 - u)), Vec2(1 - v, -u), Vec2(-v, 1 - u), Vec2(v, u)};
}

double panel_diameter(const PanelCorners& x) {
  double d = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) d = std::max(d, (x[a] - x[b]).norm());
  return d;
}

double longest_diagonal(const PanelCorners& x) {
  return std::max((x[3] - x[0]).norm(), (x[2] - x[1]).norm());
}

PanelGeometry panel_geometry(const PanelCorners& x, double u, double v, long panel_id) {
  const auto n = shape_values(u, v);
  const auto dn = shape_gradients(u, v);
  PanelGeometry g;
  g.point = Vec3::Zero();
  g.t_u = Vec3::Zero();
  g.t_v = Vec3::Zero();
  for (int l = 0; l < 4; ++l) {
    g.point += n[l] * x[l];
    g.t_u += dn[l].x() * x[l];
    g.t_v += dn[l].y() * x[l];
  }
  const Vec3 c = g.t_u.cross(g.t_v);
  g.jacobian = c.norm();
  const double diam = panel_diameter(x);
  if (!(g.jacobian > 1e-12 * diam * diam)) {
    std::ostringstream os;
    os << "degenerate panel " << panel_id << " (J = " << g.jacobian << " at u=" << u
       << ", v=" << v << ")";
    throw GeometryError(os.str(), panel_id);
  }
  g.normal = c / g.jacobian;
  return g;
}

std::array<Vec3, 4> surface_gradient_basis(const PanelGeometry& g, double u, double v) {
  const auto dn = shape_gradients(u, v);
  Eigen::Matrix2d G;
  G << g.t_u.dot(g.t_u), g.t_u.dot(g.t_v), g.t_v.dot(g.t_u), g.t_v.dot(g.t_v);
  const double det = G.determinant();
  if (!(std::abs(det) > 1e-30 * G.squaredNorm()) || !std::isfinite(det))
    throw GeometryError("singular first fundamental form");
  const Eigen::Matrix2d Gi = G.inverse();
  std::array<Vec3, 4> out;
  for (int l = 0; l < 4; ++l) {
    const Vec2 c = Gi * dn[l];
    out[l] = c.x() * g.t_u + c.y() * g.t_v;
  }
  return out;
}

void ReferenceMesh::validate() const {
  std::map<int, Region> patch_region;
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    PanelCorners x;
    for (int l = 0; l < 4; ++l) {
      if (p.nodes[l] >= nodes.size())
        throw GeometryError("panel " + std::to_string(k) + " references missing node", long(k));
      x[l] = nodes[p.nodes[l]];
    }
    auto [it, inserted] = patch_region.emplace(p.patch, p.region);
    if (!inserted && it->second != p.region)
      throw GeometryError("patch " + std::to_string(p.patch) + " spans two regions", long(k));
    static const double qp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (double u : qp)
      for (double v : qp) panel_geometry(x, u, v, long(k));
  }
  for (const auto& c : constraints) {
    double sum = 0.0;
    for (const auto& [m, w] : c.masters) {
      if (m >= nodes.size() || m == c.node) throw GeometryError("bad hanging-node master");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw GeometryError("hanging-node weights do not sum to 1");
  }
}

PanelCorners DofHandler::corners(std::size_t panel, const std::vector<Vec3>& positions) const {
  const auto& d = panel_dofs[panel];
  return {positions[d[0]], positions[d[1]], positions[d[2]], positions[d[3]]};
}

DofHandler duplicate_edge_nodes(const ReferenceMesh& mesh) {
  DofHandler h;
  std::set<std::pair<std::size_t, int>> keys;
  std::map<int, Region> patch_region;
  for (const auto& p : mesh.panels) {
    patch_region[p.patch] = p.region;
    for (auto n : p.nodes) keys.insert({n, p.patch});
  }
  std::map<std::pair<std::size_t, int>, std::size_t> index;
  h.node_dofs.assign(mesh.nodes.size(), {});
  for (const auto& key : keys) {
    const std::size_t id = h.n_dofs++;
    index[key] = id;
    h.dof_node.push_back(key.first);
    h.dof_patch.push_back(key.second);
    h.dof_region.push_back(patch_region[key.second]);
    h.node_dofs[key.first].push_back(id);
  }
  h.panel_dofs.resize(mesh.panels.size());
  for (std::size_t k = 0; k < mesh.panels.size(); ++k)
    for (int l = 0; l < 4; ++l) h.panel_dofs[k][l] = index.at({mesh.panels[k].nodes[l], mesh.panels[k].patch});
  h.dof_normal = dof_normals(h, dof_positions(mesh, h));
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
    if (h.node_dofs[n].size() >= 3) h.triple_nodes.push_back(n);

  h.constrained.assign(h.n_dofs, 0);
  for (const auto& c : mesh.constraints) {
    auto it = index.find({c.node, c.patch});
    if (it == index.end()) continue;
    DofConstraint dc;
    dc.dof = it->second;
    for (const auto& [m, w] : c.masters) {
      auto mi = index.find({m, c.patch});
      if (mi == index.end()) throw GeometryError("hanging-node master missing in its patch");
      dc.masters.push_back({mi->second, w});
    }
    h.constrained[dc.dof] = 1;
    h.constraints.push_back(std::move(dc));
  }
  return h;
}

std::vector<Vec3> dof_normals(const DofHandler& dofs, const std::vector<Vec3>& positions) {
  static const double uv[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  std::vector<Vec3> n(dofs.n_dofs, Vec3::Zero());
  for (std::size_t k = 0; k < dofs.panel_dofs.size(); ++k) {
    const auto x = dofs.corners(k, positions);
    for (int l = 0; l < 4; ++l)
      n[dofs.panel_dofs[k][l]] += panel_geometry(x, uv[l][0], uv[l][1], long(k)).normal;
  }
  for (auto& v : n)
    if (v.norm() > 0) v.normalize();
  return n;
}

std::vector<Vec3> dof_positions(const ReferenceMesh& mesh, const DofHandler& dofs) {
  std::vector<Vec3> x(dofs.n_dofs);
  for (std::size_t i = 0; i < dofs.n_dofs; ++i) x[i] = mesh.nodes[dofs.dof_node[i]];
  return x;
}

std::vector<std::size_t> constraint_order(const std::vector<DofConstraint>& constraints) {
  std::map<std::size_t, std::size_t> by_dof;
  for (std::size_t c = 0; c < constraints.size(); ++c) by_dof[constraints[c].dof] = c;
  std::vector<int> state(constraints.size(), 0);  // 0 new, 1 active, 2 done
  std::vector<std::size_t> order;
  order.reserve(constraints.size());
  // Iterative DFS keeps deep chains off the call stack.
  for (std::size_t root = 0; root < constraints.size(); ++root) {
    if (state[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [c, next] = stack.back();
      const auto& masters = constraints[c].masters;
      if (next < masters.size()) {
        auto it = by_dof.find(masters[next++].first);
        if (it == by_dof.end()) continue;
        if (state[it->second] == 1) throw GeometryError("cyclic hanging-node constraints");
        if (state[it->second] == 0) {
          state[it->second] = 1;
          stack.push_back({it->second, 0});
        }
      } else {
        state[c] = 2;
        order.push_back(c);
        stack.pop_back();
      }
    }
  }
  return order;
}

VectorXd constrain_hanging(const VectorXd& field, const std::vector<DofConstraint>& constraints,
                           int stride) {
  VectorXd out = field;
  for (auto c : constraint_order(constraints)) {
    const auto& con = constraints[c];
    for (int s = 0; s < stride; ++s) {
      double v = 0.0;
      for (const auto& [m, w] : con.masters) v += w * out[stride * m + s];
      out[stride * con.dof + s] = v;
    }
  }
  return out;
}

void constrain_hanging(std::vector<Vec3>& field, const std::vector<DofConstraint>& constraints) {
  for (auto c : constraint_order(constraints)) {
    const auto& con = constraints[c];
    Vec3 v = Vec3::Zero();
    for (const auto& [m, w] : con.masters) v += w * field[m];
    field[con.dof] = v;
  }
}

double surface_area(const DofHandler& dofs, const std::vector<Vec3>& positions) {
  const double a = 0.5 - 0.5 / std::sqrt(3.0), b = 0.5 + 0.5 / std::sqrt(3.0);
  const double qp[2] = {a, b};
  double area = 0.0;
  for (std::size_t k = 0; k < dofs.panel_dofs.size(); ++k) {
    const auto x = dofs.corners(k, positions);
    for (double u : qp)
      for (double v : qp) area += 0.25 * panel_geometry(x, u, v, long(k)).jacobian;
  }
  return area;
}

std::size_t NodeRegistry::add(const Vec3& x) {
  std::array<long long, 3> key;
  for (int c = 0; c < 3; ++c) key[c] = std::llround(x[c] / scale_ * 1e9);
  auto [it, inserted] = index_.emplace(key, nodes_.size());
  if (inserted) nodes_.push_back(x);
  return it->second;
}

void add_oriented_panel(ReferenceMesh& mesh, std::array<std::size_t, 4> nodes, Region region,
                        int patch, const Vec3& direction) {
  const PanelCorners x = {mesh.nodes[nodes[0]], mesh.nodes[nodes[1]], mesh.nodes[nodes[2]],
                          mesh.nodes[nodes[3]]};
  const auto g = panel_geometry(x, 0.5, 0.5, long(mesh.panels.size()));
  if (g.normal.dot(direction) < 0) std::swap(nodes[1], nodes[2]);
  mesh.panels.push_back({nodes, region, patch});
}

namespace {

// Face f of the cube: fixed axis, side, and the two in-plane axes.
struct CubeFace {
  int axis;
  int side;
  int a, b;
  Region region;
};

const CubeFace cube_faces[6] = {
    {2, 1, 0, 1, Region::free_surface}, {2, 0, 0, 1, Region::bottom},
    {0, 0, 1, 2, Region::far_field},    {0, 1, 1, 2, Region::far_field},
    {1, 0, 0, 2, Region::far_field},    {1, 1, 0, 2, Region::far_field},
};

}  // namespace

ReferenceMesh make_cube_mesh(int n, double edge, Vec3 origin, bool outward) {
  if (n < 1) throw GeometryError("cube mesh needs n >= 1");
  ReferenceMesh mesh;
  NodeRegistry reg(mesh.nodes, edge);
  for (int f = 0; f < 6; ++f) {
    const auto& face = cube_faces[f];
    Vec3 dir = Vec3::Zero();
    dir[face.axis] = face.side ? 1.0 : -1.0;
    if (!outward) dir = -dir;
    auto node = [&](int i, int j) {
      Vec3 x = origin;
      x[face.axis] += face.side * edge;
      x[face.a] += edge * i / n;
      x[face.b] += edge * j / n;
      return reg.add(x);
    };
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        add_oriented_panel(mesh, {node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)},
                           face.region, f, dir);
  }
  return mesh;
}

ReferenceMesh make_flat_patch(int nx, int ny, double lx, double ly, Region region) {
  ReferenceMesh mesh;
  auto id = [&](int i, int j) { return std::size_t(j) * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) mesh.nodes.push_back(Vec3(lx * i / nx, ly * j / ny, 0.0));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.panels.push_back({{id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1)}, region, 0});
  return mesh;
}

ReferenceMesh make_sphere_mesh(int n, double radius) {
  ReferenceMesh mesh = make_cube_mesh(n, 2.0, Vec3(-1, -1, -1), true);
  for (auto& x : mesh.nodes) x = radius * x.normalized();
  for (auto& p : mesh.panels) {
    p.patch = 0;
    p.region = Region::free_surface;
  }
  return mesh;
}

}  // namespace wavebem
