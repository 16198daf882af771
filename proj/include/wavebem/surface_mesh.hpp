#pragma once

#include <array>
#include <map>
#include <utility>
#include <vector>

#include "wavebem/common.hpp"

namespace wavebem {

// Local node order in (u,v): (0,0), (1,0), (0,1), (1,1).
struct Panel {
  std::array<std::size_t, 4> nodes{};
  Region region = Region::free_surface;
  // Smooth sub-surface id. Nodes shared by panels of different patches get
  // one DOF per patch, since the normal jumps there.
  int patch = 0;
};

// Node `node`, seen from panels of `patch`, equals the weighted sum of the
// masters (same patch).
struct HangingConstraint {
  std::size_t node = 0;
  int patch = 0;
  std::vector<std::pair<std::size_t, double>> masters;
};

struct ReferenceMesh {
  std::vector<Vec3> nodes;
  std::vector<Panel> panels;
  std::vector<HangingConstraint> constraints;

  // Throws GeometryError for bad indices, bad weights or degenerate panels.
  void validate() const;
};

std::array<double, 4> shape_values(double u, double v);
std::array<Vec2, 4> shape_gradients(double u, double v);

using PanelCorners = std::array<Vec3, 4>;

struct PanelGeometry {
  Vec3 point;
  Vec3 t_u;
  Vec3 t_v;
  Vec3 normal;
  double jacobian = 0.0;
};

PanelGeometry panel_geometry(const PanelCorners& x, double u, double v, long panel_id = -1);

// Surface gradients of the four panel basis functions at (u,v).
std::array<Vec3, 4> surface_gradient_basis(const PanelGeometry& g, double u, double v);

double panel_diameter(const PanelCorners& x);
double longest_diagonal(const PanelCorners& x);

struct DofConstraint {
  std::size_t dof = 0;
  std::vector<std::pair<std::size_t, double>> masters;
};

struct DofHandler {
  std::size_t n_dofs = 0;
  std::vector<std::array<std::size_t, 4>> panel_dofs;
  std::vector<std::size_t> dof_node;
  std::vector<int> dof_patch;
  std::vector<Region> dof_region;
  // Average unit normal of the DOF's own side on the reference geometry.
  std::vector<Vec3> dof_normal;
  // All DOFs sitting on a geometric node, ordered by patch id.
  std::vector<std::vector<std::size_t>> node_dofs;
  // Nodes shared by three or more patches (basin and hull corners).
  std::vector<std::size_t> triple_nodes;
  std::vector<DofConstraint> constraints;
  std::vector<char> constrained;

  std::size_t n_vector_dofs() const { return 3 * n_dofs; }
  bool duplicated(std::size_t dof) const { return node_dofs[dof_node[dof]].size() > 1; }
  PanelCorners corners(std::size_t panel, const std::vector<Vec3>& positions) const;
};

DofHandler duplicate_edge_nodes(const ReferenceMesh& mesh);

// Unit normal per DOF: normalized sum of the corner normals of its panels.
std::vector<Vec3> dof_normals(const DofHandler& dofs, const std::vector<Vec3>& positions);
// Per-DOF copy of the node coordinates.
std::vector<Vec3> dof_positions(const ReferenceMesh& mesh, const DofHandler& dofs);

// Sets every constrained entry to the interpolation of its masters.
// Chains are resolved in dependency order; cycles raise GeometryError.
// `stride` > 1 treats the field as interleaved blocks per DOF.
VectorXd constrain_hanging(const VectorXd& field, const std::vector<DofConstraint>& constraints,
                           int stride = 1);
void constrain_hanging(std::vector<Vec3>& field, const std::vector<DofConstraint>& constraints);

// Constraint order such that masters are processed before dependants.
std::vector<std::size_t> constraint_order(const std::vector<DofConstraint>& constraints);

double surface_area(const DofHandler& dofs, const std::vector<Vec3>& positions);

// Deduplicates nodes by coordinates rounded to 1e-9 of `scale`.
class NodeRegistry {
 public:
  explicit NodeRegistry(std::vector<Vec3>& nodes, double scale = 1.0) : nodes_(nodes), scale_(scale) {}
  std::size_t add(const Vec3& x);

 private:
  std::vector<Vec3>& nodes_;
  double scale_;
  std::map<std::array<long long, 3>, std::size_t> index_;
};

// Appends a panel with corner nodes in (u,v) order, flipping the
// parametrization if its normal disagrees with `direction`.
void add_oriented_panel(ReferenceMesh& mesh, std::array<std::size_t, 4> nodes, Region region,
                        int patch, const Vec3& direction);

// Structured test geometries.
ReferenceMesh make_cube_mesh(int n, double edge = 1.0, Vec3 origin = Vec3::Zero(),
                             bool outward = true);
ReferenceMesh make_flat_patch(int nx, int ny, double lx = 1.0, double ly = 1.0,
                              Region region = Region::free_surface);
// Cube mesh with nodes pushed onto the sphere of given radius; single patch.
ReferenceMesh make_sphere_mesh(int n, double radius = 1.0);

}  // namespace wavebem
