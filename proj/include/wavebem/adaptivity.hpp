#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "wavebem/scenario.hpp"
#include "wavebem/surface_mesh.hpp"

namespace wavebem {

// Active leaves of a quadtree forest as a panel mesh.
struct LeafMesh {
  ReferenceMesh mesh;
  std::vector<std::size_t> cell;  // per panel: cell id in the forest
  std::vector<std::size_t> node;  // per mesh node: node id in the forest
};

// Forest of quadtrees rooted at the panels of an initial mesh. Children of
// a cell split it at the (u,v) midpoints; child c covers the quarter at
// corner c. Node coordinates are the current reference positions.
class AdaptiveMesh {
 public:
  struct Cell {
    std::array<std::size_t, 4> nodes{};
    Region region = Region::free_surface;
    int patch = 0;
    int level = 0;
    long parent = -1;
    std::array<long, 4> children{-1, -1, -1, -1};
    bool active = true;  // true for leaves
  };
  // How a node was created: copy of a root node, midpoint of an edge, or
  // centre of a cell.
  struct NodeOrigin {
    enum class Kind : std::uint8_t { root, edge, centre } kind = Kind::root;
    std::array<std::size_t, 4> from{};
  };

  AdaptiveMesh() = default;
  // Requires a mesh without hanging constraints.
  explicit AdaptiveMesh(const ReferenceMesh& mesh);

  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<NodeOrigin>& origins() const { return origin_; }
  std::vector<Vec3>& nodes() { return nodes_; }
  // Active leaves, depth first from the roots in order.
  std::vector<std::size_t> leaves() const;
  std::size_t n_leaves() const;
  LeafMesh leaf_mesh() const;

  // Splits a leaf; midpoints are bilinear averages of the corners.
  void refine(std::size_t cell);
  // Merges the four leaf children of `cell` back into it.
  void coarsen(std::size_t cell);
  // Midpoint node of the edge (a, b), or npos.
  std::size_t midpoint(std::size_t a, std::size_t b) const;
  bool used(std::size_t node) const { return use_count_[node] > 0; }
  // Largest level difference between cells sharing an edge.
  int max_level_jump() const;

  static constexpr std::size_t npos = std::size_t(-1);

  // Binary image of the whole forest, inactive cells and nodes included.
  void save(std::ostream& os) const;
  static AdaptiveMesh load(std::istream& is);

 private:
  std::size_t edge_node(std::size_t a, std::size_t b);
  void collect(std::size_t cell, std::vector<std::size_t>& out) const;

  std::vector<Vec3> nodes_;
  std::vector<NodeOrigin> origin_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> roots_;
  std::vector<long> centre_;  // per cell
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_mid_;
  std::vector<int> use_count_;  // active leaves having the node as a corner
};

// Kelly indicator tau_K with tau_K^2 = (h_K / 24) sum over the edges of K of
// the integral of [grad_s phi . n_dK]^2, h_K the panel diameter and n_dK the
// in-surface outward edge normal. Edges between different patches and open
// boundary edges contribute zero.
std::vector<double> kelly_estimate(const DofHandler& dofs, const std::vector<Vec3>& positions,
                                   const VectorXd& phi, const std::vector<HangingConstraint>& hanging,
                                   int edge_order = 4);

enum class CellFlag : std::uint8_t { keep, refine, coarsen };

// Top ceil(f_r n) cells by error refined, bottom ceil(f_c n) coarsened; ties
// go to the lower index. Refinement wins when both apply.
std::vector<CellFlag> flag_fixed_fraction(const std::vector<double>& errors, double f_r, double f_c);

struct RefinementLimits {
  double h_min = 0.0;  // cells with diameter below 2 h_min are not split
  std::size_t max_dofs = std::size_t(-1);
};

struct RefinementReport {
  std::size_t refined = 0;   // cells split, closure included
  std::size_t coarsened = 0;
  std::size_t closure = 0;   // extra splits for the one-level and patch rules
  std::size_t dropped_refine = 0;
  std::size_t dropped_coarsen = 0;
  std::vector<std::string> log;
};

// Applies leaf flags (indexed like leaf_mesh().mesh.panels). Refinement is
// closed under the one-level rule and made conforming across patch
// boundaries; coarsening is dropped where it would break either rule.
// Non-hanging hull nodes are then projected onto `hull` (waterline nodes in
// y only); free-surface midpoints keep the bilinear interpolation of eta.
RefinementReport execute_refinement(AdaptiveMesh& mesh, const std::vector<CellFlag>& flags,
                                    const WigleyHull* hull = nullptr,
                                    const RefinementLimits& limits = {});

// Values on the DOFs of `to` from values on the DOFs of `from`, both leaf
// meshes of the same forest. Surviving (node, patch) pairs are copied, new
// nodes interpolate their origin and hanging constraints are applied.
// `stride` > 1 treats the vectors as interleaved blocks per DOF.
VectorXd transfer_solution(const AdaptiveMesh& forest, const LeafMesh& from, const DofHandler& from_dofs,
                           const LeafMesh& to, const DofHandler& to_dofs, const VectorXd& values,
                           int stride = 1);

void write_adapt_log_header(std::ostream& os);
void write_adapt_log(std::ostream& os, std::size_t step, std::size_t n_cells, std::size_t n_dofs,
                     double max_tau, double min_tau);

}  // namespace wavebem
