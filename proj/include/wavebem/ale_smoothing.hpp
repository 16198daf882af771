#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "wavebem/scenario.hpp"
#include "wavebem/surface_mesh.hpp"

namespace wavebem {

// Solves w.n_w = v.n_w, w.n_b = 0, w.t = 0 with t = n_b x n_w.
// Throws GeometryError when the normals are closer than 5 degrees.
Vec3 waterline_velocity(const Vec3& v, const Vec3& n_w, const Vec3& n_b);

// Motion class of a geometric node, from the regions and patches meeting there.
enum class NodeKind : std::uint8_t {
  interior,    // one patch
  waterline,   // free surface and one hull patch
  stem_top,    // free surface and both hull patches (bow and stern tips)
  fs_wall,     // free surface and one far-field wall
  fs_corner,   // free surface and two walls
  fixed,       // every other curve (keel, stems, bottom and wall edges)
};

struct Wireframe {
  std::vector<NodeKind> kind;  // per geometric node
  std::vector<std::size_t> waterline;  // gamma^{w,h}, including stem tops
  std::vector<std::size_t> fs_wall;    // gamma^{w,ff}, including corners
  std::vector<std::size_t> bottom_wall;  // gamma^{b,ff}
  // Per node: DOF on the free surface and DOF of the other side (hull or wall),
  // or n_dofs when absent.
  std::vector<std::size_t> fs_dof, other_dof;
};

Wireframe classify_wireframe(const DofHandler& dofs, std::size_t n_nodes);

// Laplace-Beltrami stiffness on the reference surface, assembled per DOF.
// Wireframe DOFs (nodes on more than one patch) carry Dirichlet data, so the
// patches decouple. Hanging DOFs are condensed onto their masters.
struct SmoothingSystem {
  Eigen::SparseMatrix<double> K;  // n_dofs x n_dofs, before any elimination
  std::vector<char> dirichlet;    // per DOF
  std::vector<std::size_t> free;  // independent, non-Dirichlet DOFs
  std::vector<std::size_t> fixed; // independent Dirichlet DOFs
  Eigen::SparseMatrix<double> E;  // DOF values from independent values (n_dofs x [free|fixed])
  Eigen::SparseMatrix<double> A;  // condensed free-free block
  Eigen::SparseMatrix<double> B;  // condensed free-fixed block
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver;
};

// K^ij = sum_K int grad_s phi^j . grad_s phi^i J du dv on `reference`.
Eigen::SparseMatrix<double> laplace_beltrami_matrix(const DofHandler& dofs,
                                                    const std::vector<Vec3>& reference,
                                                    int order = 3);

// Throws GeometryError for degenerate panels and when a connected component
// of free DOFs touches no Dirichlet DOF.
SmoothingSystem assemble_laplace_beltrami(const DofHandler& dofs, const std::vector<Vec3>& reference,
                                          const std::vector<char>& dirichlet);

// Dirichlet mask with every duplicated DOF fixed.
std::vector<char> wireframe_mask(const DofHandler& dofs);

// Displacement form: given Dirichlet displacements (entries on non-Dirichlet
// DOFs are ignored) returns the harmonic extension on every DOF.
std::vector<Vec3> solve_smoothing_displacement(const SmoothingSystem& sys,
                                               const std::vector<Vec3>& boundary_displacement);

// g = reference + harmonic extension of (boundary - reference) on Dirichlet DOFs.
std::vector<Vec3> solve_smoothing(const SmoothingSystem& sys, const std::vector<Vec3>& reference,
                                  const std::vector<Vec3>& boundary);

// Hull projector and side per DOF (+1 port, -1 starboard, 0 not on the hull).
struct HullProjection {
  WigleyHull hull;
  std::vector<double> side;
};
HullProjection hull_projection(const DofHandler& dofs, const std::vector<Vec3>& reference,
                               const WigleyHull& hull);

// Hull DOFs: P_h g. Free-surface DOFs: z replaced by eta. Other DOFs: g.
std::vector<Vec3> apply_projection(const DofHandler& dofs, const std::vector<Vec3>& g,
                                   const VectorXd& eta, const HullProjection& hull);

}  // namespace wavebem
