#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "wavebem/krylov.hpp"
#include "wavebem/quadrature.hpp"
#include "wavebem/surface_mesh.hpp"

namespace wavebem {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Collocated system (alpha + N) phi = D phin, one row per DOF.
struct BemSystem {
  VectorXd alpha;
  DenseMatrix N;
  DenseMatrix D;
};

double green_function(const Vec3& r);
// grad G(r) . n with r = field point - collocation point.
double green_normal_gradient(const Vec3& r, const Vec3& n);

BemSystem assemble_system(const DofHandler& dofs, const std::vector<Vec3>& positions,
                          const QuadratureRule& quad = {});

VectorXd compute_alpha_rbm(const DenseMatrix& N);

enum class BcType : std::uint8_t { dirichlet, neumann };

struct MixedBcAssignment {
  std::vector<BcType> type;
  VectorXd phi;   // used on Dirichlet DOFs
  VectorXd phin;  // used on Neumann DOFs
};

// Free-surface DOFs Dirichlet, everything else Neumann; data zero.
MixedBcAssignment default_assignment(const DofHandler& dofs);

// Which equation each DOF row carries in the mixed system.
struct MixedLayout {
  enum class Row : std::uint8_t { bie, continuity, constraint };
  std::vector<Row> row;
  // DOF that carries the BIE row on this DOF's node.
  std::vector<std::size_t> primary;
};

// Each group of coincident DOFs keeps one BIE row (on its Dirichlet member
// if any); the others get phi continuity rows. Throws SolverError when two
// coincident DOFs are both Dirichlet.
MixedLayout mixed_layout(const DofHandler& dofs, const std::vector<BcType>& type);

// Dense mixed-system matrix and right-hand side; unknown j is phin_j on
// Dirichlet DOFs and phi_j on Neumann DOFs.
void build_mixed_system(const BemSystem& sys, const DofHandler& dofs, const MixedBcAssignment& bc,
                        const MixedLayout& layout, Eigen::MatrixXd& A, VectorXd& rhs);

struct MixedSolveParams {
  GmresParams gmres;
  bool lu_fallback = true;
};

struct MixedSolution {
  VectorXd phi;
  VectorXd phin;
  int iterations = 0;
  double relative_residual = 0.0;
  bool used_lu = false;
};

MixedSolution solve_mixed_bvp(const BemSystem& sys, const DofHandler& dofs,
                              const MixedBcAssignment& bc, const MixedSolveParams& params = {});

struct InteriorValue {
  double value = 0.0;
  double min_distance = 0.0;  // to the nearest panel centroid
  bool near_boundary = false;  // closer than one panel diameter
};

InteriorValue evaluate_interior_potential(const Vec3& x0, const VectorXd& phi, const VectorXd& phin,
                                          const DofHandler& dofs,
                                          const std::vector<Vec3>& positions, int order = 8);

void write_matrix_market(std::ostream& os, const DenseMatrix& m);

}  // namespace wavebem
