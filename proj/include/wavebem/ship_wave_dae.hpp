#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "wavebem/ale_smoothing.hpp"
#include "wavebem/bdf.hpp"
#include "wavebem/free_surface.hpp"
#include "wavebem/laplace_bem.hpp"
#include "wavebem/scenario.hpp"

namespace wavebem {

// Semi-discrete ship-wave problem F(t, y, y') = 0 on a fixed topology.
//
// y = [x (3 per DOF, interleaved), phi (1 per DOF), phin (1 per DOF)].
// Slot of x_i component c: 3i + c; phi_i: 3n + i; phin_i: 4n + i.
//
// Row of each slot:
//  - phi on the free surface: SUPG projection of the dynamic condition.
//  - phin on the free surface, phi elsewhere: collocated BIE row on the
//    node's primary DOF, phi continuity on its duplicates.
//  - phin off the free surface: phin - phin_bar.
//  - z on the free surface: SUPG projection of the kinematic condition.
//  - other coordinates: wireframe motion, smoothing and projection rows.
//  - hanging DOFs: interpolation constraints, test side condensed.
class ShipWaveDae : public DaeSystem {
 public:
  // Panel quadrature from scenario.solver.bem.
  ShipWaveDae(const ReferenceMesh& mesh, const Scenario& scenario);

  std::size_t size() const override { return 5 * n_; }
  std::vector<char> differential() const override { return differential_; }
  void residual(double t, const VectorXd& y, const VectorXd& yp, VectorXd& r) override;
  // Difference quotient with the BEM matrices frozen at y.
  void directional_derivative(double t, const VectorXd& y, const VectorXd& yp, const VectorXd& r,
                              const VectorXd& dy, const VectorXd& dyp, VectorXd& out) override;
  void setup_jacobian(double t, const VectorXd& y, const VectorXd& yp, double alpha) override;
  void precondition(const VectorXd& v, VectorXd& out) override;

  std::size_t x_slot(std::size_t dof, int c) const { return 3 * dof + std::size_t(c); }
  std::size_t phi_slot(std::size_t dof) const { return 3 * n_ + dof; }
  std::size_t phin_slot(std::size_t dof) const { return 4 * n_ + dof; }

  // Calm water at rest: reference positions, phi = phin = 0.
  VectorXd initial_state() const;
  std::vector<Vec3> positions(const VectorXd& y) const;
  VectorXd phi(const VectorXd& y) const { return y.segment(Eigen::Index(3 * n_), Eigen::Index(n_)); }
  VectorXd phin(const VectorXd& y) const { return y.segment(Eigen::Index(4 * n_), Eigen::Index(n_)); }
  // z of the free-surface DOFs, 0 elsewhere.
  VectorXd eta(const VectorXd& y) const;

  FrameKinematics frame(double t) const;
  // BEM matrices at the positions of y (cached).
  const BemSystem& bem(const VectorXd& y);
  // Nodal full gradient of phi: mean of the panel surface gradients at the
  // DOF's corners plus phin n.
  std::vector<Vec3> nodal_gradient(const VectorXd& y) const;
  // p - p_a per DOF from the Bernoulli equation with the ALE derivative y'.
  VectorXd pressure(double t, const VectorXd& y, const VectorXd& yp) const;
  Vec3 hull_force(double t, const VectorXd& y, const VectorXd& yp) const;
  double beach_absorption(const VectorXd& y) const;

  const ReferenceMesh& mesh() const { return mesh_; }
  const DofHandler& dofs() const { return dofs_; }
  const Wireframe& wireframe() const { return wire_; }
  const std::vector<Vec3>& reference() const { return ref_; }
  const Scenario& scenario() const { return scenario_; }
  const std::vector<std::size_t>& free_surface_panels() const { return fs_panels_; }
  const std::vector<std::size_t>& hull_panels() const { return hull_panels_; }
  std::size_t bem_assemblies() const { return assemblies_; }

 private:
  void evaluate(double t, const VectorXd& y, const VectorXd& yp, const BemSystem& bem, VectorXd& r) const;

  ReferenceMesh mesh_;
  Scenario scenario_;
  QuadratureRule quad_;
  DofHandler dofs_;
  std::size_t n_ = 0;
  std::vector<Vec3> ref_;
  Wireframe wire_;
  MixedLayout layout_;
  std::vector<char> is_fs_;
  std::vector<std::size_t> fs_panels_, hull_panels_;
  std::vector<std::vector<std::pair<std::size_t, int>>> dof_panels_;  // (panel, corner)
  std::vector<std::size_t> constraint_order_;
  SmoothingSystem smoothing_;
  HullProjection hull_;
  std::vector<char> differential_;

  // BEM cache keyed on the exact positions.
  VectorXd bem_x_;
  BemSystem bem_;
  bool bem_valid_ = false;
  std::size_t assemblies_ = 0;

  // Preconditioner data.
  double alpha_ = 1.0;
  std::vector<std::size_t> fs_dofs_;
  std::vector<std::size_t> fs_index_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> fs_lu_;
  std::shared_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> bie_lu_;
  BemSystem pc_bem_;
  std::vector<Vec2> pc_beam_gradient_;  // waterline d(half beam)/d(x, z)
};

}  // namespace wavebem
