#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "wavebem/surface_mesh.hpp"

using namespace wavebem;

namespace {

PanelCorners unit_square() {
  return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
}

// Panel on the quarter cylinder y^2 + z^2 = 1, x in [0,1].
Vec3 cylinder_map(double u, double v) {
  const double th = 0.5 * pi * v;
  return Vec3(u, std::cos(th), std::sin(th));
}

// Left unit cell plus the right unit cell split into four; hanging node at
// (1, 0.5) hangs on the left cell's right edge.
ReferenceMesh two_cell_refined() {
  ReferenceMesh m;
  auto add = [&](double x, double y) {
    m.nodes.push_back(Vec3(x, y, 0));
    return m.nodes.size() - 1;
  };
  const auto a = add(0, 0), b = add(1, 0), c = add(0, 1), d = add(1, 1);
  const auto h = add(1, 0.5), e1 = add(1.5, 0), e2 = add(2, 0), e3 = add(1.5, 0.5),
             e4 = add(2, 0.5), e5 = add(1.5, 1), e6 = add(2, 1);
  m.panels.push_back({{a, b, c, d}, Region::free_surface, 0});
  m.panels.push_back({{b, e1, h, e3}, Region::free_surface, 0});
  m.panels.push_back({{e1, e2, e3, e4}, Region::free_surface, 0});
  m.panels.push_back({{h, e3, d, e5}, Region::free_surface, 0});
  m.panels.push_back({{e3, e4, e5, e6}, Region::free_surface, 0});
  m.constraints.push_back({h, 0, {{b, 0.5}, {d, 0.5}}});
  return m;
}

double evaluate(const PanelCorners& /*x*/, const std::array<double, 4>& values, double u, double v) {
  const auto n = shape_values(u, v);
  double s = 0;
  for (int l = 0; l < 4; ++l) s += n[l] * values[l];
  return s;
}

}  // namespace

TEST(ShapeValues, NodalAndCenter) {
  const auto a = shape_values(0, 0);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(a[1] + a[2] + a[3], 0.0);
  for (double s : shape_values(0.5, 0.5)) EXPECT_DOUBLE_EQ(s, 0.25);
  // Hand-evaluated tensor-product formula at (1, 0.5).
  const auto c = shape_values(1.0, 0.5);
  EXPECT_DOUBLE_EQ(c[0], 0.0);
  EXPECT_DOUBLE_EQ(c[1], 0.5);
  EXPECT_DOUBLE_EQ(c[2], 0.0);
  EXPECT_DOUBLE_EQ(c[3], 0.5);
}

TEST(ShapeValues, RejectsOutOfRange) {
  EXPECT_THROW(shape_values(-0.1, 0.5), std::out_of_range);
  EXPECT_THROW(shape_values(0.5, 1.01), std::out_of_range);
}

TEST(ShapeValues, PartitionOfUnityGrid) {
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const auto n = shape_values(i / 9.0, j / 9.0);
      EXPECT_LT(std::abs(n[0] + n[1] + n[2] + n[3] - 1.0), 1e-14);
      Vec2 g = Vec2::Zero();
      for (const auto& d : shape_gradients(i / 9.0, j / 9.0)) g += d;
      EXPECT_LT(g.norm(), 1e-14);
    }
}

TEST(PanelGeometry, FlatUnitAndScaled) {
  const auto g = panel_geometry(unit_square(), 0.3, 0.7);
  EXPECT_NEAR(std::abs(g.normal.z()), 1.0, 1e-15);
  EXPECT_NEAR(g.jacobian, 1.0, 1e-15);
  auto x = unit_square();
  for (auto& p : x) p *= 2.0;
  EXPECT_NEAR(panel_geometry(x, 0.3, 0.7).jacobian, 4.0, 1e-14);
}

TEST(PanelGeometry, CurvedJacobianMatchesCentralDifference) {
  const PanelCorners x = {cylinder_map(0, 0), cylinder_map(1, 0), cylinder_map(0, 1),
                          cylinder_map(1, 1)};
  // Oracle: central differences of the bilinear point map.
  auto point = [&](double u, double v) { return panel_geometry(x, u, v).point; };
  const double h = 1e-5;
  const Vec3 tu = (point(0.5 + h, 0.5) - point(0.5 - h, 0.5)) / (2 * h);
  const Vec3 tv = (point(0.5, 0.5 + h) - point(0.5, 0.5 - h)) / (2 * h);
  const auto g = panel_geometry(x, 0.5, 0.5);
  EXPECT_NEAR(g.jacobian, tu.cross(tv).norm(), 1e-9);
  EXPECT_NEAR(g.normal.norm(), 1.0, 1e-15);
}

TEST(PanelGeometry, DegenerateReportsPanelId) {
  const PanelCorners x = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  try {
    panel_geometry(x, 0.5, 0.5, 17);
    FAIL() << "expected GeometryError";
  } catch (const GeometryError& e) {
    EXPECT_EQ(e.panel(), 17);
  }
}

TEST(SurfaceGradient, LinearAndConstantFields) {
  const auto x = unit_square();
  const auto g = panel_geometry(x, 0.4, 0.6);
  const auto grads = surface_gradient_basis(g, 0.4, 0.6);
  Vec3 gx = Vec3::Zero(), gc = Vec3::Zero();
  for (int l = 0; l < 4; ++l) {
    gx += x[l].x() * grads[l];
    gc += 3.5 * grads[l];
  }
  EXPECT_LT((gx - Vec3(1, 0, 0)).norm(), 1e-14);
  EXPECT_LT(gc.norm(), 1e-14);
}

TEST(SurfaceGradient, TiltedPlaneTangentialProjection) {
  // Planar parallelogram in a tilted plane.
  const Vec3 o(0.1, -0.2, 0.3), e1 = Vec3(1.0, 0.2, 0.5), e2 = Vec3(-0.3, 0.9, 0.4);
  const PanelCorners x = {o, o + e1, o + e2, o + e1 + e2};
  const Vec3 a(0.7, -1.3, 2.1);
  const auto g = panel_geometry(x, 0.25, 0.8);
  const auto grads = surface_gradient_basis(g, 0.25, 0.8);
  Vec3 gs = Vec3::Zero();
  for (int l = 0; l < 4; ++l) gs += a.dot(x[l]) * grads[l];
  const Vec3 oracle = a - a.dot(g.normal) * g.normal;
  EXPECT_LT((gs - oracle).norm(), 1e-13);
}

TEST(SurfaceGradient, TangentOnCurvedPanels) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  const PanelCorners x = {cylinder_map(0, 0), cylinder_map(1, 0.1), cylinder_map(0, 0.9),
                          cylinder_map(1.2, 1)};
  for (int t = 0; t < 50; ++t) {
    const double u = 0.5 + 0.5 * U(rng), v = 0.5 + 0.5 * U(rng);
    const auto g = panel_geometry(x, u, v);
    const auto grads = surface_gradient_basis(g, u, v);
    Vec3 gs = Vec3::Zero();
    for (int l = 0; l < 4; ++l) gs += U(rng) * grads[l];
    EXPECT_LE(std::abs(gs.dot(g.normal)), 1e-12 * gs.norm());
  }
}

TEST(DuplicateEdgeNodes, CubeCounts) {
  const auto mesh = make_cube_mesh(2);
  const auto dofs = duplicate_edge_nodes(mesh);
  int face = -1, edge = -1, corner = -1;
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
    const Vec3& x = mesh.nodes[n];
    int on = 0;
    for (int c = 0; c < 3; ++c) on += (x[c] == 0.0 || x[c] == 1.0);
    if (on == 1 && face < 0) face = int(n);
    if (on == 2 && edge < 0) edge = int(n);
    if (on == 3 && corner < 0) corner = int(n);
  }
  ASSERT_GE(face, 0);
  EXPECT_EQ(dofs.node_dofs[face].size(), 1u);
  ASSERT_EQ(dofs.node_dofs[edge].size(), 2u);
  EXPECT_EQ(dofs.node_dofs[corner].size(), 3u);
  const auto& e = dofs.node_dofs[edge];
  EXPECT_LT(std::abs(dofs.dof_normal[e[0]].dot(dofs.dof_normal[e[1]])), 1e-14);
  EXPECT_EQ(dofs.triple_nodes.size(), 8u);
  // 6 patches of 3x3 nodes each.
  EXPECT_EQ(dofs.n_dofs, 54u);
  EXPECT_EQ(dofs.n_vector_dofs(), 3 * dofs.n_dofs);
}

TEST(DuplicateEdgeNodes, CubeNormalsPointOutward) {
  const auto mesh = make_cube_mesh(3);
  const auto dofs = duplicate_edge_nodes(mesh);
  const auto x = dof_positions(mesh, dofs);
  for (std::size_t k = 0; k < dofs.panel_dofs.size(); ++k) {
    const auto c = dofs.corners(k, x);
    const auto g = panel_geometry(c, 0.5, 0.5);
    EXPECT_GT(g.normal.dot(g.point - Vec3(0.5, 0.5, 0.5)), 0.0);
  }
}

TEST(Mesh, CubeAreaAndJacobians) {
  const auto mesh = make_cube_mesh(4);
  EXPECT_NO_THROW(mesh.validate());
  const auto dofs = duplicate_edge_nodes(mesh);
  EXPECT_NEAR(surface_area(dofs, dof_positions(mesh, dofs)), 6.0, 1e-12);
}

TEST(ConstrainHanging, MidpointAndConstant) {
  std::vector<DofConstraint> cons = {{2, {{0, 0.5}, {1, 0.5}}}};
  VectorXd f(3);
  f << 2.0, 4.0, 0.0;
  EXPECT_DOUBLE_EQ(constrain_hanging(f, cons)[2], 3.0);
  VectorXd c = VectorXd::Constant(3, 1.7);
  EXPECT_EQ(constrain_hanging(c, cons), c);
}

TEST(ConstrainHanging, ChainsAndCycles) {
  std::vector<DofConstraint> chain = {{3, {{2, 0.5}, {0, 0.5}}}, {2, {{0, 0.5}, {1, 0.5}}}};
  VectorXd f(4);
  f << 0.0, 4.0, 100.0, 100.0;
  const auto g = constrain_hanging(f, chain);
  EXPECT_DOUBLE_EQ(g[2], 2.0);
  EXPECT_DOUBLE_EQ(g[3], 1.0);
  std::vector<DofConstraint> cycle = {{0, {{1, 1.0}}}, {1, {{0, 1.0}}}};
  EXPECT_THROW(constrain_hanging(f, cycle), GeometryError);
}

TEST(ConstrainHanging, ContinuityAcrossHangingEdge) {
  const auto mesh = two_cell_refined();
  EXPECT_NO_THROW(mesh.validate());
  const auto dofs = duplicate_edge_nodes(mesh);
  ASSERT_EQ(dofs.constraints.size(), 1u);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  VectorXd f(dofs.n_dofs);
  for (auto& v : f) v = U(rng);
  f = constrain_hanging(f, dofs.constraints);
  auto vals = [&](std::size_t k) {
    std::array<double, 4> v;
    for (int l = 0; l < 4; ++l) v[l] = f[dofs.panel_dofs[k][l]];
    return v;
  };
  const auto x = dof_positions(mesh, dofs);
  // Shared edge x = 1: left cell at u = 1; fine cells 1 (y in [0,.5]) and 3.
  for (int s = 0; s < 20; ++s) {
    const double y = (s + 0.5) / 20.0;
    const double left = evaluate(dofs.corners(0, x), vals(0), 1.0, y);
    const double right = y < 0.5 ? evaluate(dofs.corners(1, x), vals(1), 0.0, 2 * y)
                                 : evaluate(dofs.corners(3, x), vals(3), 0.0, 2 * y - 1);
    EXPECT_NEAR(left, right, 1e-13);
  }
}

TEST(NodeRegistry, MergesCoincidentPoints) {
  std::vector<Vec3> nodes;
  NodeRegistry reg(nodes);
  const auto a = reg.add(Vec3(0.1, 0.2, 0.3));
  const auto b = reg.add(Vec3(0.1 + 1e-13, 0.2, 0.3));
  const auto c = reg.add(Vec3(0.1, 0.2, 0.31));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(nodes.size(), 2u);
}
