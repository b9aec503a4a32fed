#include "doctest.h"

#include "previs/geometry.hpp"

#include <Eigen/Eigenvalues>

using namespace previs;

namespace {

SurfaceMesh single_triangle() {
  SurfaceMesh m;
  m.vertices.resize(3, 3);
  m.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  m.triangles.resize(1, 3);
  m.triangles << 0, 1, 2;
  m.normals = MatrixX3d::Zero(3, 3);
  m.normals.col(2).setOnes();
  m.id = mesh_content_id(m.vertices, m.triangles);
  return m;
}

SparseMatrixd path3() {
  std::vector<Eigen::Triplet<double>> t{{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 1, 1}};
  SparseMatrixd a(3, 3);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

// Independent dense construction of I - D^-1/2 A D^-1/2.
MatrixXd dense_normalized_laplacian(const MatrixXd &adj) {
  const VectorXd d = adj.rowwise().sum();
  const VectorXd s = d.cwiseSqrt().cwiseInverse();
  return MatrixXd::Identity(adj.rows(), adj.cols()) -
         s.asDiagonal() * adj * s.asDiagonal();
}

// Counts triangles by walking every grid cell.
Index enumerate_grid_triangles(int nx, int ny) {
  Index count = 0;
  for (int j = 0; j < ny - 1; ++j)
    for (int i = 0; i < nx - 1; ++i)
      count += 2;
  return count;
}

} // namespace

TEST_CASE("plate mesh sizes") {
  const auto small = build_plate_mesh(2, 2, 1, 1);
  CHECK(small.vertex_count() == 4);
  CHECK(small.triangle_count() == 2);

  const auto desk = build_plate_mesh(40, 25, 1200, 700);
  CHECK(desk.vertex_count() == 1000);
  CHECK(desk.triangle_count() == 1872);
  CHECK(desk.triangle_count() == enumerate_grid_triangles(40, 25));
  CHECK_NOTHROW(validate_mesh(desk));
  CHECK(desk.vertices.col(0).maxCoeff() == doctest::Approx(1200));
  CHECK(desk.vertices.col(1).maxCoeff() == doctest::Approx(700));
}

TEST_CASE("plate mesh normals are +z") {
  const auto m = build_plate_mesh(3, 2, 1, 1);
  for (Index v = 0; v < m.vertex_count(); ++v) {
    CHECK(m.normals(v, 0) == 0.0);
    CHECK(m.normals(v, 1) == 0.0);
    CHECK(m.normals(v, 2) == 1.0);
  }
}

TEST_CASE("plate mesh is deterministic and rejects tiny grids") {
  CHECK(build_plate_mesh(5, 4, 2, 1).id == build_plate_mesh(5, 4, 2, 1).id);
  CHECK(build_plate_mesh(5, 4, 2, 1).id != build_plate_mesh(4, 5, 2, 1).id);
  CHECK_THROWS_AS(build_plate_mesh(1, 5, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(build_plate_mesh(5, 1, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(build_plate_mesh(5, 5, 0, 1), InvalidArgument);
}

TEST_CASE("mesh validation catches broken invariants") {
  auto m = build_plate_mesh(3, 3, 1, 1);
  auto bad = m;
  bad.triangles(0, 1) = bad.triangles(0, 0);
  CHECK_THROWS_AS(validate_mesh(bad), InvalidArgument);
  bad = m;
  bad.triangles(0, 2) = 99;
  CHECK_THROWS_AS(validate_mesh(bad), InvalidArgument);
  bad = m;
  bad.normals(0, 2) = 0.5;
  CHECK_THROWS_AS(validate_mesh(bad), InvalidArgument);
}

TEST_CASE("normalized Laplacian of K3 and a path") {
  const auto lap_k3 = normalized_laplacian(single_triangle());
  const MatrixXd dense_k3 = MatrixXd(lap_k3);
  CHECK((dense_k3 - dense_k3.transpose()).norm() == 0.0);
  MatrixXd adj_k3 = MatrixXd::Ones(3, 3) - MatrixXd::Identity(3, 3);
  CHECK((dense_k3 - dense_normalized_laplacian(adj_k3)).norm() < 1e-15);

  const VectorXd ev_k3 =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(dense_k3).eigenvalues();
  CHECK(ev_k3(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ev_k3(1) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(ev_k3(2) == doctest::Approx(1.5).epsilon(1e-12));

  const MatrixXd dense_path = MatrixXd(normalized_laplacian(path3()));
  CHECK((dense_path - dense_normalized_laplacian(MatrixXd(path3()))).norm() <
        1e-15);
  const VectorXd ev_path =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(dense_path).eigenvalues();
  CHECK(std::abs(ev_path(0)) < 1e-12);
  CHECK(ev_path(1) == doctest::Approx(1.0));
  CHECK(ev_path(2) == doctest::Approx(2.0));
}

TEST_CASE("sqrt-degree vector is the Laplacian null vector") {
  const auto mesh = build_plate_mesh(7, 5, 3, 2);
  const auto adj = vertex_adjacency(mesh);
  const auto lap = normalized_laplacian(adj);
  VectorXd sqrt_deg(adj.rows());
  for (Index v = 0; v < adj.rows(); ++v)
    sqrt_deg(v) = std::sqrt(adj.col(v).sum());
  CHECK((lap * sqrt_deg).norm() < 1e-12 * sqrt_deg.norm());
}

TEST_CASE("isolated vertex is rejected") {
  std::vector<Eigen::Triplet<double>> t{{0, 1, 1}, {1, 0, 1}};
  SparseMatrixd a(3, 3);
  a.setFromTriplets(t.begin(), t.end());
  CHECK_THROWS_AS(normalized_laplacian(a), InvalidArgument);
  CHECK_FALSE(is_connected(a));
}

TEST_CASE("spectral basis on K3") {
  const auto op = spectral_basis(normalized_laplacian(single_triangle()), 3);
  CHECK(op.eigenvalues(0) == doctest::Approx(0.0));
  CHECK(op.rescaled_eigenvalues(0) == doctest::Approx(-1.0));
  CHECK(op.rescaled_eigenvalues(1) == doctest::Approx(1.0));
  CHECK(op.rescaled_eigenvalues(2) == 1.0);
}

TEST_CASE("spectral basis with mu = 1 is the constant-sign null vector") {
  const auto mesh = build_plate_mesh(6, 4, 5, 3);
  const auto op = spectral_basis(normalized_laplacian(mesh), 1);
  CHECK(op.mu == 1);
  CHECK(std::abs(op.eigenvalues(0)) < 1e-10);
  CHECK(op.eigenvectors.col(0).minCoeff() > 0.0);
  CHECK(op.rescaled_eigenvalues(0) == 1.0);
  CHECK_THROWS_AS(spectral_basis(normalized_laplacian(mesh), 0), InvalidArgument);
  CHECK_THROWS_AS(spectral_basis(normalized_laplacian(mesh), 25), InvalidArgument);
}

TEST_CASE("spectral basis on the desk plate") {
  const auto mesh = build_plate_mesh(40, 25, 1200, 700);
  const auto lap = normalized_laplacian(mesh);
  const auto op = spectral_basis(lap, 100);
  REQUIRE(op.eigenvectors.cols() == 100);

  CHECK(std::abs(op.eigenvalues(0)) < 1e-10);
  for (Index i = 1; i < op.mu; ++i)
    CHECK(op.eigenvalues(i) >= op.eigenvalues(i - 1));
  CHECK(op.eigenvalues.maxCoeff() <= 2.0);

  const MatrixXd gram = op.eigenvectors.transpose() * op.eigenvectors;
  CHECK((gram - MatrixXd::Identity(100, 100)).cwiseAbs().maxCoeff() < 1e-8);

  const MatrixXd lv = lap * op.eigenvectors;
  for (Index j = 0; j < op.mu; ++j)
    CHECK((lv.col(j) - op.eigenvalues(j) * op.eigenvectors.col(j)).norm() <
          1e-8 * op.eigenvectors.col(j).norm());
  CHECK(spectral_residual(lap, op) < 1e-8);

  // Affine, order preserving, pinned at the last retained frequency.
  CHECK(op.rescaled_eigenvalues(op.mu - 1) == 1.0);
  CHECK(op.rescaled_eigenvalues(0) == doctest::Approx(-1.0).epsilon(1e-12));
  for (Index i = 1; i < op.mu; ++i)
    CHECK(op.rescaled_eigenvalues(i) >= op.rescaled_eigenvalues(i - 1));
  const double slope = 2.0 / op.eigenvalues(op.mu - 1);
  for (Index i = 0; i < op.mu; ++i)
    CHECK(op.rescaled_eigenvalues(i) ==
          doctest::Approx(slope * op.eigenvalues(i) - 1.0));

  // Sign convention: first non-negligible entry positive.
  for (Index j = 0; j < op.mu; ++j) {
    Index i = 0;
    while (std::abs(op.eigenvectors(i, j)) <= 1e-12 * op.eigenvectors.col(j).norm())
      ++i;
    CHECK(op.eigenvectors(i, j) > 0.0);
  }
}
