#include "previs/geometry.hpp"
#include "previs/hash.hpp"

#include <Eigen/Eigenvalues>

#include <queue>
#include <sstream>

namespace previs {

SurfaceMesh build_plate_mesh(int nx, int ny, double width, double height) {
  if (nx < 2 || ny < 2)
    throw InvalidArgument("plate mesh needs nx >= 2 and ny >= 2");
  if (!(width > 0.0) || !(height > 0.0))
    throw InvalidArgument("plate mesh needs positive width and height");

  SurfaceMesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  const Index n = Index(nx) * ny;
  mesh.vertices.resize(n, 3);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Index v = Index(j) * nx + i;
      mesh.vertices(v, 0) = width * i / (nx - 1);
      mesh.vertices(v, 1) = height * j / (ny - 1);
      mesh.vertices(v, 2) = 0.0;
    }
  }

  mesh.triangles.resize(Index(2) * (nx - 1) * (ny - 1), 3);
  Index t = 0;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const std::int32_t a = j * nx + i;
      const std::int32_t b = a + 1;
      const std::int32_t c = a + nx;
      const std::int32_t d = c + 1;
      mesh.triangles.row(t++) << a, b, d;
      mesh.triangles.row(t++) << a, d, c;
    }
  }

  mesh.normals = MatrixX3d::Zero(n, 3);
  mesh.normals.col(2).setOnes();
  mesh.id = mesh_content_id(mesh.vertices, mesh.triangles);
  return mesh;
}

std::string mesh_content_id(const MatrixX3d &vertices,
                            const MatrixX3i &triangles) {
  Sha256 h;
  h.update_doubles({vertices.data(), std::size_t(vertices.size())});
  h.update(triangles.data(), std::size_t(triangles.size()) * sizeof(std::int32_t));
  return "mesh-" + h.hex().substr(0, 16);
}

void validate_mesh(const SurfaceMesh &mesh) {
  const Index n = mesh.vertex_count();
  if (mesh.normals.rows() != n)
    throw InvalidArgument("normal count does not match vertex count");
  for (Index t = 0; t < mesh.triangle_count(); ++t) {
    const auto tri = mesh.triangles.row(t);
    for (int k = 0; k < 3; ++k)
      if (tri(k) < 0 || tri(k) >= n)
        throw InvalidArgument("triangle index out of range");
    if (tri(0) == tri(1) || tri(1) == tri(2) || tri(0) == tri(2))
      throw InvalidArgument("degenerate triangle");
  }
  for (Index v = 0; v < n; ++v)
    if (std::abs(mesh.normals.row(v).norm() - 1.0) > 1e-12)
      throw InvalidArgument("normal is not unit length");
  if (!is_connected(vertex_adjacency(mesh)))
    throw InvalidArgument("mesh adjacency graph is not connected");
}

SparseMatrixd vertex_adjacency(const SurfaceMesh &mesh) {
  const Index n = mesh.vertex_count();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(std::size_t(mesh.triangle_count()) * 6);
  for (Index t = 0; t < mesh.triangle_count(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const auto a = mesh.triangles(t, k);
      const auto b = mesh.triangles(t, (k + 1) % 3);
      entries.emplace_back(a, b, 1.0);
      entries.emplace_back(b, a, 1.0);
    }
  }
  SparseMatrixd adj(n, n);
  // Shared edges produce duplicate triplets; keep weight 1.
  adj.setFromTriplets(entries.begin(), entries.end(),
                      [](double, double) { return 1.0; });
  adj.makeCompressed();
  return adj;
}

SparseMatrixd normalized_laplacian(const SparseMatrixd &adjacency) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n)
    throw InvalidArgument("adjacency must be square");
  VectorXd inv_sqrt_deg(n);
  for (Index v = 0; v < n; ++v) {
    const double deg = adjacency.col(v).sum();
    if (!(deg > 0.0))
      throw InvalidArgument("isolated vertex " + std::to_string(v) +
                            " has degree 0");
    inv_sqrt_deg(v) = 1.0 / std::sqrt(deg);
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(std::size_t(adjacency.nonZeros()) + std::size_t(n));
  for (Index v = 0; v < n; ++v)
    entries.emplace_back(v, v, 1.0);
  for (Index c = 0; c < adjacency.outerSize(); ++c)
    for (SparseMatrixd::InnerIterator it(adjacency, c); it; ++it)
      entries.emplace_back(it.row(), it.col(),
                           -it.value() * inv_sqrt_deg(it.row()) *
                               inv_sqrt_deg(it.col()));
  SparseMatrixd lap(n, n);
  lap.setFromTriplets(entries.begin(), entries.end());
  lap.makeCompressed();
  return lap;
}

SparseMatrixd normalized_laplacian(const SurfaceMesh &mesh) {
  const auto adj = vertex_adjacency(mesh);
  if (!is_connected(adj))
    throw InvalidArgument("mesh adjacency graph is not connected");
  return normalized_laplacian(adj);
}

bool is_connected(const SparseMatrixd &adjacency) {
  const Index n = adjacency.rows();
  if (n == 0)
    return false;
  std::vector<char> seen(std::size_t(n), 0);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Index count = 1;
  while (!frontier.empty()) {
    const Index v = frontier.front();
    frontier.pop();
    for (SparseMatrixd::InnerIterator it(adjacency, v); it; ++it) {
      if (!seen[std::size_t(it.row())]) {
        seen[std::size_t(it.row())] = 1;
        ++count;
        frontier.push(it.row());
      }
    }
  }
  return count == n;
}

SpectralOperator spectral_basis(const SparseMatrixd &laplacian, Index mu) {
  const Index n = laplacian.rows();
  if (mu < 1 || mu > n)
    throw InvalidArgument("spectral_basis needs 1 <= mu <= vertex count");

  const MatrixXd dense = MatrixXd(laplacian);
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success)
    throw EigenSolveError("Laplacian eigensolve did not converge",
                          std::numeric_limits<double>::infinity());

  SpectralOperator op;
  op.mu = mu;
  op.eigenvalues = solver.eigenvalues().head(mu);
  op.eigenvectors = solver.eigenvectors().leftCols(mu);
  for (Index j = 0; j < mu; ++j) {
    auto v = op.eigenvectors.col(j);
    const double tol = 1e-12 * v.norm();
    for (Index i = 0; i < n; ++i) {
      if (std::abs(v(i)) > tol) {
        if (v(i) < 0.0)
          v = -v;
        break;
      }
    }
  }
  // Roundoff can put the null eigenvalue slightly below zero.
  op.eigenvalues(0) = std::max(op.eigenvalues(0), 0.0);

  const double anchor = op.eigenvalues(mu - 1);
  if (anchor > 0.0)
    op.rescaled_eigenvalues = (2.0 / anchor) * op.eigenvalues.array() - 1.0;
  else
    op.rescaled_eigenvalues = VectorXd::Ones(mu);
  op.rescaled_eigenvalues(mu - 1) = 1.0;

  const double residual = spectral_residual(laplacian, op);
  if (!(residual <= 1e-8)) {
    std::ostringstream msg;
    msg << "Laplacian eigensolve residual " << residual << " exceeds 1e-8";
    throw EigenSolveError(msg.str(), residual);
  }
  return op;
}

double spectral_residual(const SparseMatrixd &laplacian,
                         const SpectralOperator &op) {
  const MatrixXd lv = laplacian * op.eigenvectors;
  double worst = 0.0;
  for (Index j = 0; j < op.mu; ++j)
    worst = std::max(worst, (lv.col(j) - op.eigenvalues(j) *
                                             op.eigenvectors.col(j))
                                .norm());
  return worst;
}

} // namespace previs
