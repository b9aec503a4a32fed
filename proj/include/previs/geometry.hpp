#ifndef PREVIS_GEOMETRY_HPP
#define PREVIS_GEOMETRY_HPP

#include "previs/types.hpp"

#include <Eigen/SparseCore>

namespace previs {

/// Triangulated surface with unit per-vertex normals. The vertex adjacency
/// graph of the triangulation is the graph the spectral regressor runs on.
struct SurfaceMesh {
  MatrixX3d vertices;  // mm
  MatrixX3i triangles;
  MatrixX3d normals;
  std::string id;      // content hash of vertices + triangles
  int nx = 0;          // grid resolution, 0 for non-grid meshes
  int ny = 0;

  Index vertex_count() const { return vertices.rows(); }
  Index triangle_count() const { return triangles.rows(); }
};

/// Truncated graph Fourier basis: the mu lowest eigenpairs of the
/// normalized Laplacian, plus eigenvalues mapped affinely onto [-1, 1]
/// so that the largest retained one sits exactly at 1.
struct SpectralOperator {
  Index mu = 0;
  VectorXd eigenvalues;          // ascending, mu entries
  MatrixXd eigenvectors;         // vertex_count x mu, orthonormal columns
  VectorXd rescaled_eigenvalues; // mu entries, last one == 1
};

using SparseMatrixd = Eigen::SparseMatrix<double>;

/// Regular nx x ny grid in the z = 0 plane spanning width x height mm,
/// two triangles per cell, normals +z.
SurfaceMesh build_plate_mesh(int nx, int ny, double width, double height);

/// Recomputes the content hash id of a mesh.
std::string mesh_content_id(const MatrixX3d &vertices,
                            const MatrixX3i &triangles);

/// Throws InvalidArgument when a SurfaceMesh invariant is violated.
void validate_mesh(const SurfaceMesh &mesh);

/// Unweighted 1-ring adjacency (symmetric, zero diagonal).
SparseMatrixd vertex_adjacency(const SurfaceMesh &mesh);

/// I - D^{-1/2} A D^{-1/2}. Rejects graphs with isolated vertices.
SparseMatrixd normalized_laplacian(const SparseMatrixd &adjacency);
SparseMatrixd normalized_laplacian(const SurfaceMesh &mesh);

bool is_connected(const SparseMatrixd &adjacency);

/// First mu eigenpairs of a symmetric Laplacian. Each eigenvector is signed
/// so its first non-negligible component is positive.
SpectralOperator spectral_basis(const SparseMatrixd &laplacian, Index mu);

/// max_i ||L v_i - lambda_i v_i||_2 over the retained pairs.
double spectral_residual(const SparseMatrixd &laplacian,
                         const SpectralOperator &op);

} // namespace previs

#endif
