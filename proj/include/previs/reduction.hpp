#ifndef PREVIS_REDUCTION_HPP
#define PREVIS_REDUCTION_HPP

#include "previs/ensemble.hpp"

namespace previs {

/// Per-vertex projection of a displacement onto the unit normal; keeps the
/// sign of the displacement along the normal.
template <typename DerivedField, typename DerivedNormals>
VectorX<typename DerivedField::Scalar>
signed_magnitude(const Eigen::MatrixBase<DerivedField> &displacement,
                 const Eigen::MatrixBase<DerivedNormals> &normals) {
  return displacement.cwiseProduct(normals).rowwise().sum();
}

ScalarField condense_signed_magnitude(const VectorField &field,
                                      const SurfaceMesh &mesh);

/// Condensed fields stacked as rows (samples x vertices).
MatrixXd condense_ensemble(const Ensemble &ensemble, const SurfaceMesh &mesh);

/// Mean-centred PCA basis over scalar fields together with the parameter
/// sets built by the same ensemble weights.
///
/// basis_fields.col(j) = sum_i weights(i, j) * (field_i - mean)
/// basis_params.col(j) = sum_i weights(i, j) * (params_i - mean_params)
struct PcaBasis {
  std::string mesh_id;
  ParameterSpace space;
  VectorXd mean_field;               // vertices
  MatrixXd basis_fields;             // vertices x k, orthonormal columns
  MatrixXd basis_params;             // parameters x k
  VectorXd mean_params;              // parameters
  VectorXd explained_variance_ratio; // k, non-increasing
  VectorXd singular_values;          // k

  Index k() const { return basis_fields.cols(); }
  Index vertex_count() const { return mean_field.size(); }
  Index parameter_count() const { return mean_params.size(); }
  ScalarField mean() const { return {mesh_id, mean_field}; }
};

struct PcaFit {
  PcaBasis basis;           // basis_params/mean_params left empty
  MatrixXd scores;          // samples x k, centred_i = sum_j scores(i,j) B_j
  MatrixXd weights;         // samples x k, left singular vector / sigma
  VectorXd all_singular_values;
};

/// Thin SVD of the centred data. Components whose singular value is
/// numerically zero are dropped, so the returned k can be smaller than the
/// requested one (0 for constant input). Each basis field is signed so that
/// its largest-magnitude entry is positive.
PcaFit fit_pca(const MatrixXd &fields, Index k);

struct BasisParameters {
  MatrixXd basis_params; // parameters x k
  VectorXd mean_params;
};

BasisParameters basis_parameter_sets(const MatrixXd &weights,
                                     const EnsembleDesign &design);

/// Condense, fit, and attach basis parameter sets in one call.
PcaBasis build_pca_basis(const Ensemble &ensemble, const SurfaceMesh &mesh,
                         Index k = 10);

/// Prefix sums of the explained-variance ratios (0 for an empty basis).
VectorXd cumulative_explained_variance(const PcaBasis &basis);
double explained_variance(const PcaBasis &basis);

} // namespace previs

#endif
