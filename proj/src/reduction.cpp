#include "previs/reduction.hpp"

#include <Eigen/SVD>

namespace previs {

ScalarField condense_signed_magnitude(const VectorField &field,
                                      const SurfaceMesh &mesh) {
  if (field.values.rows() != mesh.vertex_count() ||
      (!field.mesh_id.empty() && !mesh.id.empty() && field.mesh_id != mesh.id))
    throw InvalidArgument("vector field does not belong to mesh");
  return {mesh.id, signed_magnitude(field.values, mesh.normals)};
}

MatrixXd condense_ensemble(const Ensemble &ensemble, const SurfaceMesh &mesh) {
  MatrixXd out(ensemble.size(), mesh.vertex_count());
  for (Index i = 0; i < ensemble.size(); ++i)
    out.row(i) =
        condense_signed_magnitude(ensemble.fields[std::size_t(i)], mesh)
            .values.transpose();
  return out;
}

PcaFit fit_pca(const MatrixXd &fields, Index k) {
  const Index samples = fields.rows();
  const Index vertices = fields.cols();
  if (samples < 2)
    throw InvalidArgument("fit_pca needs at least two fields");
  if (k < 0 || k > std::min(samples, vertices))
    throw InvalidArgument("fit_pca: k exceeds min(field count, vertex count)");

  PcaFit fit;
  fit.basis.mean_field = fields.colwise().mean().transpose();
  const MatrixXd centred = fields.rowwise() - fit.basis.mean_field.transpose();

  Eigen::BDCSVD<MatrixXd> svd(centred, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd &sigma = svd.singularValues();
  fit.all_singular_values = sigma;

  // Numerical rank: relative to the leading singular value and to the raw
  // data scale, so exactly-constant input yields an empty basis.
  const double total = sigma.squaredNorm();
  const double tol = std::max(1e-10 * (sigma.size() ? sigma(0) : 0.0),
                              1e-13 * fields.norm());
  Index kept = 0;
  while (kept < k && kept < sigma.size() && sigma(kept) > tol)
    ++kept;

  fit.basis.basis_fields = svd.matrixV().leftCols(kept);
  MatrixXd left = svd.matrixU().leftCols(kept);
  for (Index j = 0; j < kept; ++j) {
    Index arg = 0;
    fit.basis.basis_fields.col(j).cwiseAbs().maxCoeff(&arg);
    if (fit.basis.basis_fields(arg, j) < 0.0) {
      fit.basis.basis_fields.col(j) *= -1.0;
      left.col(j) *= -1.0;
    }
  }
  fit.basis.singular_values = sigma.head(kept);
  fit.basis.explained_variance_ratio =
      total > 0.0 ? VectorXd(sigma.head(kept).array().square() / total)
                  : VectorXd();
  fit.scores = left * sigma.head(kept).asDiagonal();
  fit.weights = left * sigma.head(kept).cwiseInverse().asDiagonal();
  return fit;
}

BasisParameters basis_parameter_sets(const MatrixXd &weights,
                                     const EnsembleDesign &design) {
  if (weights.rows() != design.size())
    throw InvalidArgument("score rows do not match design rows");
  BasisParameters out;
  out.mean_params = design.rows.colwise().mean().transpose();
  out.basis_params =
      (design.rows.rowwise() - out.mean_params.transpose()).transpose() *
      weights;
  return out;
}

PcaBasis build_pca_basis(const Ensemble &ensemble, const SurfaceMesh &mesh,
                         Index k) {
  const MatrixXd fields = condense_ensemble(ensemble, mesh);
  PcaFit fit = fit_pca(fields, k);
  auto params = basis_parameter_sets(fit.weights, ensemble.design);
  PcaBasis basis = std::move(fit.basis);
  basis.mesh_id = mesh.id;
  basis.space = ensemble.design.space;
  basis.basis_params = std::move(params.basis_params);
  basis.mean_params = std::move(params.mean_params);
  return basis;
}

VectorXd cumulative_explained_variance(const PcaBasis &basis) {
  VectorXd out(basis.explained_variance_ratio.size());
  double acc = 0.0;
  for (Index j = 0; j < out.size(); ++j)
    out(j) = acc += basis.explained_variance_ratio(j);
  return out;
}

double explained_variance(const PcaBasis &basis) {
  return basis.explained_variance_ratio.sum();
}

} // namespace previs
