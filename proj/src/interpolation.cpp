#include "previs/interpolation.hpp"

#include <cmath>

namespace previs {

namespace {

void require_basis(const PcaBasis &basis, const ParameterVector &target) {
  if (basis.k() == 0)
    throw InvalidArgument("interpolation needs a non-empty basis");
  if (target.size() != basis.parameter_count())
    throw InvalidArgument("target has " + std::to_string(target.size()) +
                          " parameters, basis expects " +
                          std::to_string(basis.parameter_count()));
  if (!target.allFinite())
    throw InvalidArgument("target parameters must be finite");
}

} // namespace

LlsfSolution llsf_solve(const PcaBasis &basis, const ParameterVector &target) {
  require_basis(basis, target);
  LlsfSolution out;
  out.coefficients =
      pseudo_inverse_solve(basis.basis_params, target - basis.mean_params,
                           kLlsfRcond, &out.effective_rank);
  return out;
}

ScalarField interpolate(const PcaBasis &basis, const ParameterVector &target) {
  const auto c = llsf_solve(basis, target).coefficients;
  return {basis.mesh_id, basis.mean_field + basis.basis_fields * c};
}

ImpactField delta_field(const PcaBasis &basis, const ParameterVector &a_pred,
                        const ParameterVector &a_true) {
  ImpactField out;
  out.field.mesh_id = basis.mesh_id;
  out.field.values =
      interpolate(basis, a_pred).values - interpolate(basis, a_true).values;
  out.meta.kind = "delta";
  out.meta.a_pred = a_pred;
  out.meta.a_true = a_true;
  return out;
}

InterpolationReport validate_interpolation(const PcaBasis &basis,
                                           const Ensemble &test,
                                           const SurfaceMesh &mesh) {
  if (test.size() == 0)
    throw InvalidArgument("validation needs a non-empty test ensemble");
  if (test.mesh_id != basis.mesh_id || mesh.id != basis.mesh_id)
    throw InvalidArgument("test ensemble is not on the basis mesh");

  InterpolationReport report;
  report.per_sample_max.reserve(std::size_t(test.size()));
  double sum_sq = 0.0;
  for (Index i = 0; i < test.size(); ++i) {
    const VectorXd truth =
        condense_signed_magnitude(test.fields[std::size_t(i)], mesh).values;
    const VectorXd err = interpolate(basis, test.design.row(i)).values - truth;
    const double worst = err.cwiseAbs().maxCoeff();
    report.per_sample_max.push_back(worst);
    report.max_abs_error = std::max(report.max_abs_error, worst);
    sum_sq += err.squaredNorm();
  }
  report.rms_error =
      std::sqrt(sum_sq / double(test.size() * mesh.vertex_count()));
  return report;
}

} // namespace previs
