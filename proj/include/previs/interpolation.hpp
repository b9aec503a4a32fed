#ifndef PREVIS_INTERPOLATION_HPP
#define PREVIS_INTERPOLATION_HPP

#include "previs/reduction.hpp"

#include <Eigen/SVD>

#include <optional>

namespace previs {

/// Minimum-norm least-squares solution of A x = b through the SVD
/// pseudoinverse, discarding singular values below rcond * sigma_max.
template <typename DerivedA, typename DerivedB>
VectorX<typename DerivedA::Scalar>
pseudo_inverse_solve(const Eigen::MatrixBase<DerivedA> &A,
                     const Eigen::MatrixBase<DerivedB> &b,
                     typename DerivedA::Scalar rcond, Index *rank = nullptr) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = MatrixX<Scalar>;
  Eigen::JacobiSVD<Matrix> svd(A.derived(),
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto &sigma = svd.singularValues();
  const Scalar cutoff = sigma.size() ? rcond * sigma(0) : Scalar(0);
  Index r = 0;
  while (r < sigma.size() && sigma(r) > cutoff)
    ++r;
  if (rank)
    *rank = r;
  VectorX<Scalar> coeffs = svd.matrixU().leftCols(r).transpose() * b;
  coeffs.array() /= sigma.head(r).array();
  return svd.matrixV().leftCols(r) * coeffs;
}

inline constexpr double kLlsfRcond = 1e-10;

struct LlsfSolution {
  VectorXd coefficients; // k
  Index effective_rank = 0;
};

/// c = argmin ||P c - (target - mean_params)||, minimum norm.
LlsfSolution llsf_solve(const PcaBasis &basis, const ParameterVector &target);

/// U*(target) = mean_field + sum_j c_j B_j.
ScalarField interpolate(const PcaBasis &basis, const ParameterVector &target);

/// Which error span an impact field was built from.
struct ImpactMetadata {
  std::string kind;                // "delta", "whisker", "outlier"
  std::string model_id;
  std::optional<Index> parameter;  // index into the parameter space
  std::optional<std::string> parameter_name;
  double span_lo = 0.0;            // mm
  double span_hi = 0.0;            // mm
  ParameterVector a_pred;
  ParameterVector a_true;
};

struct ImpactField {
  ScalarField field;
  ImpactMetadata meta;
};

/// Signed Delta U = U*(a_pred) - U*(a_true).
ImpactField delta_field(const PcaBasis &basis, const ParameterVector &a_pred,
                        const ParameterVector &a_true);

struct InterpolationReport {
  double max_abs_error = 0.0;  // mm
  double rms_error = 0.0;      // mm, over all samples and nodes
  std::vector<double> per_sample_max;
};

/// Interpolates every test design row and compares against the condensed
/// ground-truth field node by node.
InterpolationReport validate_interpolation(const PcaBasis &basis,
                                           const Ensemble &test,
                                           const SurfaceMesh &mesh);

} // namespace previs

#endif
