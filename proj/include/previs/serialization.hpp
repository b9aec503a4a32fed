#ifndef PREVIS_SERIALIZATION_HPP
#define PREVIS_SERIALIZATION_HPP

#include "previs/analysis.hpp"
#include "previs/binary_io.hpp"
#include "previs/store.hpp"

namespace previs {

void to_json(Json &j, const ParameterSpace &s);
void from_json(const Json &j, ParameterSpace &s);
void to_json(Json &j, const EnsembleDesign &d);
void from_json(const Json &j, EnsembleDesign &d);
void to_json(Json &j, const OptimizerConfig &c);
/// Missing keys keep the defaults of the named optimizer kind.
void from_json(const Json &j, OptimizerConfig &c);
void to_json(Json &j, const OlffConfig &c);
void from_json(const Json &j, OlffConfig &c);
void to_json(Json &j, const GcnConfig &c);
void from_json(const Json &j, GcnConfig &c);
void to_json(Json &j, const ImpactMetadata &m);
void from_json(const Json &j, ImpactMetadata &m);

/// Row-major little-endian float64 blob of any dense expression.
template <typename Derived>
Blob f64_blob(const Eigen::DenseBase<Derived> &m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      row_major = m;
  return {"f64le", encode_le<double>(std::span<const double>(
                       row_major.data(), std::size_t(row_major.size())))};
}

/// Decodes a float64 blob into a rows x cols matrix, checking its size.
MatrixXd f64_matrix(const Artifact &a, const std::string &name, Index rows,
                    Index cols);
VectorXd f64_vector(const Artifact &a, const std::string &name, Index size);

Artifact encode(const SurfaceMesh &mesh);
Artifact encode(const Ensemble &ensemble);
Artifact encode(const PcaBasis &basis);
Artifact encode(const Regressor &model);
Artifact encode(const ComparisonReport &report);
Artifact encode(const ImpactField &field);
Artifact encode(const ScalarField &field);

template <typename T>
T decode(const Artifact &artifact);

template <> SurfaceMesh decode<SurfaceMesh>(const Artifact &artifact);
template <> Ensemble decode<Ensemble>(const Artifact &artifact);
template <> PcaBasis decode<PcaBasis>(const Artifact &artifact);
template <> Regressor decode<Regressor>(const Artifact &artifact);
template <> ComparisonReport decode<ComparisonReport>(const Artifact &artifact);
template <> ImpactField decode<ImpactField>(const Artifact &artifact);

template <typename T>
std::string save_artifact(ArtifactStore &store, const T &value) {
  return store.save(encode(value));
}

template <typename T>
T load_artifact(const ArtifactStore &store, const std::string &id) {
  return decode<T>(store.load(id));
}

} // namespace previs

#endif
