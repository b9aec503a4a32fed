#ifndef PREVIS_ENSEMBLE_HPP
#define PREVIS_ENSEMBLE_HPP

#include "previs/geometry.hpp"

#include <optional>

namespace previs {

enum class DesignKind { Lhs, Factorial3, Custom };

std::string to_string(DesignKind kind);
DesignKind design_kind_from_string(const std::string &name);

/// Sampling design: one parameter vector per row.
struct EnsembleDesign {
  ParameterSpace space;
  MatrixXd rows; // samples x parameters
  DesignKind kind = DesignKind::Custom;
  std::uint64_t seed = 0;

  Index size() const { return rows.rows(); }
  ParameterVector row(Index i) const { return rows.row(i).transpose(); }
};

/// Latin hypercube: per column exactly one sample in each of n_samples
/// equal-width strata, uniformly jittered inside its stratum.
EnsembleDesign latin_hypercube(Index n_samples, const ParameterSpace &space,
                               std::uint64_t seed);

/// Full {lo, mid, hi}^n product in lexicographic order (last column fastest).
EnsembleDesign three_level_factorial(const ParameterSpace &space);

/// Analytic stand-in for the FE model:
///   U(a) = U0 + sum_i a_i phi_i + gamma * sum_{i<=j} a_i a_j psi_ij + noise
/// with psi_ij the renormalised elementwise product phi_i .* phi_j.
struct GeneratorConfig {
  std::vector<MatrixX3d> mode_fields; // one per parameter, mm per mm
  MatrixX3d baseline_field;           // mm
  double gamma = 0.0;
  double sigma = 0.0;                 // mm
  std::uint64_t seed = 0;

  Index parameter_count() const { return Index(mode_fields.size()); }
};

/// Knobs for the default hood-like generator on a plate mesh.
struct GeneratorOptions {
  std::vector<double> amplitudes{1.0, 2.5, 0.8, 0.8, 0.4, 0.4};
  double baseline_magnitude = 1.0; // max |U0|, mm
  double bump_radius_fraction = 0.3; // Gaussian radius relative to min extent
  double tangential_fraction = 0.15; // in-plane share of each mode
  double gamma = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Radial bumps at hinge/lock/buffer positions plus a sag baseline.
GeneratorConfig default_generator_config(const SurfaceMesh &mesh,
                                         const GeneratorOptions &options = {});

/// The quadratic coupling fields psi_ij, i <= j, row-major over pairs.
std::vector<MatrixX3d> coupling_fields(const GeneratorConfig &cfg);

VectorField synthesize_field(const SurfaceMesh &mesh,
                             const ParameterVector &params,
                             const GeneratorConfig &cfg);

/// Precomputed generator for repeated evaluation on one mesh.
class FieldGenerator {
public:
  FieldGenerator(const SurfaceMesh &mesh, GeneratorConfig cfg);

  VectorField operator()(const ParameterVector &params) const;
  const GeneratorConfig &config() const { return cfg_; }
  const std::string &mesh_id() const { return mesh_id_; }

private:
  std::string mesh_id_;
  Index vertex_count_;
  GeneratorConfig cfg_;
  std::vector<MatrixX3d> couplings_;
};

/// Parameter/field pairs sharing one mesh and design.
struct Ensemble {
  std::string mesh_id;
  EnsembleDesign design;
  std::vector<VectorField> fields;

  Index size() const { return Index(fields.size()); }
};

/// Evaluates the generator on every design row, order preserving.
Ensemble generate_ensemble(const SurfaceMesh &mesh,
                           const EnsembleDesign &design,
                           const GeneratorConfig &cfg);

} // namespace previs

#endif
