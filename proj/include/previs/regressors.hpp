#ifndef PREVIS_REGRESSORS_HPP
#define PREVIS_REGRESSORS_HPP

#include "previs/ensemble.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>

namespace previs {

/// g(x) = sum_k theta_k (T_k(x) - T_k(1)), Chebyshev polynomials of the
/// first kind by the three-term recurrence. Vanishes identically at x = 1.
template <typename Scalar, typename DerivedTheta>
Scalar cheb_response(const Eigen::MatrixBase<DerivedTheta> &theta, Scalar x) {
  if (!(std::abs(x) <= Scalar(1) + Scalar(1e-12)))
    throw InvalidArgument("cheb_response: lambda outside [-1, 1]");
  // (t, u) track T_k(x) and T_k(1) through the same recurrence.
  Scalar t_prev = Scalar(0), t = Scalar(0);
  Scalar u_prev = Scalar(0), u = Scalar(0);
  Scalar acc = Scalar(0);
  for (Index k = 0; k < theta.size(); ++k) {
    Scalar t_next, u_next;
    if (k == 0) {
      t_next = Scalar(1);
      u_next = Scalar(1);
    } else if (k == 1) {
      t_next = x;
      u_next = Scalar(1);
    } else {
      t_next = Scalar(2) * x * t - t_prev;
      u_next = Scalar(2) * u - u_prev;
    }
    t_prev = t;
    t = t_next;
    u_prev = u;
    u = u_next;
    acc += theta(k) * (t - u);
  }
  return acc;
}

/// mu x order matrix of T_k(x_i) - T_k(1).
MatrixXd shifted_chebyshev_table(const VectorXd &x, Index order);

enum class RegressorKind { Olff, Gcn };

std::string to_string(RegressorKind kind);
RegressorKind regressor_kind_from_string(const std::string &name);

/// Flat weight vector partitioned into named dense blocks (column-major).
class ParameterStore {
public:
  struct Segment {
    std::string name;
    Index offset = 0;
    Index rows = 0;
    Index cols = 0;
    Index size() const { return rows * cols; }
  };

  Index add(const std::string &name, Index rows, Index cols);

  Eigen::Map<MatrixXd> matrix(const std::string &name);
  Eigen::Map<const MatrixXd> matrix(const std::string &name) const;
  /// The same block viewed inside another vector with this layout, such as
  /// a gradient.
  Eigen::Map<MatrixXd> matrix_in(VectorXd &flat, const std::string &name) const;

  const Segment &segment(const std::string &name) const;
  const std::vector<Segment> &segments() const { return segments_; }

  VectorXd &values() { return values_; }
  const VectorXd &values() const { return values_; }
  Index size() const { return values_.size(); }

private:
  VectorXd values_;
  std::vector<Segment> segments_;
};

struct OlffConfig {
  Index input_dim = 0;
  Index hidden = 75;
  Index output = 6;
};

struct GcnConfig {
  Index mu = 100;
  Index channels = 3;
  Index filters = 25;
  Index cheb_order = 15;
  Index fc = 2048;
  Index output = 6;
};

/// in*hidden + hidden + hidden*out + out.
Index olff_weight_count(const OlffConfig &cfg);
Index gcn_conv_weight_count(const GcnConfig &cfg);
Index gcn_weight_count(const GcnConfig &cfg);

/// Per-entry z-scoring of flattened (vertex-major, xyz) fields. Empty means
/// identity.
struct Standardizer {
  VectorXd mean;
  VectorXd scale;

  bool fitted() const { return mean.size() > 0; }
  MatrixXd apply(const MatrixXd &flat_columns) const;
  static Standardizer fit(const MatrixXd &flat_columns);
};

struct OptimizerConfig {
  enum class Kind { SgdNesterov, Adagrad };
  Kind kind = Kind::SgdNesterov;
  double lr = 1e-3;
  double momentum = 0.9;  // SGD only
  double eps = 1e-8;      // AdaGrad only
  int epochs = 2000;
  Index batch_size = 32;
  std::uint64_t shuffle_seed = 0;

  static OptimizerConfig olff_default();
  static OptimizerConfig gcn_default();
  void validate() const;
};

std::string to_string(OptimizerConfig::Kind kind);
OptimizerConfig::Kind optimizer_kind_from_string(const std::string &name);

/// Trained or freshly initialised field -> parameter model.
struct Regressor {
  RegressorKind kind = RegressorKind::Olff;
  ParameterStore weights;
  OlffConfig olff;
  GcnConfig gcn;
  std::shared_ptr<const SpectralOperator> spectral;  // GCN only
  Standardizer input_norm;
  std::vector<double> training_log;  // mean loss per epoch
  std::uint64_t seed = 0;
  std::string mesh_id;
  std::optional<OptimizerConfig> optimizer;

  Index input_vertices() const;
  Index output_dim() const;
};

Regressor init_olff(Index input_dim, Index hidden, Index output,
                    std::uint64_t seed);

Regressor init_gcn(std::shared_ptr<const SpectralOperator> spectral,
                   const GcnConfig &cfg, std::uint64_t seed);

/// Flattens fields into columns (3 * vertices x samples).
MatrixXd flatten_fields(std::span<const VectorField> fields);

/// Network input after standardisation; for the GCN this is the spectral
/// projection of each channel (channels * mu x samples, channel-major).
MatrixXd prepare_inputs(const Regressor &model, const MatrixXd &flat_columns);

/// outputs x samples.
MatrixXd forward_prepared(const Regressor &model, const MatrixXd &prepared);

/// GCN filter-bank output before the dense layers (filters * mu x samples,
/// filter-major).
MatrixXd gcn_features(const Regressor &model, const MatrixXd &prepared);

/// Mean squared error over outputs and samples; fills grad when non-null.
double loss_and_gradient(const Regressor &model, const MatrixXd &prepared,
                         const MatrixXd &targets, VectorXd *grad);

ParameterVector olff_forward(const Regressor &model, const VectorField &field);
ParameterVector gcn_forward(const Regressor &model, const VectorField &field);
ParameterVector predict(const Regressor &model, const VectorField &field);
/// samples x outputs, in input order.
MatrixXd predict_batch(const Regressor &model,
                       std::span<const VectorField> fields);

struct TrainingProgress {
  int epoch = 0;  // 1-based
  int epochs = 0;
  double loss = 0.0;
};

using ProgressCallback = std::function<void(const TrainingProgress &)>;

/// Mini-batch MSE training. Fits the input standardiser from the training
/// fields when the model has none. Throws DivergenceError on a non-finite
/// epoch loss.
Regressor train(Regressor model, const Ensemble &train_set,
                const OptimizerConfig &opt,
                const ProgressCallback &progress = {});

struct GradientCheckResult {
  double max_rel_error = 0.0;
  Index checked = 0;
};

/// Central finite differences against backprop on randomly sampled weights
/// spread over all segments.
GradientCheckResult gradient_check(const Regressor &model,
                                   const VectorField &field,
                                   const ParameterVector &target, double h,
                                   Index n_weights = 200,
                                   std::uint64_t seed = 0);

} // namespace previs

#endif
