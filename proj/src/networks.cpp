#include "previs/regressors.hpp"

namespace previs {

namespace {

MatrixXd relu(const MatrixXd &x) { return x.cwiseMax(0.0); }

struct DenseHead {
  MatrixXd pre;     // hidden x samples
  MatrixXd hidden;  // rectified
  MatrixXd output;  // outputs x samples
};

template <typename Weight>
DenseHead dense_head(const ParameterStore &w, const Weight &hidden_weight,
                     const std::string &hidden_name, const MatrixXd &input) {
  DenseHead h;
  h.pre = hidden_weight * input;
  h.pre.colwise() += VectorXd(w.matrix(hidden_name + ".bias").col(0));
  h.hidden = relu(h.pre);
  h.output = w.matrix("output.weight") * h.hidden;
  h.output.colwise() += VectorXd(w.matrix("output.bias").col(0));
  return h;
}

MatrixXd filter_gains(const Regressor &model) {
  const MatrixXd table = shifted_chebyshev_table(
      model.spectral->rescaled_eigenvalues, model.gcn.cheb_order);
  return model.weights.matrix("conv.theta") * table.transpose();
}

MatrixXd apply_filters(const GcnConfig &cfg, const MatrixXd &gains,
                       const MatrixXd &prepared) {
  const Index mu = cfg.mu;
  MatrixXd z = MatrixXd::Zero(cfg.filters * mu, prepared.cols());
  for (Index f = 0; f < cfg.filters; ++f)
    for (Index c = 0; c < cfg.channels; ++c)
      z.middleRows(f * mu, mu).array() +=
          prepared.middleRows(c * mu, mu).array().colwise() *
          gains.row(f * cfg.channels + c).transpose().array();
  return z;
}

// Every feature is a gain times one prepared input, so the fc layer applied
// to the features equals a (fc x channels * mu) matrix applied to the
// prepared input directly.
MatrixXd fold_filters(const GcnConfig &cfg, const MatrixXd &gains,
                      const Eigen::Map<const MatrixXd> &fc_weight) {
  const Index mu = cfg.mu;
  MatrixXd folded(fc_weight.rows(), cfg.channels * mu);
  for (Index i = 0; i < mu; ++i) {
    for (Index c = 0; c < cfg.channels; ++c) {
      auto col = folded.col(c * mu + i);
      col.setZero();
      for (Index f = 0; f < cfg.filters; ++f)
        col += gains(f * cfg.channels + c, i) * fc_weight.col(f * mu + i);
    }
  }
  return folded;
}

void check_prepared(const Regressor &model, const MatrixXd &prepared) {
  const Index expected = model.kind == RegressorKind::Olff
                             ? model.olff.input_dim
                             : model.gcn.channels * model.gcn.mu;
  if (prepared.rows() != expected)
    throw InvalidArgument("prepared input has wrong dimension");
}

} // namespace

MatrixXd gcn_features(const Regressor &model, const MatrixXd &prepared) {
  if (model.kind != RegressorKind::Gcn)
    throw InvalidArgument("gcn_features needs a GCN model");
  check_prepared(model, prepared);
  return apply_filters(model.gcn, filter_gains(model), prepared);
}

MatrixXd forward_prepared(const Regressor &model, const MatrixXd &prepared) {
  check_prepared(model, prepared);
  const auto &w = model.weights;
  if (model.kind == RegressorKind::Olff)
    return dense_head(w, w.matrix("hidden.weight"), "hidden", prepared).output;
  const MatrixXd folded =
      fold_filters(model.gcn, filter_gains(model), w.matrix("fc.weight"));
  return dense_head(w, folded, "fc", prepared).output;
}

double loss_and_gradient(const Regressor &model, const MatrixXd &prepared,
                         const MatrixXd &targets, VectorXd *grad) {
  check_prepared(model, prepared);
  if (targets.rows() != model.output_dim() ||
      targets.cols() != prepared.cols())
    throw InvalidArgument("targets do not match model output / batch size");

  const auto &w = model.weights;
  const bool gcn = model.kind == RegressorKind::Gcn;
  const std::string hidden_name = gcn ? "fc" : "hidden";
  MatrixXd gains;
  DenseHead head;
  if (gcn) {
    gains = filter_gains(model);
    head = dense_head(w, fold_filters(model.gcn, gains, w.matrix("fc.weight")),
                      hidden_name, prepared);
  } else {
    head = dense_head(w, w.matrix("hidden.weight"), hidden_name, prepared);
  }

  const MatrixXd diff = head.output - targets;
  const double scale = 1.0 / double(diff.size());
  const double loss = scale * diff.squaredNorm();
  if (!grad)
    return loss;

  grad->resize(w.size());
  const MatrixXd d_out = (2.0 * scale) * diff;
  w.matrix_in(*grad, "output.weight").noalias() = d_out * head.hidden.transpose();
  w.matrix_in(*grad, "output.bias") = d_out.rowwise().sum();
  const MatrixXd d_pre =
      (w.matrix("output.weight").transpose() * d_out)
          .cwiseProduct((head.pre.array() > 0.0).cast<double>().matrix());
  w.matrix_in(*grad, hidden_name + ".bias") = d_pre.rowwise().sum();

  if (!gcn) {
    w.matrix_in(*grad, "hidden.weight").noalias() = d_pre * prepared.transpose();
    return loss;
  }

  // Gradients through the folded layer: with P = d_pre * prepared^T,
  //   d fc.weight[:, f mu + i] = sum_c gain(f, c, i) P[:, c mu + i]
  //   d gain(f, c, i)          = fc.weight[:, f mu + i] . P[:, c mu + i]
  const auto &cfg = model.gcn;
  const Index mu = cfg.mu;
  const MatrixXd p = d_pre * prepared.transpose();
  const auto fc_weight = w.matrix("fc.weight");
  auto d_fc = w.matrix_in(*grad, "fc.weight");
  MatrixXd d_gains(cfg.filters * cfg.channels, mu);
  for (Index i = 0; i < mu; ++i) {
    for (Index f = 0; f < cfg.filters; ++f) {
      auto d_col = d_fc.col(f * mu + i);
      const auto w_col = fc_weight.col(f * mu + i);
      for (Index c = 0; c < cfg.channels; ++c) {
        const Index row = f * cfg.channels + c;
        const auto p_col = p.col(c * mu + i);
        if (c == 0)
          d_col = gains(row, i) * p_col;
        else
          d_col += gains(row, i) * p_col;
        d_gains(row, i) = w_col.dot(p_col);
      }
    }
  }
  const MatrixXd table =
      shifted_chebyshev_table(model.spectral->rescaled_eigenvalues,
                              cfg.cheb_order);
  w.matrix_in(*grad, "conv.theta").noalias() = d_gains * table;
  return loss;
}

namespace {

void check_field(const Regressor &model, const VectorField &field) {
  if (!model.mesh_id.empty() && !field.mesh_id.empty() &&
      model.mesh_id != field.mesh_id)
    throw InvalidArgument("field mesh " + field.mesh_id +
                          " does not match model mesh " + model.mesh_id);
  if (field.size() != model.input_vertices())
    throw InvalidArgument("field vertex count does not match model");
}

ParameterVector forward_one(const Regressor &model, const VectorField &field) {
  check_field(model, field);
  const std::span<const VectorField> one(&field, 1);
  return forward_prepared(model, prepare_inputs(model, flatten_fields(one)))
      .col(0);
}

} // namespace

ParameterVector olff_forward(const Regressor &model, const VectorField &field) {
  if (model.kind != RegressorKind::Olff)
    throw InvalidArgument("olff_forward called on a GCN model");
  return forward_one(model, field);
}

ParameterVector gcn_forward(const Regressor &model, const VectorField &field) {
  if (model.kind != RegressorKind::Gcn)
    throw InvalidArgument("gcn_forward called on an OLFF model");
  return forward_one(model, field);
}

ParameterVector predict(const Regressor &model, const VectorField &field) {
  return model.kind == RegressorKind::Olff ? olff_forward(model, field)
                                           : gcn_forward(model, field);
}

MatrixXd predict_batch(const Regressor &model,
                       std::span<const VectorField> fields) {
  if (fields.empty())
    return MatrixXd(0, model.output_dim());
  for (const auto &f : fields)
    check_field(model, f);
  return forward_prepared(model, prepare_inputs(model, flatten_fields(fields)))
      .transpose();
}

} // namespace previs
