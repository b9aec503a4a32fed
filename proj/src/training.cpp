#include "previs/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace previs {

OptimizerConfig OptimizerConfig::olff_default() {
  OptimizerConfig c;
  c.kind = Kind::SgdNesterov;
  c.lr = 1e-3;
  c.momentum = 0.9;
  c.epochs = 2000;
  c.batch_size = 32;
  return c;
}

OptimizerConfig OptimizerConfig::gcn_default() {
  OptimizerConfig c;
  c.kind = Kind::Adagrad;
  c.lr = 1e-2;
  c.eps = 1e-8;
  c.epochs = 300;
  c.batch_size = 32;
  return c;
}

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw InvalidArgument("learning rate must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(eps > 0.0))
    throw InvalidArgument("AdaGrad eps must be > 0");
  if (epochs < 1)
    throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1)
    throw InvalidArgument("batch size must be >= 1");
}

namespace {

MatrixXd gather_columns(const MatrixXd &m, std::span<const Index> idx) {
  MatrixXd out(m.rows(), Index(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j)
    out.col(Index(j)) = m.col(idx[j]);
  return out;
}

} // namespace

Regressor train(Regressor model, const Ensemble &train_set,
                const OptimizerConfig &opt, const ProgressCallback &progress) {
  opt.validate();
  if (train_set.size() == 0)
    throw InvalidArgument("training set is empty");
  if (train_set.design.rows.cols() != model.output_dim())
    throw InvalidArgument("training targets do not match model outputs");
  if (!model.mesh_id.empty() && model.mesh_id != train_set.mesh_id)
    throw InvalidArgument("training ensemble is on a different mesh");

  const MatrixXd flat = flatten_fields(train_set.fields);
  if (!model.input_norm.fitted())
    model.input_norm = Standardizer::fit(flat);
  if (model.mesh_id.empty())
    model.mesh_id = train_set.mesh_id;
  model.optimizer = opt;

  const MatrixXd inputs = prepare_inputs(model, flat);
  const MatrixXd targets = train_set.design.rows.transpose();
  const Index n = inputs.cols();

  std::mt19937_64 rng(opt.shuffle_seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));

  VectorXd &w = model.weights.values();
  VectorXd state = VectorXd::Zero(w.size()); // velocity or squared-grad sum
  VectorXd grad;
  const bool nesterov = opt.kind == OptimizerConfig::Kind::SgdNesterov;

  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Index start = 0; start < n; start += opt.batch_size) {
      const Index count = std::min(opt.batch_size, n - start);
      const std::span<const Index> idx(order.data() + start, std::size_t(count));
      const MatrixXd xb = gather_columns(inputs, idx);
      const MatrixXd yb = gather_columns(targets, idx);

      double batch_loss;
      if (nesterov) {
        // Gradient at the look-ahead point w + momentum * v.
        const VectorXd saved = w;
        w += opt.momentum * state;
        loss_and_gradient(model, xb, yb, &grad);
        w = saved;
        batch_loss = loss_and_gradient(model, xb, yb, nullptr);
        state = opt.momentum * state - opt.lr * grad;
        w += state;
      } else {
        batch_loss = loss_and_gradient(model, xb, yb, &grad);
        // Cache-sized chunks keep the two passes from going to memory twice.
        constexpr Index chunk = 4096;
        for (Index i = 0; i < w.size(); i += chunk) {
          const Index len = std::min(chunk, w.size() - i);
          auto s = state.segment(i, len).array();
          const auto g = grad.segment(i, len).array();
          s += g.square();
          w.segment(i, len).array() -= opt.lr * g / (s.sqrt() + opt.eps);
        }
      }
      epoch_loss += batch_loss * double(count);
    }
    epoch_loss /= double(n);
    if (!std::isfinite(epoch_loss) || !w.allFinite())
      throw DivergenceError("training diverged at epoch " +
                                std::to_string(epoch),
                            epoch);
    model.training_log.push_back(epoch_loss);
    if (progress)
      progress({epoch, opt.epochs, epoch_loss});
  }
  return model;
}

GradientCheckResult gradient_check(const Regressor &model,
                                   const VectorField &field,
                                   const ParameterVector &target, double h,
                                   Index n_weights, std::uint64_t seed) {
  const std::span<const VectorField> one(&field, 1);
  const MatrixXd x = prepare_inputs(model, flatten_fields(one));
  const MatrixXd y = target;

  VectorXd analytic;
  const double loss = loss_and_gradient(model, x, y, &analytic);
  // Floor keeps vanishing gradients from turning roundoff into large
  // relative errors.
  const double floor = 1e-6 * std::max(1.0, std::abs(loss));

  // Small segments are exhausted first; their unused share moves on to the
  // larger ones.
  auto segments = model.weights.segments();
  std::sort(segments.begin(), segments.end(),
            [](const auto &a, const auto &b) { return a.size() < b.size(); });
  std::mt19937_64 rng(seed);

  Regressor probe = model;
  VectorXd &w = probe.weights.values();
  GradientCheckResult result;
  Index remaining = n_weights;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto &seg = segments[s];
    const Index share = (remaining + Index(segments.size() - s) - 1) /
                        Index(segments.size() - s);
    const Index want = std::min(share, seg.size());
    remaining -= want;
    std::set<Index> picked;
    std::uniform_int_distribution<Index> dist(0, seg.size() - 1);
    while (Index(picked.size()) < want)
      picked.insert(seg.offset + dist(rng));
    for (const Index i : picked) {
      const double original = w(i);
      w(i) = original + h;
      const double up = loss_and_gradient(probe, x, y, nullptr);
      w(i) = original - h;
      const double down = loss_and_gradient(probe, x, y, nullptr);
      w(i) = original;
      const double numeric = (up - down) / (2.0 * h);
      const double denom =
          std::max({std::abs(numeric), std::abs(analytic(i)), floor});
      result.max_rel_error =
          std::max(result.max_rel_error, std::abs(numeric - analytic(i)) / denom);
      ++result.checked;
    }
  }
  return result;
}

} // namespace previs
