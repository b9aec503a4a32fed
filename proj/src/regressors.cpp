#include "previs/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace previs {

MatrixXd shifted_chebyshev_table(const VectorXd &x, Index order) {
  MatrixXd table(x.size(), order);
  for (Index i = 0; i < x.size(); ++i) {
    double t_prev = 0.0, t = 0.0, u_prev = 0.0, u = 0.0;
    for (Index k = 0; k < order; ++k) {
      double t_next, u_next;
      if (k == 0) {
        t_next = 1.0;
        u_next = 1.0;
      } else if (k == 1) {
        t_next = x(i);
        u_next = 1.0;
      } else {
        t_next = 2.0 * x(i) * t - t_prev;
        u_next = 2.0 * u - u_prev;
      }
      t_prev = t;
      t = t_next;
      u_prev = u;
      u = u_next;
      table(i, k) = t - u;
    }
  }
  return table;
}

std::string to_string(RegressorKind kind) {
  return kind == RegressorKind::Olff ? "olff" : "gcn";
}

RegressorKind regressor_kind_from_string(const std::string &name) {
  if (name == "olff" || name == "OLFF") return RegressorKind::Olff;
  if (name == "gcn" || name == "GCN") return RegressorKind::Gcn;
  throw InvalidArgument("unknown regressor kind '" + name + "'");
}

std::string to_string(OptimizerConfig::Kind kind) {
  return kind == OptimizerConfig::Kind::SgdNesterov ? "sgd_nesterov" : "adagrad";
}

OptimizerConfig::Kind optimizer_kind_from_string(const std::string &name) {
  if (name == "sgd_nesterov") return OptimizerConfig::Kind::SgdNesterov;
  if (name == "adagrad") return OptimizerConfig::Kind::Adagrad;
  throw InvalidArgument("unknown optimizer '" + name + "'");
}

// ---------------------------------------------------------------------------
// ParameterStore

Index ParameterStore::add(const std::string &name, Index rows, Index cols) {
  for (const auto &s : segments_)
    if (s.name == name)
      throw InvalidArgument("duplicate weight segment " + name);
  Segment seg{name, values_.size(), rows, cols};
  segments_.push_back(seg);
  values_.conservativeResize(values_.size() + seg.size());
  values_.tail(seg.size()).setZero();
  return seg.offset;
}

const ParameterStore::Segment &
ParameterStore::segment(const std::string &name) const {
  for (const auto &s : segments_)
    if (s.name == name)
      return s;
  throw NotFound("no weight segment " + name);
}

Eigen::Map<MatrixXd> ParameterStore::matrix(const std::string &name) {
  const auto &s = segment(name);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const MatrixXd>
ParameterStore::matrix(const std::string &name) const {
  const auto &s = segment(name);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<MatrixXd> ParameterStore::matrix_in(VectorXd &flat,
                                               const std::string &name) const {
  if (flat.size() != values_.size())
    throw InvalidArgument("vector does not match the parameter layout");
  const auto &s = segment(name);
  return {flat.data() + s.offset, s.rows, s.cols};
}

// ---------------------------------------------------------------------------
// Architecture

Index olff_weight_count(const OlffConfig &c) {
  return c.input_dim * c.hidden + c.hidden + c.hidden * c.output + c.output;
}

Index gcn_conv_weight_count(const GcnConfig &c) {
  return c.filters * c.channels * c.cheb_order;
}

Index gcn_weight_count(const GcnConfig &c) {
  const Index flat = c.mu * c.filters;
  return gcn_conv_weight_count(c) + flat * c.fc + c.fc + c.fc * c.output +
         c.output;
}

Index Regressor::input_vertices() const {
  return kind == RegressorKind::Olff ? olff.input_dim / 3
                                     : spectral->eigenvectors.rows();
}

Index Regressor::output_dim() const {
  return kind == RegressorKind::Olff ? olff.output : gcn.output;
}

namespace {

void fill_uniform(Eigen::Map<MatrixXd> block, double bound,
                  std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index j = 0; j < block.cols(); ++j)
    for (Index i = 0; i < block.rows(); ++i)
      block(i, j) = dist(rng);
}

} // namespace

Regressor init_olff(Index input_dim, Index hidden, Index output,
                    std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1 || output < 1)
    throw InvalidArgument("OLFF dimensions must be >= 1");
  Regressor model;
  model.kind = RegressorKind::Olff;
  model.olff = {input_dim, hidden, output};
  model.seed = seed;
  auto &w = model.weights;
  w.add("hidden.weight", hidden, input_dim);
  w.add("hidden.bias", hidden, 1);
  w.add("output.weight", output, hidden);
  w.add("output.bias", output, 1);

  std::mt19937_64 rng(seed);
  // He-uniform for the rectified layer, Glorot-uniform for the linear one.
  fill_uniform(w.matrix("hidden.weight"), std::sqrt(6.0 / double(input_dim)),
               rng);
  fill_uniform(w.matrix("output.weight"),
               std::sqrt(6.0 / double(hidden + output)), rng);
  return model;
}

Regressor init_gcn(std::shared_ptr<const SpectralOperator> spectral,
                   const GcnConfig &cfg, std::uint64_t seed) {
  if (!spectral || spectral->mu < 1)
    throw InvalidArgument("GCN needs a spectral operator with mu >= 1");
  if (cfg.channels < 1 || cfg.filters < 1 || cfg.cheb_order < 1 ||
      cfg.fc < 1 || cfg.output < 1)
    throw InvalidArgument("GCN dimensions must be >= 1");
  Regressor model;
  model.kind = RegressorKind::Gcn;
  model.gcn = cfg;
  model.gcn.mu = spectral->mu;
  model.spectral = std::move(spectral);
  model.seed = seed;
  const Index flat = model.gcn.mu * cfg.filters;
  auto &w = model.weights;
  // Row f * channels + c holds the coefficients of filter f on channel c.
  w.add("conv.theta", cfg.filters * cfg.channels, cfg.cheb_order);
  w.add("fc.weight", cfg.fc, flat);
  w.add("fc.bias", cfg.fc, 1);
  w.add("output.weight", cfg.output, cfg.fc);
  w.add("output.bias", cfg.output, 1);

  std::mt19937_64 rng(seed);
  fill_uniform(w.matrix("conv.theta"),
               1.0 / double(cfg.cheb_order * cfg.channels), rng);
  fill_uniform(w.matrix("fc.weight"), std::sqrt(6.0 / double(flat)), rng);
  fill_uniform(w.matrix("output.weight"),
               std::sqrt(6.0 / double(cfg.fc + cfg.output)), rng);
  return model;
}

// ---------------------------------------------------------------------------
// Inputs

MatrixXd Standardizer::apply(const MatrixXd &x) const {
  if (!fitted())
    return x;
  if (x.rows() != mean.size())
    throw InvalidArgument("standardiser size does not match input");
  return (x.colwise() - mean).array().colwise() / scale.array();
}

Standardizer Standardizer::fit(const MatrixXd &x) {
  Standardizer s;
  s.mean = x.rowwise().mean();
  const MatrixXd centred = x.colwise() - s.mean;
  s.scale = (centred.rowwise().squaredNorm() / double(x.cols())).cwiseSqrt();
  // Entries that never vary pass through centred but unscaled.
  for (Index i = 0; i < s.scale.size(); ++i)
    if (!(s.scale(i) > 1e-12))
      s.scale(i) = 1.0;
  return s;
}

MatrixXd flatten_fields(std::span<const VectorField> fields) {
  if (fields.empty())
    return {};
  const Index n = fields.front().size();
  MatrixXd out(3 * n, Index(fields.size()));
  for (std::size_t s = 0; s < fields.size(); ++s) {
    if (fields[s].size() != n)
      throw InvalidArgument("fields have different vertex counts");
    // Row-major N x 3 storage is already vertex-major xyz.
    out.col(Index(s)) =
        Eigen::Map<const VectorXd>(fields[s].values.data(), 3 * n);
  }
  return out;
}

MatrixXd prepare_inputs(const Regressor &model, const MatrixXd &flat) {
  const Index n = model.input_vertices();
  if (flat.rows() != 3 * n)
    throw InvalidArgument("field has " + std::to_string(flat.rows() / 3) +
                          " vertices, model expects " + std::to_string(n));
  MatrixXd x = model.input_norm.apply(flat);
  if (model.kind == RegressorKind::Olff)
    return x;

  const auto &basis = model.spectral->eigenvectors; // n x mu
  const Index mu = model.gcn.mu;
  const Index channels = model.gcn.channels;
  if (channels != 3)
    throw InvalidArgument("GCN on displacement fields needs 3 channels");
  MatrixXd out(channels * mu, x.cols());
  for (Index s = 0; s < x.cols(); ++s) {
    Eigen::Map<const MatrixX3d> field(x.col(s).data(), n, 3);
    const MatrixXd coeffs = basis.transpose() * field; // mu x 3
    for (Index c = 0; c < channels; ++c)
      out.col(s).segment(c * mu, mu) = coeffs.col(c);
  }
  return out;
}

} // namespace previs
