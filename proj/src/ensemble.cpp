#include "previs/ensemble.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace previs {

bool ParameterSpace::contains(const ParameterVector &p, double tol) const {
  if (p.size() != size())
    return false;
  for (Index i = 0; i < size(); ++i)
    if (!(p(i) >= lower(i) - tol && p(i) <= upper(i) + tol))
      return false;
  return true;
}

void ParameterSpace::validate() const {
  if (upper.size() != lower.size() || Index(names.size()) != lower.size())
    throw InvalidArgument("parameter space names/bounds size mismatch");
  for (Index i = 0; i < size(); ++i)
    if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) ||
        lower(i) > upper(i))
      throw InvalidArgument("invalid bounds for parameter " + names[std::size_t(i)]);
}

ParameterSpace ParameterSpace::hood_default() {
  ParameterSpace s;
  s.names = {"Hinge_X", "Hinge_Y", "Lock_L", "Lock_R", "Buffer_L", "Buffer_R"};
  s.lower = VectorXd::Constant(6, -1.0);
  s.upper = VectorXd::Constant(6, 1.0);
  return s;
}

ParameterSpace ParameterSpace::uniform(Index n, double lo, double hi) {
  ParameterSpace s;
  for (Index i = 0; i < n; ++i)
    s.names.push_back("p" + std::to_string(i));
  s.lower = VectorXd::Constant(n, lo);
  s.upper = VectorXd::Constant(n, hi);
  s.validate();
  return s;
}

std::string to_string(DesignKind kind) {
  switch (kind) {
  case DesignKind::Lhs: return "lhs";
  case DesignKind::Factorial3: return "factorial3";
  case DesignKind::Custom: return "custom";
  }
  return "custom";
}

DesignKind design_kind_from_string(const std::string &name) {
  if (name == "lhs") return DesignKind::Lhs;
  if (name == "factorial3") return DesignKind::Factorial3;
  if (name == "custom") return DesignKind::Custom;
  throw InvalidArgument("unknown design kind '" + name + "'");
}

EnsembleDesign latin_hypercube(Index n_samples, const ParameterSpace &space,
                               std::uint64_t seed) {
  if (n_samples < 1)
    throw InvalidArgument("latin_hypercube needs at least one sample");
  space.validate();

  EnsembleDesign design;
  design.space = space;
  design.kind = DesignKind::Lhs;
  design.seed = seed;
  design.rows.resize(n_samples, space.size());

  std::mt19937_64 rng(seed);
  // Jitter kept off the stratum edges so rounding never crosses into a
  // neighbouring stratum.
  std::uniform_real_distribution<double> jitter(1e-9, 1.0 - 1e-9);
  std::vector<Index> strata(static_cast<std::size_t>(n_samples));
  for (Index c = 0; c < space.size(); ++c) {
    std::iota(strata.begin(), strata.end(), Index(0));
    std::shuffle(strata.begin(), strata.end(), rng);
    const double lo = space.lower(c);
    const double width = space.upper(c) - lo;
    for (Index r = 0; r < n_samples; ++r) {
      const double u = (double(strata[std::size_t(r)]) + jitter(rng)) /
                       double(n_samples);
      design.rows(r, c) = lo + width * u;
    }
  }
  return design;
}

EnsembleDesign three_level_factorial(const ParameterSpace &space) {
  space.validate();
  const Index n = space.size();
  if (n < 1)
    throw InvalidArgument("three_level_factorial needs at least one parameter");
  Index count = 1;
  for (Index i = 0; i < n; ++i)
    count *= 3;

  EnsembleDesign design;
  design.space = space;
  design.kind = DesignKind::Factorial3;
  design.rows.resize(count, n);
  for (Index r = 0; r < count; ++r) {
    Index rem = r;
    for (Index c = n - 1; c >= 0; --c) {
      const Index level = rem % 3;
      rem /= 3;
      const double lo = space.lower(c), hi = space.upper(c);
      design.rows(r, c) = level == 0 ? lo : level == 1 ? 0.5 * (lo + hi) : hi;
    }
  }
  return design;
}

namespace {

struct Anchor {
  double fx, fy;
};

// Hinges at the rear corners, locks at the front edge, buffers at the sides.
constexpr Anchor kAnchors[] = {{0.12, 0.88}, {0.88, 0.88}, {0.40, 0.06},
                               {0.60, 0.06}, {0.06, 0.35}, {0.94, 0.35}};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t noise_seed(const ParameterVector &params, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  for (Index i = 0; i < params.size(); ++i)
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(params(i)));
  return h;
}

void check_config(Index vertex_count, const GeneratorConfig &cfg) {
  if (cfg.baseline_field.rows() != vertex_count)
    throw InvalidArgument("generator baseline does not match mesh");
  for (const auto &phi : cfg.mode_fields)
    if (phi.rows() != vertex_count)
      throw InvalidArgument("generator mode field does not match mesh");
  if (!(cfg.gamma >= 0.0) || !(cfg.sigma >= 0.0))
    throw InvalidArgument("generator gamma and sigma must be >= 0");
}

} // namespace

GeneratorConfig default_generator_config(const SurfaceMesh &mesh,
                                         const GeneratorOptions &options) {
  const Index n = mesh.vertex_count();
  const Eigen::RowVector3d lo = mesh.vertices.colwise().minCoeff();
  const Eigen::RowVector3d hi = mesh.vertices.colwise().maxCoeff();
  const Eigen::RowVector3d extent = hi - lo;
  const double radius =
      options.bump_radius_fraction * std::min(extent(0), extent(1));

  GeneratorConfig cfg;
  cfg.gamma = options.gamma;
  cfg.sigma = options.sigma;
  cfg.seed = options.seed;

  cfg.baseline_field.resize(n, 3);
  for (Index v = 0; v < n; ++v) {
    const double sx = (mesh.vertices(v, 0) - lo(0)) / extent(0);
    const double sy = (mesh.vertices(v, 1) - lo(1)) / extent(1);
    const double sag = -options.baseline_magnitude *
                       std::sin(std::numbers::pi * sx) *
                       std::sin(std::numbers::pi * sy);
    cfg.baseline_field.row(v) = sag * mesh.normals.row(v);
  }

  for (std::size_t i = 0; i < options.amplitudes.size(); ++i) {
    const Anchor a = kAnchors[i % std::size(kAnchors)];
    const Eigen::RowVector3d centre(lo(0) + a.fx * extent(0),
                                    lo(1) + a.fy * extent(1), lo(2));
    const double angle = double(i) * std::numbers::pi / 3.0;
    const Eigen::RowVector3d tangent(std::cos(angle), std::sin(angle), 0.0);
    MatrixX3d phi(n, 3);
    for (Index v = 0; v < n; ++v) {
      const double r2 = (mesh.vertices.row(v) - centre).squaredNorm();
      const double bump =
          options.amplitudes[i] * std::exp(-r2 / (2.0 * radius * radius));
      phi.row(v) = bump * (mesh.normals.row(v) +
                           options.tangential_fraction * tangent);
    }
    cfg.mode_fields.push_back(std::move(phi));
  }
  return cfg;
}

std::vector<MatrixX3d> coupling_fields(const GeneratorConfig &cfg) {
  std::vector<MatrixX3d> out;
  const auto &phi = cfg.mode_fields;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    for (std::size_t j = i; j < phi.size(); ++j) {
      MatrixX3d psi = phi[i].cwiseProduct(phi[j]);
      const double peak = psi.cwiseAbs().maxCoeff();
      if (peak > 0.0) {
        const double target = std::sqrt(phi[i].cwiseAbs().maxCoeff() *
                                        phi[j].cwiseAbs().maxCoeff());
        psi *= target / peak;
      }
      out.push_back(std::move(psi));
    }
  }
  return out;
}

FieldGenerator::FieldGenerator(const SurfaceMesh &mesh, GeneratorConfig cfg)
    : mesh_id_(mesh.id), vertex_count_(mesh.vertex_count()),
      cfg_(std::move(cfg)) {
  check_config(vertex_count_, cfg_);
  if (cfg_.gamma != 0.0)
    couplings_ = coupling_fields(cfg_);
}

VectorField FieldGenerator::operator()(const ParameterVector &params) const {
  if (params.size() != cfg_.parameter_count())
    throw InvalidArgument("parameter count does not match generator modes");
  VectorField out;
  out.mesh_id = mesh_id_;
  out.values = cfg_.baseline_field;
  for (Index i = 0; i < params.size(); ++i)
    out.values += params(i) * cfg_.mode_fields[std::size_t(i)];
  if (cfg_.gamma != 0.0) {
    std::size_t k = 0;
    for (Index i = 0; i < params.size(); ++i)
      for (Index j = i; j < params.size(); ++j)
        out.values += (cfg_.gamma * params(i) * params(j)) * couplings_[k++];
  }
  if (cfg_.sigma > 0.0) {
    std::mt19937_64 rng(noise_seed(params, cfg_.seed));
    std::normal_distribution<double> noise(0.0, cfg_.sigma);
    for (Index v = 0; v < out.values.rows(); ++v)
      for (Index c = 0; c < 3; ++c)
        out.values(v, c) += noise(rng);
  }
  return out;
}

VectorField synthesize_field(const SurfaceMesh &mesh,
                             const ParameterVector &params,
                             const GeneratorConfig &cfg) {
  return FieldGenerator(mesh, cfg)(params);
}

Ensemble generate_ensemble(const SurfaceMesh &mesh,
                           const EnsembleDesign &design,
                           const GeneratorConfig &cfg) {
  Ensemble out;
  out.mesh_id = mesh.id;
  out.design = design;
  if (design.size() == 0)
    return out;
  if (design.rows.cols() != cfg.parameter_count())
    throw InvalidArgument("design width does not match generator modes");
  const FieldGenerator gen(mesh, cfg);
  out.fields.reserve(std::size_t(design.size()));
  for (Index r = 0; r < design.size(); ++r)
    out.fields.push_back(gen(design.row(r)));
  return out;
}

} // namespace previs
