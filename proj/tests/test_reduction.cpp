#include "doctest.h"

#include "previs/reduction.hpp"

#include <Eigen/SVD>

#include <cstring>
#include <random>

using namespace previs;

namespace {

struct LinearProblem {
  SurfaceMesh mesh;
  GeneratorConfig cfg;
  Ensemble train;
};

LinearProblem linear_problem(int nx = 20, int ny = 12) {
  LinearProblem p;
  p.mesh = build_plate_mesh(nx, ny, 1200, 700);
  p.cfg = default_generator_config(p.mesh);
  p.train = generate_ensemble(
      p.mesh, three_level_factorial(ParameterSpace::hood_default()), p.cfg);
  return p;
}

// Condensed response matrix M (vertices x params): field change per unit
// parameter, read straight off the generator.
MatrixXd condensed_response(const LinearProblem &p) {
  const Index n = p.cfg.parameter_count();
  const VectorXd base =
      condense_signed_magnitude(synthesize_field(p.mesh, VectorXd::Zero(n), p.cfg),
                                p.mesh)
          .values;
  MatrixXd m(p.mesh.vertex_count(), n);
  for (Index j = 0; j < n; ++j)
    m.col(j) = condense_signed_magnitude(
                   synthesize_field(p.mesh, VectorXd::Unit(n, j), p.cfg), p.mesh)
                   .values -
               base;
  return m;
}

} // namespace

TEST_CASE("signed magnitude projection") {
  const auto mesh = build_plate_mesh(4, 3, 1, 1);
  VectorField v{mesh.id, 2.0 * mesh.normals};
  CHECK(condense_signed_magnitude(v, mesh).values.isApproxToConstant(2.0));

  v.values.setZero();
  v.values.col(0).setConstant(3.0);
  CHECK(condense_signed_magnitude(v, mesh).values.cwiseAbs().maxCoeff() == 0.0);

  v.values = -0.5 * mesh.normals;
  v.values.col(1).array() += 1.25;
  CHECK(condense_signed_magnitude(v, mesh).values.isApproxToConstant(-0.5));

  VectorField wrong{mesh.id, MatrixX3d::Zero(5, 3)};
  CHECK_THROWS_AS(condense_signed_magnitude(wrong, mesh), InvalidArgument);
}

TEST_CASE("PCA of a linear ensemble has rank six") {
  const auto p = linear_problem();
  const MatrixXd fields = condense_ensemble(p.train, p.mesh);
  const auto fit = fit_pca(fields, 10);

  // Rank oracle: full SVD of the centred matrix.
  const MatrixXd centred = fields.rowwise() - fields.colwise().mean();
  const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(centred).singularValues();
  const VectorXd ratios = sv.array().square() / sv.squaredNorm();
  Index oracle_rank = 0;
  for (Index i = 0; i < ratios.size(); ++i)
    oracle_rank += ratios(i) > 1e-12;
  CHECK(oracle_rank == 6);

  Index above = 0;
  for (Index i = 0; i < fit.basis.explained_variance_ratio.size(); ++i)
    above += fit.basis.explained_variance_ratio(i) > 1e-12;
  CHECK(above <= 6);
  CHECK(fit.basis.k() == 6);
  CHECK(explained_variance(fit.basis) >= 1.0 - 1e-9);
  CHECK(std::abs(explained_variance(fit.basis) - 1.0) <= 1e-12);
}

TEST_CASE("PCA matches a full-SVD oracle up to the sign convention") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  MatrixXd data(40, 30);
  for (Index i = 0; i < data.size(); ++i)
    data(i) = g(rng);
  const auto fit = fit_pca(data, 8);
  REQUIRE(fit.basis.k() == 8);

  const MatrixXd centred = data.rowwise() - data.colwise().mean();
  Eigen::JacobiSVD<MatrixXd> oracle(centred, Eigen::ComputeFullV);
  for (Index j = 0; j < 8; ++j) {
    VectorXd v = oracle.matrixV().col(j);
    Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0)
      v = -v;
    CHECK((fit.basis.basis_fields.col(j) - v).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.basis.singular_values(j) ==
          doctest::Approx(oracle.singularValues()(j)).epsilon(1e-10));
  }
  const VectorXd ratios = fit.basis.explained_variance_ratio;
  for (Index j = 1; j < ratios.size(); ++j)
    CHECK(ratios(j) <= ratios(j - 1));
  CHECK(ratios.sum() <= 1.0 + 1e-12);
}

TEST_CASE("PCA invariants: orthonormality, reconstruction, determinism") {
  const auto p = linear_problem();
  const MatrixXd fields = condense_ensemble(p.train, p.mesh);
  const auto fit = fit_pca(fields, 6);
  const MatrixXd &b = fit.basis.basis_fields;

  const MatrixXd gram = b.transpose() * b;
  CHECK((gram - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);

  const MatrixXd centred = fields.rowwise() - fit.basis.mean_field.transpose();
  const MatrixXd recon = fit.scores * b.transpose();
  const double scale = fields.cwiseAbs().maxCoeff();
  CHECK((centred - recon).cwiseAbs().maxCoeff() <= 1e-8 * scale);

  // Weights rebuild the basis fields from the centred ensemble.
  CHECK((centred.transpose() * fit.weights - b).cwiseAbs().maxCoeff() < 1e-8);

  for (Index j = 0; j < 6; ++j) {
    Index arg;
    b.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(b(arg, j) > 0.0);
  }

  const auto again = fit_pca(fields, 6);
  CHECK(std::memcmp(again.basis.basis_fields.data(), b.data(),
                    sizeof(double) * std::size_t(b.size())) == 0);
}

TEST_CASE("PCA of identical fields is empty") {
  VectorXd f = VectorXd::LinSpaced(25, -3.0, 7.0);
  MatrixXd data = f.transpose().replicate(9, 1);
  const auto fit = fit_pca(data, 5);
  CHECK(fit.basis.k() == 0);
  CHECK(fit.basis.explained_variance_ratio.size() == 0);
  CHECK((fit.basis.mean_field - f).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("PCA preconditions") {
  MatrixXd one = MatrixXd::Random(1, 5);
  CHECK_THROWS_AS(fit_pca(one, 1), InvalidArgument);
  MatrixXd data = MatrixXd::Random(4, 5);
  CHECK_THROWS_AS(fit_pca(data, 5), InvalidArgument);
}

TEST_CASE("basis parameter sets") {
  const auto p = linear_problem();
  const PcaBasis basis = build_pca_basis(p.train, p.mesh, 10);
  REQUIRE(basis.k() == 6);
  CHECK(basis.mean_params.cwiseAbs().maxCoeff() < 1e-15);

  // The linear response maps each basis parameter set onto its basis field.
  const MatrixXd m = condensed_response(p);
  for (Index j = 0; j < basis.k(); ++j) {
    const VectorXd mapped = m * basis.basis_params.col(j);
    CHECK((mapped - basis.basis_fields.col(j)).cwiseAbs().maxCoeff() < 1e-8);
  }

  MatrixXd zero_weights = MatrixXd::Zero(p.train.size(), 1);
  const auto zero = basis_parameter_sets(zero_weights, p.train.design);
  CHECK(zero.basis_params.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(basis_parameter_sets(MatrixXd::Zero(5, 1), p.train.design),
                  InvalidArgument);
}

TEST_CASE("explained variance prefix sums") {
  PcaBasis empty;
  CHECK(explained_variance(empty) == 0.0);
  CHECK(cumulative_explained_variance(empty).size() == 0);

  const auto p = linear_problem();
  const PcaBasis basis = build_pca_basis(p.train, p.mesh, 6);
  const VectorXd cum = cumulative_explained_variance(basis);
  for (Index j = 1; j < cum.size(); ++j)
    CHECK(cum(j) >= cum(j - 1));
  CHECK(cum(cum.size() - 1) >= 1.0 - 1e-9);
  CHECK(std::abs(cum(cum.size() - 1) - 1.0) <= 1e-12);
}
