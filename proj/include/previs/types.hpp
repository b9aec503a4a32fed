#ifndef PREVIS_TYPES_HPP
#define PREVIS_TYPES_HPP

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace previs {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using MatrixX3 = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

using VectorXd = VectorX<double>;
using MatrixXd = MatrixX<double>;
using MatrixX3d = MatrixX3<double>;
using MatrixX3i = MatrixX3<std::int32_t>;

/// A point in attribute space (boundary adjustments in mm).
using ParameterVector = VectorXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct NotFound : Error {
  using Error::Error;
};

/// Stored bytes no longer match the hash recorded in their manifest.
struct IntegrityError : Error {
  using Error::Error;
};

struct EigenSolveError : Error {
  EigenSolveError(const std::string &what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

struct DivergenceError : Error {
  DivergenceError(const std::string &what, int epoch)
      : Error(what), epoch(epoch) {}
  int epoch;
};

/// Per-vertex 3-vector field (mm), one row per mesh vertex.
struct VectorField {
  std::string mesh_id;
  MatrixX3d values;

  Index size() const { return values.rows(); }
};

/// Per-vertex scalar field (mm).
struct ScalarField {
  std::string mesh_id;
  VectorXd values;

  Index size() const { return values.size(); }
};

/// Names and box bounds of the attribute space.
struct ParameterSpace {
  std::vector<std::string> names;
  VectorXd lower;
  VectorXd upper;

  Index size() const { return lower.size(); }
  VectorXd width() const { return upper - lower; }
  bool contains(const ParameterVector &p, double tol = 1e-12) const;
  void validate() const;

  /// Six boundaries of the hood use case, each in [-1, 1] mm.
  static ParameterSpace hood_default();
  /// n parameters named p0..p(n-1) sharing the same interval.
  static ParameterSpace uniform(Index n, double lo, double hi);
};

} // namespace previs

#endif
