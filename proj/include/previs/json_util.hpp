#ifndef PREVIS_JSON_UTIL_HPP
#define PREVIS_JSON_UTIL_HPP

#include "previs/types.hpp"

#include <json.hpp>

namespace previs {

using Json = nlohmann::json;

template <typename Derived>
Json to_json_array(const Eigen::DenseBase<Derived> &v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i)
    out.push_back(v.derived().coeff(i));
  return out;
}

inline VectorXd vector_from_json(const Json &j) {
  if (!j.is_array())
    throw InvalidArgument("expected a JSON array of numbers");
  VectorXd v(Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw InvalidArgument("expected a JSON array of numbers");
    v(Index(i)) = j[i].get<double>();
  }
  return v;
}

/// Row-major nested arrays.
inline Json matrix_to_json(const MatrixXd &m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    out.push_back(to_json_array(m.row(r)));
  return out;
}

inline MatrixXd matrix_from_json(const Json &j, Index cols) {
  if (!j.is_array())
    throw InvalidArgument("expected a JSON array of rows");
  MatrixXd m(Index(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const VectorXd row = vector_from_json(j[r]);
    if (row.size() != cols)
      throw InvalidArgument("ragged JSON matrix");
    m.row(Index(r)) = row.transpose();
  }
  return m;
}

} // namespace previs

#endif
