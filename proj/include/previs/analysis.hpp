#ifndef PREVIS_ANALYSIS_HPP
#define PREVIS_ANALYSIS_HPP

#include "previs/interpolation.hpp"
#include "previs/json_util.hpp"
#include "previs/regressors.hpp"

#include <algorithm>
#include <map>
#include <span>

namespace previs {

/// Type-7 quantile (linear interpolation between order statistics) of an
/// ascending range.
template <typename Scalar>
Scalar quantile_sorted(std::span<const Scalar> sorted, double p) {
  if (sorted.empty())
    throw InvalidArgument("quantile of an empty list");
  const double h = double(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + Scalar(h - double(lo)) * (sorted[hi] - sorted[lo]);
}

/// Tukey boxplot of one list of values.
struct BoxplotStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers; // ascending
  Index count = 0;

  double iqr() const { return q3 - q1; }
  /// Extremes of the data including outliers.
  double data_min() const;
  double data_max() const;
};

BoxplotStats boxplot_stats(std::span<const double> values);

/// Per-parameter boxplots of one model's prediction errors.
struct ErrorSummary {
  std::string model_id;
  bool relative = false;
  std::vector<std::string> parameter_names;
  VectorXd range_width;  // mm per parameter, scales relative spans back to mm
  std::vector<BoxplotStats> parameters;

  Index parameter_count() const { return Index(parameters.size()); }
};

/// Entry (s, j) = predicted_j(s) - true_j(s).
MatrixXd prediction_errors(const MatrixXd &predicted,
                           const EnsembleDesign &truth);
MatrixXd prediction_errors(const Regressor &model, const Ensemble &test);

/// Divides each column by its parameter range width.
MatrixXd relative_errors(const MatrixXd &errors, const ParameterSpace &space);

ErrorSummary summarize_errors(const MatrixXd &errors,
                              const ParameterSpace &space,
                              const std::string &model_id, bool relative);

/// |U*(mean + hi e_j) - U*(mean + lo e_j)| node by node, spanning the
/// whiskers of parameter j.
ImpactField whisker_impact_field(const PcaBasis &basis,
                                 const ErrorSummary &summary, Index j);

/// Same construction over the full error range of parameter j, outliers
/// included. Equals the whisker field when there are no outliers.
ImpactField outlier_impact_field(const PcaBasis &basis,
                                 const ErrorSummary &summary, Index j);

/// Differences of b's statistics minus a's, one entry per parameter.
struct SummaryDelta {
  std::string model_a;
  std::string model_b;
  VectorXd median;
  VectorXd iqr;
  VectorXd whisker_span;
};

struct ComparisonReport {
  std::vector<std::string> parameter_names;
  bool relative = false;
  std::vector<ErrorSummary> models;
  std::vector<SummaryDelta> deltas;  // every pair (a, b) with a before b
  /// Optional ids of stored impact fields, keyed "model_id/parameter".
  std::map<std::string, std::string> whisker_field_ids;
  std::map<std::string, std::string> outlier_field_ids;
};

ComparisonReport compare_models(std::vector<ErrorSummary> summaries);

/// Fixed-width text table of the report.
std::string format_report(const ComparisonReport &report);

void to_json(nlohmann::json &j, const BoxplotStats &s);
void from_json(const nlohmann::json &j, BoxplotStats &s);
void to_json(nlohmann::json &j, const ErrorSummary &s);
void from_json(const nlohmann::json &j, ErrorSummary &s);
void to_json(nlohmann::json &j, const SummaryDelta &d);
void from_json(const nlohmann::json &j, SummaryDelta &d);
void to_json(nlohmann::json &j, const ComparisonReport &r);
void from_json(const nlohmann::json &j, ComparisonReport &r);

} // namespace previs

#endif
