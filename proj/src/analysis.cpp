#include "previs/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace previs {

double BoxplotStats::data_min() const {
  return outliers.empty() ? whisker_lo : std::min(whisker_lo, outliers.front());
}

double BoxplotStats::data_max() const {
  return outliers.empty() ? whisker_hi : std::max(whisker_hi, outliers.back());
}

BoxplotStats boxplot_stats(std::span<const double> values) {
  if (values.empty())
    throw InvalidArgument("boxplot_stats needs at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted)
    if (std::isnan(v))
      throw InvalidArgument("boxplot_stats: NaN in input");
  std::sort(sorted.begin(), sorted.end());
  const std::span<const double> view(sorted);

  BoxplotStats s;
  s.count = Index(sorted.size());
  s.q1 = quantile_sorted(view, 0.25);
  s.median = quantile_sorted(view, 0.5);
  s.q3 = quantile_sorted(view, 0.75);
  const double fence_lo = s.q1 - 1.5 * s.iqr();
  const double fence_hi = s.q3 + 1.5 * s.iqr();

  const auto first_in = std::lower_bound(sorted.begin(), sorted.end(), fence_lo);
  const auto last_in = std::upper_bound(sorted.begin(), sorted.end(), fence_hi);
  s.whisker_lo = *first_in;
  s.whisker_hi = *(last_in - 1);
  s.outliers.assign(sorted.begin(), first_in);
  s.outliers.insert(s.outliers.end(), last_in, sorted.end());
  return s;
}

MatrixXd prediction_errors(const MatrixXd &predicted,
                           const EnsembleDesign &truth) {
  if (predicted.rows() != truth.rows.rows() ||
      predicted.cols() != truth.rows.cols())
    throw InvalidArgument("predictions do not match the test design shape");
  return predicted - truth.rows;
}

MatrixXd prediction_errors(const Regressor &model, const Ensemble &test) {
  return prediction_errors(predict_batch(model, test.fields), test.design);
}

MatrixXd relative_errors(const MatrixXd &errors, const ParameterSpace &space) {
  if (errors.cols() != space.size())
    throw InvalidArgument("error matrix width does not match parameter space");
  const VectorXd width = space.width();
  for (Index j = 0; j < width.size(); ++j)
    if (!(width(j) > 0.0))
      throw InvalidArgument("zero-width parameter range");
  return errors * width.cwiseInverse().asDiagonal();
}

ErrorSummary summarize_errors(const MatrixXd &errors,
                              const ParameterSpace &space,
                              const std::string &model_id, bool relative) {
  if (errors.cols() != space.size())
    throw InvalidArgument("error matrix width does not match parameter space");
  ErrorSummary s;
  s.model_id = model_id;
  s.relative = relative;
  s.parameter_names = space.names;
  s.range_width = space.width();
  for (Index j = 0; j < errors.cols(); ++j) {
    const VectorXd col = errors.col(j);
    s.parameters.push_back(
        boxplot_stats(std::span<const double>(col.data(), std::size_t(col.size()))));
  }
  return s;
}

namespace {

ImpactField span_impact(const PcaBasis &basis, const ErrorSummary &summary,
                        Index j, double lo, double hi, const char *kind) {
  if (summary.parameter_count() != basis.parameter_count())
    throw InvalidArgument("summary and basis disagree on parameter count");
  if (j < 0 || j >= basis.parameter_count())
    throw InvalidArgument("parameter index out of range");
  if (summary.relative) {
    lo *= summary.range_width(j);
    hi *= summary.range_width(j);
  }
  const ParameterVector a_hi = basis.mean_params + hi * VectorXd::Unit(basis.parameter_count(), j);
  const ParameterVector a_lo = basis.mean_params + lo * VectorXd::Unit(basis.parameter_count(), j);
  ImpactField out = delta_field(basis, a_hi, a_lo);
  out.field.values = out.field.values.cwiseAbs();
  out.meta.kind = kind;
  out.meta.model_id = summary.model_id;
  out.meta.parameter = j;
  if (std::size_t(j) < summary.parameter_names.size())
    out.meta.parameter_name = summary.parameter_names[std::size_t(j)];
  out.meta.span_lo = lo;
  out.meta.span_hi = hi;
  return out;
}

} // namespace

ImpactField whisker_impact_field(const PcaBasis &basis,
                                 const ErrorSummary &summary, Index j) {
  if (j < 0 || j >= summary.parameter_count())
    throw InvalidArgument("parameter index out of range");
  const auto &s = summary.parameters[std::size_t(j)];
  return span_impact(basis, summary, j, s.whisker_lo, s.whisker_hi, "whisker");
}

ImpactField outlier_impact_field(const PcaBasis &basis,
                                 const ErrorSummary &summary, Index j) {
  if (j < 0 || j >= summary.parameter_count())
    throw InvalidArgument("parameter index out of range");
  const auto &s = summary.parameters[std::size_t(j)];
  return span_impact(basis, summary, j, s.data_min(), s.data_max(), "outlier");
}

ComparisonReport compare_models(std::vector<ErrorSummary> summaries) {
  if (summaries.empty())
    throw InvalidArgument("compare_models needs at least one summary");
  ComparisonReport r;
  r.parameter_names = summaries.front().parameter_names;
  r.relative = summaries.front().relative;
  for (const auto &s : summaries) {
    if (s.parameter_names != r.parameter_names)
      throw InvalidArgument("summaries disagree on parameter names");
    if (s.relative != r.relative)
      throw InvalidArgument("cannot compare relative and absolute summaries");
    if (s.parameter_count() != Index(r.parameter_names.size()))
      throw InvalidArgument("summary is missing parameters");
  }
  r.models = std::move(summaries);

  const Index n = Index(r.parameter_names.size());
  for (std::size_t a = 0; a < r.models.size(); ++a) {
    for (std::size_t b = a + 1; b < r.models.size(); ++b) {
      SummaryDelta d;
      d.model_a = r.models[a].model_id;
      d.model_b = r.models[b].model_id;
      d.median.resize(n);
      d.iqr.resize(n);
      d.whisker_span.resize(n);
      for (Index j = 0; j < n; ++j) {
        const auto &sa = r.models[a].parameters[std::size_t(j)];
        const auto &sb = r.models[b].parameters[std::size_t(j)];
        d.median(j) = sb.median - sa.median;
        d.iqr(j) = sb.iqr() - sa.iqr();
        d.whisker_span(j) =
            (sb.whisker_hi - sb.whisker_lo) - (sa.whisker_hi - sa.whisker_lo);
      }
      r.deltas.push_back(std::move(d));
    }
  }
  return r;
}

std::string format_report(const ComparisonReport &report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-24s %11s %11s %11s %11s %11s %5s\n",
                "parameter", "model", "median", "q1", "q3", "whisk_lo",
                "whisk_hi", "outl");
  out << line;
  for (std::size_t j = 0; j < report.parameter_names.size(); ++j) {
    for (const auto &m : report.models) {
      const auto &s = m.parameters[j];
      std::snprintf(line, sizeof line,
                    "%-10s %-24s %11.4g %11.4g %11.4g %11.4g %11.4g %5zu\n",
                    report.parameter_names[j].c_str(), m.model_id.c_str(),
                    s.median, s.q1, s.q3, s.whisker_lo, s.whisker_hi,
                    s.outliers.size());
      out << line;
    }
  }
  out << (report.relative ? "errors relative to parameter range width\n"
                          : "errors in mm\n");
  return out.str();
}

void to_json(nlohmann::json &j, const BoxplotStats &s) {
  j = {{"median", s.median},         {"q1", s.q1},
       {"q3", s.q3},                 {"whisker_lo", s.whisker_lo},
       {"whisker_hi", s.whisker_hi}, {"outliers", s.outliers},
       {"count", s.count}};
}

void from_json(const nlohmann::json &j, BoxplotStats &s) {
  s.median = j.at("median").get<double>();
  s.q1 = j.at("q1").get<double>();
  s.q3 = j.at("q3").get<double>();
  s.whisker_lo = j.at("whisker_lo").get<double>();
  s.whisker_hi = j.at("whisker_hi").get<double>();
  s.outliers = j.at("outliers").get<std::vector<double>>();
  s.count = j.at("count").get<Index>();
}

void to_json(nlohmann::json &j, const ErrorSummary &s) {
  j = {{"model_id", s.model_id},
       {"relative", s.relative},
       {"parameter_names", s.parameter_names},
       {"range_width", to_json_array(s.range_width)},
       {"parameters", s.parameters}};
}

void from_json(const nlohmann::json &j, ErrorSummary &s) {
  s.model_id = j.at("model_id").get<std::string>();
  s.relative = j.at("relative").get<bool>();
  s.parameter_names = j.at("parameter_names").get<std::vector<std::string>>();
  s.range_width = vector_from_json(j.at("range_width"));
  s.parameters = j.at("parameters").get<std::vector<BoxplotStats>>();
}

void to_json(nlohmann::json &j, const SummaryDelta &d) {
  j = {{"model_a", d.model_a},
       {"model_b", d.model_b},
       {"median", to_json_array(d.median)},
       {"iqr", to_json_array(d.iqr)},
       {"whisker_span", to_json_array(d.whisker_span)}};
}

void from_json(const nlohmann::json &j, SummaryDelta &d) {
  d.model_a = j.at("model_a").get<std::string>();
  d.model_b = j.at("model_b").get<std::string>();
  d.median = vector_from_json(j.at("median"));
  d.iqr = vector_from_json(j.at("iqr"));
  d.whisker_span = vector_from_json(j.at("whisker_span"));
}

void to_json(nlohmann::json &j, const ComparisonReport &r) {
  j = {{"parameter_names", r.parameter_names},
       {"relative", r.relative},
       {"models", r.models},
       {"deltas", r.deltas},
       {"whisker_field_ids", r.whisker_field_ids},
       {"outlier_field_ids", r.outlier_field_ids}};
}

void from_json(const nlohmann::json &j, ComparisonReport &r) {
  r.parameter_names = j.at("parameter_names").get<std::vector<std::string>>();
  r.relative = j.at("relative").get<bool>();
  r.models = j.at("models").get<std::vector<ErrorSummary>>();
  r.deltas = j.at("deltas").get<std::vector<SummaryDelta>>();
  r.whisker_field_ids =
      j.value("whisker_field_ids", std::map<std::string, std::string>{});
  r.outlier_field_ids =
      j.value("outlier_field_ids", std::map<std::string, std::string>{});
}

} // namespace previs
