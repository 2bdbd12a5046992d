#include "mfpinn/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mfpinn/csv.hpp"
#include "mfpinn/errors.hpp"

namespace mfpinn::metrics {

double relative_l2(std::span<const double> pred,
                   std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw DimensionError("relative_l2: length mismatch");
  if (pred.empty()) throw DimensionError("relative_l2: empty vectors");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw MetricError("relative_l2: truth is identically zero");
  return std::sqrt(num / den);
}

ErrorField error_field(std::span<const double> pred,
                       const heat::FieldSolution& truth) {
  if (pred.size() != truth.temperatures.size())
    throw DimensionError("error_field: prediction/grid size mismatch");
  ErrorField out;
  const std::size_t n = pred.size();
  out.x.resize(n);
  out.t.resize(n);
  out.abs_err.resize(n);
  std::size_t idx = 0;
  for (int s = 0; s < truth.n_snapshots(); ++s) {
    for (int i = 0; i < truth.n_nodes(); ++i, ++idx) {
      const double e = std::fabs(pred[idx] - truth.at(s, i));
      out.x[idx] = truth.x_nodes[i];
      out.t[idx] = truth.t_snapshots[s];
      out.abs_err[idx] = e;
      if (e > out.max_err) {
        out.max_err = e;
        out.argmax_x = truth.x_nodes[i];
        out.argmax_t = truth.t_snapshots[s];
      }
    }
  }
  return out;
}

ErrorField error_field(const PredictFn& predict,
                       const heat::FieldSolution& truth) {
  std::vector<double> pred(truth.temperatures.size());
  std::size_t idx = 0;
  for (int s = 0; s < truth.n_snapshots(); ++s) {
    for (int i = 0; i < truth.n_nodes(); ++i, ++idx) {
      pred[idx] = predict(truth.x_nodes[i], truth.t_snapshots[s]);
    }
  }
  return error_field(pred, truth);
}

double max_err_in_window(const ErrorField& field, double t_min, double t_max) {
  double m = 0.0;
  for (std::size_t i = 0; i < field.abs_err.size(); ++i) {
    if (field.t[i] >= t_min && field.t[i] <= t_max)
      m = std::max(m, field.abs_err[i]);
  }
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) throw MetricError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void write_error_field_csv(const std::string& path, const ErrorField& field,
                           const std::vector<std::string>& comment_lines) {
  csv::Table t;
  t.comments = comment_lines;
  t.header = "x_m,t_s,abs_err_C";
  t.rows.reserve(field.abs_err.size());
  for (std::size_t i = 0; i < field.abs_err.size(); ++i) {
    t.rows.push_back(
        {csv::fmt(field.x[i]), csv::fmt(field.t[i]), csv::fmt(field.abs_err[i])});
  }
  csv::write(path, t);
}

}  // namespace mfpinn::metrics
