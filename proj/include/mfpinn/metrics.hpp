#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfpinn/heat.hpp"

namespace mfpinn::metrics {

// sqrt( sum (pred-truth)^2 / sum truth^2 ).
double relative_l2(std::span<const double> pred, std::span<const double> truth);

// Pointwise |prediction - truth| over a field's grid, with the location of
// the worst error.
struct ErrorField {
  std::vector<double> x;        // m, per point
  std::vector<double> t;        // s, per point
  std::vector<double> abs_err;  // C, per point
  double max_err = 0.0;
  double argmax_x = 0.0;
  double argmax_t = 0.0;
};

using PredictFn = std::function<double(double x, double t)>;

ErrorField error_field(const PredictFn& predict,
                       const heat::FieldSolution& truth);
ErrorField error_field(std::span<const double> pred,
                       const heat::FieldSolution& truth);

// Largest absolute error among points with t in [t_min, t_max].
double max_err_in_window(const ErrorField& field, double t_min, double t_max);

double median(std::vector<double> values);

void write_error_field_csv(const std::string& path, const ErrorField& field,
                           const std::vector<std::string>& comment_lines);

}  // namespace mfpinn::metrics
