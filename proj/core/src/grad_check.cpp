#include "hicl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hicl {

GradCheckReport check_gradients(const LossFunction& loss, EncoderParams params, const GradCheckOptions& opts) {
  EncoderParams analytic(params.shape());
  loss(params, &analytic);

  std::vector<std::size_t> coords = opts.coordinates;
  if (coords.empty()) {
    coords.resize(params.values().size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
  }

  GradCheckReport report;
  auto values = params.values();
  for (std::size_t i : coords) {
    const double saved = values[i];
    auto at = [&](double offset) {
      values[i] = saved + offset;
      return loss(params, nullptr);
    };
    const double h = opts.step;
    double numeric = 0.0;
    if (opts.fourth_order) {
      numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    } else {
      numeric = (at(h) - at(-h)) / (2.0 * h);
    }
    values[i] = saved;

    const double a = analytic.values()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), opts.denominator_floor});
    const double err = std::abs(a - numeric) / denom;
    ++report.checked;
    if (err > report.max_relative_error || std::isnan(err)) {
      report.max_relative_error = std::isnan(err) ? INFINITY : err;
      report.worst_coordinate = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace hicl
