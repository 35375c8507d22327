#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "hicl/encoder.hpp"

namespace hicl {

/// Loss under test: returns the scalar and, when `grads` is non-null, adds
/// its analytic gradient into it.
using LossFunction = std::function<double(const EncoderParams& params, EncoderParams* grads)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Five-point central stencil (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h
  /// instead of the two-point one. Truncation error O(h^4) allows a larger
  /// h, which keeps roundoff down on losses with large values.
  bool fourth_order = false;
  /// Floor on the denominator of the relative error, so coordinates whose
  /// true gradient is ~0 are judged on absolute error.
  double denominator_floor = 1e-6;
  /// Coordinates to check; all of them when empty.
  std::vector<std::size_t> coordinates;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares the analytic gradient with central differences
/// (f(x + h) - f(x - h)) / 2h by default, coordinate by coordinate. Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradCheckReport check_gradients(const LossFunction& loss, EncoderParams params, const GradCheckOptions& opts = {});

}  // namespace hicl
