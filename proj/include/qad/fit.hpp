#pragma once

#include <vector>

namespace qad {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms deviation from the line
};

/// Least-squares line through (N, y[N]) for N in [first, last].
LinearFit fit_line(const std::vector<double>& y, int first, int last);

}  // namespace qad
