#include "qad/fit.hpp"

#include <cmath>

#include "qad/errors.hpp"

namespace qad {

LinearFit fit_line(const std::vector<double>& y, int first, int last) {
  require(first >= 0 && last > first && last < static_cast<int>(y.size()),
          "fit window outside the series");
  const double n = last - first + 1;
  double sx = 0.0, sy = 0.0;
  for (int i = first; i <= last; ++i) {
    sx += i;
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = first; i <= last; ++i) {
    sxx += (i - mx) * (i - mx);
    sxy += (i - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (int i = first; i <= last; ++i) {
    const double r = y[i] - (f.intercept + f.slope * i);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

}  // namespace qad
