#include "sibling/regression.hpp"

#include <algorithm>
#include <cmath>

namespace sibling {

double median_inplace(std::vector<double>& values) {
  if (values.empty()) throw FeatureError(FeatureErrc::TooFewSamples, "median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return (lower + upper) / 2.0;
}

double r_squared(std::span<const double> x, std::span<const double> y, double slope,
                 double intercept) {
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - (slope * x[i] + intercept);
    ss_res += r * r;
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

LineFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("ols_fit: size mismatch");
  if (x.size() < 2) throw FeatureError(FeatureErrc::TooFewSamples, "ols_fit needs 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw FeatureError(FeatureErrc::DegenerateX, "ols_fit: all x equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = r_squared(x, y, fit.slope, fit.intercept);
  return fit;
}

LineFit theil_sen_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("theil_sen_fit: size mismatch");
  if (x.size() < 3) throw FeatureError(FeatureErrc::TooFewSamples, "theil_sen_fit needs 3 points");
  std::vector<double> slopes;
  slopes.reserve(x.size() * (x.size() - 1) / 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[j] - x[i];
      if (dx != 0.0) slopes.push_back((y[j] - y[i]) / dx);
    }
  }
  if (slopes.empty()) throw FeatureError(FeatureErrc::DegenerateX, "theil_sen_fit: all x equal");
  LineFit fit;
  fit.slope = median_inplace(slopes);
  std::vector<double> residuals(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) residuals[i] = y[i] - fit.slope * x[i];
  fit.intercept = median_inplace(residuals);
  fit.r2 = r_squared(x, y, fit.slope, fit.intercept);
  return fit;
}

}  // namespace sibling
