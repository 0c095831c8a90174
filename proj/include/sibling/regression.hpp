#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sibling {

enum class FeatureErrc { TooFewSamples, DegenerateX, NoOverlap };

class FeatureError : public std::runtime_error {
 public:
  FeatureError(FeatureErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  FeatureErrc code() const noexcept { return code_; }

 private:
  FeatureErrc code_;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Median of a scratch buffer (reordered in place). Even sizes average the
/// two middle elements.
double median_inplace(std::vector<double>& values);

/// Coefficient of determination of y ≈ slope·x + intercept, clamped to [0,1].
/// A constant y that the line reproduces exactly scores 1.
double r_squared(std::span<const double> x, std::span<const double> y, double slope,
                 double intercept);

/// Ordinary least squares. Throws DegenerateX when every x is equal.
LineFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Theil-Sen estimator: slope is the median of all pairwise slopes over pairs
/// with distinct x, intercept the median of y - slope·x. O(n²) memory.
LineFit theil_sen_fit(std::span<const double> x, std::span<const double> y);

}  // namespace sibling
