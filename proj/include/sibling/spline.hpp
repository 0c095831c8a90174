#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sibling {

/// Cubic spline on equidistant knots over [lo, hi], represented in the
/// uniform cubic B-spline basis (knots + 2 coefficients). Evaluation clamps
/// to the knot range.
class CubicSpline {
 public:
  CubicSpline(double lo, double hi, Eigen::VectorXd coeffs);

  /// Least-squares approximation of (x, y) through `knots` equidistant knots
  /// spanning [lo, hi]. Points outside the range are ignored. Rank-deficient
  /// systems (empty knot intervals) resolve to the minimum-norm solution.
  static CubicSpline fit_least_squares(std::span<const double> x, std::span<const double> y,
                                       double lo, double hi, int knots);

  double operator()(double x) const;

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int knots() const { return static_cast<int>(coeffs_.size()) - 2; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }

  /// Locates x: interval index k and local parameter t ∈ [0,1]. The basis
  /// functions with non-zero weight are k..k+3.
  static void locate(double x, double lo, double h, int intervals, int& k, double& t);
  static void basis(double t, double out[4]);

 private:
  double lo_;
  double hi_;
  double h_;
  Eigen::VectorXd coeffs_;
};

}  // namespace sibling
