#include "sibling/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sibling {

CubicSpline::CubicSpline(double lo, double hi, Eigen::VectorXd coeffs)
    : lo_(lo), hi_(hi), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() < 4) throw std::invalid_argument("CubicSpline: need at least 2 knots");
  if (!(hi_ > lo_)) throw std::invalid_argument("CubicSpline: empty range");
  h_ = (hi_ - lo_) / static_cast<double>(coeffs_.size() - 3);
}

void CubicSpline::locate(double x, double lo, double h, int intervals, int& k, double& t) {
  const double u = (x - lo) / h;
  k = std::clamp(static_cast<int>(std::floor(u)), 0, intervals - 1);
  t = std::clamp(u - k, 0.0, 1.0);
}

void CubicSpline::basis(double t, double out[4]) {
  const double s = 1.0 - t;
  const double t2 = t * t;
  const double t3 = t2 * t;
  out[0] = s * s * s / 6.0;
  out[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
  out[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
  out[3] = t3 / 6.0;
}

CubicSpline CubicSpline::fit_least_squares(std::span<const double> x, std::span<const double> y,
                                           double lo, double hi, int knots) {
  if (knots < 2) throw std::invalid_argument("fit_least_squares: need at least 2 knots");
  if (!(hi > lo)) throw std::invalid_argument("fit_least_squares: empty range");
  const int intervals = knots - 1;
  const int m = knots + 2;
  const double h = (hi - lo) / intervals;

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  double w[4];
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo || x[i] > hi) continue;
    int k;
    double t;
    locate(x[i], lo, h, intervals, k, t);
    basis(t, w);
    for (int a = 0; a < 4; ++a) {
      rhs(k + a) += w[a] * y[i];
      for (int b = 0; b < 4; ++b) normal(k + a, k + b) += w[a] * w[b];
    }
  }
  Eigen::VectorXd coeffs = normal.completeOrthogonalDecomposition().solve(rhs);
  return CubicSpline(lo, hi, std::move(coeffs));
}

double CubicSpline::operator()(double x) const {
  int k;
  double t;
  locate(x, lo_, h_, static_cast<int>(coeffs_.size()) - 3, k, t);
  double w[4];
  basis(t, w);
  return w[0] * coeffs_(k) + w[1] * coeffs_(k + 1) + w[2] * coeffs_(k + 2) + w[3] * coeffs_(k + 3);
}

}  // namespace sibling
