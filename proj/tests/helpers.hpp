#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sibling/core.hpp"
#include "sibling/features.hpp"
#include "sibling/random.hpp"

namespace testutil {

inline sibling::SeriesPtr series_from(const std::vector<double>& t, const std::vector<std::uint32_t>& ts,
                                      sibling::Family f = sibling::Family::V4, std::string ip = "198.18.0.1") {
  std::vector<sibling::TimestampSample> s;
  for (std::size_t i = 0; i < t.size(); ++i) s.push_back({t[i], ts[i]});
  return sibling::make_series(std::move(ip), f, std::move(s));
}

inline sibling::OffsetArray offsets_from(const std::vector<double>& x, const std::vector<double>& y,
                                         double origin = 0.0) {
  sibling::OffsetArray o;
  o.x = x;
  o.y = y;
  o.origin = origin;
  o.hz = 1000.0;
  o.r2_hz = 1.0;
  return o;
}

/// Median of all pairwise slopes, computed without shortcuts.
inline double brute_force_median_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      if (x[i] != x[j]) s.push_back((y[j] - y[i]) / (x[j] - x[i]));
    }
  }
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

/// Clean feature vector that passes the first-order filter.
inline sibling::FeatureVector clean_features() {
  using sibling::FeatureStatus;
  sibling::FeatureVector fv;
  fv.hz4_status = fv.hz6_status = FeatureStatus::Computed;
  fv.hz4 = fv.hz6 = fv.hz4_raw = fv.hz6_raw = 1000.0;
  fv.r2_hz4 = fv.r2_hz6 = 1.0;
  fv.tcpraw_status = FeatureStatus::Computed;
  fv.skew_status = FeatureStatus::Computed;
  fv.rng_status = FeatureStatus::Computed;
  fv.spline_status = FeatureStatus::Computed;
  fv.spline_scaled_status = FeatureStatus::Computed;
  return fv;
}

}  // namespace testutil

namespace doctest {
template <>
struct StringMaker<sibling::Decision> {
  static String convert(const sibling::Decision& d) {
    return (std::string(sibling::to_string(d.verdict)) + "(" + std::string(sibling::to_string(d.reason)) + ")").c_str();
  }
};
}  // namespace doctest
