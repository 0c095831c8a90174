#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sibling/core.hpp"
#include "sibling/regression.hpp"
#include "sibling/spline.hpp"

namespace sibling {

struct FeatureConfig {
  double r2_hz_min = 0.9;
  int max_wraps = 3;
  double trim_fraction = 0.025;
  int spline_knots = 13;
  int spline_grid = 1000;
  double rng_diff_epsilon_ms = 1e-6;
};

/// Relative arrays: x_i = t_i - t_1 (seconds), v_i = T_i - T_1 (ticks) with
/// 2^32 added cumulatively at every backwards step of the 32-bit counter.
struct Unwrapped {
  std::vector<double> x;
  std::vector<std::int64_t> v;
  int wraps = 0;
};

Unwrapped unwrap_and_relativize(const TimestampSeries& series);

struct HzEstimate {
  double hz = 0.0;          ///< raw OLS slope, ticks per second
  std::int64_t rounded = 0; ///< nearest integer, used for every comparison
  double r2 = 0.0;
};

HzEstimate estimate_hz(std::span<const double> x, std::span<const std::int64_t> v);

/// |(T1⁴/hz4 - T1⁶/hz6) - (t1⁴ - t1⁶)| in seconds, from the first sample of
/// each series.
double delta_tcpraw(const TimestampSeries& series4, const TimestampSeries& series6, double hz4,
                    double hz6);

struct OffsetArray {
  std::vector<double> x;  ///< seconds since the first packet
  std::vector<double> y;  ///< offset in milliseconds
  double origin = 0.0;    ///< absolute recv_time of the first packet
  double hz = 0.0;
  double r2_hz = 0.0;
};

/// y_i = (v_i/hz - x_i)·1000.
OffsetArray offsets(std::span<const double> x, std::span<const std::int64_t> v, double hz,
                    double origin = 0.0, double r2_hz = 1.0);

struct SkewFit {
  double alpha = 0.0;  ///< ms per second
  double intercept = 0.0;
  double r2 = 0.0;
};

SkewFit robust_skew(const OffsetArray& off);

/// Spread of y after dropping floor(trim·n) values from each tail.
double dynamic_range(const OffsetArray& off, double trim_fraction = 0.025);

struct SplineFits {
  CubicSpline s4;
  CubicSpline s6;
  double lo = 0.0;  ///< common range, absolute seconds
  double hi = 0.0;
  double origin4 = 0.0;
  double origin6 = 0.0;

  double eval4(double t) const { return s4(t - origin4); }
  double eval6(double t) const { return s6(t - origin6); }
};

/// Fits both sides with equidistant knots over their common absolute time
/// range. Throws NoOverlap or TooFewSamples (fewer than `knots` points of
/// either side inside the common range).
SplineFits fit_offset_splines(const OffsetArray& off4, const OffsetArray& off6, int knots = 13);

struct SplineDiff {
  double spl_diff = 0.0;                 ///< ms, mean absolute gap after best shift
  std::optional<double> spl_diff_scaled; ///< unset when rng_diff ≤ epsilon
  double shift = 0.0;                    ///< the optimal constant removed from s4 - s6
};

SplineDiff spline_pair(const OffsetArray& off4, const OffsetArray& off6,
                       const FeatureConfig& cfg = {});

enum class FeatureStatus { Computed, Failed, Skipped };

std::string_view to_string(FeatureStatus s);

/// Everything about one address that does not depend on its partner.
struct SideFeatures {
  FeatureStatus hz_status = FeatureStatus::Skipped;
  HzEstimate hz;
  int wraps = 0;
  bool erratic = false;
  std::optional<OffsetArray> offsets;
  FeatureStatus skew_status = FeatureStatus::Skipped;
  SkewFit skew;
  FeatureStatus rng_status = FeatureStatus::Skipped;
  double rng = 0.0;
};

SideFeatures compute_side(const TimestampSeries& series, const FeatureConfig& cfg = {});

struct FeatureVector {
  bool opts_diff = false;

  FeatureStatus hz4_status = FeatureStatus::Skipped;
  FeatureStatus hz6_status = FeatureStatus::Skipped;
  double hz4 = 0.0;  ///< rounded
  double hz6 = 0.0;
  double hz4_raw = 0.0;
  double hz6_raw = 0.0;
  double hz_diff = 0.0;
  double r2_hz4 = 0.0;
  double r2_hz6 = 0.0;

  FeatureStatus tcpraw_status = FeatureStatus::Skipped;
  double delta_tcpraw = 0.0;

  FeatureStatus skew_status = FeatureStatus::Skipped;
  double alpha4 = 0.0;
  double alpha6 = 0.0;
  double alpha_diff = 0.0;
  double r2_skew4 = 0.0;
  double r2_skew6 = 0.0;
  double r2_skewdiff = 0.0;

  FeatureStatus rng_status = FeatureStatus::Skipped;
  double rng4 = 0.0;
  double rng6 = 0.0;
  double rng_diff = 0.0;
  double rng_avg = 0.0;
  double rng_diff_rel = 0.0;

  FeatureStatus spline_status = FeatureStatus::Skipped;
  double spl_diff = 0.0;
  FeatureStatus spline_scaled_status = FeatureStatus::Skipped;
  double spl_diff_scaled = 0.0;

  /// Both sides yield a usable, equal, ≥1 Hz clock; pair features exist.
  bool hz_usable() const;
};

/// Pairs two precomputed sides. Data-quality problems never throw; they land
/// in the status fields.
FeatureVector combine_sides(const SideFeatures& side4, const SideFeatures& side6,
                            const TimestampSeries& series4, const TimestampSeries& series6,
                            const OptionsFingerprint& fp4, const OptionsFingerprint& fp6,
                            const FeatureConfig& cfg = {});

FeatureVector extract_features(const CandidatePair& pair, const FeatureConfig& cfg = {});

/// Batch extraction. Side features are computed once per distinct series,
/// which matters for synthesized non-siblings that reuse sibling series.
std::vector<FeatureVector> extract_features_batch(std::span<const CandidatePair> pairs,
                                                  const FeatureConfig& cfg = {},
                                                  unsigned workers = 1);

void write_feature_csv_header(std::ostream& os);
void write_feature_csv_row(std::ostream& os, const CandidatePair& pair, const FeatureVector& fv);

}  // namespace sibling
