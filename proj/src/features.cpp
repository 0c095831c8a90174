#include "sibling/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "sibling/util.hpp"

namespace sibling {

namespace {

constexpr std::int64_t kWrap = std::int64_t{1} << 32;

}  // namespace

Unwrapped unwrap_and_relativize(const TimestampSeries& series) {
  const auto& s = series.samples;
  if (s.size() < 2) throw FeatureError(FeatureErrc::TooFewSamples, "series " + series.ip + " has fewer than 2 samples");
  Unwrapped out;
  out.x.reserve(s.size());
  out.v.reserve(s.size());
  const double t1 = s.front().recv_time;
  const std::int64_t first = s.front().tsval;
  std::int64_t carry = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0 && s[i].tsval < s[i - 1].tsval) {
      carry += kWrap;
      ++out.wraps;
    }
    out.x.push_back(s[i].recv_time - t1);
    out.v.push_back(static_cast<std::int64_t>(s[i].tsval) + carry - first);
  }
  return out;
}

HzEstimate estimate_hz(std::span<const double> x, std::span<const std::int64_t> v) {
  std::vector<double> vd(v.begin(), v.end());
  const LineFit fit = ols_fit(x, vd);
  HzEstimate est;
  est.hz = fit.slope;
  est.rounded = std::llround(fit.slope);
  est.r2 = fit.r2;
  return est;
}

double delta_tcpraw(const TimestampSeries& series4, const TimestampSeries& series6, double hz4,
                    double hz6) {
  const auto& a = series4.samples.front();
  const auto& b = series6.samples.front();
  const double delta_tcp = static_cast<double>(a.tsval) / hz4 - static_cast<double>(b.tsval) / hz6;
  const double delta_rec = a.recv_time - b.recv_time;
  return std::abs(delta_tcp - delta_rec);
}

OffsetArray offsets(std::span<const double> x, std::span<const std::int64_t> v, double hz,
                    double origin, double r2_hz) {
  OffsetArray off;
  off.origin = origin;
  off.hz = hz;
  off.r2_hz = r2_hz;
  off.x.assign(x.begin(), x.end());
  off.y.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    off.y[i] = (static_cast<double>(v[i]) / hz - x[i]) * 1000.0;
  }
  return off;
}

SkewFit robust_skew(const OffsetArray& off) {
  const LineFit fit = theil_sen_fit(off.x, off.y);
  return {fit.slope, fit.intercept, fit.r2};
}

double dynamic_range(const OffsetArray& off, double trim_fraction) {
  if (off.y.size() < 2) throw FeatureError(FeatureErrc::TooFewSamples, "dynamic_range needs 2 points");
  std::vector<double> y = off.y;
  std::sort(y.begin(), y.end());
  const auto k = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(y.size())));
  if (2 * k >= y.size()) return 0.0;
  return y[y.size() - 1 - k] - y[k];
}

SplineFits fit_offset_splines(const OffsetArray& off4, const OffsetArray& off6, int knots) {
  if (off4.x.empty() || off6.x.empty()) throw FeatureError(FeatureErrc::TooFewSamples, "empty offset array");
  const double lo = std::max(off4.origin + off4.x.front(), off6.origin + off6.x.front());
  const double hi = std::min(off4.origin + off4.x.back(), off6.origin + off6.x.back());
  if (!(hi > lo)) throw FeatureError(FeatureErrc::NoOverlap, "offset arrays do not overlap in time");

  auto fit_side = [&](const OffsetArray& off) {
    const double a = lo - off.origin;
    const double b = hi - off.origin;
    const auto inside = std::count_if(off.x.begin(), off.x.end(), [&](double x) { return x >= a && x <= b; });
    if (inside < knots) {
      throw FeatureError(FeatureErrc::TooFewSamples, "fewer points than spline knots in common range");
    }
    return CubicSpline::fit_least_squares(off.x, off.y, a, b, knots);
  };
  return SplineFits{fit_side(off4), fit_side(off6), lo, hi, off4.origin, off6.origin};
}

SplineDiff spline_pair(const OffsetArray& off4, const OffsetArray& off6, const FeatureConfig& cfg) {
  const SplineFits fits = fit_offset_splines(off4, off6, cfg.spline_knots);
  const int grid = std::max(cfg.spline_grid, 2);
  std::vector<double> diff(static_cast<std::size_t>(grid));
  const double step = (fits.hi - fits.lo) / grid;
  for (int g = 0; g < grid; ++g) {
    const double t = fits.lo + step * (g + 0.5);
    diff[static_cast<std::size_t>(g)] = fits.eval4(t) - fits.eval6(t);
  }
  std::vector<double> scratch = diff;
  SplineDiff out;
  out.shift = median_inplace(scratch);
  double total = 0.0;
  for (double d : diff) total += std::abs(d - out.shift);
  out.spl_diff = total / grid;

  const double rng_diff =
      std::abs(dynamic_range(off4, cfg.trim_fraction) - dynamic_range(off6, cfg.trim_fraction));
  if (rng_diff > cfg.rng_diff_epsilon_ms) out.spl_diff_scaled = out.spl_diff / rng_diff;
  return out;
}

std::string_view to_string(FeatureStatus s) {
  switch (s) {
    case FeatureStatus::Computed: return "computed";
    case FeatureStatus::Failed: return "failed";
    case FeatureStatus::Skipped: return "skipped";
  }
  return "?";
}

SideFeatures compute_side(const TimestampSeries& series, const FeatureConfig& cfg) {
  SideFeatures side;
  Unwrapped u;
  try {
    u = unwrap_and_relativize(series);
  } catch (const FeatureError&) {
    side.hz_status = FeatureStatus::Failed;
    return side;
  }
  side.wraps = u.wraps;
  side.erratic = u.wraps > cfg.max_wraps;

  try {
    if (side.erratic) {
      // Too many backwards steps for a real counter. Fit the raw values so the
      // reported R² reflects the lack of any linear trend.
      std::vector<std::int64_t> raw(series.samples.size());
      const std::int64_t first = series.samples.front().tsval;
      for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = series.samples[i].tsval - first;
      side.hz = estimate_hz(u.x, raw);
      side.hz_status = FeatureStatus::Failed;
      return side;
    }
    side.hz = estimate_hz(u.x, u.v);
  } catch (const FeatureError&) {
    side.hz_status = FeatureStatus::Failed;
    return side;
  }
  if (!(side.hz.r2 >= cfg.r2_hz_min)) {
    side.hz_status = FeatureStatus::Failed;
    return side;
  }
  side.hz_status = FeatureStatus::Computed;
  if (side.hz.rounded < 1) return side;

  side.offsets = offsets(u.x, u.v, static_cast<double>(side.hz.rounded),
                         series.samples.front().recv_time, side.hz.r2);
  try {
    side.skew = robust_skew(*side.offsets);
    side.skew_status = FeatureStatus::Computed;
  } catch (const FeatureError&) {
    side.skew_status = FeatureStatus::Failed;
  }
  side.rng = dynamic_range(*side.offsets, cfg.trim_fraction);
  side.rng_status = FeatureStatus::Computed;
  return side;
}

bool FeatureVector::hz_usable() const {
  return hz4_status == FeatureStatus::Computed && hz6_status == FeatureStatus::Computed &&
         hz4 == hz6 && hz4 >= 1.0;
}

FeatureVector combine_sides(const SideFeatures& side4, const SideFeatures& side6,
                            const TimestampSeries& series4, const TimestampSeries& series6,
                            const OptionsFingerprint& fp4, const OptionsFingerprint& fp6,
                            const FeatureConfig& cfg) {
  FeatureVector fv;
  fv.opts_diff = options_diff(fp4, fp6);

  fv.hz4_status = side4.hz_status;
  fv.hz6_status = side6.hz_status;
  fv.hz4 = static_cast<double>(side4.hz.rounded);
  fv.hz6 = static_cast<double>(side6.hz.rounded);
  fv.hz4_raw = side4.hz.hz;
  fv.hz6_raw = side6.hz.hz;
  fv.hz_diff = std::abs(fv.hz4 - fv.hz6);
  fv.r2_hz4 = side4.hz.r2;
  fv.r2_hz6 = side6.hz.r2;

  if (!fv.hz_usable()) return fv;

  fv.delta_tcpraw = delta_tcpraw(series4, series6, fv.hz4, fv.hz6);
  fv.tcpraw_status = FeatureStatus::Computed;

  if (side4.skew_status == FeatureStatus::Computed && side6.skew_status == FeatureStatus::Computed) {
    fv.alpha4 = side4.skew.alpha;
    fv.alpha6 = side6.skew.alpha;
    fv.alpha_diff = fv.alpha4 - fv.alpha6;
    fv.r2_skew4 = side4.skew.r2;
    fv.r2_skew6 = side6.skew.r2;
    fv.r2_skewdiff = fv.r2_skew4 - fv.r2_skew6;
    fv.skew_status = FeatureStatus::Computed;
  } else {
    fv.skew_status = FeatureStatus::Failed;
  }

  fv.rng4 = side4.rng;
  fv.rng6 = side6.rng;
  fv.rng_diff = std::abs(fv.rng4 - fv.rng6);
  fv.rng_avg = (fv.rng4 + fv.rng6) / 2.0;
  fv.rng_diff_rel = fv.rng_avg > 0.0 ? fv.rng_diff / fv.rng_avg : 0.0;
  fv.rng_status = FeatureStatus::Computed;

  try {
    const SplineDiff sd = spline_pair(*side4.offsets, *side6.offsets, cfg);
    fv.spl_diff = sd.spl_diff;
    fv.spline_status = FeatureStatus::Computed;
    if (sd.spl_diff_scaled) {
      fv.spl_diff_scaled = *sd.spl_diff_scaled;
      fv.spline_scaled_status = FeatureStatus::Computed;
    } else {
      fv.spline_scaled_status = FeatureStatus::Failed;
    }
  } catch (const FeatureError&) {
    fv.spline_status = FeatureStatus::Failed;
    fv.spline_scaled_status = FeatureStatus::Skipped;
  }
  return fv;
}

FeatureVector extract_features(const CandidatePair& pair, const FeatureConfig& cfg) {
  const SideFeatures s4 = compute_side(*pair.series4, cfg);
  const SideFeatures s6 = compute_side(*pair.series6, cfg);
  return combine_sides(s4, s6, *pair.series4, *pair.series6, pair.fp4, pair.fp6, cfg);
}

std::vector<FeatureVector> extract_features_batch(std::span<const CandidatePair> pairs,
                                                  const FeatureConfig& cfg, unsigned workers) {
  std::unordered_map<const TimestampSeries*, std::size_t> index;
  std::vector<const TimestampSeries*> distinct;
  for (const auto& p : pairs) {
    for (const auto* s : {p.series4.get(), p.series6.get()}) {
      if (index.emplace(s, distinct.size()).second) distinct.push_back(s);
    }
  }
  std::vector<SideFeatures> sides(distinct.size());
  parallel_for(distinct.size(), workers, [&](std::size_t i) { sides[i] = compute_side(*distinct[i], cfg); });

  std::vector<FeatureVector> out(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    const auto& p = pairs[i];
    out[i] = combine_sides(sides[index.at(p.series4.get())], sides[index.at(p.series6.get())],
                           *p.series4, *p.series6, p.fp4, p.fp6, cfg);
  });
  return out;
}

namespace {

void put(std::ostream& os, FeatureStatus st, double value) {
  os << ',';
  if (st == FeatureStatus::Computed) os << format_double(value);
}

}  // namespace

void write_feature_csv_header(std::ostream& os) {
  os << "id,ip4,ip6,label,opts_diff,hz_status,hz4,hz6,hz4_raw,hz6_raw,hz_diff,r2_hz4,r2_hz6,"
        "tcpraw_status,delta_tcpraw,skew_status,alpha4,alpha6,alpha_diff,r2_skew4,r2_skew6,"
        "r2_skewdiff,rng_status,rng4,rng6,rng_diff,rng_avg,rng_diff_rel,spline_status,spl_diff,"
        "spl_diff_scaled\n";
}

void write_feature_csv_row(std::ostream& os, const CandidatePair& pair, const FeatureVector& fv) {
  const auto hz_status = fv.hz4_status == FeatureStatus::Computed ? fv.hz6_status : fv.hz4_status;
  os << pair.id << ',' << pair.ip4 << ',' << pair.ip6 << ','
     << (pair.label ? to_string(*pair.label) : std::string_view{}) << ',' << (fv.opts_diff ? 1 : 0)
     << ',' << to_string(hz_status) << ',' << format_double(fv.hz4) << ',' << format_double(fv.hz6)
     << ',' << format_double(fv.hz4_raw) << ',' << format_double(fv.hz6_raw) << ','
     << format_double(fv.hz_diff) << ',' << format_double(fv.r2_hz4) << ','
     << format_double(fv.r2_hz6) << ',' << to_string(fv.tcpraw_status);
  put(os, fv.tcpraw_status, fv.delta_tcpraw);
  os << ',' << to_string(fv.skew_status);
  for (double v : {fv.alpha4, fv.alpha6, fv.alpha_diff, fv.r2_skew4, fv.r2_skew6, fv.r2_skewdiff})
    put(os, fv.skew_status, v);
  os << ',' << to_string(fv.rng_status);
  for (double v : {fv.rng4, fv.rng6, fv.rng_diff, fv.rng_avg, fv.rng_diff_rel}) put(os, fv.rng_status, v);
  os << ',' << to_string(fv.spline_status);
  put(os, fv.spline_status, fv.spl_diff);
  put(os, fv.spline_scaled_status, fv.spl_diff_scaled);
  os << '\n';
}

}  // namespace sibling
