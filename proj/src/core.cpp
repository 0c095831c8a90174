#include "sibling/core.hpp"

#include <algorithm>
#include <cstdio>

namespace sibling {

std::string_view to_string(Family f) { return f == Family::V4 ? "4" : "6"; }

Family parse_family(std::string_view s) {
  if (s == "4") return Family::V4;
  if (s == "6") return Family::V6;
  throw std::invalid_argument("unknown address family: " + std::string(s));
}

SeriesPtr make_series(std::string ip, Family family, std::vector<TimestampSample> samples) {
  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.recv_time < b.recv_time; });
  auto last = std::unique(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
    return a.recv_time == b.recv_time;
  });
  samples.erase(last, samples.end());
  return std::make_shared<const TimestampSeries>(
      TimestampSeries{std::move(ip), family, std::move(samples)});
}

OptionsFingerprint canonicalize_options(std::span<const TcpOption> options) {
  std::string out;
  auto append = [&out](std::string_view token) {
    if (!out.empty()) out += '-';
    out += token;
  };
  for (const auto& opt : options) {
    switch (opt.kind) {
      case tcpopt::kEol:
        append("EOL");
        break;
      case tcpopt::kNop:
        append("NOP");
        break;
      case tcpopt::kMss:
        append("MSS");
        break;
      case tcpopt::kWindowScale: {
        char buf[8];
        unsigned shift = opt.value.empty() ? 0u : opt.value.front();
        std::snprintf(buf, sizeof buf, "WS%02u", shift);
        append(buf);
        break;
      }
      case tcpopt::kSackPermitted:
        append("SACK");
        break;
      case tcpopt::kTimestamps:
        append("TS");
        break;
      case tcpopt::kFastOpen:
        append("TFO");
        break;
      case tcpopt::kMptcp:
        append("MPTCP");
        break;
      default:
        append("UNK");
        break;
    }
    if (opt.kind == tcpopt::kEol) break;
  }
  return OptionsFingerprint(std::move(out));
}

bool options_diff(const OptionsFingerprint& fp4, const OptionsFingerprint& fp6) {
  return fp4.str() != fp6.str();
}

std::string_view to_string(Label l) { return l == Label::Sibling ? "sibling" : "nonsibling"; }

Label parse_label(std::string_view s) {
  if (s == "sibling") return Label::Sibling;
  if (s == "nonsibling") return Label::NonSibling;
  throw std::invalid_argument("unknown label: " + std::string(s));
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Sibling: return "sibling";
    case Verdict::NonSibling: return "nonsibling";
    case Verdict::Unknown: return "unknown";
    case Verdict::Error: return "error";
  }
  return "?";
}

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::None: return "none";
    case Reason::OptionsDiffer: return "options_differ";
    case Reason::HzFitFailed: return "hz_fit_failed";
    case Reason::HzDiffer: return "hz_differ";
    case Reason::HzTooSmall: return "hz_too_small";
    case Reason::RawTsDelta: return "raw_ts_delta";
    case Reason::SkewSign: return "skew_sign";
    case Reason::LinearSkew: return "linear_skew";
    case Reason::SkewR2Diff: return "skew_r2_diff";
    case Reason::RangeDiff: return "range_diff";
    case Reason::SplineArea: return "spline_area";
    case Reason::GuardInterval: return "guard_interval";
    case Reason::TimestampBehavior: return "timestamp_behavior";
    case Reason::SkewAngle: return "skew_angle";
    case Reason::MissingFeature: return "missing_feature";
  }
  return "?";
}

}  // namespace sibling
