#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sibling {

enum class Family { V4, V6 };

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

/// One observed packet: local receive time (seconds since epoch) and the
/// remote TSval carried in the segment.
struct TimestampSample {
  double recv_time = 0.0;
  std::uint32_t tsval = 0;

  friend bool operator==(const TimestampSample&, const TimestampSample&) = default;
};

/// Observation sequence of one address. Samples are strictly ascending in
/// recv_time; construct through make_series() to have that checked.
struct TimestampSeries {
  std::string ip;
  Family family = Family::V4;
  std::vector<TimestampSample> samples;

  friend bool operator==(const TimestampSeries&, const TimestampSeries&) = default;
};

using SeriesPtr = std::shared_ptr<const TimestampSeries>;

/// Sorts samples by recv_time, drops exact recv_time duplicates, and wraps the
/// result in an immutable shared series.
SeriesPtr make_series(std::string ip, Family family, std::vector<TimestampSample> samples);

struct TcpOption {
  std::uint8_t kind = 0;
  std::vector<std::uint8_t> value;
};

namespace tcpopt {
inline constexpr std::uint8_t kEol = 0;
inline constexpr std::uint8_t kNop = 1;
inline constexpr std::uint8_t kMss = 2;
inline constexpr std::uint8_t kWindowScale = 3;
inline constexpr std::uint8_t kSackPermitted = 4;
inline constexpr std::uint8_t kTimestamps = 8;
inline constexpr std::uint8_t kMptcp = 30;
inline constexpr std::uint8_t kFastOpen = 34;
}  // namespace tcpopt

/// Canonical TCP options signature, e.g. "MSS-SACK-TS-NOP-WS07".
class OptionsFingerprint {
 public:
  OptionsFingerprint() = default;
  explicit OptionsFingerprint(std::string canonical) : canonical_(std::move(canonical)) {}

  const std::string& str() const { return canonical_; }
  bool empty() const { return canonical_.empty(); }

  friend bool operator==(const OptionsFingerprint&, const OptionsFingerprint&) = default;

 private:
  std::string canonical_;
};

/// Option names in wire order joined by '-'. MSS is recorded by presence only,
/// the window-scale shift is appended as two decimal digits, and kinds without
/// a name render as "UNK".
OptionsFingerprint canonicalize_options(std::span<const TcpOption> options);

/// True iff the two canonical strings differ.
bool options_diff(const OptionsFingerprint& fp4, const OptionsFingerprint& fp6);

enum class Label { Sibling, NonSibling };

std::string_view to_string(Label l);
Label parse_label(std::string_view s);

struct CandidatePair {
  std::string id;
  std::string ip4;
  std::string ip6;
  SeriesPtr series4;
  SeriesPtr series6;
  OptionsFingerprint fp4;
  OptionsFingerprint fp6;
  std::optional<Label> label;
  std::string group;
};

enum class Verdict { Sibling, NonSibling, Unknown, Error };

enum class Reason {
  None,
  OptionsDiffer,
  HzFitFailed,
  HzDiffer,
  HzTooSmall,
  RawTsDelta,
  SkewSign,
  LinearSkew,
  SkewR2Diff,
  RangeDiff,
  SplineArea,
  GuardInterval,
  TimestampBehavior,
  SkewAngle,
  MissingFeature,
};

std::string_view to_string(Verdict v);
std::string_view to_string(Reason r);

struct Decision {
  Verdict verdict = Verdict::Unknown;
  Reason reason = Reason::None;

  static Decision sibling(Reason r) { return {Verdict::Sibling, r}; }
  static Decision non_sibling(Reason r) { return {Verdict::NonSibling, r}; }
  static Decision unknown(Reason r) { return {Verdict::Unknown, r}; }
  static Decision error(Reason r) { return {Verdict::Error, r}; }

  friend bool operator==(const Decision&, const Decision&) = default;
};

}  // namespace sibling
