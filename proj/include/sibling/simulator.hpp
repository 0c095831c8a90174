#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sibling/core.hpp"

namespace sibling {

/// Offset oscillation added to the remote clock: A·sin(2π(t-boot)/P + φ).
struct Sinusoid {
  double amplitude_ms = 0.0;
  double period_s = 3600.0;
  double phase = 0.0;
};

/// Clock steps at absolute times. A step is applied linearly over slew_s
/// seconds (0 = instantaneous); backwards steps need slew_s > |jump| so the
/// counter stays monotone.
struct ClockStep {
  double time = 0.0;
  double jump_ms = 0.0;
  double slew_s = 0.0;
};
struct PiecewiseSteps {
  std::vector<ClockStep> steps;
};

/// Frequency corrections in the style of ntpd: from `time` on the clock runs
/// at `ppm` instead of the base skew.
struct RateChange {
  double time = 0.0;
  double ppm = 0.0;
};
struct NtpdRamp {
  std::vector<RateChange> changes;
};

using VariableComponent = std::variant<Sinusoid, PiecewiseSteps, NtpdRamp>;

/// Shifted-exponential one-way delay: min_ms + Exp(tail_mean_ms), capped at
/// cap_ms.
struct JitterSpec {
  double min_ms = 0.0;
  double tail_mean_ms = 0.0;
  double cap_ms = std::numeric_limits<double>::infinity();
};

enum class TsvalMode { Counter, Random };

struct ClockSpec {
  double hz = 1000.0;
  double boot_epoch = 0.0;
  double skew_ppm = 0.0;
  std::vector<VariableComponent> variable;
  JitterSpec jitter;
  std::uint64_t seed = 0;
  TsvalMode tsval_mode = TsvalMode::Counter;

  void validate() const;

  /// Seconds the remote clock has counted since boot at wall time t.
  double elapsed(double t) const;

  /// Untruncated tick counter at wall time t.
  std::uint64_t ticks(double t) const;
};

/// Series plus the simulator's untruncated counter values, aligned by index.
struct HostTrace {
  SeriesPtr series;
  std::vector<std::uint64_t> ticks;
};

/// Samples `spec` at remote stamping times; recv_time adds a one-way delay
/// drawn from `jitter` (stream `stream` of spec.seed) and is quantized to
/// microseconds.
HostTrace simulate_host_trace(const ClockSpec& spec, const std::vector<double>& sample_times,
                              const JitterSpec& jitter, std::string ip, Family family,
                              std::uint64_t stream = 0);

SeriesPtr simulate_host(const ClockSpec& spec, const std::vector<double>& sample_times,
                        std::string ip = "198.18.0.1", Family family = Family::V4);

struct SamplingPlan {
  double start = 1480000000.0;
  double interval = 60.0;
  std::size_t count = 600;
  /// v6 probes trail the v4 probes by this many seconds.
  double family_offset = 0.0;

  std::vector<double> times(Family f) const;
};

/// One simulated dual-stack candidate in declarative form.
struct HostSpec {
  std::string id;
  std::string ip4;
  std::string ip6;
  ClockSpec clock;
  JitterSpec jitter4;
  JitterSpec jitter6;
  /// v6 answers from a clock with a different frequency (node #6220 style).
  std::optional<double> hz6;
  std::string fingerprint4 = "MSS-SACK-TS-NOP-WS07";
  std::string fingerprint6 = "MSS-SACK-TS-NOP-WS07";
  std::string group;
  double family_offset = 0.0;
};

/// Both series read one clock trajectory through their own jitter paths.
CandidatePair simulate_sibling(const HostSpec& host, const SamplingPlan& plan);

struct PopulationOptions {
  SamplingPlan plan;
  double boot_window_s = 3.0 * 365.0 * 86400.0;
  double max_family_offset_s = 20.0;
  double jitter_cap_ms = 10.0;
};

/// n host specs: the first round(mix·n) with constant skew ("constant"
/// group), the rest with variable skew ("variable"). Deterministic per seed.
std::vector<HostSpec> generate_population_specs(std::size_t n, double mix, std::uint64_t seed,
                                                const PopulationOptions& opts = {});

std::vector<CandidatePair> generate_population(std::size_t n, double mix, std::uint64_t seed,
                                               const PopulationOptions& opts = {});

nlohmann::json to_json(const HostSpec& host);
HostSpec host_spec_from_json(const nlohmann::json& j);

/// {"plan": {...}, "hosts": [...]} declarative population file.
struct PopulationFile {
  SamplingPlan plan;
  std::vector<HostSpec> hosts;
};
PopulationFile load_population_file(const std::filesystem::path& path);

}  // namespace sibling
