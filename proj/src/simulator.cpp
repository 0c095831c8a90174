#include "sibling/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "sibling/random.hpp"
#include "sibling/util.hpp"

namespace sibling {

void ClockSpec::validate() const {
  if (!(hz >= 1.0)) throw std::invalid_argument("ClockSpec: hz must be >= 1");
  if (jitter.min_ms < 0.0 || jitter.tail_mean_ms < 0.0) throw std::invalid_argument("ClockSpec: negative jitter");
  for (const auto& c : variable) {
    if (const auto* s = std::get_if<PiecewiseSteps>(&c)) {
      for (const auto& st : s->steps) {
        if (st.jump_ms < 0.0 && !(st.slew_s * 1000.0 > -st.jump_ms)) {
          throw std::invalid_argument("ClockSpec: backwards step needs slew_s > |jump|");
        }
      }
    }
  }
}

double ClockSpec::elapsed(double t) const {
  const double since_boot = t - boot_epoch;
  double e = since_boot * (1.0 + skew_ppm * 1e-6);
  for (const auto& c : variable) {
    if (const auto* s = std::get_if<Sinusoid>(&c)) {
      e += s->amplitude_ms / 1000.0 *
           std::sin(2.0 * std::numbers::pi * since_boot / s->period_s + s->phase);
    } else if (const auto* p = std::get_if<PiecewiseSteps>(&c)) {
      for (const auto& st : p->steps) {
        if (st.slew_s <= 0.0) {
          if (t >= st.time) e += st.jump_ms / 1000.0;
        } else {
          e += st.jump_ms / 1000.0 * std::clamp((t - st.time) / st.slew_s, 0.0, 1.0);
        }
      }
    } else if (const auto* r = std::get_if<NtpdRamp>(&c)) {
      for (std::size_t k = 0; k < r->changes.size(); ++k) {
        const double begin = r->changes[k].time;
        const double end = k + 1 < r->changes.size() ? r->changes[k + 1].time
                                                     : std::numeric_limits<double>::infinity();
        const double span = std::min(t, end) - begin;
        if (span > 0.0) e += (r->changes[k].ppm - skew_ppm) * 1e-6 * span;
      }
    }
  }
  return e;
}

std::uint64_t ClockSpec::ticks(double t) const {
  const double e = elapsed(t);
  if (e < 0.0) throw std::invalid_argument("ClockSpec: sample before boot");
  return static_cast<std::uint64_t>(std::floor(hz * e));
}

HostTrace simulate_host_trace(const ClockSpec& spec, const std::vector<double>& sample_times,
                              const JitterSpec& jitter, std::string ip, Family family,
                              std::uint64_t stream) {
  spec.validate();
  CounterRng delay_rng(derive_seed(spec.seed, stream * 2));
  CounterRng tsval_rng(derive_seed(spec.seed, stream * 2 + 1));

  struct Row {
    TimestampSample sample;
    std::uint64_t ticks;
  };
  std::vector<Row> rows;
  rows.reserve(sample_times.size());
  for (double t : sample_times) {
    std::uint64_t ticks;
    if (spec.tsval_mode == TsvalMode::Random) {
      ticks = tsval_rng.next() & 0xffffffffULL;
    } else {
      ticks = spec.ticks(t);
    }
    double delay_ms = jitter.min_ms;
    if (jitter.tail_mean_ms > 0.0) delay_ms += delay_rng.exponential(jitter.tail_mean_ms);
    delay_ms = std::min(delay_ms, jitter.cap_ms);
    const double recv = std::round((t + delay_ms / 1000.0) * 1e6) / 1e6;
    rows.push_back({{recv, static_cast<std::uint32_t>(ticks & 0xffffffffULL)}, ticks});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.sample.recv_time < b.sample.recv_time;
  });

  HostTrace out;
  std::vector<TimestampSample> samples;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].sample.recv_time == rows[i - 1].sample.recv_time) continue;
    samples.push_back(rows[i].sample);
    out.ticks.push_back(rows[i].ticks);
  }
  out.series = make_series(std::move(ip), family, std::move(samples));
  return out;
}

SeriesPtr simulate_host(const ClockSpec& spec, const std::vector<double>& sample_times,
                        std::string ip, Family family) {
  return simulate_host_trace(spec, sample_times, spec.jitter, std::move(ip), family).series;
}

std::vector<double> SamplingPlan::times(Family f) const {
  std::vector<double> out(count);
  const double base = start + (f == Family::V6 ? family_offset : 0.0);
  for (std::size_t i = 0; i < count; ++i) out[i] = base + interval * static_cast<double>(i);
  return out;
}

CandidatePair simulate_sibling(const HostSpec& host, const SamplingPlan& plan) {
  SamplingPlan p = plan;
  p.family_offset = host.family_offset;
  ClockSpec clock6 = host.clock;
  if (host.hz6) clock6.hz = *host.hz6;

  CandidatePair pair;
  pair.id = host.id;
  pair.ip4 = host.ip4;
  pair.ip6 = host.ip6;
  pair.series4 = simulate_host_trace(host.clock, p.times(Family::V4), host.jitter4, host.ip4, Family::V4, 4).series;
  pair.series6 = simulate_host_trace(clock6, p.times(Family::V6), host.jitter6, host.ip6, Family::V6, 6).series;
  pair.fp4 = OptionsFingerprint(host.fingerprint4);
  pair.fp6 = OptionsFingerprint(host.fingerprint6);
  pair.label = Label::Sibling;
  pair.group = host.group;
  return pair;
}

namespace {

constexpr const char* kFingerprints[] = {
    "MSS-SACK-TS-NOP-WS07",
    "MSS-NOP-WS08-SACK-TS",
    "MSS-SACK-TS-NOP-WS09",
    "MSS-NOP-WS06-NOP-NOP-TS-SACK-EOL",
};

std::string ip4_for(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "198.%zu.%zu.%zu", 18 + i / 65024, (i / 254) % 256, i % 254 + 1);
  return buf;
}

std::string ip6_for(std::size_t i) {
  char buf[48];
  const std::size_t hi = (i + 1) >> 16;
  if (hi == 0) {
    std::snprintf(buf, sizeof buf, "2001:db8::%zx", i + 1);
  } else {
    std::snprintf(buf, sizeof buf, "2001:db8::%zx:%zx", hi, (i + 1) & 0xffff);
  }
  return buf;
}

double pick_hz(CounterRng& rng) {
  const double u = rng.uniform();
  if (u < 0.05) return 10.0;
  if (u < 0.30) return 100.0;
  if (u < 0.55) return 250.0;
  return 1000.0;
}

JitterSpec pick_jitter(CounterRng& rng, double cap_ms) {
  JitterSpec j;
  j.min_ms = rng.uniform(5.0, 60.0);
  j.tail_mean_ms = rng.uniform(0.5, 3.0);
  j.cap_ms = j.min_ms + cap_ms;
  return j;
}

std::vector<VariableComponent> pick_variable(CounterRng& rng, const SamplingPlan& plan) {
  const double begin = plan.start;
  const double end = plan.start + plan.interval * static_cast<double>(plan.count);
  auto sinusoid = [&](double amp_lo, double amp_hi) {
    return Sinusoid{rng.uniform(amp_lo, amp_hi), rng.uniform(4.0 * 3600.0, 14.0 * 3600.0),
                    rng.uniform(0.0, 2.0 * std::numbers::pi)};
  };
  std::vector<VariableComponent> out;
  switch (rng.below(4)) {
    case 0:
      out.push_back(sinusoid(10.0, 200.0));
      break;
    case 1: {
      NtpdRamp ramp;
      const auto changes = 2 + rng.below(3);
      for (std::uint64_t k = 0; k < changes; ++k) ramp.changes.push_back({rng.uniform(begin, end), rng.uniform(-60.0, 60.0)});
      std::sort(ramp.changes.begin(), ramp.changes.end(),
                [](const RateChange& a, const RateChange& b) { return a.time < b.time; });
      out.push_back(std::move(ramp));
      break;
    }
    case 2: {
      // Leap second absorbed by slewing back, then ntpd retuning the rate.
      const double when = rng.uniform(begin + 0.2 * (end - begin), begin + 0.6 * (end - begin));
      out.push_back(PiecewiseSteps{{ClockStep{when, -1000.0, 1800.0}}});
      out.push_back(NtpdRamp{{RateChange{when + 3600.0, rng.uniform(-30.0, 30.0)}}});
      break;
    }
    default:
      out.push_back(sinusoid(10.0, 100.0));
      out.push_back(sinusoid(5.0, 50.0));
      break;
  }
  return out;
}

}  // namespace

std::vector<HostSpec> generate_population_specs(std::size_t n, double mix, std::uint64_t seed,
                                                const PopulationOptions& opts) {
  if (mix < 0.0 || mix > 1.0) throw std::invalid_argument("mix must lie in [0,1]");
  const auto constant = static_cast<std::size_t>(std::llround(mix * static_cast<double>(n)));
  std::vector<HostSpec> hosts;
  hosts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(derive_seed(seed, i));
    HostSpec h;
    char id[32];
    std::snprintf(id, sizeof id, "c%05zu", i);
    h.id = id;
    h.ip4 = ip4_for(i);
    h.ip6 = ip6_for(i);
    h.clock.hz = pick_hz(rng);
    h.clock.boot_epoch = opts.plan.start - rng.uniform(3600.0, opts.boot_window_s);
    h.clock.skew_ppm = rng.uniform(-60.0, 60.0);
    h.clock.seed = rng.next();
    h.jitter4 = pick_jitter(rng, opts.jitter_cap_ms);
    h.jitter6 = pick_jitter(rng, opts.jitter_cap_ms);
    h.clock.jitter = h.jitter4;
    h.family_offset = rng.uniform(0.0, opts.max_family_offset_s);
    h.fingerprint4 = h.fingerprint6 = kFingerprints[rng.below(std::size(kFingerprints))];
    if (i < constant) {
      h.group = "constant";
    } else {
      h.group = "variable";
      h.clock.variable = pick_variable(rng, opts.plan);
    }
    hosts.push_back(std::move(h));
  }
  return hosts;
}

std::vector<CandidatePair> generate_population(std::size_t n, double mix, std::uint64_t seed,
                                               const PopulationOptions& opts) {
  std::vector<CandidatePair> out;
  for (const auto& h : generate_population_specs(n, mix, seed, opts)) out.push_back(simulate_sibling(h, opts.plan));
  return out;
}

namespace {

nlohmann::json jitter_json(const JitterSpec& j) {
  nlohmann::json out{{"min_ms", j.min_ms}, {"tail_mean_ms", j.tail_mean_ms}};
  if (std::isfinite(j.cap_ms)) out["cap_ms"] = j.cap_ms;
  return out;
}

JitterSpec jitter_from(const nlohmann::json& j) {
  JitterSpec out;
  out.min_ms = j.value("min_ms", 0.0);
  out.tail_mean_ms = j.value("tail_mean_ms", 0.0);
  if (j.contains("cap_ms")) out.cap_ms = j.at("cap_ms").get<double>();
  return out;
}

}  // namespace

nlohmann::json to_json(const HostSpec& host) {
  nlohmann::json variable = nlohmann::json::array();
  for (const auto& c : host.clock.variable) {
    if (const auto* s = std::get_if<Sinusoid>(&c)) {
      variable.push_back({{"type", "sinusoid"}, {"amplitude_ms", s->amplitude_ms}, {"period_s", s->period_s}, {"phase", s->phase}});
    } else if (const auto* p = std::get_if<PiecewiseSteps>(&c)) {
      nlohmann::json steps = nlohmann::json::array();
      for (const auto& st : p->steps) steps.push_back({{"time", st.time}, {"jump_ms", st.jump_ms}, {"slew_s", st.slew_s}});
      variable.push_back({{"type", "steps"}, {"steps", steps}});
    } else if (const auto* r = std::get_if<NtpdRamp>(&c)) {
      nlohmann::json changes = nlohmann::json::array();
      for (const auto& ch : r->changes) changes.push_back({{"time", ch.time}, {"ppm", ch.ppm}});
      variable.push_back({{"type", "ntpd_ramp"}, {"changes", changes}});
    }
  }
  nlohmann::json out{
      {"id", host.id},
      {"ip4", host.ip4},
      {"ip6", host.ip6},
      {"hz", host.clock.hz},
      {"boot_epoch", host.clock.boot_epoch},
      {"skew_ppm", host.clock.skew_ppm},
      {"variable", variable},
      {"tsval_mode", host.clock.tsval_mode == TsvalMode::Random ? "random" : "counter"},
      {"seed", host.clock.seed},
      {"jitter4", jitter_json(host.jitter4)},
      {"jitter6", jitter_json(host.jitter6)},
      {"fingerprint4", host.fingerprint4},
      {"fingerprint6", host.fingerprint6},
      {"group", host.group},
      {"family_offset", host.family_offset},
  };
  if (host.hz6) out["hz6"] = *host.hz6;
  return out;
}

HostSpec host_spec_from_json(const nlohmann::json& j) {
  HostSpec h;
  h.id = j.at("id").get<std::string>();
  h.ip4 = j.at("ip4").get<std::string>();
  h.ip6 = j.at("ip6").get<std::string>();
  h.clock.hz = j.value("hz", 1000.0);
  h.clock.boot_epoch = j.at("boot_epoch").get<double>();
  h.clock.skew_ppm = j.value("skew_ppm", 0.0);
  h.clock.seed = j.value("seed", std::uint64_t{0});
  const std::string mode = j.value("tsval_mode", std::string("counter"));
  if (mode == "random") {
    h.clock.tsval_mode = TsvalMode::Random;
  } else if (mode != "counter") {
    throw std::invalid_argument("unknown tsval_mode: " + mode);
  }
  if (j.contains("variable")) {
    for (const auto& c : j.at("variable")) {
      const auto type = c.at("type").get<std::string>();
      if (type == "sinusoid") {
        h.clock.variable.push_back(Sinusoid{c.at("amplitude_ms").get<double>(), c.at("period_s").get<double>(), c.value("phase", 0.0)});
      } else if (type == "steps") {
        PiecewiseSteps steps;
        for (const auto& st : c.at("steps")) steps.steps.push_back({st.at("time").get<double>(), st.at("jump_ms").get<double>(), st.value("slew_s", 0.0)});
        h.clock.variable.push_back(std::move(steps));
      } else if (type == "ntpd_ramp") {
        NtpdRamp ramp;
        for (const auto& ch : c.at("changes")) ramp.changes.push_back({ch.at("time").get<double>(), ch.at("ppm").get<double>()});
        h.clock.variable.push_back(std::move(ramp));
      } else {
        throw std::invalid_argument("unknown variable component: " + type);
      }
    }
  }
  if (j.contains("jitter4")) h.jitter4 = jitter_from(j.at("jitter4"));
  if (j.contains("jitter6")) h.jitter6 = jitter_from(j.at("jitter6"));
  h.clock.jitter = h.jitter4;
  if (j.contains("hz6")) h.hz6 = j.at("hz6").get<double>();
  h.fingerprint4 = j.value("fingerprint4", h.fingerprint4);
  h.fingerprint6 = j.value("fingerprint6", h.fingerprint6);
  h.group = j.value("group", std::string{});
  h.family_offset = j.value("family_offset", 0.0);
  h.clock.validate();
  return h;
}

PopulationFile load_population_file(const std::filesystem::path& path) {
  const auto doc = nlohmann::json::parse(read_file(path));
  PopulationFile out;
  if (doc.contains("plan")) {
    const auto& p = doc.at("plan");
    out.plan.start = p.value("start", out.plan.start);
    out.plan.interval = p.value("interval", out.plan.interval);
    out.plan.count = p.value("count", out.plan.count);
  }
  for (const auto& h : doc.at("hosts")) out.hosts.push_back(host_spec_from_json(h));
  return out;
}

}  // namespace sibling
