// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <unistd.h>

#include "sibling/classifiers.hpp"
#include "sibling/eval.hpp"
#include "sibling/features.hpp"
#include "sibling/random.hpp"
#include "sibling/regression.hpp"
#include "sibling/simulator.hpp"
#include "sibling/util.hpp"

using namespace sibling;
namespace fs = std::filesystem;

namespace {

constexpr double kStart = 1480000000.0;
constexpr double kHzChoices[] = {10.0, 100.0, 250.0, 1000.0};
constexpr double kThreeYears = 3.0 * 365.0 * 86400.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> times_from(double start, std::size_t n, double interval = 60.0) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = start + interval * static_cast<double>(i);
  return t;
}

double brute_force_median_slope(const std::vector<double>& x, const std::vector<double>& y) {
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

// 1
Outcome theil_sen_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(derive_seed(2024, 1));
  int exact = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 3 + rng.below(48);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform(0.0, 36000.0);
      y[i] = 0.02 * x[i] + rng.uniform(-50.0, 50.0) + (rng.uniform() < 0.1 ? 500.0 : 0.0);
    }
    OffsetArray off;
    off.x = x;
    off.y = y;
    if (robust_skew(off).alpha == brute_force_median_slope(x, y)) ++exact;
  }
  const double secs = seconds_since(t0);
  return {exact == 100 && secs < 5.0, std::to_string(exact) + "/100 exact, " + fmt("%.3f s", secs)};
}

// 2
Outcome raw_delta_bounds() {
  CounterRng rng(derive_seed(2024, 2));
  int sib_ok = 0, non_ok = 0;
  double worst_sib_ratio = 0.0, min_non = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 1000; ++rep) {
    const double hz = kHzChoices[rng.below(4)];
    ClockSpec c;
    c.hz = hz;
    c.boot_epoch = kStart - rng.uniform(3600.0, kThreeYears);
    c.seed = rng.next();
    // Family offset on the microsecond grid the receive times live on.
    const double offset = std::round(rng.uniform(0.0, 20.0) * 1e6) / 1e6;
    const auto s4 = simulate_host_trace(c, times_from(kStart, 10), {}, "198.18.0.1", Family::V4, 4).series;
    const auto s6 = simulate_host_trace(c, times_from(kStart + offset, 10), {}, "2001:db8::1", Family::V6, 6).series;
    const double d = delta_tcpraw(*s4, *s6, hz, hz);
    worst_sib_ratio = std::max(worst_sib_ratio, d * hz);
    if (d < 1.0 / hz) ++sib_ok;

    ClockSpec a, b;
    a.hz = b.hz = kHzChoices[rng.below(4)];
    a.boot_epoch = kStart - rng.uniform(3600.0, kThreeYears);
    do {
      b.boot_epoch = kStart - rng.uniform(3600.0, kThreeYears);
    } while (std::abs(a.boot_epoch - b.boot_epoch) < 3600.0);
    a.skew_ppm = rng.uniform(-60.0, 60.0);
    b.skew_ppm = rng.uniform(-60.0, 60.0);
    a.seed = rng.next();
    b.seed = rng.next();
    const JitterSpec j4{rng.uniform(5.0, 60.0), rng.uniform(0.5, 3.0), 70.0};
    const JitterSpec j6{rng.uniform(5.0, 60.0), rng.uniform(0.5, 3.0), 70.0};
    const double off2 = rng.uniform(0.0, 20.0);
    const auto n4 = simulate_host_trace(a, times_from(kStart, 10), j4, "198.18.0.2", Family::V4, 4).series;
    const auto n6 = simulate_host_trace(b, times_from(kStart + off2, 10), j6, "2001:db8::2", Family::V6, 6).series;
    const double dn = delta_tcpraw(*n4, *n6, a.hz, b.hz);
    min_non = std::min(min_non, dn);
    if (dn > 0.2557) ++non_ok;
  }
  return {sib_ok == 1000 && non_ok == 1000,
          "siblings " + std::to_string(sib_ok) + "/1000 below 1/hz (max " + fmt("%.3f", worst_sib_ratio) +
              "/hz), non-siblings " + std::to_string(non_ok) + "/1000 above 0.2557 s (min " + fmt("%.1f s)", min_non)};
}

// 3
Outcome wraparound() {
  CounterRng rng(derive_seed(2024, 3));
  int ok = 0;
  for (int rep = 0; rep < 50; ++rep) {
    ClockSpec c;
    c.hz = 1000.0;
    c.skew_ppm = rng.uniform(-60.0, 60.0);
    // Place the 2^32 crossing inside the 10 h window.
    const double cross = kStart + rng.uniform(600.0, 35400.0);
    c.boot_epoch = cross - 4294967.296 / (1.0 + c.skew_ppm * 1e-6);
    c.seed = rng.next();
    const JitterSpec j{rng.uniform(5.0, 60.0), rng.uniform(0.5, 3.0), 70.0};
    const auto trace = simulate_host_trace(c, times_from(kStart, 600), j, "198.18.0.1", Family::V4);
    const auto u = unwrap_and_relativize(*trace.series);
    bool same = u.wraps == 1 && u.v.size() == trace.ticks.size();
    for (std::size_t i = 0; same && i < u.v.size(); ++i) {
      same = u.v[i] == static_cast<std::int64_t>(trace.ticks[i] - trace.ticks[0]);
    }
    if (same) ++ok;
  }
  return {ok == 50, std::to_string(ok) + "/50 identical to untruncated counter differences"};
}

// 4
Outcome hz_gate() {
  CounterRng rng(derive_seed(2024, 4));
  int ok = 0;
  double worst = 0.0;
  const SamplingPlan plan;
  for (int rep = 0; rep < 1000; ++rep) {
    HostSpec h;
    h.ip4 = "198.18.0.1";
    h.ip6 = "2001:db8::1";
    h.clock.hz = kHzChoices[rng.below(4)];
    h.clock.boot_epoch = kStart - rng.uniform(3600.0, kThreeYears);
    h.clock.tsval_mode = TsvalMode::Random;
    h.clock.seed = rng.next();
    h.jitter4 = {rng.uniform(5.0, 60.0), rng.uniform(0.5, 3.0), 70.0};
    h.jitter6 = {rng.uniform(5.0, 60.0), rng.uniform(0.5, 3.0), 70.0};
    h.family_offset = rng.uniform(0.0, 20.0);
    const auto fv = extract_features(simulate_sibling(h, plan));
    worst = std::max({worst, fv.r2_hz4, fv.r2_hz6});
    const bool low = fv.r2_hz4 < 0.9 && fv.r2_hz6 < 0.9;
    if (low && classify_ml1(fv) == Decision::non_sibling(Reason::HzFitFailed) &&
        classify_ht(fv) == Decision::non_sibling(Reason::HzFitFailed)) {
      ++ok;
    }
  }
  return {ok >= 990, std::to_string(ok) + "/1000 rejected as HzFitFailed (max r2_hz " + fmt("%.4f)", worst)};
}

struct PopulationRun {
  std::vector<CandidatePair> siblings;
  std::unique_ptr<PairFeatureTable> table;
  std::vector<ModelResult> results;  // HT, Bev., ML1 over all members
  double seconds = 0.0;
};

const PopulationRun& population() {
  static PopulationRun run = [] {
    PopulationRun r;
    const auto t0 = std::chrono::steady_clock::now();
    r.siblings = generate_population(200, 0.3, 1);
    r.table = std::make_unique<PairFeatureTable>(r.siblings, FeatureConfig{}, 1);
    std::vector<std::size_t> members(r.siblings.size());
    for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
    const std::vector<Model> models{Model::HT, Model::Beverly, Model::ML1};
    r.results = evaluate_members(*r.table, r.siblings, members, models, ClassifierParams{});
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

const ConfusionCounts* group_counts(const ModelResult& r, const std::string& g) {
  for (const auto& gr : r.groups) {
    if (gr.group == g) return &gr.counts;
  }
  return nullptr;
}

// 5
Outcome end_to_end() {
  const auto& run = population();
  const auto& ht = run.results[0].counts;
  const auto& ml1 = run.results[2].counts;
  const double p_ml1 = precision(ml1).value_or(0.0);
  const double m_ml1 = mcc(ml1);
  const double p_ht = precision(ht).value_or(0.0);
  const bool pass = p_ml1 >= 0.99 && m_ml1 >= 0.95 && p_ht >= 0.99 && run.seconds < 120.0;
  return {pass, "ML1 precision " + fmt("%.4f", p_ml1) + " MCC " + fmt("%.4f", m_ml1) + ", HT precision " +
                    fmt("%.4f", p_ht) + " MCC " + fmt("%.4f", mcc(ht)) + ", " +
                    std::to_string(ml1.total()) + " pairs in " + fmt("%.1f s", run.seconds)};
}

// 6
Outcome baseline_contrast() {
  const auto& run = population();
  const auto* bev = group_counts(run.results[1], "variable");
  const auto* ml1 = group_counts(run.results[2], "variable");
  if (!bev || !ml1) return {false, "no variable-skew group"};
  const double pb = precision(*bev).value_or(0.0);
  const double pm = precision(*ml1).value_or(0.0);
  return {pb < pm - 0.10, "variable subset: Bev. precision " + fmt("%.4f", pb) + " vs ML1 " + fmt("%.4f", pm) +
                              " (" + std::to_string(bev->tp + bev->fn) + " siblings, " +
                              std::to_string(bev->tn + bev->fp) + " non-siblings)"};
}

// 7
Outcome stump_training() {
  const auto& run = population();
  std::vector<std::string> groups;
  for (const auto& s : run.siblings) groups.push_back(s.group);
  const auto split = stratified_kfold(groups, 10, 1);
  const ClassifierParams params;
  int good = 0;
  double worst_gap = 0.0;
  for (const auto& fold : split.folds) {
    const Ml1Model trained = train_stump(stump_samples(*run.table, fold.train, params.r2_hz_min));

    // Every test pair with its raw delta, or NaN when the first-order filter rejects it.
    struct Row {
      double delta;
      bool sibling;
    };
    std::vector<Row> rows;
    for (std::size_t i : fold.test) {
      for (std::size_t j : fold.test) {
        const auto& fv = run.table->at(i, j);
        const bool passes = !first_order_filter(fv, params.r2_hz_min) && fv.tcpraw_status == FeatureStatus::Computed;
        rows.push_back({passes ? fv.delta_tcpraw : std::numeric_limits<double>::quiet_NaN(), i == j});
      }
    }
    auto test_mcc = [&](double thr) {
      ConfusionCounts c;
      for (const auto& r : rows) c.add(!std::isnan(r.delta) && !(r.delta > thr), r.sibling);
      return mcc(c);
    };
    std::vector<double> vals;
    for (const auto& r : rows) {
      if (!std::isnan(r.delta)) vals.push_back(r.delta);
    }
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    double best = test_mcc(vals.empty() ? 0.0 : vals.front() - 1.0);
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) best = std::max(best, test_mcc(vals[k] + (vals[k + 1] - vals[k]) / 2.0));
    if (!vals.empty()) best = std::max(best, test_mcc(vals.back() + 1.0));
    const double gap = best - test_mcc(trained.tcpraw_threshold);
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 0.02) ++good;
  }
  return {good >= 9, std::to_string(good) + "/10 folds within 0.02 of the sweep optimum (worst gap " +
                         fmt("%.4f)", worst_gap)};
}

// 8
Outcome mcc_arithmetic() {
  CounterRng rng(derive_seed(2024, 8));
  int ok = 0;
  long double worst = 0.0L;
  for (int rep = 0; rep < 1000; ++rep) {
    ConfusionCounts c;
    const std::uint64_t scale = std::uint64_t{1} << rng.below(20);
    c.tp = rng.below(scale * 10 + 1);
    c.fp = rng.below(scale * 10 + 1);
    c.tn = rng.below(scale * 10 + 1);
    c.fn = rng.below(scale * 10 + 1);
    const long double tp = c.tp, fp = c.fp, tn = c.tn, fn = c.fn;
    const long double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    const long double ref = den == 0.0L ? 0.0L : (tp * tn - fp * fn) / std::sqrt(den);
    const long double err = std::fabs(static_cast<long double>(mcc(c)) - ref);
    bool good = err < 1e-12L;
    if (c.tp + c.fp == 0) {
      good = good && !precision(c).has_value();
    } else {
      good = good && std::fabs(static_cast<long double>(*precision(c)) - tp / (tp + fp)) < 1e-12L;
    }
    worst = std::max(worst, err);
    if (good) ++ok;
  }
  const bool bounds = mcc({0, 0, 5, 5}) == 0.0 && mcc({5, 5, 0, 0}) == 0.0 && mcc({0, 0, 0, 0}) == 0.0 &&
                      !precision({0, 0, 3, 4}).has_value() && mcc({7, 0, 9, 0}) == 1.0;
  return {ok == 1000 && bounds, std::to_string(ok) + "/1000 within 1e-12 (max " +
                                    fmt("%.2e", static_cast<double>(worst)) + "), boundary conventions " +
                                    (bounds ? "hold" : "violated")};
}

/// Mean |s4 - s6 - c| over the common range, by a fine midpoint rule.
double dense_gap(const SplineFits& f, double c, int steps) {
  const double h = (f.hi - f.lo) / steps;
  double sum = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = f.lo + (k + 0.5) * h;
    sum += std::abs(f.eval4(t) - f.eval6(t) - c);
  }
  return sum / steps;
}

double dense_oracle(const OffsetArray& o4, const OffsetArray& o6) {
  const SplineFits f = fit_offset_splines(o4, o6, 13);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int k = 0; k <= 200; ++k) {
    const double t = f.lo + (f.hi - f.lo) * k / 200.0;
    const double d = f.eval4(t) - f.eval6(t);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  lo -= 1.0;
  hi += 1.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  constexpr int kSteps = 20000;
  double a = lo, b = hi;
  double c1 = b - g * (b - a), c2 = a + g * (b - a);
  double f1 = dense_gap(f, c1, kSteps), f2 = dense_gap(f, c2, kSteps);
  while (b - a > 1e-7) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - g * (b - a);
      f1 = dense_gap(f, c1, kSteps);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + g * (b - a);
      f2 = dense_gap(f, c2, kSteps);
    }
  }
  return dense_gap(f, (a + b) / 2.0, kSteps);
}

// 9
Outcome spline_properties() {
  const auto& run = population();
  std::vector<std::size_t> variable;
  for (std::size_t i = 0; i < run.siblings.size(); ++i) {
    const auto& s = run.siblings[i];
    if (s.group != "variable") continue;
    const auto a = compute_side(*s.series4), b = compute_side(*s.series6);
    if (a.offsets && b.offsets && a.hz.rounded == b.hz.rounded) variable.push_back(i);
  }
  CounterRng rng(derive_seed(2024, 9));
  int identical = 0, invariant = 0, oracle = 0, cases = 0;
  double worst_rel = 0.0, worst_shift = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t i = variable[rng.below(variable.size())];
    // Half siblings, half mixed pairs.
    std::size_t j = i;
    while (rep % 2 == 1 && j == i) j = variable[rng.below(variable.size())];
    const auto side4 = compute_side(*run.siblings[j].series4);
    const auto side6 = compute_side(*run.siblings[i].series6);
    if (!side4.offsets || !side6.offsets) continue;
    const OffsetArray& o4 = *side4.offsets;
    const OffsetArray& o6 = *side6.offsets;
    SplineDiff sd;
    try {
      sd = spline_pair(o4, o6);
    } catch (const FeatureError&) {
      continue;
    }
    ++cases;
    if (spline_pair(o4, o4).spl_diff == 0.0 && spline_pair(o6, o6).spl_diff == 0.0) ++identical;

    OffsetArray shifted4 = o4, shifted6 = o6;
    const double c4 = rng.uniform(-500.0, 500.0), c6 = rng.uniform(-500.0, 500.0);
    for (auto& y : shifted4.y) y += c4;
    for (auto& y : shifted6.y) y += c6;
    const double d1 = std::abs(spline_pair(shifted4, o6).spl_diff - sd.spl_diff);
    const double d2 = std::abs(spline_pair(o4, shifted6).spl_diff - sd.spl_diff);
    worst_shift = std::max({worst_shift, d1, d2});
    if (d1 < 1e-9 && d2 < 1e-9) ++invariant;

    const double ref = dense_oracle(o4, o6);
    const double rel = std::abs(sd.spl_diff - ref) / std::max(ref, 1e-12);
    worst_rel = std::max(worst_rel, rel);
    if (rel <= 0.01) ++oracle;
  }
  const bool pass = cases == 50 && identical == 50 && invariant == 50 && oracle == 50;
  return {pass, std::to_string(cases) + " pairs: identical->0 " + std::to_string(identical) + ", shift-invariant " +
                    std::to_string(invariant) + " (max " + fmt("%.1e ms)", worst_shift) + ", dense oracle " +
                    std::to_string(oracle) + " (max rel " + fmt("%.4f)", worst_rel)};
}

// 10
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("sibling_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::vector<std::string> outputs{"sim/traces.jsonl", "sim/options.jsonl", "sim/labels.csv", "features.csv",
                                         "verdicts.jsonl",   "eval/report.json",  "eval/report.txt"};
  auto pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const std::string cli = SIBLING_CLI_PATH;
    const std::string d = dir.string();
    const std::string in = " --traces " + d + "/sim/traces.jsonl --options " + d + "/sim/options.jsonl";
    const std::vector<std::string> cmds{
        cli + " --log-level off simulate --n 200 --mix 0.3 --seed 7 --out " + d + "/sim",
        cli + " --log-level off extract" + in + " --out " + d + "/features.csv",
        cli + " --log-level off classify" + in + " --model all --out " + d + "/verdicts.jsonl > /dev/null",
        cli + " --log-level off evaluate" + in + " --labels " + d + "/sim/labels.csv --k 10 --seed 1 --out " + d +
            "/eval > /dev/null"};
    for (const auto& c : cmds) {
      if (std::system(c.c_str()) != 0) return false;
    }
    return true;
  };
  const bool ran = pipeline(root / "a") && pipeline(root / "b");
  int same = 0;
  if (ran) {
    for (const auto& f : outputs) {
      if (read_file(root / "a" / f) == read_file(root / "b" / f)) ++same;
    }
  }
  fs::remove_all(root);
  return {ran && same == static_cast<int>(outputs.size()),
          ran ? std::to_string(same) + "/" + std::to_string(outputs.size()) + " output files byte-identical"
              : std::string("pipeline failed")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Theil-Sen oracle equivalence", theil_sen_equivalence},
      {"raw timestamp delta bounds", raw_delta_bounds},
      {"counter wraparound", wraparound},
      {"hz fit gate on randomized TSvals", hz_gate},
      {"end-to-end classifier quality", end_to_end},
      {"baseline contrast on variable skew", baseline_contrast},
      {"stump training vs exhaustive sweep", stump_training},
      {"MCC and precision arithmetic", mcc_arithmetic},
      {"spline properties", spline_properties},
      {"pipeline determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
