#include "sibling/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "sibling/ingest.hpp"
#include "sibling/random.hpp"
#include "sibling/util.hpp"

namespace sibling {

void ConfusionCounts::add(bool predicted_sibling, bool actual_sibling) {
  if (predicted_sibling) {
    ++(actual_sibling ? tp : fp);
  } else {
    ++(actual_sibling ? fn : tn);
  }
}

std::optional<double> precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double mcc(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  const double a = tp + fp, b = tp + fn, d = tn + fp, e = tn + fn;
  if (a == 0.0 || b == 0.0 || d == 0.0 || e == 0.0) return 0.0;
  return (tp * tn - fp * fn) / (std::sqrt(a * b) * std::sqrt(d * e));
}

ConfusionCounts score(std::span<const Decision> decisions, std::span<const Label> truth) {
  if (decisions.size() != truth.size()) throw std::invalid_argument("score: size mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    c.add(predicts_sibling(decisions[i]), truth[i] == Label::Sibling);
  }
  return c;
}

KFoldResult stratified_kfold(std::span<const std::string> groups, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be at least 2");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);

  KFoldResult out;
  out.folds.resize(k);
  std::vector<std::vector<std::size_t>> test(k);
  CounterRng rng(derive_seed(seed, 0x6b666f6c64ULL));
  std::size_t offset = 0;
  for (auto& [group, idx] : members) {
    if (idx.size() < k) out.warnings.push_back("GroupTooSmall(" + group + ")");
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t m = 0; m < idx.size(); ++m) test[(offset + m) % k].push_back(idx[m]);
    offset += idx.size();
  }
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(test[f].begin(), test[f].end());
    out.folds[f].test = test[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) out.folds[f].train.insert(out.folds[f].train.end(), test[g].begin(), test[g].end());
    }
    std::sort(out.folds[f].train.begin(), out.folds[f].train.end());
  }
  return out;
}

double stump_mcc(std::span<const StumpSample> samples, double threshold) {
  ConfusionCounts c;
  for (const auto& s : samples) c.add(!(s.value > threshold), s.sibling);
  return mcc(c);
}

Ml1Model train_stump(std::span<const StumpSample> samples) {
  std::vector<StumpSample> sorted(samples.begin(), samples.end());
  const auto pos = std::count_if(sorted.begin(), sorted.end(), [](const auto& s) { return s.sibling; });
  if (pos == 0 || static_cast<std::size_t>(pos) == sorted.size()) throw SingleClassError();
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.value < b.value; });

  ConfusionCounts c;
  c.fn = static_cast<std::uint64_t>(pos);
  c.tn = sorted.size() - c.fn;

  Ml1Model best;
  double best_mcc = -2.0;
  bool found = false;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    // Everything up to index i moves to the predicted-sibling side.
    if (sorted[i].sibling) {
      --c.fn;
      ++c.tp;
    } else {
      --c.tn;
      ++c.fp;
    }
    if (sorted[i].value == sorted[i + 1].value) continue;
    const double m = mcc(c);
    if (m >= best_mcc) {
      best_mcc = m;
      best.tcpraw_threshold = sorted[i].value + (sorted[i + 1].value - sorted[i].value) / 2.0;
      found = true;
    }
  }
  if (!found) best.tcpraw_threshold = sorted.front().value;
  if (!(best.tcpraw_threshold > 0.0)) best.tcpraw_threshold = std::numeric_limits<double>::min();
  return best;
}

PairFeatureTable::PairFeatureTable(std::span<const CandidatePair> siblings, const FeatureConfig& cfg,
                                   unsigned workers)
    : n_(siblings.size()), table_(siblings.size() * siblings.size()) {
  std::vector<SideFeatures> side4(n_), side6(n_);
  parallel_for(2 * n_, workers, [&](std::size_t i) {
    if (i < n_) {
      side4[i] = compute_side(*siblings[i].series4, cfg);
    } else {
      side6[i - n_] = compute_side(*siblings[i - n_].series6, cfg);
    }
  });
  parallel_for(n_ * n_, workers, [&](std::size_t cell) {
    const std::size_t i = cell / n_, j = cell % n_;
    table_[cell] = combine_sides(side4[j], side6[i], *siblings[j].series4, *siblings[i].series6,
                                 siblings[j].fp4, siblings[i].fp6, cfg);
  });
}

std::string_view model_name(Model m) {
  switch (m) {
    case Model::HT: return "HT";
    case Model::Beverly: return "Bev.";
    case Model::ML1: return "ML1";
    case Model::ML1Trained: return "ML1-trained";
  }
  return "?";
}

Decision decide(Model m, const FeatureVector& fv, const ClassifierParams& params, const Ml1Model& trained) {
  switch (m) {
    case Model::HT: return classify_ht(fv, params.ht, params.r2_hz_min);
    case Model::Beverly: return classify_beverly(fv, params.beverly);
    case Model::ML1: return classify_ml1(fv, params.ml1, params.r2_hz_min);
    case Model::ML1Trained: return classify_ml1(fv, trained, params.r2_hz_min);
  }
  return Decision::error(Reason::None);
}

std::vector<ModelResult> evaluate_members(const PairFeatureTable& table,
                                          std::span<const CandidatePair> siblings,
                                          std::span<const std::size_t> members,
                                          std::span<const Model> models,
                                          const ClassifierParams& params, const Ml1Model& trained) {
  std::map<std::string, std::size_t> group_slot;
  for (std::size_t i : members) group_slot.emplace(siblings[i].group, 0);
  std::size_t slot = 0;
  for (auto& [g, s] : group_slot) s = slot++;

  std::vector<ModelResult> out;
  for (Model m : models) {
    ModelResult r;
    r.model = m;
    for (const auto& [g, s] : group_slot) r.groups.push_back({g, {}});
    auto tally = [&](std::size_t i6, std::size_t j4) {
      const bool truth = i6 == j4;
      const bool pred = predicts_sibling(decide(m, table.at(i6, j4), params, trained));
      r.counts.add(pred, truth);
      if (siblings[i6].group == siblings[j4].group) {
        r.groups[group_slot.at(siblings[i6].group)].counts.add(pred, truth);
      }
    };
    for (std::size_t i : members) tally(i, i);
    for (auto [i, j] : nonsibling_index_pairs(members)) tally(i, j);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StumpSample> stump_samples(const PairFeatureTable& table,
                                       std::span<const std::size_t> members, double r2_hz_min) {
  std::vector<StumpSample> out;
  auto add = [&](std::size_t i6, std::size_t j4) {
    const auto& fv = table.at(i6, j4);
    if (first_order_filter(fv, r2_hz_min) || fv.tcpraw_status != FeatureStatus::Computed) return;
    out.push_back({fv.delta_tcpraw, i6 == j4});
  };
  for (std::size_t i : members) add(i, i);
  for (auto [i, j] : nonsibling_index_pairs(members)) add(i, j);
  return out;
}

EvalReport cross_validate(std::span<const CandidatePair> siblings, const PairFeatureTable& table,
                          const EvalOptions& opts) {
  std::vector<std::string> groups;
  for (const auto& s : siblings) {
    if (s.label != Label::Sibling) throw std::invalid_argument("cross_validate expects labeled siblings only");
    groups.push_back(s.group);
  }
  auto split = stratified_kfold(groups, opts.k, opts.seed);

  EvalReport report;
  report.k = opts.k;
  report.seed = opts.seed;
  report.siblings = siblings.size();
  report.warnings = split.warnings;
  constexpr Model kModels[] = {Model::HT, Model::Beverly, Model::ML1, Model::ML1Trained};
  for (std::size_t f = 0; f < split.folds.size(); ++f) {
    const auto& fold = split.folds[f];
    FoldReport fr;
    fr.fold = f;
    fr.train_siblings = fold.train.size();
    fr.test_siblings = fold.test.size();
    fr.test_nonsiblings = fold.test.size() * (fold.test.size() - (fold.test.empty() ? 0 : 1));
    const auto samples = stump_samples(table, fold.train, opts.params.r2_hz_min);
    Ml1Model trained;
    try {
      trained = train_stump(samples);
    } catch (const SingleClassError&) {
      trained = opts.params.ml1;
      report.warnings.push_back("SingleClass(fold " + std::to_string(f) + ")");
    }
    fr.trained_threshold = trained.tcpraw_threshold;
    constexpr Model kTrainModel[] = {Model::ML1Trained};
    fr.trained_on_train =
        evaluate_members(table, siblings, fold.train, kTrainModel, opts.params, trained).front().counts;
    fr.results = evaluate_members(table, siblings, fold.test, kModels, opts.params, trained);
    report.folds.push_back(std::move(fr));
  }
  return report;
}

namespace {

nlohmann::ordered_json counts_json(const ConfusionCounts& c) {
  nlohmann::ordered_json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  if (auto p = precision(c)) {
    j["precision"] = *p;
  } else {
    j["precision"] = nullptr;
  }
  j["mcc"] = mcc(c);
  return j;
}

struct MeanRow {
  double precision_sum = 0.0;
  std::size_t precision_n = 0;
  double mcc_sum = 0.0;
  std::size_t mcc_n = 0;

  void add(const ConfusionCounts& c) {
    if (auto p = precision(c)) {
      precision_sum += *p;
      ++precision_n;
    }
    mcc_sum += mcc(c);
    ++mcc_n;
  }
  std::optional<double> mean_precision() const {
    if (precision_n == 0) return std::nullopt;
    return precision_sum / static_cast<double>(precision_n);
  }
  double mean_mcc() const { return mcc_n ? mcc_sum / static_cast<double>(mcc_n) : 0.0; }
};

std::string pct(std::optional<double> p) {
  if (!p) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", *p * 100.0);
  return buf;
}

std::string two(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["seed"] = seed;
  j["siblings"] = siblings;
  j["warnings"] = warnings;
  std::map<Model, MeanRow> means;
  MeanRow train_mean;
  auto folds_json = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["train_siblings"] = f.train_siblings;
    fj["test_siblings"] = f.test_siblings;
    fj["test_nonsiblings"] = f.test_nonsiblings;
    fj["ml1_trained_threshold"] = f.trained_threshold;
    fj["ml1_trained_train"] = counts_json(f.trained_on_train);
    train_mean.add(f.trained_on_train);
    auto results = nlohmann::ordered_json::array();
    for (const auto& r : f.results) {
      auto rj = counts_json(r.counts);
      rj["algo"] = model_name(r.model);
      auto gj = nlohmann::ordered_json::array();
      for (const auto& g : r.groups) {
        auto one = counts_json(g.counts);
        one["group"] = g.group;
        gj.push_back(std::move(one));
      }
      rj["groups"] = std::move(gj);
      results.push_back(std::move(rj));
      means[r.model].add(r.counts);
    }
    fj["results"] = std::move(results);
    folds_json.push_back(std::move(fj));
  }
  j["folds"] = std::move(folds_json);
  auto mean_json = nlohmann::ordered_json::array();
  for (const auto& [m, row] : means) {
    nlohmann::ordered_json mj;
    mj["algo"] = model_name(m);
    mj["type"] = "Test";
    if (auto p = row.mean_precision()) {
      mj["precision"] = *p;
    } else {
      mj["precision"] = nullptr;
    }
    mj["mcc"] = row.mean_mcc();
    mean_json.push_back(std::move(mj));
  }
  nlohmann::ordered_json tj;
  tj["algo"] = "ML1-trained";
  tj["type"] = "Train";
  if (auto p = train_mean.mean_precision()) {
    tj["precision"] = *p;
  } else {
    tj["precision"] = nullptr;
  }
  tj["mcc"] = train_mean.mean_mcc();
  mean_json.push_back(std::move(tj));
  j["mean"] = std::move(mean_json);
  return j;
}

std::string EvalReport::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-12s %-12s %9s %6s  %s\n", "Algo", "Train DS", "Test DS", "Prec.",
                "MCC", "Type");
  out += line;
  std::map<Model, MeanRow> means;
  MeanRow train_mean;
  for (const auto& f : folds) {
    const std::string train = "fold" + std::to_string(f.fold) + "-train";
    const std::string test = "fold" + std::to_string(f.fold) + "-test";
    std::snprintf(line, sizeof line, "%-12s %-12s %-12s %9s %6s  %s\n", "ML1-trained", train.c_str(),
                  train.c_str(), pct(precision(f.trained_on_train)).c_str(), two(mcc(f.trained_on_train)).c_str(),
                  "Train");
    out += line;
    train_mean.add(f.trained_on_train);
    for (const auto& r : f.results) {
      const std::string algo(model_name(r.model));
      const bool fixed = r.model != Model::ML1Trained;
      std::snprintf(line, sizeof line, "%-12s %-12s %-12s %9s %6s  %s\n", algo.c_str(),
                    fixed ? "fixed" : train.c_str(), test.c_str(), pct(precision(r.counts)).c_str(),
                    two(mcc(r.counts)).c_str(), "Test");
      out += line;
      means[r.model].add(r.counts);
    }
  }
  for (const auto& [m, row] : means) {
    const std::string algo(model_name(m));
    std::snprintf(line, sizeof line, "%-12s %-12s %-12s %9s %6s  %s\n", algo.c_str(), "mean", "mean",
                  pct(row.mean_precision()).c_str(), two(row.mean_mcc()).c_str(), "Test");
    out += line;
  }
  std::snprintf(line, sizeof line, "%-12s %-12s %-12s %9s %6s  %s\n", "ML1-trained", "mean", "mean",
                pct(train_mean.mean_precision()).c_str(), two(train_mean.mean_mcc()).c_str(), "Train");
  out += line;
  return out;
}

}  // namespace sibling
