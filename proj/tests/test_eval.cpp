#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sibling/eval.hpp"
#include "sibling/ingest.hpp"
#include "sibling/random.hpp"
#include "sibling/simulator.hpp"

using namespace sibling;

namespace {

/// Best MCC over every candidate midpoint, evaluated from scratch.
double sweep_best(const std::vector<StumpSample>& s) {
  std::vector<double> v;
  for (const auto& x : s) v.push_back(x.value);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  double best = -2.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double thr = v[i] + (v[i + 1] - v[i]) / 2.0;
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& x : s) {
      const bool pred = x.value <= thr;
      if (pred && x.sibling) ++tp;
      if (pred && !x.sibling) ++fp;
      if (!pred && x.sibling) ++fn;
      if (!pred && !x.sibling) ++tn;
    }
    best = std::max(best, mcc({tp, fp, tn, fn}));
  }
  return best;
}

}  // namespace

TEST_CASE("precision") {
  CHECK(precision({10, 0, 5, 5}) == 1.0);
  CHECK(*precision({996, 4, 0, 0}) == doctest::Approx(0.996));
  CHECK_FALSE(precision({0, 0, 7, 3}).has_value());
}

TEST_CASE("mcc") {
  CHECK(mcc({10, 0, 20, 0}) == 1.0);
  const double expected = (90.0 * 85 - 10.0 * 15) / std::sqrt(100.0 * 105 * 95 * 100);
  CHECK(mcc({90, 10, 85, 15}) == doctest::Approx(expected));
  CHECK(mcc({90, 10, 85, 15}) == doctest::Approx(0.750939).epsilon(1e-6));
  CHECK(mcc({50, 50, 0, 0}) == 0.0);
  CHECK(mcc({0, 0, 0, 0}) == 0.0);
  CHECK(mcc({0, 10, 0, 10}) == -1.0);
  CHECK(mcc({0, 10, 10, 0}) == 0.0);
}

TEST_CASE("score maps unknown and error to non-sibling") {
  const std::vector<Decision> d{Decision::sibling(Reason::RawTsDelta), Decision::unknown(Reason::GuardInterval),
                                Decision::error(Reason::MissingFeature), Decision::non_sibling(Reason::RawTsDelta),
                                Decision::sibling(Reason::SplineArea)};
  const std::vector<Label> t{Label::Sibling, Label::Sibling, Label::NonSibling, Label::NonSibling, Label::NonSibling};
  const auto c = score(d, t);
  CHECK(c == ConfusionCounts{1, 1, 2, 1});
}

TEST_CASE("stratified_kfold") {
  std::vector<std::string> groups;
  for (int i = 0; i < 70; ++i) groups.push_back("variable");
  for (int i = 0; i < 30; ++i) groups.push_back("constant");
  const auto r = stratified_kfold(groups, 10, 5);
  REQUIRE(r.folds.size() == 10);
  CHECK(r.warnings.empty());
  std::multiset<std::size_t> seen;
  for (const auto& f : r.folds) {
    CHECK(f.test.size() == 10);
    CHECK(f.train.size() == 90);
    std::size_t var = 0;
    for (auto i : f.test) {
      seen.insert(i);
      var += groups[i] == "variable";
    }
    CHECK(var == 7);
    CHECK(f.test.size() * (f.test.size() - 1) == 90);
  }
  CHECK(seen.size() == 100);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 100);

  const auto again = stratified_kfold(groups, 10, 5);
  for (std::size_t f = 0; f < 10; ++f) CHECK(again.folds[f].test == r.folds[f].test);
  const auto other = stratified_kfold(groups, 10, 6);
  bool differs = false;
  for (std::size_t f = 0; f < 10; ++f) differs |= other.folds[f].test != r.folds[f].test;
  CHECK(differs);

  const std::vector<std::string> tiny{"a", "a", "b"};
  CHECK(stratified_kfold(tiny, 2, 1).warnings.size() == 1);
}

TEST_CASE("train_stump on separable data") {
  std::vector<StumpSample> s;
  CounterRng rng(3);
  for (int i = 0; i < 50; ++i) s.push_back({rng.uniform(0.0, 0.1), true});
  for (int i = 0; i < 200; ++i) s.push_back({rng.uniform(10.0, 1000.0), false});
  const auto m = train_stump(s);
  CHECK(m.tcpraw_threshold > 0.1);
  CHECK(m.tcpraw_threshold < 10.0);
  CHECK(stump_mcc(s, m.tcpraw_threshold) == 1.0);
}

TEST_CASE("train_stump matches the exhaustive sweep") {
  CounterRng rng(99);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<StumpSample> s;
    const std::size_t n = 20 + rng.below(480);
    for (std::size_t i = 0; i < n; ++i) {
      const bool sib = rng.uniform() < 0.3;
      const double v = sib ? rng.uniform(0.0, 1.0) : rng.uniform(0.5, 3.0);
      s.push_back({std::round(v * 50.0) / 50.0, sib});
    }
    if (std::none_of(s.begin(), s.end(), [](auto& x) { return x.sibling; })) s[0].sibling = true;
    if (std::all_of(s.begin(), s.end(), [](auto& x) { return x.sibling; })) s[0].sibling = false;
    const auto m = train_stump(s);
    CHECK(stump_mcc(s, m.tcpraw_threshold) == sweep_best(s));
  }
}

TEST_CASE("train_stump rejects one class") {
  const std::vector<StumpSample> s{{0.1, true}, {0.2, true}};
  CHECK_THROWS_AS(train_stump(s), SingleClassError);
}

TEST_CASE("cross_validate reports folds and means") {
  const auto pop = generate_population(40, 0.3, 4);
  const PairFeatureTable table(pop);
  EvalOptions opts;
  opts.k = 5;
  const auto rep = cross_validate(pop, table, opts);
  CHECK(rep.folds.size() == 5);
  for (const auto& f : rep.folds) {
    CHECK(f.test_siblings == 8);
    CHECK(f.test_nonsiblings == 56);
    CHECK(f.results.size() == 4);
  }
  const auto j = rep.to_json();
  CHECK(j.at("folds").size() == 5);
  CHECK(j.contains("mean"));
  CHECK(rep.to_table().find("mean") != std::string::npos);

  // Counts agree with scoring individual decisions.
  std::vector<std::size_t> members(pop.size());
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
  const std::vector<Model> models{Model::ML1};
  const auto res = evaluate_members(table, pop, members, models, ClassifierParams{});
  std::vector<Decision> d;
  std::vector<Label> t;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    for (std::size_t k = 0; k < pop.size(); ++k) {
      d.push_back(decide(Model::ML1, table.at(i, k), ClassifierParams{}));
      t.push_back(i == k ? Label::Sibling : Label::NonSibling);
    }
  }
  CHECK(res[0].counts == score(d, t));
}
