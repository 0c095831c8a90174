#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sibling/classifiers.hpp"
#include "sibling/core.hpp"
#include "sibling/features.hpp"

namespace sibling {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  void add(bool predicted_sibling, bool actual_sibling);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// tp/(tp+fp); nullopt when nothing was predicted positive.
std::optional<double> precision(const ConfusionCounts& c);

/// Matthews correlation coefficient. Returns 0 when any marginal is empty.
double mcc(const ConfusionCounts& c);

/// Unknown and Error score as NonSibling.
ConfusionCounts score(std::span<const Decision> decisions, std::span<const Label> truth);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct KFoldResult {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;  ///< GroupTooSmall(<group>)
};

/// Splits sibling indices into k folds, distributing every group round-robin
/// after a seeded shuffle so each fold holds ≈ |group|/k of each group.
KFoldResult stratified_kfold(std::span<const std::string> groups, std::size_t k, std::uint64_t seed);

struct StumpSample {
  double value = 0.0;
  bool sibling = false;
};

class SingleClassError : public std::runtime_error {
 public:
  SingleClassError() : std::runtime_error("SingleClass: training data holds one class only") {}
};

/// Picks the Δ_tcpraw threshold (value > threshold ⇒ non-sibling) that
/// maximizes MCC among midpoints of consecutive distinct values. Ties go to
/// the larger threshold.
Ml1Model train_stump(std::span<const StumpSample> samples);

/// MCC of a given threshold on samples.
double stump_mcc(std::span<const StumpSample> samples, double threshold);

/// Feature vectors for every (v6 owner i, v4 owner j) combination of a
/// sibling list; (i, i) is the sibling itself.
class PairFeatureTable {
 public:
  PairFeatureTable(std::span<const CandidatePair> siblings, const FeatureConfig& cfg = {},
                   unsigned workers = 1);

  const FeatureVector& at(std::size_t owner6, std::size_t owner4) const {
    return table_[owner6 * n_ + owner4];
  }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<FeatureVector> table_;
};

enum class Model { HT, Beverly, ML1, ML1Trained };

std::string_view model_name(Model m);
Decision decide(Model m, const FeatureVector& fv, const ClassifierParams& params,
                const Ml1Model& trained = {});

struct GroupResult {
  std::string group;
  ConfusionCounts counts;
};

struct ModelResult {
  Model model = Model::HT;
  ConfusionCounts counts;
  std::vector<GroupResult> groups;
};

struct FoldReport {
  std::size_t fold = 0;
  std::size_t train_siblings = 0;
  std::size_t test_siblings = 0;
  std::size_t test_nonsiblings = 0;
  double trained_threshold = 0.0;
  ConfusionCounts trained_on_train;
  std::vector<ModelResult> results;
};

struct EvalOptions {
  std::size_t k = 10;
  std::uint64_t seed = 1;
  ClassifierParams params;
};

struct EvalReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t siblings = 0;
  std::vector<std::string> warnings;
  std::vector<FoldReport> folds;

  nlohmann::ordered_json to_json() const;
  /// Rows mirroring: Algo, Train DS, Test DS, Prec., MCC, Type.
  std::string to_table() const;
};

/// Scores `models` on the siblings in `members` plus their n·(n-1) synthesized
/// non-siblings, with per-group breakdown (non-siblings count towards a group
/// when both owners belong to it).
std::vector<ModelResult> evaluate_members(const PairFeatureTable& table,
                                          std::span<const CandidatePair> siblings,
                                          std::span<const std::size_t> members,
                                          std::span<const Model> models,
                                          const ClassifierParams& params,
                                          const Ml1Model& trained = {});

/// Stump training samples from all first-order-passing pairs among members.
std::vector<StumpSample> stump_samples(const PairFeatureTable& table,
                                       std::span<const std::size_t> members, double r2_hz_min);

/// k-fold cross-validation over labeled siblings: siblings are split first,
/// non-siblings are synthesized inside each split.
EvalReport cross_validate(std::span<const CandidatePair> siblings, const PairFeatureTable& table,
                          const EvalOptions& opts);

}  // namespace sibling
