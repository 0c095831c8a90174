#pragma once

#include <filesystem>
#include <optional>

#include "sibling/core.hpp"
#include "sibling/features.hpp"

namespace sibling {

/// Hand-tuned decision thresholds. Offsets in ms, skew in ms/s, Δ_tcpraw in s.
struct HtThresholds {
  double z1 = 1.0;
  double z2 = 0.81;
  double z3 = 0.2;
  double z4 = 0.00005;
  double z5 = 1.5;
  double z6 = 0.47;
  double z7 = 14.0;
  double y1 = 2.3;
  double y2 = 0.6;
  double y3 = 4.0;

  void validate() const;
};

struct Ml1Model {
  double tcpraw_threshold = 0.2557;

  void validate() const;
};

struct BeverlyParams {
  /// Maximum difference between the two skew-line angles, degrees. The angle
  /// is atan of the skew slope in ms/s.
  double angle_tolerance_deg = 0.05;
  double r2_hz_min = 0.9;

  void validate() const;
};

struct ClassifierParams {
  double r2_hz_min = 0.9;
  HtThresholds ht;
  Ml1Model ml1;
  BeverlyParams beverly;
};

/// Loads a JSON override file; absent keys keep their defaults.
/// {"r2_hz_min":0.9,"ht":{"z1":1,...},"ml1":{"tcpraw_threshold":0.2557},
///  "beverly":{"angle_tolerance_deg":0.05}}
ClassifierParams load_classifier_params(const std::filesystem::path& path);

/// Shared sanity checks. Returns a NonSibling decision or nullopt (pass).
std::optional<Decision> first_order_filter(const FeatureVector& fv, double r2_hz_min = 0.9);

/// First-order filter followed by the hand-tuned rules.
Decision classify_ht(const FeatureVector& fv, const HtThresholds& th = {}, double r2_hz_min = 0.9);

/// First-order filter followed by a single Δ_tcpraw split (strict '>' is
/// non-sibling).
Decision classify_ml1(const FeatureVector& fv, const Ml1Model& model = {}, double r2_hz_min = 0.9);

/// Constant-skew angle comparison: option check, timestamp-behaviour check,
/// then |atan(α4) - atan(α6)| within tolerance.
Decision classify_beverly(const FeatureVector& fv, const BeverlyParams& params = {});

/// Scoring view: only Sibling counts as a positive prediction.
inline bool predicts_sibling(const Decision& d) { return d.verdict == Verdict::Sibling; }

}  // namespace sibling
