#include "sibling/classifiers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "sibling/util.hpp"

namespace sibling {

void HtThresholds::validate() const {
  if (!(y2 < y3)) throw std::invalid_argument("HT thresholds: y2 must be below y3");
  if (!(z2 > 0.0 && z2 < 1.0)) throw std::invalid_argument("HT thresholds: z2 must lie in (0,1)");
}

void Ml1Model::validate() const {
  if (!(tcpraw_threshold > 0.0)) throw std::invalid_argument("ML1 threshold must be positive");
}

void BeverlyParams::validate() const {
  if (!(angle_tolerance_deg > 0.0)) throw std::invalid_argument("Beverly tolerance must be positive");
}

ClassifierParams load_classifier_params(const std::filesystem::path& path) {
  const auto doc = nlohmann::json::parse(read_file(path));
  ClassifierParams p;
  p.r2_hz_min = doc.value("r2_hz_min", p.r2_hz_min);
  p.beverly.r2_hz_min = p.r2_hz_min;
  if (doc.contains("ht")) {
    const auto& h = doc.at("ht");
    auto& t = p.ht;
    t.z1 = h.value("z1", t.z1);
    t.z2 = h.value("z2", t.z2);
    t.z3 = h.value("z3", t.z3);
    t.z4 = h.value("z4", t.z4);
    t.z5 = h.value("z5", t.z5);
    t.z6 = h.value("z6", t.z6);
    t.z7 = h.value("z7", t.z7);
    t.y1 = h.value("y1", t.y1);
    t.y2 = h.value("y2", t.y2);
    t.y3 = h.value("y3", t.y3);
  }
  if (doc.contains("ml1")) {
    p.ml1.tcpraw_threshold = doc.at("ml1").value("tcpraw_threshold", p.ml1.tcpraw_threshold);
  }
  if (doc.contains("beverly")) {
    const auto& b = doc.at("beverly");
    p.beverly.angle_tolerance_deg = b.value("angle_tolerance_deg", p.beverly.angle_tolerance_deg);
    p.beverly.r2_hz_min = b.value("r2_hz_min", p.beverly.r2_hz_min);
  }
  p.ht.validate();
  p.ml1.validate();
  p.beverly.validate();
  return p;
}

std::optional<Decision> first_order_filter(const FeatureVector& fv, double r2_hz_min) {
  if (fv.opts_diff) return Decision::non_sibling(Reason::OptionsDiffer);
  if (fv.hz4_status == FeatureStatus::Failed || fv.hz6_status == FeatureStatus::Failed ||
      fv.hz4_status == FeatureStatus::Skipped || fv.hz6_status == FeatureStatus::Skipped ||
      !(fv.r2_hz4 >= r2_hz_min) || !(fv.r2_hz6 >= r2_hz_min)) {
    return Decision::non_sibling(Reason::HzFitFailed);
  }
  if (fv.hz4 != fv.hz6) return Decision::non_sibling(Reason::HzDiffer);
  if (fv.hz4 < 1.0 || fv.hz6 < 1.0) return Decision::non_sibling(Reason::HzTooSmall);
  return std::nullopt;
}

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool computed(FeatureStatus s) { return s == FeatureStatus::Computed; }

}  // namespace

Decision classify_ht(const FeatureVector& fv, const HtThresholds& th, double r2_hz_min) {
  if (auto d = first_order_filter(fv, r2_hz_min)) return *d;

  if (!computed(fv.tcpraw_status)) return Decision::error(Reason::MissingFeature);
  if (fv.delta_tcpraw > th.z1) return Decision::non_sibling(Reason::RawTsDelta);

  // Linear testing.
  if (!computed(fv.skew_status)) return Decision::error(Reason::MissingFeature);
  const bool lin4 = fv.r2_skew4 >= th.z2;
  const bool lin6 = fv.r2_skew6 >= th.z2;
  if (lin4 && lin6) {
    if (sign(fv.alpha4) != sign(fv.alpha6)) return Decision::non_sibling(Reason::SkewSign);
    if (std::abs(fv.alpha_diff) <= th.z4) return Decision::sibling(Reason::LinearSkew);
  } else if (lin4 != lin6) {
    if (std::abs(fv.r2_skewdiff) >= th.z3) return Decision::non_sibling(Reason::SkewR2Diff);
  }

  // Non-linear testing.
  if (!computed(fv.rng_status)) return Decision::error(Reason::MissingFeature);
  if (fv.rng4 <= th.z5 && fv.rng6 <= th.z5) return Decision::unknown(Reason::GuardInterval);
  if ((fv.rng4 >= th.z5) != (fv.rng6 >= th.z5)) {
    if (fv.rng_diff >= th.z6) return Decision::non_sibling(Reason::RangeDiff);
  }
  if (!computed(fv.spline_status)) return Decision::error(Reason::MissingFeature);
  if (fv.rng4 >= th.z7 && fv.rng6 >= th.z7) {
    if (fv.spl_diff <= th.y1) return Decision::sibling(Reason::SplineArea);
    return Decision::non_sibling(Reason::SplineArea);
  }
  if (fv.spl_diff <= th.y2) return Decision::sibling(Reason::SplineArea);
  if (fv.spl_diff > th.y3) return Decision::non_sibling(Reason::SplineArea);
  return Decision::unknown(Reason::GuardInterval);
}

Decision classify_ml1(const FeatureVector& fv, const Ml1Model& model, double r2_hz_min) {
  if (auto d = first_order_filter(fv, r2_hz_min)) return *d;
  if (!computed(fv.tcpraw_status)) return Decision::error(Reason::MissingFeature);
  if (fv.delta_tcpraw > model.tcpraw_threshold) return Decision::non_sibling(Reason::RawTsDelta);
  return Decision::sibling(Reason::RawTsDelta);
}

Decision classify_beverly(const FeatureVector& fv, const BeverlyParams& params) {
  if (fv.opts_diff) return Decision::non_sibling(Reason::OptionsDiffer);
  // Random or non-monotonic stamping: no usable clock on one side.
  if (!computed(fv.hz4_status) || !computed(fv.hz6_status) || !(fv.r2_hz4 >= params.r2_hz_min) ||
      !(fv.r2_hz6 >= params.r2_hz_min) || fv.hz4 != fv.hz6 || fv.hz4 < 1.0) {
    return Decision::non_sibling(Reason::TimestampBehavior);
  }
  if (!computed(fv.skew_status)) return Decision::error(Reason::MissingFeature);
  constexpr double kDeg = 180.0 / std::numbers::pi;
  const double angle = std::abs(std::atan(fv.alpha4) - std::atan(fv.alpha6)) * kDeg;
  if (angle <= params.angle_tolerance_deg) return Decision::sibling(Reason::SkewAngle);
  return Decision::non_sibling(Reason::SkewAngle);
}

}  // namespace sibling
