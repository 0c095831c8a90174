#pragma once

#include <string>

#include "sibling/core.hpp"
#include "sibling/features.hpp"

namespace sibling {

/// SVG offset plot of one pair: per-packet offsets of both sides over
/// measurement hours, with the fitted splines overlaid (v6 spline shifted by
/// the optimal constant). Sides without a usable clock are omitted.
std::string render_offset_plot(const CandidatePair& pair, const FeatureConfig& cfg = {});

}  // namespace sibling
