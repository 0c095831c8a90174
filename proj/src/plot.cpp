#include "sibling/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

namespace sibling {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 60.0;

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

}  // namespace

std::string render_offset_plot(const CandidatePair& pair, const FeatureConfig& cfg) {
  const SideFeatures s4 = compute_side(*pair.series4, cfg);
  const SideFeatures s6 = compute_side(*pair.series6, cfg);
  const OffsetArray* off4 = s4.offsets ? &*s4.offsets : nullptr;
  const OffsetArray* off6 = s6.offsets ? &*s6.offsets : nullptr;

  std::optional<SplineFits> fits;
  double shift = 0.0;
  if (off4 && off6) {
    try {
      fits = fit_offset_splines(*off4, *off6, cfg.spline_knots);
      shift = spline_pair(*off4, *off6, cfg).shift;
    } catch (const FeatureError&) {
      fits.reset();
    }
  }

  double t0 = std::numeric_limits<double>::infinity();
  for (const auto* o : {off4, off6}) {
    if (o) t0 = std::min(t0, o->origin);
  }
  Frame f{0.0, 1.0, -1.0, 1.0};
  bool any = false;
  for (const auto* o : {off4, off6}) {
    if (!o) continue;
    for (std::size_t i = 0; i < o->x.size(); ++i) {
      const double h = (o->origin + o->x[i] - t0) / 3600.0;
      const double y = o->y[i] + (o == off6 ? shift : 0.0);
      if (!any) {
        f = {h, h, y, y};
        any = true;
      }
      f.x0 = std::min(f.x0, h);
      f.x1 = std::max(f.x1, h);
      f.y0 = std::min(f.y0, y);
      f.y1 = std::max(f.y1, y);
    }
  }
  if (f.x1 - f.x0 <= 0.0) f.x1 = f.x0 + 1.0;
  if (f.y1 - f.y0 <= 0.0) {
    f.y0 -= 1.0;
    f.y1 += 1.0;
  }

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\">\n";
  svg += "<rect width=\"800\" height=\"480\" fill=\"white\"/>\n";
  svg += "<text x=\"60\" y=\"30\" font-family=\"sans-serif\" font-size=\"14\">" + pair.id + "  " + pair.ip4 +
         " / " + pair.ip6 + "</text>\n";
  svg += "<line x1=\"60\" y1=\"420\" x2=\"740\" y2=\"420\" stroke=\"black\"/>\n";
  svg += "<line x1=\"60\" y1=\"60\" x2=\"60\" y2=\"420\" stroke=\"black\"/>\n";
  svg += "<text x=\"400\" y=\"460\" font-family=\"sans-serif\" font-size=\"12\">hours</text>\n";
  svg += "<text x=\"10\" y=\"50\" font-family=\"sans-serif\" font-size=\"12\">offset [ms] " +
         fmt("%.1f", f.y0) + " .. " + fmt("%.1f", f.y1) + "</text>\n";

  auto scatter = [&](const OffsetArray* o, const char* color, double dy) {
    if (!o) return;
    for (std::size_t i = 0; i < o->x.size(); ++i) {
      const double h = (o->origin + o->x[i] - t0) / 3600.0;
      svg += "<circle cx=\"" + fmt("%.2f", f.px(h)) + "\" cy=\"" + fmt("%.2f", f.py(o->y[i] + dy)) +
             "\" r=\"1.5\" fill=\"" + color + "\"/>\n";
    }
  };
  scatter(off4, "#1f77b4", 0.0);
  scatter(off6, "#d62728", shift);

  if (fits) {
    for (int side = 0; side < 2; ++side) {
      std::string path = "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"";
      path += side == 0 ? "#0b3c5d" : "#7f0000";
      path += "\" points=\"";
      constexpr int kSteps = 200;
      for (int g = 0; g <= kSteps; ++g) {
        const double t = fits->lo + (fits->hi - fits->lo) * g / kSteps;
        const double y = side == 0 ? fits->eval4(t) : fits->eval6(t) + shift;
        path += fmt("%.2f", f.px((t - t0) / 3600.0)) + "," + fmt("%.2f", f.py(y)) + " ";
      }
      path += "\"/>\n";
      svg += path;
    }
  }
  svg += "<text x=\"600\" y=\"30\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">IPv4</text>\n";
  svg += "<text x=\"650\" y=\"30\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d62728\">IPv6</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace sibling
