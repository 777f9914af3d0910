#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ltmcli/cli.hpp"

namespace ltm::cli {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0;  // in transformed units
  double hi = 1.0;

  void include(double v) {
    if (!std::isfinite(v) || (log && v <= 0.0)) return;
    double t = log ? std::log10(v) : v;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double t(double v) const { return log ? std::log10(v) : v; }

  void finish() {
    if (lo > hi) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      const double pad = log ? 0.5 : std::max(std::abs(lo) * 0.1, 0.5);
      lo -= pad;
      hi += pad;
    } else if (!log) {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    } else {
      lo = std::floor(lo * 4.0) / 4.0;
      hi = std::ceil(hi * 4.0) / 4.0;
    }
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double k = std::ceil(lo); k <= hi + 1e-9; k += 1.0) out.push_back(k);
      if (out.size() >= 2) return out;
      out.clear();
    }
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      step = m * mag;
      if (span / step <= 6.0) break;
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(v);
    return out;
  }

  std::string tick_label(double t) const {
    if (!log) return label(std::abs(t) < 1e-12 ? 0.0 : t);
    if (std::abs(t - std::round(t)) < 1e-9) return "1e" + std::to_string(static_cast<int>(std::round(t)));
    return label(std::pow(10.0, t));
  }
};

}  // namespace

std::string render_svg(const Plot& plot) {
  Axis xa{plot.log_x, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Axis ya{plot.log_y, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (xa.usable(s.x[i]) && ya.usable(s.y[i])) {
        xa.include(s.x[i]);
        ya.include(s.y[i]);
      }
    }
  }
  for (const auto& b : plot.bands) {
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      xa.include(b.x[i]);
      ya.include(b.lower[i]);
      ya.include(b.upper[i]);
    }
  }
  for (double v : plot.vlines) xa.include(v);
  xa.finish();
  ya.finish();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (xa.t(v) - xa.lo) / (xa.hi - xa.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ya.t(v) - ya.lo) / (ya.hi - ya.lo) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<!-- ltm-svg/1 -->\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(plot.title) << "</text>\n";

  for (double t : xa.ticks()) {
    const double x = kLeft + (t - xa.lo) / (xa.hi - xa.lo) * pw;
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(x) << "\" y2=\"" << fmt(kTop + ph)
       << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kTop + ph + 16) << "\" text-anchor=\"middle\">"
       << xa.tick_label(t) << "</text>\n";
  }
  for (double t : ya.ticks()) {
    const double y = kTop + ph - (t - ya.lo) / (ya.hi - ya.lo) * ph;
    os << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(kLeft + pw) << "\" y2=\"" << fmt(y)
       << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">" << ya.tick_label(t)
       << "</text>\n";
  }
  os << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 18) << "\" text-anchor=\"middle\">"
     << escape(plot.x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << fmt(kTop + ph / 2) << ")\">" << escape(plot.y_label) << "</text>\n";

  for (const auto& b : plot.bands) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < b.x.size(); ++i) pts << fmt(px(b.x[i])) << "," << fmt(py(b.upper[i])) << " ";
    for (std::size_t i = b.x.size(); i-- > 0;) pts << fmt(px(b.x[i])) << "," << fmt(py(b.lower[i])) << " ";
    os << "<polygon points=\"" << pts.str() << "\" fill=\"#1f77b4\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
  }
  for (double v : plot.vlines) {
    if (!xa.usable(v)) continue;
    os << "<line x1=\"" << fmt(px(v)) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(px(v)) << "\" y2=\""
       << fmt(kTop + ph) << "\" stroke=\"#555555\" stroke-dasharray=\"5,4\"/>\n";
  }
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::ostringstream pts;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!xa.usable(s.x[i]) || !ya.usable(s.y[i])) continue;
      pts << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
      ++n;
      if (s.markers) {
        os << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"3.5\" fill=\"" << color
           << "\"/>\n";
      }
    }
    if (s.line && n >= 2) {
      os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    os << "<line x1=\"" << fmt(kLeft + pw + 12) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(kLeft + pw + 32)
       << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt(kLeft + pw + 36) << "\" y=\"" << fmt(ly) << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ltm::cli
