#include "bomi/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "bomi/csv.hpp"

namespace bomi::cli {
namespace {

constexpr double kPanelW = 320, kPanelH = 280;
constexpr double kMarginL = 58, kMarginR = 16, kMarginT = 56, kMarginB = 46;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void Add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void Finish() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

void RenderPanel(std::ostringstream& os, const Panel& p, double ox) {
  Range xr, yr;
  for (const Polyline& l : p.lines) {
    for (double v : l.x) xr.Add(v);
    for (double v : l.y) yr.Add(v);
  }
  for (const Marker& m : p.markers) {
    xr.Add(m.x - m.radius), xr.Add(m.x + m.radius);
    yr.Add(m.y - m.radius), yr.Add(m.y + m.radius);
  }
  xr.Finish();
  yr.Finish();
  if (p.x_lo < p.x_hi) xr.lo = p.x_lo, xr.hi = p.x_hi;
  if (p.y_lo < p.y_hi) yr.lo = p.y_lo, yr.hi = p.y_hi;

  const double w = kPanelW - kMarginL - kMarginR;
  const double h = kPanelH - kMarginT - kMarginB;
  double sx = w / (xr.hi - xr.lo), sy = h / (yr.hi - yr.lo);
  if (p.equal_aspect) sx = sy = std::min(sx, sy);
  const double x0 = ox + kMarginL, y0 = kMarginT + h;
  auto X = [&](double v) { return x0 + (v - xr.lo) * sx; };
  auto Y = [&](double v) { return y0 - (v - yr.lo) * sy; };

  os << "<rect x=\"" << Num(x0) << "\" y=\"" << Num(kMarginT) << "\" width=\"" << Num(w)
     << "\" height=\"" << Num(h) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  os << "<text x=\"" << Num(x0 + w / 2) << "\" y=\"" << Num(kMarginT - 8)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << Escape(p.title) << "</text>\n";
  os << "<text x=\"" << Num(x0 + w / 2) << "\" y=\"" << Num(kPanelH - 8)
     << "\" text-anchor=\"middle\" font-size=\"12\">" << Escape(p.x_label) << "</text>\n";
  os << "<text transform=\"translate(" << Num(ox + 14) << "," << Num(kMarginT + h / 2)
     << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" << Escape(p.y_label)
     << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + i * (xr.hi - xr.lo) / 4;
    const double yv = yr.lo + i * (yr.hi - yr.lo) / 4;
    os << "<text x=\"" << Num(X(xv)) << "\" y=\"" << Num(y0 + 16)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << Tick(xv) << "</text>\n";
    os << "<text x=\"" << Num(x0 - 4) << "\" y=\"" << Num(Y(yv) + 3)
       << "\" text-anchor=\"end\" font-size=\"10\">" << Tick(yv) << "</text>\n";
  }
  for (const Polyline& l : p.lines) {
    os << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\""
       << Num(l.width) << "\" points=\"";
    for (std::size_t i = 0; i < l.x.size() && i < l.y.size(); ++i) {
      if (!std::isfinite(l.x[i]) || !std::isfinite(l.y[i])) continue;
      os << Num(X(l.x[i])) << ',' << Num(Y(l.y[i])) << ' ';
    }
    os << "\"/>\n";
  }
  for (const Marker& m : p.markers) {
    const double r = m.radius > 0 ? m.radius * sx : 3;
    os << "<circle cx=\"" << Num(X(m.x)) << "\" cy=\"" << Num(Y(m.y)) << "\" r=\""
       << Num(r) << "\" fill=\"none\" stroke=\"" << m.color << "\"/>\n";
  }
  if (!p.note.empty()) {
    os << "<text x=\"" << Num(x0 + w / 2) << "\" y=\"" << Num(kMarginT + h / 2)
       << "\" text-anchor=\"middle\" font-size=\"13\" fill=\"#d62728\">" << Escape(p.note)
       << "</text>\n";
  }
}

}  // namespace

std::string Figure::Render() const {
  const std::size_t n = std::max<std::size_t>(panels_.size(), 1);
  const double width = kPanelW * n;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(width)
     << "\" height=\"" << Num(kPanelH + 24) << "\" font-family=\"sans-serif\">\n";
  if (!comment_.empty()) {
    std::string c = comment_;
    for (std::size_t i; (i = c.find("--")) != std::string::npos;) c.replace(i, 2, "- ");
    os << "<!-- " << c << " -->\n";
  }
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << Num(width / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"15\">"
     << Escape(title_) << "</text>\n";
  os << "<g transform=\"translate(0,16)\">\n";
  for (std::size_t i = 0; i < panels_.size(); ++i) RenderPanel(os, panels_[i], kPanelW * i);
  os << "</g>\n</svg>\n";
  return os.str();
}

void Figure::Write(const std::filesystem::path& path) const {
  auto out = csv::OpenForWrite(path);
  out << Render();
}

}  // namespace bomi::cli
