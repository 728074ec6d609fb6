#include "morphrom/svg.hpp"

#include "morphrom/serial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace morphrom {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string escape_xml(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Short human label for tick values.
std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Largest {1,2,5}*10^k step not exceeding the raw spacing.
double nice_step(double raw) {
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  if (frac >= 5.0) return 5.0 * mag;
  if (frac >= 2.0) return 2.0 * mag;
  return mag;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double pix_lo = 0.0, pix_hi = 1.0;  ///< pixel range (y axes run downwards)

  double to_pix(double v) const {
    const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo))
                         : (v - lo) / (hi - lo);
    return pix_lo + t * (pix_hi - pix_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int k0 = static_cast<int>(std::ceil(std::log10(lo) - 1e-9));
      const int k1 = static_cast<int>(std::floor(std::log10(hi) + 1e-9));
      for (int k = k0; k <= k1; ++k) out.push_back(std::pow(10.0, k));
      if (out.size() > 12) {  // thin dense decade ranges
        std::vector<double> thin;
        const size_t stride = (out.size() + 11) / 12;
        for (size_t i = 0; i < out.size(); i += stride) thin.push_back(out[i]);
        out = thin;
      }
    } else {
      const double step = nice_step((hi - lo) / 5.0);
      for (double v = std::ceil(lo / step) * step; v <= hi + 0.5 * step; v += step)
        out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
  }
};

}  // namespace

std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  const double left = 70, right = 20, top = 40, bottom = 50;
  const double w = spec.width, h = spec.height;

  // Data ranges (log ordinate skips non-positive values).
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const PlotSeries& s : series)
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (spec.log_y && s.y[i] <= 0.0) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  if (!(xlo <= xhi)) {
    xlo = 0.0;
    xhi = 1.0;
    ylo = spec.log_y ? 0.1 : 0.0;
    yhi = 1.0;
  }
  if (xhi == xlo) xhi = xlo + 1.0;
  if (spec.log_y) {
    if (yhi == ylo) yhi = 10.0 * ylo;
  } else {
    const double pad = yhi == ylo ? std::max(1.0, std::abs(yhi)) * 0.1 : 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
  }

  Axis ax{xlo, xhi, false, left, w - right};
  Axis ay{ylo, yhi, spec.log_y, h - bottom, top};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
         "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\""
         " font-size=\"14\">" + escape_xml(spec.title) + "</text>\n";

  // Grid and ticks.
  for (double t : ax.ticks()) {
    const double px = ax.to_pix(t);
    out += "<line x1=\"" + num(px) + "\" y1=\"" + num(top) + "\" x2=\"" + num(px) + "\" y2=\"" +
           num(h - bottom) + "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + num(px) + "\" y=\"" + num(h - bottom + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           tick_label(t) + "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.to_pix(t);
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(py) + "\" x2=\"" + num(w - right) +
           "\" y2=\"" + num(py) + "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(py + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + tick_label(t) +
           "</text>\n";
  }
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(w - left - right) +
         "\" height=\"" + num(h - top - bottom) + "\" fill=\"none\" stroke=\"#404040\"/>\n";
  out += "<text x=\"" + num((left + w - right) / 2) + "\" y=\"" + num(h - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape_xml(spec.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + num((top + h - bottom) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
         num((top + h - bottom) / 2) + ")\">" + escape_xml(spec.y_label) + "</text>\n";

  // Series polylines; breaks where log-y drops non-positive values.
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    std::string path;
    bool pen_down = false;
    for (size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
      const double xv = series[s].x[i], yv = series[s].y[i];
      if (!std::isfinite(xv) || !std::isfinite(yv) || (spec.log_y && yv <= 0.0)) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? "L" : "M") + num(ax.to_pix(xv)) + " " + num(ay.to_pix(yv));
      pen_down = true;
    }
    if (!path.empty())
      out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.5\"/>\n";
  }

  // Legend, top-right inside the frame.
  double ly = top + 14;
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    const double lx = w - right - 150;
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 22) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(lx + 28) + "\" y=\"" + num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + escape_xml(series[s].label) +
           "</text>\n";
    ly += 15;
  }

  out += "</svg>\n";
  return out;
}

void save_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series,
                    const std::string& path) {
  write_text_file(path, render_line_plot(spec, series));
}

std::string render_mesh(const Mesh2D& mesh, std::span<const Vec2> positions, int width) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const Vec2& p : positions) {
    xlo = std::min(xlo, p.x());
    xhi = std::max(xhi, p.x());
    ylo = std::min(ylo, p.y());
    yhi = std::max(yhi, p.y());
  }
  if (!(xlo <= xhi)) xlo = ylo = 0.0, xhi = yhi = 1.0;
  const double margin = 14;
  const double span_x = std::max(xhi - xlo, 1e-30), span_y = std::max(yhi - ylo, 1e-30);
  const double scale = (width - 2 * margin) / span_x;
  const int height = static_cast<int>(std::ceil(span_y * scale + 2 * margin)) + 18;
  auto px = [&](const Vec2& p) { return margin + (p.x() - xlo) * scale; };
  auto py = [&](const Vec2& p) { return margin + (yhi - p.y()) * scale; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Interior wireframe: every undirected triangle edge once, one path.
  std::set<std::pair<int, int>> seen;
  std::string path;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = t[static_cast<size_t>(e)], b = t[static_cast<size_t>((e + 1) % 3)];
      if (!seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
      path += "M" + num(px(positions[static_cast<size_t>(a)])) + " " +
              num(py(positions[static_cast<size_t>(a)])) + "L" +
              num(px(positions[static_cast<size_t>(b)])) + " " +
              num(py(positions[static_cast<size_t>(b)]));
    }
  out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#d4d4d4\" stroke-width=\"0.5\"/>\n";

  // Boundary edges, one path per tag.
  for (size_t tag = 0; tag < mesh.tag_names.size(); ++tag) {
    std::string bpath;
    for (const BoundaryEdge& e : mesh.boundary_edges) {
      if (e.tag != static_cast<int>(tag)) continue;
      bpath += "M" + num(px(positions[static_cast<size_t>(e.a)])) + " " +
               num(py(positions[static_cast<size_t>(e.a)])) + "L" +
               num(px(positions[static_cast<size_t>(e.b)])) + " " +
               num(py(positions[static_cast<size_t>(e.b)]));
    }
    if (bpath.empty()) continue;
    out += "<path d=\"" + bpath + "\" fill=\"none\" stroke=\"" +
           std::string(kPalette[tag % kPaletteSize]) + "\" stroke-width=\"1.5\"/>\n";
  }

  // Tag legend along the bottom edge.
  double lx = margin;
  for (size_t tag = 0; tag < mesh.tag_names.size(); ++tag) {
    out += "<text x=\"" + num(lx) + "\" y=\"" + num(height - 6) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" +
           std::string(kPalette[tag % kPaletteSize]) + "\">" + escape_xml(mesh.tag_names[tag]) +
           "</text>\n";
    lx += 9.0 * static_cast<double>(mesh.tag_names[tag].size()) + 18.0;
  }

  out += "</svg>\n";
  return out;
}

void save_mesh_plot(const Mesh2D& mesh, std::span<const Vec2> positions, const std::string& path,
                    int width) {
  write_text_file(path, render_mesh(mesh, positions, width));
}

}  // namespace morphrom
