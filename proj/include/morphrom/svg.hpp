#pragma once

#include "morphrom/mesh.hpp"

#include <string>
#include <vector>

/// Deterministic SVG rendering for reports: line charts of convergence
/// histories (linear or log ordinate) and mesh wireframes with tagged
/// boundaries.  Output depends only on the inputs, byte for byte.
namespace morphrom {

/// One plotted series: label plus matching x and y arrays.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title;
  std::string x_label, y_label;
  bool log_y = false;          ///< decade ticks; non-positive values are skipped
  int width = 640, height = 420;
};

std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

void save_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series,
                    const std::string& path);

/// Wireframe of the mesh at the given positions: interior edges light grey,
/// boundary edges colored per tag, with a tag legend.
std::string render_mesh(const Mesh2D& mesh, std::span<const Vec2> positions, int width = 640);

void save_mesh_plot(const Mesh2D& mesh, std::span<const Vec2> positions, const std::string& path,
                    int width = 640);

}  // namespace morphrom
