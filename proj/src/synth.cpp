#include "morphrom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace morphrom {

namespace {

constexpr double kPi = std::numbers::pi;

double lerp(double a, double b, double t) { return a * (1.0 - t) + b * t; }

Vec2 lerp(const Vec2& a, const Vec2& b, double t) { return a * (1.0 - t) + b * t; }

/// Directed boundary edges of a triangulation (edges incident to exactly one
/// triangle, directed as that triangle traverses them).
std::vector<std::pair<int, int>> derive_boundary(const std::vector<std::array<int, 3>>& triangles) {
  auto ukey = [](int a, int b) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(std::max(a, b))) << 32) |
           static_cast<uint32_t>(std::min(a, b));
  };
  std::unordered_map<uint64_t, int> incidence;
  for (const auto& tri : triangles)
    for (int k = 0; k < 3; ++k)
      ++incidence[ukey(tri[static_cast<size_t>(k)], tri[static_cast<size_t>((k + 1) % 3)])];
  std::vector<std::pair<int, int>> edges;
  for (const auto& tri : triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = tri[static_cast<size_t>(k)];
      const int b = tri[static_cast<size_t>((k + 1) % 3)];
      if (incidence.at(ukey(a, b)) == 1) edges.emplace_back(a, b);
    }
  return edges;
}

/// Appends `count` segments from `from` towards `to` (excluding `to`) to a
/// polyline loop under construction.
void append_segmented(PolylineLoop& loop, const Vec2& from, const Vec2& to, int count, int tag) {
  for (int i = 0; i < count; ++i) {
    loop.points.push_back(lerp(from, to, static_cast<double>(i) / count));
    loop.segment_tags.push_back(tag);
  }
}

enum PlateTag { kArcLeft = 0, kArcRight = 1, kWallTop = 2, kWallBottom = 3 };

const std::vector<std::string> kPlateTags = {"arc_left", "arc_right", "wall_top", "wall_bottom"};

void check_plate_params(double radius, double h) {
  if (!(radius > 0.0 && radius < 1.0)) throw MeshError("plate radius must lie in (0,1)");
  if (!(h > 0.0)) throw MeshError("element size h must be positive");
  if (kPi * radius / h < 8.0)
    throw MeshError("element size h too coarse: each half-circle needs at least 8 segments");
}

}  // namespace

Mesh2D synth_plate(double radius, double h) {
  check_plate_params(radius, h);
  const double s = std::sqrt(0.5);
  const Vec2 c(1.0, 0.0);

  // Right half: three transfinite blocks between the half-circle around (1,0)
  // (angles pi/2 -> 3pi/2) and the outer path (1,1) -> (0,1) -> (0,-1) -> (1,-1).
  // Block corners are placed exactly so that the x=0 seam and the four
  // arc/wall junctions are bitwise reproducible.
  const int n1 = static_cast<int>(std::ceil(std::max(kPi * radius / 4.0, 1.0) / h));
  const int n2 = static_cast<int>(std::ceil(std::max(kPi * radius / 2.0, 2.0) / h));

  struct Column {
    Vec2 inner, outer;
    bool seam = false;  // outer endpoint on the x=0 interface
  };
  std::vector<Column> cols;
  auto arc_point = [&](double phi) -> Vec2 { return c + radius * Vec2(std::cos(phi), std::sin(phi)); };

  for (int i = 0; i <= n1; ++i) {
    const double t = static_cast<double>(i) / n1;
    Column col;
    if (i == 0)
      col.inner = c + radius * Vec2(0.0, 1.0);
    else if (i == n1)
      col.inner = c + radius * Vec2(-s, s);
    else
      col.inner = arc_point(lerp(kPi / 2.0, 3.0 * kPi / 4.0, t));
    col.outer = Vec2(1.0 - t, 1.0);
    col.seam = (i == n1);
    cols.push_back(col);
  }
  for (int i = 1; i <= n2; ++i) {
    const double t = static_cast<double>(i) / n2;
    Column col;
    col.inner = (i == n2) ? c + radius * Vec2(-s, -s)
                          : arc_point(lerp(3.0 * kPi / 4.0, 5.0 * kPi / 4.0, t));
    col.outer = Vec2(0.0, 1.0 - 2.0 * t);
    col.seam = true;
    cols.push_back(col);
  }
  for (int i = 1; i <= n1; ++i) {
    const double t = static_cast<double>(i) / n1;
    Column col;
    col.inner = (i == n1) ? c + radius * Vec2(0.0, -1.0)
                          : arc_point(lerp(5.0 * kPi / 4.0, 3.0 * kPi / 2.0, t));
    col.outer = Vec2(t, -1.0);
    col.seam = false;
    cols.push_back(col);
  }

  double max_spoke = 0.0;
  for (const Column& col : cols) max_spoke = std::max(max_spoke, (col.outer - col.inner).norm());
  const int n_r = std::max(2, static_cast<int>(std::ceil(max_spoke / h)));
  const int n_cols = static_cast<int>(cols.size());
  const int rows = n_r + 1;

  Mesh2D mesh;
  mesh.tag_names = kPlateTags;
  auto rid = [&](int col, int row) { return col * rows + row; };
  for (const Column& col : cols)
    for (int row = 0; row < rows; ++row)
      mesh.vertices.push_back(lerp(col.inner, col.outer, static_cast<double>(row) / n_r));

  // Mirror across x=0; the seam row (outer endpoints of seam columns) is shared.
  const int n_right = static_cast<int>(mesh.vertices.size());
  std::vector<int> mirrored(static_cast<size_t>(n_right), -1);
  for (int col = 0; col < n_cols; ++col)
    for (int row = 0; row < rows; ++row) {
      const int k = rid(col, row);
      if (cols[static_cast<size_t>(col)].seam && row == n_r) {
        mirrored[static_cast<size_t>(k)] = k;
      } else {
        const Vec2& p = mesh.vertices[static_cast<size_t>(k)];
        mirrored[static_cast<size_t>(k)] = static_cast<int>(mesh.vertices.size());
        mesh.vertices.emplace_back(-p.x(), p.y());
      }
    }

  for (int col = 0; col + 1 < n_cols; ++col)
    for (int row = 0; row < n_r; ++row) {
      const int p00 = rid(col, row), p10 = rid(col + 1, row);
      const int p01 = rid(col, row + 1), p11 = rid(col + 1, row + 1);
      mesh.triangles.push_back({p00, p11, p10});
      mesh.triangles.push_back({p00, p01, p11});
      const int m00 = mirrored[static_cast<size_t>(p00)], m10 = mirrored[static_cast<size_t>(p10)];
      const int m01 = mirrored[static_cast<size_t>(p01)], m11 = mirrored[static_cast<size_t>(p11)];
      mesh.triangles.push_back({m00, m10, m11});
      mesh.triangles.push_back({m00, m11, m01});
    }

  for (const auto& [a, b] : derive_boundary(mesh.triangles)) {
    const Vec2& pa = mesh.vertices[static_cast<size_t>(a)];
    const Vec2& pb = mesh.vertices[static_cast<size_t>(b)];
    const double tol = 1e-9;
    int tag;
    if (std::abs((pa - c).norm() - radius) < tol && std::abs((pb - c).norm() - radius) < tol)
      tag = kArcRight;
    else if (std::abs((pa + c).norm() - radius) < tol && std::abs((pb + c).norm() - radius) < tol)
      tag = kArcLeft;
    else
      tag = (pa.y() + pb.y() > 0.0) ? kWallTop : kWallBottom;
    mesh.boundary_edges.push_back({a, b, tag});
  }

  mesh.tracked_points["arc_right_top"] = rid(0, 0);
  mesh.tracked_points["arc_right_bottom"] = rid(n_cols - 1, 0);
  mesh.tracked_points["arc_left_top"] = mirrored[static_cast<size_t>(rid(0, 0))];
  mesh.tracked_points["arc_left_bottom"] = mirrored[static_cast<size_t>(rid(n_cols - 1, 0))];

  validate(mesh);
  return mesh;
}

BoundaryPolyline plate_boundary(double radius, double h) {
  check_plate_params(radius, h);
  const int n_arc = std::max(8, static_cast<int>(std::ceil(kPi * radius / h)));
  auto wall_count = [&](double len) { return std::max(1, static_cast<int>(std::ceil(len / h))); };

  BoundaryPolyline poly;
  poly.tag_names = kPlateTags;
  PolylineLoop loop;

  // Single CCW loop: the half-disk notches are boundary indentations.
  append_segmented(loop, {1.0, radius}, {1.0, 1.0}, wall_count(1.0 - radius), kWallTop);
  append_segmented(loop, {1.0, 1.0}, {-1.0, 1.0}, wall_count(2.0), kWallTop);
  append_segmented(loop, {-1.0, 1.0}, {-1.0, radius}, wall_count(1.0 - radius), kWallTop);
  for (int i = 0; i < n_arc; ++i) {
    const double phi = lerp(kPi / 2.0, -kPi / 2.0, static_cast<double>(i) / n_arc);
    loop.points.push_back(i == 0 ? Vec2(-1.0, radius)
                                 : Vec2(-1.0, 0.0) + radius * Vec2(std::cos(phi), std::sin(phi)));
    loop.segment_tags.push_back(kArcLeft);
  }
  append_segmented(loop, {-1.0, -radius}, {-1.0, -1.0}, wall_count(1.0 - radius), kWallBottom);
  append_segmented(loop, {-1.0, -1.0}, {1.0, -1.0}, wall_count(2.0), kWallBottom);
  append_segmented(loop, {1.0, -1.0}, {1.0, -radius}, wall_count(1.0 - radius), kWallBottom);
  for (int i = 0; i < n_arc; ++i) {
    const double phi = lerp(3.0 * kPi / 2.0, kPi / 2.0, static_cast<double>(i) / n_arc);
    loop.points.push_back(i == 0 ? Vec2(1.0, -radius)
                                 : Vec2(1.0, 0.0) + radius * Vec2(std::cos(phi), std::sin(phi)));
    loop.segment_tags.push_back(kArcRight);
  }

  poly.loops.push_back(std::move(loop));
  poly.tracked_points["arc_right_top"] = {1.0, radius};
  poly.tracked_points["arc_right_bottom"] = {1.0, -radius};
  poly.tracked_points["arc_left_top"] = {-1.0, radius};
  poly.tracked_points["arc_left_bottom"] = {-1.0, -radius};
  return poly;
}

BoundaryPolyline notched_plate_boundary(double half_width, double h) {
  if (!(half_width > 0.0 && half_width < 1.0))
    throw MeshError("notch half-width must lie in (0,1)");
  if (!(h > 0.0)) throw MeshError("element size h must be positive");
  const double a = half_width;
  auto count = [&](double len) { return std::max(2, static_cast<int>(std::ceil(len / h))); };

  BoundaryPolyline poly;
  poly.tag_names = kPlateTags;
  PolylineLoop loop;
  append_segmented(loop, {1.0, a}, {1.0, 1.0}, count(1.0 - a), kWallTop);
  append_segmented(loop, {1.0, 1.0}, {-1.0, 1.0}, count(2.0), kWallTop);
  append_segmented(loop, {-1.0, 1.0}, {-1.0, a}, count(1.0 - a), kWallTop);
  append_segmented(loop, {-1.0, a}, {-1.0 + a, a}, count(a), kArcLeft);
  append_segmented(loop, {-1.0 + a, a}, {-1.0 + a, -a}, count(2.0 * a), kArcLeft);
  append_segmented(loop, {-1.0 + a, -a}, {-1.0, -a}, count(a), kArcLeft);
  append_segmented(loop, {-1.0, -a}, {-1.0, -1.0}, count(1.0 - a), kWallBottom);
  append_segmented(loop, {-1.0, -1.0}, {1.0, -1.0}, count(2.0), kWallBottom);
  append_segmented(loop, {1.0, -1.0}, {1.0, -a}, count(1.0 - a), kWallBottom);
  append_segmented(loop, {1.0, -a}, {1.0 - a, -a}, count(a), kArcRight);
  append_segmented(loop, {1.0 - a, -a}, {1.0 - a, a}, count(2.0 * a), kArcRight);
  append_segmented(loop, {1.0 - a, a}, {1.0, a}, count(a), kArcRight);

  poly.loops.push_back(std::move(loop));
  poly.tracked_points["arc_right_top"] = {1.0, a};
  poly.tracked_points["arc_right_bottom"] = {1.0, -a};
  poly.tracked_points["arc_left_top"] = {-1.0, a};
  poly.tracked_points["arc_left_bottom"] = {-1.0, -a};
  return poly;
}

namespace {

const std::vector<std::string> kAirfoilTags = {"upper", "lower", "farfield"};
enum AirfoilTag { kUpper = 0, kLower = 1, kFarfield = 2 };

struct FoilParams {
  double m, p, t;
  int n_half;
};

void check_airfoil_params(double m, double p, double t, int n_boundary, double farfield_radius) {
  if (!(m >= 0.0 && m <= 0.09)) throw MeshError("camber m must lie in [0, 0.09]");
  if (m > 0.0 && !(p >= 0.1 && p <= 0.9)) throw MeshError("camber position p must lie in [0.1, 0.9]");
  if (!(t >= 0.06 && t <= 0.18)) throw MeshError("thickness t must lie in [0.06, 0.18]");
  if (n_boundary < 16 || n_boundary % 2 != 0)
    throw MeshError("airfoil boundary needs an even vertex count >= 16");
  if (!(farfield_radius >= 5.0)) throw MeshError("far-field radius must be at least 5 chords");
}

/// Profile point on the upper (sign=+1) or lower (sign=-1) surface at chord
/// position x, with camber line and perpendicular closed-trailing-edge
/// thickness distribution.
Vec2 foil_point(const FoilParams& f, double x, int sign) {
  const double sq = std::sqrt(x);
  const double yt = 5.0 * f.t *
                    (0.2969 * sq - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x -
                     0.1036 * x * x * x * x);
  double yc = 0.0, dyc = 0.0;
  if (f.m > 0.0) {
    if (x < f.p) {
      yc = f.m / (f.p * f.p) * (2.0 * f.p * x - x * x);
      dyc = 2.0 * f.m / (f.p * f.p) * (f.p - x);
    } else {
      yc = f.m / ((1.0 - f.p) * (1.0 - f.p)) * ((1.0 - 2.0 * f.p) + 2.0 * f.p * x - x * x);
      dyc = 2.0 * f.m / ((1.0 - f.p) * (1.0 - f.p)) * (f.p - x);
    }
  }
  const double theta = std::atan(dyc);
  return {x - sign * yt * std::sin(theta), yc + sign * yt * std::cos(theta)};
}

/// Closed profile loop, counter-clockwise: trailing edge, upper surface
/// (x decreasing), leading edge, lower surface (x increasing).  The leading
/// and trailing edges are placed exactly at (0,0) and (1,0).
std::vector<Vec2> foil_loop(const FoilParams& f) {
  std::vector<Vec2> loop;
  loop.emplace_back(1.0, 0.0);
  for (int k = f.n_half - 1; k >= 1; --k) {
    const double x = 0.5 * (1.0 - std::cos(kPi * k / f.n_half));
    loop.push_back(foil_point(f, x, +1));
  }
  loop.emplace_back(0.0, 0.0);
  for (int k = 1; k <= f.n_half - 1; ++k) {
    const double x = 0.5 * (1.0 - std::cos(kPi * k / f.n_half));
    loop.push_back(foil_point(f, x, -1));
  }
  return loop;
}

}  // namespace

Mesh2D synth_airfoil(double m, double p, double t, int n_boundary, double farfield_radius) {
  check_airfoil_params(m, p, t, n_boundary, farfield_radius);
  const FoilParams f{m, p, t, n_boundary / 2};
  const std::vector<Vec2> foil = foil_loop(f);
  const int nb = static_cast<int>(foil.size());
  const Vec2 center(0.5, 0.0);

  // Far-field node for profile node j at the angle given by j's normalized
  // arc-length position, so O-grid spokes stay roughly radial.
  std::vector<double> arc(static_cast<size_t>(nb) + 1, 0.0);
  for (int j = 0; j < nb; ++j)
    arc[static_cast<size_t>(j) + 1] =
        arc[static_cast<size_t>(j)] +
        (foil[static_cast<size_t>((j + 1) % nb)] - foil[static_cast<size_t>(j)]).norm();
  const double total = arc[static_cast<size_t>(nb)];

  // Geometric grading: first radial layer comparable to the profile spacing.
  const double h0 = total / nb;
  const double grow = 1.4;
  const int n_r = std::max(
      3, static_cast<int>(std::ceil(std::log1p(farfield_radius * (grow - 1.0) / h0) /
                                    std::log(grow))));
  const double denom = std::pow(grow, n_r) - 1.0;

  Mesh2D mesh;
  mesh.tag_names = kAirfoilTags;
  mesh.vertices = foil;
  for (int k = 1; k <= n_r; ++k) {
    const double sk = (std::pow(grow, k) - 1.0) / denom;
    for (int j = 0; j < nb; ++j) {
      const double psi = 2.0 * kPi * arc[static_cast<size_t>(j)] / total;
      const Vec2 far = center + farfield_radius * Vec2(std::cos(psi), std::sin(psi));
      mesh.vertices.push_back(k == n_r ? far : lerp(foil[static_cast<size_t>(j)], far, sk));
    }
  }

  auto rid = [&](int j, int k) { return k * nb + j; };
  for (int k = 0; k < n_r; ++k)
    for (int j = 0; j < nb; ++j) {
      const int p00 = rid(j, k), p10 = rid((j + 1) % nb, k);
      const int p01 = rid(j, k + 1), p11 = rid((j + 1) % nb, k + 1);
      mesh.triangles.push_back({p00, p11, p10});
      mesh.triangles.push_back({p00, p01, p11});
    }

  for (const auto& [a, b] : derive_boundary(mesh.triangles)) {
    int tag;
    if (a < nb && b < nb) {
      const int seg = ((std::min(a, b) + 1) % nb == std::max(a, b)) ? std::min(a, b)
                                                                    : std::max(a, b);
      tag = seg < f.n_half ? kUpper : kLower;
    } else {
      tag = kFarfield;
    }
    mesh.boundary_edges.push_back({a, b, tag});
  }

  mesh.tracked_points["trailing_edge"] = 0;
  mesh.tracked_points["leading_edge"] = f.n_half;

  validate(mesh);
  return mesh;
}

BoundaryPolyline airfoil_boundary(double m, double p, double t, int n_boundary,
                                  double farfield_radius) {
  check_airfoil_params(m, p, t, n_boundary, farfield_radius);
  const FoilParams f{m, p, t, n_boundary / 2};
  const std::vector<Vec2> ccw = foil_loop(f);
  const int nb = static_cast<int>(ccw.size());

  BoundaryPolyline poly;
  poly.tag_names = kAirfoilTags;

  // The profile is a hole of the flow domain: store it clockwise (domain on
  // the left), i.e. trailing edge, lower surface, leading edge, upper surface.
  PolylineLoop wing;
  for (int i = 0; i < nb; ++i) {
    wing.points.push_back(ccw[static_cast<size_t>((nb - i) % nb)]);
    wing.segment_tags.push_back(i < f.n_half ? kLower : kUpper);
  }
  poly.loops.push_back(std::move(wing));

  PolylineLoop far;
  const int nf = std::max(64, nb);
  for (int i = 0; i < nf; ++i) {
    const double psi = 2.0 * kPi * i / nf;
    far.points.push_back(Vec2(0.5, 0.0) + farfield_radius * Vec2(std::cos(psi), std::sin(psi)));
    far.segment_tags.push_back(kFarfield);
  }
  poly.loops.push_back(std::move(far));

  poly.tracked_points["trailing_edge"] = {1.0, 0.0};
  poly.tracked_points["leading_edge"] = {0.0, 0.0};
  return poly;
}

}  // namespace morphrom
