#include "morphrom/mesh.hpp"

#include "morphrom/logging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace morphrom {

namespace {

std::string entity(const char* kind, int id) {
  return std::string(kind) + " " + std::to_string(id);
}

/// Key for an undirected edge.
uint64_t ukey(int a, int b) {
  const uint64_t lo = static_cast<uint32_t>(std::min(a, b));
  const uint64_t hi = static_cast<uint32_t>(std::max(a, b));
  return (hi << 32) | lo;
}

/// Key for a directed edge.
uint64_t dkey(int a, int b) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
         static_cast<uint32_t>(b);
}

}  // namespace

double triangle_area(const Mesh2D& mesh, std::span<const Vec2> positions, int t) {
  const auto& tri = mesh.triangles[static_cast<size_t>(t)];
  const Vec2& a = positions[static_cast<size_t>(tri[0])];
  const Vec2& b = positions[static_cast<size_t>(tri[1])];
  const Vec2& c = positions[static_cast<size_t>(tri[2])];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double total_area(const Mesh2D& mesh, std::span<const Vec2> positions) {
  double sum = 0.0;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
    sum += triangle_area(mesh, positions, t);
  return sum;
}

bool all_areas_positive(const Mesh2D& mesh, std::span<const Vec2> positions, double floor) {
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
    if (!(triangle_area(mesh, positions, t) > floor)) return false;
  return true;
}

int tag_id(const std::vector<std::string>& tag_names, const std::string& name) {
  for (int i = 0; i < static_cast<int>(tag_names.size()); ++i)
    if (tag_names[static_cast<size_t>(i)] == name) return i;
  throw MeshError("unknown boundary tag '" + name + "'");
}

void validate(Mesh2D& mesh) {
  const int nv = static_cast<int>(mesh.vertices.size());
  const int nt = static_cast<int>(mesh.triangles.size());
  if (nv == 0) throw MeshError("mesh has no vertices");
  if (nt == 0) throw MeshError("mesh has no triangles");

  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    for (int k = 0; k < 3; ++k)
      if (tri[static_cast<size_t>(k)] < 0 || tri[static_cast<size_t>(k)] >= nv)
        throw MeshError("dangling vertex index in " + entity("triangle", t));
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError("repeated vertex in " + entity("triangle", t));
    if (!(triangle_area(mesh, mesh.vertices, t) > 0.0))
      throw MeshError("non-positive signed area in " + entity("triangle", t));
  }

  // Edge incidence: boundary edges are exactly the single-incidence edges,
  // directed as their unique triangle traverses them.
  std::unordered_map<uint64_t, int> incidence;    // undirected -> #triangles
  std::unordered_map<uint64_t, int> traversal;    // directed   -> triangle id
  incidence.reserve(static_cast<size_t>(nt) * 3);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[static_cast<size_t>(k)];
      const int b = tri[static_cast<size_t>((k + 1) % 3)];
      if (++incidence[ukey(a, b)] > 2)
        throw MeshError("non-manifold edge at " + entity("triangle", t));
      if (!traversal.emplace(dkey(a, b), t).second)
        throw MeshError("inconsistent orientation at " + entity("triangle", t));
    }
  }

  const int nbe = static_cast<int>(mesh.boundary_edges.size());
  std::set<uint64_t> declared;
  for (int e = 0; e < nbe; ++e) {
    const BoundaryEdge& be = mesh.boundary_edges[static_cast<size_t>(e)];
    if (be.a < 0 || be.a >= nv || be.b < 0 || be.b >= nv)
      throw MeshError("dangling vertex index in " + entity("boundary edge", e));
    if (be.tag < 0 || be.tag >= static_cast<int>(mesh.tag_names.size()))
      throw MeshError("untagged " + entity("boundary edge", e));
    auto inc = incidence.find(ukey(be.a, be.b));
    if (inc == incidence.end() || inc->second != 1)
      throw MeshError(entity("boundary edge", e) + " is not a single-incidence mesh edge");
    if (traversal.find(dkey(be.a, be.b)) == traversal.end())
      throw MeshError(entity("boundary edge", e) + " opposes its triangle orientation");
    if (!declared.insert(ukey(be.a, be.b)).second)
      throw MeshError("duplicate " + entity("boundary edge", e));
  }
  for (const auto& [key, count] : incidence) {
    if (count == 1 && declared.find(key) == declared.end())
      throw MeshError("untagged boundary edge between vertices " +
                      std::to_string(static_cast<int>(key & 0xffffffffu)) + " and " +
                      std::to_string(static_cast<int>(key >> 32)));
  }

  // Loop extraction: every boundary vertex must have exactly one outgoing and
  // one incoming boundary edge, so the edges decompose into simple cycles.
  std::unordered_map<int, int> out_edge;  // vertex -> boundary edge id
  std::unordered_map<int, int> in_count;
  for (int e = 0; e < nbe; ++e) {
    const BoundaryEdge& be = mesh.boundary_edges[static_cast<size_t>(e)];
    if (!out_edge.emplace(be.a, e).second)
      throw MeshError("boundary is not a simple loop at " + entity("vertex", be.a));
    if (++in_count[be.b] > 1)
      throw MeshError("boundary is not a simple loop at " + entity("vertex", be.b));
  }

  mesh.loops.clear();
  std::vector<char> visited(static_cast<size_t>(nbe), 0);
  for (int e0 = 0; e0 < nbe; ++e0) {
    if (visited[static_cast<size_t>(e0)]) continue;
    BoundaryLoop loop;
    int e = e0;
    while (!visited[static_cast<size_t>(e)]) {
      visited[static_cast<size_t>(e)] = 1;
      const BoundaryEdge& be = mesh.boundary_edges[static_cast<size_t>(e)];
      loop.vertices.push_back(be.a);
      loop.edge_ids.push_back(e);
      auto next = out_edge.find(be.b);
      if (next == out_edge.end())
        throw MeshError("open boundary loop at " + entity("vertex", be.b));
      e = next->second;
    }
    if (e != e0) throw MeshError("boundary loops are tangled at " + entity("edge", e0));
    mesh.loops.push_back(std::move(loop));
  }

  for (const auto& [name, v] : mesh.tracked_points) {
    if (v < 0 || v >= nv)
      throw MeshError("tracked point '" + name + "' has a dangling vertex index");
    if (out_edge.find(v) == out_edge.end())
      throw MeshError("tracked point '" + name + "' is not a boundary vertex");
  }
}

BoundaryPolyline boundary_polyline(const Mesh2D& mesh, std::span<const Vec2> positions) {
  BoundaryPolyline poly;
  poly.tag_names = mesh.tag_names;
  for (const BoundaryLoop& loop : mesh.loops) {
    PolylineLoop out;
    out.points.reserve(loop.vertices.size());
    out.segment_tags.reserve(loop.vertices.size());
    for (size_t k = 0; k < loop.vertices.size(); ++k) {
      out.points.push_back(positions[static_cast<size_t>(loop.vertices[k])]);
      out.segment_tags.push_back(mesh.boundary_edges[static_cast<size_t>(loop.edge_ids[k])].tag);
    }
    poly.loops.push_back(std::move(out));
  }
  for (const auto& [name, v] : mesh.tracked_points)
    poly.tracked_points[name] = positions[static_cast<size_t>(v)];
  return poly;
}

BoundaryPolyline boundary_polyline(const Mesh2D& mesh) {
  return boundary_polyline(mesh, mesh.vertices);
}

double polyline_length(const BoundaryPolyline& poly) {
  double len = 0.0;
  for (const PolylineLoop& loop : poly.loops) {
    const size_t n = loop.points.size();
    for (size_t k = 0; k < n; ++k) len += (loop.points[(k + 1) % n] - loop.points[k]).norm();
  }
  return len;
}

double loop_area(const PolylineLoop& loop) {
  const size_t n = loop.points.size();
  double twice = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const Vec2& p = loop.points[k];
    const Vec2& q = loop.points[(k + 1) % n];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

double mesh_diameter(std::span<const Vec2> positions) {
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const Vec2& p : positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

Eigen::VectorXd pack_positions(std::span<const Vec2> positions) {
  Eigen::VectorXd out(2 * static_cast<Eigen::Index>(positions.size()));
  for (size_t i = 0; i < positions.size(); ++i) {
    out[2 * static_cast<Eigen::Index>(i)] = positions[i].x();
    out[2 * static_cast<Eigen::Index>(i) + 1] = positions[i].y();
  }
  return out;
}

std::vector<Vec2> unpack_positions(const Eigen::VectorXd& packed) {
  std::vector<Vec2> out(static_cast<size_t>(packed.size() / 2));
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = Vec2(packed[2 * static_cast<Eigen::Index>(i)],
                  packed[2 * static_cast<Eigen::Index>(i) + 1]);
  return out;
}

std::vector<Vec2> displace(std::span<const Vec2> positions, const Eigen::VectorXd& u) {
  std::vector<Vec2> out(positions.begin(), positions.end());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i].x() += u[2 * static_cast<Eigen::Index>(i)];
    out[i].y() += u[2 * static_cast<Eigen::Index>(i) + 1];
  }
  return out;
}

QualityReport shape_regularity(const Mesh2D& mesh, std::span<const Vec2> positions,
                               std::span<const int> mask) {
  std::vector<int> elements;
  if (mask.empty()) {
    elements.resize(mesh.triangles.size());
    for (size_t t = 0; t < elements.size(); ++t) elements[t] = static_cast<int>(t);
  } else {
    elements.assign(mask.begin(), mask.end());
    for (int t : elements)
      if (t < 0 || t >= static_cast<int>(mesh.triangles.size()))
        throw MeshError("quality mask references missing " + entity("triangle", t));
  }
  if (elements.empty()) throw MeshError("empty element selection");

  QualityReport report;
  report.elements = std::move(elements);
  report.ratios.resize(static_cast<Eigen::Index>(report.elements.size()));
  report.max_ratio = 0.0;
  for (size_t k = 0; k < report.elements.size(); ++k) {
    const auto& tri = mesh.triangles[static_cast<size_t>(report.elements[k])];
    const Vec2& a = positions[static_cast<size_t>(tri[0])];
    const Vec2& b = positions[static_cast<size_t>(tri[1])];
    const Vec2& c = positions[static_cast<size_t>(tri[2])];
    const double e0 = (b - a).norm(), e1 = (c - b).norm(), e2 = (a - c).norm();
    const double longest = std::max({e0, e1, e2});
    const double shortest = std::min({e0, e1, e2});
    const double ratio = shortest > 0.0 ? longest / shortest
                                        : std::numeric_limits<double>::infinity();
    report.ratios[static_cast<Eigen::Index>(k)] = ratio;
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.worst_element = report.elements[k];
    }
  }
  return report;
}

QualityReport shape_regularity(const Mesh2D& mesh) {
  return shape_regularity(mesh, mesh.vertices, {});
}

namespace {

/// Uniform-grid triangle locator for P1 interpolation queries.
class TriangleLocator {
public:
  TriangleLocator(const Mesh2D& mesh, std::span<const Vec2> positions)
      : mesh_(mesh), positions_(positions) {
    lo_ = Vec2::Constant(std::numeric_limits<double>::infinity());
    hi_ = -lo_;
    for (const Vec2& p : positions) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const int target = std::clamp(
        static_cast<int>(std::ceil(std::sqrt(static_cast<double>(mesh.triangles.size())))), 1, 512);
    nx_ = ny_ = target;
    cell_ = Vec2((hi_.x() - lo_.x()) / nx_, (hi_.y() - lo_.y()) / ny_);
    cell_ = cell_.cwiseMax(Vec2::Constant(1e-300));
    cells_.resize(static_cast<size_t>(nx_) * static_cast<size_t>(ny_));
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
      const auto& tri = mesh.triangles[static_cast<size_t>(t)];
      Vec2 tlo = positions[static_cast<size_t>(tri[0])], thi = tlo;
      for (int k = 1; k < 3; ++k) {
        tlo = tlo.cwiseMin(positions[static_cast<size_t>(tri[static_cast<size_t>(k)])]);
        thi = thi.cwiseMax(positions[static_cast<size_t>(tri[static_cast<size_t>(k)])]);
      }
      const auto [i0, j0] = cell_of(tlo);
      const auto [i1, j1] = cell_of(thi);
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i)
          cells_[static_cast<size_t>(j) * static_cast<size_t>(nx_) + static_cast<size_t>(i)]
              .push_back(t);
    }
  }

  /// Barycentric coordinates of p in triangle t (unclamped).
  Eigen::Vector3d barycentric(int t, const Vec2& p) const {
    const auto& tri = mesh_.triangles[static_cast<size_t>(t)];
    const Vec2& a = positions_[static_cast<size_t>(tri[0])];
    const Vec2& b = positions_[static_cast<size_t>(tri[1])];
    const Vec2& c = positions_[static_cast<size_t>(tri[2])];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    const double l1 = ((p.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (p.y() - a.y())) / det;
    const double l2 = ((b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y())) / det;
    return {1.0 - l1 - l2, l1, l2};
  }

  /// Containing triangle (tolerance on barycentric coordinates), or -1.
  int find_containing(const Vec2& p, double tol) const {
    const auto [i, j] = cell_of(p);
    int best = -1;
    for (int t : cells_[static_cast<size_t>(j) * static_cast<size_t>(nx_) + static_cast<size_t>(i)]) {
      const Eigen::Vector3d l = barycentric(t, p);
      if (l.minCoeff() >= -tol && (best == -1 || t < best)) best = t;
    }
    return best;
  }

  /// Nearest triangle by point-to-element distance (ring search).
  std::pair<int, double> find_nearest(const Vec2& p) const {
    const auto [ci, cj] = cell_of(p);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring < std::max(nx_, ny_); ++ring) {
      std::vector<int> candidates;
      for (int j = cj - ring; j <= cj + ring; ++j) {
        if (j < 0 || j >= ny_) continue;
        for (int i = ci - ring; i <= ci + ring; ++i) {
          if (i < 0 || i >= nx_) continue;
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) continue;
          const auto& cell =
              cells_[static_cast<size_t>(j) * static_cast<size_t>(nx_) + static_cast<size_t>(i)];
          candidates.insert(candidates.end(), cell.begin(), cell.end());
        }
      }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
      for (int t : candidates) {
        const double d = distance_to_triangle(t, p);
        if (d < best_d) {
          best_d = d;
          best = t;
        }
      }
      // Cells farther than (ring-1) layers cannot beat the current best.
      const double guaranteed = (ring - 1) * std::min(cell_.x(), cell_.y());
      if (best != -1 && guaranteed > best_d) break;
    }
    return {best, best_d};
  }

  double distance_to_triangle(int t, const Vec2& p) const {
    if (barycentric(t, p).minCoeff() >= 0.0) return 0.0;
    const auto& tri = mesh_.triangles[static_cast<size_t>(t)];
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      const Vec2& a = positions_[static_cast<size_t>(tri[static_cast<size_t>(k)])];
      const Vec2& b = positions_[static_cast<size_t>(tri[static_cast<size_t>((k + 1) % 3)])];
      const Vec2 ab = b - a;
      const double s = std::clamp(ab.dot(p - a) / ab.squaredNorm(), 0.0, 1.0);
      best = std::min(best, (a + s * ab - p).norm());
    }
    return best;
  }

private:
  std::pair<int, int> cell_of(const Vec2& p) const {
    const int i = std::clamp(static_cast<int>((p.x() - lo_.x()) / cell_.x()), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>((p.y() - lo_.y()) / cell_.y()), 0, ny_ - 1);
    return {i, j};
  }

  const Mesh2D& mesh_;
  std::span<const Vec2> positions_;
  Vec2 lo_, hi_, cell_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> cells_;
};

}  // namespace

InterpolatedField interpolate_morphing(const Mesh2D& coarse,
                                       const Eigen::VectorXd& coarse_displacement,
                                       const Mesh2D& fine, double snap_tolerance) {
  if (coarse_displacement.size() != 2 * static_cast<Eigen::Index>(coarse.vertices.size()))
    throw MeshError("displacement length does not match the coarse mesh");

  const TriangleLocator locator(coarse, coarse.vertices);
  const double tol = 1e-12 * std::max(1.0, mesh_diameter(coarse.vertices));

  InterpolatedField field;
  field.values.resize(2 * static_cast<Eigen::Index>(fine.vertices.size()));
  for (int v = 0; v < static_cast<int>(fine.vertices.size()); ++v) {
    const Vec2& p = fine.vertices[static_cast<size_t>(v)];
    int t = locator.find_containing(p, tol);
    Eigen::Vector3d lambda;
    if (t >= 0) {
      lambda = locator.barycentric(t, p);
    } else {
      const auto [nearest, dist] = locator.find_nearest(p);
      if (nearest < 0 || dist > snap_tolerance)
        throw MeshError(entity("vertex", v) + " of the fine mesh lies " +
                        std::to_string(dist) + " from the coarse domain (tolerance " +
                        std::to_string(snap_tolerance) + ")");
      // Linear extension of the nearest triangle's P1 field: the unclamped
      // barycentric weights keep affine displacements exact outside.
      t = nearest;
      lambda = locator.barycentric(t, p);
      ++field.outside_snapped;
    }
    const auto& tri = coarse.triangles[static_cast<size_t>(t)];
    Vec2 u = Vec2::Zero();
    for (int k = 0; k < 3; ++k) {
      const Eigen::Index base = 2 * static_cast<Eigen::Index>(tri[static_cast<size_t>(k)]);
      u.x() += lambda[k] * coarse_displacement[base];
      u.y() += lambda[k] * coarse_displacement[base + 1];
    }
    field.values[2 * static_cast<Eigen::Index>(v)] = u.x();
    field.values[2 * static_cast<Eigen::Index>(v) + 1] = u.y();
  }

  field.displaced_positive = all_areas_positive(fine, displace(fine.vertices, field.values));
  if (!field.displaced_positive)
    log::info("interpolate_morphing: displaced fine mesh has non-positive elements");
  return field;
}

}  // namespace morphrom
