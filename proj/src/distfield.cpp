#include "morphrom/distfield.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace morphrom {

namespace {
std::atomic<uint64_t> g_distance_queries{0};
}

namespace counters {
uint64_t distance_queries() { return g_distance_queries.load(); }
void reset_distance_queries() { g_distance_queries.store(0); }
}  // namespace counters

BoundaryIndex::BoundaryIndex(BoundaryPolyline target) : target_(std::move(target)) {
  if (target_.loops.empty()) throw MeshError("distance index needs a non-empty target boundary");
  for (const PolylineLoop& loop : target_.loops) {
    const size_t n = loop.points.size();
    if (n < 3 || loop.segment_tags.size() != n)
      throw MeshError("target loop needs n>=3 points and one tag per segment");
    for (size_t k = 0; k < n; ++k) {
      Segment s{loop.points[k], loop.points[(k + 1) % n], loop.segment_tags[k]};
      if (!((s.b - s.a).squaredNorm() > 0.0))
        throw MeshError("target boundary has a zero-length segment");
      if (s.tag < 0 || s.tag >= n_tags())
        throw MeshError("target boundary has an out-of-range segment tag");
      segments_.push_back(s);
    }
  }

  auto build_tag_index = [&](TagIndex& idx, int tag) {
    std::vector<Vec2> endpoints;
    for (int sid = 0; sid < static_cast<int>(segments_.size()); ++sid) {
      const Segment& s = segments_[static_cast<size_t>(sid)];
      if (tag >= 0 && s.tag != tag) continue;
      idx.segments.push_back(sid);
      idx.max_length = std::max(idx.max_length, (s.b - s.a).norm());
      endpoints.push_back(s.a);
      endpoints.push_back(s.b);
      idx.endpoint_segment.push_back(sid);
      idx.endpoint_segment.push_back(sid);
    }
    idx.tree = PointKdTree(std::move(endpoints));
  };

  per_tag_.resize(static_cast<size_t>(n_tags()));
  for (int tag = 0; tag < n_tags(); ++tag) build_tag_index(per_tag_[static_cast<size_t>(tag)], tag);
  build_tag_index(all_, -1);
}

BoundaryIndex build_index(const BoundaryPolyline& target) { return BoundaryIndex(target); }

VectorDistanceSample BoundaryIndex::project_on(const TagIndex& idx, const Vec2& query) const {
  g_distance_queries.fetch_add(1, std::memory_order_relaxed);
  if (idx.segments.empty()) throw MeshError("projection target has no segments");

  // The nearest endpoint bounds the minimum from above; every segment that
  // could attain the minimum has an endpoint within that bound plus the
  // longest segment length, so the radius query below is exhaustive.
  const auto [near_pt, near_d2] = idx.tree.nearest(query);
  (void)near_pt;
  const double radius = std::sqrt(near_d2) + idx.max_length;
  std::vector<int> candidates;
  for (int pt : idx.tree.within(query, radius))
    candidates.push_back(idx.endpoint_segment[static_cast<size_t>(pt)]);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  VectorDistanceSample best;
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_sid = -1;
  double best_param = 0.0;
  for (int sid : candidates) {
    const Segment& s = segments_[static_cast<size_t>(sid)];
    const Vec2 ab = s.b - s.a;
    const double param = std::clamp(ab.dot(query - s.a) / ab.squaredNorm(), 0.0, 1.0);
    const Vec2 foot = s.a + param * ab;
    const double d2 = (foot - query).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && (sid < best_sid || (sid == best_sid && param < best_param)))) {
      best_d2 = d2;
      best_sid = sid;
      best_param = param;
      best.projection = foot;
    }
  }
  best.query = query;
  best.displacement = best.projection - query;
  best.distance = std::sqrt(best_d2);
  return best;
}

VectorDistanceSample BoundaryIndex::project(const Vec2& query, int tag) const {
  if (tag < 0 || tag >= n_tags()) throw MeshError("projection tag id out of range");
  VectorDistanceSample s = project_on(per_tag_[static_cast<size_t>(tag)], query);
  s.tag = tag;
  return s;
}

double BoundaryIndex::signed_distance(const Vec2& query) const {
  const VectorDistanceSample s = project_on(all_, query);

  // Winding number of the oriented loops (outer loops counter-clockwise,
  // holes clockwise): nonzero means the query lies inside the target domain.
  int winding = 0;
  for (const PolylineLoop& loop : target_.loops) {
    const size_t n = loop.points.size();
    for (size_t k = 0; k < n; ++k) {
      const Vec2& a = loop.points[k];
      const Vec2& b = loop.points[(k + 1) % n];
      const double side = (b.x() - a.x()) * (query.y() - a.y()) -
                          (query.x() - a.x()) * (b.y() - a.y());
      if (a.y() <= query.y()) {
        if (b.y() > query.y() && side > 0.0) ++winding;
      } else {
        if (b.y() <= query.y() && side < 0.0) --winding;
      }
    }
  }
  return winding != 0 ? -s.distance : s.distance;
}

std::vector<int> BoundaryIndex::map_tags(const std::vector<std::string>& mesh_tags) const {
  std::vector<int> map(mesh_tags.size(), -1);
  for (size_t i = 0; i < mesh_tags.size(); ++i)
    map[i] = tag_id(target_.tag_names, mesh_tags[i]);
  return map;
}

int BoundaryField::find(int vertex, int tag) const {
  auto it = std::lower_bound(samples.begin(), samples.end(), std::make_pair(vertex, tag),
                             [](const VectorDistanceSample& s, const std::pair<int, int>& key) {
                               return s.vertex < key.first ||
                                      (s.vertex == key.first && s.tag < key.second);
                             });
  if (it == samples.end() || it->vertex != vertex || it->tag != tag) return -1;
  return static_cast<int>(it - samples.begin());
}

BoundaryField vector_distance_field(const BoundaryIndex& index, const Mesh2D& mesh,
                                    std::span<const Vec2> positions) {
  const std::vector<int> tag_map = index.map_tags(mesh.tag_names);

  std::vector<std::pair<int, int>> keys;  // (vertex, mesh tag)
  for (const BoundaryEdge& e : mesh.boundary_edges) {
    keys.emplace_back(e.a, e.tag);
    keys.emplace_back(e.b, e.tag);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  BoundaryField field;
  field.samples.reserve(keys.size());
  for (const auto& [vertex, tag] : keys) {
    VectorDistanceSample s =
        index.project(positions[static_cast<size_t>(vertex)], tag_map[static_cast<size_t>(tag)]);
    s.vertex = vertex;
    s.tag = tag;
    field.samples.push_back(s);
  }
  return field;
}

double delta2(const BoundaryIndex& index, const Mesh2D& mesh, std::span<const Vec2> positions,
              BoundarySampling sampling) {
  const BoundaryField field = vector_distance_field(index, mesh, positions);
  double sup = 0.0;
  for (const VectorDistanceSample& s : field.samples) sup = std::max(sup, s.distance);
  if (sampling == BoundarySampling::nodes_plus_9) {
    const std::vector<int> tag_map = index.map_tags(mesh.tag_names);
    for (const BoundaryEdge& e : mesh.boundary_edges) {
      const Vec2& a = positions[static_cast<size_t>(e.a)];
      const Vec2& b = positions[static_cast<size_t>(e.b)];
      for (int i = 1; i <= 9; ++i) {
        const Vec2 q = a + (static_cast<double>(i) / 10.0) * (b - a);
        sup = std::max(sup, index.project(q, tag_map[static_cast<size_t>(e.tag)]).distance);
      }
    }
  }
  return sup;
}

double delta1(const BoundaryIndex& index, const Mesh2D& mesh, std::span<const Vec2> positions,
              BoundarySampling sampling) {
  std::vector<int> vertices;
  for (const BoundaryEdge& e : mesh.boundary_edges) {
    vertices.push_back(e.a);
    vertices.push_back(e.b);
  }
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());

  double sup = 0.0;
  for (int v : vertices)
    sup = std::max(sup, std::abs(index.signed_distance(positions[static_cast<size_t>(v)])));
  if (sampling == BoundarySampling::nodes_plus_9) {
    for (const BoundaryEdge& e : mesh.boundary_edges) {
      const Vec2& a = positions[static_cast<size_t>(e.a)];
      const Vec2& b = positions[static_cast<size_t>(e.b)];
      for (int i = 1; i <= 9; ++i) {
        const Vec2 q = a + (static_cast<double>(i) / 10.0) * (b - a);
        sup = std::max(sup, std::abs(index.signed_distance(q)));
      }
    }
  }
  return sup;
}

}  // namespace morphrom
