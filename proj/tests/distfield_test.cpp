#include "morphrom/distfield.hpp"
#include "morphrom/kdtree.hpp"
#include "morphrom/random.hpp"

#include "doctest.h"
#include "test_helpers.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace morphrom;
using morphrom::testing::circle_polyline;
using morphrom::testing::unit_square_mesh;

namespace {

// Independent point-segment distance (clamped parameter form).
double segment_distance(const Vec2& q, const Vec2& a, const Vec2& b, Vec2* closest = nullptr) {
  const Vec2 ab = b - a;
  const double den = ab.squaredNorm();
  double t = den > 0.0 ? (q - a).dot(ab) / den : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 p = a + t * ab;
  if (closest) *closest = p;
  return (q - p).norm();
}

// Exhaustive scan over every segment of one tag (-1: all tags).
double brute_distance(const BoundaryPolyline& poly, const Vec2& q, int tag) {
  double best = std::numeric_limits<double>::infinity();
  for (const PolylineLoop& loop : poly.loops) {
    const size_t n = loop.points.size();
    for (size_t k = 0; k < n; ++k) {
      if (tag >= 0 && loop.segment_tags[k] != tag) continue;
      best = std::min(best, segment_distance(q, loop.points[k], loop.points[(k + 1) % n]));
    }
  }
  return best;
}

// Even-odd ray parity over all loops (true: inside the bounded region).
bool brute_inside(const BoundaryPolyline& poly, const Vec2& q) {
  bool inside = false;
  for (const PolylineLoop& loop : poly.loops) {
    const size_t n = loop.points.size();
    for (size_t k = 0; k < n; ++k) {
      const Vec2& a = loop.points[k];
      const Vec2& b = loop.points[(k + 1) % n];
      if ((a.y() > q.y()) != (b.y() > q.y()) &&
          q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x())
        inside = !inside;
    }
  }
  return inside;
}

}  // namespace

TEST_CASE("kd-tree nearest and radius queries match exhaustive scans") {
  std::mt19937_64 rng(31);
  std::vector<Vec2> points;
  for (int i = 0; i < 300; ++i) points.push_back({uniform(rng, -1, 1), uniform(rng, -1, 1)});
  const PointKdTree tree(points);

  for (int k = 0; k < 500; ++k) {
    const Vec2 q(uniform(rng, -1.2, 1.2), uniform(rng, -1.2, 1.2));
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < points.size(); ++i) {
      const double d2 = (points[i] - q).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(i);
      }
    }
    const auto [id, d2] = tree.nearest(q);
    CHECK(id == best);
    CHECK(d2 == doctest::Approx(best_d2).epsilon(1e-14));

    const double radius = 0.3;
    std::vector<int> expect;
    for (size_t i = 0; i < points.size(); ++i)
      if ((points[i] - q).norm() <= radius) expect.push_back(static_cast<int>(i));
    CHECK(tree.within(q, radius) == expect);
  }
}

TEST_CASE("projection returns exact closest points on hand cases") {
  const BoundaryPolyline square = boundary_polyline(unit_square_mesh());
  const BoundaryIndex index = build_index(square);
  const int top = tag_id(square.tag_names, "top");  // segment (1,1) -> (0,1)

  SUBCASE("foot of the perpendicular on the interior of a segment") {
    const VectorDistanceSample s = index.project({0.3, 1.7}, top);
    CHECK((s.projection - Vec2(0.3, 1.0)).norm() < 1e-15);
    CHECK(s.distance == doctest::Approx(0.7).epsilon(1e-15));
    CHECK((s.displacement - (s.projection - Vec2(0.3, 1.7))).norm() == 0.0);
  }
  SUBCASE("clamped to a segment endpoint") {
    const VectorDistanceSample s = index.project({2.0, 2.0}, top);
    CHECK((s.projection - Vec2(1.0, 1.0)).norm() < 1e-15);
    CHECK(s.distance == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }
  SUBCASE("queries only see the requested tag") {
    const VectorDistanceSample s = index.project({0.5, 0.1}, top);  // near the bottom side
    CHECK(s.distance == doctest::Approx(0.9).epsilon(1e-14));
  }
  SUBCASE("repeat queries are bitwise deterministic") {
    const VectorDistanceSample a = index.project({0.123, 4.567}, top);
    const VectorDistanceSample b = index.project({0.123, 4.567}, top);
    CHECK(a.projection.x() == b.projection.x());
    CHECK(a.projection.y() == b.projection.y());
    CHECK(a.distance == b.distance);
  }
}

TEST_CASE("projections and signed distance match brute force on random queries") {
  const BoundaryPolyline target = plate_boundary(0.35, 0.05);
  const BoundaryIndex index = build_index(target);
  std::mt19937_64 rng(99);

  for (int k = 0; k < 2000; ++k) {
    const Vec2 q(uniform(rng, -1.6, 1.6), uniform(rng, -1.6, 1.6));
    const int tag = k % index.n_tags();

    const VectorDistanceSample s = index.project(q, tag);
    const double expect = brute_distance(target, q, tag);
    CHECK(std::abs(s.distance - expect) <= 1e-12);
    // the reported projection itself attains the minimum
    CHECK(std::abs((s.projection - q).norm() - expect) <= 1e-12);

    const double sd = index.signed_distance(q);
    CHECK(std::abs(std::abs(sd) - brute_distance(target, q, -1)) <= 1e-12);
    if (std::abs(sd) > 1e-9) CHECK((sd < 0.0) == brute_inside(target, q));
  }
}

TEST_CASE("signed distance is exact at the center of a polygonal circle") {
  const int n = 64;
  const BoundaryIndex index = build_index(circle_polyline({0.0, 0.0}, 1.0, n));
  const double apothem = std::cos(std::numbers::pi / n);
  CHECK(index.signed_distance({0.0, 0.0}) == doctest::Approx(-apothem).epsilon(1e-14));
  CHECK(index.signed_distance({2.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("signed distance is 1-Lipschitz on sampled pairs") {
  const BoundaryPolyline target = plate_boundary(0.3, 0.04);
  const BoundaryIndex index = build_index(target);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 2000; ++k) {
    const Vec2 a(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5));
    const Vec2 b = a + Vec2(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
    CHECK(std::abs(index.signed_distance(a) - index.signed_distance(b)) <=
          (a - b).norm() + 1e-12);
  }
}

TEST_CASE("vector distance field samples every boundary vertex per incident tag") {
  Mesh2D mesh = unit_square_mesh();
  const BoundaryPolyline target = boundary_polyline(mesh);
  const BoundaryIndex index = build_index(target);
  const BoundaryField field = vector_distance_field(index, mesh, mesh.vertices);

  // every square vertex joins two tagged sides -> two samples each
  CHECK(field.samples.size() == 8);
  for (size_t i = 1; i < field.samples.size(); ++i) {
    const auto& prev = field.samples[i - 1];
    const auto& cur = field.samples[i];
    CHECK((prev.vertex < cur.vertex || (prev.vertex == cur.vertex && prev.tag < cur.tag)));
  }
  for (const VectorDistanceSample& s : field.samples) CHECK(s.distance <= 1e-14);

  const int bottom = tag_id(mesh.tag_names, "bottom");
  CHECK(field.find(0, bottom) >= 0);
  CHECK(field.find(0, tag_id(mesh.tag_names, "top")) == -1);
}

TEST_CASE("mismatch measures vanish on the identity and see displacements") {
  Mesh2D mesh = unit_square_mesh();
  const BoundaryIndex index = build_index(boundary_polyline(mesh));
  CHECK(delta1(index, mesh, mesh.vertices, BoundarySampling::nodes_only) <= 1e-14);
  CHECK(delta2(index, mesh, mesh.vertices, BoundarySampling::nodes_only) <= 1e-14);

  std::vector<Vec2> moved = mesh.vertices;
  moved[2] += Vec2(0.0, 0.25);  // push one corner outward
  CHECK(delta2(index, mesh, moved, BoundarySampling::nodes_only) ==
        doctest::Approx(0.25).epsilon(1e-12));
  // the edge-interior sampling sees at least the nodal mismatch
  CHECK(delta2(index, mesh, moved, BoundarySampling::nodes_plus_9) >=
        delta2(index, mesh, moved, BoundarySampling::nodes_only) - 1e-14);
}

TEST_CASE("distance query counter increments") {
  const BoundaryIndex index = build_index(circle_polyline({0, 0}, 1.0, 16));
  counters::reset_distance_queries();
  (void)index.signed_distance({0.5, 0.5});
  (void)index.project({0.5, 0.5}, 0);
  CHECK(counters::distance_queries() == 2);
}
