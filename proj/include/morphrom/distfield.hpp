#pragma once

#include "morphrom/kdtree.hpp"
#include "morphrom/mesh.hpp"

#include <cstdint>
#include <vector>

/// Exact distance queries against a tagged target boundary: per-tag closest
/// point projections (the vector distance field), the signed distance to the
/// full boundary, and the boundary mismatch measures used as morphing
/// stopping criteria.
namespace morphrom {

/// Closest-point projection of one query point onto the target lines of one tag.
struct VectorDistanceSample {
  int vertex = -1;      ///< source mesh vertex id (-1 for free queries)
  int tag = -1;         ///< source mesh tag id of the sample
  Vec2 query;           ///< query (current boundary) position
  Vec2 projection;      ///< closest point on the matching target lines
  Vec2 displacement;    ///< projection - query
  double distance = 0.0;
};

/// How boundary mismatch is sampled: mesh boundary vertices only, or
/// additionally 9 uniform interior points per boundary edge.
enum class BoundarySampling { nodes_only, nodes_plus_9 };

/// Spatial index over a tagged target boundary.  Projections are exact: a
/// kd-tree over segment endpoints prunes to a candidate set that provably
/// contains every segment that can attain the minimum, and distance ties are
/// broken towards the smallest segment id and parameter.  Immutable and
/// thread-safe for reads.
class BoundaryIndex {
public:
  explicit BoundaryIndex(BoundaryPolyline target);

  const BoundaryPolyline& target() const { return target_; }

  /// Closest point on the segments carrying `tag` (index tag id).
  VectorDistanceSample project(const Vec2& query, int tag) const;

  /// Distance to the whole boundary, negative inside the target domain
  /// (winding number of the oriented loops).
  double signed_distance(const Vec2& query) const;

  /// Index tag id for a mesh tag table (throws MeshError if a name is missing).
  std::vector<int> map_tags(const std::vector<std::string>& mesh_tags) const;

  int n_tags() const { return static_cast<int>(target_.tag_names.size()); }

private:
  struct Segment {
    Vec2 a, b;
    int tag = -1;
  };
  struct TagIndex {
    std::vector<int> segments;   ///< flat segment ids carrying this tag
    std::vector<int> endpoint_segment;  ///< kd point id -> flat segment id
    PointKdTree tree{{}};
    double max_length = 0.0;
  };

  VectorDistanceSample project_on(const TagIndex& idx, const Vec2& query) const;

  BoundaryPolyline target_;
  std::vector<Segment> segments_;
  std::vector<TagIndex> per_tag_;
  TagIndex all_;
};

/// Convenience constructor matching the module surface.
BoundaryIndex build_index(const BoundaryPolyline& target);

/// Per-(vertex, tag) closest-point samples of the mesh boundary at the given
/// positions; one sample per incident tag at tag-junction vertices.  Samples
/// are sorted by (vertex, tag).
struct BoundaryField {
  std::vector<VectorDistanceSample> samples;

  /// Sample index for (vertex, mesh tag id), or -1.
  int find(int vertex, int tag) const;
};

BoundaryField vector_distance_field(const BoundaryIndex& index, const Mesh2D& mesh,
                                    std::span<const Vec2> positions);

/// Sup of |signed distance| over the sampled mesh boundary.
double delta1(const BoundaryIndex& index, const Mesh2D& mesh, std::span<const Vec2> positions,
              BoundarySampling sampling);

/// Sup of the vector-distance norm over the sampled mesh boundary (per-tag
/// projections).
double delta2(const BoundaryIndex& index, const Mesh2D& mesh, std::span<const Vec2> positions,
              BoundarySampling sampling);

namespace counters {
/// Number of distance queries (project / signed_distance calls) so far.
uint64_t distance_queries();
void reset_distance_queries();
}  // namespace counters

}  // namespace morphrom
