#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace morphrom {

/// Static 2-D point kd-tree with exact nearest-neighbour and radius queries.
/// Ties are broken towards the smallest point id, so queries are fully
/// deterministic.  Immutable after construction; thread-safe for reads.
class PointKdTree {
public:
  explicit PointKdTree(std::vector<Eigen::Vector2d> points);

  bool empty() const { return nodes_.empty(); }

  /// Id of the closest point and its squared distance.
  std::pair<int, double> nearest(const Eigen::Vector2d& query) const;

  /// Ids of all points with distance <= radius, in ascending order.
  std::vector<int> within(const Eigen::Vector2d& query, double radius) const;

private:
  struct Node {
    int point = -1;        ///< original point id
    int left = -1;
    int right = -1;
    unsigned char dim = 0; ///< split dimension at this node
  };

  int build(std::vector<int>& ids, int begin, int end, int depth);
  void search_nearest(int node, const Eigen::Vector2d& q, int& best, double& best_d2) const;
  void collect_within(int node, const Eigen::Vector2d& q, double r2, std::vector<int>& out) const;

  std::vector<Eigen::Vector2d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace morphrom
