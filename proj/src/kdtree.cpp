#include "morphrom/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace morphrom {

PointKdTree::PointKdTree(std::vector<Eigen::Vector2d> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  std::vector<int> ids(points_.size());
  std::iota(ids.begin(), ids.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(ids, 0, static_cast<int>(ids.size()), 0);
}

int PointKdTree::build(std::vector<int>& ids, int begin, int end, int depth) {
  if (begin >= end) return -1;
  const unsigned char dim = static_cast<unsigned char>(depth % 2);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end,
                   [&](int a, int b) {
                     const double ca = points_[static_cast<size_t>(a)][dim];
                     const double cb = points_[static_cast<size_t>(b)][dim];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back({ids[static_cast<size_t>(mid)], -1, -1, dim});
  const int left = build(ids, begin, mid, depth + 1);
  const int right = build(ids, mid + 1, end, depth + 1);
  nodes_[static_cast<size_t>(node)].left = left;
  nodes_[static_cast<size_t>(node)].right = right;
  return node;
}

void PointKdTree::search_nearest(int node, const Eigen::Vector2d& q, int& best,
                                 double& best_d2) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<size_t>(node)];
  const Eigen::Vector2d& p = points_[static_cast<size_t>(n.point)];
  const double d2 = (p - q).squaredNorm();
  if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
    best_d2 = d2;
    best = n.point;
  }
  const double diff = q[n.dim] - p[n.dim];
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search_nearest(near, q, best, best_d2);
  if (diff * diff <= best_d2) search_nearest(far, q, best, best_d2);
}

std::pair<int, double> PointKdTree::nearest(const Eigen::Vector2d& query) const {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  search_nearest(root_, query, best, best_d2);
  return {best, best_d2};
}

void PointKdTree::collect_within(int node, const Eigen::Vector2d& q, double r2,
                                 std::vector<int>& out) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<size_t>(node)];
  const Eigen::Vector2d& p = points_[static_cast<size_t>(n.point)];
  if ((p - q).squaredNorm() <= r2) out.push_back(n.point);
  const double diff = q[n.dim] - p[n.dim];
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  collect_within(near, q, r2, out);
  if (diff * diff <= r2) collect_within(far, q, r2, out);
}

std::vector<int> PointKdTree::within(const Eigen::Vector2d& query, double radius) const {
  std::vector<int> out;
  collect_within(root_, query, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace morphrom
