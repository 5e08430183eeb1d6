#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tendonforge/mesh.hpp"
#include "tendonforge/types.hpp"

namespace tendonforge {

// Static kd-tree over 3D points. Built once, queried many times.
class KdTree3 {
 public:
  explicit KdTree3(std::vector<Vec3> points);

  // Index of the stored point closest to `query` (Euclidean). Ties resolve to
  // the lowest index. The tree is never empty.
  int nearest(const Vec3& query) const;

  int size() const { return static_cast<int>(points_.size()); }
  const Vec3& point(int i) const { return points_[i]; }

 private:
  struct Node {
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
    int split_dim = 0;
    double split_val = 0.0;
  };

  int build(int begin, int end, int depth);
  void search(int node, const Vec3& query, int& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;  // permutation of point indices, partitioned by node
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Assignment of space to named bones by nearest mesh vertex.
class BoneIndex {
 public:
  // Bones are sorted by name internally so results do not depend on input
  // order. Duplicate names are rejected.
  explicit BoneIndex(const std::vector<TriMesh>& bones);

  struct Hit {
    std::string bone;
    double distance = 0.0;
  };

  // Bone owning the globally nearest vertex. Equidistant vertices resolve to
  // the lexicographically smallest bone name.
  Hit closest(const Vec3& query) const;

  // Just the bone name of closest().
  const std::string& bone_at(const Vec3& query) const;

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;     // sorted
  std::vector<int> vertex_bone_;       // per tree point: index into names_
  std::unique_ptr<KdTree3> tree_;
};

inline BoneIndex build_bone_index(const std::vector<TriMesh>& skeleton) {
  return BoneIndex(skeleton);
}

}  // namespace tendonforge
