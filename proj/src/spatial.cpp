#include "tendonforge/spatial.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace tendonforge {

namespace {
constexpr int kLeafSize = 8;
}

KdTree3::KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw InputError("kd-tree needs at least one point");
  for (const auto& p : points_)
    if (!p.allFinite()) throw InputError("kd-tree point is not finite");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / kLeafSize + 4);
  root_ = build(0, static_cast<int>(points_.size()), 0);
}

int KdTree3::build(int begin, int end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  int me = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return me;

  // Split along the widest dimension of the range's bounding box.
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int dim = 0;
  (hi - lo).maxCoeff(&dim);
  if (hi[dim] - lo[dim] <= 0.0) return me;  // all points coincide: stay a leaf

  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     if (points_[a][dim] != points_[b][dim])
                       return points_[a][dim] < points_[b][dim];
                     return a < b;
                   });
  nodes_[me].split_dim = dim;
  nodes_[me].split_val = points_[order_[mid]][dim];
  int left = build(begin, mid, depth + 1);
  int right = build(mid, end, depth + 1);
  nodes_[me].left = left;
  nodes_[me].right = right;
  return me;
}

void KdTree3::search(int node_idx, const Vec3& query, int& best,
                     double& best_d2) const {
  const Node& node = nodes_[node_idx];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      int idx = order_[i];
      double d2 = (points_[idx] - query).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  double diff = query[node.split_dim] - node.split_val;
  int near = diff < 0.0 ? node.left : node.right;
  int far = diff < 0.0 ? node.right : node.left;
  search(near, query, best, best_d2);
  // <= keeps equidistant points reachable so the lowest-index tie rule holds.
  if (diff * diff <= best_d2) search(far, query, best, best_d2);
}

int KdTree3::nearest(const Vec3& query) const {
  int best = size();  // past-the-end so any real index wins the first tie
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, best, best_d2);
  return best;
}

BoneIndex::BoneIndex(const std::vector<TriMesh>& bones) {
  if (bones.empty()) throw InputError("bone index needs at least one bone");
  std::vector<int> by_name(bones.size());
  std::iota(by_name.begin(), by_name.end(), 0);
  std::sort(by_name.begin(), by_name.end(), [&](int a, int b) {
    return bones[a].name < bones[b].name;
  });
  for (size_t i = 1; i < by_name.size(); ++i)
    if (bones[by_name[i - 1]].name == bones[by_name[i]].name)
      throw InputError("duplicate bone name: " + bones[by_name[i]].name);

  std::vector<Vec3> points;
  for (int which : by_name) {
    const TriMesh& bone = bones[which];
    validate_mesh(bone);
    names_.push_back(bone.name);
    int name_idx = static_cast<int>(names_.size()) - 1;
    for (const auto& p : bone.vertices) {
      points.push_back(p);
      vertex_bone_.push_back(name_idx);
    }
  }
  tree_ = std::make_unique<KdTree3>(std::move(points));
}

BoneIndex::Hit BoneIndex::closest(const Vec3& query) const {
  int idx = tree_->nearest(query);
  return {names_[vertex_bone_[idx]], (tree_->point(idx) - query).norm()};
}

const std::string& BoneIndex::bone_at(const Vec3& query) const {
  return names_[vertex_bone_[tree_->nearest(query)]];
}

}  // namespace tendonforge
