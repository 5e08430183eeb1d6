#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tendonforge/mesh.hpp"
#include "tendonforge/spatial.hpp"
#include "tendonforge/types.hpp"

namespace tendonforge {

struct LoaConfig {
  double max_dist = 0.1;            // waypoint spacing threshold (m)
  double min_dist_new_bone = 0.05;  // spacing required when the bone changes (m)
  double n_slices_per_meter = 100.0;
};

// Throws InputError on bad thresholds. max_dist = 0 is allowed and disables
// the spacing rule (every centroid is kept); otherwise
// 0 < min_dist_new_bone <= max_dist must hold.
void validate(const LoaConfig& config);

enum class SiteKind { origin, waypoint, insertion };

struct TendonSite {
  Vec3 position = Vec3::Zero();
  std::string bone;
  SiteKind kind = SiteKind::waypoint;
};

struct TendonPath {
  std::string muscle_name;
  std::vector<TendonSite> sites;  // >= 2, positions monotone along axis
  Vec3 axis = Vec3::UnitX();
  LoaConfig config;                      // thresholds used at construction
  std::vector<int> wrapping_candidates;  // kept-site indices where the bone changes
  int n_slices = 0;
  int degenerate_contours = 0;  // slices that fell back to vertex-average centroids
  int open_chains = 0;          // slices whose loops had to be force-closed
};

struct CentroidSample {
  Vec3 position = Vec3::Zero();
  std::string bone;
};

// Site-selection walk over an ordered centroid sequence. A centroid is kept
// iff it is the first or the last, or its distance to the previously kept
// centroid reaches max_dist, or its bone differs from the previously kept
// centroid's bone and the distance reaches min_dist_new_bone. Conditions are
// tested in that order. Returns indices into `centroids`.
std::vector<int> select_sites(const std::vector<CentroidSample>& centroids,
                              const LoaConfig& config);

// Slices the muscle along `axis`, computes per-slice centroids, assigns each
// to its closest bone, and runs select_sites. Throws InputError when fewer
// than two slice centroids exist ("muscle too short").
TendonPath extract_loa(const BoneIndex& skeleton, const TriMesh& muscle,
                       const Vec3& axis, const LoaConfig& config);

double path_length(const TendonPath& path);

nlohmann::ordered_json tendon_to_json(const TendonPath& path);
TendonPath tendon_from_json(const nlohmann::json& j);

}  // namespace tendonforge
