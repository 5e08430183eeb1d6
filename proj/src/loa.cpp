#include "tendonforge/loa.hpp"

#include <cmath>

#include "tendonforge/slice.hpp"

namespace tendonforge {

void validate(const LoaConfig& config) {
  if (!(config.max_dist >= 0.0) || !std::isfinite(config.max_dist))
    throw InputError("max_dist must be a finite non-negative length");
  if (!(config.min_dist_new_bone > 0.0) || !std::isfinite(config.min_dist_new_bone))
    throw InputError("min_dist_new_bone must be a finite positive length");
  if (config.max_dist > 0.0 && config.min_dist_new_bone > config.max_dist)
    throw InputError("min_dist_new_bone must not exceed max_dist");
  if (!(config.n_slices_per_meter > 0.0))
    throw InputError("n_slices_per_meter must be positive");
}

std::vector<int> select_sites(const std::vector<CentroidSample>& centroids,
                              const LoaConfig& config) {
  validate(config);
  const int n = static_cast<int>(centroids.size());
  std::vector<int> kept;
  for (int i = 0; i < n; ++i) {
    if (kept.empty()) {
      kept.push_back(i);
      continue;
    }
    if (i == n - 1) {
      kept.push_back(i);
      continue;
    }
    const CentroidSample& prev = centroids[kept.back()];
    double d = (centroids[i].position - prev.position).norm();
    if (d >= config.max_dist) {
      kept.push_back(i);
      continue;
    }
    if (centroids[i].bone != prev.bone && d >= config.min_dist_new_bone)
      kept.push_back(i);
  }
  return kept;
}

TendonPath extract_loa(const BoneIndex& skeleton, const TriMesh& muscle,
                       const Vec3& axis, const LoaConfig& config) {
  validate(config);
  auto [lo, hi] = axis_extent(muscle, axis);
  double extent = hi - lo;
  if (extent < 1e-9) throw InputError("axis-degenerate mesh: extent below 1e-9 m");
  int n_slices =
      std::max(2, static_cast<int>(std::ceil(extent * config.n_slices_per_meter)));

  TendonPath path;
  path.muscle_name = muscle.name;
  path.axis = axis.normalized();
  path.config = config;
  path.n_slices = n_slices;

  std::vector<CentroidSample> centroids;
  auto contours = slice_mesh(muscle, axis, n_slices);
  for (const auto& contour : contours) {
    CentroidResult c = contour_centroid(contour);
    if (c.degenerate) ++path.degenerate_contours;
    if (contour.closed_open_chain) ++path.open_chains;
    centroids.push_back({c.point, skeleton.bone_at(c.point)});
  }
  if (centroids.size() < 2)
    throw InputError("muscle too short along the slicing axis: fewer than 2 slice centroids");

  std::vector<int> kept = select_sites(centroids, config);
  for (size_t k = 0; k < kept.size(); ++k) {
    const CentroidSample& c = centroids[kept[k]];
    SiteKind kind = k == 0               ? SiteKind::origin
                    : k + 1 == kept.size() ? SiteKind::insertion
                                           : SiteKind::waypoint;
    path.sites.push_back({c.position, c.bone, kind});
    if (k > 0 && c.bone != path.sites[k - 1].bone)
      path.wrapping_candidates.push_back(static_cast<int>(k));
  }
  return path;
}

double path_length(const TendonPath& path) {
  if (path.sites.size() < 2) throw InputError("tendon path needs at least 2 sites");
  double total = 0.0;
  for (size_t i = 1; i < path.sites.size(); ++i)
    total += (path.sites[i].position - path.sites[i - 1].position).norm();
  return total;
}

namespace {

const char* kind_name(SiteKind kind) {
  switch (kind) {
    case SiteKind::origin: return "origin";
    case SiteKind::insertion: return "insertion";
    default: return "waypoint";
  }
}

SiteKind kind_from_name(const std::string& name) {
  if (name == "origin") return SiteKind::origin;
  if (name == "waypoint") return SiteKind::waypoint;
  if (name == "insertion") return SiteKind::insertion;
  throw InputError("unknown site kind: " + name);
}

}  // namespace

nlohmann::ordered_json tendon_to_json(const TendonPath& path) {
  nlohmann::ordered_json j;
  j["muscle"] = path.muscle_name;
  auto& sites = j["sites"] = nlohmann::ordered_json::array();
  for (const auto& s : path.sites) {
    nlohmann::ordered_json js;
    js["pos"] = {s.position.x(), s.position.y(), s.position.z()};
    js["bone"] = s.bone;
    js["kind"] = kind_name(s.kind);
    sites.push_back(std::move(js));
  }
  auto& config = j["config"];
  config["max_dist"] = path.config.max_dist;
  config["min_dist_new_bone"] = path.config.min_dist_new_bone;
  config["n_slices_per_meter"] = path.config.n_slices_per_meter;
  auto& meta = j["metadata"];
  meta["axis"] = {path.axis.x(), path.axis.y(), path.axis.z()};
  meta["n_slices"] = path.n_slices;
  meta["wrapping_candidates"] = path.wrapping_candidates;
  meta["degenerate_contours"] = path.degenerate_contours;
  meta["open_chains"] = path.open_chains;
  return j;
}

TendonPath tendon_from_json(const nlohmann::json& j) {
  TendonPath path;
  try {
    path.muscle_name = j.at("muscle").get<std::string>();
    for (const auto& js : j.at("sites")) {
      TendonSite s;
      auto pos = js.at("pos");
      s.position = Vec3(pos.at(0).get<double>(), pos.at(1).get<double>(),
                        pos.at(2).get<double>());
      s.bone = js.at("bone").get<std::string>();
      s.kind = kind_from_name(js.at("kind").get<std::string>());
      path.sites.push_back(std::move(s));
    }
    const auto& config = j.at("config");
    path.config.max_dist = config.at("max_dist").get<double>();
    path.config.min_dist_new_bone = config.at("min_dist_new_bone").get<double>();
    path.config.n_slices_per_meter = config.at("n_slices_per_meter").get<double>();
    const auto& meta = j.at("metadata");
    auto axis = meta.at("axis");
    path.axis = Vec3(axis.at(0).get<double>(), axis.at(1).get<double>(),
                     axis.at(2).get<double>());
    path.n_slices = meta.at("n_slices").get<int>();
    path.wrapping_candidates = meta.at("wrapping_candidates").get<std::vector<int>>();
    path.degenerate_contours = meta.at("degenerate_contours").get<int>();
    path.open_chains = meta.at("open_chains").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed tendon file: ") + e.what());
  }
  if (path.sites.size() < 2) throw InputError("tendon path needs at least 2 sites");
  return path;
}

}  // namespace tendonforge
