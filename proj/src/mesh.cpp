#include "tendonforge/mesh.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tendonforge/csv.hpp"

namespace tendonforge {

void validate_mesh(const TriMesh& mesh) {
  if (mesh.faces.empty())
    throw InputError("mesh '" + mesh.name + "' has no faces");
  const int nv = static_cast<int>(mesh.vertices.size());
  for (const auto& v : mesh.vertices)
    if (!v.allFinite())
      throw InputError("mesh '" + mesh.name + "' has non-finite vertex coordinates");
  for (const auto& f : mesh.faces)
    for (int idx : f)
      if (idx < 0 || idx >= nv)
        throw InputError("mesh '" + mesh.name + "' has a face index out of range");
}

namespace {

int resolve_obj_index(long raw, size_t n_vertices, const std::filesystem::path& path) {
  long idx = raw > 0 ? raw - 1 : static_cast<long>(n_vertices) + raw;
  if (idx < 0 || idx >= static_cast<long>(n_vertices))
    throw InputError("face index out of range in " + path.string());
  return static_cast<int>(idx);
}

}  // namespace

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file: " + path.string());
  TriMesh mesh;
  mesh.name = path.stem().string();
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2) continue;
    if (line[0] == 'v' && std::isspace(static_cast<unsigned char>(line[1]))) {
      std::istringstream ss(line.substr(1));
      double x, y, z;
      if (!(ss >> x >> y >> z))
        throw InputError("malformed vertex record in " + path.string());
      mesh.vertices.emplace_back(x, y, z);
    } else if (line[0] == 'f' && std::isspace(static_cast<unsigned char>(line[1]))) {
      std::istringstream ss(line.substr(1));
      std::string token;
      std::vector<int> poly;
      while (ss >> token) {
        // "i", "i/j", "i/j/k", "i//k": the leading integer is the vertex.
        size_t slash = token.find('/');
        std::string head = slash == std::string::npos ? token : token.substr(0, slash);
        poly.push_back(resolve_obj_index(parse_long(head, "face index"),
                                         mesh.vertices.size(), path));
      }
      if (poly.size() < 3)
        throw InputError("face with fewer than three vertices in " + path.string());
      for (size_t i = 2; i < poly.size(); ++i)
        mesh.faces.push_back({poly[0], poly[i - 1], poly[i]});
    }
    // Every other record type (vn, vt, usemtl, o, g, s, comments) is ignored.
  }
  validate_mesh(mesh);
  return mesh;
}

TriMesh load_stl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open mesh file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 84) throw InputError("binary STL too short: " + path.string());
  if (bytes.size() >= 5 && std::memcmp(bytes.data(), "solid", 5) == 0) {
    // Could still be binary with a rude header; trust the size check below.
  }
  uint32_t n_tri;
  std::memcpy(&n_tri, bytes.data() + 80, 4);
  if (bytes.size() != 84 + static_cast<size_t>(n_tri) * 50)
    throw InputError("not a binary STL (size mismatch): " + path.string());

  TriMesh mesh;
  mesh.name = path.stem().string();
  std::map<std::array<double, 3>, int> weld;
  const char* rec = bytes.data() + 84;
  for (uint32_t t = 0; t < n_tri; ++t, rec += 50) {
    std::array<int, 3> face{};
    for (int c = 0; c < 3; ++c) {
      float xyz[3];
      std::memcpy(xyz, rec + 12 + 12 * c, 12);
      std::array<double, 3> key{xyz[0], xyz[1], xyz[2]};
      auto [it, inserted] = weld.try_emplace(key, static_cast<int>(mesh.vertices.size()));
      if (inserted) mesh.vertices.emplace_back(key[0], key[1], key[2]);
      face[c] = it->second;
    }
    mesh.faces.push_back(face);
  }
  validate_mesh(mesh);
  return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return load_obj(path);
  if (ext == ".stl") return load_stl(path);
  throw InputError("unsupported mesh format '" + ext + "' for " + path.string() +
                   " (expected .obj or .stl)");
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file: " + path.string());
  for (const auto& v : mesh.vertices)
    out << "v " << format_g17(v.x()) << " " << format_g17(v.y()) << " "
        << format_g17(v.z()) << "\n";
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

Vec3 principal_axis(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw InputError("principal axis of an empty mesh");
  Vec3 mean = Vec3::Zero();
  for (const auto& v : mesh.vertices) mean += v;
  mean /= static_cast<double>(mesh.vertices.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : mesh.vertices) {
    Vec3 d = v - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Vec3 axis = eig.eigenvectors().col(2);  // eigenvalues sorted ascending
  int dominant = 0;
  axis.cwiseAbs().maxCoeff(&dominant);
  if (axis[dominant] < 0) axis = -axis;
  return axis;
}

}  // namespace tendonforge
