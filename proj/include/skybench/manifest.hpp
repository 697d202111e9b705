#pragma once

#include <json.hpp>

#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"

namespace skybench {

enum class Modality { ground, aerial, satellite };

inline constexpr std::array<Modality, 3> kAllModalities = {Modality::ground, Modality::aerial,
                                                           Modality::satellite};

inline std::string to_string(Modality m) {
  switch (m) {
    case Modality::ground: return "ground";
    case Modality::aerial: return "aerial";
    case Modality::satellite: return "satellite";
  }
  return "unknown";
}

inline char modality_tag(Modality m) {
  switch (m) {
    case Modality::ground: return 'G';
    case Modality::aerial: return 'A';
    case Modality::satellite: return 'S';
  }
  return '?';
}

inline Modality parse_modality(const std::string& s) {
  if (s == "ground" || s == "G") return Modality::ground;
  if (s == "aerial" || s == "A") return Modality::aerial;
  if (s == "satellite" || s == "S") return Modality::satellite;
  fail(ErrorKind::invalid_input, "unknown modality '" + s + "'");
}

struct AltitudeBand {
  double min_m;
  double max_m;
  bool contains(double v) const { return v >= min_m && v <= max_m; }
};

// Above-ground-level bands per modality.
inline AltitudeBand altitude_band(Modality m) {
  switch (m) {
    case Modality::ground: return {5.0, 80.0};
    case Modality::aerial: return {200.0, 800.0};
    case Modality::satellite: return {1000.0, 2000.0};
  }
  return {0.0, 0.0};
}

struct ViewRecord {
  std::string id;
  Modality modality = Modality::ground;
  UnitQuaternion quat;  // world-to-camera rotation
  Vec3 translation = Vec3::Zero();
  CameraIntrinsics intrinsics;
  double altitude_agl = 0.0;
  std::string depth_path;  // relative to the manifest directory
  bool is_real = false;

  Pose pose() const { return {quat_to_rotation(quat), translation}; }

  bool operator==(const ViewRecord& o) const {
    return id == o.id && modality == o.modality && quat == o.quat &&
           translation == o.translation && intrinsics == o.intrinsics &&
           altitude_agl == o.altitude_agl && depth_path == o.depth_path && is_real == o.is_real;
  }
};

struct ModalityCounts {
  std::size_t ground = 0;
  std::size_t aerial = 0;
  std::size_t satellite = 0;

  std::size_t of(Modality m) const {
    switch (m) {
      case Modality::ground: return ground;
      case Modality::aerial: return aerial;
      case Modality::satellite: return satellite;
    }
    return 0;
  }
};

struct SiteManifest {
  std::string site_id;
  Vec3 landmark_center = Vec3::Zero();
  std::vector<ViewRecord> views;

  ModalityCounts counts() const {
    ModalityCounts c;
    for (const auto& v : views) {
      switch (v.modality) {
        case Modality::ground: ++c.ground; break;
        case Modality::aerial: ++c.aerial; break;
        case Modality::satellite: ++c.satellite; break;
      }
    }
    return c;
  }

  // Index of the view with the given id, or -1.
  std::ptrdiff_t find(const std::string& id) const {
    for (std::size_t i = 0; i < views.size(); ++i) {
      if (views[i].id == id) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  }

  bool operator==(const SiteManifest& o) const {
    return site_id == o.site_id && landmark_center == o.landmark_center && views == o.views;
  }
};

// Builds a record whose stored translation is consistent with the rotation
// recovered from the stored quaternion.
inline ViewRecord make_view_record(std::string id, Modality modality, const Rotation3& rotation,
                                   const Vec3& center, const CameraIntrinsics& k,
                                   double altitude_agl) {
  ViewRecord v;
  v.id = std::move(id);
  v.modality = modality;
  v.quat = rotation_to_quat(rotation);
  v.translation = -(quat_to_rotation(v.quat) * center);
  v.intrinsics = k;
  v.altitude_agl = altitude_agl;
  v.depth_path = "depth/" + v.id + ".skyd";
  return v;
}

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

inline constexpr const char* kManifestFile = "manifest.json";

inline nlohmann::json to_json(const ViewRecord& v) {
  return nlohmann::json{
      {"id", v.id},
      {"modality", to_string(v.modality)},
      {"quat_wxyz", {v.quat.w, v.quat.x, v.quat.y, v.quat.z}},
      {"translation_xyz", {v.translation.x(), v.translation.y(), v.translation.z()}},
      {"fx", v.intrinsics.fx},
      {"fy", v.intrinsics.fy},
      {"cx", v.intrinsics.cx},
      {"cy", v.intrinsics.cy},
      {"width", v.intrinsics.width},
      {"height", v.intrinsics.height},
      {"altitude_agl", v.altitude_agl},
      {"depth_path", v.depth_path},
      {"is_real", v.is_real},
  };
}

inline nlohmann::json to_json(const SiteManifest& m) {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : m.views) views.push_back(to_json(v));
  return nlohmann::json{
      {"site_id", m.site_id},
      {"landmark_center", {m.landmark_center.x(), m.landmark_center.y(), m.landmark_center.z()}},
      {"views", std::move(views)},
  };
}

namespace detail {

class ManifestReader {
 public:
  [[noreturn]] static void bad(const std::string& path, const std::string& what) {
    fail(ErrorKind::manifest_parse_error, path + ": " + what);
  }

  static const nlohmann::json& field(const nlohmann::json& obj, const std::string& path,
                                     const char* name) {
    if (!obj.is_object()) bad(path, "expected an object");
    auto it = obj.find(name);
    if (it == obj.end()) bad(path + "." + name, "missing field");
    return *it;
  }

  static double number(const nlohmann::json& obj, const std::string& path, const char* name) {
    const auto& v = field(obj, path, name);
    if (!v.is_number()) bad(path + "." + name, "expected a number");
    return v.get<double>();
  }

  static int integer(const nlohmann::json& obj, const std::string& path, const char* name) {
    const auto& v = field(obj, path, name);
    if (!v.is_number_integer()) bad(path + "." + name, "expected an integer");
    return v.get<int>();
  }

  static std::string string(const nlohmann::json& obj, const std::string& path, const char* name) {
    const auto& v = field(obj, path, name);
    if (!v.is_string()) bad(path + "." + name, "expected a string");
    return v.get<std::string>();
  }

  template <std::size_t N>
  static std::array<double, N> numbers(const nlohmann::json& obj, const std::string& path,
                                       const char* name) {
    const auto& v = field(obj, path, name);
    if (!v.is_array() || v.size() != N) {
      bad(path + "." + name, "expected an array of " + std::to_string(N) + " numbers");
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) bad(path + "." + name + "[" + std::to_string(i) + "]", "expected a number");
      out[i] = v[i].get<double>();
    }
    return out;
  }

  static ViewRecord view(const nlohmann::json& j, const std::string& path) {
    ViewRecord v;
    v.id = string(j, path, "id");
    if (v.id.empty()) bad(path + ".id", "empty id");
    const std::string modality = string(j, path, "modality");
    if (modality != "ground" && modality != "aerial" && modality != "satellite") {
      bad(path + ".modality", "unknown modality '" + modality + "'");
    }
    v.modality = parse_modality(modality);
    const auto q = numbers<4>(j, path, "quat_wxyz");
    v.quat = {q[0], q[1], q[2], q[3]};
    if (std::abs(v.quat.norm() - 1.0) > kQuaternionNormTolerance) {
      bad(path + ".quat_wxyz", "quaternion is not unit norm");
    }
    const auto t = numbers<3>(j, path, "translation_xyz");
    v.translation = {t[0], t[1], t[2]};
    v.intrinsics.fx = number(j, path, "fx");
    v.intrinsics.fy = number(j, path, "fy");
    v.intrinsics.cx = number(j, path, "cx");
    v.intrinsics.cy = number(j, path, "cy");
    v.intrinsics.width = integer(j, path, "width");
    v.intrinsics.height = integer(j, path, "height");
    try {
      v.intrinsics.validate();
    } catch (const Error& e) {
      bad(path, e.what());
    }
    v.altitude_agl = number(j, path, "altitude_agl");
    v.depth_path = string(j, path, "depth_path");
    const auto& real = field(j, path, "is_real");
    if (!real.is_boolean()) bad(path + ".is_real", "expected a boolean");
    v.is_real = real.get<bool>();
    return v;
  }
};

}  // namespace detail

inline SiteManifest manifest_from_json(const nlohmann::json& j) {
  using R = detail::ManifestReader;
  SiteManifest m;
  m.site_id = R::string(j, "$", "site_id");
  const auto c = R::numbers<3>(j, "$", "landmark_center");
  m.landmark_center = {c[0], c[1], c[2]};
  const auto& views = R::field(j, "$", "views");
  if (!views.is_array()) R::bad("$.views", "expected an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::string path = "$.views[" + std::to_string(i) + "]";
    ViewRecord v = R::view(views[i], path);
    if (!seen.insert(v.id).second) R::bad(path + ".id", "duplicate id '" + v.id + "'");
    m.views.push_back(std::move(v));
  }
  return m;
}

inline void write_manifest(const SiteManifest& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / kManifestFile, to_json(m).dump(2) + "\n");
}

// Accepts either the site directory or the manifest file itself.
inline SiteManifest read_manifest(const std::filesystem::path& dir_or_file) {
  const auto path = std::filesystem::is_directory(dir_or_file) ? dir_or_file / kManifestFile
                                                               : dir_or_file;
  const std::string text = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::manifest_parse_error, path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

inline std::filesystem::path manifest_dir(const std::filesystem::path& dir_or_file) {
  return std::filesystem::is_directory(dir_or_file) ? dir_or_file : dir_or_file.parent_path();
}

}  // namespace skybench
