#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"
#include "skybench/manifest.hpp"
#include "skybench/rng.hpp"
#include "skybench/scene.hpp"

namespace skybench {

// ---------------------------------------------------------------------------
// Trajectory configs
// ---------------------------------------------------------------------------

struct GroundConfig {
  int count = 100;
  double radius = 60.0;
  double altitude = 10.0;
  double hfov_deg = 60.0;
  int width = 64;
  int height = 48;
};

// Triple-camera rig on a descending helix. Each band descends linearly from
// band_top to band_bottom while the rig makes `turns_per_band` revolutions;
// the helix radius shrinks linearly from radius_start to radius_end over the
// whole trajectory.
struct AerialConfig {
  std::array<int, 3> frames_per_band = {60, 120, 180};
  std::array<double, 3> band_top = {800.0, 550.0, 300.0};
  std::array<double, 3> band_bottom = {700.0, 450.0, 200.0};
  double turns_per_band = 2.0;
  double radius_start = 700.0;
  double radius_end = 250.0;
  double yaw_offset_deg = 20.0;
  double hfov_deg = 60.0;
  int width = 64;
  int height = 48;
};

struct SatelliteConfig {
  int count = 120;
  double altitude = 1500.0;
  double hfov_deg = 30.0;
  int width = 64;
  int height = 64;
  double position_jitter = 1.0;  // fraction of a half cell
  double tilt_jitter_deg = 1.0;
};

inline constexpr std::array<const char*, 3> kRigCameraNames = {"L", "C", "R"};
inline constexpr std::array<const char*, 3> kAerialBandNames = {"high", "medium", "low"};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

inline void check_altitude(Modality m, double altitude, const char* what) {
  const AltitudeBand band = altitude_band(m);
  require(std::isfinite(altitude) && band.contains(altitude), ErrorKind::invalid_input,
          std::string(what) + " " + std::to_string(altitude) + " m outside the " + to_string(m) +
              " band [" + std::to_string(band.min_m) + ", " + std::to_string(band.max_m) + "]");
}

inline std::vector<ViewRecord> ground_circle(const HeightfieldScene& scene, const GroundConfig& cfg,
                                             const std::string& prefix = "ground") {
  require(cfg.count >= 1, ErrorKind::invalid_input, "ground count must be >= 1");
  require(cfg.radius > 0.0 && std::isfinite(cfg.radius), ErrorKind::invalid_input,
          "ground radius must be positive");
  check_altitude(Modality::ground, cfg.altitude, "ground altitude");
  const auto k = CameraIntrinsics::from_fov(deg_to_rad(cfg.hfov_deg), cfg.width, cfg.height);
  const Vec3 target = scene.landmark_center();

  std::vector<ViewRecord> views;
  views.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    const double angle = 2.0 * kPi * i / cfg.count;
    const double x = target.x() + cfg.radius * std::cos(angle);
    const double y = target.y() + cfg.radius * std::sin(angle);
    const Vec3 center(x, y, scene.height(x, y) + cfg.altitude);
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%04d", prefix.c_str(), i);
    views.push_back(make_view_record(id, Modality::ground, look_at_rotation(center, target), center,
                                     k, cfg.altitude));
  }
  return views;
}

// Rotation of a rig camera given the center camera's rotation. Negative
// offsets turn the camera to the left (counter-clockwise seen from above).
inline Rotation3 rig_camera_rotation(const Rotation3& center, double yaw_offset_deg) {
  return center * Rotation3::about_z(deg_to_rad(yaw_offset_deg));
}

struct AerialFrame {
  int band = 0;
  int index_in_band = 0;
  Vec3 center = Vec3::Zero();
  double altitude_agl = 0.0;
  Rotation3 center_rotation;
};

inline std::vector<AerialFrame> aerial_helix(const HeightfieldScene& scene, const AerialConfig& cfg,
                                             std::uint64_t seed) {
  int total = 0;
  for (int b = 0; b < 3; ++b) {
    require(cfg.frames_per_band[b] >= 0, ErrorKind::invalid_input, "frames per band must be >= 0");
    check_altitude(Modality::aerial, cfg.band_top[b], "aerial band top");
    check_altitude(Modality::aerial, cfg.band_bottom[b], "aerial band bottom");
    total += cfg.frames_per_band[b];
  }
  require(cfg.radius_start > 0.0 && cfg.radius_end > 0.0, ErrorKind::invalid_input,
          "helix radii must be positive");

  Rng rng(derive_seed(seed, 0xae41a));
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const Vec3 target = scene.landmark_center();

  std::vector<AerialFrame> frames;
  frames.reserve(static_cast<std::size_t>(total));
  int global = 0;
  for (int b = 0; b < 3; ++b) {
    const int n = cfg.frames_per_band[b];
    for (int i = 0; i < n; ++i, ++global) {
      const double s = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
      const double progress = total > 1 ? static_cast<double>(global) / (total - 1) : 0.0;
      const double alt = cfg.band_top[b] + (cfg.band_bottom[b] - cfg.band_top[b]) * s;
      const double angle = phase + 2.0 * kPi * cfg.turns_per_band * (b + static_cast<double>(i) / std::max(n, 1));
      const double r = cfg.radius_start + (cfg.radius_end - cfg.radius_start) * progress;
      const double x = target.x() + r * std::cos(angle);
      const double y = target.y() + r * std::sin(angle);
      AerialFrame f;
      f.band = b;
      f.index_in_band = i;
      f.center = Vec3(x, y, scene.height(x, y) + alt);
      f.altitude_agl = alt;
      f.center_rotation = look_at_rotation(f.center, target);
      frames.push_back(f);
    }
  }
  return frames;
}

// Views are ordered camera-major (all L frames, then C, then R).
inline std::vector<ViewRecord> aerial_helix_rig(const HeightfieldScene& scene,
                                                const AerialConfig& cfg, std::uint64_t seed,
                                                const std::string& prefix = "aerial") {
  const auto frames = aerial_helix(scene, cfg, seed);
  const auto k = CameraIntrinsics::from_fov(deg_to_rad(cfg.hfov_deg), cfg.width, cfg.height);
  const std::array<double, 3> offsets = {-cfg.yaw_offset_deg, 0.0, cfg.yaw_offset_deg};
  std::vector<ViewRecord> views;
  views.reserve(frames.size() * 3);
  for (int cam = 0; cam < 3; ++cam) {
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& fr = frames[f];
      char id[80];
      std::snprintf(id, sizeof(id), "%s_%s_%s_%04zu", prefix.c_str(), kRigCameraNames[cam],
                    kAerialBandNames[fr.band], f);
      views.push_back(make_view_record(id, Modality::aerial,
                                       rig_camera_rotation(fr.center_rotation, offsets[cam]),
                                       fr.center, k, fr.altitude_agl));
    }
  }
  return views;
}

inline Rotation3 nadir_rotation() {
  Mat3 m;
  m << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
  return Rotation3::unchecked(m);
}

inline std::vector<ViewRecord> satellite_grid(const HeightfieldScene& scene,
                                              const SatelliteConfig& cfg, std::uint64_t seed,
                                              const std::string& prefix = "satellite") {
  require(cfg.count >= 1, ErrorKind::invalid_input, "satellite count must be >= 1");
  check_altitude(Modality::satellite, cfg.altitude, "satellite altitude");
  require(cfg.position_jitter >= 0.0 && cfg.position_jitter <= 1.0, ErrorKind::invalid_input,
          "satellite position jitter must be in [0, 1]");
  require(cfg.tilt_jitter_deg >= 0.0 && cfg.tilt_jitter_deg < 45.0, ErrorKind::invalid_input,
          "satellite tilt jitter must be in [0, 45) degrees");

  const auto k = CameraIntrinsics::from_fov(deg_to_rad(cfg.hfov_deg), cfg.width, cfg.height);
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.count))));
  const int rows = (cfg.count + cols - 1) / cols;
  const double half = scene.half_extent();
  const double cell_w = scene.config().extent / cols;
  const double cell_h = scene.config().extent / rows;
  Rng rng(derive_seed(seed, 0x5a7e1));

  std::vector<ViewRecord> views;
  views.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    const int r = i / cols;
    const int c = i % cols;
    const double jx = rng.uniform(-0.5, 0.5) * cfg.position_jitter * cell_w;
    const double jy = rng.uniform(-0.5, 0.5) * cfg.position_jitter * cell_h;
    const double x = -half + (c + 0.5) * cell_w + jx;
    const double y = -half + (r + 0.5) * cell_h + jy;
    const Vec3 center(x, y, scene.height(x, y) + cfg.altitude);

    Rotation3 rot = nadir_rotation();
    if (cfg.tilt_jitter_deg > 0.0) {
      const double heading = rng.uniform(0.0, 2.0 * kPi);
      const double tilt = deg_to_rad(rng.uniform(0.0, cfg.tilt_jitter_deg));
      const Vec3 axis(std::cos(heading), std::sin(heading), 0.0);
      rot = rot * Rotation3::about_axis(axis, tilt).transpose();
    }
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%04d", prefix.c_str(), i);
    views.push_back(make_view_record(id, Modality::satellite, rot, center, k, cfg.altitude));
  }
  return views;
}

// ---------------------------------------------------------------------------
// Ortho-rectification
// ---------------------------------------------------------------------------

// Cell (col, row) covers [origin_x + col*gsd, origin_x + (col+1)*gsd] in x and
// [origin_y - (row+1)*gsd, origin_y - row*gsd] in y (north-up raster).
struct GeoTransform {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double gsd = 1.0;

  Vec2 cell_center(int col, int row) const {
    return {origin_x + (col + 0.5) * gsd, origin_y - (row + 0.5) * gsd};
  }
};

struct OrthoRaster {
  GeoTransform geo;
  ImageF values;                    // resampled perspective channels
  std::vector<std::uint8_t> valid;  // per cell
  std::vector<Vec2> source_uv;      // perspective pixel coordinates sampled per cell

  bool is_valid(int col, int row) const {
    return valid[static_cast<std::size_t>(row) * values.width + col] != 0;
  }
};

namespace detail {

// Ground footprint of the view on the plane z = plane_z, clamped to the scene.
inline std::array<double, 4> view_footprint(const HeightfieldScene& scene, const Pose& pose,
                                            const CameraIntrinsics& k, double plane_z) {
  const Vec3 c = pose.center();
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  const double us[2] = {0.0, static_cast<double>(k.width)};
  const double vs[2] = {0.0, static_cast<double>(k.height)};
  for (double u : us) {
    for (double v : vs) {
      const Vec3 d = pose.rotation.transpose() * k.ray(u, v);
      require(d.z() < 0.0, ErrorKind::invalid_input,
              "view corner ray does not reach the ground; too oblique to rectify");
      const double t = (plane_z - c.z()) / d.z();
      const Vec3 p = c + t * d;
      min_x = std::min(min_x, p.x());
      max_x = std::max(max_x, p.x());
      min_y = std::min(min_y, p.y());
      max_y = std::max(max_y, p.y());
    }
  }
  const double h = scene.half_extent();
  return {std::max(min_x, -h), std::min(max_x, h), std::max(min_y, -h), std::min(max_y, h)};
}

}  // namespace detail

// Resamples a perspective raster (one value set per pixel, NaN = invalid) onto
// an orthographic ground grid. Cell origins snap to multiples of gsd so rasters
// from different views share cells.
inline OrthoRaster ortho_rectify(const HeightfieldScene& scene, const ViewRecord& view, double gsd,
                                 const ImageF& perspective) {
  require(view.modality == Modality::satellite, ErrorKind::invalid_input,
          "ortho-rectification needs a satellite view, got " + to_string(view.modality));
  require(gsd > 0.0 && std::isfinite(gsd), ErrorKind::invalid_input, "gsd must be positive");
  const CameraIntrinsics& k = view.intrinsics;
  require(perspective.width == k.width && perspective.height == k.height, ErrorKind::invalid_shape,
          "perspective raster does not match the view's image size");
  const Pose pose = view.pose();
  const Vec3 c = pose.center();

  const auto fp = detail::view_footprint(scene, pose, k, scene.config().base_height);
  OrthoRaster out;
  out.geo.gsd = gsd;
  out.geo.origin_x = std::floor(fp[0] / gsd) * gsd;
  out.geo.origin_y = std::ceil(fp[3] / gsd) * gsd;
  const int cols = std::max(1, static_cast<int>(std::ceil((fp[1] - out.geo.origin_x) / gsd)));
  const int rows = std::max(1, static_cast<int>(std::ceil((out.geo.origin_y - fp[2]) / gsd)));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.values = ImageF(cols, rows, perspective.channels, nan);
  out.valid.assign(static_cast<std::size_t>(cols) * rows, 0);
  out.source_uv.assign(static_cast<std::size_t>(cols) * rows, Vec2::Constant(nan));

  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) {
      const Vec2 xy = out.geo.cell_center(col, row);
      if (!scene.in_extent(xy.x(), xy.y())) continue;
      const Vec3 p(xy.x(), xy.y(), scene.height(xy.x(), xy.y()));
      const Vec3 cam = pose.to_camera(p);
      if (cam.z() <= 0.0) continue;
      const Vec2 uv = k.project(cam);
      // Pixel centers sit at integer + 0.5.
      const double sx = uv.x() - 0.5;
      const double sy = uv.y() - 0.5;
      if (sx < 0.0 || sy < 0.0 || sx > k.width - 1 || sy > k.height - 1) continue;

      const auto hit = scene.cast(c, p - c);
      if (hit && hit->t < 1.0 - 1e-6) continue;  // something blocks the line of sight

      const int x0 = std::min(static_cast<int>(sx), k.width - 2 < 0 ? 0 : k.width - 2);
      const int y0 = std::min(static_cast<int>(sy), k.height - 2 < 0 ? 0 : k.height - 2);
      const int x1 = std::min(x0 + 1, k.width - 1);
      const int y1 = std::min(y0 + 1, k.height - 1);
      const double ax = sx - x0;
      const double ay = sy - y0;
      bool ok = true;
      for (int ch = 0; ch < perspective.channels && ok; ++ch) {
        const double v00 = perspective.at(x0, y0, ch), v10 = perspective.at(x1, y0, ch);
        const double v01 = perspective.at(x0, y1, ch), v11 = perspective.at(x1, y1, ch);
        if (std::isnan(v00) || std::isnan(v10) || std::isnan(v01) || std::isnan(v11)) {
          ok = false;
          break;
        }
        out.values.at(col, row, ch) =
            (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
      }
      const std::size_t cell = static_cast<std::size_t>(row) * cols + col;
      if (!ok) {
        for (int ch = 0; ch < perspective.channels; ++ch) out.values.at(col, row, ch) = nan;
        continue;
      }
      out.valid[cell] = 1;
      out.source_uv[cell] = uv;
    }
  }
  return out;
}

// Perspective raster with channels (surface height, r, g, b) rendered from the
// scene; invalid pixels are NaN.
inline ImageF perspective_height_rgb(const HeightfieldScene& scene, const ViewRecord& view) {
  const Pose pose = view.pose();
  const auto& k = view.intrinsics;
  const RenderedView rv = render_view(scene, pose, k);
  ImageF img(k.width, k.height, 4, std::numeric_limits<double>::quiet_NaN());
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const float d = rv.depth.at(u, v);
      if (d <= 0.0f) continue;
      img.at(u, v, 0) = unproject(pose, k, u + 0.5, v + 0.5, d).z();
      for (int ch = 0; ch < 3; ++ch) img.at(u, v, ch + 1) = rv.rgb.at(u, v, ch) / 255.0;
    }
  }
  return img;
}

inline OrthoRaster ortho_rectify(const HeightfieldScene& scene, const ViewRecord& view, double gsd) {
  require(view.modality == Modality::satellite, ErrorKind::invalid_input,
          "ortho-rectification needs a satellite view, got " + to_string(view.modality));
  return ortho_rectify(scene, view, gsd, perspective_height_rgb(scene, view));
}

// ---------------------------------------------------------------------------
// Whole-site generation
// ---------------------------------------------------------------------------

struct SiteConfig {
  std::string site_id = "site000";
  std::uint64_t seed = 0;
  SceneConfig scene;
  GroundConfig ground;
  AerialConfig aerial;
  SatelliteConfig satellite;
  bool strict_counts = true;  // ground count within [50, 250]
  bool write_rgb = true;
};

inline constexpr int kMinGroundViews = 50;
inline constexpr int kMaxGroundViews = 250;

inline nlohmann::json scene_config_to_json(const SceneConfig& c) {
  return {{"extent", c.extent},
          {"base_height", c.base_height},
          {"bump_count", c.bump_count},
          {"bump_amplitude_min", c.bump_amplitude_min},
          {"bump_amplitude_max", c.bump_amplitude_max},
          {"bump_sigma_min", c.bump_sigma_min},
          {"bump_sigma_max", c.bump_sigma_max},
          {"landmark_half_size", c.landmark_half_size},
          {"landmark_height", c.landmark_height},
          {"seed", c.seed}};
}

inline SceneConfig scene_config_from_json(const nlohmann::json& j) {
  SceneConfig c;
  c.extent = j.at("extent").get<double>();
  c.base_height = j.at("base_height").get<double>();
  c.bump_count = j.at("bump_count").get<int>();
  c.bump_amplitude_min = j.at("bump_amplitude_min").get<double>();
  c.bump_amplitude_max = j.at("bump_amplitude_max").get<double>();
  c.bump_sigma_min = j.at("bump_sigma_min").get<double>();
  c.bump_sigma_max = j.at("bump_sigma_max").get<double>();
  c.landmark_half_size = j.at("landmark_half_size").get<double>();
  c.landmark_height = j.at("landmark_height").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline constexpr const char* kSceneFile = "scene.json";

inline HeightfieldScene read_scene(const std::filesystem::path& site_dir) {
  try {
    return HeightfieldScene::generate(
        scene_config_from_json(nlohmann::json::parse(read_file_bytes(site_dir / kSceneFile))));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::manifest_parse_error, (site_dir / kSceneFile).string() + ": " + e.what());
  }
}

inline std::string rgb_path_for(const ViewRecord& v) { return "rgb/" + v.id + ".png"; }

struct GeneratedSite {
  HeightfieldScene scene;
  SiteManifest manifest;
};

// Builds the scene and every trajectory without touching the filesystem.
inline GeneratedSite build_site(const SiteConfig& cfg) {
  require(!cfg.site_id.empty(), ErrorKind::invalid_input, "site id must not be empty");
  if (cfg.strict_counts) {
    require(cfg.ground.count >= kMinGroundViews && cfg.ground.count <= kMaxGroundViews,
            ErrorKind::invalid_input,
            "ground count " + std::to_string(cfg.ground.count) + " outside [50, 250]");
  }
  SceneConfig scene_cfg = cfg.scene;
  scene_cfg.seed = derive_seed(cfg.seed, 1);
  GeneratedSite site{HeightfieldScene::generate(scene_cfg), {}};
  site.manifest.site_id = cfg.site_id;
  site.manifest.landmark_center = site.scene.landmark_center();

  const std::string p = cfg.site_id + "_";
  auto append = [&](std::vector<ViewRecord> views) {
    for (auto& v : views) site.manifest.views.push_back(std::move(v));
  };
  append(satellite_grid(site.scene, cfg.satellite, derive_seed(cfg.seed, 3), p + "satellite"));
  append(aerial_helix_rig(site.scene, cfg.aerial, derive_seed(cfg.seed, 2), p + "aerial"));
  append(ground_circle(site.scene, cfg.ground, p + "ground"));
  return site;
}

// Writes manifest.json, scene.json, depth/<id>.skyd and (optionally) rgb/<id>.png.
inline SiteManifest generate_site(const SiteConfig& cfg, const std::filesystem::path& out_dir) {
  GeneratedSite site = build_site(cfg);
  std::filesystem::create_directories(out_dir / "depth");
  if (cfg.write_rgb) std::filesystem::create_directories(out_dir / "rgb");
  SceneConfig scene_cfg = site.scene.config();
  write_file_atomic(out_dir / kSceneFile, scene_config_to_json(scene_cfg).dump(2) + "\n");
  for (const auto& v : site.manifest.views) {
    const RenderedView rv = render_view(site.scene, v.pose(), v.intrinsics);
    write_depth(out_dir / v.depth_path, rv.depth);
    if (cfg.write_rgb) write_png(out_dir / rgb_path_for(v), rv.rgb);
  }
  write_manifest(site.manifest, out_dir);
  return site.manifest;
}

}  // namespace skybench
