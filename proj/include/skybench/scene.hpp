#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"
#include "skybench/rng.hpp"

namespace skybench {

struct SceneConfig {
  double extent = 2000.0;  // meters per side, centered at the origin
  double base_height = 10.0;
  int bump_count = 6;
  double bump_amplitude_min = 5.0;
  double bump_amplitude_max = 25.0;
  double bump_sigma_min = 80.0;
  double bump_sigma_max = 200.0;
  double landmark_half_size = 20.0;
  double landmark_height = 40.0;  // above the terrain at the origin
  std::uint64_t seed = 0;
};

struct GaussianBump {
  double cx = 0.0;
  double cy = 0.0;
  double amplitude = 0.0;
  double sigma = 1.0;
};

enum class SurfaceKind { terrain, landmark_top, landmark_wall };

struct RayHit {
  double t = 0.0;  // ray parameter; the hit point is origin + t * direction
  SurfaceKind kind = SurfaceKind::terrain;
  Vec3 normal = Vec3::UnitZ();
};

// Analytic site: base plane + Gaussian bumps + one axis-aligned landmark box
// centered on the origin. The box is a solid sitting on the ground, so the
// surface height inside its footprint is max(terrain, box top).
class HeightfieldScene {
 public:
  static HeightfieldScene generate(const SceneConfig& config) {
    require(config.extent > 0.0, ErrorKind::invalid_input, "scene extent must be positive");
    require(config.base_height >= 0.0, ErrorKind::invalid_input, "base height must be >= 0");
    require(config.bump_count >= 0, ErrorKind::invalid_input, "bump count must be >= 0");
    require(config.bump_amplitude_min >= 0.0 &&
                config.bump_amplitude_max >= config.bump_amplitude_min,
            ErrorKind::invalid_input, "bump amplitudes must be non-negative and ordered");
    require(config.bump_sigma_min > 0.0 && config.bump_sigma_max >= config.bump_sigma_min,
            ErrorKind::invalid_input, "bump widths must be positive and ordered");
    require(config.landmark_half_size >= 0.0 && config.landmark_height >= 0.0,
            ErrorKind::invalid_input, "landmark dimensions must be >= 0");

    HeightfieldScene scene;
    scene.config_ = config;
    Rng rng(derive_seed(config.seed, 0x5ce4e));
    const double half = 0.5 * config.extent;
    for (int k = 0; k < config.bump_count; ++k) {
      GaussianBump b;
      b.cx = rng.uniform(-half, half);
      b.cy = rng.uniform(-half, half);
      b.amplitude = rng.uniform(config.bump_amplitude_min, config.bump_amplitude_max);
      b.sigma = rng.uniform(config.bump_sigma_min, config.bump_sigma_max);
      scene.bumps_.push_back(b);
    }
    scene.finalize();
    return scene;
  }

  // Flat ground at `base_height`, optionally with a landmark box of the given height.
  static HeightfieldScene flat(double extent, double base_height = 0.0, double box_half_size = 0.0,
                               double box_height = 0.0) {
    SceneConfig c;
    c.extent = extent;
    c.base_height = base_height;
    c.bump_count = 0;
    c.landmark_half_size = box_half_size;
    c.landmark_height = box_height;
    return generate(c);
  }

  const SceneConfig& config() const { return config_; }
  const std::vector<GaussianBump>& bumps() const { return bumps_; }
  double half_extent() const { return 0.5 * config_.extent; }
  double landmark_top() const { return landmark_top_; }
  bool has_landmark() const {
    return config_.landmark_half_size > 0.0 && config_.landmark_height > 0.0;
  }
  Vec3 landmark_center() const {
    return {0.0, 0.0, terrain_height(0.0, 0.0) + 0.5 * config_.landmark_height};
  }
  double max_height() const { return max_height_; }

  bool in_extent(double x, double y) const {
    const double h = half_extent();
    return x >= -h && x <= h && y >= -h && y <= h;
  }

  bool in_landmark(double x, double y) const {
    const double s = config_.landmark_half_size;
    return has_landmark() && std::abs(x) <= s && std::abs(y) <= s;
  }

  double terrain_height(double x, double y) const {
    double h = config_.base_height;
    for (const auto& b : bumps_) {
      const double dx = x - b.cx;
      const double dy = y - b.cy;
      h += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    return h;
  }

  Vec2 terrain_gradient(double x, double y) const {
    Vec2 g = Vec2::Zero();
    for (const auto& b : bumps_) {
      const double dx = x - b.cx;
      const double dy = y - b.cy;
      const double s2 = b.sigma * b.sigma;
      const double e = b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
      g.x() -= e * dx / s2;
      g.y() -= e * dy / s2;
    }
    return g;
  }

  double height(double x, double y) const {
    const double t = terrain_height(x, y);
    return in_landmark(x, y) ? std::max(t, landmark_top_) : t;
  }

  // True if p lies on the scene surface: on the height graph, or on a
  // vertical face of the landmark box.
  bool on_surface(const Vec3& p, double tol) const {
    if (std::abs(p.z() - height(p.x(), p.y())) <= tol) return true;
    if (!has_landmark()) return false;
    const double s = config_.landmark_half_size;
    const double ax = std::abs(p.x());
    const double ay = std::abs(p.y());
    const bool on_x_face = std::abs(ax - s) <= tol && ay <= s + tol;
    const bool on_y_face = std::abs(ay - s) <= tol && ax <= s + tol;
    return (on_x_face || on_y_face) && p.z() <= landmark_top_ + tol &&
           p.z() >= terrain_height(p.x(), p.y()) - tol;
  }

  // First intersection of origin + t * dir (t > 0) with the surface,
  // restricted to the scene extent.
  std::optional<RayHit> cast(const Vec3& origin, const Vec3& dir) const {
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    const double h = half_extent();
    if (!clip_slab(origin.x(), dir.x(), -h, h, t0, t1)) return std::nullopt;
    if (!clip_slab(origin.y(), dir.y(), -h, h, t0, t1)) return std::nullopt;
    if (!clip_slab(origin.z(), dir.z(), -1.0, max_height_ + 1.0, t0, t1)) return std::nullopt;

    std::optional<RayHit> box_hit = cast_landmark(origin, dir);
    double t_end = t1;
    if (box_hit) t_end = std::min(t_end, box_hit->t);

    if (auto terrain = cast_terrain(origin, dir, t0, t_end)) return terrain;
    if (box_hit && box_hit->t <= t1) return box_hit;
    return std::nullopt;
  }

 private:
  void finalize() {
    landmark_top_ = terrain_height(0.0, 0.0) + config_.landmark_height;
    double upper = config_.base_height;
    slope_bound_ = 0.0;
    for (const auto& b : bumps_) {
      upper += b.amplitude;
      // max |grad| of one bump is A / (sigma * sqrt(e))
      slope_bound_ += b.amplitude / (b.sigma * std::sqrt(std::exp(1.0)));
    }
    max_height_ = has_landmark() ? std::max(upper, landmark_top_) : upper;
  }

  static bool clip_slab(double o, double d, double lo, double hi, double& t0, double& t1) {
    if (d == 0.0) return o >= lo && o <= hi;
    double a = (lo - o) / d;
    double b = (hi - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    return t0 <= t1;
  }

  std::optional<RayHit> cast_landmark(const Vec3& o, const Vec3& d) const {
    if (!has_landmark()) return std::nullopt;
    const double s = config_.landmark_half_size;
    const double lo[3] = {-s, -s, -1.0};
    const double hi[3] = {s, s, landmark_top_};
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    int entry_axis = -1;
    for (int a = 0; a < 3; ++a) {
      if (d[a] == 0.0) {
        if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
        continue;
      }
      double ta = (lo[a] - o[a]) / d[a];
      double tb = (hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        entry_axis = a;
      }
      t1 = std::min(t1, tb);
      if (t0 > t1) return std::nullopt;
    }
    if (entry_axis < 0) return std::nullopt;  // origin inside the box
    RayHit hit;
    hit.t = t0;
    hit.normal = Vec3::Zero();
    hit.normal[entry_axis] = d[entry_axis] > 0.0 ? -1.0 : 1.0;
    hit.kind = entry_axis == 2 ? SurfaceKind::landmark_top : SurfaceKind::landmark_wall;
    return hit;
  }

  // Conservative stepping on f(t) = z(t) - terrain(xy(t)) using the global
  // slope bound, then bisection once a step crosses the surface.
  std::optional<RayHit> cast_terrain(const Vec3& o, const Vec3& d, double t_begin,
                                     double t_end) const {
    const double dxy = std::hypot(d.x(), d.y());
    const double rate = slope_bound_ * dxy - d.z();
    const auto f = [&](double t) {
      return o.z() + t * d.z() - terrain_height(o.x() + t * d.x(), o.y() + t * d.y());
    };
    const double scale = d.norm();
    const double min_step = 1e-3 / scale;
    double t = t_begin;
    double ft = f(t);
    if (ft <= 0.0) return terrain_hit(o, d, t);
    if (rate <= 0.0) return std::nullopt;

    for (int iter = 0; iter < 200000 && t < t_end; ++iter) {
      if (ft < 1e-7) return terrain_hit(o, d, t);
      const double t_next = std::min(t + std::max(ft / rate, min_step), t_end);
      const double f_next = f(t_next);
      if (f_next <= 0.0) {
        double lo = t;
        double hi = t_next;
        for (int k = 0; k < 80 && hi - lo > 1e-12 * std::max(1.0, hi); ++k) {
          const double mid = 0.5 * (lo + hi);
          (f(mid) > 0.0 ? lo : hi) = mid;
        }
        return terrain_hit(o, d, hi);
      }
      if (t_next >= t_end) break;
      t = t_next;
      ft = f_next;
    }
    return std::nullopt;
  }

  RayHit terrain_hit(const Vec3& o, const Vec3& d, double t) const {
    const Vec3 p = o + t * d;
    const Vec2 g = terrain_gradient(p.x(), p.y());
    RayHit hit;
    hit.t = t;
    hit.kind = SurfaceKind::terrain;
    hit.normal = Vec3(-g.x(), -g.y(), 1.0).normalized();
    return hit;
  }

  SceneConfig config_;
  std::vector<GaussianBump> bumps_;
  double landmark_top_ = 0.0;
  double max_height_ = 0.0;
  double slope_bound_ = 0.0;
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct RenderedView {
  DepthMap depth;  // z-depth, 0 where the ray leaves the scene
  ImageU8 rgb;
};

inline void check_camera_above_surface(const HeightfieldScene& scene, const Pose& pose) {
  const Vec3 c = pose.center();
  require(c.allFinite(), ErrorKind::invalid_camera, "camera center is not finite");
  require(!scene.in_extent(c.x(), c.y()) || c.z() > scene.height(c.x(), c.y()),
          ErrorKind::invalid_camera, "camera is below the terrain surface");
}

// World point seen at pixel (u, v) (continuous coordinates) with z-depth `depth`.
inline Vec3 unproject(const Pose& pose, const CameraIntrinsics& k, double u, double v,
                      double depth) {
  return pose.to_world(depth * k.ray(u, v));
}

namespace detail {

inline std::array<double, 3> surface_albedo(const HeightfieldScene& scene, const Vec3& p,
                                            SurfaceKind kind) {
  if (kind != SurfaceKind::terrain) return {0.72, 0.38, 0.30};
  const double rel = std::clamp((p.z() - scene.config().base_height) / 30.0, 0.0, 1.0);
  std::array<double, 3> a = {0.30 + 0.35 * rel, 0.50 + 0.10 * rel, 0.25 + 0.30 * rel};
  // 50 m grid of darker lines gives the imagery some texture.
  const double gx = std::abs(std::remainder(p.x(), 50.0));
  const double gy = std::abs(std::remainder(p.y(), 50.0));
  if (gx < 1.0 || gy < 1.0) {
    for (double& c : a) c *= 0.6;
  }
  return a;
}

}  // namespace detail

inline RenderedView render_view(const HeightfieldScene& scene, const Pose& pose,
                                const CameraIntrinsics& k) {
  k.validate();
  check_camera_above_surface(scene, pose);
  RenderedView out{DepthMap(k.width, k.height, 1, 0.0f), ImageU8(k.width, k.height, 3, 0)};
  const Vec3 origin = pose.center();
  const Mat3 cam_to_world = pose.rotation.matrix().transpose();
  const Vec3 sun = Vec3(0.4, 0.3, 0.866).normalized();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir = cam_to_world * k.ray(u + 0.5, v + 0.5);
      const auto hit = scene.cast(origin, dir);
      if (!hit) {
        out.rgb.at(u, v, 0) = 140;
        out.rgb.at(u, v, 1) = 180;
        out.rgb.at(u, v, 2) = 230;
        continue;
      }
      // dir has unit camera-z component, so the ray parameter is the z-depth.
      out.depth.at(u, v) = static_cast<float>(hit->t);
      const Vec3 p = origin + hit->t * dir;
      const auto albedo = detail::surface_albedo(scene, p, hit->kind);
      const double shade = 0.25 + 0.75 * std::max(0.0, hit->normal.dot(sun));
      for (int c = 0; c < 3; ++c) {
        out.rgb.at(u, v, c) =
            static_cast<std::uint8_t>(std::lround(std::clamp(albedo[c] * shade, 0.0, 1.0) * 255.0));
      }
    }
  }
  return out;
}

inline DepthMap render_depth(const HeightfieldScene& scene, const Pose& pose,
                             const CameraIntrinsics& k) {
  return render_view(scene, pose, k).depth;
}

}  // namespace skybench
