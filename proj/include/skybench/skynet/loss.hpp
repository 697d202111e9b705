#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"
#include "skybench/manifest.hpp"
#include "skybench/skynet/model.hpp"

namespace skybench::skynet {

inline constexpr double kDefaultAlpha = 0.4;

struct FrameTarget {
  std::string id;
  Modality modality = Modality::ground;
  CameraVector9 camera;
  DepthMap depth;  // pixels <= 0 or non-finite are ignored
};

struct LossParts {
  double cam_sat = 0.0;
  double cam_ground_aerial = 0.0;
  double depth = 0.0;
  double total = 0.0;
};

// Mean absolute error over the 9 components, quaternions canonicalized first.
inline double camera_mae(const CameraVector9& pred, const CameraVector9& gt) {
  CameraVector9 a = pred;
  CameraVector9 b = gt;
  a.q = a.q.canonical();
  b.q = b.q.canonical();
  const auto va = a.values();
  const auto vb = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += std::abs(va[i] - vb[i]);
  return s / static_cast<double>(va.size());
}

// Returns false when the target has no valid pixel.
inline bool depth_mae(const DepthMap& pred, const DepthMap& gt, double& out) {
  require(pred.same_shape(gt), ErrorKind::invalid_shape,
          "predicted depth " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
              " does not match target " + std::to_string(gt.width) + "x" +
              std::to_string(gt.height));
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const float g = gt.data[i];
    if (!(g > 0.0f) || !std::isfinite(g)) continue;
    s += std::abs(static_cast<double>(pred.data[i]) - g);
    ++n;
  }
  if (n == 0) return false;
  out = s / static_cast<double>(n);
  return true;
}

inline double combine_loss(double cam_sat, double cam_ground_aerial, double depth, double alpha) {
  return cam_sat + alpha * cam_ground_aerial + depth;
}

inline LossParts compute_loss(const ForwardOutput& pred, std::span<const FrameTarget> gt,
                              double alpha = kDefaultAlpha) {
  require(std::isfinite(alpha) && alpha >= 0.0, ErrorKind::invalid_input,
          "alpha must be finite and non-negative");
  require(pred.ids.size() == gt.size() && pred.cameras.size() == gt.size() &&
              pred.depths.size() == gt.size(),
          ErrorKind::invalid_pairing,
          "prediction has " + std::to_string(pred.ids.size()) + " frames, targets have " +
              std::to_string(gt.size()));
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    require(by_id.emplace(gt[i].id, i).second, ErrorKind::invalid_pairing,
            "duplicate target id '" + gt[i].id + "'");
  }

  double sat_sum = 0.0, ga_sum = 0.0, depth_sum = 0.0;
  std::size_t sat_n = 0, ga_n = 0, depth_n = 0;
  std::map<std::string, bool> used;
  for (std::size_t f = 0; f < pred.ids.size(); ++f) {
    auto it = by_id.find(pred.ids[f]);
    require(it != by_id.end(), ErrorKind::invalid_pairing,
            "no target for frame '" + pred.ids[f] + "'");
    require(!used[pred.ids[f]], ErrorKind::invalid_pairing,
            "frame '" + pred.ids[f] + "' appears twice in the prediction");
    used[pred.ids[f]] = true;
    const FrameTarget& t = gt[it->second];
    require(t.modality == pred.modalities[f], ErrorKind::invalid_pairing,
            "modality mismatch for frame '" + pred.ids[f] + "'");
    const double cam = camera_mae(pred.cameras[f], t.camera);
    if (t.modality == Modality::satellite) {
      sat_sum += cam;
      ++sat_n;
    } else {
      ga_sum += cam;
      ++ga_n;
    }
    double d = 0.0;
    if (depth_mae(pred.depths[f], t.depth, d)) {
      depth_sum += d;
      ++depth_n;
    }
  }

  LossParts parts;
  parts.cam_sat = sat_n ? sat_sum / static_cast<double>(sat_n) : 0.0;
  parts.cam_ground_aerial = ga_n ? ga_sum / static_cast<double>(ga_n) : 0.0;
  parts.depth = depth_n ? depth_sum / static_cast<double>(depth_n) : 0.0;
  parts.total = combine_loss(parts.cam_sat, parts.cam_ground_aerial, parts.depth, alpha);
  return parts;
}

// Nearest-neighbour resample, used to bring stored depth to the model resolution.
inline DepthMap resample_depth_nearest(const DepthMap& src, int width, int height) {
  require(src.width > 0 && src.height > 0, ErrorKind::invalid_shape, "empty depth map");
  DepthMap out(width, height, 1);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.height - 1, static_cast<int>((y + 0.5) * src.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(src.width - 1, static_cast<int>((x + 0.5) * src.width / width));
      out.at(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

}  // namespace skybench::skynet
