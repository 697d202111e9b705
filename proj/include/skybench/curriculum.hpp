#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/geometry.hpp"
#include "skybench/image.hpp"
#include "skybench/manifest.hpp"
#include "skybench/rng.hpp"

namespace skybench {

// Fraction of the training schedule elapsed, in [0, 1].
class CurriculumProgress {
 public:
  explicit CurriculumProgress(double tau) : tau_(tau) {
    require(std::isfinite(tau) && tau >= 0.0 && tau <= 1.0, ErrorKind::invalid_input,
            "curriculum progress tau must be in [0, 1], got " + std::to_string(tau));
  }
  double tau() const { return tau_; }

 private:
  double tau_;
};

// Round half to even, matching the equal-offset positions of the sampler.
inline double round_half_even(double v) { return std::nearbyint(v); }

// ---------------------------------------------------------------------------
// Pairwise distance cache
// ---------------------------------------------------------------------------

class DistanceCache {
 public:
  DistanceCache() = default;
  DistanceCache(std::vector<std::string> ids, std::vector<double> d)
      : ids_(std::move(ids)), d_(std::move(d)) {
    require(d_.size() == ids_.size() * ids_.size(), ErrorKind::invalid_shape,
            "distance matrix does not match the id list");
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * ids_.size() + j]; }
  std::span<const double> row(std::size_t i) const {
    return {d_.data() + i * ids_.size(), ids_.size()};
  }

 private:
  std::vector<std::string> ids_;
  std::vector<double> d_;
};

inline DistanceCache build_distance_cache(std::span<const Pose> poses,
                                          std::vector<std::string> ids,
                                          double lambda_t = kDefaultLambdaT) {
  require(poses.size() >= 2, ErrorKind::invalid_input, "distance cache needs at least 2 views");
  require(ids.size() == poses.size(), ErrorKind::invalid_input, "ids and poses differ in length");
  require(lambda_t >= 0.0, ErrorKind::invalid_input, "lambda_t must be non-negative");
  const std::size_t m = poses.size();
  std::vector<double> d(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double v = pair_distance(poses[i], poses[j], lambda_t);
      d[i * m + j] = v;
      d[j * m + i] = v;
    }
  }
  return {std::move(ids), std::move(d)};
}

inline DistanceCache build_distance_cache(std::span<const ViewRecord> views,
                                          double lambda_t = kDefaultLambdaT) {
  std::vector<Pose> poses;
  std::vector<std::string> ids;
  poses.reserve(views.size());
  ids.reserve(views.size());
  for (const auto& v : views) {
    poses.push_back(v.pose());
    ids.push_back(v.id);
  }
  return build_distance_cache(poses, std::move(ids), lambda_t);
}

// Cache file: "SKYC", u32 M, then M*M little-endian f32 row-major. Ids are
// not stored; they follow manifest order.
inline std::string encode_distance_cache(const DistanceCache& cache) {
  std::string out = "SKYC";
  detail::put_u32(out, static_cast<std::uint32_t>(cache.size()));
  for (std::size_t i = 0; i < cache.size(); ++i) {
    for (double v : cache.row(i)) detail::put_f32(out, static_cast<float>(v));
  }
  return out;
}

inline DistanceCache decode_distance_cache(const std::string& bytes, std::vector<std::string> ids) {
  require(bytes.size() >= 8 && bytes.compare(0, 4, "SKYC") == 0, ErrorKind::io_error,
          "not a distance cache (bad magic)");
  const std::size_t m = detail::get_u32(bytes, 4);
  require(bytes.size() == 8 + m * m * 4, ErrorKind::io_error, "distance cache size mismatch");
  require(ids.size() == m, ErrorKind::invalid_input,
          "distance cache covers " + std::to_string(m) + " views but " +
              std::to_string(ids.size()) + " ids were given");
  std::vector<double> d(m * m);
  for (std::size_t k = 0; k < m * m; ++k) d[k] = detail::get_f32(bytes, 8 + 4 * k);
  return {std::move(ids), std::move(d)};
}

// ---------------------------------------------------------------------------
// Curriculum-aware camera sampling
// ---------------------------------------------------------------------------

// Number of nearest candidates eligible at progress tau: grows linearly from
// n (only the nearest) to all candidates.
inline std::size_t cacs_prefix_length(std::size_t candidates, std::size_t n,
                                      const CurriculumProgress& progress) {
  const double grow = static_cast<double>(candidates - n) * progress.tau();
  const auto p = static_cast<std::size_t>(std::ceil(static_cast<double>(n) + grow - 1e-9));
  return std::clamp(p, std::max<std::size_t>(n, 1), candidates);
}

// Candidate indices ordered by distance from the anchor (ties by index).
inline std::vector<std::size_t> sorted_by_distance(std::size_t anchor, const DistanceCache& cache,
                                                   std::span<const std::size_t> candidates) {
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  const auto row = cache.row(anchor);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (row[a] != row[b]) return row[a] < row[b];
    return a < b;
  });
  return order;
}

// Picks n views at equal stride inside the eligible prefix of the
// distance-sorted candidates. `candidates` defaults to every non-anchor view.
inline std::vector<std::size_t> cacs_sample(std::size_t anchor, const DistanceCache& cache,
                                            std::size_t n, const CurriculumProgress& progress,
                                            std::optional<std::span<const std::size_t>> candidates = {}) {
  require(anchor < cache.size(), ErrorKind::invalid_input, "anchor index out of range");
  std::vector<std::size_t> pool;
  if (candidates) {
    for (std::size_t c : *candidates) {
      require(c < cache.size(), ErrorKind::invalid_input, "candidate index out of range");
      if (c != anchor) pool.push_back(c);
    }
  } else {
    for (std::size_t c = 0; c < cache.size(); ++c) {
      if (c != anchor) pool.push_back(c);
    }
  }
  require(n <= pool.size(), ErrorKind::insufficient_views,
          "requested " + std::to_string(n) + " views but only " + std::to_string(pool.size()) +
              " candidates exist");
  if (n == 0) return {};

  const auto sorted = sorted_by_distance(anchor, cache, pool);
  const std::size_t prefix = cacs_prefix_length(sorted.size(), n, progress);
  std::vector<std::size_t> out;
  out.reserve(n);
  if (n == 1) {
    out.push_back(sorted.front());
    return out;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = round_half_even(static_cast<double>(k) * (prefix - 1) / (n - 1));
    out.push_back(sorted[static_cast<std::size_t>(pos)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Progressive view sampling
// ---------------------------------------------------------------------------

struct PvsCounts {
  std::size_t n_a = 0;
  std::size_t n_g = 0;
  std::size_t n_s = 0;

  std::size_t total() const { return n_a + n_g + n_s; }
  std::size_t of(Modality m) const {
    switch (m) {
      case Modality::ground: return n_g;
      case Modality::aerial: return n_a;
      case Modality::satellite: return n_s;
    }
    return 0;
  }
  bool operator==(const PvsCounts&) const = default;
};

// Aerial-heavy at tau = 0, ground/satellite only at tau = 1; at least one
// ground and one satellite view at every point, odd leftovers go to ground.
inline PvsCounts pvs_counts(std::size_t n_total, const CurriculumProgress& progress) {
  require(n_total >= 3, ErrorKind::invalid_batch,
          "batch needs at least 3 views, got " + std::to_string(n_total));
  PvsCounts c;
  c.n_a = static_cast<std::size_t>(
      round_half_even((1.0 - progress.tau()) * static_cast<double>(n_total - 2)));
  const std::size_t leftover = n_total - c.n_a - 2;
  c.n_g = 1 + (leftover + 1) / 2;
  c.n_s = 1 + leftover / 2;
  return c;
}

// Uniform draw without replacement per modality. Output is ground ids, then
// aerial ids, then satellite ids, each in draw order.
inline std::vector<std::string> pvs_sample(const SiteManifest& manifest, const PvsCounts& counts,
                                           std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x9f5));
  std::vector<std::string> out;
  for (Modality m : {Modality::ground, Modality::aerial, Modality::satellite}) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < manifest.views.size(); ++i) {
      if (manifest.views[i].modality == m) pool.push_back(i);
    }
    const std::size_t want = counts.of(m);
    require(want <= pool.size(), ErrorKind::insufficient_views,
            "insufficient " + to_string(m) + " views: need " + std::to_string(want) + ", have " +
                std::to_string(pool.size()));
    for (std::size_t k = 0; k < want; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.below(pool.size() - k));
      std::swap(pool[k], pool[pick]);
      out.push_back(manifest.views[pool[k]].id);
    }
  }
  return out;
}

// P-VS counts first, then CA-CS within each modality relative to a ground
// anchor. The anchor itself fills one of the ground slots.
inline std::vector<std::string> composed_sample(const SiteManifest& manifest,
                                                const DistanceCache& cache, std::size_t anchor,
                                                const PvsCounts& counts,
                                                const CurriculumProgress& progress) {
  require(cache.size() == manifest.views.size(), ErrorKind::invalid_input,
          "distance cache does not cover the manifest");
  require(anchor < manifest.views.size(), ErrorKind::invalid_input, "anchor index out of range");
  const Modality anchor_mod = manifest.views[anchor].modality;
  std::vector<std::string> out;
  for (Modality m : {Modality::ground, Modality::aerial, Modality::satellite}) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < manifest.views.size(); ++i) {
      if (manifest.views[i].modality == m && i != anchor) pool.push_back(i);
    }
    std::size_t want = counts.of(m);
    if (m == anchor_mod && want > 0) {
      out.push_back(manifest.views[anchor].id);
      --want;
    }
    if (want > pool.size()) {
      fail(ErrorKind::insufficient_views, "insufficient " + to_string(m) + " views: need " +
                                              std::to_string(want) + ", have " +
                                              std::to_string(pool.size()));
    }
    for (std::size_t idx : cacs_sample(anchor, cache, want, progress, std::span<const std::size_t>(pool))) {
      out.push_back(manifest.views[idx].id);
    }
  }
  return out;
}

}  // namespace skybench
