#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skybench/error.hpp"
#include "skybench/image.hpp"

namespace skybench {

// Web-Mercator tile indexing and Bing-style quadkeys.

inline constexpr int kTileSize = 256;
inline constexpr double kMaxMercatorLatitude = 85.05112878;
inline constexpr int kMaxZoom = 30;
inline constexpr const char* kBingTileEndpoint = "https://ecn.t3.tiles.virtualearth.net";

struct TileCoord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  int zoom = 0;

  bool valid() const {
    if (zoom < 0 || zoom > kMaxZoom) return false;
    const std::int64_t n = std::int64_t{1} << zoom;
    return x >= 0 && x < n && y >= 0 && y < n;
  }

  bool operator==(const TileCoord&) const = default;
};

struct Quadkey {
  std::string digits;

  int zoom() const { return static_cast<int>(digits.size()); }
  bool operator==(const Quadkey&) const = default;
};

inline TileCoord latlon_to_tile(double lat_deg, double lon_deg, int zoom) {
  require(zoom >= 1 && zoom <= kMaxZoom, ErrorKind::invalid_input,
          "zoom must be in [1, " + std::to_string(kMaxZoom) + "]");
  require(std::isfinite(lat_deg) && std::abs(lat_deg) <= kMaxMercatorLatitude,
          ErrorKind::out_of_projection,
          "latitude " + std::to_string(lat_deg) + " outside Web-Mercator bounds");
  require(std::isfinite(lon_deg) && lon_deg >= -180.0 && lon_deg <= 180.0,
          ErrorKind::invalid_input, "longitude must be in [-180, 180]");

  const double lat_rad = lat_deg * M_PI / 180.0;
  const double n = std::ldexp(1.0, zoom);
  const double fx = (lon_deg + 180.0) / 360.0 * n;
  const double fy = (1.0 - std::log(std::tan(lat_rad) + 1.0 / std::cos(lat_rad)) / M_PI) / 2.0 * n;

  // Clamp before truncating so the integer cast only sees [0, n - 1].
  const auto to_index = [n](double v) {
    const double clamped = std::clamp(v, 0.0, n - 1.0);
    return static_cast<std::int64_t>(clamped);
  };
  return {to_index(fx), to_index(fy), zoom};
}

inline Quadkey tile_to_quadkey(const TileCoord& t) {
  require(t.valid(), ErrorKind::invalid_input, "tile coordinate outside its zoom level");
  Quadkey q;
  q.digits.reserve(static_cast<std::size_t>(t.zoom));
  for (int i = t.zoom; i > 0; --i) {
    const std::int64_t mask = std::int64_t{1} << (i - 1);
    int digit = 0;
    if (t.x & mask) digit += 1;
    if (t.y & mask) digit += 2;
    q.digits.push_back(static_cast<char>('0' + digit));
  }
  return q;
}

inline TileCoord quadkey_to_tile(const Quadkey& q) {
  require(q.zoom() <= kMaxZoom, ErrorKind::invalid_quadkey, "quadkey longer than max zoom");
  TileCoord t{0, 0, q.zoom()};
  for (int i = t.zoom; i > 0; --i) {
    const std::int64_t mask = std::int64_t{1} << (i - 1);
    const char c = q.digits[static_cast<std::size_t>(t.zoom - i)];
    switch (c) {
      case '0': break;
      case '1': t.x |= mask; break;
      case '2': t.y |= mask; break;
      case '3': t.x |= mask; t.y |= mask; break;
      default:
        fail(ErrorKind::invalid_quadkey, std::string("invalid quadkey digit '") + c + "'");
    }
  }
  return t;
}

inline std::string tile_url(const Quadkey& q, const std::string& endpoint = kBingTileEndpoint) {
  require(!q.digits.empty(), ErrorKind::invalid_input, "tile URL needs a non-empty quadkey");
  return endpoint + "/tiles/a" + q.digits + ".jpeg?g=1";
}

// ---------------------------------------------------------------------------
// Stitching
// ---------------------------------------------------------------------------

// 256x256 RGB.
using TileImage = ImageU8;

// Returns the tile or throws skybench::Error; tile-level failures are
// absorbed by stitch_grid.
using TileFetcher = std::function<TileImage(const TileCoord&)>;

struct StitchedImage {
  ImageU8 pixels;
  double center_lat = 0.0;
  double center_lon = 0.0;
  int zoom = 0;
  int grid_size = 1;
};

struct TileMiss {
  TileCoord tile;
  std::string reason;
};

struct StitchResult {
  StitchedImage image;
  std::vector<TileMiss> misses;
};

inline bool is_tile_failure(ErrorKind kind) {
  return kind == ErrorKind::tile_unavailable || kind == ErrorKind::corrupt_tile ||
         kind == ErrorKind::invalid_tile || kind == ErrorKind::network_error ||
         kind == ErrorKind::io_error;
}

inline StitchResult stitch_grid(double lat_deg, double lon_deg, int zoom, int grid_size,
                                const TileFetcher& fetcher) {
  require(grid_size >= 1 && grid_size % 2 == 1, ErrorKind::invalid_input,
          "grid size must be odd and >= 1, got " + std::to_string(grid_size));
  const TileCoord center = latlon_to_tile(lat_deg, lon_deg, zoom);
  const int half = grid_size / 2;
  const std::int64_t n = std::int64_t{1} << zoom;
  require(center.x - half >= 0 && center.x + half < n && center.y - half >= 0 &&
              center.y + half < n,
          ErrorKind::invalid_input, "tile grid extends past the edge of the zoom level");

  StitchResult result;
  result.image.pixels = ImageU8(grid_size * kTileSize, grid_size * kTileSize, 3, 0);
  result.image.center_lat = lat_deg;
  result.image.center_lon = lon_deg;
  result.image.zoom = zoom;
  result.image.grid_size = grid_size;

  for (int dx = -half; dx <= half; ++dx) {
    for (int dy = -half; dy <= half; ++dy) {
      const TileCoord tile{center.x + dx, center.y + dy, zoom};
      TileImage img;
      try {
        img = fetcher(tile);
      } catch (const Error& e) {
        if (!is_tile_failure(e.kind())) throw;
        result.misses.push_back({tile, e.what()});
        continue;
      }
      if (img.width != kTileSize || img.height != kTileSize || img.channels != 3) {
        result.misses.push_back({tile, "fetcher returned a tile that is not 256x256 RGB"});
        continue;
      }
      const int px = (dx + half) * kTileSize;
      const int py = (dy + half) * kTileSize;
      for (int row = 0; row < kTileSize; ++row) {
        const auto* src = img.data.data() + img.index(0, row);
        auto* dst = result.image.pixels.data.data() + result.image.pixels.index(px, py + row);
        std::copy(src, src + kTileSize * 3, dst);
      }
    }
  }
  return result;
}

}  // namespace skybench
