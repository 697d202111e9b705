#pragma once

// httplib pulls in <resolv.h>, whose `_res` macro breaks Eigen headers
// included after it.
#include <Eigen/Dense>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <filesystem>
#include <memory>
#include <string>

#include "skybench/error.hpp"
#include "skybench/image.hpp"
#include "skybench/tilemath.hpp"

namespace skybench {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Minimal GET interface so tile retrieval can be pointed at a stub.
class HttpClient {
 public:
  virtual ~HttpClient() = default;
  // Throws Error(network_error) when no response was received at all.
  virtual HttpResponse get(const std::string& url) = 0;
};

// cpp-httplib backed client. Accepts absolute http:// or https:// URLs.
class HttplibClient final : public HttpClient {
 public:
  explicit HttplibClient(int timeout_seconds = 10) : timeout_seconds_(timeout_seconds) {}

  HttpResponse get(const std::string& url) override {
    const auto scheme_end = url.find("://");
    require(scheme_end != std::string::npos, ErrorKind::invalid_input, "URL without scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_follow_location(true);
    auto res = client.Get(path);
    if (!res) {
      fail(ErrorKind::network_error,
           "GET " + url + " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body};
  }

 private:
  int timeout_seconds_;
};

inline std::filesystem::path tile_cache_path(const std::filesystem::path& cache_dir,
                                             const TileCoord& t) {
  return cache_dir / std::to_string(t.zoom) /
         (std::to_string(t.x) + "_" + std::to_string(t.y) + ".jpeg");
}

inline TileImage decode_tile(const std::string& bytes, const TileCoord& t) {
  TileImage img;
  if (!try_decode_jpeg(bytes, img)) {
    fail(ErrorKind::corrupt_tile, "tile " + tile_to_quadkey(t).digits + " is not a valid JPEG");
  }
  if (img.width != kTileSize || img.height != kTileSize) {
    fail(ErrorKind::invalid_tile, "tile " + tile_to_quadkey(t).digits + " is " +
                                      std::to_string(img.width) + "x" +
                                      std::to_string(img.height) + ", expected 256x256");
  }
  return img;
}

// Cache-first tile lookup. A cached file is decoded as-is; on a miss the tile
// is downloaded, validated, and only then written to the cache (byte-exact).
inline TileImage fetch_tile(const TileCoord& t, const std::filesystem::path& cache_dir,
                            HttpClient* client, const std::string& endpoint = kBingTileEndpoint) {
  const auto path = tile_cache_path(cache_dir, t);
  if (std::filesystem::exists(path)) return decode_tile(read_file_bytes(path), t);

  require(client != nullptr, ErrorKind::tile_unavailable,
          "tile " + std::to_string(t.x) + "," + std::to_string(t.y) +
              " not cached and no network client configured");
  const std::string url = tile_url(tile_to_quadkey(t), endpoint);
  const HttpResponse res = client->get(url);
  if (res.status != 200) {
    fail(ErrorKind::tile_unavailable, "GET " + url + " returned HTTP " + std::to_string(res.status));
  }
  TileImage img = decode_tile(res.body, t);
  write_file_atomic(path, res.body);
  return img;
}

inline TileFetcher make_cached_fetcher(std::filesystem::path cache_dir, HttpClient* client,
                                       std::string endpoint = kBingTileEndpoint) {
  return [cache_dir = std::move(cache_dir), client, endpoint = std::move(endpoint)](
             const TileCoord& t) { return fetch_tile(t, cache_dir, client, endpoint); };
}

}  // namespace skybench
