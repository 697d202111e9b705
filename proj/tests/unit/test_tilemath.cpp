#include <gtest/gtest.h>

#include <set>
#include <string>

#include "skybench/tilemath.hpp"

using namespace skybench;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io_error;
}

TileImage solid_tile(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  TileImage img(kTileSize, kTileSize, 3);
  for (int y = 0; y < kTileSize; ++y) {
    for (int x = 0; x < kTileSize; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  }
  return img;
}

}  // namespace

TEST(LatLonToTile, HandTracedExamples) {
  EXPECT_EQ(latlon_to_tile(0, 0, 1), (TileCoord{1, 1, 1}));
  EXPECT_EQ(latlon_to_tile(0, -180, 1), (TileCoord{0, 1, 1}));
  EXPECT_EQ(latlon_to_tile(85.05112878, -180, 1), (TileCoord{0, 0, 1}));
  EXPECT_EQ(latlon_to_tile(-85.05112878, 180, 1), (TileCoord{1, 1, 1}));
}

TEST(LatLonToTile, MatchesFloorFormulaAwayFromEdges) {
  for (int zoom = 1; zoom <= 18; zoom += 3) {
    for (double lat = -80.0; lat <= 80.0; lat += 13.7) {
      for (double lon = -179.0; lon <= 179.0; lon += 21.3) {
        const double n = std::ldexp(1.0, zoom);
        const double lr = lat * M_PI / 180.0;
        const auto x = static_cast<std::int64_t>(std::floor((lon + 180.0) / 360.0 * n));
        const auto y = static_cast<std::int64_t>(
            std::floor((1.0 - std::log(std::tan(lr) + 1.0 / std::cos(lr)) / M_PI) / 2.0 * n));
        EXPECT_EQ(latlon_to_tile(lat, lon, zoom), (TileCoord{x, y, zoom}));
      }
    }
  }
}

TEST(LatLonToTile, Errors) {
  EXPECT_EQ(kind_of([] { latlon_to_tile(85.1, 0, 3); }), ErrorKind::out_of_projection);
  EXPECT_EQ(kind_of([] { latlon_to_tile(-86, 0, 3); }), ErrorKind::out_of_projection);
  EXPECT_EQ(kind_of([] { latlon_to_tile(0, 0, 0); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([] { latlon_to_tile(0, 181, 3); }), ErrorKind::invalid_input);
}

TEST(Quadkey, HandTracedExamples) {
  EXPECT_EQ(tile_to_quadkey({0, 0, 1}).digits, "0");
  EXPECT_EQ(tile_to_quadkey({3, 5, 3}).digits, "213");
  EXPECT_EQ(tile_to_quadkey({1, 0, 1}).digits, "1");
  EXPECT_EQ(tile_to_quadkey({0, 0, 0}).digits, "");
  EXPECT_EQ(quadkey_to_tile({"213"}), (TileCoord{3, 5, 3}));
  EXPECT_EQ(quadkey_to_tile({"0"}), (TileCoord{0, 0, 1}));
  EXPECT_EQ(quadkey_to_tile({""}), (TileCoord{0, 0, 0}));
}

TEST(Quadkey, ExhaustiveRoundTripUpToZoom6) {
  std::size_t count = 0;
  for (int zoom = 0; zoom <= 6; ++zoom) {
    const std::int64_t n = std::int64_t{1} << zoom;
    std::set<std::string> seen;
    for (std::int64_t x = 0; x < n; ++x) {
      for (std::int64_t y = 0; y < n; ++y) {
        const TileCoord t{x, y, zoom};
        const Quadkey q = tile_to_quadkey(t);
        ASSERT_EQ(q.zoom(), zoom);
        ASSERT_EQ(quadkey_to_tile(q), t);
        ASSERT_EQ(tile_to_quadkey(quadkey_to_tile(q)), q);
        seen.insert(q.digits);
        ++count;
      }
    }
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(n * n));
  }
  EXPECT_EQ(count, 5461u);
}

TEST(Quadkey, ChildExtendsParent) {
  for (std::int64_t x = 0; x < 16; ++x) {
    for (std::int64_t y = 0; y < 16; ++y) {
      const auto child = tile_to_quadkey({x, y, 4}).digits;
      const auto parent = tile_to_quadkey({x / 2, y / 2, 3}).digits;
      EXPECT_EQ(child.substr(0, 3), parent);
    }
  }
}

TEST(Quadkey, InvalidDigit) {
  EXPECT_EQ(kind_of([] { quadkey_to_tile({"0124"}); }), ErrorKind::invalid_quadkey);
  EXPECT_EQ(kind_of([] { quadkey_to_tile({"a"}); }), ErrorKind::invalid_quadkey);
  EXPECT_EQ(kind_of([] { tile_to_quadkey({2, 0, 1}); }), ErrorKind::invalid_input);
}

TEST(TileUrl, ExactTemplate) {
  EXPECT_EQ(tile_url({"213"}), "https://ecn.t3.tiles.virtualearth.net/tiles/a213.jpeg?g=1");
  EXPECT_EQ(tile_url({"0"}), "https://ecn.t3.tiles.virtualearth.net/tiles/a0.jpeg?g=1");
  const std::string u = tile_url({"02313"});
  EXPECT_EQ(u.rfind("https://ecn.t3.tiles.virtualearth.net/tiles/a02313", 0), 0u);
  EXPECT_TRUE(u.ends_with("a02313.jpeg?g=1"));
  EXPECT_EQ(kind_of([] { tile_url({""}); }), ErrorKind::invalid_input);
  EXPECT_EQ(tile_url({"1"}, "http://127.0.0.1:9"), "http://127.0.0.1:9/tiles/a1.jpeg?g=1");
}

TEST(Stitch, SingleTileIsTheCenterTile) {
  const TileImage tile = solid_tile(10, 20, 30);
  int calls = 0;
  const auto res = stitch_grid(10.0, 20.0, 5, 1, [&](const TileCoord& t) {
    ++calls;
    EXPECT_EQ(t, latlon_to_tile(10.0, 20.0, 5));
    return tile;
  });
  EXPECT_EQ(calls, 1);
  EXPECT_TRUE(res.misses.empty());
  EXPECT_EQ(res.image.pixels, tile);
  EXPECT_EQ(res.image.zoom, 5);
  EXPECT_EQ(res.image.grid_size, 1);
}

TEST(Stitch, ThreeByThreeOffsets) {
  const TileCoord c = latlon_to_tile(47.6, -122.3, 10);
  const auto color = [&](const TileCoord& t) {
    return std::array<std::uint8_t, 3>{static_cast<std::uint8_t>(t.x - c.x + 1),
                                       static_cast<std::uint8_t>(t.y - c.y + 1), 7};
  };
  const auto res = stitch_grid(47.6, -122.3, 10, 3, [&](const TileCoord& t) {
    const auto col = color(t);
    return solid_tile(col[0], col[1], col[2]);
  });
  ASSERT_EQ(res.image.pixels.width, 768);
  ASSERT_EQ(res.image.pixels.height, 768);
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      const int px = (dx + 1) * 256;
      const int py = (dy + 1) * 256;
      for (auto [ox, oy] : {std::pair{0, 0}, std::pair{255, 255}, std::pair{128, 3}}) {
        EXPECT_EQ(res.image.pixels.at(px + ox, py + oy, 0), dx + 1);
        EXPECT_EQ(res.image.pixels.at(px + ox, py + oy, 1), dy + 1);
        EXPECT_EQ(res.image.pixels.at(px + ox, py + oy, 2), 7);
      }
    }
  }
}

TEST(Stitch, MissingTileLeavesBlackAndIsRecorded) {
  const TileCoord c = latlon_to_tile(47.6, -122.3, 10);
  const TileCoord bad{c.x + 1, c.y - 1, 10};
  const auto res = stitch_grid(47.6, -122.3, 10, 3, [&](const TileCoord& t) {
    if (t == bad) fail(ErrorKind::tile_unavailable, "stub miss");
    return solid_tile(200, 200, 200);
  });
  ASSERT_EQ(res.misses.size(), 1u);
  EXPECT_EQ(res.misses[0].tile, bad);
  for (int y = 0; y < 256; ++y) {
    for (int x = 512; x < 768; ++x) {
      ASSERT_EQ(res.image.pixels.at(x, y, 0), 0);
      ASSERT_EQ(res.image.pixels.at(x, y, 2), 0);
    }
  }
  EXPECT_EQ(res.image.pixels.at(100, 300, 0), 200);
}

TEST(Stitch, WrongSizedTileTreatedAsMiss) {
  const auto res = stitch_grid(0.5, 0.5, 4, 1, [](const TileCoord&) { return TileImage(10, 10, 3); });
  EXPECT_EQ(res.misses.size(), 1u);
}

TEST(Stitch, GridValidation) {
  const TileFetcher f = [](const TileCoord&) { return solid_tile(0, 0, 0); };
  EXPECT_EQ(kind_of([&] { stitch_grid(0.5, 0.5, 4, 4, f); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([&] { stitch_grid(0.5, 0.5, 4, 0, f); }), ErrorKind::invalid_input);
  // Center tile at the top-left corner: a 3x3 grid would leave the map.
  EXPECT_EQ(kind_of([&] { stitch_grid(85.0, -179.9, 2, 3, f); }), ErrorKind::invalid_input);
}

TEST(Stitch, NonTileErrorsPropagate) {
  EXPECT_EQ(kind_of([] {
              stitch_grid(0.5, 0.5, 4, 1, [](const TileCoord&) -> TileImage {
                fail(ErrorKind::invalid_input, "programming error");
              });
            }),
            ErrorKind::invalid_input);
}
