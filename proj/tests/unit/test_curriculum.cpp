#include <gtest/gtest.h>

#include <map>
#include <set>

#include "skybench/curriculum.hpp"
#include "skybench/scenegen.hpp"
#include "test_support.hpp"

using namespace skybench;
using skybench::testing::random_pose;
using skybench::testing::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io_error;
}

struct PoseSet {
  std::vector<Pose> poses;
  std::vector<std::string> ids;
};

PoseSet random_poses(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  PoseSet s;
  for (std::size_t i = 0; i < m; ++i) {
    s.poses.push_back(random_pose(rng));
    s.ids.push_back("v" + std::to_string(i));
  }
  return s;
}

// Cache whose anchor-0 row is 0, 1, 2, ... so sorted position == index - 1.
DistanceCache ladder_cache(std::size_t m) {
  std::vector<std::string> ids;
  std::vector<double> d(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    ids.push_back("v" + std::to_string(i));
    for (std::size_t j = 0; j < m; ++j) d[i * m + j] = std::abs(static_cast<double>(i) - j);
  }
  return {ids, d};
}

const SiteManifest& small_site() {
  static const SiteManifest m = [] {
    SiteConfig cfg;
    cfg.seed = 9;
    cfg.strict_counts = false;
    cfg.ground.count = 10;
    cfg.aerial.frames_per_band = {4, 4, 4};
    cfg.satellite.count = 8;
    return build_site(cfg).manifest;
  }();
  return m;
}

}  // namespace

TEST(Progress, RejectsOutOfRange) {
  EXPECT_EQ(kind_of([] { CurriculumProgress(-0.01); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([] { CurriculumProgress(1.01); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([] { CurriculumProgress(std::nan("")); }), ErrorKind::invalid_input);
  EXPECT_EQ(CurriculumProgress(0.0).tau(), 0.0);
  EXPECT_EQ(CurriculumProgress(1.0).tau(), 1.0);
}

TEST(DistanceCache, IdenticalPosesGiveZeros) {
  Rng rng(1);
  const Pose p = random_pose(rng);
  const std::vector<Pose> poses{p, p};
  const auto c = build_distance_cache(poses, {"a", "b"});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(c(i, j), 0.0);
  }
}

TEST(DistanceCache, EqualsDirectRecomputationExactly) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = random_poses(10, seed);
    const auto c = build_distance_cache(s.poses, s.ids);
    ASSERT_EQ(c.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_EQ(c(i, i), 0.0);
      for (std::size_t j = 0; j < 10; ++j) {
        if (i == j) continue;
        EXPECT_EQ(c(i, j), pair_distance(s.poses[i], s.poses[j], kDefaultLambdaT));
        EXPECT_EQ(c(i, j), c(j, i));
        EXPECT_GE(c(i, j), 0.0);
      }
    }
  }
}

TEST(DistanceCache, FromManifestFollowsViewOrder) {
  const auto& m = small_site();
  const auto c = build_distance_cache(std::span<const ViewRecord>(m.views));
  ASSERT_EQ(c.size(), m.views.size());
  for (std::size_t i = 0; i < m.views.size(); ++i) EXPECT_EQ(c.ids()[i], m.views[i].id);
  EXPECT_EQ(c(3, 17), pair_distance(m.views[3].pose(), m.views[17].pose()));
}

TEST(DistanceCache, FileRoundTrip) {
  const auto s = random_poses(7, 3);
  const auto c = build_distance_cache(s.poses, s.ids);
  TempDir dir("cache");
  const auto path = dir.path() / "pairs.skyc";
  write_file_atomic(path, encode_distance_cache(c));
  const std::string bytes = read_file_bytes(path);
  EXPECT_EQ(bytes.size(), 8u + 49u * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "SKYC");
  const auto back = decode_distance_cache(bytes, s.ids);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      EXPECT_EQ(back(i, j), static_cast<double>(static_cast<float>(c(i, j))));
    }
  }
  EXPECT_EQ(kind_of([&] { decode_distance_cache("XXXX1234", s.ids); }), ErrorKind::io_error);
  EXPECT_EQ(kind_of([&] { decode_distance_cache(bytes.substr(0, bytes.size() - 1), s.ids); }),
            ErrorKind::io_error);
  EXPECT_EQ(kind_of([&] { decode_distance_cache(bytes, {"a"}); }), ErrorKind::invalid_input);
}

TEST(DistanceCache, NeedsTwoViews) {
  const auto s = random_poses(1, 0);
  EXPECT_EQ(kind_of([&] { build_distance_cache(s.poses, s.ids); }), ErrorKind::invalid_input);
}

TEST(Cacs, PrefixLength) {
  EXPECT_EQ(cacs_prefix_length(10, 3, CurriculumProgress(0.0)), 3u);
  EXPECT_EQ(cacs_prefix_length(10, 3, CurriculumProgress(1.0)), 10u);
  EXPECT_EQ(cacs_prefix_length(10, 3, CurriculumProgress(0.5)), 7u);
  // ceil((M-1)(p0 + (1-p0) tau)) over a grid.
  for (int k = 0; k <= 100; ++k) {
    const double tau = k / 100.0;
    const double p0 = 3.0 / 10.0;
    const auto want = static_cast<std::size_t>(std::ceil(10.0 * (p0 + (1.0 - p0) * tau) - 1e-9));
    EXPECT_EQ(cacs_prefix_length(10, 3, CurriculumProgress(tau)), want) << tau;
  }
}

TEST(Cacs, DocumentedExamples) {
  const auto c = ladder_cache(11);
  EXPECT_EQ(cacs_sample(0, c, 3, CurriculumProgress(0.0)), (std::vector<std::size_t>{1, 2, 3}));
  // Sorted positions {0, 4, 9} map to indices {1, 5, 10}.
  EXPECT_EQ(cacs_sample(0, c, 3, CurriculumProgress(1.0)), (std::vector<std::size_t>{1, 5, 10}));
  for (double tau : {0.0, 0.3, 1.0}) {
    const auto all = cacs_sample(0, c, 10, CurriculumProgress(tau));
    EXPECT_EQ(all, (std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  }
  EXPECT_EQ(cacs_sample(4, c, 1, CurriculumProgress(1.0)), (std::vector<std::size_t>{3}));
  EXPECT_TRUE(cacs_sample(0, c, 0, CurriculumProgress(0.5)).empty());
}

TEST(Cacs, TiesBreakByIndex) {
  std::vector<double> d(16, 1.0);
  for (std::size_t i = 0; i < 4; ++i) d[i * 4 + i] = 0.0;
  const DistanceCache c({"a", "b", "c", "d"}, d);
  EXPECT_EQ(cacs_sample(2, c, 2, CurriculumProgress(0.0)), (std::vector<std::size_t>{0, 1}));
}

TEST(Cacs, TauZeroReturnsNearest) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = random_poses(15, 100 + seed);
    const auto c = build_distance_cache(s.poses, s.ids);
    const std::size_t anchor = seed % 15;
    const auto got = cacs_sample(anchor, c, 4, CurriculumProgress(0.0));
    // Oracle: full sort of the anchor row.
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < 15; ++j) {
      if (j != anchor) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return c(anchor, a) < c(anchor, b); });
    EXPECT_EQ(got, std::vector<std::size_t>(order.begin(), order.begin() + 4));
  }
}

TEST(Cacs, MeanDistanceNonDecreasingInTau) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = random_poses(30, 500 + seed);
    const auto c = build_distance_cache(s.poses, s.ids);
    double prev = -1.0;
    for (int k = 0; k <= 10; ++k) {
      const auto picks = cacs_sample(0, c, 5, CurriculumProgress(k / 10.0));
      ASSERT_EQ(picks.size(), 5u);
      EXPECT_EQ(std::set<std::size_t>(picks.begin(), picks.end()).size(), 5u);
      double mean = 0.0;
      for (std::size_t p : picks) mean += c(0, p);
      mean /= 5.0;
      EXPECT_GE(mean, prev) << "seed " << seed << " tau " << k / 10.0;
      prev = mean;
    }
  }
}

TEST(Cacs, Errors) {
  const auto c = ladder_cache(5);
  EXPECT_EQ(kind_of([&] { cacs_sample(0, c, 5, CurriculumProgress(0.0)); }),
            ErrorKind::insufficient_views);
  EXPECT_EQ(kind_of([&] { cacs_sample(9, c, 1, CurriculumProgress(0.0)); }), ErrorKind::invalid_input);
}

TEST(Pvs, DocumentedExamples) {
  EXPECT_EQ(pvs_counts(8, CurriculumProgress(0.0)), (PvsCounts{6, 1, 1}));
  EXPECT_EQ(pvs_counts(8, CurriculumProgress(1.0)), (PvsCounts{0, 4, 4}));
  EXPECT_EQ(pvs_counts(8, CurriculumProgress(0.5)), (PvsCounts{3, 3, 2}));
}

TEST(Pvs, EndpointsAndConservation) {
  for (std::size_t n = 3; n <= 24; ++n) {
    EXPECT_EQ(pvs_counts(n, CurriculumProgress(0.0)).n_a, n - 2);
    EXPECT_EQ(pvs_counts(n, CurriculumProgress(1.0)).n_a, 0u);
    std::size_t prev_a = n;
    for (int k = 0; k <= 100; ++k) {
      const auto c = pvs_counts(n, CurriculumProgress(k / 100.0));
      EXPECT_EQ(c.total(), n);
      EXPECT_GE(c.n_g, 1u);
      EXPECT_GE(c.n_s, 1u);
      EXPECT_GE(c.n_g, c.n_s);
      EXPECT_LE(c.n_g - c.n_s, 1u);
      EXPECT_LE(c.n_a, prev_a);
      prev_a = c.n_a;
    }
  }
}

TEST(Pvs, RejectsTinyBatches) {
  EXPECT_EQ(kind_of([] { pvs_counts(2, CurriculumProgress(0.0)); }), ErrorKind::invalid_batch);
  EXPECT_EQ(kind_of([] { pvs_counts(0, CurriculumProgress(1.0)); }), ErrorKind::invalid_batch);
}

TEST(Pvs, SampleDrawsPerModality) {
  const auto& m = small_site();
  std::map<std::string, Modality> mod;
  for (const auto& v : m.views) mod[v.id] = v.modality;

  const auto ids = pvs_sample(m, {0, 1, 1}, 5);
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(mod[ids[0]], Modality::ground);
  EXPECT_EQ(mod[ids[1]], Modality::satellite);

  const PvsCounts counts{5, 3, 2};
  const auto a = pvs_sample(m, counts, 77);
  EXPECT_EQ(a, pvs_sample(m, counts, 77));
  EXPECT_NE(a, pvs_sample(m, counts, 78));
  EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), a.size());
  std::map<Modality, std::size_t> per;
  for (const auto& id : a) ++per[mod[id]];
  EXPECT_EQ(per[Modality::aerial], 5u);
  EXPECT_EQ(per[Modality::ground], 3u);
  EXPECT_EQ(per[Modality::satellite], 2u);
}

TEST(Pvs, SampleCoversPoolUniformly) {
  const auto& m = small_site();
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    for (const auto& id : pvs_sample(m, {0, 1, 1}, seed)) ++hits[id];
  }
  // 10 ground views, 2000 draws: expect ~200 each.
  for (const auto& v : m.views) {
    if (v.modality != Modality::ground) continue;
    EXPECT_GT(hits[v.id], 130) << v.id;
    EXPECT_LT(hits[v.id], 270) << v.id;
  }
}

TEST(Pvs, InsufficientViewsNamesModality) {
  std::string msg;
  EXPECT_EQ(kind_of([&] { pvs_sample(small_site(), {0, 11, 1}, 0); }, &msg),
            ErrorKind::insufficient_views);
  EXPECT_NE(msg.find("ground"), std::string::npos) << msg;
}

TEST(Composed, AnchorFirstThenNearestPerModality) {
  const auto& m = small_site();
  const auto cache = build_distance_cache(std::span<const ViewRecord>(m.views));
  std::size_t anchor = 0;
  while (m.views[anchor].modality != Modality::ground) ++anchor;
  const PvsCounts counts{4, 2, 2};
  const auto ids = composed_sample(m, cache, anchor, counts, CurriculumProgress(0.0));
  ASSERT_EQ(ids.size(), 8u);
  EXPECT_EQ(ids[0], m.views[anchor].id);

  // Aerial block at tau = 0 equals the 4 nearest aerial views.
  std::vector<std::size_t> aerial;
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    if (m.views[i].modality == Modality::aerial) aerial.push_back(i);
  }
  const auto nearest = cacs_sample(anchor, cache, 4, CurriculumProgress(0.0),
                                   std::span<const std::size_t>(aerial));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(ids[2 + k], m.views[nearest[k]].id);
  EXPECT_EQ(ids, composed_sample(m, cache, anchor, counts, CurriculumProgress(0.0)));
}
