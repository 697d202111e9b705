#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "skybench/geometry.hpp"
#include "skybench/rng.hpp"
#include "test_support.hpp"

using namespace skybench;
using skybench::testing::random_pose;
using skybench::testing::random_rotation;
using skybench::testing::random_vec;

namespace {

void expect_mat_near(const Mat3& a, const Mat3& b, double tol) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(a(i, j), b(i, j), tol) << "entry " << i << "," << j;
  }
}

}  // namespace

TEST(Quaternion, IdentityMapsToIdentityMatrix) {
  expect_mat_near(quat_to_rotation({1, 0, 0, 0}).matrix(), Mat3::Identity(), 0.0);
}

TEST(Quaternion, QuarterTurnAboutZ) {
  const double h = std::sqrt(2.0) / 2.0;
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  expect_mat_near(quat_to_rotation({h, 0, 0, h}).matrix(), expected, 1e-12);
}

TEST(Quaternion, RoundTripOnRandomSamples) {
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const auto q = random_unit_quaternion(rng.uniform(), rng.uniform(), rng.uniform());
    const auto back = rotation_to_quat(quat_to_rotation(q));
    const auto a = q.canonical();
    EXPECT_NEAR(back.w, a.w, 1e-9);
    EXPECT_NEAR(back.x, a.x, 1e-9);
    EXPECT_NEAR(back.y, a.y, 1e-9);
    EXPECT_NEAR(back.z, a.z, 1e-9);
    const Rotation3 r = random_rotation(rng);
    expect_mat_near(quat_to_rotation(rotation_to_quat(r)).matrix(), r.matrix(), 1e-9);
  }
}

TEST(Quaternion, NonUnitRejected) {
  try {
    quat_to_rotation({1.0, 0.1, 0.0, 0.0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
  EXPECT_NO_THROW(quat_to_rotation({1.0 + 5e-7, 0.0, 0.0, 0.0}));
}

TEST(Quaternion, CanonicalSign) {
  EXPECT_EQ((UnitQuaternion{-1, 0, 0, 0}.canonical()), (UnitQuaternion{1, 0, 0, 0}));
  EXPECT_EQ((UnitQuaternion{0, -1, 0, 0}.canonical()), (UnitQuaternion{0, 1, 0, 0}));
  EXPECT_EQ((UnitQuaternion{0, 0, 0, -1}.canonical()), (UnitQuaternion{0, 0, 0, 1}));
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto q = rotation_to_quat(random_rotation(rng));
    EXPECT_GE(q.w, 0.0);
  }
}

TEST(Rotation, FromMatrixValidates) {
  Mat3 m = Mat3::Identity();
  m(0, 0) = -1.0;  // reflection
  EXPECT_THROW(Rotation3::from_matrix(m), Error);
  m = Mat3::Identity() * 1.01;
  EXPECT_THROW(Rotation3::from_matrix(m), Error);
  EXPECT_NO_THROW(Rotation3::from_matrix(Rotation3::about_z(0.3).matrix()));
}

TEST(GeodesicDistance, DocumentedValues) {
  const Rotation3 id;
  EXPECT_EQ(rotation_geodesic_distance(id, id), 0.0);
  EXPECT_NEAR(rotation_geodesic_distance(id, Rotation3::about_z(kPi)), 1.0, 1e-9);
  EXPECT_NEAR(rotation_geodesic_distance(id, Rotation3::about_z(kPi / 2)), 0.5, 1e-9);
}

TEST(GeodesicDistance, MatchesArccosDefinition) {
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const Rotation3 a = random_rotation(rng);
    const Rotation3 b = random_rotation(rng);
    const double tr = (a.matrix().transpose() * b.matrix()).trace();
    const double ref = std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0)) / kPi;
    EXPECT_NEAR(rotation_geodesic_distance(a, b), ref, 1e-7);
  }
}

TEST(GeodesicDistance, SymmetricBoundedLeftInvariant) {
  Rng rng(7);
  for (int k = 0; k < 1000; ++k) {
    const Rotation3 a = random_rotation(rng);
    const Rotation3 b = random_rotation(rng);
    const Rotation3 q = random_rotation(rng);
    const double d = rotation_geodesic_distance(a, b);
    EXPECT_EQ(d, rotation_geodesic_distance(b, a));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_NEAR(rotation_geodesic_distance(q * a, q * b), d, 1e-9);
    EXPECT_NEAR(rotation_geodesic_distance(a, a), 0.0, 1e-9);
  }
}

TEST(GeodesicDistance, AccurateNearZeroAndPi) {
  const Rotation3 id;
  EXPECT_NEAR(rotation_geodesic_distance(id, Rotation3::about_z(1e-8)), 1e-8 / kPi, 1e-20);
  EXPECT_NEAR(rotation_geodesic_distance(id, Rotation3::about_z(kPi - 1e-8)), 1.0 - 1e-8 / kPi,
              1e-15);
}

TEST(PairDistance, DocumentedValues) {
  Rng rng(1);
  const Pose p = random_pose(rng);
  EXPECT_EQ(pair_distance(p, p), 0.0);

  const Pose a{Rotation3(), Vec3(0, 0, 0)};
  const Pose b{Rotation3::about_z(kPi / 2), Vec3(2, 0, 0)};
  EXPECT_NEAR(pair_distance(a, b, 0.5), 1.5, 1e-9);
  EXPECT_NEAR(pair_distance(a, b), 1.5, 1e-9);  // default lambda_t = 0.5
  EXPECT_EQ(pair_distance(a, b, 0.0), rotation_geodesic_distance(a.rotation, b.rotation));
}

TEST(PairDistance, NegativeLambdaRejected) {
  try {
    pair_distance(Pose{}, Pose{}, -0.1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
}

TEST(PairDistance, ZeroOnIdenticalAndMonotoneInLambda) {
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    double prev = -1.0;
    for (double lambda : {0.0, 0.1, 0.5, 1.0, 3.0}) {
      EXPECT_EQ(pair_distance(a, a, lambda), 0.0);
      const double d = pair_distance(a, b, lambda);
      EXPECT_GE(d, prev);
      prev = d;
    }
  }
}

TEST(RelativePose, IdentityCases) {
  Rng rng(13);
  const Pose p = random_pose(rng);
  const Pose id = relative_pose(Pose{}, Pose{});
  expect_mat_near(id.rotation.matrix(), Mat3::Identity(), 0.0);
  EXPECT_EQ(id.translation, Vec3::Zero());

  const Pose left = relative_pose(Pose{}, p);
  expect_mat_near(left.rotation.matrix(), p.rotation.matrix(), 1e-15);
  EXPECT_TRUE(left.translation.isApprox(p.translation, 1e-15));

  for (int k = 0; k < 50; ++k) {
    const Pose q = random_pose(rng);
    const Pose self = relative_pose(q, q);
    expect_mat_near(self.rotation.matrix(), Mat3::Identity(), 1e-12);
    EXPECT_LT(self.translation.norm(), 1e-12);
  }
}

TEST(RelativePose, MapsCameraICoordinatesToCameraJ) {
  Rng rng(17);
  for (int k = 0; k < 50; ++k) {
    const Pose pi = random_pose(rng);
    const Pose pj = random_pose(rng);
    const Vec3 world = random_vec(rng);
    const Pose rel = relative_pose(pi, pj);
    const Vec3 via = rel.rotation * pi.to_camera(world) + rel.translation;
    EXPECT_TRUE(via.isApprox(pj.to_camera(world), 1e-10));
  }
}

TEST(PoseErrors, DocumentedValues) {
  const Rotation3 r = Rotation3::about_z(0.4);
  EXPECT_NEAR(rotation_error_deg(r, r), 0.0, 1e-12);
  EXPECT_NEAR(translation_direction_error_deg({1, 0, 0}, {0, 1, 0}), 90.0, 1e-12);
  EXPECT_EQ(translation_direction_error_deg(Vec3::Zero(), Vec3::Zero()), 0.0);
  EXPECT_EQ(translation_direction_error_deg(Vec3::Zero(), Vec3(1, 0, 0)), 180.0);
  EXPECT_EQ(translation_direction_error_deg(Vec3(0, 0, 2), Vec3::Zero()), 180.0);
  EXPECT_NEAR(translation_direction_error_deg({1, 0, 0}, {-3, 0, 0}), 180.0, 1e-12);
  EXPECT_NEAR(translation_direction_error_deg({1, 0, 0}, {5, 0, 0}), 0.0, 1e-12);
  EXPECT_NEAR(rotation_error_deg(Rotation3(), Rotation3::about_z(deg_to_rad(6.0))), 6.0, 1e-9);
}

// ---------------------------------------------------------------------------
// Procrustes
// ---------------------------------------------------------------------------

namespace {

struct Instance {
  std::vector<Vec3> x, y;
  std::vector<double> w;
};

Instance constructed(Rng& rng, std::size_t n, double s, const Rotation3& r, const Vec3& t) {
  Instance in;
  for (std::size_t k = 0; k < n; ++k) {
    in.x.push_back(random_vec(rng, 5.0));
    in.y.push_back(s * (r * in.x.back()) + t);
    in.w.push_back(1.0);
  }
  return in;
}

}  // namespace

TEST(Procrustes, IdentityInstance) {
  Rng rng(21);
  auto in = constructed(rng, 8, 1.0, Rotation3(), Vec3::Zero());
  const auto tf = weighted_similarity_procrustes(in.x, in.y, in.w);
  EXPECT_NEAR(tf.scale, 1.0, 1e-12);
  expect_mat_near(tf.rotation.matrix(), Mat3::Identity(), 1e-12);
  EXPECT_LT(tf.translation.norm(), 1e-12);
}

TEST(Procrustes, RecoversConstructedTransform) {
  Rng rng(23);
  const Rotation3 rz = Rotation3::about_z(kPi / 2);
  auto in = constructed(rng, 10, 2.0, rz, {1, 2, 3});
  const auto tf = weighted_similarity_procrustes(in.x, in.y, in.w);
  EXPECT_NEAR(tf.scale, 2.0, 1e-9);
  expect_mat_near(tf.rotation.matrix(), rz.matrix(), 1e-9);
  EXPECT_NEAR(tf.translation.x(), 1.0, 1e-9);
  EXPECT_NEAR(tf.translation.y(), 2.0, 1e-9);
  EXPECT_NEAR(tf.translation.z(), 3.0, 1e-9);
  EXPECT_NEAR(tf.rotation.matrix().determinant(), 1.0, 1e-9);

  for (int k = 0; k < 20; ++k) {
    const double s = rng.uniform(0.1, 10.0);
    const Rotation3 r = random_rotation(rng);
    const Vec3 t = random_vec(rng, 100.0);
    auto inst = constructed(rng, 3 + k, s, r, t);
    for (auto& w : inst.w) w = rng.uniform(0.1, 2.0);
    const auto fit = weighted_similarity_procrustes(inst.x, inst.y, inst.w);
    EXPECT_NEAR(fit.scale, s, 1e-9 * s);
    expect_mat_near(fit.rotation.matrix(), r.matrix(), 1e-9);
    EXPECT_TRUE(fit.translation.isApprox(t, 1e-9));
  }
}

TEST(Procrustes, ZeroWeightOutlierIgnored) {
  Rng rng(29);
  auto in = constructed(rng, 12, 1.5, random_rotation(rng), {4, -1, 2});
  const auto clean = weighted_similarity_procrustes(in.x, in.y, in.w);
  in.x.push_back({0.5, 0.5, 0.5});
  in.y.push_back({100, -200, 300});
  in.w.push_back(0.0);
  const auto with_outlier = weighted_similarity_procrustes(in.x, in.y, in.w);
  EXPECT_NEAR(with_outlier.scale, clean.scale, 1e-12);
  expect_mat_near(with_outlier.rotation.matrix(), clean.rotation.matrix(), 1e-12);
  EXPECT_TRUE(with_outlier.translation.isApprox(clean.translation, 1e-12));
}

TEST(Procrustes, ReflectionCorrected) {
  // Mirrored targets: best proper rotation must still have det = +1.
  Rng rng(31);
  Instance in;
  for (int k = 0; k < 10; ++k) {
    const Vec3 p = random_vec(rng, 3.0);
    in.x.push_back(p);
    in.y.push_back({-p.x(), p.y(), p.z()});
    in.w.push_back(1.0);
  }
  const auto tf = weighted_similarity_procrustes(in.x, in.y, in.w);
  EXPECT_NEAR(tf.rotation.matrix().determinant(), 1.0, 1e-9);
  EXPECT_GT(tf.scale, 0.0);
}

TEST(Procrustes, NeverBeatenByRandomCandidates) {
  Rng rng(37);
  for (int inst = 0; inst < 5; ++inst) {
    Instance in;
    const Rotation3 r = random_rotation(rng);
    for (int k = 0; k < 15; ++k) {
      in.x.push_back(random_vec(rng, 5.0));
      in.y.push_back(1.3 * (r * in.x.back()) + Vec3(1, 1, 1) + random_vec(rng, 0.5));
      in.w.push_back(rng.uniform(0.0, 1.0));
    }
    const auto best = weighted_similarity_procrustes(in.x, in.y, in.w);
    const double best_res = weighted_residual(best, in.x, in.y, in.w);
    for (int c = 0; c < 1000; ++c) {
      SimilarityTransform cand;
      if (c % 2 == 0) {
        cand = {rng.uniform(0.1, 3.0), random_rotation(rng), random_vec(rng, 5.0)};
      } else {
        // Local perturbations of the optimum.
        cand = best;
        cand.scale *= 1.0 + rng.uniform(-0.01, 0.01);
        cand.rotation = Rotation3::about_axis(random_vec(rng).normalized(), rng.uniform(-0.01, 0.01)) *
                        best.rotation;
        cand.translation += random_vec(rng, 0.01);
      }
      EXPECT_GE(weighted_residual(cand, in.x, in.y, in.w), best_res - 1e-9);
    }
  }
}

TEST(Procrustes, DegenerateInputs) {
  const std::vector<Vec3> two = {{0, 0, 0}, {1, 0, 0}};
  const std::vector<double> w2 = {1, 1};
  const auto kind = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::io_error;
  };
  EXPECT_EQ(kind([&] { weighted_similarity_procrustes(two, two, w2); }),
            ErrorKind::degenerate_configuration);

  const std::vector<Vec3> same = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  const std::vector<double> w3 = {1, 1, 1};
  EXPECT_EQ(kind([&] { weighted_similarity_procrustes(same, same, w3); }),
            ErrorKind::degenerate_configuration);

  const std::vector<Vec3> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const std::vector<double> w4 = {1, 1, 1, 1};
  EXPECT_EQ(kind([&] { weighted_similarity_procrustes(line, line, w4); }),
            ErrorKind::degenerate_configuration);

  const std::vector<Vec3> tri = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const std::vector<double> zero = {0, 0, 0};
  EXPECT_EQ(kind([&] { weighted_similarity_procrustes(tri, tri, zero); }),
            ErrorKind::degenerate_configuration);
  const std::vector<double> neg = {1, -1, 1};
  EXPECT_EQ(kind([&] { weighted_similarity_procrustes(tri, tri, neg); }), ErrorKind::invalid_input);
}

TEST(Camera, IntrinsicsFromFov) {
  const auto k = CameraIntrinsics::from_fov(deg_to_rad(60.0), 64, 48);
  EXPECT_NEAR(k.fov_x(), deg_to_rad(60.0), 1e-12);
  EXPECT_EQ(k.cx, 32.0);
  EXPECT_EQ(k.cy, 24.0);
  const Vec2 px = k.project(k.ray(10.25, 7.5) * 3.0);
  EXPECT_NEAR(px.x(), 10.25, 1e-12);
  EXPECT_NEAR(px.y(), 7.5, 1e-12);
}

TEST(Camera, LookAtPointsPrincipalAxisAtTarget) {
  Rng rng(41);
  for (int k = 0; k < 50; ++k) {
    const Vec3 eye = random_vec(rng, 50.0);
    const Vec3 target = random_vec(rng, 5.0);
    const Pose p = Pose::from_center(look_at_rotation(eye, target), eye);
    const Vec3 c = p.to_camera(target);
    EXPECT_NEAR(c.x(), 0.0, 1e-9);
    EXPECT_NEAR(c.y(), 0.0, 1e-9);
    EXPECT_GT(c.z(), 0.0);
    EXPECT_NEAR(p.rotation.matrix().determinant(), 1.0, 1e-12);
    EXPECT_TRUE(p.center().isApprox(eye, 1e-12));
  }
}

TEST(Camera, CameraVectorUsesCanonicalQuaternion) {
  Rng rng(43);
  const Pose p = random_pose(rng);
  const auto k = CameraIntrinsics::from_fov(1.0, 64, 48);
  const auto g = CameraVector9::from_pose(p, k);
  EXPECT_GE(g.q.w, 0.0);
  EXPECT_NEAR(g.q.norm(), 1.0, 1e-12);
  EXPECT_GT(g.fov.x(), 0.0);
  EXPECT_LT(g.fov.y(), kPi);
  EXPECT_EQ(g.values()[4], p.translation.x());
}
