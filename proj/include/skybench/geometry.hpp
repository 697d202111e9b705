#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>

#include "skybench/error.hpp"

namespace skybench {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultLambdaT = 0.5;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// ---------------------------------------------------------------------------
// Rotation3
// ---------------------------------------------------------------------------

class Rotation3 {
 public:
  static constexpr double kTolerance = 1e-9;

  Rotation3() : m_(Mat3::Identity()) {}

  // Validates orthonormality and det = +1 to kTolerance.
  static Rotation3 from_matrix(const Mat3& m) {
    require(m.allFinite(), ErrorKind::invalid_input, "rotation has non-finite entries");
    const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    require(ortho <= kTolerance, ErrorKind::invalid_input,
            "rotation columns are not orthonormal (max deviation " + std::to_string(ortho) + ")");
    require(std::abs(m.determinant() - 1.0) <= kTolerance, ErrorKind::invalid_input,
            "rotation determinant is not +1");
    return unchecked(m);
  }

  // For matrices that are rotations by construction.
  static Rotation3 unchecked(const Mat3& m) {
    Rotation3 r;
    r.m_ = m;
    return r;
  }

  static Rotation3 about_axis(const Vec3& axis, double angle_rad) {
    return unchecked(Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix());
  }

  static Rotation3 about_z(double angle_rad) {
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    Mat3 m;
    m << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return unchecked(m);
  }

  const Mat3& matrix() const { return m_; }
  Rotation3 transpose() const { return unchecked(m_.transpose()); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation3 operator*(const Rotation3& other) const { return unchecked(m_ * other.m_); }

 private:
  Mat3 m_;
};

// ---------------------------------------------------------------------------
// UnitQuaternion
// ---------------------------------------------------------------------------

struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  // Sign flip only; never rescales, so bit patterns survive serialization.
  UnitQuaternion canonical() const {
    bool flip = w < 0.0;
    if (w == 0.0) {
      if (x != 0.0) {
        flip = x < 0.0;
      } else if (y != 0.0) {
        flip = y < 0.0;
      } else {
        flip = z < 0.0;
      }
    }
    if (!flip) return *this;
    return {-w, -x, -y, -z};
  }

  // Normalizes then canonicalizes. A zero quaternion maps to identity.
  static UnitQuaternion normalized(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n)) return {};
    return UnitQuaternion{w / n, x / n, y / n, z / n}.canonical();
  }

  std::array<double, 4> wxyz() const { return {w, x, y, z}; }

  bool operator==(const UnitQuaternion&) const = default;
};

inline constexpr double kQuaternionNormTolerance = 1e-6;

inline Rotation3 quat_to_rotation(const UnitQuaternion& q) {
  const double n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
  require(std::isfinite(n2) && std::abs(std::sqrt(n2) - 1.0) <= kQuaternionNormTolerance,
          ErrorKind::invalid_input, "quaternion is not unit norm");
  const double s = 2.0 / n2;
  const double wx = s * q.w * q.x, wy = s * q.w * q.y, wz = s * q.w * q.z;
  const double xx = s * q.x * q.x, xy = s * q.x * q.y, xz = s * q.x * q.z;
  const double yy = s * q.y * q.y, yz = s * q.y * q.z, zz = s * q.z * q.z;
  Mat3 m;
  m << 1.0 - (yy + zz), xy - wz, xz + wy,
       xy + wz, 1.0 - (xx + zz), yz - wx,
       xz - wy, yz + wx, 1.0 - (xx + yy);
  return Rotation3::unchecked(m);
}

inline UnitQuaternion rotation_to_quat(const Rotation3& r) {
  const Eigen::Quaterniond q(r.matrix());
  return UnitQuaternion::normalized(q.w(), q.x(), q.y(), q.z());
}

// ---------------------------------------------------------------------------
// Pose, intrinsics, camera encoding
// ---------------------------------------------------------------------------

// World-to-camera rigid transform: x_cam = R * X_world + t, with t = -R * C.
struct Pose {
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  static Pose from_center(const Rotation3& r, const Vec3& center) {
    return {r, -(r * center)};
  }

  Vec3 center() const { return -(rotation.transpose() * translation); }
  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * (cam - translation); }

  // Camera principal axis (+z of the camera) expressed in world coordinates.
  Vec3 principal_axis() const { return rotation.matrix().row(2).transpose(); }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  static CameraIntrinsics from_fov(double hfov_rad, int width, int height) {
    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = 0.5 * width / std::tan(0.5 * hfov_rad);
    k.fy = k.fx;
    k.cx = 0.5 * width;
    k.cy = 0.5 * height;
    return k;
  }

  void validate() const {
    require(fx > 0.0 && fy > 0.0, ErrorKind::invalid_input, "focal lengths must be positive");
    require(width > 0 && height > 0, ErrorKind::invalid_input, "image size must be positive");
    require(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height, ErrorKind::invalid_input,
            "principal point outside image");
  }

  double fov_x() const { return 2.0 * std::atan(0.5 * width / fx); }
  double fov_y() const { return 2.0 * std::atan(0.5 * height / fy); }

  // Ray direction in camera coordinates through pixel (u, v), with z = 1.
  Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

  Vec2 project(const Vec3& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

struct CameraVector9 {
  UnitQuaternion q;
  Vec3 t = Vec3::Zero();
  Vec2 fov = Vec2::Constant(kPi / 2.0);

  static CameraVector9 from_pose(const Pose& pose, const CameraIntrinsics& k) {
    return {rotation_to_quat(pose.rotation), pose.translation, Vec2(k.fov_x(), k.fov_y())};
  }

  std::array<double, 9> values() const {
    return {q.w, q.x, q.y, q.z, t.x(), t.y(), t.z(), fov.x(), fov.y()};
  }
};

struct SimilarityTransform {
  double scale = 1.0;
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

// Normalized geodesic angle between two rotations, in [0, 1].
//
// Evaluates arccos((Tr(R1^T R2) - 1) / 2) / pi through atan2 of the
// skew-symmetric and trace parts of R1^T R2. The two agree on SO(3); the
// atan2 form keeps full precision near 0 and pi where arccos loses about half
// the digits. Entries are formed with explicit loops so that swapping the
// arguments yields a bit-identical result.
inline double rotation_geodesic_distance(const Rotation3& r1, const Rotation3& r2) {
  const Mat3& a = r1.matrix();
  const Mat3& b = r2.matrix();
  double m[3][3];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      m[i][j] = a(0, i) * b(0, j) + a(1, i) * b(1, j) + a(2, i) * b(2, j);
    }
  }
  const double trace = m[0][0] + m[1][1] + m[2][2];
  const double cos_part = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  const double sx = m[2][1] - m[1][2];
  const double sy = m[0][2] - m[2][0];
  const double sz = m[1][0] - m[0][1];
  const double sin_part = 0.5 * std::sqrt(sx * sx + sy * sy + sz * sz);
  return std::atan2(sin_part, cos_part) / kPi;
}

// Combined camera distance: d_R + lambda_t * ||t1 - t2||.
inline double pair_distance(const Pose& p1, const Pose& p2, double lambda_t = kDefaultLambdaT) {
  require(lambda_t >= 0.0, ErrorKind::invalid_input, "lambda_t must be non-negative");
  const Vec3 dt = p1.translation - p2.translation;
  const double dist_t = std::sqrt(dt.x() * dt.x() + dt.y() * dt.y() + dt.z() * dt.z());
  return rotation_geodesic_distance(p1.rotation, p2.rotation) + lambda_t * dist_t;
}

// Maps camera-i coordinates to camera-j coordinates.
inline Pose relative_pose(const Pose& pi, const Pose& pj) {
  const Rotation3 r_rel = pj.rotation * pi.rotation.transpose();
  return {r_rel, pj.translation - r_rel * pi.translation};
}

inline double rotation_error_deg(const Rotation3& pred_rel, const Rotation3& gt_rel) {
  return 180.0 * rotation_geodesic_distance(pred_rel, gt_rel);
}

// Angle between translation directions. Both zero -> 0, exactly one zero -> 180.
inline double translation_direction_error_deg(const Vec3& pred_t, const Vec3& gt_t) {
  const bool pred_zero = pred_t.isZero(0.0);
  const bool gt_zero = gt_t.isZero(0.0);
  if (pred_zero && gt_zero) return 0.0;
  if (pred_zero || gt_zero) return 180.0;
  return rad_to_deg(std::atan2(pred_t.cross(gt_t).norm(), pred_t.dot(gt_t)));
}

// ---------------------------------------------------------------------------
// Weighted similarity Procrustes (Umeyama)
// ---------------------------------------------------------------------------

// Finds (s, R, t) minimizing sum_k w_k * ||s R x_k + t - y_k||^2.
inline SimilarityTransform weighted_similarity_procrustes(std::span<const Vec3> x,
                                                          std::span<const Vec3> y,
                                                          std::span<const double> w) {
  require(x.size() == y.size() && x.size() == w.size(), ErrorKind::invalid_input,
          "point and weight lists must have equal length");
  require(x.size() >= 3, ErrorKind::degenerate_configuration,
          "need at least 3 correspondences, got " + std::to_string(x.size()));

  double total = 0.0;
  Vec3 mean_x = Vec3::Zero();
  Vec3 mean_y = Vec3::Zero();
  for (std::size_t k = 0; k < x.size(); ++k) {
    require(w[k] >= 0.0 && std::isfinite(w[k]), ErrorKind::invalid_input,
            "weights must be finite and non-negative");
    total += w[k];
    mean_x += w[k] * x[k];
    mean_y += w[k] * y[k];
  }
  require(total > 0.0, ErrorKind::degenerate_configuration, "weights sum to zero");
  mean_x /= total;
  mean_y /= total;

  double var_x = 0.0;
  Mat3 cov = Mat3::Zero();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const Vec3 dx = x[k] - mean_x;
    const Vec3 dy = y[k] - mean_y;
    var_x += w[k] * dx.squaredNorm();
    cov += w[k] * dy * dx.transpose();
  }
  var_x /= total;
  cov /= total;
  require(var_x > 0.0, ErrorKind::degenerate_configuration, "source points are coincident");

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  require(sv(1) > 1e-12 * sv(0) && sv(0) > 0.0, ErrorKind::degenerate_configuration,
          "weighted covariance is rank deficient");

  Vec3 sign = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign(2) = -1.0;

  SimilarityTransform out;
  const Mat3 r = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  out.rotation = Rotation3::unchecked(r);
  out.scale = sv.dot(sign) / var_x;
  out.translation = mean_y - out.scale * (r * mean_x);
  return out;
}

inline double weighted_residual(const SimilarityTransform& tf, std::span<const Vec3> x,
                                std::span<const Vec3> y, std::span<const double> w) {
  double sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) sum += w[k] * (tf.apply(x[k]) - y[k]).squaredNorm();
  return sum;
}

// ---------------------------------------------------------------------------
// Camera construction helpers
// ---------------------------------------------------------------------------

// Rotation for a camera at `eye` looking at `target` (x right, y down, z forward).
// Falls back to +y as the reference "up" when the view is vertical, which
// puts image-up at world +y for nadir cameras.
inline Rotation3 look_at_rotation(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 up = Vec3::UnitZ();
  if (forward.cross(up).norm() < 1e-12) up = Vec3::UnitY();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 m;
  m.row(0) = right.transpose();
  m.row(1) = down.transpose();
  m.row(2) = forward.transpose();
  return Rotation3::unchecked(m);
}

inline UnitQuaternion random_unit_quaternion(double u1, double u2, double u3) {
  // Shoemake's uniform sampling from three uniforms in [0, 1).
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  return UnitQuaternion::normalized(a * std::sin(2.0 * kPi * u2), a * std::cos(2.0 * kPi * u2),
                                    b * std::sin(2.0 * kPi * u3), b * std::cos(2.0 * kPi * u3));
}

}  // namespace skybench
