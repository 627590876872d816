#pragma once

// Rigid/similarity transform algebra, rotation averaging, pose distance and
// the weighted Kabsch-Umeyama solver. All types use double precision and
// value semantics; every operation here is pure and reentrant.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace voxrec {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kQuatNormTol = 1e-9;

// Unit quaternion with hemisphere canonicalization: after construction or
// normalize() the first nonzero component of (w,x,y,z) is positive, which
// makes equality checks and serialized output deterministic.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {
    normalize();
  }

  static Quat identity() { return {}; }

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-300) return identity();
    const double half = 0.5 * angle;
    const double s = std::sin(half) / n;
    return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
  }

  static Quat from_matrix(const Mat3& m) {
    Eigen::Quaterniond q(m);
    return Quat(q.w(), q.x(), q.y(), q.z());
  }

  void normalize() {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n < 1e-300) throw std::invalid_argument("zero-norm quaternion");
    double inv = 1.0 / n;
    if (w < 0.0 || (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0))))))
      inv = -inv;
    w *= inv; x *= inv; y *= inv; z *= inv;
  }

  Quat conjugate() const {
    Quat q;
    q.w = w; q.x = -x; q.y = -y; q.z = -z;
    return q;
  }

  // Hamilton product, renormalized.
  Quat operator*(const Quat& o) const {
    return Quat(w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w);
  }

  Vec3 rotate(const Vec3& v) const {
    // q v q* via the two-cross-product form
    const Vec3 u(x, y, z);
    const Vec3 t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
  }

  Mat3 matrix() const {
    return Eigen::Quaterniond(w, x, y, z).toRotationMatrix();
  }

  double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

  // Geodesic rotation angle in [0, pi].
  double angle() const {
    return 2.0 * std::atan2(std::sqrt(x * x + y * y + z * z), std::abs(w));
  }
};

// Similarity transform p -> s * R(q) * p + t with s > 0.
struct Sim3 {
  Quat q;
  Vec3 t = Vec3::Zero();
  double s = 1.0;

  Sim3() = default;
  Sim3(const Quat& q_, const Vec3& t_, double s_ = 1.0) : q(q_), t(t_), s(s_) {
    if (!(s > 0.0)) throw std::invalid_argument("nonpositive scale");
  }

  static Sim3 identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return s * q.rotate(p) + t; }
};

inline Sim3 compose(const Sim3& a, const Sim3& b) {
  // (a o b)(p) = a(b(p))
  Sim3 r;
  r.q = a.q * b.q;
  r.s = a.s * b.s;
  r.t = a.apply(b.t);
  return r;
}

inline Sim3 inverse(const Sim3& p) {
  Sim3 r;
  r.q = p.q.conjugate();
  r.s = 1.0 / p.s;
  r.t = -r.s * r.q.rotate(p.t);
  return r;
}

// Shortest-arc spherical interpolation; falls back to normalized linear
// interpolation when the endpoints are (nearly) aligned.
inline Quat slerp(const Quat& a, const Quat& b, double w) {
  double d = a.dot(b);
  double sign = 1.0;
  if (d < 0.0) { d = -d; sign = -1.0; }
  if (d > 1.0) d = 1.0;
  const double theta = std::acos(d);
  double wa, wb;
  if (theta < 1e-7) {
    wa = 1.0 - w;
    wb = w;
  } else {
    const double st = std::sin(theta);
    wa = std::sin((1.0 - w) * theta) / st;
    wb = std::sin(w * theta) / st;
  }
  return Quat(wa * a.w + sign * wb * b.w,
              wa * a.x + sign * wb * b.x,
              wa * a.y + sign * wb * b.y,
              wa * a.z + sign * wb * b.z);
}

// Normalized weighted sum after sign alignment to the first quaternion;
// minimizes the weighted chordal distance for the sign-aligned set.
inline Quat weighted_quat_mean(std::span<const Quat> qs, std::span<const double> ws) {
  if (qs.empty() || qs.size() != ws.size())
    throw std::invalid_argument("degenerate weights");
  double total = 0.0;
  for (double w : ws) {
    if (w < 0.0) throw std::invalid_argument("degenerate weights");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("degenerate weights");
  double aw = 0, ax = 0, ay = 0, az = 0;
  for (size_t i = 0; i < qs.size(); ++i) {
    const double sign = qs[0].dot(qs[i]) < 0.0 ? -1.0 : 1.0;
    const double w = sign * ws[i];
    aw += w * qs[i].w; ax += w * qs[i].x; ay += w * qs[i].y; az += w * qs[i].z;
  }
  return Quat(aw, ax, ay, az);
}

struct PoseDistanceParams {
  double lambda = 1.0;                 // weight on the translation term
  double translation_normalizer = 1.0; // scene scale dividing translations

  PoseDistanceParams() = default;
  PoseDistanceParams(double lambda_, double normalizer_)
      : lambda(lambda_), translation_normalizer(normalizer_) {
    if (lambda < 0.0) throw std::invalid_argument("negative lambda");
    if (!(translation_normalizer > 0.0))
      throw std::invalid_argument("nonpositive translation normalizer");
  }
};

// D(i,j) = arccos((Tr(Rj Ri^T) - 1) / 2) + lambda * |ti' - tj'|
// The rotation term is evaluated through the quaternion chord
//   theta = 4 asin(min(|qi - qj|, |qi + qj|) / 2),
// the same geodesic angle as the trace formula but without the arccos blowup
// near 0 and 180 degrees: identical rotations give exactly zero.
inline double pose_distance(const Sim3& i, const Sim3& j, const PoseDistanceParams& p = {}) {
  const double dm = std::sqrt((i.q.w - j.q.w) * (i.q.w - j.q.w) + (i.q.x - j.q.x) * (i.q.x - j.q.x) +
                              (i.q.y - j.q.y) * (i.q.y - j.q.y) + (i.q.z - j.q.z) * (i.q.z - j.q.z));
  const double dp = std::sqrt((i.q.w + j.q.w) * (i.q.w + j.q.w) + (i.q.x + j.q.x) * (i.q.x + j.q.x) +
                              (i.q.y + j.q.y) * (i.q.y + j.q.y) + (i.q.z + j.q.z) * (i.q.z + j.q.z));
  const double chord = 0.5 * std::min(dm, dp);
  const double rot = 4.0 * std::asin(std::min(1.0, chord));
  const double trans = (i.t - j.t).norm() / p.translation_normalizer;
  return rot + p.lambda * trans;
}

// Weighted Kabsch-Umeyama: minimizes sum_i w_i |dst_i - s R src_i - t|^2 with
// det(R) = +1. Throws "degenerate configuration" for collinear/coincident
// support (covariance rank < 2).
inline Sim3 kabsch_umeyama(std::span<const Vec3> src, std::span<const Vec3> dst,
                           std::span<const double> ws, bool with_scale = true) {
  if (src.size() != dst.size() || (!ws.empty() && ws.size() != src.size()))
    throw std::invalid_argument("size mismatch");
  if (src.size() < 3) throw std::invalid_argument("degenerate configuration");

  const size_t n = src.size();
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (size_t i = 0; i < n; ++i) {
    const double w = ws.empty() ? 1.0 : ws[i];
    if (w < 0.0) throw std::invalid_argument("negative weight");
    wsum += w;
    cs += w * src[i];
    cd += w * dst[i];
  }
  if (wsum <= 0.0) throw std::invalid_argument("degenerate configuration");
  cs /= wsum;
  cd /= wsum;

  Mat3 cov = Mat3::Zero();
  double var_src = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double w = ws.empty() ? 1.0 : ws[i];
    const Vec3 ps = src[i] - cs;
    const Vec3 pd = dst[i] - cd;
    cov += w * pd * ps.transpose();
    var_src += w * ps.squaredNorm();
  }
  cov /= wsum;
  var_src /= wsum;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(1.0, sv(0)))
    throw std::invalid_argument("degenerate configuration");

  Vec3 d = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2) = -1.0;
  const Mat3 rot = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();

  double scale = 1.0;
  if (with_scale) {
    if (var_src <= 0.0) throw std::invalid_argument("degenerate configuration");
    scale = sv.dot(d) / var_src;
    if (!(scale > 0.0)) throw std::invalid_argument("degenerate configuration");
  }

  Sim3 out;
  out.q = Quat::from_matrix(rot);
  out.s = scale;
  out.t = cd - scale * out.q.rotate(cs);
  return out;
}

}  // namespace voxrec
