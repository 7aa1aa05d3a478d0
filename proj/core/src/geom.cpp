#include "flowslam/geom.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace flowslam {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Elemental rotations for the fixed convention R = Rz * Ry * Rx.
Eigen::Matrix3d rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d r;
    r << 1, 0, 0, 0, c, -s, 0, s, c;
    return r;
}
Eigen::Matrix3d rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}
Eigen::Matrix3d rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

// Canonical sign: w > 0, ties broken lexicographically on (x, y, z).
UnitQuaternion canonical_sign(UnitQuaternion q) {
    bool flip = false;
    if (q.w < 0.0) {
        flip = true;
    } else if (q.w == 0.0) {
        if (q.x < 0.0)
            flip = true;
        else if (q.x == 0.0 && q.y < 0.0)
            flip = true;
        else if (q.x == 0.0 && q.y == 0.0 && q.z < 0.0)
            flip = true;
    }
    if (flip) {
        q.w = -q.w;
        q.x = -q.x;
        q.y = -q.y;
        q.z = -q.z;
    }
    return q;
}

}  // namespace

bool Motion6DoF::all_finite() const {
    return std::isfinite(t_x) && std::isfinite(t_y) && std::isfinite(t_z) &&
           std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma);
}

double UnitQuaternion::norm() const {
    return std::sqrt(w * w + x * x + y * y + z * z);
}

UnitQuaternion UnitQuaternion::normalized() const {
    const double n = norm();
    return canonical_sign(UnitQuaternion{w / n, x / n, y / n, z / n});
}

Eigen::Matrix3d UnitQuaternion::to_matrix() const {
    const double ww = w * w, xx = x * x, yy = y * y, zz = z * z;
    const double wx = w * x, wy = w * y, wz = w * z;
    const double xy = x * y, xz = x * z, yz = y * z;
    Eigen::Matrix3d r;
    r << ww + xx - yy - zz, 2 * (xy - wz), 2 * (xz + wy),
         2 * (xy + wz), ww - xx + yy - zz, 2 * (yz - wx),
         2 * (xz - wy), 2 * (yz + wx), ww - xx - yy + zz;
    return r;
}

UnitQuaternion UnitQuaternion::from_matrix(const Eigen::Matrix3d& m) {
    // Shepperd: branch on the largest of trace and diagonal entries so
    // the divisor stays well away from zero.
    UnitQuaternion q;
    const double trace = m(0, 0) + m(1, 1) + m(2, 2);
    if (trace > m(0, 0) && trace > m(1, 1) && trace > m(2, 2)) {
        const double s = std::sqrt(trace + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (m(2, 1) - m(1, 2)) / s;
        q.y = (m(0, 2) - m(2, 0)) / s;
        q.z = (m(1, 0) - m(0, 1)) / s;
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        const double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
        q.w = (m(2, 1) - m(1, 2)) / s;
        q.x = 0.25 * s;
        q.y = (m(0, 1) + m(1, 0)) / s;
        q.z = (m(0, 2) + m(2, 0)) / s;
    } else if (m(1, 1) > m(2, 2)) {
        const double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
        q.w = (m(0, 2) - m(2, 0)) / s;
        q.x = (m(0, 1) + m(1, 0)) / s;
        q.y = 0.25 * s;
        q.z = (m(1, 2) + m(2, 1)) / s;
    } else {
        const double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
        q.w = (m(1, 0) - m(0, 1)) / s;
        q.x = (m(0, 2) + m(2, 0)) / s;
        q.y = (m(1, 2) + m(2, 1)) / s;
        q.z = 0.25 * s;
    }
    return q.normalized();
}

UnitQuaternion quat_multiply(const UnitQuaternion& a, const UnitQuaternion& b) {
    return UnitQuaternion{
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

double SE3Pose::orthonormality_error() const {
    return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
        .cwiseAbs()
        .maxCoeff();
}

SE3Pose SE3Pose::orthonormalized() const {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Eigen::Matrix3d u = svd.matrixU();
        u.col(2) *= -1.0;
        r = u * svd.matrixV().transpose();
    }
    return SE3Pose{r, translation};
}

double normalize_angle(double radians) {
    double a = std::fmod(radians, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

SE3Pose motion_to_se3(const Motion6DoF& m) {
    SE3Pose p;
    p.rotation = rot_z(m.gamma) * rot_y(m.beta) * rot_x(m.alpha);
    p.translation = Eigen::Vector3d(m.t_x, m.t_y, m.t_z);
    return p;
}

Motion6DoF se3_to_motion(const SE3Pose& pose) {
    const Eigen::Matrix3d& r = pose.rotation;
    Motion6DoF m;
    m.t_x = pose.translation.x();
    m.t_y = pose.translation.y();
    m.t_z = pose.translation.z();

    // R(2,0) = -sin(beta). Clamp for safety against rounding. The gimbal
    // branch fires only when |sin(beta)| saturates exactly: asin stays
    // well-conditioned for reconstruction at every representable value
    // below 1, and a wider trigger would discard cos(beta) terms larger
    // than the reconstruction tolerance.
    const double sb = std::min(1.0, std::max(-1.0, -r(2, 0)));
    if (std::abs(sb) == 1.0) {
        // Gimbal lock: only alpha -+ gamma is determined. Fix gamma = 0.
        m.beta = (sb > 0) ? kPi / 2.0 : -kPi / 2.0;
        m.gamma = 0.0;
        if (sb > 0) {
            m.alpha = std::atan2(r(0, 1), r(0, 2));
        } else {
            m.alpha = std::atan2(-r(0, 1), -r(0, 2));
        }
    } else {
        m.beta = std::asin(sb);
        m.alpha = std::atan2(r(2, 1), r(2, 2));
        m.gamma = std::atan2(r(1, 0), r(0, 0));
    }
    m.alpha = normalize_angle(m.alpha);
    m.beta = normalize_angle(m.beta);
    m.gamma = normalize_angle(m.gamma);
    return m;
}

SE3Pose compose(const SE3Pose& a, const SE3Pose& b) {
    SE3Pose p;
    p.rotation = a.rotation * b.rotation;
    p.translation = a.rotation * b.translation + a.translation;
    return p;
}

SE3Pose inverse(const SE3Pose& pose) {
    SE3Pose p;
    p.rotation = pose.rotation.transpose();
    p.translation = -(p.rotation * pose.translation);
    return p;
}

Motion6DoF inverse_motion(const Motion6DoF& motion) {
    return se3_to_motion(inverse(motion_to_se3(motion)));
}

UnitQuaternion quat_from_euler(double alpha, double beta, double gamma) {
    const UnitQuaternion qx{std::cos(alpha / 2), std::sin(alpha / 2), 0, 0};
    const UnitQuaternion qy{std::cos(beta / 2), 0, std::sin(beta / 2), 0};
    const UnitQuaternion qz{std::cos(gamma / 2), 0, 0, std::sin(gamma / 2)};
    return canonical_sign(quat_multiply(qz, quat_multiply(qy, qx)));
}

void euler_from_quat(const UnitQuaternion& q, double& alpha, double& beta,
                     double& gamma) {
    SE3Pose p;
    p.rotation = q.to_matrix();
    const Motion6DoF m = se3_to_motion(p);
    alpha = m.alpha;
    beta = m.beta;
    gamma = m.gamma;
}

void euler_rotation_derivatives(double alpha, double beta, double gamma,
                                Eigen::Matrix3d& dR_dalpha,
                                Eigen::Matrix3d& dR_dbeta,
                                Eigen::Matrix3d& dR_dgamma) {
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double cg = std::cos(gamma), sg = std::sin(gamma);

    Eigen::Matrix3d rx = rot_x(alpha), ry = rot_y(beta), rz = rot_z(gamma);
    Eigen::Matrix3d drx, dry, drz;
    drx << 0, 0, 0, 0, -sa, -ca, 0, ca, -sa;
    dry << -sb, 0, cb, 0, 0, 0, -cb, 0, -sb;
    drz << -sg, -cg, 0, cg, -sg, 0, 0, 0, 0;

    dR_dalpha = rz * ry * drx;
    dR_dbeta = rz * dry * rx;
    dR_dgamma = drz * ry * rx;
}

Eigen::Matrix<double, 4, 3> quat_euler_jacobian(double alpha, double beta,
                                                double gamma) {
    const UnitQuaternion qx{std::cos(alpha / 2), std::sin(alpha / 2), 0, 0};
    const UnitQuaternion qy{std::cos(beta / 2), 0, std::sin(beta / 2), 0};
    const UnitQuaternion qz{std::cos(gamma / 2), 0, 0, std::sin(gamma / 2)};
    const UnitQuaternion dqx{-0.5 * std::sin(alpha / 2),
                             0.5 * std::cos(alpha / 2), 0, 0};
    const UnitQuaternion dqy{-0.5 * std::sin(beta / 2), 0,
                             0.5 * std::cos(beta / 2), 0};
    const UnitQuaternion dqz{-0.5 * std::sin(gamma / 2), 0, 0,
                             0.5 * std::cos(gamma / 2)};

    const UnitQuaternion da = quat_multiply(qz, quat_multiply(qy, dqx));
    const UnitQuaternion db = quat_multiply(qz, quat_multiply(dqy, qx));
    const UnitQuaternion dc = quat_multiply(dqz, quat_multiply(qy, qx));

    Eigen::Matrix<double, 4, 3> j;
    j << da.x, db.x, dc.x,
         da.y, db.y, dc.y,
         da.z, db.z, dc.z,
         da.w, db.w, dc.w;
    return j;
}

}  // namespace flowslam
