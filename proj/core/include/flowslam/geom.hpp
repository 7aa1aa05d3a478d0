#pragma once

#include <Eigen/Core>

namespace flowslam {

/// Rigid motion as 6 parameters: translation (meters) followed by Euler
/// angles (radians).
///
/// Euler convention used everywhere in this project:
///     R = Rz(gamma) * Ry(beta) * Rx(alpha)
/// i.e. rotate about x by alpha first, then y by beta, then z by gamma
/// (fixed axes). Canonical producers return angles in (-pi, pi]; at the
/// gimbal singularity |beta| = pi/2 we fix gamma = 0 and fold the
/// remaining rotation into alpha.
struct Motion6DoF {
    double t_x = 0.0;
    double t_y = 0.0;
    double t_z = 0.0;
    double alpha = 0.0;  ///< rotation about x, radians
    double beta = 0.0;   ///< rotation about y, radians
    double gamma = 0.0;  ///< rotation about z, radians

    Eigen::Matrix<double, 6, 1> to_vector() const {
        Eigen::Matrix<double, 6, 1> v;
        v << t_x, t_y, t_z, alpha, beta, gamma;
        return v;
    }
    static Motion6DoF from_vector(const Eigen::Matrix<double, 6, 1>& v) {
        return Motion6DoF{v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    bool all_finite() const;
};

/// Unit quaternion, canonical sign w >= 0 (ties broken on the first
/// nonzero of x, y, z) so text round-trips are bit-stable.
struct UnitQuaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
    /// Scale to unit norm and apply the canonical sign.
    UnitQuaternion normalized() const;
    UnitQuaternion conjugate() const { return UnitQuaternion{w, -x, -y, -z}; }
    Eigen::Matrix3d to_matrix() const;
    /// Robust extraction (Shepperd's method); result is canonical.
    static UnitQuaternion from_matrix(const Eigen::Matrix3d& rotation);
};

/// Hamilton product a*b (apply b first, then a, under to_matrix()).
UnitQuaternion quat_multiply(const UnitQuaternion& a, const UnitQuaternion& b);

/// Rigid transform: x' = rotation * x + translation.
struct SE3Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static SE3Pose identity() { return SE3Pose{}; }
    Eigen::Vector3d apply(const Eigen::Vector3d& point) const {
        return rotation * point + translation;
    }
    /// max |R^T R - I|, for validity checks.
    double orthonormality_error() const;
    /// Nearest rotation matrix by SVD; use to undo drift from long
    /// compose chains.
    SE3Pose orthonormalized() const;
};

/// Wrap an angle into (-pi, pi].
double normalize_angle(double radians);

SE3Pose motion_to_se3(const Motion6DoF& motion);

/// Inverse of motion_to_se3. At |beta| = pi/2 applies the documented
/// convention gamma = 0.
Motion6DoF se3_to_motion(const SE3Pose& pose);

/// result = a then b applied to points as a.R*(b.R*x + b.t) + a.t.
SE3Pose compose(const SE3Pose& a, const SE3Pose& b);

SE3Pose inverse(const SE3Pose& pose);

/// se3_to_motion(inverse(motion_to_se3(m))): flips between the
/// point-transform and camera-motion readings of a relative motion.
Motion6DoF inverse_motion(const Motion6DoF& motion);

/// Quaternion of Rz(gamma)*Ry(beta)*Rx(alpha), canonical sign.
UnitQuaternion quat_from_euler(double alpha, double beta, double gamma);

/// Euler angles (alpha, beta, gamma) reproducing the quaternion's
/// rotation matrix; gimbal convention as in se3_to_motion.
void euler_from_quat(const UnitQuaternion& q, double& alpha, double& beta,
                     double& gamma);

/// Partial derivatives of R = Rz(gamma)*Ry(beta)*Rx(alpha) with respect
/// to each angle. Used by the flow-based estimator's Jacobians.
void euler_rotation_derivatives(double alpha, double beta, double gamma,
                                Eigen::Matrix3d& dR_dalpha,
                                Eigen::Matrix3d& dR_dbeta,
                                Eigen::Matrix3d& dR_dgamma);

/// 4x3 Jacobian of the quaternion components (x, y, z, w) of
/// quat_from_euler with respect to (alpha, beta, gamma), evaluated
/// without sign canonicalization. Rows follow the file order qx qy qz qw.
Eigen::Matrix<double, 4, 3> quat_euler_jacobian(double alpha, double beta,
                                                double gamma);

}  // namespace flowslam
