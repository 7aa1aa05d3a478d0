#include "flowslam/camera.hpp"

#include <cmath>
#include <limits>

#include "flowslam/errors.hpp"

namespace flowslam {

void Intrinsics::validate() const {
    if (!(f_x > 0.0) || !(f_y > 0.0))
        throw ConfigError("Intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw ConfigError("Intrinsics: image dimensions must be positive");
    if (!(c_x >= 0.0) || c_x >= width || !(c_y >= 0.0) || c_y >= height)
        throw ConfigError("Intrinsics: principal point outside image");
    if (baseline && !(*baseline > 0.0))
        throw ConfigError("Intrinsics: baseline must be positive when set");
}

double invalid_depth() { return std::numeric_limits<double>::quiet_NaN(); }

bool is_valid_depth(double z) { return std::isfinite(z) && z > 0.0; }

double depth_from_disparity(double disparity, const Intrinsics& intr) {
    if (!intr.baseline)
        throw ConfigError("depth_from_disparity: intrinsics carry no baseline");
    if (!std::isfinite(disparity) || disparity <= 0.0) return invalid_depth();
    return intr.f_x * (*intr.baseline) / disparity;
}

Eigen::Vector3d backproject(double u, double v, double z,
                            const Intrinsics& intr) {
    if (!std::isfinite(z) || z <= 0.0)
        throw ConfigError("backproject: depth must be positive and finite");
    return {(u - intr.c_x) * z / intr.f_x, (v - intr.c_y) * z / intr.f_y, z};
}

Projection project(const Eigen::Vector3d& point, const Intrinsics& intr) {
    Projection p;
    if (!(point.z() > kMinProjectableDepth)) {
        p.behind_camera = true;
        return p;
    }
    p.u = intr.f_x * point.x() / point.z() + intr.c_x;
    p.v = intr.f_y * point.y() / point.z() + intr.c_y;
    p.in_bounds = p.u >= 0.0 && p.u < intr.width && p.v >= 0.0 &&
                  p.v < intr.height;
    return p;
}

}  // namespace flowslam
