#pragma once

#include <Eigen/Core>
#include <optional>

namespace flowslam {

/// Pinhole camera. Pixel coordinates are continuous with (0, 0) at the
/// center of the top-left pixel.
struct Intrinsics {
    double f_x = 0.0;  ///< focal length, pixels
    double f_y = 0.0;
    double c_x = 0.0;  ///< principal point, pixels
    double c_y = 0.0;
    std::optional<double> baseline;  ///< stereo baseline, meters
    int width = 0;
    int height = 0;

    /// Throws ConfigError when any invariant is violated.
    void validate() const;
};

/// Depth threshold below which a point counts as behind the camera.
inline constexpr double kMinProjectableDepth = 1e-6;

/// Sentinel for pixels with no depth.
double invalid_depth();
bool is_valid_depth(double z);

/// z = f_x * B / d. Nonpositive or non-finite disparity gives the
/// invalid sentinel. Throws ConfigError when no baseline is set.
double depth_from_disparity(double disparity, const Intrinsics& intr);

/// Pixel (u, v) at depth z to a camera-frame point. z must be positive
/// and finite (throws ConfigError otherwise).
Eigen::Vector3d backproject(double u, double v, double z,
                            const Intrinsics& intr);

struct Projection {
    double u = 0.0;
    double v = 0.0;
    bool in_bounds = false;      ///< 0 <= u < width and 0 <= v < height
    bool behind_camera = false;  ///< z below kMinProjectableDepth
};

Projection project(const Eigen::Vector3d& point, const Intrinsics& intr);

}  // namespace flowslam
