#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "flowslam/geom.hpp"

namespace flowslam {

struct TrajectoryEntry {
    int64_t frame_id = 0;
    double timestamp = 0.0;
    SE3Pose pose;
    /// Exact rotation as read from quaternion-based files; writers prefer
    /// it over re-deriving from the matrix so file round-trips are
    /// bit-stable.
    std::optional<UnitQuaternion> rotation_q;
};

/// Time-ordered absolute poses. Frame ids strictly increasing.
struct Trajectory {
    std::vector<TrajectoryEntry> entries;
    bool has_timestamps = false;

    size_t size() const { return entries.size(); }
    void validate() const;  ///< throws ConfigError on invariant violation
};

enum class Alignment { None, Rigid };

/// Absolute trajectory error: RMSE of position residuals, optionally
/// after closed-form least-squares rigid alignment of est onto gt.
/// Throws ConfigError on frame-id mismatch.
double ate(const Trajectory& gt, const Trajectory& est,
           Alignment align = Alignment::Rigid);

struct RpeResult {
    double translation_rmse = 0.0;   ///< meters
    double rotation_rmse_deg = 0.0;  ///< degrees
};

/// Relative pose error over all index pairs (i, i+delta).
RpeResult rpe(const Trajectory& gt, const Trajectory& est, int delta = 1);

struct KittiErrors {
    double t_err_percent = 0.0;       ///< translation, % per subsequence
    double r_err_deg_per_100m = 0.0;  ///< rotation, degrees per 100 m
};

/// Devkit-style averages over all subsequences of nominal ground-truth
/// path length 100, 200, ..., 800 m starting at every frame. Requires
/// at least 100 m of ground-truth path.
KittiErrors kitti_errors(const Trajectory& gt, const Trajectory& est);

}  // namespace flowslam
