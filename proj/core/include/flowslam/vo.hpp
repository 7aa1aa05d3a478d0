#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "flowslam/camera.hpp"
#include "flowslam/flowsynth.hpp"
#include "flowslam/geom.hpp"
#include "flowslam/raster.hpp"

namespace flowslam {

struct EstimatorConfig {
    int max_iterations = 50;
    double tolerance = 1e-12;  ///< parameter-update norm
    double huber_scale = 1.0;  ///< pixels
    int stride = 2;            ///< pixel subsampling

    void validate() const;
};

/// Relative motion with uncertainty. The motion follows the synthesis
/// convention (transform on points in the source camera frame); callers
/// building trajectories or graph edges convert with inverse_motion().
struct MotionEstimate {
    Motion6DoF motion;
    Eigen::Matrix<double, 6, 6> covariance =
        Eigen::Matrix<double, 6, 6>::Zero();
    double inlier_fraction = 0.0;
    double residual_rms = 0.0;  ///< pixels
    bool converged = false;
};

/// Recover the motion whose synthesized flow best explains the observed
/// flow, by damped Gauss-Newton with Huber weighting over the jointly
/// valid pixels (subsampled by cfg.stride). Starts from zero motion.
/// Throws EstimationError when fewer than 100 jointly valid samples
/// exist. Non-convergence is reported via the converged flag, not an
/// exception.
MotionEstimate estimate_motion(const FlowField& flow, const DepthMap& depth,
                               const Intrinsics& intr,
                               const EstimatorConfig& cfg = {});

/// Closed-form rigid alignment dst ~ T * src (Horn's quaternion method)
/// refined by Huber-reweighted iterations; the loop-edge estimator used
/// when only matched keypoints with depth are available.
/// huber_scale_m is in meters. Needs >= 4 point pairs.
MotionEstimate estimate_motion_3d3d(const std::vector<Eigen::Vector3d>& src,
                                    const std::vector<Eigen::Vector3d>& dst,
                                    double huber_scale_m = 0.1);

/// One line of the prediction interchange file: frame pair, motion,
/// optional 6x6 covariance (21 upper-triangle entries).
struct MotionRecord {
    int64_t frame_i = 0;
    int64_t frame_j = 0;
    Motion6DoF motion;
    std::optional<Eigen::Matrix<double, 6, 6>> covariance;
};

/// Plain-text, whitespace-separated: i j tx ty tz alpha beta gamma
/// [c00 c01 ... c55 upper triangle, row-major]. '#' starts a comment.
std::vector<MotionRecord> load_external_motions(const std::string& path);
void save_external_motions(const std::vector<MotionRecord>& records,
                           const std::string& path);

enum class EstimatorKind { Consecutive, Loop };

/// Which estimator handles a frame pair. Source per kind: either a
/// geometric-estimator config or an external prediction file.
struct EstimatorPolicy {
    EstimatorConfig consecutive_config;
    EstimatorConfig loop_config;
    std::optional<std::string> consecutive_predictions;
    std::optional<std::string> loop_predictions;
    int t_loop = 50;  ///< frame-index gap threshold

    void validate() const;
};

/// Loop estimator iff frame_gap strictly exceeds t_loop.
EstimatorKind select_estimator(const EstimatorPolicy& policy, int frame_gap);

}  // namespace flowslam
