#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "flowslam/camera.hpp"
#include "flowslam/geom.hpp"
#include "flowslam/motion_model.hpp"
#include "flowslam/raster.hpp"

namespace flowslam {

/// Per-pixel 3D points in pixel-grid order with a validity mask.
struct PointCloud {
    int width = 0;
    int height = 0;
    std::vector<Eigen::Vector3d> points;  ///< width*height entries
    std::vector<uint8_t> valid;

    PointCloud() = default;
    PointCloud(int w, int h);
    size_t index(int x, int y) const { return size_t(y) * width + x; }
};

/// Backproject every valid depth pixel into the camera frustum.
/// Throws ConfigError when depth dimensions disagree with the intrinsics.
PointCloud depth_to_pointcloud(const DepthMap& depth, const Intrinsics& intr);

/// Apply the motion to every valid point.
///
/// Motion convention (used consistently by the synthesizer, the
/// estimator and the graph pipeline): the Motion6DoF acts directly on
/// points expressed in the source camera frame, i.e. it is the inverse
/// of the camera's own displacement.
PointCloud transform_pointcloud(const PointCloud& cloud,
                                const Motion6DoF& motion);

/// The core synthesis step: displace the source depth map's points by
/// `motion`, reproject, and store the pixel displacement. Pixels whose
/// depth is invalid, whose displaced point falls behind the camera, or
/// whose reprojection leaves the image are masked invalid.
FlowField synthesize_flow(const DepthMap& depth, const Motion6DoF& motion,
                          const Intrinsics& intr);

/// Sample a motion from the model, synthesize its flow. Deterministic
/// for a given rng state.
std::pair<FlowField, Motion6DoF> generate_training_pair(
    const DepthMap& depth, const MotionModel& model, std::mt19937_64& rng,
    const Intrinsics& intr);

}  // namespace flowslam
