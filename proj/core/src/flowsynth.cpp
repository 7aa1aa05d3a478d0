#include "flowslam/flowsynth.hpp"

#include <cmath>

#include "flowslam/errors.hpp"

namespace flowslam {

PointCloud::PointCloud(int w, int h)
    : width(w),
      height(h),
      points(size_t(w) * h, Eigen::Vector3d::Zero()),
      valid(size_t(w) * h, 0) {}

namespace {

void check_dimensions(int w, int h, const Intrinsics& intr, const char* who) {
    if (w != intr.width || h != intr.height)
        throw ConfigError(std::string(who) +
                          ": depth dimensions do not match intrinsics");
}

}  // namespace

PointCloud depth_to_pointcloud(const DepthMap& depth, const Intrinsics& intr) {
    check_dimensions(depth.width, depth.height, intr, "depth_to_pointcloud");
    PointCloud cloud(depth.width, depth.height);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const double z = depth.at(x, y);
            if (!is_valid_depth(z)) continue;
            const size_t i = cloud.index(x, y);
            cloud.points[i] = backproject(x, y, z, intr);
            cloud.valid[i] = 1;
        }
    }
    return cloud;
}

PointCloud transform_pointcloud(const PointCloud& cloud,
                                const Motion6DoF& motion) {
    const SE3Pose t = motion_to_se3(motion);
    PointCloud out(cloud.width, cloud.height);
    out.valid = cloud.valid;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        if (cloud.valid[i]) out.points[i] = t.apply(cloud.points[i]);
    }
    return out;
}

FlowField synthesize_flow(const DepthMap& depth, const Motion6DoF& motion,
                          const Intrinsics& intr) {
    check_dimensions(depth.width, depth.height, intr, "synthesize_flow");
    const SE3Pose t = motion_to_se3(motion);
    FlowField flow(depth.width, depth.height);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const double z = depth.at(x, y);
            if (!is_valid_depth(z)) continue;
            const Eigen::Vector3d moved = t.apply(backproject(x, y, z, intr));
            const Projection p = project(moved, intr);
            if (p.behind_camera || !p.in_bounds) continue;
            const size_t i = flow.index(x, y);
            flow.u[i] = p.u - x;
            flow.v[i] = p.v - y;
            flow.valid[i] = 1;
        }
    }
    return flow;
}

std::pair<FlowField, Motion6DoF> generate_training_pair(
    const DepthMap& depth, const MotionModel& model, std::mt19937_64& rng,
    const Intrinsics& intr) {
    const Motion6DoF motion = sample(model, rng);
    return {synthesize_flow(depth, motion, intr), motion};
}

}  // namespace flowslam
