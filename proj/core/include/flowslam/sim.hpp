#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "flowslam/camera.hpp"
#include "flowslam/geom.hpp"
#include "flowslam/metrics.hpp"
#include "flowslam/pose_graph.hpp"
#include "flowslam/raster.hpp"

namespace flowslam {

/// Desk-scale world: a ground plane, axis-aligned boxes, and small
/// spheres ("sprites"), textured by seeded multi-octave value noise.
/// Camera frame: x right, y down, z forward; the ground lies at
/// y = ground_y below the trajectory plane y = 0.
struct Scene {
    struct Box {
        Eigen::Vector3d min;
        Eigen::Vector3d max;
    };
    struct Sphere {
        Eigen::Vector3d center;
        double radius = 0.1;
    };

    double ground_y = 1.2;
    std::vector<Box> boxes;
    std::vector<Sphere> spheres;
    uint64_t texture_seed = 0;
};

/// Closed waypoint loop with per-segment pose counts; the noise sigmas
/// describe how experiment scripts corrupt the odometry downstream
/// (rendered data itself is noiseless).
struct TrajectorySpec {
    std::vector<Eigen::Vector3d> waypoints;  ///< first == last (closed)
    int poses_per_segment = 25;
    SigmaParams noise;
    uint64_t seed = 0;

    void validate() const;  ///< closed polyline, >= 10 poses
};

/// A sensible default: 20 m square loop, 500 poses.
TrajectorySpec default_spec();

/// Plain-text spec file, config syntax: [trajectory] waypoints (triples
/// separated by ';'), poses_per_segment, seed; [noise] sigma_* keys;
/// [scene] boxes, spheres, ground_y, seed.
struct SceneParams {
    int boxes = 14;
    int spheres = 40;
    double ground_y = 1.2;
    double clearance = 0.75;  ///< min distance of any surface to the path
    uint64_t seed = 1;
};

struct SimSpec {
    TrajectorySpec trajectory;
    SceneParams scene;
};

SimSpec load_sim_spec(const std::string& path);

/// Scatter boxes and spheres around the trajectory, keeping every
/// surface at least `clearance` away from all path positions.
Scene make_scene(const SceneParams& params, const TrajectorySpec& spec);

/// Exact per-pixel depth along the camera ray (analytic plane/box/sphere
/// intersections, z-buffered); background pixels are invalid.
DepthMap render_depth(const Scene& scene, const SE3Pose& pose,
                      const Intrinsics& intr);

/// Texture value at the nearest surface hit; background renders as 0.
ImageF render_image(const Scene& scene, const SE3Pose& pose,
                    const Intrinsics& intr);

/// Everything an end-to-end experiment needs: ground-truth trajectory,
/// per-frame renders, camera-convention relative motions, and the
/// noiseless flow for each consecutive pair (synthesis convention).
struct RunData {
    Trajectory ground_truth;
    std::vector<Motion6DoF> camera_motions;  ///< i -> i+1, size n-1
    std::vector<DepthMap> depths;
    std::vector<ImageF> images;
    std::vector<FlowField> flows;  ///< pair (i, i+1), size n-1
};

/// Poses along the closed polyline (heading follows the path tangent,
/// blended through corners). When render is false the depth/image/flow
/// sequences stay empty; threads parallelizes per-frame rendering.
RunData generate_run(const TrajectorySpec& spec, const Scene& scene,
                     const Intrinsics& intr, bool render = true,
                     int threads = 1);

/// Persist a run in the standard formats: manifest.txt, camera.cfg,
/// gt_poses.txt (KITTI), gt_tum.txt, gt_motions.txt (prediction
/// records), depth/*.png, image/*.png, flow/*.flo.
void write_run(const RunData& run, const Intrinsics& intr,
               const TrajectorySpec& spec, const std::string& dir,
               int threads = 1);

}  // namespace flowslam
