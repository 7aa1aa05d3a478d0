#pragma once

#include <string>

#include "flowslam/camera.hpp"
#include "flowslam/metrics.hpp"
#include "flowslam/pose_graph.hpp"
#include "flowslam/raster.hpp"
#include "flowslam/vo.hpp"

namespace flowslam {

// ---------------------------------------------------------------------------
// KITTI pose files: one 3x4 row-major rigid transform (12 floats) per line,
// row i = camera-to-world pose of frame i. Written at 17 significant digits
// so read/write round-trips are value-exact.

Trajectory read_kitti_poses(const std::string& path);
void write_kitti_poses(const Trajectory& trajectory, const std::string& path);

// ---------------------------------------------------------------------------
// Middlebury .flo optical flow: little-endian, float magic 202021.25,
// int32 width/height, then row-major interleaved float (u, v). Components
// with magnitude above 1e9 mark invalid pixels (written as 1e10).

FlowField read_flo(const std::string& path);
void write_flo(const FlowField& flow, const std::string& path);

// ---------------------------------------------------------------------------
// Depth rasters: single-channel 16-bit PNG, depth = raw / scale meters,
// raw 0 = invalid.

DepthMap read_depth_png16(const std::string& path, double scale = 256.0);
void write_depth_png16(const DepthMap& depth, const std::string& path,
                       double scale = 256.0);

// Grayscale images for the relocalization front end: 8-bit PNG,
// values quantized from [0, 1].

ImageF read_image_png8(const std::string& path);
void write_image_png8(const ImageF& image, const std::string& path);

// ---------------------------------------------------------------------------
// TUM trajectory: "time tx ty tz qx qy qz qw" per line. Quaternions are
// normalized on read (a warning is printed to stderr beyond 1e-6
// deviation); timestamps must be strictly increasing.

Trajectory read_tum_trajectory(const std::string& path);
void write_tum_trajectory(const Trajectory& trajectory,
                          const std::string& path);

// ---------------------------------------------------------------------------
// Run configuration: flat key = value lines under [section] headers.
// Unknown keys and malformed values are ConfigErrors; a missing file is
// an IoError. Defaults follow the reference hyperparameters
// (C_si = 10000, C_r = 1, T_loop = 50).

struct RunConfig {
    Intrinsics camera;            // [camera] fx fy cx cy baseline width height
    SigmaParams sigmas;           // [sigmas] sigma_tx ... sigma_gamma
    HyperParams hyper;            // [slam] C_si C_r T_loop
    bool per_edge_covariance = false;  // [slam]
    RelocParams reloc;            // [reloc] N_th ratio top_k (t_loop mirrors [slam])
    int vocab_size = 64;          // [reloc]
    double corner_threshold = 1e-4;    // [reloc]
    EstimatorConfig estimator;        // [estimator]
    EstimatorConfig loop_estimator;   // [loop_estimator]

    void validate() const;
};

RunConfig default_config();
RunConfig load_config(const std::string& path);

}  // namespace flowslam
