// flowslam: synthetic-flow visual odometry and pose-graph SLAM at desk
// scale. One binary, six subcommands; see --help per subcommand.
//
// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numerical
// failure. All randomness derives from --seed through per-stage streams,
// so results are independent of --threads.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <vector>

#include "flowslam/errors.hpp"
#include "flowslam/flowsynth.hpp"
#include "flowslam/io.hpp"
#include "flowslam/metrics.hpp"
#include "flowslam/motion_model.hpp"
#include "flowslam/pose_graph.hpp"
#include "flowslam/reloc.hpp"
#include "flowslam/sim.hpp"
#include "flowslam/util.hpp"
#include "flowslam/vo.hpp"

namespace fs = std::filesystem;
using namespace flowslam;

namespace {

std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& extension) {
    if (!fs::is_directory(dir))
        throw IoError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() &&
            entry.path().extension() == extension)
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

std::string zero_padded(const char* prefix, size_t index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06zu.%s", prefix, index, ext);
    return buf;
}

Trajectory read_trajectory_any(const std::string& path,
                               const std::string& format) {
    if (format == "kitti") return read_kitti_poses(path);
    if (format == "tum") return read_tum_trajectory(path);
    throw ConfigError("unknown trajectory format '" + format +
                      "' (expected kitti or tum)");
}

Trajectory chain_motions(const std::vector<MotionRecord>& records) {
    Trajectory traj;
    traj.has_timestamps = false;
    SE3Pose pose = SE3Pose::identity();
    traj.entries.push_back(TrajectoryEntry{0, 0.0, pose});
    for (size_t k = 0; k < records.size(); ++k) {
        pose = compose(pose, motion_to_se3(records[k].motion));
        traj.entries.push_back(TrajectoryEntry{int64_t(k + 1), 0.0, pose});
    }
    return traj;
}

void write_trajectories(const Trajectory& traj, const std::string& out_dir) {
    write_kitti_poses(traj, (fs::path(out_dir) / "trajectory_kitti.txt").string());
    Trajectory stamped = traj;
    stamped.has_timestamps = true;
    for (size_t i = 0; i < stamped.entries.size(); ++i)
        stamped.entries[i].timestamp = 0.1 * double(i);
    write_tum_trajectory(stamped,
                         (fs::path(out_dir) / "trajectory_tum.txt").string());
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string depth_dir;
    std::string sim_spec;
    std::string model_path;
    std::string config_path;
    std::string out_dir;
    int count = 0;
    uint64_t seed = 0;
    int threads = 1;
};

int run_synth(const SynthArgs& args) {
    const RunConfig cfg = args.config_path.empty()
                              ? default_config()
                              : load_config(args.config_path);
    const MotionModel model = load_model_file(args.model_path);
    model.validate();

    std::vector<DepthMap> depths;
    Intrinsics intr = cfg.camera;
    if (!args.sim_spec.empty()) {
        const SimSpec spec = load_sim_spec(args.sim_spec);
        const Scene scene = make_scene(spec.scene, spec.trajectory);
        // A few frames along the trajectory serve as source depth maps.
        RunData run = generate_run(spec.trajectory, scene, intr, false);
        const size_t n = run.ground_truth.size();
        for (size_t k = 0; k < n; k += std::max<size_t>(1, n / 8))
            depths.push_back(
                render_depth(scene, run.ground_truth.entries[k].pose, intr));
    } else {
        if (args.depth_dir.empty())
            throw ConfigError("synth: need --depth-dir or --sim-spec");
        for (const std::string& file : list_files(args.depth_dir, ".png"))
            depths.push_back(read_depth_png16(file));
        if (depths.empty())
            throw IoError("no .png depth files in " + args.depth_dir);
        intr.width = depths.front().width;
        intr.height = depths.front().height;
    }
    intr.validate();

    fs::create_directories(fs::path(args.out_dir) / "flow");
    std::vector<Motion6DoF> motions(args.count);
    std::vector<uint64_t> seeds(args.count);
    parallel_for(size_t(args.count), args.threads, [&](size_t i) {
        seeds[i] = derive_seed(args.seed, "synth", i);
        std::mt19937_64 rng(seeds[i]);
        const DepthMap& depth = depths[i % depths.size()];
        auto [flow, motion] = generate_training_pair(depth, model, rng, intr);
        motions[i] = motion;
        write_flo(flow, (fs::path(args.out_dir) / "flow" /
                         zero_padded("flow", i, "flo"))
                            .string());
    });

    {
        std::ofstream out((fs::path(args.out_dir) / "motions.txt").string());
        if (!out) throw IoError("cannot write motions.txt");
        out << "# sample tx ty tz alpha beta gamma\n";
        char buf[64];
        for (int i = 0; i < args.count; ++i) {
            out << i;
            const auto v = motions[i].to_vector();
            for (int k = 0; k < 6; ++k) {
                std::snprintf(buf, sizeof(buf), "%.17g", v[k]);
                out << " " << buf;
            }
            out << "\n";
        }
    }
    {
        std::ofstream out((fs::path(args.out_dir) / "manifest.txt").string());
        if (!out) throw IoError("cannot write manifest.txt");
        out << "count = " << args.count << "\n";
        out << "seed = " << args.seed << "\n";
        out << "model = " << args.model_path << "\n";
        for (int i = 0; i < args.count; ++i)
            out << "sample_seed_" << i << " = " << seeds[i] << "\n";
    }
    std::cerr << "synth: wrote " << args.count << " pairs to " << args.out_dir
              << "\n";
    return 0;
}

// ---- fit-motion ------------------------------------------------------------

struct FitArgs {
    std::string poses_path;
    std::string poses_format = "kitti";
    std::string motions_path;
    std::string out_path;
};

int run_fit_motion(const FitArgs& args) {
    std::vector<Motion6DoF> motions;
    if (!args.motions_path.empty()) {
        for (const MotionRecord& rec : load_external_motions(args.motions_path))
            motions.push_back(rec.motion);
    } else {
        if (args.poses_path.empty())
            throw ConfigError("fit-motion: need --poses or --motions");
        const Trajectory traj =
            read_trajectory_any(args.poses_path, args.poses_format);
        for (size_t k = 0; k + 1 < traj.size(); ++k) {
            // Fit in the synthesis convention: the transform applied to
            // the source frame's points, i.e. the inverse camera step.
            const SE3Pose point_transform =
                compose(inverse(traj.entries[k + 1].pose),
                        traj.entries[k].pose);
            motions.push_back(se3_to_motion(point_transform));
        }
    }
    const MotionModel model = fit(motions);
    save_model_file(model, args.out_path);
    std::cerr << "fit-motion: fitted on " << motions.size() << " motions -> "
              << args.out_path << "\n";
    return 0;
}

// ---- vo ----------------------------------------------------------------

struct VoArgs {
    std::string flow_dir;
    std::string depth_dir;
    std::string config_path;
    std::string external_path;
    std::string out_dir;
    int threads = 1;
};

std::vector<MotionRecord> estimate_sequence(const std::string& flow_dir,
                                            const std::string& depth_dir,
                                            const Intrinsics& intr,
                                            const EstimatorConfig& cfg,
                                            int threads) {
    const std::vector<std::string> flows = list_files(flow_dir, ".flo");
    const std::vector<std::string> depths = list_files(depth_dir, ".png");
    if (flows.empty()) throw IoError("no .flo files in " + flow_dir);
    if (depths.size() < flows.size())
        throw IoError("fewer depth maps than flow files (" +
                      std::to_string(depths.size()) + " vs " +
                      std::to_string(flows.size()) + ")");

    std::vector<MotionRecord> records(flows.size());
    parallel_for(flows.size(), threads, [&](size_t k) {
        const FlowField flow = read_flo(flows[k]);
        const DepthMap depth = read_depth_png16(depths[k]);
        const MotionEstimate est = estimate_motion(flow, depth, intr, cfg);
        // Graph and trajectory edges use the camera-motion convention.
        MotionRecord rec;
        rec.frame_i = int64_t(k);
        rec.frame_j = int64_t(k + 1);
        rec.motion = inverse_motion(est.motion);
        rec.covariance = est.covariance;
        records[k] = rec;
    });
    return records;
}

int run_vo(const VoArgs& args) {
    const RunConfig cfg = args.config_path.empty()
                              ? throw ConfigError("vo: --config is required")
                              : load_config(args.config_path);
    fs::create_directories(args.out_dir);

    std::vector<MotionRecord> records;
    if (!args.external_path.empty()) {
        records = load_external_motions(args.external_path);
    } else {
        if (args.flow_dir.empty() || args.depth_dir.empty())
            throw ConfigError("vo: need --flow-dir and --depth-dir, or --external");
        records = estimate_sequence(args.flow_dir, args.depth_dir, cfg.camera,
                                    cfg.estimator, args.threads);
    }

    save_external_motions(records,
                          (fs::path(args.out_dir) / "motions.txt").string());
    write_trajectories(chain_motions(records), args.out_dir);
    std::cerr << "vo: " << records.size() << " relative motions -> "
              << args.out_dir << "\n";
    return 0;
}

// ---- slam ------------------------------------------------------------------

struct SlamArgs {
    std::string run_dir;
    std::string config_path;
    std::string odometry_path;
    std::string loop_predictions_path;
    std::string out_dir;
    uint64_t seed = 0;
    int threads = 1;
};

int run_slam(const SlamArgs& args) {
    const RunConfig cfg = args.config_path.empty()
                              ? throw ConfigError("slam: --config is required")
                              : load_config(args.config_path);
    fs::create_directories(args.out_dir);
    const Intrinsics& intr = cfg.camera;

    // 1. Odometry: external records or flow-based estimation.
    std::vector<MotionRecord> odometry;
    if (!args.odometry_path.empty()) {
        odometry = load_external_motions(args.odometry_path);
    } else {
        odometry = estimate_sequence(
            (fs::path(args.run_dir) / "flow").string(),
            (fs::path(args.run_dir) / "depth").string(), intr, cfg.estimator,
            args.threads);
    }
    const size_t n_frames = odometry.size() + 1;
    std::cerr << "slam: " << n_frames << " frames\n";

    // 2. Features and loop candidates from the image sequence.
    const std::vector<std::string> image_files =
        list_files((fs::path(args.run_dir) / "image").string(), ".png");
    if (image_files.size() != n_frames)
        throw IoError("slam: expected " + std::to_string(n_frames) +
                      " images, found " + std::to_string(image_files.size()));

    FeatureParams feature_params;
    feature_params.corner_threshold = cfg.corner_threshold;
    std::vector<std::vector<Feature>> features(n_frames);
    parallel_for(n_frames, args.threads, [&](size_t k) {
        features[k] =
            extract_features(read_image_png8(image_files[k]), feature_params);
    });

    std::vector<Descriptor> pooled;
    const size_t frame_step = std::max<size_t>(1, n_frames / 64);
    for (size_t k = 0; k < n_frames; k += frame_step)
        for (const Feature& f : features[k]) pooled.push_back(f.descriptor);
    const Vocabulary vocab = build_vocabulary(
        pooled, cfg.vocab_size, derive_seed(args.seed, "vocab", 0));
    save_vocabulary(vocab, (fs::path(args.out_dir) / "vocabulary.bin").string());

    RelocParams reloc_params = cfg.reloc;
    reloc_params.t_loop = cfg.hyper.t_loop;
    const std::vector<LoopCandidate> candidates =
        detect_loops(features, vocab, reloc_params);
    std::cerr << "slam: " << candidates.size() << " loop candidates passed\n";

    {
        std::ofstream out((fs::path(args.out_dir) / "loops.txt").string());
        out << "# i j matches\n";
        for (const LoopCandidate& c : candidates)
            out << c.i << " " << c.j << " " << c.matches << "\n";
    }

    // 3. Loop-edge motions: external predictions when provided, else
    // rigid 3D-3D alignment of matched keypoints through the two depth
    // maps (the self-contained stand-in for a loop-motion predictor).
    std::vector<MotionRecord> loop_predictions;
    if (!args.loop_predictions_path.empty())
        loop_predictions = load_external_motions(args.loop_predictions_path);
    const std::vector<std::string> depth_files =
        list_files((fs::path(args.run_dir) / "depth").string(), ".png");
    if (depth_files.size() != n_frames)
        throw IoError("slam: expected " + std::to_string(n_frames) +
                      " depth maps, found " +
                      std::to_string(depth_files.size()));

    std::vector<std::pair<LoopCandidate, MotionEstimate>> loops(
        candidates.size());
    std::vector<char> loop_ok(candidates.size(), 0);
    parallel_for(candidates.size(), args.threads, [&](size_t c) {
        const LoopCandidate& cand = candidates[c];
        for (const MotionRecord& rec : loop_predictions) {
            if (rec.frame_i == cand.i && rec.frame_j == cand.j) {
                MotionEstimate est;
                est.motion = rec.motion;
                if (rec.covariance) est.covariance = *rec.covariance;
                est.converged = true;
                loops[c] = {cand, est};
                loop_ok[c] = 1;
                return;
            }
        }
        const DepthMap depth_i = read_depth_png16(depth_files[cand.i]);
        const DepthMap depth_j = read_depth_png16(depth_files[cand.j]);
        const auto matches = match_features(features[cand.i], features[cand.j],
                                            reloc_params.ratio);
        std::vector<Eigen::Vector3d> pts_i, pts_j;
        for (const auto& [a, b] : matches) {
            const Keypoint& ka = features[cand.i][a].keypoint;
            const Keypoint& kb = features[cand.j][b].keypoint;
            const double za = depth_i.at(ka.x, ka.y);
            const double zb = depth_j.at(kb.x, kb.y);
            if (!is_valid_depth(za) || !is_valid_depth(zb)) continue;
            pts_i.push_back(backproject(ka.x, ka.y, za, intr));
            pts_j.push_back(backproject(kb.x, kb.y, zb, intr));
        }
        if (pts_i.size() < 4) return;  // unusable candidate, dropped
        // Points of frame j map into frame i by the camera motion i->j.
        loops[c] = {cand, estimate_motion_3d3d(pts_j, pts_i)};
        loop_ok[c] = 1;
    });

    std::vector<std::pair<LoopCandidate, MotionEstimate>> usable_loops;
    for (size_t c = 0; c < loops.size(); ++c)
        if (loop_ok[c]) usable_loops.push_back(loops[c]);

    // 4. Build and optimize.
    std::vector<MotionEstimate> odometry_estimates(odometry.size());
    for (size_t k = 0; k < odometry.size(); ++k) {
        odometry_estimates[k].motion = odometry[k].motion;
        if (odometry[k].covariance)
            odometry_estimates[k].covariance = *odometry[k].covariance;
        odometry_estimates[k].converged = true;
    }
    BuildOptions build_options;
    build_options.per_edge_covariance = cfg.per_edge_covariance;
    const PoseGraph graph = build_graph(odometry_estimates, usable_loops,
                                        cfg.sigmas, cfg.hyper, build_options);

    const Trajectory vo_traj = chain_motions(odometry);
    write_kitti_poses(vo_traj,
                      (fs::path(args.out_dir) / "vo_trajectory_kitti.txt").string());

    const OptimizeResult result = optimize(graph);
    std::cerr << "slam: chi2 " << result.chi2 << " after "
              << result.iterations << " iterations\n";

    Trajectory optimized;
    optimized.has_timestamps = false;
    for (size_t k = 0; k < result.graph.nodes.size(); ++k)
        optimized.entries.push_back(
            TrajectoryEntry{int64_t(k), 0.0, result.graph.nodes[k]});
    write_trajectories(optimized, args.out_dir);
    save_graph_file(result.graph,
                    (fs::path(args.out_dir) / "graph.g2o").string());
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string gt_path;
    std::vector<std::string> est_paths;
    std::string gt_format = "kitti";
    std::string est_format = "kitti";
    int delta = 1;
    bool with_kitti = false;
};

int run_eval(const EvalArgs& args) {
    const Trajectory gt = read_trajectory_any(args.gt_path, args.gt_format);

    struct Row {
        double ate_rigid, ate_none, rpe_t, rpe_r, kitti_t = 0, kitti_r = 0;
    };
    std::vector<Row> rows;
    for (const std::string& est_path : args.est_paths) {
        const Trajectory est = read_trajectory_any(est_path, args.est_format);
        Row row{};
        row.ate_rigid = ate(gt, est, Alignment::Rigid);
        row.ate_none = ate(gt, est, Alignment::None);
        const RpeResult r = rpe(gt, est, args.delta);
        row.rpe_t = r.translation_rmse;
        row.rpe_r = r.rotation_rmse_deg;
        if (args.with_kitti) {
            const KittiErrors k = kitti_errors(gt, est);
            row.kitti_t = k.t_err_percent;
            row.kitti_r = k.r_err_deg_per_100m;
        }
        rows.push_back(row);
    }

    auto stats = [&](auto getter) {
        double mean = 0.0;
        for (const Row& r : rows) mean += getter(r);
        mean /= double(rows.size());
        double var = 0.0;
        for (const Row& r : rows)
            var += (getter(r) - mean) * (getter(r) - mean);
        const double std_dev =
            rows.size() > 1 ? std::sqrt(var / double(rows.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, std_dev);
    };

    const auto [ate_r, ate_r_sd] = stats([](const Row& r) { return r.ate_rigid; });
    const auto [ate_n, ate_n_sd] = stats([](const Row& r) { return r.ate_none; });
    const auto [rpe_t, rpe_t_sd] = stats([](const Row& r) { return r.rpe_t; });
    const auto [rpe_r, rpe_r_sd] = stats([](const Row& r) { return r.rpe_r; });

    std::printf("metric            mean        std     (%zu run%s)\n",
                rows.size(), rows.size() == 1 ? "" : "s");
    std::printf("ate_rigid   %10.6f %10.6f  m\n", ate_r, ate_r_sd);
    std::printf("ate_none    %10.6f %10.6f  m\n", ate_n, ate_n_sd);
    std::printf("rpe_trans   %10.6f %10.6f  m\n", rpe_t, rpe_t_sd);
    std::printf("rpe_rot     %10.6f %10.6f  deg\n", rpe_r, rpe_r_sd);
    if (args.with_kitti) {
        const auto [kt, kt_sd] = stats([](const Row& r) { return r.kitti_t; });
        const auto [kr, kr_sd] = stats([](const Row& r) { return r.kitti_r; });
        std::printf("kitti_t_err %10.6f %10.6f  %%\n", kt, kt_sd);
        std::printf("kitti_r_err %10.6f %10.6f  deg/100m\n", kr, kr_sd);
    }
    std::printf("---\n");
    std::printf("ate_rigid = %.17g\n", ate_r);
    std::printf("ate_rigid_std = %.17g\n", ate_r_sd);
    std::printf("ate_none = %.17g\n", ate_n);
    std::printf("ate_none_std = %.17g\n", ate_n_sd);
    std::printf("rpe_trans = %.17g\n", rpe_t);
    std::printf("rpe_trans_std = %.17g\n", rpe_t_sd);
    std::printf("rpe_rot_deg = %.17g\n", rpe_r);
    std::printf("rpe_rot_deg_std = %.17g\n", rpe_r_sd);
    if (args.with_kitti) {
        const auto [kt, kt_sd] = stats([](const Row& r) { return r.kitti_t; });
        const auto [kr, kr_sd] = stats([](const Row& r) { return r.kitti_r; });
        std::printf("kitti_t_err = %.17g\n", kt);
        std::printf("kitti_t_err_std = %.17g\n", kt_sd);
        std::printf("kitti_r_err = %.17g\n", kr);
        std::printf("kitti_r_err_std = %.17g\n", kr_sd);
    }
    return 0;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
    std::string spec_path;
    std::string config_path;
    std::string out_dir;
    int threads = 1;
};

int run_simulate(const SimulateArgs& args) {
    SimSpec spec;
    if (!args.spec_path.empty())
        spec = load_sim_spec(args.spec_path);
    else
        spec.trajectory = default_spec();
    const RunConfig cfg = args.config_path.empty()
                              ? default_config()
                              : load_config(args.config_path);

    const Scene scene = make_scene(spec.scene, spec.trajectory);
    const RunData run =
        generate_run(spec.trajectory, scene, cfg.camera, true, args.threads);
    write_run(run, cfg.camera, spec.trajectory, args.out_dir, args.threads);
    std::cerr << "simulate: " << run.ground_truth.size() << " frames -> "
              << args.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic-flow visual odometry and pose-graph SLAM"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand(
        "synth", "generate (flow, motion) training pairs from depth");
    synth->add_option("--depth-dir", synth_args.depth_dir,
                      "directory of 16-bit depth PNGs");
    synth->add_option("--sim-spec", synth_args.sim_spec,
                      "simulator spec file (renders source depth instead)");
    synth->add_option("--model", synth_args.model_path, "motion model file")
        ->required();
    synth->add_option("--config", synth_args.config_path, "run config file");
    synth->add_option("--out", synth_args.out_dir, "output directory")
        ->required();
    synth->add_option("--count", synth_args.count, "number of pairs")
        ->required();
    synth->add_option("--seed", synth_args.seed, "master seed");
    synth->add_option("--threads", synth_args.threads, "worker threads");

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit-motion",
                                   "fit the Student-t motion model");
    fit->add_option("--poses", fit_args.poses_path, "pose file");
    fit->add_option("--poses-format", fit_args.poses_format,
                    "kitti or tum (default kitti)");
    fit->add_option("--motions", fit_args.motions_path,
                    "motion record file (alternative input)");
    fit->add_option("--out", fit_args.out_path, "output model file")
        ->required();

    VoArgs vo_args;
    auto* vo = app.add_subcommand("vo",
                                  "estimate odometry from flow and depth");
    vo->add_option("--flow-dir", vo_args.flow_dir, "directory of .flo files");
    vo->add_option("--depth-dir", vo_args.depth_dir,
                   "directory of 16-bit depth PNGs");
    vo->add_option("--config", vo_args.config_path, "run config file");
    vo->add_option("--external", vo_args.external_path,
                   "prediction file consumed instead of estimating");
    vo->add_option("--out", vo_args.out_dir, "output directory")->required();
    vo->add_option("--threads", vo_args.threads, "worker threads");

    SlamArgs slam_args;
    auto* slam = app.add_subcommand(
        "slam", "odometry + relocalization + graph optimization");
    slam->add_option("--run-dir", slam_args.run_dir,
                     "sequence directory (flow/, depth/, image/)")
        ->required();
    slam->add_option("--config", slam_args.config_path, "run config file");
    slam->add_option("--odometry", slam_args.odometry_path,
                     "external odometry prediction file");
    slam->add_option("--loop-predictions", slam_args.loop_predictions_path,
                     "external loop-motion prediction file");
    slam->add_option("--out", slam_args.out_dir, "output directory")
        ->required();
    slam->add_option("--seed", slam_args.seed, "master seed");
    slam->add_option("--threads", slam_args.threads, "worker threads");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "trajectory metrics report");
    eval->add_option("--gt", eval_args.gt_path, "ground-truth trajectory")
        ->required();
    eval->add_option("--est", eval_args.est_paths,
                     "estimated trajectory (repeat for mean/std over runs)")
        ->required();
    eval->add_option("--gt-format", eval_args.gt_format, "kitti or tum");
    eval->add_option("--est-format", eval_args.est_format, "kitti or tum");
    eval->add_option("--delta", eval_args.delta, "RPE frame gap");
    eval->add_flag("--kitti", eval_args.with_kitti,
                   "include KITTI subsequence errors");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate",
                                        "render a synthetic run directory");
    simulate->add_option("--spec", sim_args.spec_path, "spec file");
    simulate->add_option("--config", sim_args.config_path, "run config file");
    simulate->add_option("--out", sim_args.out_dir, "output directory")
        ->required();
    simulate->add_option("--threads", sim_args.threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (fit->parsed()) return run_fit_motion(fit_args);
        if (vo->parsed()) return run_vo(vo_args);
        if (slam->parsed()) return run_slam(slam_args);
        if (eval->parsed()) return run_eval(eval_args);
        if (simulate->parsed()) return run_simulate(sim_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const EstimationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
