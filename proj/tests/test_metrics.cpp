#include "flowslam/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flowslam/errors.hpp"
#include "metrics_oracle.hpp"
#include "testing_util.hpp"

using namespace flowslam;
using flowslam::testing::random_motion;
using flowslam::testing::scalar_rpe;
using flowslam::testing::scalar_kitti;

namespace {

constexpr double kPi = 3.14159265358979323846;

Trajectory from_poses(const std::vector<SE3Pose>& poses) {
    Trajectory traj;
    for (size_t i = 0; i < poses.size(); ++i)
        traj.entries.push_back(TrajectoryEntry{int64_t(i), 0.0, poses[i]});
    return traj;
}

Trajectory random_trajectory(int n, uint64_t seed, double step_t = 0.5,
                             double step_r = 0.1) {
    std::mt19937_64 rng(seed);
    std::vector<SE3Pose> poses;
    SE3Pose pose = SE3Pose::identity();
    for (int i = 0; i < n; ++i) {
        poses.push_back(pose);
        pose = compose(pose, motion_to_se3(random_motion(rng, step_t, step_r)));
    }
    return from_poses(poses);
}

Trajectory transformed(const Trajectory& traj, const SE3Pose& t) {
    Trajectory out = traj;
    for (auto& e : out.entries) e.pose = compose(t, e.pose);
    return out;
}

}  // namespace

TEST(Metrics, AteZeroOnIdenticalTrajectories) {
    const Trajectory traj = random_trajectory(30, 41);
    EXPECT_EQ(ate(traj, traj, Alignment::None), 0.0);
    EXPECT_NEAR(ate(traj, traj, Alignment::Rigid), 0.0, 1e-12);
}

TEST(Metrics, AteUnalignedShift) {
    const Trajectory gt = random_trajectory(30, 42);
    Trajectory est = gt;
    for (auto& e : est.entries)
        e.pose.translation += Eigen::Vector3d(1, 0, 0);
    EXPECT_DOUBLE_EQ(ate(gt, est, Alignment::None), 1.0);
}

TEST(Metrics, AteRigidAlignmentRemovesTransform) {
    const Trajectory gt = random_trajectory(30, 43);
    std::mt19937_64 rng(44);
    const Trajectory est =
        transformed(gt, motion_to_se3(random_motion(rng, 5.0, 2.0)));
    EXPECT_NEAR(ate(gt, est, Alignment::Rigid), 0.0, 1e-9);
    EXPECT_LE(ate(gt, est, Alignment::Rigid),
              ate(gt, est, Alignment::None) + 1e-12);
}

TEST(Metrics, AteIdMismatchRejected) {
    const Trajectory gt = random_trajectory(10, 45);
    Trajectory est = gt;
    est.entries[3].frame_id = 99;
    EXPECT_THROW(ate(gt, est), ConfigError);
    est = random_trajectory(11, 45);
    EXPECT_THROW(ate(gt, est), ConfigError);
}

TEST(Metrics, RpeZeroOnIdentical) {
    const Trajectory traj = random_trajectory(30, 46);
    const RpeResult r = rpe(traj, traj);
    EXPECT_EQ(r.translation_rmse, 0.0);
    EXPECT_NEAR(r.rotation_rmse_deg, 0.0, 1e-7);
}

TEST(Metrics, RpeExactOneDegreeOffset) {
    // Every estimated relative motion carries an extra 1-degree yaw.
    const int n = 40;
    std::mt19937_64 rng(47);
    std::vector<SE3Pose> gt_poses, est_poses;
    SE3Pose g = SE3Pose::identity(), e = SE3Pose::identity();
    const SE3Pose extra =
        motion_to_se3(Motion6DoF{0, 0, 0, 0, 0, kPi / 180.0});
    for (int i = 0; i < n; ++i) {
        gt_poses.push_back(g);
        est_poses.push_back(e);
        const SE3Pose step = motion_to_se3(random_motion(rng, 0.5, 0.05));
        g = compose(g, step);
        e = compose(e, compose(step, extra));
    }
    const RpeResult r = rpe(from_poses(gt_poses), from_poses(est_poses));
    EXPECT_NEAR(r.rotation_rmse_deg, 1.0, 1e-9);
}

TEST(Metrics, RpeMatchesScalarReimplementation) {
    std::mt19937_64 rng(48);
    for (int trial = 0; trial < 20; ++trial) {
        const Trajectory gt = random_trajectory(50, 1000 + trial);
        Trajectory est = gt;
        for (auto& e : est.entries) {
            const Motion6DoF noise = random_motion(rng, 0.05, 0.02);
            e.pose = compose(e.pose, motion_to_se3(noise));
        }
        for (int delta : {1, 3, 7}) {
            const RpeResult r = rpe(gt, est, delta);
            double ts, rs;
            scalar_rpe(gt, est, delta, ts, rs);
            EXPECT_NEAR(r.translation_rmse, ts, 1e-9);
            EXPECT_NEAR(r.rotation_rmse_deg, rs, 1e-9);
        }
    }
}

TEST(Metrics, KittiZeroOnIdentical) {
    // Straight line, 1 m spacing, 900 m long.
    std::vector<SE3Pose> poses;
    for (int i = 0; i < 901; ++i) {
        SE3Pose p;
        p.translation = Eigen::Vector3d(0, 0, double(i));
        poses.push_back(p);
    }
    const Trajectory traj = from_poses(poses);
    const KittiErrors k = kitti_errors(traj, traj);
    EXPECT_EQ(k.t_err_percent, 0.0);
    EXPECT_NEAR(k.r_err_deg_per_100m, 0.0, 1e-9);
}

TEST(Metrics, KittiOnePercentScaleError) {
    std::vector<SE3Pose> gt_poses, est_poses;
    for (int i = 0; i < 1201; ++i) {
        SE3Pose g, e;
        g.translation = Eigen::Vector3d(0, 0, double(i));
        e.translation = Eigen::Vector3d(0, 0, double(i) * 1.01);
        gt_poses.push_back(g);
        est_poses.push_back(e);
    }
    const KittiErrors k =
        kitti_errors(from_poses(gt_poses), from_poses(est_poses));
    EXPECT_NEAR(k.t_err_percent, 1.0, 1e-6);
    EXPECT_NEAR(k.r_err_deg_per_100m, 0.0, 1e-9);
}

TEST(Metrics, KittiMatchesScalarReimplementationOnCircle) {
    // Circular path, radius chosen so the loop is ~1250 m.
    const double radius = 200.0;
    std::vector<SE3Pose> gt_poses, est_poses;
    std::mt19937_64 rng(49);
    SE3Pose drift = SE3Pose::identity();
    for (int i = 0; i < 1200; ++i) {
        const double theta = double(i) / 1200.0 * 2.0 * kPi;
        SE3Pose g;
        g.translation = Eigen::Vector3d(radius * std::sin(theta), 0,
                                        radius * (1 - std::cos(theta)));
        g.rotation =
            motion_to_se3(Motion6DoF{0, 0, 0, 0, theta, 0}).rotation;
        gt_poses.push_back(g);
        drift = compose(drift, motion_to_se3(random_motion(rng, 0.01, 0.001)));
        est_poses.push_back(compose(g, drift));
    }
    const Trajectory gt = from_poses(gt_poses);
    const Trajectory est = from_poses(est_poses);
    const KittiErrors k = kitti_errors(gt, est);
    double ts, rs;
    scalar_kitti(gt, est, ts, rs);
    EXPECT_NEAR(k.t_err_percent, ts, 1e-9);
    EXPECT_NEAR(k.r_err_deg_per_100m, rs, 1e-9);
    EXPECT_GT(k.t_err_percent, 0.0);
}

TEST(Metrics, KittiShortTrajectoryRejected) {
    std::vector<SE3Pose> poses;
    for (int i = 0; i < 50; ++i) {
        SE3Pose p;
        p.translation = Eigen::Vector3d(0, 0, double(i));
        poses.push_back(p);
    }
    const Trajectory traj = from_poses(poses);
    EXPECT_THROW(kitti_errors(traj, traj), ConfigError);
}

TEST(Metrics, InvariantUnderCommonRigidTransform) {
    const Trajectory gt = random_trajectory(60, 50, 2.0, 0.2);
    Trajectory est = gt;
    std::mt19937_64 rng(51);
    for (auto& e : est.entries)
        e.pose = compose(e.pose, motion_to_se3(random_motion(rng, 0.1, 0.02)));

    const SE3Pose common = motion_to_se3(random_motion(rng, 10.0, 2.0));
    const Trajectory gt2 = transformed(gt, common);
    const Trajectory est2 = transformed(est, common);

    EXPECT_NEAR(ate(gt, est, Alignment::None), ate(gt2, est2, Alignment::None),
                1e-9);
    EXPECT_NEAR(ate(gt, est, Alignment::Rigid),
                ate(gt2, est2, Alignment::Rigid), 1e-9);
    const RpeResult a = rpe(gt, est), b = rpe(gt2, est2);
    EXPECT_NEAR(a.translation_rmse, b.translation_rmse, 1e-9);
    EXPECT_NEAR(a.rotation_rmse_deg, b.rotation_rmse_deg, 1e-9);
}

TEST(Metrics, TrajectoryValidation) {
    Trajectory traj = random_trajectory(5, 52);
    EXPECT_NO_THROW(traj.validate());
    traj.entries[2].frame_id = traj.entries[1].frame_id;
    EXPECT_THROW(traj.validate(), ConfigError);
}
