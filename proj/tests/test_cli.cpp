#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "flowslam/io.hpp"
#include "flowslam/metrics.hpp"
#include "flowslam/pose_graph.hpp"
#include "flowslam/sim.hpp"
#include "testing_util.hpp"

using namespace flowslam;
using flowslam::testing::TempDir;
using flowslam::testing::hash_tree;

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args, const std::string& stdout_file = "") {
    std::string cmd = std::string(FLOWSLAM_CLI_PATH) + " " + args;
    if (!stdout_file.empty()) cmd += " > " + stdout_file;
    cmd += " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, double> parse_kv(const std::string& path) {
    std::ifstream in(path);
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(in, line)) {
        const size_t eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = std::stod(line.substr(eq + 3));
    }
    return kv;
}

// One small rendered run shared by the vo/slam tests.
class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        tmp_ = new TempDir("cli");
        run_dir_ = (tmp_->path() / "run").string();
        {
            std::ofstream out(tmp_->str("spec.cfg"));
            out << "[trajectory]\n";
            out << "waypoints = 0,0,0; 6,0,0; 6,0,6; 0,0,6; 0,0,0\n";
            out << "poses_per_segment = 10\n";  // 41 poses
            out << "seed = 5\n";
        }
        {
            std::ofstream out(tmp_->str("camera.cfg"));
            out << "[camera]\n";
            out << "fx = 100\nfy = 100\ncx = 79.5\ncy = 59.5\n";
            out << "width = 160\nheight = 120\n";
        }
        ASSERT_EQ(run_cli("simulate --spec " + tmp_->str("spec.cfg") +
                          " --config " + tmp_->str("camera.cfg") + " --out " +
                          run_dir_ + " --threads 2"),
                  0);
    }
    static void TearDownTestSuite() {
        delete tmp_;
        tmp_ = nullptr;
    }
    static TempDir* tmp_;
    static std::string run_dir_;
};

TempDir* CliTest::tmp_ = nullptr;
std::string CliTest::run_dir_;

}  // namespace

TEST(Cli, HelpExitsZero) {
    EXPECT_EQ(run_cli("--help", "/dev/null"), 0);
    EXPECT_EQ(run_cli("synth --help", "/dev/null"), 0);
}

TEST(Cli, UnknownFlagExitsTwo) {
    EXPECT_EQ(run_cli("eval --no-such-flag"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST_F(CliTest, SimulateIsSeedReproducible) {
    const std::string again = (tmp_->path() / "run_again").string();
    ASSERT_EQ(run_cli("simulate --spec " + tmp_->str("spec.cfg") +
                      " --config " + tmp_->str("camera.cfg") + " --out " +
                      again + " --threads 1"),
              0);
    EXPECT_EQ(hash_tree(run_dir_), hash_tree(again));
    fs::remove_all(again);
}

TEST_F(CliTest, MalformedSpecExitsTwo) {
    std::ofstream(tmp_->str("bad_spec.cfg")) << "[trajectory]\nbogus = 1\n";
    EXPECT_EQ(run_cli("simulate --spec " + tmp_->str("bad_spec.cfg") +
                      " --out " + (tmp_->path() / "x").string()),
              2);
}

TEST_F(CliTest, FitMotionFromPoses) {
    const std::string model = tmp_->str("model.txt");
    ASSERT_EQ(run_cli("fit-motion --poses " + run_dir_ + "/gt_poses.txt" +
                      " --out " + model),
              0);
    const MotionModel m = load_model_file(model);
    for (const TMarginal& marginal : m.marginals) {
        EXPECT_TRUE(std::isfinite(marginal.nu));
        EXPECT_TRUE(std::isfinite(marginal.loc));
        EXPECT_GT(marginal.scale, 0.0);
    }
}

TEST_F(CliTest, FitMotionTooFewPosesExitsTwo) {
    Trajectory tiny;
    for (int i = 0; i < 10; ++i)
        tiny.entries.push_back(TrajectoryEntry{i, 0.0, SE3Pose::identity()});
    write_kitti_poses(tiny, tmp_->str("tiny.txt"));
    EXPECT_EQ(run_cli("fit-motion --poses " + tmp_->str("tiny.txt") +
                      " --out " + tmp_->str("m.txt")),
              2);
}

TEST_F(CliTest, SynthDeterministicAndCountZero) {
    const std::string model = tmp_->str("model2.txt");
    ASSERT_EQ(run_cli("fit-motion --poses " + run_dir_ + "/gt_poses.txt" +
                      " --out " + model),
              0);

    const std::string empty_out = (tmp_->path() / "synth0").string();
    ASSERT_EQ(run_cli("synth --depth-dir " + run_dir_ + "/depth --model " +
                      model + " --config " + tmp_->str("camera.cfg") +
                      " --count 0 --out " + empty_out),
              0);
    EXPECT_TRUE(fs::exists(fs::path(empty_out) / "manifest.txt"));
    EXPECT_EQ(run_cli("eval --gt /nonexistent --est /nonexistent"), 3);

    const std::string a = (tmp_->path() / "synth_a").string();
    const std::string b = (tmp_->path() / "synth_b").string();
    for (const std::string& out : {a, b})
        ASSERT_EQ(run_cli("synth --depth-dir " + run_dir_ + "/depth --model " +
                          model + " --config " + tmp_->str("camera.cfg") +
                          " --count 6 --seed 42 --threads 2 --out " + out),
                  0);
    EXPECT_EQ(hash_tree(a), hash_tree(b));
    EXPECT_TRUE(fs::exists(fs::path(a) / "flow" / "flow_000005.flo"));
}

TEST_F(CliTest, SynthInvalidDepthDirExitsThree) {
    const std::string model = tmp_->str("model3.txt");
    ASSERT_EQ(run_cli("fit-motion --poses " + run_dir_ + "/gt_poses.txt" +
                      " --out " + model),
              0);
    EXPECT_EQ(run_cli("synth --depth-dir /no/such/dir --model " + model +
                      " --count 1 --out " + (tmp_->path() / "x2").string()),
              3);
}

TEST_F(CliTest, VoRecoversNoiselessTrajectory) {
    const std::string out = (tmp_->path() / "vo_out").string();
    ASSERT_EQ(run_cli("vo --flow-dir " + run_dir_ + "/flow --depth-dir " +
                      run_dir_ + "/depth --config " + run_dir_ +
                      "/camera.cfg --threads 2 --out " + out),
              0);
    const Trajectory gt = read_kitti_poses(run_dir_ + "/gt_poses.txt");
    const Trajectory est =
        read_kitti_poses((fs::path(out) / "trajectory_kitti.txt").string());
    // Depth quantization (1/256 m PNG) bounds the per-step error.
    EXPECT_LT(ate(gt, est, Alignment::Rigid), 0.05);
}

TEST_F(CliTest, VoMissingConfigExitsTwo) {
    EXPECT_EQ(run_cli("vo --flow-dir " + run_dir_ + "/flow --depth-dir " +
                      run_dir_ + "/depth --out " +
                      (tmp_->path() / "x3").string()),
              2);
}

TEST_F(CliTest, VoExternalPredictionMode) {
    const std::string out = (tmp_->path() / "vo_ext").string();
    ASSERT_EQ(run_cli("vo --external " + run_dir_ + "/gt_motions.txt" +
                      " --config " + run_dir_ + "/camera.cfg --out " + out),
              0);
    const Trajectory gt = read_kitti_poses(run_dir_ + "/gt_poses.txt");
    const Trajectory est =
        read_kitti_poses((fs::path(out) / "trajectory_kitti.txt").string());
    // Ground-truth motions chained reproduce the trajectory up to the
    // unknown start pose (integration begins at the identity).
    EXPECT_LT(ate(gt, est, Alignment::Rigid), 1e-9);
}

TEST_F(CliTest, SlamWithLoopsDisabledEqualsIntegratedVo) {
    {
        std::ofstream out(tmp_->str("noloop.cfg"));
        out << "[camera]\nfx = 100\nfy = 100\ncx = 79.5\ncy = 59.5\n";
        out << "width = 160\nheight = 120\n";
        out << "[slam]\nT_loop = 100000\n";  // no gap can exceed this
    }
    const std::string out = (tmp_->path() / "slam_noloop").string();
    ASSERT_EQ(run_cli("slam --run-dir " + run_dir_ + " --config " +
                      tmp_->str("noloop.cfg") + " --odometry " + run_dir_ +
                      "/gt_motions.txt --threads 2 --out " + out),
              0);
    // loops.txt must be empty of candidates.
    std::ifstream loops((fs::path(out) / "loops.txt").string());
    std::string line;
    int candidates = 0;
    while (std::getline(loops, line))
        if (!line.empty() && line[0] != '#') ++candidates;
    EXPECT_EQ(candidates, 0);

    const Trajectory vo = read_kitti_poses(
        (fs::path(out) / "vo_trajectory_kitti.txt").string());
    const Trajectory opt =
        read_kitti_poses((fs::path(out) / "trajectory_kitti.txt").string());
    EXPECT_LT(ate(vo, opt, Alignment::None), 1e-9);

    // Graph dump reloads bit-exact.
    const std::string dump = (fs::path(out) / "graph.g2o").string();
    const PoseGraph graph = load_graph_file(dump);
    const std::string again = tmp_->str("graph_again.g2o");
    save_graph_file(graph, again);
    std::ifstream fa(dump), fb(again);
    const std::string a((std::istreambuf_iterator<char>(fa)), {});
    const std::string b((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(a, b);
    EXPECT_EQ(graph.nodes.size(), vo.size());
}

TEST_F(CliTest, EvalMatchesLibraryAndHandlesErrors) {
    const std::string report = tmp_->str("report.txt");
    ASSERT_EQ(run_cli("eval --gt " + run_dir_ + "/gt_poses.txt --est " +
                      run_dir_ + "/gt_poses.txt",
                      report),
              0);
    const auto kv = parse_kv(report);
    EXPECT_EQ(kv.at("ate_none"), 0.0);
    EXPECT_EQ(kv.at("rpe_trans"), 0.0);
    EXPECT_LT(kv.at("rpe_rot_deg"), 1e-9);

    // Values equal direct library calls on a perturbed estimate.
    Trajectory est = read_kitti_poses(run_dir_ + "/gt_poses.txt");
    for (size_t i = 0; i < est.size(); ++i)
        est.entries[i].pose.translation.x() += 0.01 * double(i % 5);
    write_kitti_poses(est, tmp_->str("est.txt"));
    ASSERT_EQ(run_cli("eval --gt " + run_dir_ + "/gt_poses.txt --est " +
                      tmp_->str("est.txt"),
                      report),
              0);
    const auto kv2 = parse_kv(report);
    const Trajectory gt = read_kitti_poses(run_dir_ + "/gt_poses.txt");
    EXPECT_EQ(kv2.at("ate_none"), ate(gt, est, Alignment::None));
    EXPECT_EQ(kv2.at("ate_rigid"), ate(gt, est, Alignment::Rigid));
    const RpeResult r = rpe(gt, est);
    EXPECT_EQ(kv2.at("rpe_trans"), r.translation_rmse);
    EXPECT_EQ(kv2.at("rpe_rot_deg"), r.rotation_rmse_deg);

    // Mismatched lengths: usage error.
    Trajectory shorter = gt;
    shorter.entries.pop_back();
    write_kitti_poses(shorter, tmp_->str("short.txt"));
    EXPECT_EQ(run_cli("eval --gt " + run_dir_ + "/gt_poses.txt --est " +
                      tmp_->str("short.txt")),
              2);
}
