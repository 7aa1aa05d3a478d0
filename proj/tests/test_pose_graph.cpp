#include "flowslam/pose_graph.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "flowslam/errors.hpp"
#include "graph_oracle.hpp"
#include "testing_util.hpp"

using namespace flowslam;
using flowslam::testing::pose_diff;
using flowslam::testing::random_motion;
using flowslam::testing::TempDir;
using flowslam::testing::make_estimate;
using flowslam::testing::random_graph;
using flowslam::testing::oracle_solve;

TEST(PoseGraph, CovarianceQClosedForm) {
    SigmaParams ones;
    ones.sigma_tx = ones.sigma_ty = ones.sigma_tz = 1.0;
    ones.sigma_alpha = ones.sigma_beta = ones.sigma_gamma = 1.0;
    HyperParams unit;
    unit.c_si = 1.0;
    unit.c_r = 1.0;
    EXPECT_EQ(covariance_q(ones, unit), Matrix6d::Identity());

    // The reference operating point: C_si = 10000, C_r = 0.004.
    HyperParams table;
    table.c_si = 10000.0;
    table.c_r = 0.004;
    SigmaParams sigmas;
    sigmas.sigma_tx = 0.1;
    sigmas.sigma_alpha = 0.03;
    const Matrix6d q = covariance_q(sigmas, table);
    EXPECT_DOUBLE_EQ(q(0, 0), 10000.0 * 0.01);
    EXPECT_DOUBLE_EQ(q(3, 3), 10000.0 * 0.004 * 0.03 * 0.03);
    EXPECT_DOUBLE_EQ(q(3, 3), 40.0 * 0.03 * 0.03);

    // Exactly diagonal, and homogeneous of degree 2 in the sigmas.
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c)
            if (r != c) EXPECT_EQ(q(r, c), 0.0);
    SigmaParams doubled = sigmas;
    doubled.sigma_tx *= 2;
    doubled.sigma_ty *= 2;
    doubled.sigma_tz *= 2;
    doubled.sigma_alpha *= 2;
    doubled.sigma_beta *= 2;
    doubled.sigma_gamma *= 2;
    EXPECT_LT((covariance_q(doubled, table) - 4.0 * q).cwiseAbs().maxCoeff(),
              1e-12);
}

TEST(PoseGraph, InformationTranslationBlockIsInverse) {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        SigmaParams sigmas;
        sigmas.sigma_tx = 0.1 + 0.2 * trial;
        sigmas.sigma_ty = 0.05;
        sigmas.sigma_tz = 0.3;
        HyperParams hp;
        hp.c_si = 2.0;
        const Matrix6d q = covariance_q(sigmas, hp);
        const Motion6DoF lin = random_motion(rng, 1.0, 1.0);
        const Matrix7d p = information_from_q(q, lin);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                EXPECT_NEAR(p(r, c), r == c ? 1.0 / q(r, r) : 0.0,
                            1e-9 / q(r, r));
    }
}

TEST(PoseGraph, QuatEulerJacobianMatchesCentralDifferences) {
    // Same check as the acceptance criterion, at unit-test scale.
    std::mt19937_64 rng(72);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const Motion6DoF m = random_motion(rng, 0.0, 1.4);
        const Eigen::Matrix<double, 4, 3> jac =
            quat_euler_jacobian(m.alpha, m.beta, m.gamma);
        auto q_of = [](double a, double b, double g) {
            const UnitQuaternion qx{std::cos(a / 2), std::sin(a / 2), 0, 0};
            const UnitQuaternion qy{std::cos(b / 2), 0, std::sin(b / 2), 0};
            const UnitQuaternion qz{std::cos(g / 2), 0, 0, std::sin(g / 2)};
            const UnitQuaternion q = quat_multiply(qz, quat_multiply(qy, qx));
            return Eigen::Vector4d(q.x, q.y, q.z, q.w);
        };
        Eigen::Matrix<double, 4, 3> fd;
        fd.col(0) = (q_of(m.alpha + h, m.beta, m.gamma) -
                     q_of(m.alpha - h, m.beta, m.gamma)) /
                    (2 * h);
        fd.col(1) = (q_of(m.alpha, m.beta + h, m.gamma) -
                     q_of(m.alpha, m.beta - h, m.gamma)) /
                    (2 * h);
        fd.col(2) = (q_of(m.alpha, m.beta, m.gamma + h) -
                     q_of(m.alpha, m.beta, m.gamma - h)) /
                    (2 * h);
        const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
        EXPECT_LT((jac - fd).cwiseAbs().maxCoeff() / scale, 1e-5);
    }
}

TEST(PoseGraph, InformationPermutationSymmetryAtZeroRotation) {
    SigmaParams sigmas;
    sigmas.sigma_alpha = sigmas.sigma_beta = sigmas.sigma_gamma = 0.02;
    HyperParams hp;
    hp.c_si = 1.0;
    const Matrix7d p = information_from_q(covariance_q(sigmas, hp),
                                          Motion6DoF{});
    // Quaternion x, y, z axes are interchangeable for an isotropic Q at
    // the zero-rotation linearization.
    EXPECT_NEAR(p(3, 3), p(4, 4), 1e-6 * p(3, 3));
    EXPECT_NEAR(p(4, 4), p(5, 5), 1e-6 * p(4, 4));
    EXPECT_NEAR(p(3, 4), 0.0, 1e-9 * p(3, 3));
    // The w row/column lies in the null space there.
    for (int c = 0; c < 7; ++c) EXPECT_NEAR(p(6, c), 0.0, 1e-9 * p(3, 3));
}

TEST(PoseGraph, InformationPsdAndSymmetric) {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 50; ++trial) {
        // Random PSD Q.
        Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Random();
        const Matrix6d q = a * a.transpose() * 1e-3;
        const Motion6DoF lin = random_motion(rng, 1.0, 1.3);
        for (const Eq3Inverse mode :
             {Eq3Inverse::PseudoInverse, Eq3Inverse::Ridge}) {
            const Matrix7d p = information_from_q(q, lin, mode);
            EXPECT_LT((p - p.transpose()).cwiseAbs().maxCoeff(),
                      1e-9 * std::max(1.0, p.cwiseAbs().maxCoeff()));
            Eigen::SelfAdjointEigenSolver<Matrix7d> eig(p);
            EXPECT_GT(eig.eigenvalues().minCoeff(),
                      -1e-9 * eig.eigenvalues().maxCoeff());
        }
    }
}

TEST(PoseGraph, InformationRejectsNonPsd) {
    Matrix6d q = Matrix6d::Identity();
    q(2, 2) = -1.0;
    EXPECT_THROW(information_from_q(q, Motion6DoF{}), ConfigError);
    q = Matrix6d::Identity();
    q(0, 1) = 0.5;  // asymmetric
    EXPECT_THROW(information_from_q(q, Motion6DoF{}), ConfigError);
}

TEST(PoseGraph, BuildGraphTwoNodes) {
    const Motion6DoF m{0.5, 0.1, -0.2, 0.05, -0.02, 0.03};
    const PoseGraph graph =
        build_graph({make_estimate(m)}, {}, SigmaParams{}, HyperParams{});
    ASSERT_EQ(graph.nodes.size(), 2u);
    ASSERT_EQ(graph.edges.size(), 1u);
    EXPECT_EQ(graph.anchor, 0);
    EXPECT_LT(pose_diff(graph.nodes[1], motion_to_se3(m)), 1e-15);
    EXPECT_EQ(graph.edges[0].kind, EdgeKind::Consecutive);
}

TEST(PoseGraph, BuildGraphEdgeCounts) {
    std::mt19937_64 rng(74);
    std::vector<MotionEstimate> odometry;
    for (int i = 0; i < 9; ++i)
        odometry.push_back(make_estimate(random_motion(rng, 0.5, 0.1)));
    const PoseGraph no_loops =
        build_graph(odometry, {}, SigmaParams{}, HyperParams{});
    EXPECT_EQ(no_loops.edges.size(), odometry.size());
    EXPECT_EQ(no_loops.nodes.size(), odometry.size() + 1);

    LoopCandidate cand;
    cand.i = 0;
    cand.j = 9;
    cand.passed = true;
    LoopCandidate failed = cand;
    failed.passed = false;
    const PoseGraph with_loops = build_graph(
        odometry,
        {{cand, make_estimate(random_motion(rng, 0.5, 0.1))},
         {failed, make_estimate(random_motion(rng, 0.5, 0.1))}},
        SigmaParams{}, HyperParams{});
    EXPECT_EQ(with_loops.edges.size(), odometry.size() + 1);
    EXPECT_EQ(with_loops.edges.back().kind, EdgeKind::Loop);
}

TEST(PoseGraph, BuildGraphRejectsMissingNode) {
    std::mt19937_64 rng(75);
    std::vector<MotionEstimate> odometry{
        make_estimate(random_motion(rng, 0.5, 0.1))};
    LoopCandidate cand;
    cand.i = 0;
    cand.j = 5;
    cand.passed = true;
    EXPECT_THROW(build_graph(odometry, {{cand, odometry[0]}}, SigmaParams{},
                             HyperParams{}),
                 ConfigError);
}

TEST(PoseGraph, ExactlyConsistentChainNeedsNoIterations) {
    // Pure translations keep the chain consistent to rounding; chi2 sits
    // at the double-precision noise floor and no iteration runs.
    std::mt19937_64 rng(76);
    std::vector<MotionEstimate> odometry;
    for (int i = 0; i < 10; ++i)
        odometry.push_back(make_estimate(random_motion(rng, 0.5, 0.0)));
    const PoseGraph graph =
        build_graph(odometry, {}, SigmaParams{}, HyperParams{});
    EXPECT_LT(graph_chi2(graph), 1e-24 * graph.edges.size());
    const OptimizeResult result = optimize(graph);
    EXPECT_EQ(result.iterations, 0);
    EXPECT_LT(result.chi2, 1e-24 * graph.edges.size());
    for (size_t k = 0; k < graph.nodes.size(); ++k)
        EXPECT_LT(pose_diff(result.graph.nodes[k], graph.nodes[k]), 1e-15);
}

TEST(PoseGraph, NoiseFreeChainStaysPut) {
    // With rotations the chain is consistent only to rounding; the
    // optimizer must leave the nodes essentially unchanged.
    std::mt19937_64 rng(76);
    std::vector<MotionEstimate> odometry;
    for (int i = 0; i < 10; ++i)
        odometry.push_back(make_estimate(random_motion(rng, 0.5, 0.2)));
    const PoseGraph graph =
        build_graph(odometry, {}, SigmaParams{}, HyperParams{});
    EXPECT_LT(graph_chi2(graph), 1e-18);
    const OptimizeResult result = optimize(graph);
    EXPECT_LT(result.chi2, 1e-18);
    for (size_t k = 0; k < graph.nodes.size(); ++k)
        EXPECT_LT(pose_diff(result.graph.nodes[k], graph.nodes[k]), 1e-12);
}

TEST(PoseGraph, TriangleMatchesBruteForce) {
    // 3 nodes, consistent chain, one inconsistent closing edge with equal
    // information everywhere.
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const PoseGraph graph = random_graph(3, 1, 800 + trial);
        const OptimizeResult lm = optimize(graph, 200, 1e-14);
        double oracle_best;
        const Eigen::VectorXd oracle_params = oracle_solve(graph, &oracle_best);
        EXPECT_NEAR(lm.chi2, oracle_best,
                    1e-6 * std::max(1.0, oracle_best));
        int p = 0;
        for (size_t k = 0; k < graph.nodes.size(); ++k) {
            if (int(k) == graph.anchor) continue;
            const SE3Pose oracle_pose = motion_to_se3(
                Motion6DoF::from_vector(oracle_params.segment<6>(6 * p)));
            EXPECT_LT((lm.graph.nodes[k].translation - oracle_pose.translation)
                          .norm(),
                      1e-5);
            ++p;
        }
    }
}

TEST(PoseGraph, RandomSmallGraphsMatchBruteForce) {
    std::mt19937_64 rng(78);
    std::uniform_int_distribution<int> nodes(3, 8);
    for (int trial = 0; trial < 10; ++trial) {
        const PoseGraph graph =
            random_graph(nodes(rng), 2, 900 + trial, 0.03, 0.01);
        const OptimizeResult lm = optimize(graph, 200, 1e-14);
        double oracle_best;
        const Eigen::VectorXd oracle_params = oracle_solve(graph, &oracle_best);
        EXPECT_NEAR(lm.chi2, oracle_best, 1e-6 * std::max(1.0, oracle_best));
        int p = 0;
        for (size_t k = 0; k < graph.nodes.size(); ++k) {
            if (int(k) == graph.anchor) continue;
            const SE3Pose oracle_pose = motion_to_se3(
                Motion6DoF::from_vector(oracle_params.segment<6>(6 * p)));
            EXPECT_LT((lm.graph.nodes[k].translation - oracle_pose.translation)
                          .norm(),
                      1e-5);
            ++p;
        }
    }
}

TEST(PoseGraph, Chi2NonIncreasingInIterationBudget) {
    const PoseGraph graph = random_graph(20, 4, 81);
    double prev = graph_chi2(graph);
    for (int budget = 1; budget <= 10; ++budget) {
        const OptimizeResult r = optimize(graph, budget, 1e-16);
        EXPECT_LE(r.chi2, prev + 1e-12);
        prev = r.chi2;
    }
}

TEST(PoseGraph, AnchorGaugeInvariance) {
    const PoseGraph graph = random_graph(12, 3, 82);
    const OptimizeResult base = optimize(graph);

    std::mt19937_64 rng(83);
    const SE3Pose t = motion_to_se3(random_motion(rng, 3.0, 1.0));
    PoseGraph moved = graph;
    for (size_t k = 0; k < moved.nodes.size(); ++k) {
        moved.nodes[k] = compose(t, moved.nodes[k]);
        moved.node_quats[k] =
            UnitQuaternion::from_matrix(moved.nodes[k].rotation);
    }
    const OptimizeResult shifted = optimize(moved);
    EXPECT_NEAR(base.chi2, shifted.chi2,
                1e-6 * std::max(1.0, base.chi2));
    for (size_t k = 0; k < graph.nodes.size(); ++k) {
        const SE3Pose expected = compose(t, base.graph.nodes[k]);
        EXPECT_LT(pose_diff(shifted.graph.nodes[k], expected), 1e-6);
    }
}

TEST(PoseGraph, DisconnectedGraphRejected) {
    PoseGraph graph = random_graph(5, 0, 84);
    graph.edges.erase(graph.edges.begin() + 2);  // split the chain
    EXPECT_THROW(optimize(graph), EstimationError);
}

TEST(PoseGraph, NonFiniteResidualNamesEdge) {
    PoseGraph graph = random_graph(4, 0, 85);
    graph.nodes[2].translation.x() = std::nan("");
    try {
        optimize(graph);
        FAIL() << "expected EstimationError";
    } catch (const EstimationError& e) {
        EXPECT_NE(std::string(e.what()).find("edge"), std::string::npos);
    }
}

TEST(PoseGraph, SaveLoadRoundTripBitExact) {
    TempDir tmp("pg_io");
    std::mt19937_64 rng(86);
    for (int trial = 0; trial < 10; ++trial) {
        const PoseGraph graph = random_graph(8, 2, 2000 + trial);
        save_graph_file(graph, tmp.str("a.g2o"));
        const PoseGraph loaded = load_graph_file(tmp.str("a.g2o"));
        save_graph_file(loaded, tmp.str("b.g2o"));

        std::ifstream fa(tmp.str("a.g2o")), fb(tmp.str("b.g2o"));
        const std::string a((std::istreambuf_iterator<char>(fa)), {});
        const std::string b((std::istreambuf_iterator<char>(fb)), {});
        EXPECT_EQ(a, b);

        ASSERT_EQ(loaded.nodes.size(), graph.nodes.size());
        ASSERT_EQ(loaded.edges.size(), graph.edges.size());
        EXPECT_EQ(loaded.anchor, graph.anchor);
        for (size_t k = 0; k < graph.nodes.size(); ++k)
            EXPECT_EQ(loaded.nodes[k].translation,
                      graph.nodes[k].translation);
        for (size_t e = 0; e < graph.edges.size(); ++e) {
            EXPECT_EQ(loaded.edges[e].i, graph.edges[e].i);
            EXPECT_EQ(loaded.edges[e].j, graph.edges[e].j);
            EXPECT_EQ(loaded.edges[e].info6, graph.edges[e].info6);
            EXPECT_EQ(loaded.edges[e].meas_quat.w, graph.edges[e].meas_quat.w);
            EXPECT_EQ(loaded.edges[e].kind, graph.edges[e].kind);
        }
    }
}

TEST(PoseGraph, LoadRejectsMalformed) {
    TempDir tmp("pg_bad");
    {
        std::ofstream out(tmp.str("bad.g2o"));
        out << "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\n";
        out << "EDGE_SE3:QUAT 0 1 0 0 0 0 0 0 1\n";  // missing info entries
    }
    EXPECT_THROW(load_graph_file(tmp.str("bad.g2o")), IoError);
    {
        std::ofstream out(tmp.str("bad2.g2o"));
        out << "WHATEVER 1 2 3\n";
    }
    EXPECT_THROW(load_graph_file(tmp.str("bad2.g2o")), IoError);
}

TEST(PoseGraph, OversizedGraphRejected) {
    std::vector<MotionEstimate> odometry(
        2100, make_estimate(Motion6DoF{0.1, 0, 0, 0, 0, 0}));
    const PoseGraph graph =
        build_graph(odometry, {}, SigmaParams{}, HyperParams{});
    EXPECT_THROW(optimize(graph), ConfigError);
}

TEST(PoseGraph, PerEdgeCovarianceMode) {
    std::mt19937_64 rng(87);
    std::vector<MotionEstimate> odometry;
    for (int i = 0; i < 4; ++i) {
        MotionEstimate est = make_estimate(random_motion(rng, 0.3, 0.1));
        Eigen::Matrix<double, 6, 6> a =
            Eigen::Matrix<double, 6, 6>::Random() * 0.01;
        est.covariance = a * a.transpose() +
                         1e-6 * Eigen::Matrix<double, 6, 6>::Identity();
        odometry.push_back(est);
    }
    BuildOptions options;
    options.per_edge_covariance = true;
    const PoseGraph graph =
        build_graph(odometry, {}, SigmaParams{}, HyperParams{}, options);
    // Edges differ because their covariances do.
    EXPECT_GT((graph.edges[0].information - graph.edges[1].information)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-6);
    EXPECT_NO_THROW(optimize(graph));
}
