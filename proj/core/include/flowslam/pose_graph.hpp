#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "flowslam/geom.hpp"
#include "flowslam/reloc.hpp"
#include "flowslam/vo.hpp"

namespace flowslam {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix7d = Eigen::Matrix<double, 7, 7>;

/// Per-component standard deviations of a relative motion.
struct SigmaParams {
    double sigma_tx = 0.02;
    double sigma_ty = 0.02;
    double sigma_tz = 0.02;
    double sigma_alpha = 0.002;
    double sigma_beta = 0.002;
    double sigma_gamma = 0.002;

    void validate() const;
};

/// Graph-level hyperparameters: covariance scale, extra rotation scale,
/// and the loop-detection index threshold.
struct HyperParams {
    double c_si = 10000.0;
    double c_r = 1.0;
    int t_loop = 50;

    void validate() const;
};

/// Diagonal motion covariance:
///   c_si * diag(s_tx^2, s_ty^2, s_tz^2, c_r*s_a^2, c_r*s_b^2, c_r*s_g^2)
Matrix6d covariance_q(const SigmaParams& sigmas, const HyperParams& hp);

enum class Eq3Inverse {
    PseudoInverse,  ///< truncated eigen-inverse (the 7x7 product is rank 6)
    Ridge,          ///< (M + 1e-10 I)^-1, for comparison runs
};

/// Map a 6x6 motion covariance onto the 7x7 information matrix of the
/// (translation, quaternion) parametrization: P = (J Q J^T)^+, with
/// J = d(t, q)/d(t, euler) evaluated at `linearization`. The product is
/// rank-deficient by construction; the pseudo-inverse truncates singular
/// values below 1e-12 of the largest and the result is symmetrized.
/// Throws ConfigError when Q is not symmetric PSD.
Matrix7d information_from_q(const Matrix6d& q, const Motion6DoF& linearization,
                            Eq3Inverse mode = Eq3Inverse::PseudoInverse);

enum class EdgeKind { Consecutive, Loop };

/// Relative-pose constraint between nodes i and j. The motion is the
/// camera displacement: se3(motion) ~ inverse(node_i) * node_j.
/// meas_quat is the rotation actually stored in dumps and used by the
/// residual; it is kept verbatim so file round-trips are bit-stable
/// (quaternion<->matrix conversion drifts in the last bit).
struct MotionEdge {
    int i = 0;
    int j = 0;
    Motion6DoF motion;
    UnitQuaternion meas_quat;
    Matrix7d information = Matrix7d::Zero();  ///< weights the 7-vector residual
    Matrix6d info6 = Matrix6d::Zero();  ///< (t, euler) information, serialized form
    EdgeKind kind = EdgeKind::Consecutive;

    static MotionEdge make(int i, int j, const Motion6DoF& motion,
                           const Matrix7d& information, const Matrix6d& info6,
                           EdgeKind kind);
};

struct PoseGraph {
    std::vector<SE3Pose> nodes;
    /// Exact node rotations for serialization, same length as nodes when
    /// populated; rebuilt by optimize and load_graph.
    std::vector<UnitQuaternion> node_quats;
    std::vector<MotionEdge> edges;
    int anchor = 0;  ///< node held fixed during optimization
};

struct BuildOptions {
    bool per_edge_covariance = false;  ///< use each estimate's own covariance
    Eq3Inverse inverse_mode = Eq3Inverse::PseudoInverse;
};

/// Chain the consecutive-pair odometry from the identity into initial
/// node poses and attach one edge per estimate plus one per passed loop
/// candidate. Odometry motions are camera-convention (node_{k+1} =
/// node_k * se3(m_k)). Edge information comes from covariance_q /
/// information_from_q, or from the estimate covariances when enabled.
PoseGraph build_graph(
    const std::vector<MotionEstimate>& odometry,
    const std::vector<std::pair<LoopCandidate, MotionEstimate>>& loops,
    const SigmaParams& sigmas, const HyperParams& hp,
    const BuildOptions& options = {});

/// Total objective sum_edges r^T P r with the 7-vector residual
/// (translation difference, sign-aligned quaternion difference).
double graph_chi2(const PoseGraph& graph);

struct OptimizeResult {
    PoseGraph graph;
    double chi2 = 0.0;
    int iterations = 0;
};

/// Levenberg-Marquardt over node poses with the anchor fixed. Local
/// 6-DoF increments per node; damping lambda starts at 1e-4, x10 on
/// rejection, /10 on acceptance; accepted steps strictly decrease chi2.
/// Stops on relative chi2 change below tol or max_iters. Dense Cholesky
/// solve; graphs beyond 2000 nodes are rejected. Throws EstimationError
/// for disconnected graphs or non-finite residuals (naming the edge).
OptimizeResult optimize(const PoseGraph& graph, int max_iters = 100,
                        double tol = 1e-9);

/// g2o-style text dump, value-exact:
///   VERTEX_SE3:QUAT id tx ty tz qx qy qz qw
///   EDGE_SE3:QUAT i j tx ty tz qx qy qz qw <21 upper-triangle info6>
///   FIX anchor
void save_graph(const PoseGraph& graph, std::ostream& out);
void save_graph_file(const PoseGraph& graph, const std::string& path);
PoseGraph load_graph(std::istream& in, const std::string& name = "<stream>",
                     Eq3Inverse mode = Eq3Inverse::PseudoInverse);
PoseGraph load_graph_file(const std::string& path,
                          Eq3Inverse mode = Eq3Inverse::PseudoInverse);

}  // namespace flowslam
