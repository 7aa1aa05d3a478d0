#include "flowslam/pose_graph.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>
#include <sstream>

#include "flowslam/errors.hpp"

namespace flowslam {

namespace {

constexpr int kMaxDenseNodes = 2000;

using Vector7d = Eigen::Matrix<double, 7, 1>;

Eigen::Matrix3d skew(const Eigen::Vector3d& t) {
    Eigen::Matrix3d s;
    s << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
    return s;
}

struct EdgeResidual {
    Vector7d r;
    // Quaternion of the predicted relative rotation, sign-aligned to the
    // measurement; reused by the Jacobians.
    UnitQuaternion q;
    Eigen::Vector3d t_rel;
    Eigen::Matrix3d r_rel;
};

EdgeResidual edge_residual(const SE3Pose& node_i, const SE3Pose& node_j,
                           const MotionEdge& edge) {
    EdgeResidual out;
    out.r_rel = node_i.rotation.transpose() * node_j.rotation;
    out.t_rel =
        node_i.rotation.transpose() * (node_j.translation - node_i.translation);
    UnitQuaternion q = UnitQuaternion::from_matrix(out.r_rel);
    const UnitQuaternion& m = edge.meas_quat;
    if (q.w * m.w + q.x * m.x + q.y * m.y + q.z * m.z < 0.0) {
        q.w = -q.w;
        q.x = -q.x;
        q.y = -q.y;
        q.z = -q.z;
    }
    out.q = q;
    out.r << out.t_rel.x() - edge.motion.t_x, out.t_rel.y() - edge.motion.t_y,
        out.t_rel.z() - edge.motion.t_z, q.x - m.x, q.y - m.y, q.z - m.z,
        q.w - m.w;
    return out;
}

// Jacobians of the 7-vector residual with respect to local increments
// T -> T * se3(delta) of the two endpoint nodes, evaluated at delta = 0.
void edge_jacobians(const EdgeResidual& res,
                    Eigen::Matrix<double, 7, 6>& j_i,
                    Eigen::Matrix<double, 7, 6>& j_j) {
    const double qx = res.q.x, qy = res.q.y, qz = res.q.z, qw = res.q.w;
    j_i.setZero();
    j_j.setZero();

    // Node j: t_rel = R_rel*dt + t_rel; q = q_al (x) q(dtheta).
    j_j.block<3, 3>(0, 0) = res.r_rel;
    Eigen::Matrix<double, 4, 3> qj;
    qj << qw, -qz, qy,
          qz, qw, -qx,
         -qy, qx, qw,
         -qx, -qy, -qz;
    j_j.block<4, 3>(3, 3) = 0.5 * qj;

    // Node i: t_rel = R(dtheta)^T (t_rel - dt); q = q(dtheta)^-1 (x) q_al.
    j_i.block<3, 3>(0, 0) = -Eigen::Matrix3d::Identity();
    j_i.block<3, 3>(0, 3) = skew(res.t_rel);
    Eigen::Matrix<double, 4, 3> qi;
    qi << -qw, -qz, qy,
           qz, -qw, -qx,
          -qy, qx, -qw,
           qx, qy, qz;
    j_i.block<4, 3>(3, 3) = 0.5 * qi;
}

void check_connected(const PoseGraph& graph) {
    const size_t n = graph.nodes.size();
    if (n == 0) throw EstimationError("optimize: empty graph");
    std::vector<std::vector<int>> adjacency(n);
    for (const MotionEdge& e : graph.edges) {
        adjacency[e.i].push_back(e.j);
        adjacency[e.j].push_back(e.i);
    }
    std::vector<char> seen(n, 0);
    std::queue<int> frontier;
    frontier.push(graph.anchor);
    seen[graph.anchor] = 1;
    size_t count = 1;
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (int w : adjacency[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                frontier.push(w);
            }
        }
    }
    if (count != n)
        throw EstimationError("optimize: graph is disconnected (" +
                              std::to_string(n - count) +
                              " nodes unreachable from the anchor)");
}

void validate_edge_endpoints(const PoseGraph& graph) {
    const int n = int(graph.nodes.size());
    for (const MotionEdge& e : graph.edges) {
        if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n || e.i == e.j)
            throw ConfigError("pose graph edge " + std::to_string(e.i) +
                              "->" + std::to_string(e.j) +
                              " references a missing node");
    }
}

char* format17(char* buf, size_t size, double v) {
    std::snprintf(buf, size, "%.17g", v);
    return buf;
}

}  // namespace

void SigmaParams::validate() const {
    for (double s : {sigma_tx, sigma_ty, sigma_tz, sigma_alpha, sigma_beta,
                     sigma_gamma})
        if (!(s > 0.0) || !std::isfinite(s))
            throw ConfigError("SigmaParams: sigmas must be positive");
}

void HyperParams::validate() const {
    if (!(c_si > 0.0)) throw ConfigError("HyperParams: C_si must be positive");
    if (!(c_r > 0.0)) throw ConfigError("HyperParams: C_r must be positive");
    if (t_loop < 1) throw ConfigError("HyperParams: T_loop must be >= 1");
}

Matrix6d covariance_q(const SigmaParams& sigmas, const HyperParams& hp) {
    sigmas.validate();
    hp.validate();
    Matrix6d q = Matrix6d::Zero();
    q(0, 0) = hp.c_si * sigmas.sigma_tx * sigmas.sigma_tx;
    q(1, 1) = hp.c_si * sigmas.sigma_ty * sigmas.sigma_ty;
    q(2, 2) = hp.c_si * sigmas.sigma_tz * sigmas.sigma_tz;
    q(3, 3) = hp.c_si * hp.c_r * sigmas.sigma_alpha * sigmas.sigma_alpha;
    q(4, 4) = hp.c_si * hp.c_r * sigmas.sigma_beta * sigmas.sigma_beta;
    q(5, 5) = hp.c_si * hp.c_r * sigmas.sigma_gamma * sigmas.sigma_gamma;
    return q;
}

Matrix7d information_from_q(const Matrix6d& q, const Motion6DoF& linearization,
                            Eq3Inverse mode) {
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw ConfigError("information_from_q: Q is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix6d> qeig(q);
    if (qeig.eigenvalues().minCoeff() < -1e-9)
        throw ConfigError("information_from_q: Q is not PSD");

    Eigen::Matrix<double, 7, 6> j = Eigen::Matrix<double, 7, 6>::Zero();
    j.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity();
    j.block<4, 3>(3, 3) = quat_euler_jacobian(
        linearization.alpha, linearization.beta, linearization.gamma);

    const Matrix7d m = j * q * j.transpose();
    Matrix7d p;
    if (mode == Eq3Inverse::Ridge) {
        const Matrix7d ridged = m + 1e-10 * Matrix7d::Identity();
        p = ridged.ldlt().solve(Matrix7d::Identity());
    } else {
        // The product is rank <= 6; pseudo-inverse through the
        // eigendecomposition, truncating below 1e-12 of the largest value.
        Eigen::SelfAdjointEigenSolver<Matrix7d> eig(m);
        const auto& vals = eig.eigenvalues();
        const double cutoff = 1e-12 * vals.cwiseAbs().maxCoeff();
        Eigen::Matrix<double, 7, 1> inv = Eigen::Matrix<double, 7, 1>::Zero();
        for (int k = 0; k < 7; ++k)
            if (vals[k] > cutoff) inv[k] = 1.0 / vals[k];
        p = eig.eigenvectors() * inv.asDiagonal() *
            eig.eigenvectors().transpose();
    }
    return 0.5 * (p + p.transpose());
}

MotionEdge MotionEdge::make(int i, int j, const Motion6DoF& motion,
                            const Matrix7d& information, const Matrix6d& info6,
                            EdgeKind kind) {
    MotionEdge e;
    e.i = i;
    e.j = j;
    e.motion = motion;
    e.meas_quat = quat_from_euler(motion.alpha, motion.beta, motion.gamma);
    e.information = information;
    e.info6 = info6;
    e.kind = kind;
    return e;
}

PoseGraph build_graph(
    const std::vector<MotionEstimate>& odometry,
    const std::vector<std::pair<LoopCandidate, MotionEstimate>>& loops,
    const SigmaParams& sigmas, const HyperParams& hp,
    const BuildOptions& options) {
    const Matrix6d q_global = covariance_q(sigmas, hp);
    const Matrix6d info6_global = Matrix6d(
        q_global.diagonal().cwiseInverse().asDiagonal());

    PoseGraph graph;
    graph.anchor = 0;
    graph.nodes.push_back(SE3Pose::identity());
    for (const MotionEstimate& est : odometry)
        graph.nodes.push_back(
            compose(graph.nodes.back(), motion_to_se3(est.motion)));
    graph.node_quats.reserve(graph.nodes.size());
    for (const SE3Pose& node : graph.nodes)
        graph.node_quats.push_back(UnitQuaternion::from_matrix(node.rotation));

    auto edge_matrices = [&](const MotionEstimate& est)
        -> std::pair<Matrix7d, Matrix6d> {
        if (options.per_edge_covariance) {
            const Matrix6d q = 0.5 * (est.covariance +
                                      est.covariance.transpose());
            const Matrix6d info6 = q.ldlt().solve(Matrix6d::Identity());
            return {information_from_q(q, est.motion, options.inverse_mode),
                    0.5 * (info6 + info6.transpose())};
        }
        return {information_from_q(q_global, est.motion, options.inverse_mode),
                info6_global};
    };

    for (size_t k = 0; k < odometry.size(); ++k) {
        const auto [info7, info6] = edge_matrices(odometry[k]);
        graph.edges.push_back(MotionEdge::make(int(k), int(k + 1),
                                               odometry[k].motion, info7,
                                               info6, EdgeKind::Consecutive));
    }
    for (const auto& [candidate, est] : loops) {
        if (!candidate.passed) continue;
        if (candidate.i < 0 || candidate.j >= int64_t(graph.nodes.size()))
            throw ConfigError("build_graph: loop candidate " +
                              std::to_string(candidate.i) + "->" +
                              std::to_string(candidate.j) +
                              " references a missing node");
        const auto [info7, info6] = edge_matrices(est);
        graph.edges.push_back(MotionEdge::make(int(candidate.i),
                                               int(candidate.j), est.motion,
                                               info7, info6, EdgeKind::Loop));
    }
    return graph;
}

double graph_chi2(const PoseGraph& graph) {
    double chi2 = 0.0;
    for (const MotionEdge& e : graph.edges) {
        const EdgeResidual res =
            edge_residual(graph.nodes[e.i], graph.nodes[e.j], e);
        const double term = res.r.dot(e.information * res.r);
        if (!std::isfinite(term))
            throw EstimationError("non-finite residual on edge " +
                                  std::to_string(e.i) + "->" +
                                  std::to_string(e.j));
        chi2 += term;
    }
    return chi2;
}

OptimizeResult optimize(const PoseGraph& input, int max_iters, double tol) {
    validate_edge_endpoints(input);
    check_connected(input);
    if (int(input.nodes.size()) > kMaxDenseNodes)
        throw ConfigError(
            "optimize: dense solver is limited to 2000 nodes, got " +
            std::to_string(input.nodes.size()));

    PoseGraph graph = input;
    const int n = int(graph.nodes.size());
    // Parameter block index per node; the anchor stays fixed.
    std::vector<int> block(n, -1);
    int m = 0;
    for (int k = 0; k < n; ++k)
        if (k != graph.anchor) block[k] = m++;

    double chi2 = graph_chi2(graph);
    OptimizeResult result;
    result.chi2 = chi2;
    // Below this floor the residuals are pure double-precision rounding
    // (~1e-16 per component at unit information scale); a graph this
    // consistent is already at its optimum.
    const double noise_floor = 1e-24 * double(graph.edges.size());
    if (m == 0 || chi2 <= noise_floor) {
        result.graph = std::move(graph);
        return result;
    }

    Eigen::MatrixXd h(6 * m, 6 * m);
    Eigen::VectorXd g(6 * m);
    double lambda = 1e-4;
    int iterations = 0;

    for (int iter = 0; iter < max_iters; ++iter) {
        h.setZero();
        g.setZero();
        for (const MotionEdge& e : graph.edges) {
            const EdgeResidual res =
                edge_residual(graph.nodes[e.i], graph.nodes[e.j], e);
            Eigen::Matrix<double, 7, 6> j_i, j_j;
            edge_jacobians(res, j_i, j_j);
            const Vector7d pr = e.information * res.r;
            const int bi = block[e.i], bj = block[e.j];
            if (bi >= 0) {
                h.block<6, 6>(6 * bi, 6 * bi).noalias() +=
                    j_i.transpose() * e.information * j_i;
                g.segment<6>(6 * bi).noalias() += j_i.transpose() * pr;
            }
            if (bj >= 0) {
                h.block<6, 6>(6 * bj, 6 * bj).noalias() +=
                    j_j.transpose() * e.information * j_j;
                g.segment<6>(6 * bj).noalias() += j_j.transpose() * pr;
            }
            if (bi >= 0 && bj >= 0) {
                const Eigen::Matrix<double, 6, 6> hij =
                    j_i.transpose() * e.information * j_j;
                h.block<6, 6>(6 * bi, 6 * bj) += hij;
                h.block<6, 6>(6 * bj, 6 * bi) += hij.transpose();
            }
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd damped = h;
            damped.diagonal().array() += lambda;
            const Eigen::VectorXd delta = damped.llt().solve(-g);
            if (!delta.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            PoseGraph trial = graph;
            for (int k = 0; k < n; ++k) {
                if (block[k] < 0) continue;
                const auto d = delta.segment<6>(6 * block[k]);
                const SE3Pose inc = motion_to_se3(Motion6DoF::from_vector(d));
                SE3Pose node = compose(trial.nodes[k], inc);
                // Renormalize so rotation drift cannot accumulate over
                // iterations.
                const UnitQuaternion q =
                    UnitQuaternion::from_matrix(node.rotation);
                node.rotation = q.to_matrix();
                trial.nodes[k] = node;
                trial.node_quats[k] = q;
            }
            const double trial_chi2 = graph_chi2(trial);
            if (trial_chi2 < chi2) {
                graph = std::move(trial);
                const double drop = chi2 - trial_chi2;
                chi2 = trial_chi2;
                lambda = std::max(lambda * 0.1, 1e-15);
                accepted = true;
                ++iterations;
                if (drop <= tol * std::max(chi2, 1e-300)) iter = max_iters;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) break;
        }
        if (!accepted) break;  // stationary at this damping range
    }

    result.graph = std::move(graph);
    result.chi2 = chi2;
    result.iterations = iterations;
    return result;
}

void save_graph(const PoseGraph& graph, std::ostream& out) {
    char buf[64];
    const bool have_quats = graph.node_quats.size() == graph.nodes.size();
    for (size_t k = 0; k < graph.nodes.size(); ++k) {
        const SE3Pose& node = graph.nodes[k];
        const UnitQuaternion q =
            have_quats ? graph.node_quats[k]
                       : UnitQuaternion::from_matrix(node.rotation);
        out << "VERTEX_SE3:QUAT " << k;
        for (double v : {node.translation.x(), node.translation.y(),
                         node.translation.z(), q.x, q.y, q.z, q.w})
            out << " " << format17(buf, sizeof(buf), v);
        out << "\n";
    }
    out << "FIX " << graph.anchor << "\n";
    for (const MotionEdge& e : graph.edges) {
        out << "EDGE_SE3:QUAT " << e.i << " " << e.j;
        for (double v : {e.motion.t_x, e.motion.t_y, e.motion.t_z,
                         e.meas_quat.x, e.meas_quat.y, e.meas_quat.z,
                         e.meas_quat.w})
            out << " " << format17(buf, sizeof(buf), v);
        for (int r = 0; r < 6; ++r)
            for (int c = r; c < 6; ++c)
                out << " " << format17(buf, sizeof(buf), e.info6(r, c));
        out << "\n";
    }
}

void save_graph_file(const PoseGraph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_graph(graph, out);
    if (!out) throw IoError("write failed: " + path);
}

PoseGraph load_graph(std::istream& in, const std::string& name,
                     Eq3Inverse mode) {
    PoseGraph graph;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        const std::string where = name + ":" + std::to_string(lineno);
        if (tag == "VERTEX_SE3:QUAT") {
            int64_t id;
            double t[3], q[4];
            if (!(ss >> id >> t[0] >> t[1] >> t[2] >> q[0] >> q[1] >> q[2] >>
                  q[3]))
                throw IoError(where + ": malformed vertex");
            if (id != int64_t(graph.nodes.size()))
                throw IoError(where + ": vertex ids must be dense from 0");
            UnitQuaternion quat{q[3], q[0], q[1], q[2]};
            const double norm = quat.norm();
            if (!(std::abs(norm - 1.0) <= 1e-9))
                throw IoError(where + ": vertex quaternion not unit");
            SE3Pose pose;
            pose.rotation = quat.to_matrix();
            pose.translation = Eigen::Vector3d(t[0], t[1], t[2]);
            graph.nodes.push_back(pose);
            graph.node_quats.push_back(quat);
        } else if (tag == "EDGE_SE3:QUAT") {
            MotionEdge e;
            double t[3], q[4];
            if (!(ss >> e.i >> e.j >> t[0] >> t[1] >> t[2] >> q[0] >> q[1] >>
                  q[2] >> q[3]))
                throw IoError(where + ": malformed edge");
            for (int r = 0; r < 6; ++r)
                for (int c = r; c < 6; ++c) {
                    double v;
                    if (!(ss >> v))
                        throw IoError(where +
                                      ": edge needs 21 information entries");
                    e.info6(r, c) = v;
                    e.info6(c, r) = v;
                }
            e.meas_quat = UnitQuaternion{q[3], q[0], q[1], q[2]};
            if (!(std::abs(e.meas_quat.norm() - 1.0) <= 1e-9))
                throw IoError(where + ": edge quaternion not unit");
            double alpha, beta, gamma;
            euler_from_quat(e.meas_quat, alpha, beta, gamma);
            e.motion = Motion6DoF{t[0], t[1], t[2], alpha, beta, gamma};
            const Matrix6d q6 = e.info6.ldlt().solve(Matrix6d::Identity());
            e.information =
                information_from_q(0.5 * (q6 + q6.transpose()), e.motion, mode);
            e.kind = std::abs(e.j - e.i) == 1 ? EdgeKind::Consecutive
                                              : EdgeKind::Loop;
            graph.edges.push_back(e);
        } else if (tag == "FIX") {
            if (!(ss >> graph.anchor))
                throw IoError(where + ": malformed FIX line");
        } else {
            throw IoError(where + ": unknown record '" + tag + "'");
        }
    }
    validate_edge_endpoints(graph);
    return graph;
}

PoseGraph load_graph_file(const std::string& path, Eq3Inverse mode) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return load_graph(in, path, mode);
}

}  // namespace flowslam
