#include "flowslam/vo.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowslam/errors.hpp"

namespace flowslam {

namespace {

struct PixelSample {
    Eigen::Vector3d point;  // backprojected source point
    double u, v;            // source pixel
    double flow_u, flow_v;  // observed flow
};

struct Residual {
    Eigen::Vector2d r;
    Eigen::Matrix<double, 2, 6> jacobian;
    bool usable = false;
};

Residual evaluate_pixel(const PixelSample& s, const SE3Pose& t,
                        const Eigen::Matrix3d& dR_da,
                        const Eigen::Matrix3d& dR_db,
                        const Eigen::Matrix3d& dR_dg, const Intrinsics& intr,
                        bool with_jacobian) {
    Residual out;
    const Eigen::Vector3d p = t.apply(s.point);
    if (!(p.z() > kMinProjectableDepth)) return out;
    const double iz = 1.0 / p.z();
    const double synth_u = intr.f_x * p.x() * iz + intr.c_x - s.u;
    const double synth_v = intr.f_y * p.y() * iz + intr.c_y - s.v;
    out.r << synth_u - s.flow_u, synth_v - s.flow_v;
    out.usable = true;
    if (!with_jacobian) return out;

    Eigen::Matrix<double, 2, 3> proj;
    proj << intr.f_x * iz, 0, -intr.f_x * p.x() * iz * iz,
            0, intr.f_y * iz, -intr.f_y * p.y() * iz * iz;
    Eigen::Matrix<double, 3, 6> dp;
    dp.leftCols<3>() = Eigen::Matrix3d::Identity();
    dp.col(3) = dR_da * s.point;
    dp.col(4) = dR_db * s.point;
    dp.col(5) = dR_dg * s.point;
    out.jacobian = proj * dp;
    return out;
}

double huber_cost(double e, double delta) {
    return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

double huber_weight(double e, double delta) {
    return e <= delta ? 1.0 : delta / e;
}

double total_cost(const std::vector<PixelSample>& samples,
                  const Motion6DoF& motion, const Intrinsics& intr,
                  double delta) {
    const SE3Pose t = motion_to_se3(motion);
    Eigen::Matrix3d z = Eigen::Matrix3d::Zero();
    double cost = 0.0;
    for (const PixelSample& s : samples) {
        const Residual res = evaluate_pixel(s, t, z, z, z, intr, false);
        // Pixels pushed behind the camera by the trial motion contribute
        // a saturated cost so such steps are not preferred.
        cost += res.usable ? huber_cost(res.r.norm(), delta)
                           : huber_cost(1e6, delta);
    }
    return cost;
}

}  // namespace

void EstimatorConfig::validate() const {
    if (max_iterations < 1)
        throw ConfigError("EstimatorConfig: max_iterations must be >= 1");
    if (!(tolerance > 0.0))
        throw ConfigError("EstimatorConfig: tolerance must be positive");
    if (!(huber_scale > 0.0))
        throw ConfigError("EstimatorConfig: huber_scale must be positive");
    if (stride < 1) throw ConfigError("EstimatorConfig: stride must be >= 1");
}

void EstimatorPolicy::validate() const {
    consecutive_config.validate();
    loop_config.validate();
    if (t_loop < 1) throw ConfigError("EstimatorPolicy: t_loop must be >= 1");
}

EstimatorKind select_estimator(const EstimatorPolicy& policy, int frame_gap) {
    if (frame_gap < 1)
        throw ConfigError("select_estimator: frame_gap must be >= 1");
    return frame_gap > policy.t_loop ? EstimatorKind::Loop
                                     : EstimatorKind::Consecutive;
}

MotionEstimate estimate_motion(const FlowField& flow, const DepthMap& depth,
                               const Intrinsics& intr,
                               const EstimatorConfig& cfg) {
    cfg.validate();
    if (flow.width != depth.width || flow.height != depth.height)
        throw ConfigError("estimate_motion: flow/depth dimensions differ");

    std::vector<PixelSample> samples;
    samples.reserve(size_t(flow.width / cfg.stride + 1) *
                    (flow.height / cfg.stride + 1));
    for (int y = 0; y < flow.height; y += cfg.stride) {
        for (int x = 0; x < flow.width; x += cfg.stride) {
            const size_t i = flow.index(x, y);
            const double z = depth.at(x, y);
            if (!flow.valid[i] || !is_valid_depth(z)) continue;
            samples.push_back(PixelSample{backproject(x, y, z, intr),
                                          double(x), double(y), flow.u[i],
                                          flow.v[i]});
        }
    }
    if (samples.size() < 100)
        throw EstimationError(
            "estimate_motion: fewer than 100 jointly valid pixels (" +
            std::to_string(samples.size()) + ")");

    const double delta = cfg.huber_scale;
    Motion6DoF motion;  // zero init
    double cost = total_cost(samples, motion, intr, delta);
    double lambda = 1e-4;
    bool converged = false;

    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        const SE3Pose t = motion_to_se3(motion);
        Eigen::Matrix3d da, db, dg;
        euler_rotation_derivatives(motion.alpha, motion.beta, motion.gamma, da,
                                   db, dg);
        h.setZero();
        Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
        for (const PixelSample& s : samples) {
            const Residual res = evaluate_pixel(s, t, da, db, dg, intr, true);
            if (!res.usable) continue;
            const double w = huber_weight(res.r.norm(), delta);
            h.noalias() += w * res.jacobian.transpose() * res.jacobian;
            g.noalias() += w * res.jacobian.transpose() * res.r;
        }
        if (!g.allFinite())
            throw EstimationError("estimate_motion: non-finite gradient");

        bool accepted = false;
        for (int attempt = 0; attempt < 20; ++attempt) {
            Eigen::Matrix<double, 6, 6> damped = h;
            damped.diagonal().array() += lambda;
            const Eigen::Matrix<double, 6, 1> step =
                damped.ldlt().solve(-g);
            const Motion6DoF trial = Motion6DoF::from_vector(
                motion.to_vector() + step);
            const double trial_cost = total_cost(samples, trial, intr, delta);
            if (trial_cost < cost) {
                motion = trial;
                cost = trial_cost;
                lambda = std::max(lambda * 0.1, 1e-12);
                accepted = true;
                if (step.norm() <= cfg.tolerance) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // No descent direction at this damping range: stationary.
            converged = true;
        }
        if (converged) break;
    }

    // Covariance, inlier fraction and residual statistics at the final
    // iterate.
    MotionEstimate est;
    est.motion = motion;
    est.converged = converged;
    const SE3Pose t = motion_to_se3(motion);
    Eigen::Matrix3d da, db, dg;
    euler_rotation_derivatives(motion.alpha, motion.beta, motion.gamma, da, db,
                               dg);
    h.setZero();
    double weighted_sq = 0.0, sq = 0.0;
    size_t used = 0, inliers = 0;
    for (const PixelSample& s : samples) {
        const Residual res = evaluate_pixel(s, t, da, db, dg, intr, true);
        if (!res.usable) continue;
        const double e = res.r.norm();
        const double w = huber_weight(e, delta);
        h.noalias() += w * res.jacobian.transpose() * res.jacobian;
        weighted_sq += w * res.r.squaredNorm();
        sq += res.r.squaredNorm();
        if (e <= delta) ++inliers;
        ++used;
    }
    if (used == 0)
        throw EstimationError("estimate_motion: all pixels left the frustum");
    est.inlier_fraction = double(inliers) / double(used);
    est.residual_rms = std::sqrt(sq / double(used));
    const double dof = std::max(1.0, 2.0 * double(used) - 6.0);
    const double sigma2 = weighted_sq / dof;
    const Eigen::Matrix<double, 6, 6> hinv =
        h.ldlt().solve(Eigen::Matrix<double, 6, 6>::Identity());
    est.covariance = sigma2 * 0.5 * (hinv + hinv.transpose());
    return est;
}

MotionEstimate estimate_motion_3d3d(const std::vector<Eigen::Vector3d>& src,
                                    const std::vector<Eigen::Vector3d>& dst,
                                    double huber_scale_m) {
    if (src.size() != dst.size())
        throw ConfigError("estimate_motion_3d3d: size mismatch");
    if (src.size() < 4)
        throw EstimationError("estimate_motion_3d3d: need >= 4 point pairs");

    const size_t n = src.size();
    std::vector<double> w(n, 1.0);
    SE3Pose t;
    // Horn's closed form under current weights, re-weighted by Huber on
    // the point residual norm. A handful of sweeps is enough.
    for (int sweep = 0; sweep < 10; ++sweep) {
        double wsum = 0.0;
        Eigen::Vector3d cs = Eigen::Vector3d::Zero(),
                        cd = Eigen::Vector3d::Zero();
        for (size_t i = 0; i < n; ++i) {
            wsum += w[i];
            cs += w[i] * src[i];
            cd += w[i] * dst[i];
        }
        cs /= wsum;
        cd /= wsum;
        Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
        for (size_t i = 0; i < n; ++i)
            cross += w[i] * (src[i] - cs) * (dst[i] - cd).transpose();
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(
            cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
        if (r.determinant() < 0) {
            Eigen::Matrix3d v = svd.matrixV();
            v.col(2) *= -1.0;
            r = v * svd.matrixU().transpose();
        }
        t.rotation = r;
        t.translation = cd - r * cs;
        for (size_t i = 0; i < n; ++i)
            w[i] = huber_weight((dst[i] - t.apply(src[i])).norm(),
                                huber_scale_m);
    }

    MotionEstimate est;
    est.motion = se3_to_motion(t);
    est.converged = true;
    // Gauss-Newton covariance of the 6 parameters at the optimum.
    Eigen::Matrix3d da, db, dg;
    euler_rotation_derivatives(est.motion.alpha, est.motion.beta,
                               est.motion.gamma, da, db, dg);
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    double weighted_sq = 0.0;
    size_t inliers = 0;
    for (size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d r = t.apply(src[i]) - dst[i];
        const double e = r.norm();
        const double wi = huber_weight(e, huber_scale_m);
        Eigen::Matrix<double, 3, 6> j;
        j.leftCols<3>() = Eigen::Matrix3d::Identity();
        j.col(3) = da * src[i];
        j.col(4) = db * src[i];
        j.col(5) = dg * src[i];
        h.noalias() += wi * j.transpose() * j;
        weighted_sq += wi * r.squaredNorm();
        if (e <= huber_scale_m) ++inliers;
    }
    est.inlier_fraction = double(inliers) / double(n);
    double sq = 0.0;
    for (size_t i = 0; i < n; ++i)
        sq += (t.apply(src[i]) - dst[i]).squaredNorm();
    est.residual_rms = std::sqrt(sq / double(n));
    const double dof = std::max(1.0, 3.0 * double(n) - 6.0);
    const Eigen::Matrix<double, 6, 6> hinv =
        h.ldlt().solve(Eigen::Matrix<double, 6, 6>::Identity());
    est.covariance = (weighted_sq / dof) * 0.5 * (hinv + hinv.transpose());
    return est;
}

std::vector<MotionRecord> load_external_motions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<MotionRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::vector<double> fields;
        double v;
        while (ss >> v) fields.push_back(v);
        if (!ss.eof()) {
            std::string junk;
            ss.clear();
            ss >> junk;
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": malformed number '" + junk + "'");
        }
        if (fields.empty()) continue;
        if (fields.size() != 8 && fields.size() != 29)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected 8 or 29 fields, got " +
                          std::to_string(fields.size()));
        MotionRecord rec;
        rec.frame_i = int64_t(fields[0]);
        rec.frame_j = int64_t(fields[1]);
        rec.motion = Motion6DoF{fields[2], fields[3], fields[4],
                                fields[5], fields[6], fields[7]};
        if (fields.size() == 29) {
            Eigen::Matrix<double, 6, 6> cov;
            size_t k = 8;
            for (int r = 0; r < 6; ++r)
                for (int c = r; c < 6; ++c) {
                    cov(r, c) = fields[k];
                    cov(c, r) = fields[k];
                    ++k;
                }
            rec.covariance = cov;
        }
        records.push_back(rec);
    }
    return records;
}

void save_external_motions(const std::vector<MotionRecord>& records,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# i j tx ty tz alpha beta gamma [21 upper-triangle covariance]\n";
    char buf[64];
    for (const MotionRecord& rec : records) {
        out << rec.frame_i << " " << rec.frame_j;
        const auto v = rec.motion.to_vector();
        for (int k = 0; k < 6; ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", v[k]);
            out << " " << buf;
        }
        if (rec.covariance) {
            for (int r = 0; r < 6; ++r)
                for (int c = r; c < 6; ++c) {
                    std::snprintf(buf, sizeof(buf), "%.17g",
                                  (*rec.covariance)(r, c));
                    out << " " << buf;
                }
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace flowslam
