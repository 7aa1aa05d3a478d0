#include "flowslam/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

#include "flowslam/errors.hpp"

namespace flowslam {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

void check_paired(const Trajectory& gt, const Trajectory& est) {
    if (gt.size() != est.size())
        throw ConfigError("trajectory length mismatch: " +
                          std::to_string(gt.size()) + " vs " +
                          std::to_string(est.size()));
    if (gt.size() == 0) throw ConfigError("empty trajectory");
    for (size_t i = 0; i < gt.size(); ++i)
        if (gt.entries[i].frame_id != est.entries[i].frame_id)
            throw ConfigError("frame id mismatch at index " +
                              std::to_string(i));
}

double rotation_angle(const Eigen::Matrix3d& r) {
    // atan2 of the skew norm against (trace-1)/2 stays accurate near the
    // identity where acos loses half the significant digits.
    const Eigen::Vector3d v(0.5 * (r(2, 1) - r(1, 2)),
                            0.5 * (r(0, 2) - r(2, 0)),
                            0.5 * (r(1, 0) - r(0, 1)));
    return std::atan2(v.norm(), (r.trace() - 1.0) / 2.0);
}

SE3Pose relative(const SE3Pose& a, const SE3Pose& b) {
    return compose(inverse(a), b);
}

}  // namespace

void Trajectory::validate() const {
    for (size_t i = 1; i < entries.size(); ++i)
        if (entries[i].frame_id <= entries[i - 1].frame_id)
            throw ConfigError(
                "trajectory frame ids must be strictly increasing");
}

double ate(const Trajectory& gt, const Trajectory& est, Alignment align) {
    check_paired(gt, est);
    const size_t n = gt.size();

    SE3Pose correction = SE3Pose::identity();
    if (align == Alignment::Rigid && n >= 2) {
        Eigen::MatrixXd src(3, n), dst(3, n);
        for (size_t i = 0; i < n; ++i) {
            src.col(i) = est.entries[i].pose.translation;
            dst.col(i) = gt.entries[i].pose.translation;
        }
        const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
        correction.rotation = t.topLeftCorner<3, 3>();
        correction.translation = t.topRightCorner<3, 1>();
    }

    double sum_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d aligned =
            correction.apply(est.entries[i].pose.translation);
        sum_sq += (gt.entries[i].pose.translation - aligned).squaredNorm();
    }
    return std::sqrt(sum_sq / double(n));
}

RpeResult rpe(const Trajectory& gt, const Trajectory& est, int delta) {
    check_paired(gt, est);
    if (delta < 1) throw ConfigError("rpe: delta must be >= 1");
    if (gt.size() <= size_t(delta))
        throw ConfigError("rpe: trajectory shorter than delta");

    double trans_sq = 0.0, rot_sq = 0.0;
    const size_t pairs = gt.size() - delta;
    for (size_t i = 0; i < pairs; ++i) {
        const SE3Pose gt_rel =
            relative(gt.entries[i].pose, gt.entries[i + delta].pose);
        const SE3Pose est_rel =
            relative(est.entries[i].pose, est.entries[i + delta].pose);
        const SE3Pose err = compose(inverse(gt_rel), est_rel);
        trans_sq += err.translation.squaredNorm();
        const double angle_deg = rotation_angle(err.rotation) * kRadToDeg;
        rot_sq += angle_deg * angle_deg;
    }
    return RpeResult{std::sqrt(trans_sq / double(pairs)),
                     std::sqrt(rot_sq / double(pairs))};
}

KittiErrors kitti_errors(const Trajectory& gt, const Trajectory& est) {
    check_paired(gt, est);
    const size_t n = gt.size();

    // Cumulative ground-truth path length per frame.
    std::vector<double> dist(n, 0.0);
    for (size_t i = 1; i < n; ++i)
        dist[i] = dist[i - 1] + (gt.entries[i].pose.translation -
                                 gt.entries[i - 1].pose.translation)
                                    .norm();
    if (dist.empty() || dist.back() < 100.0)
        throw ConfigError("kitti_errors: ground-truth path shorter than 100 m");

    double t_sum = 0.0, r_sum = 0.0;
    size_t count = 0;
    for (size_t start = 0; start < n; ++start) {
        size_t j = start;
        for (int len = 100; len <= 800; len += 100) {
            const double target = dist[start] + len;
            // First frame whose cumulative length reaches the target;
            // subsequences running past the trajectory are skipped.
            while (j < n && dist[j] < target) ++j;
            if (j >= n) break;
            const SE3Pose gt_rel =
                relative(gt.entries[start].pose, gt.entries[j].pose);
            const SE3Pose est_rel =
                relative(est.entries[start].pose, est.entries[j].pose);
            const SE3Pose err = compose(inverse(gt_rel), est_rel);
            t_sum += err.translation.norm() / double(len) * 100.0;
            r_sum += rotation_angle(err.rotation) * kRadToDeg /
                     double(len) * 100.0;
            ++count;
        }
    }
    if (count == 0)
        throw ConfigError("kitti_errors: no complete subsequence found");
    return KittiErrors{t_sum / double(count), r_sum / double(count)};
}

}  // namespace flowslam
