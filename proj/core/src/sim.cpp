#include "flowslam/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "flowslam/errors.hpp"
#include "flowslam/flowsynth.hpp"
#include "flowslam/io.hpp"
#include "flowslam/util.hpp"

namespace flowslam {

namespace {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

// ---- deterministic texture -------------------------------------------------

uint64_t lattice_hash(int64_t x, int64_t y, int64_t z, uint64_t seed) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    h ^= uint64_t(x) * 0xff51afd7ed558ccdull;
    h = (h ^ (h >> 33)) * 0xc4ceb9fe1a85ec53ull;
    h ^= uint64_t(y) * 0x94d049bb133111ebull;
    h = (h ^ (h >> 29)) * 0xbf58476d1ce4e5b9ull;
    h ^= uint64_t(z) * 0xd6e8feb86659fd93ull;
    h ^= h >> 32;
    return h;
}

double lattice_value(int64_t x, int64_t y, int64_t z, uint64_t seed) {
    return double(lattice_hash(x, y, z, seed) >> 11) * (1.0 / 9007199254740992.0);
}

double value_noise(const Eigen::Vector3d& p, uint64_t seed) {
    const double fx = std::floor(p.x()), fy = std::floor(p.y()),
                 fz = std::floor(p.z());
    const int64_t ix = int64_t(fx), iy = int64_t(fy), iz = int64_t(fz);
    const double tx = p.x() - fx, ty = p.y() - fy, tz = p.z() - fz;
    double c[2][2][2];
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                c[dz][dy][dx] =
                    lattice_value(ix + dx, iy + dy, iz + dz, seed);
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    const double x00 = lerp(c[0][0][0], c[0][0][1], tx);
    const double x01 = lerp(c[0][1][0], c[0][1][1], tx);
    const double x10 = lerp(c[1][0][0], c[1][0][1], tx);
    const double x11 = lerp(c[1][1][0], c[1][1][1], tx);
    const double y0 = lerp(x00, x01, ty);
    const double y1 = lerp(x10, x11, ty);
    return lerp(y0, y1, tz);
}

double texture_value(const Eigen::Vector3d& p, uint64_t seed) {
    // Five octaves; base frequency tuned so the per-pixel footprint at
    // typical viewing distances carries visible structure.
    double sum = 0.0, amp = 1.0, total = 0.0;
    double freq = 0.7;
    for (int octave = 0; octave < 5; ++octave) {
        sum += amp * value_noise(p * freq, seed + octave);
        total += amp;
        amp *= 0.55;
        freq *= 2.1;
    }
    return sum / total;
}

// ---- analytic intersections (parametrized by camera-z depth) ---------------

// Ray o + t*d with d the world direction of a unit-z camera ray, so the
// parameter t equals the camera-frame depth.
double hit_plane_y(double plane_y, const Eigen::Vector3d& o,
                   const Eigen::Vector3d& d) {
    if (std::abs(d.y()) < 1e-12) return kNoHit;
    const double t = (plane_y - o.y()) / d.y();
    return t > kMinProjectableDepth ? t : kNoHit;
}

double hit_box(const Scene::Box& box, const Eigen::Vector3d& o,
               const Eigen::Vector3d& d) {
    double tmin = -kNoHit, tmax = kNoHit;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (o[a] < box.min[a] || o[a] > box.max[a]) return kNoHit;
            continue;
        }
        double t0 = (box.min[a] - o[a]) / d[a];
        double t1 = (box.max[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
    }
    if (tmin > tmax) return kNoHit;
    return tmin > kMinProjectableDepth ? tmin : kNoHit;
}

double hit_sphere(const Scene::Sphere& sphere, const Eigen::Vector3d& o,
                  const Eigen::Vector3d& d) {
    const Eigen::Vector3d oc = o - sphere.center;
    const double a = d.squaredNorm();
    const double b = 2.0 * d.dot(oc);
    const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
    const double disc = b * b - 4 * a * c;
    if (disc < 0.0) return kNoHit;
    const double t = (-b - std::sqrt(disc)) / (2 * a);
    return t > kMinProjectableDepth ? t : kNoHit;
}

double nearest_hit(const Scene& scene, const Eigen::Vector3d& o,
                   const Eigen::Vector3d& d) {
    double best = hit_plane_y(scene.ground_y, o, d);
    for (const Scene::Box& box : scene.boxes)
        best = std::min(best, hit_box(box, o, d));
    for (const Scene::Sphere& s : scene.spheres)
        best = std::min(best, hit_sphere(s, o, d));
    return best;
}

// ---- trajectory ------------------------------------------------------------

double segment_yaw(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
    const Eigen::Vector3d d = to - from;
    return std::atan2(d.x(), d.z());
}

double blend_angles(double a, double b, double t) {
    return normalize_angle(a + normalize_angle(b - a) * t);
}

double point_segment_distance(const Eigen::Vector3d& p,
                              const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b) {
    const Eigen::Vector3d ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::min(1.0, std::max(0.0, (p - a).dot(ab) / len2));
    return (p - (a + t * ab)).norm();
}

}  // namespace

void TrajectorySpec::validate() const {
    if (waypoints.size() < 2)
        throw ConfigError("TrajectorySpec: need at least 2 waypoints");
    if ((waypoints.front() - waypoints.back()).norm() > 0.0)
        throw ConfigError(
            "TrajectorySpec: loop must be closed (first waypoint == last)");
    if (poses_per_segment < 1)
        throw ConfigError("TrajectorySpec: poses_per_segment must be >= 1");
    const size_t poses =
        (waypoints.size() - 1) * size_t(poses_per_segment) + 1;
    if (poses < 10)
        throw ConfigError("TrajectorySpec: fewer than 10 poses");
    noise.validate();
}

TrajectorySpec default_spec() {
    TrajectorySpec spec;
    spec.waypoints = {{0, 0, 0}, {20, 0, 0}, {20, 0, 20}, {0, 0, 20},
                      {0, 0, 0}};
    spec.poses_per_segment = 125;  // 4 segments -> 501 poses
    spec.seed = 1;
    return spec;
}

Scene make_scene(const SceneParams& params, const TrajectorySpec& spec) {
    spec.validate();
    Scene scene;
    scene.ground_y = params.ground_y;
    scene.texture_seed = params.seed;

    Eigen::Vector3d lo = spec.waypoints.front(), hi = spec.waypoints.front();
    for (const Eigen::Vector3d& w : spec.waypoints) {
        lo = lo.cwiseMin(w);
        hi = hi.cwiseMax(w);
    }
    const double margin = 12.0;

    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> ux(lo.x() - margin,
                                              hi.x() + margin);
    std::uniform_real_distribution<double> uz(lo.z() - margin,
                                              hi.z() + margin);
    std::uniform_real_distribution<double> size(0.4, 2.2);
    std::uniform_real_distribution<double> tall(0.5, 2.5);
    std::uniform_real_distribution<double> srad(0.08, 0.22);
    std::uniform_real_distribution<double> sy(-1.0, 0.8);

    auto clear_of_path = [&](const Eigen::Vector3d& p, double extra) {
        for (size_t s = 0; s + 1 < spec.waypoints.size(); ++s)
            if (point_segment_distance(p, spec.waypoints[s],
                                       spec.waypoints[s + 1]) <
                params.clearance + extra)
                return false;
        return true;
    };

    int placed = 0, attempts = 0;
    while (placed < params.boxes && attempts < params.boxes * 200) {
        ++attempts;
        const double half = 0.5 * size(rng);
        const Eigen::Vector3d center(ux(rng), 0.0, uz(rng));
        if (!clear_of_path(center, half * 1.7321)) continue;
        const double height = tall(rng);
        Scene::Box box;
        box.min = Eigen::Vector3d(center.x() - half,
                                  params.ground_y - height, center.z() - half);
        box.max =
            Eigen::Vector3d(center.x() + half, params.ground_y, center.z() + half);
        scene.boxes.push_back(box);
        ++placed;
    }
    placed = 0;
    attempts = 0;
    while (placed < params.spheres && attempts < params.spheres * 200) {
        ++attempts;
        const double r = srad(rng);
        const Eigen::Vector3d center(ux(rng), sy(rng), uz(rng));
        if (!clear_of_path(center, r)) continue;
        scene.spheres.push_back(Scene::Sphere{center, r});
        ++placed;
    }
    return scene;
}

DepthMap render_depth(const Scene& scene, const SE3Pose& pose,
                      const Intrinsics& intr) {
    DepthMap depth(intr.width, intr.height);
    const Eigen::Vector3d o = pose.translation;
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const Eigen::Vector3d ray_cam((x - intr.c_x) / intr.f_x,
                                          (y - intr.c_y) / intr.f_y, 1.0);
            const double t = nearest_hit(scene, o, pose.rotation * ray_cam);
            if (t != kNoHit) depth.at(x, y) = t;
        }
    }
    return depth;
}

ImageF render_image(const Scene& scene, const SE3Pose& pose,
                    const Intrinsics& intr) {
    ImageF image(intr.width, intr.height);
    const Eigen::Vector3d o = pose.translation;
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const Eigen::Vector3d ray_cam((x - intr.c_x) / intr.f_x,
                                          (y - intr.c_y) / intr.f_y, 1.0);
            const Eigen::Vector3d d = pose.rotation * ray_cam;
            const double t = nearest_hit(scene, o, d);
            if (t == kNoHit) continue;
            image.at(x, y) = float(texture_value(o + t * d, scene.texture_seed));
        }
    }
    return image;
}

RunData generate_run(const TrajectorySpec& spec, const Scene& scene,
                     const Intrinsics& intr, bool render, int threads) {
    spec.validate();
    intr.validate();

    const size_t segments = spec.waypoints.size() - 1;
    std::vector<double> seg_yaw(segments);
    for (size_t s = 0; s < segments; ++s)
        seg_yaw[s] = segment_yaw(spec.waypoints[s], spec.waypoints[s + 1]);

    // Heading follows the segment direction, easing into the next
    // segment's direction over the final blend fraction (and out of the
    // previous one at the start), so a closed loop starts and ends with
    // identical poses.
    const double blend = 0.3;
    auto yaw_at = [&](size_t seg, double frac) {
        const double base = seg_yaw[seg];
        if (frac < blend) {
            const double prev = seg_yaw[(seg + segments - 1) % segments];
            const double mid = blend_angles(prev, base, 0.5);
            return blend_angles(mid, base, frac / blend);
        }
        if (frac > 1.0 - blend) {
            const double next = seg_yaw[(seg + 1) % segments];
            const double mid = blend_angles(base, next, 0.5);
            return blend_angles(base, mid, (frac - (1.0 - blend)) / blend);
        }
        return base;
    };

    RunData run;
    const size_t n = segments * size_t(spec.poses_per_segment) + 1;
    run.ground_truth.entries.reserve(n);
    run.ground_truth.has_timestamps = true;
    for (size_t k = 0; k < n; ++k) {
        const size_t seg = std::min(segments - 1, k / spec.poses_per_segment);
        const double frac =
            double(k - seg * spec.poses_per_segment) / spec.poses_per_segment;
        const Eigen::Vector3d position =
            spec.waypoints[seg] +
            frac * (spec.waypoints[seg + 1] - spec.waypoints[seg]);
        SE3Pose pose;
        pose.rotation =
            motion_to_se3(Motion6DoF{0, 0, 0, 0, yaw_at(seg, frac), 0})
                .rotation;
        pose.translation = position;
        run.ground_truth.entries.push_back(
            TrajectoryEntry{int64_t(k), 0.1 * double(k), pose});
    }

    run.camera_motions.reserve(n - 1);
    for (size_t k = 0; k + 1 < n; ++k) {
        const SE3Pose& a = run.ground_truth.entries[k].pose;
        const SE3Pose& b = run.ground_truth.entries[k + 1].pose;
        run.camera_motions.push_back(se3_to_motion(compose(inverse(a), b)));
    }

    if (render) {
        run.depths.resize(n);
        run.images.resize(n);
        parallel_for(n, threads, [&](size_t k) {
            const SE3Pose& pose = run.ground_truth.entries[k].pose;
            run.depths[k] = render_depth(scene, pose, intr);
            run.images[k] = render_image(scene, pose, intr);
        });
        run.flows.resize(n - 1);
        parallel_for(n - 1, threads, [&](size_t k) {
            // Flow for pair (k, k+1) uses the point-transform convention:
            // the inverse of the camera displacement.
            run.flows[k] = synthesize_flow(
                run.depths[k], inverse_motion(run.camera_motions[k]), intr);
        });
    }
    return run;
}

void write_run(const RunData& run, const Intrinsics& intr,
               const TrajectorySpec& spec, const std::string& dir,
               int threads) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "depth", ec);
    fs::create_directories(fs::path(dir) / "image", ec);
    fs::create_directories(fs::path(dir) / "flow", ec);
    if (ec) throw IoError("cannot create run directory: " + dir);

    auto name = [&](const char* sub, const char* prefix, size_t k,
                    const char* ext) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%06zu.%s", prefix, k, ext);
        return (fs::path(dir) / sub / buf).string();
    };

    const size_t n = run.ground_truth.size();
    parallel_for(n, threads, [&](size_t k) {
        write_depth_png16(run.depths[k], name("depth", "depth", k, "png"));
        write_image_png8(run.images[k], name("image", "image", k, "png"));
    });
    parallel_for(run.flows.size(), threads, [&](size_t k) {
        write_flo(run.flows[k], name("flow", "flow", k, "flo"));
    });

    write_kitti_poses(run.ground_truth, (fs::path(dir) / "gt_poses.txt").string());
    write_tum_trajectory(run.ground_truth,
                         (fs::path(dir) / "gt_tum.txt").string());

    std::vector<MotionRecord> records;
    records.reserve(run.camera_motions.size());
    for (size_t k = 0; k < run.camera_motions.size(); ++k)
        records.push_back(MotionRecord{int64_t(k), int64_t(k + 1),
                                       run.camera_motions[k], {}});
    save_external_motions(records, (fs::path(dir) / "gt_motions.txt").string());

    {
        std::ofstream cam((fs::path(dir) / "camera.cfg").string());
        if (!cam) throw IoError("cannot write camera.cfg in " + dir);
        char buf[64];
        auto put = [&](const char* key, double v) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            cam << key << " = " << buf << "\n";
        };
        cam << "[camera]\n";
        put("fx", intr.f_x);
        put("fy", intr.f_y);
        put("cx", intr.c_x);
        put("cy", intr.c_y);
        if (intr.baseline) put("baseline", *intr.baseline);
        cam << "width = " << intr.width << "\n";
        cam << "height = " << intr.height << "\n";
    }
    {
        std::ofstream man((fs::path(dir) / "manifest.txt").string());
        if (!man) throw IoError("cannot write manifest.txt in " + dir);
        man << "frames = " << n << "\n";
        man << "width = " << intr.width << "\n";
        man << "height = " << intr.height << "\n";
        man << "seed = " << spec.seed << "\n";
        man << "poses_per_segment = " << spec.poses_per_segment << "\n";
        man << "waypoints = ";
        for (size_t w = 0; w < spec.waypoints.size(); ++w) {
            const Eigen::Vector3d& p = spec.waypoints[w];
            man << p.x() << "," << p.y() << "," << p.z();
            if (w + 1 < spec.waypoints.size()) man << "; ";
        }
        man << "\n";
    }
}

SimSpec load_sim_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);

    SimSpec spec;
    spec.trajectory = default_spec();

    std::string section, line;
    int lineno = 0;
    auto bad = [&](const std::string& msg) {
        return ConfigError(path + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            size_t a = 0, b = s.size();
            while (a < b && std::isspace(uint8_t(s[a]))) ++a;
            while (b > a && std::isspace(uint8_t(s[b - 1]))) --b;
            return s.substr(a, b - a);
        };
        line = strip(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw bad("malformed section header");
            section = strip(line.substr(1, line.size() - 2));
            if (section != "trajectory" && section != "noise" &&
                section != "scene")
                throw bad("unknown section '" + section + "'");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw bad("expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        auto as_double = [&]() {
            try {
                size_t used = 0;
                const double v = std::stod(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::exception&) {
                throw bad("expected a number for '" + key + "'");
            }
        };
        auto as_int = [&]() {
            try {
                size_t used = 0;
                const long v = std::stol(value, &used);
                if (used != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::exception&) {
                throw bad("expected an integer for '" + key + "'");
            }
        };

        if (section == "trajectory" || section.empty()) {
            if (key == "waypoints") {
                std::vector<Eigen::Vector3d> pts;
                std::istringstream ss(value);
                std::string triple;
                while (std::getline(ss, triple, ';')) {
                    std::istringstream ts(strip(triple));
                    double x, y, z;
                    char c1, c2;
                    if (!(ts >> x >> c1 >> y >> c2 >> z) || c1 != ',' ||
                        c2 != ',')
                        throw bad("waypoints must be 'x,y,z; x,y,z; ...'");
                    pts.emplace_back(x, y, z);
                }
                spec.trajectory.waypoints = pts;
                continue;
            }
            if (key == "poses_per_segment") {
                spec.trajectory.poses_per_segment = int(as_int());
                continue;
            }
            if (key == "seed") {
                spec.trajectory.seed = uint64_t(as_int());
                continue;
            }
        }
        if (section == "noise" || section.empty()) {
            SigmaParams& s = spec.trajectory.noise;
            if (key == "sigma_tx") { s.sigma_tx = as_double(); continue; }
            if (key == "sigma_ty") { s.sigma_ty = as_double(); continue; }
            if (key == "sigma_tz") { s.sigma_tz = as_double(); continue; }
            if (key == "sigma_alpha") { s.sigma_alpha = as_double(); continue; }
            if (key == "sigma_beta") { s.sigma_beta = as_double(); continue; }
            if (key == "sigma_gamma") { s.sigma_gamma = as_double(); continue; }
        }
        if (section == "scene" || section.empty()) {
            if (key == "boxes") { spec.scene.boxes = int(as_int()); continue; }
            if (key == "spheres") {
                spec.scene.spheres = int(as_int());
                continue;
            }
            if (key == "ground_y") {
                spec.scene.ground_y = as_double();
                continue;
            }
            if (key == "clearance") {
                spec.scene.clearance = as_double();
                continue;
            }
            if (key == "scene_seed" || (key == "seed" && section == "scene")) {
                spec.scene.seed = uint64_t(as_int());
                continue;
            }
        }
        throw bad("unknown key '" + key + "'");
    }
    spec.trajectory.validate();
    return spec;
}

}  // namespace flowslam
