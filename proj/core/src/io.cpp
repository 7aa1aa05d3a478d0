#include "flowslam/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "flowslam/errors.hpp"

namespace flowslam {

namespace {

constexpr float kFloMagic = 202021.25f;
constexpr float kFloInvalid = 1e10f;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> parse_line_doubles(const std::string& line,
                                       const std::string& where) {
    std::istringstream ss(line);
    std::vector<double> fields;
    double v;
    while (ss >> v) fields.push_back(v);
    if (!ss.eof()) {
        std::string junk;
        ss.clear();
        ss >> junk;
        throw IoError(where + ": malformed number '" + junk + "'");
    }
    return fields;
}

// ---- libpng plumbing -------------------------------------------------------

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* file = nullptr;

    explicit PngReader(const std::string& path) {
        file = std::fopen(path.c_str(), "rb");
        if (!file) throw IoError("cannot open: " + path);
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                     nullptr);
        info = png ? png_create_info_struct(png) : nullptr;
        if (!info) {
            close();
            throw IoError("libpng init failed for " + path);
        }
    }
    ~PngReader() { close(); }
    void close() {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        if (file) std::fclose(file);
        png = nullptr;
        info = nullptr;
        file = nullptr;
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* file = nullptr;

    explicit PngWriter(const std::string& path) {
        file = std::fopen(path.c_str(), "wb");
        if (!file) throw IoError("cannot open for writing: " + path);
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                      nullptr);
        info = png ? png_create_info_struct(png) : nullptr;
        if (!info) {
            close();
            throw IoError("libpng init failed for " + path);
        }
    }
    ~PngWriter() { close(); }
    void close() {
        if (png) png_destroy_write_struct(&png, &info);
        if (file) std::fclose(file);
        png = nullptr;
        info = nullptr;
        file = nullptr;
    }
};

void read_gray_png(const std::string& path, int expected_bit_depth, int& width,
                   int& height, std::vector<uint16_t>& raw) {
    PngReader r(path);
    if (setjmp(png_jmpbuf(r.png)))
        throw IoError("png decode failed: " + path);
    png_init_io(r.png, r.file);
    png_read_info(r.png, r.info);

    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);
    if (color_type != PNG_COLOR_TYPE_GRAY)
        throw IoError(path + ": expected single-channel grayscale PNG");
    if (bit_depth != expected_bit_depth)
        throw IoError(path + ": expected " +
                      std::to_string(expected_bit_depth) + "-bit PNG, got " +
                      std::to_string(bit_depth) + "-bit");
    width = int(png_get_image_width(r.png, r.info));
    height = int(png_get_image_height(r.png, r.info));
    if (bit_depth == 16) png_set_swap(r.png);  // PNG stores big-endian
    png_read_update_info(r.png, r.info);

    raw.assign(size_t(width) * height, 0);
    std::vector<png_bytep> rows(height);
    if (bit_depth == 16) {
        for (int y = 0; y < height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(&raw[size_t(y) * width]);
        png_read_image(r.png, rows.data());
        png_read_end(r.png, nullptr);
    } else {
        std::vector<uint8_t> bytes(size_t(width) * height);
        for (int y = 0; y < height; ++y) rows[y] = &bytes[size_t(y) * width];
        png_read_image(r.png, rows.data());
        png_read_end(r.png, nullptr);
        for (size_t i = 0; i < bytes.size(); ++i) raw[i] = bytes[i];
    }
}

void write_gray_png(const std::string& path, int bit_depth, int width,
                    int height, const std::vector<uint16_t>& raw) {
    PngWriter w(path);
    if (setjmp(png_jmpbuf(w.png)))
        throw IoError("png encode failed: " + path);
    png_init_io(w.png, w.file);
    png_set_IHDR(w.png, w.info, width, height, bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    if (bit_depth == 16) {
        png_set_swap(w.png);
        std::vector<png_bytep> rows(height);
        for (int y = 0; y < height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(
                const_cast<uint16_t*>(&raw[size_t(y) * width]));
        png_write_image(w.png, rows.data());
    } else {
        std::vector<uint8_t> bytes(size_t(width) * height);
        for (size_t i = 0; i < bytes.size(); ++i)
            bytes[i] = uint8_t(raw[i] & 0xff);
        std::vector<png_bytep> rows(height);
        for (int y = 0; y < height; ++y) rows[y] = &bytes[size_t(y) * width];
        png_write_image(w.png, rows.data());
    }
    png_write_end(w.png, nullptr);
}

}  // namespace

// ---------------------------------------------------------------------------

Trajectory read_kitti_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    Trajectory traj;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const std::vector<double> f = parse_line_doubles(line, where);
        if (f.size() != 12)
            throw IoError(where + ": expected 12 fields, got " +
                          std::to_string(f.size()));
        for (double v : f)
            if (!std::isfinite(v))
                throw IoError(where + ": non-finite pose entry");
        SE3Pose pose;
        pose.rotation << f[0], f[1], f[2], f[4], f[5], f[6], f[8], f[9], f[10];
        pose.translation << f[3], f[7], f[11];
        traj.entries.push_back(
            TrajectoryEntry{int64_t(traj.entries.size()), 0.0, pose});
    }
    return traj;
}

void write_kitti_poses(const Trajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const TrajectoryEntry& e : trajectory.entries) {
        const Eigen::Matrix3d& r = e.pose.rotation;
        const Eigen::Vector3d& t = e.pose.translation;
        out << fmt17(r(0, 0)) << " " << fmt17(r(0, 1)) << " " << fmt17(r(0, 2))
            << " " << fmt17(t.x()) << " " << fmt17(r(1, 0)) << " "
            << fmt17(r(1, 1)) << " " << fmt17(r(1, 2)) << " " << fmt17(t.y())
            << " " << fmt17(r(2, 0)) << " " << fmt17(r(2, 1)) << " "
            << fmt17(r(2, 2)) << " " << fmt17(t.z()) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------

FlowField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    float magic = 0.f;
    int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    if (!in || magic != kFloMagic) throw IoError(path + ": bad .flo magic");
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || w <= 0 || h <= 0)
        throw IoError(path + ": bad .flo dimensions");

    FlowField flow(w, h);
    std::vector<float> data(size_t(w) * h * 2);
    in.read(reinterpret_cast<char*>(data.data()),
            std::streamsize(data.size() * 4));
    if (size_t(in.gcount()) != data.size() * 4)
        throw IoError(path + ": truncated .flo payload");
    for (size_t i = 0; i < size_t(w) * h; ++i) {
        const float u = data[2 * i], v = data[2 * i + 1];
        if (!std::isfinite(u) || !std::isfinite(v) || std::abs(u) > 1e9f ||
            std::abs(v) > 1e9f)
            continue;  // invalid pixel, mask stays 0
        flow.u[i] = u;
        flow.v[i] = v;
        flow.valid[i] = 1;
    }
    return flow;
}

void write_flo(const FlowField& flow, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const int32_t w = flow.width, h = flow.height;
    out.write(reinterpret_cast<const char*>(&kFloMagic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    std::vector<float> data(size_t(w) * h * 2);
    for (size_t i = 0; i < size_t(w) * h; ++i) {
        if (flow.valid[i]) {
            data[2 * i] = float(flow.u[i]);
            data[2 * i + 1] = float(flow.v[i]);
        } else {
            data[2 * i] = kFloInvalid;
            data[2 * i + 1] = kFloInvalid;
        }
    }
    out.write(reinterpret_cast<const char*>(data.data()),
              std::streamsize(data.size() * 4));
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------

DepthMap read_depth_png16(const std::string& path, double scale) {
    if (!(scale > 0.0)) throw ConfigError("read_depth_png16: bad scale");
    int w = 0, h = 0;
    std::vector<uint16_t> raw;
    read_gray_png(path, 16, w, h, raw);
    DepthMap depth(w, h);
    for (size_t i = 0; i < raw.size(); ++i)
        if (raw[i] != 0) depth.values[i] = double(raw[i]) / scale;
    return depth;
}

void write_depth_png16(const DepthMap& depth, const std::string& path,
                       double scale) {
    if (!(scale > 0.0)) throw ConfigError("write_depth_png16: bad scale");
    std::vector<uint16_t> raw(depth.pixel_count(), 0);
    for (size_t i = 0; i < raw.size(); ++i) {
        const double z = depth.values[i];
        if (!is_valid_depth(z)) continue;
        const double scaled = std::round(z * scale);
        raw[i] = uint16_t(std::min(65535.0, std::max(1.0, scaled)));
    }
    write_gray_png(path, 16, depth.width, depth.height, raw);
}

ImageF read_image_png8(const std::string& path) {
    int w = 0, h = 0;
    std::vector<uint16_t> raw;
    read_gray_png(path, 8, w, h, raw);
    ImageF image(w, h);
    for (size_t i = 0; i < raw.size(); ++i)
        image.values[i] = float(raw[i]) / 255.f;
    return image;
}

void write_image_png8(const ImageF& image, const std::string& path) {
    std::vector<uint16_t> raw(image.values.size(), 0);
    for (size_t i = 0; i < raw.size(); ++i) {
        const float v = std::min(1.f, std::max(0.f, image.values[i]));
        raw[i] = uint16_t(std::lround(v * 255.f));
    }
    write_gray_png(path, 8, image.width, image.height, raw);
}

// ---------------------------------------------------------------------------

Trajectory read_tum_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    Trajectory traj;
    traj.has_timestamps = true;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const std::vector<double> f = parse_line_doubles(line, where);
        if (f.size() != 8)
            throw IoError(where + ": expected 8 fields, got " +
                          std::to_string(f.size()));
        if (!traj.entries.empty() && f[0] <= traj.entries.back().timestamp)
            throw IoError(where + ": timestamps must be strictly increasing");
        UnitQuaternion q{f[7], f[4], f[5], f[6]};
        const double norm = q.norm();
        if (!(norm > 0.0)) throw IoError(where + ": zero quaternion");
        if (std::abs(norm - 1.0) > 1e-6)
            std::cerr << "warning: " << where
                      << ": quaternion norm deviates by "
                      << std::abs(norm - 1.0) << ", normalizing\n";
        // Renormalizing an already-unit quaternion would perturb the last
        // bit and break file round-trip stability.
        const UnitQuaternion unit =
            std::abs(norm - 1.0) > 1e-12 ? q.normalized() : q;
        SE3Pose pose;
        pose.rotation = unit.to_matrix();
        pose.translation = Eigen::Vector3d(f[1], f[2], f[3]);
        traj.entries.push_back(TrajectoryEntry{int64_t(traj.entries.size()),
                                               f[0], pose, unit});
    }
    return traj;
}

void write_tum_trajectory(const Trajectory& trajectory,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const TrajectoryEntry& e : trajectory.entries) {
        const double time =
            trajectory.has_timestamps ? e.timestamp : double(e.frame_id);
        const UnitQuaternion q =
            e.rotation_q ? *e.rotation_q
                         : UnitQuaternion::from_matrix(e.pose.rotation);
        out << fmt17(time) << " " << fmt17(e.pose.translation.x()) << " "
            << fmt17(e.pose.translation.y()) << " "
            << fmt17(e.pose.translation.z()) << " " << fmt17(q.x) << " "
            << fmt17(q.y) << " " << fmt17(q.z) << " " << fmt17(q.w) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------

namespace {

struct ConfigEntry {
    const char* section;
    const char* key;
    std::function<void(const std::string&, const std::string&)> set;
};

template <typename T>
T parse_value(const std::string& raw, const std::string& where);

template <>
double parse_value<double>(const std::string& raw, const std::string& where) {
    try {
        size_t used = 0;
        const double v = std::stod(raw, &used);
        while (used < raw.size() && std::isspace(uint8_t(raw[used]))) ++used;
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected a number, got '" + raw + "'");
    }
}

template <>
int parse_value<int>(const std::string& raw, const std::string& where) {
    try {
        size_t used = 0;
        const int v = std::stoi(raw, &used);
        while (used < raw.size() && std::isspace(uint8_t(raw[used]))) ++used;
        if (used != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected an integer, got '" + raw + "'");
    }
}

template <>
bool parse_value<bool>(const std::string& raw, const std::string& where) {
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    throw ConfigError(where + ": expected true/false, got '" + raw + "'");
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(uint8_t(s[a]))) ++a;
    while (b > a && std::isspace(uint8_t(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

void RunConfig::validate() const {
    camera.validate();
    sigmas.validate();
    hyper.validate();
    estimator.validate();
    loop_estimator.validate();
    if (reloc.n_th < 1) throw ConfigError("config: N_th must be >= 1");
    if (!(reloc.ratio > 0.0 && reloc.ratio <= 1.0))
        throw ConfigError("config: ratio must be in (0, 1]");
    if (reloc.top_k < 1) throw ConfigError("config: top_k must be >= 1");
    if (vocab_size < 2) throw ConfigError("config: vocab_size must be >= 2");
    if (!(corner_threshold > 0.0))
        throw ConfigError("config: corner_threshold must be positive");
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.camera.f_x = 160.0;
    cfg.camera.f_y = 160.0;
    cfg.camera.c_x = 159.5;
    cfg.camera.c_y = 119.5;
    cfg.camera.baseline = 0.5;
    cfg.camera.width = 320;
    cfg.camera.height = 240;
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);

    RunConfig cfg = default_config();

    auto dbl = [](double& field) {
        return [&field](const std::string& raw, const std::string& where) {
            field = parse_value<double>(raw, where);
        };
    };
    auto integer = [](int& field) {
        return [&field](const std::string& raw, const std::string& where) {
            field = parse_value<int>(raw, where);
        };
    };
    auto boolean = [](bool& field) {
        return [&field](const std::string& raw, const std::string& where) {
            field = parse_value<bool>(raw, where);
        };
    };

    const std::vector<ConfigEntry> entries = {
        {"camera", "fx", dbl(cfg.camera.f_x)},
        {"camera", "fy", dbl(cfg.camera.f_y)},
        {"camera", "cx", dbl(cfg.camera.c_x)},
        {"camera", "cy", dbl(cfg.camera.c_y)},
        {"camera", "baseline",
         [&cfg](const std::string& raw, const std::string& where) {
             cfg.camera.baseline = parse_value<double>(raw, where);
         }},
        {"camera", "width", integer(cfg.camera.width)},
        {"camera", "height", integer(cfg.camera.height)},
        {"sigmas", "sigma_tx", dbl(cfg.sigmas.sigma_tx)},
        {"sigmas", "sigma_ty", dbl(cfg.sigmas.sigma_ty)},
        {"sigmas", "sigma_tz", dbl(cfg.sigmas.sigma_tz)},
        {"sigmas", "sigma_alpha", dbl(cfg.sigmas.sigma_alpha)},
        {"sigmas", "sigma_beta", dbl(cfg.sigmas.sigma_beta)},
        {"sigmas", "sigma_gamma", dbl(cfg.sigmas.sigma_gamma)},
        {"slam", "C_si", dbl(cfg.hyper.c_si)},
        {"slam", "C_r", dbl(cfg.hyper.c_r)},
        {"slam", "T_loop", integer(cfg.hyper.t_loop)},
        {"slam", "per_edge_covariance", boolean(cfg.per_edge_covariance)},
        {"reloc", "N_th", integer(cfg.reloc.n_th)},
        {"reloc", "ratio", dbl(cfg.reloc.ratio)},
        {"reloc", "top_k", integer(cfg.reloc.top_k)},
        {"reloc", "vocab_size", integer(cfg.vocab_size)},
        {"reloc", "corner_threshold", dbl(cfg.corner_threshold)},
        {"estimator", "max_iterations", integer(cfg.estimator.max_iterations)},
        {"estimator", "tolerance", dbl(cfg.estimator.tolerance)},
        {"estimator", "huber_scale", dbl(cfg.estimator.huber_scale)},
        {"estimator", "stride", integer(cfg.estimator.stride)},
        {"loop_estimator", "max_iterations",
         integer(cfg.loop_estimator.max_iterations)},
        {"loop_estimator", "tolerance", dbl(cfg.loop_estimator.tolerance)},
        {"loop_estimator", "huber_scale", dbl(cfg.loop_estimator.huber_scale)},
        {"loop_estimator", "stride", integer(cfg.loop_estimator.stride)},
    };

    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const ConfigEntry& e : entries)
                if (section == e.section) known = true;
            if (!known)
                throw ConfigError(where + ": unknown section '" + section +
                                  "'");
            continue;
        }

        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        const ConfigEntry* match = nullptr;
        if (!section.empty()) {
            for (const ConfigEntry& e : entries)
                if (section == e.section && key == e.key) match = &e;
            if (!match)
                throw ConfigError(where + ": unknown key '" + key +
                                  "' in section [" + section + "]");
        } else {
            // Keys before any section header are accepted when unique
            // across all sections.
            int hits = 0;
            for (const ConfigEntry& e : entries)
                if (key == e.key) {
                    match = &e;
                    ++hits;
                }
            if (hits == 0)
                throw ConfigError(where + ": unknown key '" + key + "'");
            if (hits > 1)
                throw ConfigError(where + ": key '" + key +
                                  "' is ambiguous without a section header");
        }
        match->set(value, where);
    }

    // Loop estimator gap threshold mirrors [slam] T_loop.
    cfg.reloc.t_loop = cfg.hyper.t_loop;
    cfg.validate();
    return cfg;
}

}  // namespace flowslam
