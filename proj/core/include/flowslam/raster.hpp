#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace flowslam {

/// Dense per-pixel depth in meters, row-major; NaN marks invalid pixels.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;  ///< width*height, NaN = invalid

    DepthMap() = default;
    DepthMap(int w, int h)
        : width(w),
          height(h),
          values(size_t(w) * h, std::numeric_limits<double>::quiet_NaN()) {}

    double at(int x, int y) const { return values[size_t(y) * width + x]; }
    double& at(int x, int y) { return values[size_t(y) * width + x]; }
    size_t pixel_count() const { return values.size(); }
    size_t valid_count() const {
        size_t n = 0;
        for (double z : values)
            if (std::isfinite(z)) ++n;
        return n;
    }
};

/// Dense 2D displacement field in pixels with a validity mask.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> u;  ///< horizontal displacement
    std::vector<double> v;  ///< vertical displacement
    std::vector<uint8_t> valid;

    FlowField() = default;
    FlowField(int w, int h)
        : width(w),
          height(h),
          u(size_t(w) * h, 0.0),
          v(size_t(w) * h, 0.0),
          valid(size_t(w) * h, 0) {}

    size_t index(int x, int y) const { return size_t(y) * width + x; }
    size_t valid_count() const {
        size_t n = 0;
        for (uint8_t f : valid) n += f;
        return n;
    }
};

/// Grayscale raster, values in [0, 1].
struct ImageF {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    ImageF() = default;
    ImageF(int w, int h) : width(w), height(h), values(size_t(w) * h, 0.f) {}

    float at(int x, int y) const { return values[size_t(y) * width + x]; }
    float& at(int x, int y) { return values[size_t(y) * width + x]; }
};

}  // namespace flowslam
