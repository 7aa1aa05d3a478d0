#include "flowslam/camera.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flowslam/errors.hpp"

using namespace flowslam;

namespace {

Intrinsics make_intr() {
    Intrinsics intr;
    intr.f_x = 100.0;
    intr.f_y = 100.0;
    intr.c_x = 160.0;
    intr.c_y = 120.0;
    intr.baseline = 0.5;
    intr.width = 320;
    intr.height = 240;
    return intr;
}

}  // namespace

TEST(Camera, DepthFromDisparityDirect) {
    const Intrinsics intr = make_intr();
    EXPECT_DOUBLE_EQ(depth_from_disparity(10.0, intr), 5.0);
}

TEST(Camera, ZeroDisparityIsInvalid) {
    const Intrinsics intr = make_intr();
    EXPECT_FALSE(is_valid_depth(depth_from_disparity(0.0, intr)));
    EXPECT_FALSE(is_valid_depth(depth_from_disparity(-3.0, intr)));
    EXPECT_FALSE(is_valid_depth(
        depth_from_disparity(std::numeric_limits<double>::quiet_NaN(), intr)));
}

TEST(Camera, MissingBaselineIsConfigError) {
    Intrinsics intr = make_intr();
    intr.baseline.reset();
    EXPECT_THROW(depth_from_disparity(10.0, intr), ConfigError);
}

TEST(Camera, DisparityDepthRoundTrip) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> f(50.0, 1000.0);
    std::uniform_real_distribution<double> b(0.05, 1.0);
    std::uniform_real_distribution<double> z(0.1, 1e4);
    for (int i = 0; i < 10000; ++i) {
        Intrinsics intr = make_intr();
        intr.f_x = f(rng);
        intr.baseline = b(rng);
        const double depth = z(rng);
        const double d = intr.f_x * (*intr.baseline) / depth;
        const double back = depth_from_disparity(d, intr);
        EXPECT_NEAR(back, depth, 1e-12 * depth);
    }
}

TEST(Camera, DepthStrictlyDecreasingInDisparity) {
    const Intrinsics intr = make_intr();
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 0.5; d < 200.0; d += 0.5) {
        const double z = depth_from_disparity(d, intr);
        EXPECT_LT(z, prev);
        prev = z;
    }
}

TEST(Camera, BackprojectOpticalAxis) {
    const Intrinsics intr = make_intr();
    const Eigen::Vector3d p = backproject(intr.c_x, intr.c_y, 7.5, intr);
    EXPECT_DOUBLE_EQ(p.x(), 0.0);
    EXPECT_DOUBLE_EQ(p.y(), 0.0);
    EXPECT_DOUBLE_EQ(p.z(), 7.5);
}

TEST(Camera, BackprojectNormalizedCamera) {
    Intrinsics intr;
    intr.f_x = intr.f_y = 1.0;
    intr.c_x = intr.c_y = 0.0;
    intr.width = intr.height = 100;
    const Eigen::Vector3d p = backproject(3.0, 4.0, 1.0, intr);
    EXPECT_DOUBLE_EQ(p.x(), 3.0);
    EXPECT_DOUBLE_EQ(p.y(), 4.0);
    EXPECT_DOUBLE_EQ(p.z(), 1.0);
}

TEST(Camera, BackprojectRejectsNonpositiveDepth) {
    const Intrinsics intr = make_intr();
    EXPECT_THROW(backproject(10, 10, 0.0, intr), ConfigError);
    EXPECT_THROW(backproject(10, 10, -1.0, intr), ConfigError);
    EXPECT_THROW(
        backproject(10, 10, std::numeric_limits<double>::infinity(), intr),
        ConfigError);
}

TEST(Camera, ProjectPrincipalRay) {
    const Intrinsics intr = make_intr();
    const Projection p = project(Eigen::Vector3d(0, 0, 5), intr);
    EXPECT_FALSE(p.behind_camera);
    EXPECT_TRUE(p.in_bounds);
    EXPECT_DOUBLE_EQ(p.u, intr.c_x);
    EXPECT_DOUBLE_EQ(p.v, intr.c_y);
}

TEST(Camera, ProjectBehindCameraMarker) {
    const Intrinsics intr = make_intr();
    const Projection p = project(Eigen::Vector3d(0.3, -0.1, -1.0), intr);
    EXPECT_TRUE(p.behind_camera);
    EXPECT_FALSE(p.in_bounds);
    // Exactly at the epsilon plane also counts as behind.
    EXPECT_TRUE(project(Eigen::Vector3d(0, 0, 1e-6), intr).behind_camera);
}

TEST(Camera, ProjectBackprojectRoundTripOnGrid) {
    const Intrinsics intr = make_intr();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> zdist(0.1, 1e4);
    for (int y = 0; y < intr.height; y += 7) {
        for (int x = 0; x < intr.width; x += 7) {
            const double z = zdist(rng);
            const Projection p = project(backproject(x, y, z, intr), intr);
            // Border pixels may round to -1e-16 and land out of bounds
            // under the strict 0 <= u rule; the value is what matters.
            if (x > 0 && y > 0) EXPECT_TRUE(p.in_bounds);
            EXPECT_NEAR(p.u, x, 1e-9);
            EXPECT_NEAR(p.v, y, 1e-9);
        }
    }
}

TEST(Camera, BackprojectProjectRandomFrustum) {
    const Intrinsics intr = make_intr();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, intr.width - 1e-9);
    std::uniform_real_distribution<double> v(0.0, intr.height - 1e-9);
    std::uniform_real_distribution<double> z(0.1, 1e4);
    for (int i = 0; i < 10000; ++i) {
        const double uu = u(rng), vv = v(rng), zz = z(rng);
        const Projection p = project(backproject(uu, vv, zz, intr), intr);
        EXPECT_NEAR(p.u, uu, 1e-9 * std::max(1.0, uu));
        EXPECT_NEAR(p.v, vv, 1e-9 * std::max(1.0, vv));
    }
}

TEST(Camera, IntrinsicsValidation) {
    Intrinsics intr = make_intr();
    EXPECT_NO_THROW(intr.validate());
    intr.f_x = -1;
    EXPECT_THROW(intr.validate(), ConfigError);
    intr = make_intr();
    intr.c_x = 320;
    EXPECT_THROW(intr.validate(), ConfigError);
    intr = make_intr();
    intr.baseline = 0.0;
    EXPECT_THROW(intr.validate(), ConfigError);
}
