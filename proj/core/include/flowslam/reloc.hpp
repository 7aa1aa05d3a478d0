#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowslam/raster.hpp"

namespace flowslam {

/// 256-bit binary descriptor (intensity comparisons on a fixed pattern).
using Descriptor = std::array<uint64_t, 4>;

int hamming_distance(const Descriptor& a, const Descriptor& b);

struct Keypoint {
    int x = 0;
    int y = 0;
    float response = 0.f;
};

struct Feature {
    Keypoint keypoint;
    Descriptor descriptor{};
};

struct FeatureParams {
    double corner_threshold = 1e-4;  ///< absolute Harris response
    int max_features = 500;          ///< strongest kept, deterministic order
};

/// Harris corners (3x3 local maxima above corner_threshold) described by
/// 256 pairwise intensity comparisons on a smoothed patch. Deterministic.
/// Throws ConfigError for images smaller than 64x64.
std::vector<Feature> extract_features(const ImageF& image,
                                      const FeatureParams& params = {});

struct Vocabulary {
    std::vector<Descriptor> centroids;  ///< k distinct entries
    int size() const { return int(centroids.size()); }
};

/// k-medians under Hamming distance (bitwise-majority centroid update),
/// seeded initialization, at most 100 sweeps. Needs at least k distinct
/// descriptors.
Vocabulary build_vocabulary(const std::vector<Descriptor>& descriptors, int k,
                            uint64_t seed);

/// Binary vocabulary file: magic, k, bit width, then centroid bits.
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

/// L1-normalized term-frequency histogram over vocabulary words.
struct BoVWHistogram {
    int64_t frame_id = 0;
    std::vector<double> tf;
    bool empty = true;  ///< no features: all-zero histogram, flagged
};

BoVWHistogram compute_histogram(const std::vector<Feature>& features,
                                const Vocabulary& vocab, int64_t frame_id);

struct FrameDatabase {
    std::vector<BoVWHistogram> frames;
};

/// Top-k frame ids by L1 histogram distance, ties broken by lower id.
/// Frames within suppress_radius indices of the probe id are excluded.
std::vector<int64_t> query(const FrameDatabase& db, const BoVWHistogram& probe,
                           int top_k = 20, int64_t suppress_radius = 0);

/// Ratio-test matches: index pairs (into a and b) where the nearest
/// neighbor in b beats the second nearest by d1 < ratio * d2.
std::vector<std::pair<int, int>> match_features(
    const std::vector<Feature>& a, const std::vector<Feature>& b,
    double ratio = 0.7);

struct LoopCandidate {
    int64_t i = 0;  ///< always < j
    int64_t j = 0;
    int matches = 0;
    bool passed = false;
};

/// Ratio-test verification of a retrieved pair; passed iff the accepted
/// match count reaches n_th.
LoopCandidate verify(const std::vector<Feature>& features_i,
                     const std::vector<Feature>& features_j, int64_t frame_i,
                     int64_t frame_j, double ratio, int n_th);

struct RelocParams {
    int top_k = 20;
    int t_loop = 50;  ///< retrieval gap threshold, also suppression radius
    int n_th = 20;
    double ratio = 0.7;
};

/// Full loop-closure sweep: per frame, retrieve top-k candidates with
/// index gap > t_loop, verify each, return the passed candidates as
/// (i, j) pairs sorted ascending, deduplicated. Deterministic.
std::vector<LoopCandidate> detect_loops(
    const std::vector<std::vector<Feature>>& frames, const Vocabulary& vocab,
    const RelocParams& params = {});

}  // namespace flowslam
