#include "flowslam/reloc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "flowslam/errors.hpp"

namespace flowslam {

namespace {

constexpr int kPatchRadius = 13;
constexpr int kBorder = 16;
constexpr uint32_t kVocabMagic = 0x42565346u;  // "FSVB" little-endian
constexpr int kDescriptorBits = 256;

// Fixed comparison pattern: 256 point pairs inside the patch, generated
// once from a pinned seed so descriptors are stable across runs and
// platforms.
struct Pattern {
    std::array<std::array<int8_t, 4>, kDescriptorBits> pairs;
    Pattern() {
        std::mt19937 rng(0x51ab5eedu);
        std::uniform_int_distribution<int> coord(-kPatchRadius, kPatchRadius);
        for (auto& p : pairs) {
            do {
                p = {int8_t(coord(rng)), int8_t(coord(rng)),
                     int8_t(coord(rng)), int8_t(coord(rng))};
            } while (p[0] == p[2] && p[1] == p[3]);
        }
    }
};

const Pattern& pattern() {
    static const Pattern p;
    return p;
}

// 3x3 binomial smoothing, applied twice before descriptor sampling.
ImageF smooth(const ImageF& src) {
    ImageF tmp(src.width, src.height), out(src.width, src.height);
    auto clampx = [&](int x) { return std::min(src.width - 1, std::max(0, x)); };
    auto clampy = [&](int y) {
        return std::min(src.height - 1, std::max(0, y));
    };
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            tmp.at(x, y) = 0.25f * (src.at(clampx(x - 1), y) +
                                    2.f * src.at(x, y) +
                                    src.at(clampx(x + 1), y));
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            out.at(x, y) = 0.25f * (tmp.at(x, clampy(y - 1)) +
                                    2.f * tmp.at(x, y) +
                                    tmp.at(x, clampy(y + 1)));
    return out;
}

}  // namespace

int hamming_distance(const Descriptor& a, const Descriptor& b) {
    int d = 0;
    for (int k = 0; k < 4; ++k) d += std::popcount(a[k] ^ b[k]);
    return d;
}

std::vector<Feature> extract_features(const ImageF& image,
                                      const FeatureParams& params) {
    if (image.width < 64 || image.height < 64)
        throw ConfigError("extract_features: image smaller than 64x64");
    const int w = image.width, h = image.height;

    // Central-difference gradients.
    std::vector<float> gx(size_t(w) * h, 0.f), gy(size_t(w) * h, 0.f);
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            const size_t i = size_t(y) * w + x;
            gx[i] = 0.5f * (image.at(x + 1, y) - image.at(x - 1, y));
            gy[i] = 0.5f * (image.at(x, y + 1) - image.at(x, y - 1));
        }

    // Harris response with a 5x5 binomially weighted structure tensor.
    // Box weights would plateau across step edges and bias the local
    // maximum away from the true corner.
    static const float kW[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16,
                                1.f / 16};
    std::vector<float> response(size_t(w) * h, 0.f);
    for (int y = kBorder; y < h - kBorder; ++y) {
        for (int x = kBorder; x < w - kBorder; ++x) {
            float sxx = 0.f, syy = 0.f, sxy = 0.f;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const size_t i = size_t(y + dy) * w + (x + dx);
                    const float wgt = kW[dy + 2] * kW[dx + 2];
                    sxx += wgt * gx[i] * gx[i];
                    syy += wgt * gy[i] * gy[i];
                    sxy += wgt * gx[i] * gy[i];
                }
            const float det = sxx * syy - sxy * sxy;
            const float tr = sxx + syy;
            response[size_t(y) * w + x] = det - 0.04f * tr * tr;
        }
    }

    // 3x3 local maxima above threshold; exact ties resolved by scan
    // order so plateaus yield one keypoint.
    std::vector<Feature> features;
    const ImageF smoothed = smooth(image);
    const auto& pat = pattern().pairs;
    for (int y = kBorder; y < h - kBorder; ++y) {
        for (int x = kBorder; x < w - kBorder; ++x) {
            const size_t i = size_t(y) * w + x;
            const float r = response[i];
            if (!(r > params.corner_threshold)) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const size_t ni = size_t(y + dy) * w + (x + dx);
                    if (response[ni] > r ||
                        (response[ni] == r && ni < i)) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;
            Feature f;
            f.keypoint = Keypoint{x, y, r};
            for (int bit = 0; bit < kDescriptorBits; ++bit) {
                const auto& p = pat[bit];
                const float a = smoothed.at(x + p[0], y + p[1]);
                const float b = smoothed.at(x + p[2], y + p[3]);
                if (a < b) f.descriptor[bit >> 6] |= uint64_t(1) << (bit & 63);
            }
            features.push_back(f);
        }
    }

    if (int(features.size()) > params.max_features) {
        std::stable_sort(features.begin(), features.end(),
                         [](const Feature& a, const Feature& b) {
                             return a.keypoint.response > b.keypoint.response;
                         });
        features.resize(params.max_features);
        std::stable_sort(features.begin(), features.end(),
                         [](const Feature& a, const Feature& b) {
                             return a.keypoint.y != b.keypoint.y
                                        ? a.keypoint.y < b.keypoint.y
                                        : a.keypoint.x < b.keypoint.x;
                         });
    }
    return features;
}

Vocabulary build_vocabulary(const std::vector<Descriptor>& descriptors, int k,
                            uint64_t seed) {
    if (k < 2) throw ConfigError("build_vocabulary: k must be >= 2");
    if (int(descriptors.size()) < k)
        throw ConfigError("build_vocabulary: need at least k descriptors");

    // Seeded init on distinct descriptors.
    std::vector<size_t> order(descriptors.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Descriptor> centroids;
    for (size_t idx : order) {
        const Descriptor& d = descriptors[idx];
        if (std::find(centroids.begin(), centroids.end(), d) ==
            centroids.end())
            centroids.push_back(d);
        if (int(centroids.size()) == k) break;
    }
    if (int(centroids.size()) < k)
        throw ConfigError(
            "build_vocabulary: fewer than k distinct descriptors");

    std::vector<int> assignment(descriptors.size(), -1);
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool changed = false;
        for (size_t i = 0; i < descriptors.size(); ++i) {
            int best = 0, best_d = std::numeric_limits<int>::max();
            for (int c = 0; c < k; ++c) {
                const int d = hamming_distance(descriptors[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assignment[i] != best) {
                assignment[i] = best;
                changed = true;
            }
        }
        if (!changed) break;

        // Bitwise-majority medoid update (the Hamming 1-median for
        // binary vectors); ties keep the current centroid's bit.
        for (int c = 0; c < k; ++c) {
            std::array<int, kDescriptorBits> ones{};
            int members = 0;
            for (size_t i = 0; i < descriptors.size(); ++i) {
                if (assignment[i] != c) continue;
                ++members;
                for (int bit = 0; bit < kDescriptorBits; ++bit)
                    if (descriptors[i][bit >> 6] & (uint64_t(1) << (bit & 63)))
                        ++ones[bit];
            }
            if (members == 0) {
                // Re-seed an empty cluster with the descriptor farthest
                // from its own centroid (deterministic scan).
                int far_d = -1;
                size_t far_i = 0;
                for (size_t i = 0; i < descriptors.size(); ++i) {
                    const int d = hamming_distance(
                        descriptors[i], centroids[assignment[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far_i = i;
                    }
                }
                centroids[c] = descriptors[far_i];
                assignment[far_i] = c;
                continue;
            }
            Descriptor next{};
            for (int bit = 0; bit < kDescriptorBits; ++bit) {
                const int zeros = members - ones[bit];
                bool set;
                if (ones[bit] > zeros)
                    set = true;
                else if (ones[bit] < zeros)
                    set = false;
                else
                    set = (centroids[c][bit >> 6] >> (bit & 63)) & 1;
                if (set) next[bit >> 6] |= uint64_t(1) << (bit & 63);
            }
            centroids[c] = next;
        }
    }

    // Distinctness invariant: collapse-resistant nudge for exact
    // duplicates (rare; deterministic).
    for (int c = 1; c < k; ++c)
        for (int prev = 0; prev < c; ++prev)
            if (centroids[c] == centroids[prev])
                centroids[c][0] ^= uint64_t(1) << (c & 63);

    Vocabulary vocab;
    vocab.centroids = std::move(centroids);
    return vocab;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const uint32_t magic = kVocabMagic;
    const uint32_t k = uint32_t(vocab.centroids.size());
    const uint32_t bits = kDescriptorBits;
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&k), 4);
    out.write(reinterpret_cast<const char*>(&bits), 4);
    for (const Descriptor& d : vocab.centroids)
        out.write(reinterpret_cast<const char*>(d.data()), 32);
    if (!out) throw IoError("write failed: " + path);
}

Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    uint32_t magic = 0, k = 0, bits = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&k), 4);
    in.read(reinterpret_cast<char*>(&bits), 4);
    if (!in || magic != kVocabMagic)
        throw IoError(path + ": bad vocabulary magic");
    if (bits != kDescriptorBits)
        throw IoError(path + ": unsupported descriptor width " +
                      std::to_string(bits));
    Vocabulary vocab;
    vocab.centroids.resize(k);
    for (Descriptor& d : vocab.centroids) {
        in.read(reinterpret_cast<char*>(d.data()), 32);
        if (!in) throw IoError(path + ": truncated vocabulary");
    }
    return vocab;
}

BoVWHistogram compute_histogram(const std::vector<Feature>& features,
                                const Vocabulary& vocab, int64_t frame_id) {
    BoVWHistogram hist;
    hist.frame_id = frame_id;
    hist.tf.assign(vocab.centroids.size(), 0.0);
    if (features.empty()) return hist;
    for (const Feature& f : features) {
        int best = 0, best_d = std::numeric_limits<int>::max();
        for (size_t c = 0; c < vocab.centroids.size(); ++c) {
            const int d = hamming_distance(f.descriptor, vocab.centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = int(c);
            }
        }
        hist.tf[best] += 1.0;
    }
    for (double& v : hist.tf) v /= double(features.size());
    hist.empty = false;
    return hist;
}

std::vector<int64_t> query(const FrameDatabase& db, const BoVWHistogram& probe,
                           int top_k, int64_t suppress_radius) {
    if (db.frames.empty()) return {};
    std::vector<std::pair<double, int64_t>> scored;
    scored.reserve(db.frames.size());
    for (const BoVWHistogram& frame : db.frames) {
        if (std::abs(frame.frame_id - probe.frame_id) <= suppress_radius &&
            suppress_radius > 0)
            continue;
        double dist = 0.0;
        for (size_t k = 0; k < frame.tf.size(); ++k)
            dist += std::abs(frame.tf[k] - probe.tf[k]);
        scored.emplace_back(dist, frame.frame_id);
    }
    std::sort(scored.begin(), scored.end());
    if (int(scored.size()) > top_k) scored.resize(top_k);
    std::vector<int64_t> ids;
    ids.reserve(scored.size());
    for (const auto& [dist, id] : scored) ids.push_back(id);
    return ids;
}

std::vector<std::pair<int, int>> match_features(const std::vector<Feature>& a,
                                                const std::vector<Feature>& b,
                                                double ratio) {
    std::vector<std::pair<int, int>> matches;
    if (a.empty() || b.size() < 2) return matches;
    for (size_t i = 0; i < a.size(); ++i) {
        int best = -1;
        int d1 = std::numeric_limits<int>::max();
        int d2 = std::numeric_limits<int>::max();
        for (size_t j = 0; j < b.size(); ++j) {
            const int d = hamming_distance(a[i].descriptor, b[j].descriptor);
            if (d < d1) {
                d2 = d1;
                d1 = d;
                best = int(j);
            } else if (d < d2) {
                d2 = d;
            }
        }
        if (double(d1) < ratio * double(d2))
            matches.emplace_back(int(i), best);
    }
    return matches;
}

LoopCandidate verify(const std::vector<Feature>& features_i,
                     const std::vector<Feature>& features_j, int64_t frame_i,
                     int64_t frame_j, double ratio, int n_th) {
    LoopCandidate c;
    c.i = std::min(frame_i, frame_j);
    c.j = std::max(frame_i, frame_j);
    c.matches = int(match_features(features_i, features_j, ratio).size());
    c.passed = c.matches >= n_th;
    return c;
}

std::vector<LoopCandidate> detect_loops(
    const std::vector<std::vector<Feature>>& frames, const Vocabulary& vocab,
    const RelocParams& params) {
    if (frames.size() < 2)
        throw ConfigError("detect_loops: need at least 2 frames");

    FrameDatabase db;
    db.frames.reserve(frames.size());
    for (size_t f = 0; f < frames.size(); ++f)
        db.frames.push_back(compute_histogram(frames[f], vocab, int64_t(f)));

    std::vector<LoopCandidate> result;
    std::vector<char> seen(frames.size() * frames.size(), 0);
    for (size_t f = 0; f < frames.size(); ++f) {
        const std::vector<int64_t> hits =
            query(db, db.frames[f], params.top_k, params.t_loop);
        for (int64_t hit : hits) {
            const int64_t lo = std::min<int64_t>(f, hit);
            const int64_t hi = std::max<int64_t>(f, hit);
            if (hi - lo <= params.t_loop) continue;
            const size_t key = size_t(lo) * frames.size() + size_t(hi);
            if (seen[key]) continue;
            seen[key] = 1;
            const LoopCandidate c = verify(frames[lo], frames[hi], lo, hi,
                                           params.ratio, params.n_th);
            if (c.passed) result.push_back(c);
        }
    }
    std::sort(result.begin(), result.end(),
              [](const LoopCandidate& a, const LoopCandidate& b) {
                  return a.i != b.i ? a.i < b.i : a.j < b.j;
              });
    return result;
}

}  // namespace flowslam
