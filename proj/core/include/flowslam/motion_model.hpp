#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flowslam/geom.hpp"

namespace flowslam {

/// One Student-t marginal with optional truncation bounds.
struct TMarginal {
    double nu = 4.0;     ///< degrees of freedom, in [kNuMin, kNuMax]
    double loc = 0.0;
    double scale = 1.0;  ///< > 0
    std::optional<double> lower;  ///< truncation, must contain loc
    std::optional<double> upper;
};

inline constexpr double kNuMin = 0.5;
/// nu pinned here means the data looked Gaussian; reported, not an error.
inline constexpr double kNuMax = 1000.0;
/// Scale floor for zero-variance degrees of freedom (a ground vehicle's
/// t_y is near constant); sampling at or below the floor returns loc
/// exactly.
inline constexpr double kScaleFloor = 1e-12;

/// Six independent Student-t marginals, one per motion component, in the
/// order t_x, t_y, t_z, alpha, beta, gamma.
struct MotionModel {
    std::array<TMarginal, 6> marginals;

    void validate() const;  ///< throws ConfigError on invariant violation
};

/// Maximum-likelihood Student-t fit of a single component via EM on the
/// Gaussian-scale-mixture form, with the nu update solved exactly each
/// sweep. Stops when the relative log-likelihood change drops below
/// 1e-10 or after 500 sweeps. Needs >= 30 samples. Constant samples get
/// the degenerate policy (loc = c, scale = kScaleFloor, nu = kNuMax).
TMarginal fit_marginal(const std::vector<double>& samples);

/// Per-component fit of all six motion degrees of freedom.
MotionModel fit(const std::vector<Motion6DoF>& samples);

/// One draw from a marginal: loc + scale * T(nu), rejection-resampled
/// into the truncation bounds when set.
double sample_marginal(const TMarginal& m, std::mt19937_64& rng);

/// Six independent draws, one per component.
Motion6DoF sample(const MotionModel& model, std::mt19937_64& rng);

/// Plain-text record, full precision. Keys are <dof>.<param> with dof in
/// {tx, ty, tz, alpha, beta, gamma} and param in {nu, loc, scale, lower,
/// upper}; lower/upper only when truncation is set.
void save_model(const MotionModel& model, std::ostream& out);
void save_model_file(const MotionModel& model, const std::string& path);

/// Parse errors name the missing or malformed field.
MotionModel load_model(std::istream& in, const std::string& name = "<stream>");
MotionModel load_model_file(const std::string& path);

}  // namespace flowslam
