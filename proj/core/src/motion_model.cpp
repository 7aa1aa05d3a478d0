#include "flowslam/motion_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "flowslam/errors.hpp"

namespace flowslam {

namespace {

constexpr int kMinSamples = 30;
constexpr int kMaxSweeps = 500;
constexpr double kLogLikTol = 1e-10;

// Digamma by upward recurrence into the asymptotic region. Accurate to
// ~1e-12 for the arguments the nu solve produces (>= 0.25).
double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 / 252));
    return result;
}

double t_log_likelihood(const std::vector<double>& x, double nu, double loc,
                        double scale) {
    const double n = double(x.size());
    double sum = 0.0;
    const double inv_s = 1.0 / scale;
    for (double xi : x) {
        const double z = (xi - loc) * inv_s;
        sum += std::log1p(z * z / nu);
    }
    return n * (std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) -
                0.5 * std::log(nu * M_PI) - std::log(scale)) -
           0.5 * (nu + 1) * sum;
}

// Expected-complete-data equation for nu given the E-step weights:
//   f(nu) = log(nu/2) - digamma(nu/2) + 1 + c + digamma((nu+1)/2)
//           - log((nu+1)/2)
// where c = mean(log w_i - w_i). Monotone decreasing in nu; solve by
// bisection on log nu within [kNuMin, kNuMax].
double solve_nu(double c) {
    auto f = [c](double nu) {
        return std::log(nu / 2) - digamma(nu / 2) + 1.0 + c +
               digamma((nu + 1) / 2) - std::log((nu + 1) / 2);
    };
    double lo = kNuMin, hi = kNuMax;
    if (f(lo) <= 0.0) return lo;
    if (f(hi) >= 0.0) return hi;  // effectively Gaussian data
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);
        if (f(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi / lo < 1.0 + 1e-13) break;
    }
    return std::sqrt(lo * hi);
}

const char* kDofNames[6] = {"tx", "ty", "tz", "alpha", "beta", "gamma"};

double component(const Motion6DoF& m, int dof) {
    switch (dof) {
        case 0: return m.t_x;
        case 1: return m.t_y;
        case 2: return m.t_z;
        case 3: return m.alpha;
        case 4: return m.beta;
        default: return m.gamma;
    }
}

void set_component(Motion6DoF& m, int dof, double v) {
    switch (dof) {
        case 0: m.t_x = v; break;
        case 1: m.t_y = v; break;
        case 2: m.t_z = v; break;
        case 3: m.alpha = v; break;
        case 4: m.beta = v; break;
        default: m.gamma = v; break;
    }
}

void format_value(std::ostream& out, const char* dof, const char* param,
                  double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << dof << "." << param << " = " << buf << "\n";
}

}  // namespace

void MotionModel::validate() const {
    for (int i = 0; i < 6; ++i) {
        const TMarginal& m = marginals[i];
        std::string who = std::string("MotionModel.") + kDofNames[i];
        if (!(m.nu > 0.0) || !std::isfinite(m.nu))
            throw ConfigError(who + ": nu must be positive");
        if (!(m.scale > 0.0) || !std::isfinite(m.scale))
            throw ConfigError(who + ": scale must be positive");
        if (!std::isfinite(m.loc)) throw ConfigError(who + ": loc not finite");
        if (m.lower.has_value() != m.upper.has_value())
            throw ConfigError(who + ": truncation needs both bounds");
        if (m.lower && !(*m.lower < *m.upper))
            throw ConfigError(who + ": lower bound must be below upper");
        if (m.lower && (m.loc < *m.lower || m.loc > *m.upper))
            throw ConfigError(who + ": loc outside truncation bounds");
    }
}

TMarginal fit_marginal(const std::vector<double>& samples) {
    if (samples.size() < kMinSamples)
        throw ConfigError("fit_marginal: need at least 30 samples, got " +
                          std::to_string(samples.size()));
    for (double s : samples)
        if (!std::isfinite(s))
            throw ConfigError("fit_marginal: non-finite sample");

    const size_t n = samples.size();
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    if (*mx - *mn <= 0.0) {
        // Degenerate: constant component.
        return TMarginal{kNuMax, samples.front(), kScaleFloor, {}, {}};
    }

    double loc = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double var = 0.0;
    for (double s : samples) var += (s - loc) * (s - loc);
    var /= n;
    double scale = std::sqrt(std::max(var, kScaleFloor * kScaleFloor));
    double nu = 4.0;

    std::vector<double> w(n);
    double prev_ll = t_log_likelihood(samples, nu, loc, scale);
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        // E-step: latent precisions of the scale mixture.
        double sum_w = 0.0, sum_wx = 0.0, sum_logw_minus_w = 0.0;
        const double inv_s2 = 1.0 / (scale * scale);
        for (size_t i = 0; i < n; ++i) {
            const double d = samples[i] - loc;
            const double wi = (nu + 1.0) / (nu + d * d * inv_s2);
            w[i] = wi;
            sum_w += wi;
            sum_wx += wi * samples[i];
            sum_logw_minus_w += std::log(wi) - wi;
        }
        // M-step for loc and scale.
        loc = sum_wx / sum_w;
        double wss = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double d = samples[i] - loc;
            wss += w[i] * d * d;
        }
        scale = std::sqrt(std::max(wss / n, kScaleFloor * kScaleFloor));
        // CM-step for nu.
        nu = solve_nu(sum_logw_minus_w / n);

        const double ll = t_log_likelihood(samples, nu, loc, scale);
        if (std::abs(ll - prev_ll) <=
            kLogLikTol * std::max(1.0, std::abs(prev_ll))) {
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }
    return TMarginal{nu, loc, scale, {}, {}};
}

MotionModel fit(const std::vector<Motion6DoF>& samples) {
    if (samples.size() < kMinSamples)
        throw ConfigError("fit: need at least 30 motions, got " +
                          std::to_string(samples.size()));
    MotionModel model;
    std::vector<double> column(samples.size());
    for (int dof = 0; dof < 6; ++dof) {
        for (size_t i = 0; i < samples.size(); ++i)
            column[i] = component(samples[i], dof);
        model.marginals[dof] = fit_marginal(column);
    }
    return model;
}

double sample_marginal(const TMarginal& m, std::mt19937_64& rng) {
    if (m.scale <= kScaleFloor) return m.loc;
    std::student_t_distribution<double> t(m.nu);
    for (;;) {
        const double draw = m.loc + m.scale * t(rng);
        if (!m.lower || (draw >= *m.lower && draw <= *m.upper)) return draw;
    }
}

Motion6DoF sample(const MotionModel& model, std::mt19937_64& rng) {
    Motion6DoF m;
    for (int dof = 0; dof < 6; ++dof)
        set_component(m, dof, sample_marginal(model.marginals[dof], rng));
    return m;
}

void save_model(const MotionModel& model, std::ostream& out) {
    out << "# flowslam motion model: per-DoF Student-t marginals\n";
    for (int i = 0; i < 6; ++i) {
        const TMarginal& m = model.marginals[i];
        format_value(out, kDofNames[i], "nu", m.nu);
        format_value(out, kDofNames[i], "loc", m.loc);
        format_value(out, kDofNames[i], "scale", m.scale);
        if (m.lower) {
            format_value(out, kDofNames[i], "lower", *m.lower);
            format_value(out, kDofNames[i], "upper", *m.upper);
        }
    }
}

void save_model_file(const MotionModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_model(model, out);
    if (!out) throw IoError("write failed: " + path);
}

MotionModel load_model(std::istream& in, const std::string& name) {
    std::map<std::string, double> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // Trim.
        const auto is_space = [](char c) { return std::isspace(uint8_t(c)); };
        while (!line.empty() && is_space(line.back())) line.pop_back();
        size_t start = 0;
        while (start < line.size() && is_space(line[start])) ++start;
        if (start == line.size()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(name + ":" + std::to_string(lineno) +
                          ": expected key = value");
        std::string key = line.substr(start, eq - start);
        while (!key.empty() && is_space(key.back())) key.pop_back();
        std::string value = line.substr(eq + 1);
        try {
            size_t used = 0;
            const double v = std::stod(value, &used);
            while (used < value.size() && is_space(value[used])) ++used;
            if (used != value.size()) throw std::invalid_argument(value);
            kv[key] = v;
        } catch (const std::exception&) {
            throw IoError(name + ":" + std::to_string(lineno) +
                          ": malformed number for key '" + key + "'");
        }
    }

    MotionModel model;
    for (int i = 0; i < 6; ++i) {
        TMarginal& m = model.marginals[i];
        const std::string dof = kDofNames[i];
        for (const char* param : {"nu", "loc", "scale"}) {
            const std::string key = dof + "." + param;
            auto it = kv.find(key);
            if (it == kv.end())
                throw IoError(name + ": missing field '" + key + "'");
            if (param[0] == 'n')
                m.nu = it->second;
            else if (param[0] == 'l')
                m.loc = it->second;
            else
                m.scale = it->second;
            kv.erase(it);
        }
        auto lo = kv.find(dof + ".lower");
        auto hi = kv.find(dof + ".upper");
        if ((lo == kv.end()) != (hi == kv.end()))
            throw IoError(name + ": field '" + dof +
                          "': truncation needs both lower and upper");
        if (lo != kv.end()) {
            m.lower = lo->second;
            m.upper = hi->second;
            kv.erase(lo);
            kv.erase(kv.find(dof + ".upper"));
        }
    }
    if (!kv.empty())
        throw IoError(name + ": unknown field '" + kv.begin()->first + "'");
    model.validate();
    return model;
}

MotionModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return load_model(in, path);
}

}  // namespace flowslam
