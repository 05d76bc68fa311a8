#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "lqlab/divergence.hpp"
#include "lqlab/lq_model.hpp"

namespace lqlab {

inline constexpr std::size_t kNumFeatures = 6;

/// Quadratic features [1, x, u, x^2, x u, u^2].
using FeatureVector = std::array<double, kNumFeatures>;

namespace feature {
inline constexpr std::size_t kBias = 0, kX = 1, kU = 2, kXX = 3, kXU = 4, kUU = 5;
}

inline FeatureVector features(double x, double u) noexcept {
    return {1.0, x, u, x * x, x * u, u * u};
}

inline double squared_norm(const FeatureVector& f) noexcept {
    double s = 0.0;
    for (double v : f) s += v * v;
    return s;
}

/// Weights of Q(x, u) = features(x, u) . w, ordered as FeatureVector.
struct FeatureWeights {
    std::array<double, kNumFeatures> w{};

    double& operator[](std::size_t i) noexcept { return w[i]; }
    double operator[](std::size_t i) const noexcept { return w[i]; }

    double norm() const noexcept {
        double s = 0.0;
        for (double v : w) s += v * v;
        return std::sqrt(s);
    }

    friend bool operator==(const FeatureWeights&, const FeatureWeights&) = default;
};

inline double q_value(const FeatureWeights& w, double x, double u) noexcept {
    const auto f = features(x, u);
    double s = 0.0;
    for (std::size_t k = 0; k < kNumFeatures; ++k) s += f[k] * w[k];
    return s;
}

/// argmin over u in [u_min, u_max] of Q(x, u; w).
///
/// Convex case: clamp the stationary point of the quadratic in u. Otherwise
/// the better endpoint, with ties going to u_min.
inline double greedy_action(const FeatureWeights& w, double x, double u_min, double u_max) noexcept {
    using namespace feature;
    if (w[kUU] > 0.0) {
        return std::clamp(-(w[kU] + w[kXU] * x) / (2.0 * w[kUU]), u_min, u_max);
    }
    return q_value(w, x, u_max) < q_value(w, x, u_min) ? u_max : u_min;
}

/// 1 / (X^T X): the largest step keeping the self-coefficient of the
/// update nonnegative at (x, u).
inline double step_bound(double x, double u) noexcept { return 1.0 / squared_norm(features(x, u)); }

/// cost + discount * min_u' Q(x', u'; w) with x' the unsnapped Euler successor.
inline double bellman_target(const FeatureWeights& w, const DiscreteMdp& mdp, double x, double u) noexcept {
    const double next = mdp.euler_next(x, u);
    const double u_next = greedy_action(w, next, mdp.problem.u_min, mdp.problem.u_max);
    return mdp.step_cost(x, u) + mdp.discount_factor * q_value(w, next, u_next);
}

/// Semi-gradient step w <- w + lr (target - Q(x, u; w)) X(x, u).
inline FeatureWeights fa_update(const FeatureWeights& w, const DiscreteMdp& mdp, double x, double u,
                                double lr) noexcept {
    const double td = bellman_target(w, mdp, x, u) - q_value(w, x, u);
    const auto f = features(x, u);
    FeatureWeights out = w;
    for (std::size_t k = 0; k < kNumFeatures; ++k) out[k] += lr * td * f[k];
    return out;
}

struct FaStepRule {
    enum class Kind { Constant, BoundScaled };
    Kind kind = Kind::BoundScaled;
    double value = 0.5;

    static FaStepRule constant(double lr) { return {Kind::Constant, lr}; }
    static FaStepRule bound_scaled(double fraction) { return {Kind::BoundScaled, fraction}; }

    double at(double x, double u) const noexcept {
        return kind == Kind::Constant ? value : value * step_bound(x, u);
    }

    void validate() const {
        if (!std::isfinite(value)) throw std::invalid_argument("FaStepRule: step must be finite");
        if (kind == Kind::BoundScaled && !(value > 0.0 && value <= 1.0)) {
            throw std::invalid_argument("FaStepRule: bound fraction must lie in (0, 1]");
        }
    }
};

struct FaTrainOptions {
    std::size_t log_every = 1000;
    double divergence_threshold = DivergenceMonitor::kDefaultThreshold;
    /// Probe set is a probe_per_axis x probe_per_axis lattice over the box.
    std::size_t probe_per_axis = 9;
    /// Count samples whose self-coefficient 1 - lr X^T X is negative.
    bool check_coefficients = false;
};

struct FaLogRow {
    std::size_t step;
    double weight_norm;
    double probe_residual;
};

struct FaTrainResult {
    FeatureWeights weights;
    std::vector<FaLogRow> log;
    SolveStatus status = SolveStatus::Converged;
    std::optional<std::size_t> trip_iteration;
    std::size_t coefficient_violations = 0;
};

/// Fixed lattice of (x, u) points covering the state-action box.
inline std::vector<std::array<double, 2>> probe_points(const LqProblem& p, std::size_t per_axis) {
    std::vector<std::array<double, 2>> out;
    out.reserve(per_axis * per_axis);
    const auto at = [per_axis](double lo, double hi, std::size_t k) {
        return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(per_axis - 1);
    };
    for (std::size_t i = 0; i < per_axis; ++i) {
        for (std::size_t j = 0; j < per_axis; ++j) {
            out.push_back({at(p.x_min, p.x_max, i), at(p.u_min, p.u_max, j)});
        }
    }
    return out;
}

/// Mean |target - Q| over the probe set.
inline double probe_bellman_residual(const FeatureWeights& w, const DiscreteMdp& mdp,
                                     std::span<const std::array<double, 2>> probes) noexcept {
    double total = 0.0;
    for (const auto& [x, u] : probes) total += std::abs(bellman_target(w, mdp, x, u) - q_value(w, x, u));
    return total / static_cast<double>(probes.size());
}

/// Semi-gradient Q-learning with (x, u) drawn uniformly from the box each step.
inline FaTrainResult fa_train(const DiscreteMdp& mdp, const FaStepRule& rule, std::size_t n_steps,
                              std::uint64_t seed, const FaTrainOptions& opts = {}) {
    mdp.validate();
    rule.validate();
    if (opts.probe_per_axis < 2) throw std::invalid_argument("fa_train: probe lattice needs >= 2 points per axis");
    const auto& p = mdp.problem;
    const auto probes = probe_points(p, opts.probe_per_axis);
    const std::size_t log_every = opts.log_every == 0 ? 1 : opts.log_every;

    FaTrainResult out;
    out.log.push_back({0, 0.0, probe_bellman_residual(out.weights, mdp, probes)});
    DivergenceMonitor monitor(opts.divergence_threshold);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> xs(p.x_min, p.x_max);
    std::uniform_real_distribution<double> us(p.u_min, p.u_max);

    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double x = xs(rng);
        const double u = us(rng);
        const double lr = rule.at(x, u);
        if (opts.check_coefficients && 1.0 - lr * squared_norm(features(x, u)) < -1e-12) {
            ++out.coefficient_violations;
        }
        out.weights = fa_update(out.weights, mdp, x, u, lr);
        const double norm = out.weights.norm();
        const bool tripped = monitor.observe(norm, step);
        if (tripped || step % log_every == 0 || step == n_steps) {
            out.log.push_back({step, norm, tripped ? norm : probe_bellman_residual(out.weights, mdp, probes)});
        }
        if (tripped) {
            out.status = SolveStatus::Diverged;
            out.trip_iteration = monitor.trip_iteration();
            break;
        }
    }
    return out;
}

/// Least-squares weights for samples (x_k, u_k) -> target_k, via Householder QR.
inline FeatureWeights fit_weights(std::span<const std::array<double, 2>> points, std::span<const double> targets) {
    const std::size_t m = points.size();
    if (m < kNumFeatures || targets.size() != m) {
        throw std::invalid_argument("fit_weights: need at least 6 samples with one target each");
    }
    std::vector<std::array<double, kNumFeatures>> a(m);
    std::vector<double> b(targets.begin(), targets.end());
    for (std::size_t r = 0; r < m; ++r) a[r] = features(points[r][0], points[r][1]);

    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        double norm = 0.0;
        for (std::size_t r = k; r < m; ++r) norm += a[r][k] * a[r][k];
        norm = std::sqrt(norm);
        if (norm == 0.0) throw std::invalid_argument("fit_weights: rank-deficient samples");
        const double alpha = a[k][k] > 0.0 ? -norm : norm;
        std::vector<double> v(m, 0.0);
        v[k] = a[k][k] - alpha;
        for (std::size_t r = k + 1; r < m; ++r) v[r] = a[r][k];
        double vv = 0.0;
        for (std::size_t r = k; r < m; ++r) vv += v[r] * v[r];
        if (vv == 0.0) continue;
        for (std::size_t c = k; c < kNumFeatures; ++c) {
            double dot = 0.0;
            for (std::size_t r = k; r < m; ++r) dot += v[r] * a[r][c];
            const double scale = 2.0 * dot / vv;
            for (std::size_t r = k; r < m; ++r) a[r][c] -= scale * v[r];
        }
        double dot = 0.0;
        for (std::size_t r = k; r < m; ++r) dot += v[r] * b[r];
        const double scale = 2.0 * dot / vv;
        for (std::size_t r = k; r < m; ++r) b[r] -= scale * v[r];
    }
    double r_max = 0.0;
    for (std::size_t k = 0; k < kNumFeatures; ++k) r_max = std::max(r_max, std::abs(a[k][k]));
    FeatureWeights w;
    for (std::size_t k = kNumFeatures; k-- > 0;) {
        double s = b[k];
        for (std::size_t c = k + 1; c < kNumFeatures; ++c) s -= a[k][c] * w[c];
        if (std::abs(a[k][k]) <= 1e-12 * r_max) throw std::invalid_argument("fit_weights: rank-deficient samples");
        w[k] = s / a[k][k];
    }
    return w;
}

/// Exact weights of
///   Q(x, u) = dt (Q x^2 + R u^2) + discount * value_coef * (x + dt (A x + B u))^2,
/// the one-step target under V(x) = value_coef x^2 with unclamped Euler dynamics.
inline FeatureWeights one_step_weights(const DiscreteMdp& mdp, double value_coef) noexcept {
    const auto& p = mdp.problem;
    const double a = 1.0 + mdp.dt * p.drift;
    const double b = mdp.dt * p.control_gain;
    const double k = mdp.discount_factor * value_coef;
    FeatureWeights w;
    w[feature::kXX] = mdp.dt * p.state_cost + k * a * a;
    w[feature::kXU] = 2.0 * k * a * b;
    w[feature::kUU] = mdp.dt * p.control_cost + k * b * b;
    return w;
}

}  // namespace lqlab
