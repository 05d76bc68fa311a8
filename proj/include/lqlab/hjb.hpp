#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqlab/divergence.hpp"
#include "lqlab/grid.hpp"
#include "lqlab/lq_model.hpp"

namespace lqlab {

enum class Differencing { Upwind, Downwind, Central };

/// R1 = {u : drift(x_i, u) >= 0}, R2 = {u : drift(x_i, u) < 0}.
enum class Region { R1, R2 };

/// Coefficient on V^n in the fixed-point update.
///   Consistent: (gamma_s - beta) / gamma_s, whose fixed point solves the HJB equation.
///   Literal:    (gamma_s + beta) / gamma_s, kept for side-by-side comparison only.
enum class FixedPointForm { Consistent, Literal };

inline const char* to_string(Differencing d) noexcept {
    switch (d) {
        case Differencing::Upwind: return "upwind";
        case Differencing::Downwind: return "downwind";
        case Differencing::Central: return "central";
    }
    return "unknown";
}

inline const char* to_string(Region r) noexcept { return r == Region::R1 ? "R1" : "R2"; }

struct SchemeConfig {
    double relaxation_rate = 0.0;
    Differencing differencing = Differencing::Upwind;
    double theta = 1e-8;
    std::size_t max_iters = 1'000'000;
    double theta_v = 1e-8;
    double theta_u = 1e-8;
    std::size_t max_policy_evals = 1'000'000;
    std::size_t max_policy_improvements = 1000;
    FixedPointForm form = FixedPointForm::Consistent;
    double divergence_threshold = DivergenceMonitor::kDefaultThreshold;

    void validate(const LqProblem& p) const {
        auto fail = [](const std::string& field, const std::string& what) {
            throw std::invalid_argument("SchemeConfig." + field + ": " + what);
        };
        if (form == FixedPointForm::Consistent && !(relaxation_rate > p.discount_rate)) {
            fail("relaxation_rate", "must exceed the discount rate");
        }
        if (!(relaxation_rate > 0.0)) fail("relaxation_rate", "must be > 0");
        if (!(theta > 0.0)) fail("theta", "must be > 0");
        if (!(theta_v > 0.0)) fail("theta_v", "must be > 0");
        if (!(theta_u > 0.0)) fail("theta_u", "must be > 0");
        if (max_iters == 0) fail("max_iters", "must be >= 1");
        if (max_policy_evals == 0) fail("max_policy_evals", "must be >= 1");
        if (max_policy_improvements == 0) fail("max_policy_improvements", "must be >= 1");
        if (!(divergence_threshold > 0.0)) fail("divergence_threshold", "must be > 0");
    }

    double self_coefficient(const LqProblem& p) const noexcept {
        return form == FixedPointForm::Consistent ? (relaxation_rate - p.discount_rate) / relaxation_rate
                                                  : (relaxation_rate + p.discount_rate) / relaxation_rate;
    }
};

/// Smallest relaxation rate for which every upwind stencil coefficient is
/// nonnegative for any control in [u_min, u_max] on this grid.
inline double min_monotone_relaxation_rate(const LqProblem& p, const Grid1D& grid) {
    double max_drift = 0.0;
    for (double x : {grid.x_min(), grid.x_max()}) {
        for (double u : {p.u_min, p.u_max}) max_drift = std::max(max_drift, std::abs(p.dynamics(x, u)));
    }
    return p.discount_rate + max_drift / grid.dx();
}

/// Upwind config on `grid` with the relaxation rate at the monotone limit.
inline SchemeConfig monotone_scheme(const LqProblem& p, const Grid1D& grid,
                                    Differencing differencing = Differencing::Upwind) {
    SchemeConfig cfg;
    cfg.relaxation_rate = min_monotone_relaxation_rate(p, grid);
    cfg.differencing = differencing;
    return cfg;
}

/// Smallest dx keeping the V_i coefficient nonnegative at this node and control.
inline double monotone_mesh_bound(const LqProblem& p, const SchemeConfig& cfg, double x, double u) {
    if (!(cfg.relaxation_rate > p.discount_rate)) {
        throw std::invalid_argument("monotone_mesh_bound: relaxation rate must exceed discount rate");
    }
    return std::abs(p.dynamics(x, u)) / (cfg.relaxation_rate - p.discount_rate);
}

enum class Slope { Forward, Backward, Central };

/// Difference used at node i for a control in `region`. Boundary nodes fall
/// back to the one-sided difference that exists.
inline Slope slope_kind(Differencing d, Region region, std::size_t i, std::size_t n) noexcept {
    Slope s = Slope::Central;
    switch (d) {
        case Differencing::Upwind: s = region == Region::R1 ? Slope::Forward : Slope::Backward; break;
        case Differencing::Downwind: s = region == Region::R1 ? Slope::Backward : Slope::Forward; break;
        case Differencing::Central: s = Slope::Central; break;
    }
    if (i == 0) return Slope::Forward;
    if (i + 1 == n) return Slope::Backward;
    return s;
}

inline double slope_value(std::span<const double> v, double dx, std::size_t i, Slope s) noexcept {
    switch (s) {
        case Slope::Forward: return (v[i + 1] - v[i]) / dx;
        case Slope::Backward: return (v[i] - v[i - 1]) / dx;
        case Slope::Central: return (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    return 0.0;
}

inline Region region_of(const LqProblem& p, double x, double u) noexcept {
    return p.dynamics(x, u) >= 0.0 ? Region::R1 : Region::R2;
}

/// Discrete Hamiltonian at node i for a fixed control, with the difference
/// picked by the region the control falls in.
inline double hamiltonian_at(const LqProblem& p, const Grid1D& grid, std::span<const double> v,
                             std::size_t i, double u, Differencing d) noexcept {
    const double x = grid.node(i);
    const double drift = p.dynamics(x, u);
    const Slope s = slope_kind(d, drift >= 0.0 ? Region::R1 : Region::R2, i, grid.size());
    return slope_value(v, grid.dx(), i, s) * drift + p.running_cost(x, u);
}

struct HamiltonianResult {
    double u_star;
    double h_star;
    Region region;
};

namespace detail {

struct Candidate {
    double u;
    double h;
};

/// Minimizes slope * drift(x, u) + running_cost(x, u) over u in [lo, hi].
inline std::optional<Candidate> minimize_quadratic(const LqProblem& p, double x, double slope,
                                                   double lo, double hi) noexcept {
    if (lo > hi) return std::nullopt;
    const double u = std::clamp(-p.control_gain * slope / (2.0 * p.control_cost), lo, hi);
    return Candidate{u, slope * p.dynamics(x, u) + p.running_cost(x, u)};
}

inline constexpr double kTieTolerance = 1e-12;

}  // namespace detail

/// Minimizes the region-split Hamiltonian at node i.
///
/// Each region carries its own one-sided slope, so the Hamiltonian is a
/// separate quadratic in u on each side of u = -drift * x_i / B. Each
/// quadratic is minimized on its (closed) interval and the lower value wins.
/// Near-ties (within 1e-12) go to the smaller |u|, then to R1.
inline HamiltonianResult hamiltonian_minimize(const LqProblem& p, const Grid1D& grid,
                                              std::span<const double> v, std::size_t i,
                                              Differencing d) noexcept {
    const double x = grid.node(i);
    const std::size_t n = grid.size();
    const Slope s1 = slope_kind(d, Region::R1, i, n);
    const Slope s2 = slope_kind(d, Region::R2, i, n);

    double u_star = 0.0;
    if (s1 == s2) {
        const double slope = slope_value(v, grid.dx(), i, s1);
        u_star = detail::minimize_quadratic(p, x, slope, p.u_min, p.u_max)->u;
    } else {
        const double boundary = -p.drift * x / p.control_gain;
        // drift >= 0 lies above the boundary when B > 0, below it when B < 0.
        const double above_lo = std::max(boundary, p.u_min), below_hi = std::min(boundary, p.u_max);
        const bool r1_above = p.control_gain > 0.0;
        const double r1_lo = r1_above ? above_lo : p.u_min;
        const double r1_hi = r1_above ? p.u_max : below_hi;
        const double r2_lo = r1_above ? p.u_min : above_lo;
        const double r2_hi = r1_above ? below_hi : p.u_max;
        const auto c1 = detail::minimize_quadratic(p, x, slope_value(v, grid.dx(), i, s1), r1_lo, r1_hi);
        const auto c2 = detail::minimize_quadratic(p, x, slope_value(v, grid.dx(), i, s2), r2_lo, r2_hi);
        if (c1 && c2) {
            if (std::abs(c1->h - c2->h) <= detail::kTieTolerance) {
                u_star = std::abs(c2->u) < std::abs(c1->u) ? c2->u : c1->u;
            } else {
                u_star = c1->h < c2->h ? c1->u : c2->u;
            }
        } else {
            u_star = c1 ? c1->u : c2->u;
        }
    }
    return {u_star, hamiltonian_at(p, grid, v, i, u_star, d), region_of(p, x, u_star)};
}

/// Linear stencil of the fixed-point update at node i with the control frozen:
///   V_i <- c_minus V_{i-1} + c_center V_i + c_plus V_{i+1} + constant.
struct StencilCoefficients {
    double c_minus = 0.0;
    double c_center = 0.0;
    double c_plus = 0.0;
    double constant = 0.0;
};

inline StencilCoefficients stencil_coefficients(const LqProblem& p, const Grid1D& grid,
                                                const SchemeConfig& cfg, std::size_t i, double u) {
    const double x = grid.node(i);
    const double drift = p.dynamics(x, u);
    const double g = cfg.relaxation_rate;
    const double w = drift / (g * grid.dx());
    StencilCoefficients c;
    c.c_center = cfg.self_coefficient(p);
    c.constant = p.running_cost(x, u) / g;
    switch (slope_kind(cfg.differencing, region_of(p, x, u), i, grid.size())) {
        case Slope::Forward:
            c.c_plus += w;
            c.c_center -= w;
            break;
        case Slope::Backward:
            c.c_center += w;
            c.c_minus -= w;
            break;
        case Slope::Central:
            c.c_plus += 0.5 * w;
            c.c_minus -= 0.5 * w;
            break;
    }
    return c;
}

/// One Jacobi sweep of the value-iteration operator (with re-minimization).
class SchemeOperator {
public:
    SchemeOperator(LqProblem p, Grid1D grid, SchemeConfig cfg) : p_(p), grid_(grid), cfg_(cfg) {}

    void apply(std::span<const double> in, std::span<double> out) const noexcept {
        const double self = cfg_.self_coefficient(p_);
        const double g = cfg_.relaxation_rate;
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            const auto r = hamiltonian_minimize(p_, grid_, in, i, cfg_.differencing);
            out[i] = self * in[i] + r.h_star / g;
        }
    }

    ValueField operator()(const ValueField& v) const {
        ValueField out(grid_);
        apply(v.values(), out.values());
        return out;
    }

    const Grid1D& grid() const noexcept { return grid_; }

private:
    LqProblem p_;
    Grid1D grid_;
    SchemeConfig cfg_;
};

/// One Jacobi sweep of the policy-evaluation operator for a fixed policy.
class FrozenPolicyOperator {
public:
    FrozenPolicyOperator(LqProblem p, SchemeConfig cfg, PolicyField policy)
        : p_(p), cfg_(cfg), policy_(std::move(policy)) {}

    void apply(std::span<const double> in, std::span<double> out) const noexcept {
        const Grid1D& grid = policy_.grid();
        const double self = cfg_.self_coefficient(p_);
        const double g = cfg_.relaxation_rate;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out[i] = self * in[i] + hamiltonian_at(p_, grid, in, i, policy_[i], cfg_.differencing) / g;
        }
    }

    ValueField operator()(const ValueField& v) const {
        ValueField out(policy_.grid());
        apply(v.values(), out.values());
        return out;
    }

    const Grid1D& grid() const noexcept { return policy_.grid(); }
    const PolicyField& policy() const noexcept { return policy_; }

private:
    LqProblem p_;
    SchemeConfig cfg_;
    PolicyField policy_;
};

struct ConvergenceRow {
    std::size_t iteration;
    double residual;  // max |V^{n+1} - V^n|
    double sup_norm;  // max |V^{n+1}|
};

struct ConvergenceLog {
    std::vector<ConvergenceRow> rows;
    /// Policy iteration only: max |u_new - u_old| after each improvement.
    std::vector<double> policy_changes;
};

struct HjbResult {
    ValueField value;
    PolicyField policy;
    ConvergenceLog log;
    SolveStatus status = SolveStatus::NotConverged;
    std::size_t iterations = 0;
    std::optional<std::size_t> trip_iteration;
};

/// Greedy control at every node for the given value field.
inline PolicyField greedy_policy(const LqProblem& p, const ValueField& v, Differencing d) {
    PolicyField u(v.grid());
    for (std::size_t i = 0; i < v.size(); ++i) {
        u[i] = hamiltonian_minimize(p, v.grid(), v.values(), i, d).u_star;
    }
    return u;
}

/// Per-node |-beta V_i + min_u H(x_i, u, V)|.
inline std::vector<double> hjb_residual(const LqProblem& p, const ValueField& v, Differencing d) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto r = hamiltonian_minimize(p, v.grid(), v.values(), i, d);
        out[i] = std::abs(-p.discount_rate * v[i] + r.h_star);
    }
    return out;
}

/// Jacobi value iteration
///   V_i <- c_self V_i + min_u H(x_i, u, V) / gamma_s
/// from `initial` (zeros when absent) until max |V^{n+1} - V^n| < theta.
inline HjbResult value_iteration(const LqProblem& p, const Grid1D& grid, const SchemeConfig& cfg,
                                 std::optional<ValueField> initial = std::nullopt) {
    p.validate();
    cfg.validate(p);
    ValueField v = initial ? std::move(*initial) : ValueField(grid);
    if (!(v.grid() == grid)) throw std::invalid_argument("value_iteration: initial field grid mismatch");

    const SchemeOperator op(p, grid, cfg);
    DivergenceMonitor monitor(cfg.divergence_threshold);
    ValueField next(grid);
    HjbResult out{ValueField(grid), PolicyField(grid), {}, SolveStatus::NotConverged, 0, std::nullopt};

    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        op.apply(v.values(), next.values());
        const double residual = sup_distance(v.values(), next.values());
        out.log.rows.push_back({it, residual, sup_norm(next.values())});
        out.iterations = it;
        std::swap(v, next);
        if (monitor.observe(v.values(), it)) {
            out.status = SolveStatus::Diverged;
            out.trip_iteration = monitor.trip_iteration();
            break;
        }
        if (residual < cfg.theta) {
            out.status = SolveStatus::Converged;
            break;
        }
    }
    out.policy = greedy_policy(p, v, cfg.differencing);
    out.value = std::move(v);
    return out;
}

/// Policy iteration: evaluate the current policy to theta_v, then replace it
/// by the minimizer of the region-split Hamiltonian; stop once the policy
/// moves by less than theta_u.
inline HjbResult policy_iteration(const LqProblem& p, const Grid1D& grid, const SchemeConfig& cfg,
                                  PolicyField u0, std::optional<ValueField> initial = std::nullopt) {
    p.validate();
    cfg.validate(p);
    if (!(u0.grid() == grid)) throw std::invalid_argument("policy_iteration: policy grid mismatch");
    for (double u : u0) {
        if (u < p.u_min || u > p.u_max) {
            throw std::invalid_argument("policy_iteration: initial policy leaves the control bounds");
        }
    }
    ValueField v = initial ? std::move(*initial) : ValueField(grid);
    if (!(v.grid() == grid)) throw std::invalid_argument("policy_iteration: initial field grid mismatch");

    DivergenceMonitor monitor(cfg.divergence_threshold);
    ValueField next(grid);
    PolicyField u = std::move(u0);
    HjbResult out{ValueField(grid), PolicyField(grid), {}, SolveStatus::NotConverged, 0, std::nullopt};
    std::size_t sweep = 0;

    for (std::size_t round = 0; round < cfg.max_policy_improvements; ++round) {
        const FrozenPolicyOperator op(p, cfg, u);
        bool evaluated = false;
        for (std::size_t k = 0; k < cfg.max_policy_evals; ++k) {
            op.apply(v.values(), next.values());
            ++sweep;
            const double residual = sup_distance(v.values(), next.values());
            out.log.rows.push_back({sweep, residual, sup_norm(next.values())});
            std::swap(v, next);
            if (monitor.observe(v.values(), sweep)) {
                out.status = SolveStatus::Diverged;
                out.trip_iteration = monitor.trip_iteration();
                break;
            }
            if (residual < cfg.theta_v) {
                evaluated = true;
                break;
            }
        }
        if (!evaluated) break;

        PolicyField improved = greedy_policy(p, v, cfg.differencing);
        const double change = sup_distance(improved.values(), u.values());
        out.log.policy_changes.push_back(change);
        u = std::move(improved);
        if (change < cfg.theta_u) {
            out.status = SolveStatus::Converged;
            break;
        }
    }
    out.iterations = sweep;
    out.value = std::move(v);
    out.policy = std::move(u);
    return out;
}

}  // namespace lqlab
