#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lqlab/divergence.hpp"
#include "lqlab/grid.hpp"
#include "lqlab/hjb.hpp"
#include "lqlab/lq_model.hpp"

namespace lqlab {

/// Gaps S(v + d)_i - S(v)_i below this count as violations.
inline constexpr double kViolationTolerance = 1e-12;

struct MonotonicityReport {
    std::size_t n_pairs_tested = 0;
    std::size_t n_violations = 0;
    double worst_violation = 0.0;
    std::optional<std::size_t> violating_node;

    bool monotone() const noexcept { return n_violations == 0; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for draw `index` of run `seed`.
inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ index));
}

inline void record_pair(MonotonicityReport& report, std::span<const double> base,
                        std::span<const double> bumped) {
    ++report.n_pairs_tested;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double gap = bumped[i] - base[i];
        if (gap < -kViolationTolerance || std::isnan(gap)) {
            ++report.n_violations;
            if (std::isnan(gap) || gap < report.worst_violation) {
                report.worst_violation = std::isnan(gap) ? -std::numeric_limits<double>::infinity() : gap;
                report.violating_node = i;
            }
        } else {
            report.worst_violation = std::min(report.worst_violation, gap);
        }
    }
}

}  // namespace detail

/// Randomized check of u >= v => S u >= S v.
///
/// Pair k draws a base field v with entries in [-scale, scale] and a
/// nonnegative bump d cycling through three shapes: a single-node bump, a
/// constant shift, and a dense random bump. Each pair uses its own seeded
/// stream, so the report does not depend on evaluation order.
template <class Operator>
MonotonicityReport probe_operator_monotonicity(const Operator& apply, const Grid1D& grid,
                                               std::uint64_t seed, std::size_t n_pairs,
                                               double scale = 10.0) {
    MonotonicityReport report;
    const std::size_t n = grid.size();
    for (std::size_t k = 0; k < n_pairs; ++k) {
        auto rng = detail::stream_for(seed, k);
        std::uniform_real_distribution<double> value(-scale, scale);
        std::uniform_real_distribution<double> bump(0.0, 1.0);
        ValueField v(grid);
        for (auto& x : v) x = value(rng);
        ValueField w = v;
        switch (k % 3) {
            case 0: {
                std::uniform_int_distribution<std::size_t> node(0, n - 1);
                w[node(rng)] += bump(rng);
                break;
            }
            case 1: {
                const double c = bump(rng);
                for (auto& x : w) x += c;
                break;
            }
            default:
                for (auto& x : w) x += bump(rng);
                break;
        }
        const ValueField sv = apply(v);
        const ValueField sw = apply(w);
        detail::record_pair(report, sv.values(), sw.values());
    }
    return report;
}

/// Bumps each listed node of `base` by `bump` in turn and compares S
/// before and after.
template <class Operator>
MonotonicityReport probe_single_node_bumps(const Operator& apply, const ValueField& base,
                                           std::span<const std::size_t> nodes, double bump = 1.0) {
    MonotonicityReport report;
    const ValueField sv = apply(base);
    for (std::size_t j : nodes) {
        ValueField w = base;
        w[j] += bump;
        const ValueField sw = apply(w);
        detail::record_pair(report, sv.values(), sw.values());
    }
    return report;
}

struct CoefficientViolation {
    std::size_t node;
    std::string coefficient;  // "c_minus", "c_center" or "c_plus"
    double value;
};

struct CoefficientReport {
    std::vector<StencilCoefficients> coefficients;
    std::vector<double> controls;
    std::vector<CoefficientViolation> violations;

    bool monotone() const noexcept { return violations.empty(); }
};

/// Freezes the greedy control at each node of `v` and lists every stencil
/// coefficient below -1e-12.
inline CoefficientReport coefficient_check(const LqProblem& p, const Grid1D& grid,
                                           const SchemeConfig& cfg, const ValueField& v) {
    CoefficientReport report;
    report.coefficients.reserve(grid.size());
    report.controls.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double u = hamiltonian_minimize(p, grid, v.values(), i, cfg.differencing).u_star;
        const auto c = stencil_coefficients(p, grid, cfg, i, u);
        report.coefficients.push_back(c);
        report.controls.push_back(u);
        if (c.c_minus < -kViolationTolerance) report.violations.push_back({i, "c_minus", c.c_minus});
        if (c.c_center < -kViolationTolerance) report.violations.push_back({i, "c_center", c.c_center});
        if (c.c_plus < -kViolationTolerance) report.violations.push_back({i, "c_plus", c.c_plus});
    }
    return report;
}

/// max over the central `interior_fraction` of nodes of |v_i - V*(x_i)|.
inline double sup_error(const ValueField& v, const RiccatiSolution& sol, double interior_fraction) {
    const auto range = interior_range(v.size(), interior_fraction);
    double out = 0.0;
    for (std::size_t i = range.first; i < range.last; ++i) {
        const double e = std::abs(v[i] - analytic_value(sol, v.grid().node(i)));
        if (std::isnan(e)) return e;
        out = std::max(out, e);
    }
    return out;
}

/// sup_error divided by the largest analytic value on the same nodes.
inline double relative_sup_error(const ValueField& v, const RiccatiSolution& sol, double interior_fraction) {
    const auto range = interior_range(v.size(), interior_fraction);
    double scale = 0.0;
    for (std::size_t i = range.first; i < range.last; ++i) {
        scale = std::max(scale, std::abs(analytic_value(sol, v.grid().node(i))));
    }
    return sup_error(v, sol, interior_fraction) / scale;
}

/// Ordinary least-squares slope of u against x over the central nodes.
inline double policy_slope(const PolicyField& u, double interior_fraction) {
    const auto range = interior_range(u.size(), interior_fraction);
    double mx = 0.0, mu = 0.0;
    for (std::size_t i = range.first; i < range.last; ++i) {
        mx += u.grid().node(i);
        mu += u[i];
    }
    const auto m = static_cast<double>(range.size());
    mx /= m;
    mu /= m;
    double sxx = 0.0, sxu = 0.0;
    for (std::size_t i = range.first; i < range.last; ++i) {
        const double dx = u.grid().node(i) - mx;
        sxx += dx * dx;
        sxu += dx * (u[i] - mu);
    }
    return sxu / sxx;
}

}  // namespace lqlab
