#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lqlab/grid.hpp"

namespace lqlab {

/// Scalar discounted LQ problem
///
///   dx/dt = drift * x + control_gain * u
///   J     = integral of exp(-discount_rate * t) (state_cost x^2 + control_cost u^2)
///
/// on the box [x_min, x_max] x [u_min, u_max].
struct LqProblem {
    double drift = 0.5;
    double discount_rate = 1.0;
    double state_cost = 1.0;
    double control_cost = 1.0;
    double control_gain = 1.0;
    double x_min = -2.0;
    double x_max = 2.0;
    double u_min = -4.0;
    double u_max = 4.0;

    double dynamics(double x, double u) const noexcept { return drift * x + control_gain * u; }

    double running_cost(double x, double u) const noexcept {
        return state_cost * x * x + control_cost * u * u;
    }

    void validate() const {
        auto fail = [](const std::string& field, const std::string& what) {
            throw std::invalid_argument("LqProblem." + field + ": " + what);
        };
        if (!std::isfinite(drift)) fail("drift", "must be finite");
        if (!(discount_rate > 0.0)) fail("discount_rate", "must be > 0");
        if (!(state_cost > 0.0)) fail("state_cost", "must be > 0");
        if (!(control_cost > 0.0)) fail("control_cost", "must be > 0");
        if (!(control_gain != 0.0) || !std::isfinite(control_gain)) {
            fail("control_gain", "must be finite and nonzero");
        }
        if (!(x_min < 0.0 && 0.0 < x_max)) fail("x_min/x_max", "domain must bracket 0");
        if (!(u_min < 0.0 && 0.0 < u_max)) fail("u_min/u_max", "control bounds must bracket 0");
    }
};

/// Coefficients of V(x) = gamma_coef x^2 + 2 kappa x + lambda_const.
struct RiccatiSolution {
    double gamma_coef = 0.0;
    double kappa = 0.0;
    double lambda_const = 0.0;
    /// B / R, so the optimal feedback is -(B/R)(gamma_coef x + kappa).
    double control_ratio = 1.0;
};

class NoPositiveRoot : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Residual of (B^2/R) G^2 + (beta - 2A) G - Q at the stored root.
inline double riccati_residual(const LqProblem& p, double gamma_coef) {
    const double a = p.control_gain * p.control_gain / p.control_cost;
    const double b = p.discount_rate - 2.0 * p.drift;
    return a * gamma_coef * gamma_coef + b * gamma_coef - p.state_cost;
}

/// Positive root of (B^2/R) G^2 + (beta - 2A) G - Q = 0.
///
/// Q, R > 0 make the product of the roots negative, so exactly one root is
/// positive. The root is formed without cancellation.
inline RiccatiSolution riccati_solve(const LqProblem& p) {
    p.validate();
    const double a = p.control_gain * p.control_gain / p.control_cost;
    const double b = p.discount_rate - 2.0 * p.drift;
    const double c = -p.state_cost;
    const double disc = b * b - 4.0 * a * c;
    if (!(disc >= 0.0)) throw NoPositiveRoot("riccati_solve: negative discriminant");
    const double root = std::sqrt(disc);
    double gamma_coef = 0.0;
    if (b >= 0.0) {
        gamma_coef = (2.0 * p.state_cost) / (b + root);
    } else {
        gamma_coef = (-b + root) / (2.0 * a);
    }
    if (!(gamma_coef > 0.0) || !std::isfinite(gamma_coef)) {
        throw NoPositiveRoot("riccati_solve: no positive root");
    }
    return {gamma_coef, 0.0, 0.0, p.control_gain / p.control_cost};
}

inline double analytic_value(const RiccatiSolution& sol, double x) noexcept {
    return sol.gamma_coef * x * x + 2.0 * sol.kappa * x + sol.lambda_const;
}

inline double analytic_policy(const RiccatiSolution& sol, double x) noexcept {
    return -sol.control_ratio * (sol.gamma_coef * x + sol.kappa);
}

/// Throws if the analytic optimum leaves [u_min, u_max] somewhere on the
/// state domain; the grid solvers assume the bounds never bind.
inline void check_controls_unconstrained(const LqProblem& p, const RiccatiSolution& sol) {
    for (double x : {p.x_min, p.x_max}) {
        const double u = analytic_policy(sol, x);
        if (u < p.u_min || u > p.u_max) {
            throw std::invalid_argument("control bounds bind the analytic policy at x = " +
                                        std::to_string(x));
        }
    }
}

/// Explicit-Euler discretization of an LqProblem on state and action grids.
struct DiscreteMdp {
    LqProblem problem;
    double dt;
    double discount_factor;
    Grid1D state_grid;
    Grid1D action_grid;

    static DiscreteMdp from_continuous(const LqProblem& p, double dt, std::size_t state_nodes,
                                       std::size_t action_nodes) {
        p.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("DiscreteMdp.dt: must be > 0");
        DiscreteMdp mdp{p, dt, std::exp(-p.discount_rate * dt),
                        Grid1D(p.x_min, p.x_max, state_nodes),
                        Grid1D(p.u_min, p.u_max, action_nodes)};
        mdp.validate();
        return mdp;
    }

    void validate() const {
        problem.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("DiscreteMdp.dt: must be > 0");
        if (!(discount_factor > 0.0 && discount_factor < 1.0)) {
            throw std::invalid_argument("DiscreteMdp.discount_factor: must lie in (0, 1)");
        }
    }

    /// Unsnapped Euler successor, clamped to the state domain.
    double euler_next(double x, double u) const noexcept {
        return std::clamp(x + dt * problem.dynamics(x, u), problem.x_min, problem.x_max);
    }

    double step_cost(double x, double u) const noexcept { return dt * problem.running_cost(x, u); }
};

struct StepResult {
    double next_x;
    std::size_t next_index;
    double cost;
};

/// One Euler step followed by snapping to the nearest state node.
inline StepResult mdp_step(const DiscreteMdp& mdp, double x, double u) noexcept {
    const double raw = x + mdp.dt * mdp.problem.dynamics(x, u);
    const std::size_t k = mdp.state_grid.nearest(raw);
    return {mdp.state_grid.node(k), k, mdp.step_cost(x, u)};
}

}  // namespace lqlab
