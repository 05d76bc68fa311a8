#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lqlab/divergence.hpp"
#include "lqlab/grid.hpp"
#include "lqlab/lq_model.hpp"
#include "lqlab/monotone.hpp"

namespace lqlab {

/// Action values on the (state node, action node) product grid, row-major
/// by state.
class QTable {
public:
    QTable(Grid1D states, Grid1D actions, double fill = 0.0)
        : states_(states), actions_(actions), q_(states.size() * actions.size(), fill) {}

    const Grid1D& state_grid() const noexcept { return states_; }
    const Grid1D& action_grid() const noexcept { return actions_; }
    std::size_t n_states() const noexcept { return states_.size(); }
    std::size_t n_actions() const noexcept { return actions_.size(); }

    double& operator()(std::size_t s, std::size_t a) noexcept { return q_[s * actions_.size() + a]; }
    double operator()(std::size_t s, std::size_t a) const noexcept { return q_[s * actions_.size() + a]; }

    std::span<const double> row(std::size_t s) const noexcept {
        return std::span<const double>(q_).subspan(s * actions_.size(), actions_.size());
    }
    std::span<const double> data() const noexcept { return q_; }
    std::span<double> data() noexcept { return q_; }

    /// Minimizing action in row s; ties go to the smaller |u|, then the
    /// smaller index.
    std::size_t greedy_index(std::size_t s) const noexcept {
        const auto r = row(s);
        std::size_t best = 0;
        for (std::size_t a = 1; a < r.size(); ++a) {
            if (r[a] < r[best] ||
                (r[a] == r[best] && std::abs(actions_.node(a)) < std::abs(actions_.node(best)))) {
                best = a;
            }
        }
        return best;
    }

    double row_min(std::size_t s) const noexcept { return (*this)(s, greedy_index(s)); }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    Grid1D states_;
    Grid1D actions_;
    std::vector<double> q_;
};

/// Constant step, or 1 / (1 + n) where n counts earlier updates of the pair.
struct LearningRate {
    enum class Kind { Constant, PerVisit };
    Kind kind = Kind::Constant;
    double value = 0.8;

    static LearningRate constant(double c) { return {Kind::Constant, c}; }
    static LearningRate per_visit() { return {Kind::PerVisit, 1.0}; }

    double at(std::size_t visits) const noexcept {
        return kind == Kind::Constant ? value : 1.0 / (1.0 + static_cast<double>(visits));
    }
};

struct QLearnConfig {
    LearningRate learning_rate;
    double epsilon = 0.1;
    std::size_t n_episodes = 5000;
    std::size_t episode_len = 50;
    std::uint64_t seed = 0;
    double divergence_threshold = DivergenceMonitor::kDefaultThreshold;
    /// Central share of states used for the logged sup error.
    double interior_fraction = 2.0 / 3.0;

    void validate() const {
        auto fail = [](const std::string& field, const std::string& what) {
            throw std::invalid_argument("QLearnConfig." + field + ": " + what);
        };
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("epsilon", "must lie in [0, 1]");
        if (n_episodes < 1) fail("n_episodes", "must be >= 1");
        if (episode_len < 1) fail("episode_len", "must be >= 1");
        if (!std::isfinite(learning_rate.value)) fail("learning_rate", "must be finite");
        if (!(divergence_threshold > 0.0)) fail("divergence_threshold", "must be > 0");
    }
};

struct TransitionResult {
    std::size_t next_state;
    double cost;
    double target;
};

/// Q(s, a) <- (1 - lr) Q(s, a) + lr [cost + discount * min_b Q(s', b)].
inline TransitionResult q_update(QTable& qt, const DiscreteMdp& mdp, std::size_t s, std::size_t a,
                                 double lr) noexcept {
    const auto step = mdp_step(mdp, qt.state_grid().node(s), qt.action_grid().node(a));
    const double target = step.cost + mdp.discount_factor * qt.row_min(step.next_index);
    double& q = qt(s, a);
    q = (1.0 - lr) * q + lr * target;
    return {step.next_index, step.cost, target};
}

/// Weights of the two Q entries one update reads: the updated entry itself
/// and the bootstrap minimum of the successor row.
struct QUpdateCoefficients {
    double self;
    double bootstrap;

    bool monotone() const noexcept { return self >= 0.0 && bootstrap >= 0.0; }
};

inline QUpdateCoefficients q_update_coefficients(const DiscreteMdp& mdp, double lr) noexcept {
    return {1.0 - lr, lr * mdp.discount_factor};
}

/// Ordered-pair probe of the frozen (s, a) update as a map from table to
/// the new Q(s, a). Pair k draws a random table and (s, a), then bumps one
/// entry: Q(s, a) itself on even k, an entry of the successor row on odd k.
inline MonotonicityReport probe_q_update_monotonicity(const DiscreteMdp& mdp, double lr, std::uint64_t seed,
                                                      std::size_t n_pairs, double scale = 10.0) {
    MonotonicityReport report;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        auto rng = detail::stream_for(seed, k);
        std::uniform_real_distribution<double> value(-scale, scale);
        std::uniform_real_distribution<double> bump(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> state(0, mdp.state_grid.size() - 1);
        std::uniform_int_distribution<std::size_t> action(0, mdp.action_grid.size() - 1);
        QTable base(mdp.state_grid, mdp.action_grid);
        for (auto& q : base.data()) q = value(rng);
        const std::size_t s = state(rng);
        const std::size_t a = action(rng);
        QTable bumped = base;
        if (k % 2 == 0) {
            bumped(s, a) += bump(rng);
        } else {
            const auto next = mdp_step(mdp, mdp.state_grid.node(s), mdp.action_grid.node(a)).next_index;
            bumped(next, action(rng)) += bump(rng);
        }
        q_update(base, mdp, s, a, lr);
        q_update(bumped, mdp, s, a, lr);
        const double lo = base(s, a);
        const double hi = bumped(s, a);
        detail::record_pair(report, std::span<const double>(&lo, 1), std::span<const double>(&hi, 1));
    }
    return report;
}

/// Applies the update to every (s, a) at once, reading only `qt`.
inline QTable synchronous_sweep(const QTable& qt, const DiscreteMdp& mdp, double lr) {
    std::vector<double> mins(qt.n_states());
    for (std::size_t s = 0; s < qt.n_states(); ++s) mins[s] = qt.row_min(s);
    QTable out = qt;
    for (std::size_t s = 0; s < qt.n_states(); ++s) {
        for (std::size_t a = 0; a < qt.n_actions(); ++a) {
            const auto step = mdp_step(mdp, qt.state_grid().node(s), qt.action_grid().node(a));
            out(s, a) = (1.0 - lr) * qt(s, a) + lr * (step.cost + mdp.discount_factor * mins[step.next_index]);
        }
    }
    return out;
}

/// Per state: value = min over actions, policy = the greedy action.
inline std::pair<ValueField, PolicyField> greedy_extract(const QTable& qt) {
    ValueField v(qt.state_grid());
    PolicyField u(qt.state_grid());
    for (std::size_t s = 0; s < qt.n_states(); ++s) {
        const std::size_t a = qt.greedy_index(s);
        v[s] = qt(s, a);
        u[s] = qt.action_grid().node(a);
    }
    return {std::move(v), std::move(u)};
}

/// Discounted cost of following `pi` (indexed by state node) from x0.
inline double rollout_return(const DiscreteMdp& mdp, const PolicyField& pi, double x0, std::size_t horizon) {
    std::size_t s = mdp.state_grid.nearest(x0);
    double x = x0;
    double total = 0.0;
    double discount = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        const auto step = mdp_step(mdp, x, pi[s]);
        total += discount * step.cost;
        discount *= mdp.discount_factor;
        x = step.next_x;
        s = step.next_index;
    }
    return total;
}

struct TabularSolution {
    ValueField value;
    PolicyField policy;
    std::size_t sweeps = 0;
    bool converged = false;
};

/// Synchronous value iteration V(s) <- min_a [cost + discount V(s')] on the
/// snapped MDP, until the sup change drops below tol.
inline TabularSolution tabular_value_iteration(const DiscreteMdp& mdp, double tol = 1e-12,
                                               std::size_t max_sweeps = 100000) {
    mdp.validate();
    const auto& xs = mdp.state_grid;
    const auto& us = mdp.action_grid;
    std::vector<std::size_t> next(xs.size() * us.size());
    std::vector<double> cost(next.size());
    for (std::size_t s = 0; s < xs.size(); ++s) {
        for (std::size_t a = 0; a < us.size(); ++a) {
            const auto step = mdp_step(mdp, xs.node(s), us.node(a));
            next[s * us.size() + a] = step.next_index;
            cost[s * us.size() + a] = step.cost;
        }
    }
    TabularSolution out{ValueField(xs), PolicyField(xs), 0, false};
    std::vector<double> v(xs.size(), 0.0), w(xs.size());
    std::vector<std::size_t> best(xs.size(), 0);
    while (out.sweeps < max_sweeps) {
        ++out.sweeps;
        double change = 0.0;
        for (std::size_t s = 0; s < xs.size(); ++s) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < us.size(); ++a) {
                const std::size_t k = s * us.size() + a;
                const double q = cost[k] + mdp.discount_factor * v[next[k]];
                if (q < m || (q == m && std::abs(us.node(a)) < std::abs(us.node(best[s])))) {
                    m = q;
                    best[s] = a;
                }
            }
            w[s] = m;
            change = std::max(change, std::abs(m - v[s]));
        }
        v.swap(w);
        if (change < tol) {
            out.converged = true;
            break;
        }
    }
    for (std::size_t s = 0; s < xs.size(); ++s) {
        out.value[s] = v[s];
        out.policy[s] = us.node(best[s]);
    }
    return out;
}

/// Least-squares c in V(x) ~ c x^2 over the central share of nodes.
inline double quadratic_coefficient(const ValueField& v, double interior_fraction) {
    const auto r = interior_range(v.size(), interior_fraction);
    double num = 0.0, den = 0.0;
    for (std::size_t i = r.first; i < r.last; ++i) {
        const double x2 = v.grid().node(i) * v.grid().node(i);
        num += v[i] * x2;
        den += x2 * x2;
    }
    return den > 0.0 ? num / den : 0.0;
}

struct EpisodeLogRow {
    std::size_t episode;
    double max_abs_q;
    double sup_error;
};

struct QLearnResult {
    QTable table;
    std::vector<EpisodeLogRow> log;
    SolveStatus status = SolveStatus::Converged;
    /// Global update count at which the monitor tripped.
    std::optional<std::size_t> trip_iteration;
    std::size_t episodes_run = 0;
};

/// Epsilon-greedy trajectory Q-learning from uniformly drawn start states.
///
/// Status is Converged when every episode ran without tripping the monitor,
/// Diverged otherwise; training stops at the first trip.
inline QLearnResult train(const DiscreteMdp& mdp, const QLearnConfig& cfg) {
    mdp.validate();
    cfg.validate();
    const auto sol = riccati_solve(mdp.problem);
    QLearnResult out{QTable(mdp.state_grid, mdp.action_grid), {}, SolveStatus::Converged, std::nullopt, 0};
    QTable& qt = out.table;
    std::vector<std::size_t> visits(qt.data().size(), 0);
    DivergenceMonitor monitor(cfg.divergence_threshold);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> start(0, qt.n_states() - 1);
    std::uniform_int_distribution<std::size_t> any_action(0, qt.n_actions() - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::size_t updates = 0;

    for (std::size_t ep = 0; ep < cfg.n_episodes; ++ep) {
        std::size_t s = start(rng);
        for (std::size_t t = 0; t < cfg.episode_len; ++t) {
            const std::size_t a = coin(rng) < cfg.epsilon ? any_action(rng) : qt.greedy_index(s);
            std::size_t& n = visits[s * qt.n_actions() + a];
            const auto r = q_update(qt, mdp, s, a, cfg.learning_rate.at(n));
            ++n;
            ++updates;
            if (monitor.observe(qt(s, a), updates)) break;
            s = r.next_state;
        }
        out.episodes_run = ep + 1;
        auto [v, u] = greedy_extract(qt);
        out.log.push_back({ep, sup_norm(qt.data()), sup_error(v, sol, cfg.interior_fraction)});
        if (monitor.tripped()) {
            out.status = SolveStatus::Diverged;
            out.trip_iteration = monitor.trip_iteration();
            break;
        }
    }
    return out;
}

}  // namespace lqlab
