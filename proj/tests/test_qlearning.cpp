#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lqlab/qlearning.hpp"

using namespace lqlab;

namespace {

DiscreteMdp small_mdp(double discount) {
    return DiscreteMdp{LqProblem{}, 1.0, discount, Grid1D(-2.0, 2.0, 5), Grid1D(-2.0, 2.0, 5)};
}

DiscreteMdp default_mdp() { return DiscreteMdp::from_continuous(LqProblem{}, 0.1, 161, 41); }

}  // namespace

TEST(QUpdate, ZeroRateLeavesEntry) {
    const auto mdp = small_mdp(0.9);
    QTable q(mdp.state_grid, mdp.action_grid, 3.5);
    q_update(q, mdp, 3, 3, 0.0);
    EXPECT_EQ(q(3, 3), 3.5);
}

TEST(QUpdate, UnitRateOnZeroTableStoresCost) {
    const auto mdp = default_mdp();
    QTable q(mdp.state_grid, mdp.action_grid);
    const auto r = q_update(q, mdp, 120, 7, 1.0);
    const double x = mdp.state_grid.node(120), u = mdp.action_grid.node(7);
    EXPECT_DOUBLE_EQ(q(120, 7), mdp.dt * (x * x + u * u));
    EXPECT_EQ(r.cost, q(120, 7));
}

TEST(QUpdate, HalfRateArithmetic) {
    const auto mdp = small_mdp(0.9);
    QTable q(mdp.state_grid, mdp.action_grid);
    // x = 1, u = 1: cost 1 * (1 + 1) = 2; target 2 + 0.9 * 0.
    const auto r = q_update(q, mdp, 3, 3, 0.5);
    EXPECT_DOUBLE_EQ(r.cost, 2.0);
    EXPECT_DOUBLE_EQ(q(3, 3), 1.0);
    EXPECT_EQ(r.next_state, 4u);
}

TEST(QUpdate, BootstrapsWithRowMinimum) {
    const auto mdp = small_mdp(0.9);
    QTable q(mdp.state_grid, mdp.action_grid);
    for (std::size_t a = 0; a < 5; ++a) q(4, a) = 10.0 - static_cast<double>(a);
    q(4, 1) = -3.0;
    const auto r = q_update(q, mdp, 3, 3, 1.0);
    EXPECT_DOUBLE_EQ(r.target, 2.0 + 0.9 * -3.0);
}

TEST(QUpdate, CoefficientsMatchUpdate) {
    const auto mdp = default_mdp();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> vals(-5.0, 5.0), lrs(-0.5, 2.0);
    std::uniform_int_distribution<std::size_t> st(0, 160), ac(0, 40);
    for (int k = 0; k < 200; ++k) {
        QTable q(mdp.state_grid, mdp.action_grid);
        for (auto& e : q.data()) e = vals(rng);
        const std::size_t s = st(rng), a = ac(rng);
        const double lr = lrs(rng);
        const auto step = mdp_step(mdp, mdp.state_grid.node(s), mdp.action_grid.node(a));
        const auto row = q.row(step.next_index);
        const double m = *std::min_element(row.begin(), row.end());
        const double before = q(s, a);
        q_update(q, mdp, s, a, lr);
        const auto c = q_update_coefficients(mdp, lr);
        ASSERT_NEAR(q(s, a), c.self * before + lr * step.cost + c.bootstrap * m, 1e-12);
    }
}

TEST(QUpdate, MonotoneStepRegime) {
    const auto mdp = default_mdp();
    for (double lr : {0.0, 0.5, 1.0}) {
        const auto c = q_update_coefficients(mdp, lr);
        EXPECT_TRUE(c.monotone()) << lr;
        EXPECT_EQ(probe_q_update_monotonicity(mdp, lr, 3, 400).n_violations, 0u) << lr;
    }
    const auto c = q_update_coefficients(mdp, 1.3);
    EXPECT_LT(c.self, 0.0);
    EXPECT_GT(c.bootstrap, 0.0);
    EXPECT_GE(probe_q_update_monotonicity(mdp, 1.3, 3, 400).n_violations, 1u);
}

TEST(QTable, GreedyTieBreak) {
    const auto mdp = small_mdp(0.9);
    QTable q(mdp.state_grid, mdp.action_grid, 1.0);
    EXPECT_EQ(q.greedy_index(0), 2u);
    q(0, 0) = 0.0;
    q(0, 4) = 0.0;
    EXPECT_EQ(q.greedy_index(0), 0u);
    q(0, 1) = 0.0;
    EXPECT_EQ(q.greedy_index(0), 1u);
}

TEST(GreedyExtract, QuadraticRows) {
    const auto mdp = default_mdp();
    QTable q(mdp.state_grid, mdp.action_grid);
    for (std::size_t s = 0; s < q.n_states(); ++s) {
        for (std::size_t a = 0; a < q.n_actions(); ++a) {
            const double u = mdp.action_grid.node(a);
            q(s, a) = u * u;
        }
    }
    const auto [v, u] = greedy_extract(q);
    for (std::size_t s = 0; s < q.n_states(); ++s) {
        ASSERT_NEAR(v[s], 0.0, 1e-24);
        ASSERT_NEAR(u[s], 0.0, 1e-15);
    }
    const auto [v0, u0] = greedy_extract(QTable(mdp.state_grid, mdp.action_grid, 2.0));
    for (std::size_t s = 0; s < q.n_states(); ++s) {
        ASSERT_EQ(v0[s], 2.0);
        ASSERT_NEAR(u0[s], 0.0, 1e-15);
    }
}

TEST(GreedyExtract, OneStepTargetPolicy) {
    const LqProblem p;
    const auto sol = riccati_solve(p);
    const auto mdp = DiscreteMdp::from_continuous(p, 0.1, 4001, 81);
    QTable q(mdp.state_grid, mdp.action_grid);
    for (std::size_t s = 0; s < q.n_states(); ++s) {
        for (std::size_t a = 0; a < q.n_actions(); ++a) {
            const auto step = mdp_step(mdp, mdp.state_grid.node(s), mdp.action_grid.node(a));
            q(s, a) = step.cost + mdp.discount_factor * analytic_value(sol, step.next_x);
        }
    }
    // Unsnapped minimizer of dt (x^2 + u^2) + g G (x (1 + a dt) + dt u)^2.
    const double g = mdp.discount_factor * sol.gamma_coef;
    const double gain = g * (1.0 + p.drift * mdp.dt) / (1.0 + g * mdp.dt);
    const auto [v, u] = greedy_extract(q);
    const auto r = interior_range(q.n_states(), 2.0 / 3.0);
    for (std::size_t s = r.first; s < r.last; s += 3) {
        ASSERT_NEAR(u[s], -gain * mdp.state_grid.node(s), mdp.action_grid.dx()) << s;
    }
}

TEST(Rollout, TrivialCases) {
    const auto mdp = default_mdp();
    const PolicyField zero(mdp.state_grid);
    EXPECT_EQ(rollout_return(mdp, zero, 0.0, 100), 0.0);
    EXPECT_EQ(rollout_return(mdp, zero, 1.0, 0), 0.0);
}

TEST(Rollout, AnalyticPolicyApproachesContinuousValue) {
    const LqProblem p;
    const auto sol = riccati_solve(p);
    // Snapping stalls the state once a step moves it less than dx / 2, so dx
    // must be small against dt.
    const auto mdp = DiscreteMdp::from_continuous(p, 0.01, 40001, 81);
    const auto pi = PolicyField::sample(mdp.state_grid, [&](double x) { return analytic_policy(sol, x); });
    const double ret = rollout_return(mdp, pi, 1.0, 3000);
    EXPECT_NEAR(ret, analytic_value(sol, 1.0), 0.02);
}

TEST(SynchronousSweep, ContractsAtDiscountRate) {
    const auto mdp = DiscreteMdp::from_continuous(LqProblem{}, 0.1, 41, 21);
    QTable q(mdp.state_grid, mdp.action_grid);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> vals(-3.0, 3.0);
    for (auto& e : q.data()) e = vals(rng);
    QTable prev = synchronous_sweep(q, mdp, 1.0);
    double last = sup_distance(q.data(), prev.data());
    for (int k = 0; k < 60; ++k) {
        QTable next = synchronous_sweep(prev, mdp, 1.0);
        const double d = sup_distance(prev.data(), next.data());
        ASSERT_LE(d, mdp.discount_factor * last * (1.0 + 1e-12) + 1e-15) << k;
        last = d;
        prev = std::move(next);
    }
}

TEST(TabularSolve, MatchesSynchronousSweepFixedPoint) {
    const auto mdp = DiscreteMdp::from_continuous(LqProblem{}, 0.1, 41, 21);
    const auto sol = tabular_value_iteration(mdp, 1e-13);
    ASSERT_TRUE(sol.converged);
    QTable q(mdp.state_grid, mdp.action_grid);
    for (int k = 0; k < 600; ++k) q = synchronous_sweep(q, mdp, 1.0);
    const auto [v, u] = greedy_extract(q);
    EXPECT_LE(sup_distance(v.values(), sol.value.values()), 1e-10);
    EXPECT_EQ(u, sol.policy);
}

TEST(TabularSolve, FineGridCurvatureNearDiscreteRiccati) {
    const LqProblem p;
    const double dt = 0.1;
    const auto mdp = DiscreteMdp::from_continuous(p, dt, 1601, 401);
    const auto sol = tabular_value_iteration(mdp, 1e-12);
    ASSERT_TRUE(sol.converged);
    // Unconstrained discrete Riccati fixed point by iteration.
    const double g = mdp.discount_factor, a = 1.0 + p.drift * dt;
    double P = 0.0;
    for (int k = 0; k < 10000; ++k) P = dt + g * P * a * a - (g * P * a * dt) * (g * P * a * dt) / (dt + g * P * dt * dt);
    EXPECT_NEAR(quadratic_coefficient(sol.value, 2.0 / 3.0), P, 0.02 * P);
}

TEST(Train, DeterministicPerSeed) {
    const auto mdp = default_mdp();
    QLearnConfig cfg;
    cfg.n_episodes = 300;
    cfg.seed = 9;
    const auto a = train(mdp, cfg);
    const auto b = train(mdp, cfg);
    EXPECT_EQ(a.table, b.table);
    ASSERT_EQ(a.log.size(), b.log.size());
    cfg.seed = 10;
    EXPECT_FALSE(train(mdp, cfg).table == a.table);
}

TEST(Train, LogAndStatus) {
    const auto mdp = default_mdp();
    QLearnConfig cfg;
    cfg.n_episodes = 200;
    const auto r = train(mdp, cfg);
    EXPECT_EQ(r.status, SolveStatus::Converged);
    EXPECT_EQ(r.episodes_run, 200u);
    ASSERT_EQ(r.log.size(), 200u);
    EXPECT_EQ(r.log.front().episode, 0u);
    EXPECT_FALSE(r.trip_iteration.has_value());
}

TEST(Train, PerVisitScheduleStaysBounded) {
    const auto mdp = default_mdp();
    QLearnConfig cfg;
    cfg.learning_rate = LearningRate::per_visit();
    cfg.n_episodes = 1000;
    const auto r = train(mdp, cfg);
    EXPECT_EQ(r.status, SolveStatus::Converged);
    EXPECT_LT(r.log.back().max_abs_q, 100.0);
}

TEST(Train, LargeStepDivergesWhereSmallStepDoesNot) {
    const auto mdp = default_mdp();
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        QLearnConfig big;
        big.learning_rate = LearningRate::constant(1.8);
        big.seed = seed;
        const auto rb = train(mdp, big);
        if (rb.status != SolveStatus::Diverged) continue;
        ASSERT_TRUE(rb.trip_iteration.has_value());
        EXPECT_GT(rb.log.back().max_abs_q, 1e6);
        QLearnConfig small = big;
        small.learning_rate = LearningRate::constant(0.8);
        EXPECT_EQ(train(mdp, small).status, SolveStatus::Converged) << seed;
    }
}

TEST(QLearnConfig, Validation) {
    QLearnConfig cfg;
    cfg.epsilon = 1.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.epsilon = 0.1;
    cfg.n_episodes = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
