#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "lqlab/experiment/config.hpp"
#include "lqlab/experiment/csv.hpp"
#include "lqlab/experiment/svg.hpp"
#include "lqlab/hjb.hpp"
#include "lqlab/linear_fa.hpp"
#include "lqlab/monotone.hpp"
#include "lqlab/qlearning.hpp"

namespace lqlab::experiment {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDiverged = 2;
inline constexpr int kExitNotConverged = 3;

inline int exit_code_for(SolveStatus s) noexcept {
    switch (s) {
        case SolveStatus::Converged: return kExitOk;
        case SolveStatus::Diverged: return kExitDiverged;
        case SolveStatus::NotConverged: return kExitNotConverged;
    }
    return kExitNotConverged;
}

/// Summary of one experiment run, also written as report.json.
struct RunRecord {
    std::string config_hash;
    ExperimentKind kind = ExperimentKind::HjbVi;
    SolveStatus status = SolveStatus::NotConverged;
    std::optional<double> sup_error;
    std::optional<double> relative_sup_error;
    std::optional<double> policy_slope;
    std::optional<std::size_t> trip_iteration;
    std::size_t iterations = 0;
    double wall_clock_seconds = 0.0;
    nlohmann::json details = nlohmann::json::object();

    bool converged() const noexcept { return status == SolveStatus::Converged; }
    int exit_code() const noexcept { return exit_code_for(status); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config_hash"] = config_hash;
        j["experiment"] = to_string(kind);
        j["status"] = to_string(status);
        j["converged"] = converged();
        j["sup_error"] = sup_error ? nlohmann::json(*sup_error) : nlohmann::json();
        j["relative_sup_error"] = relative_sup_error ? nlohmann::json(*relative_sup_error) : nlohmann::json();
        j["policy_slope"] = policy_slope ? nlohmann::json(*policy_slope) : nlohmann::json();
        j["trip_iteration"] = trip_iteration ? nlohmann::json(*trip_iteration) : nlohmann::json();
        j["iterations"] = iterations;
        j["wall_clock_seconds"] = wall_clock_seconds;
        j["details"] = details;
        return j;
    }
};

namespace detail {

inline void write_fields(const fs::path& dir, const ValueField& v, const PolicyField& u, const RiccatiSolution& sol,
                         const std::string& title) {
    const auto& grid = v.grid();
    std::vector<double> xs = grid.nodes(), av(grid.size()), ap(grid.size());
    {
        CsvWriter csv((dir / "fields.csv").string(), {"node", "x", "value", "policy", "analytic_value", "analytic_policy"});
        for (std::size_t i = 0; i < grid.size(); ++i) {
            av[i] = analytic_value(sol, xs[i]);
            ap[i] = analytic_policy(sol, xs[i]);
            csv.row({i, xs[i], v[i], u[i], av[i], ap[i]});
        }
    }
    write_text((dir / "value.svg").string(), overlay_plot_svg(title + ": value function", "x", xs, v.values(), av));
    write_text((dir / "policy.svg").string(), overlay_plot_svg(title + ": policy", "x", xs, u.values(), ap));
}

inline void write_convergence_log(const fs::path& dir, const ConvergenceLog& log) {
    {
        CsvWriter csv((dir / "log.csv").string(), {"iteration", "residual", "sup_norm"});
        for (const auto& r : log.rows) csv.row({r.iteration, r.residual, r.sup_norm});
    }
    if (!log.policy_changes.empty()) {
        CsvWriter csv((dir / "policy_changes.csv").string(), {"round", "max_policy_change"});
        for (std::size_t k = 0; k < log.policy_changes.size(); ++k) csv.row({k + 1, log.policy_changes[k]});
    }
}

inline void fill_value_metrics(RunRecord& rec, const ValueField& v, const PolicyField& u, const RiccatiSolution& sol,
                               double fraction) {
    rec.sup_error = sup_error(v, sol, fraction);
    rec.relative_sup_error = relative_sup_error(v, sol, fraction);
    rec.policy_slope = policy_slope(u, fraction);
}

inline void run_hjb(const ExperimentConfig& cfg, const fs::path& dir, RunRecord& rec, bool policy_iter) {
    const auto p = cfg.problem();
    const auto grid = cfg.hjb_grid();
    const auto scheme = cfg.scheme();
    const auto sol = riccati_solve(p);
    const HjbResult res = policy_iter
                              ? policy_iteration(p, grid, scheme, PolicyField(grid, cfg.number("scheme.initial_policy")))
                              : value_iteration(p, grid, scheme);
    write_convergence_log(dir, res.log);
    write_fields(dir, res.value, res.policy, sol, policy_iter ? "policy iteration" : "value iteration");
    rec.status = res.status;
    rec.trip_iteration = res.trip_iteration;
    rec.iterations = res.iterations;
    fill_value_metrics(rec, res.value, res.policy, sol, cfg.number("metrics.interior_fraction"));
    rec.details["gamma"] = sol.gamma_coef;
    rec.details["relaxation_rate"] = scheme.relaxation_rate;
    rec.details["dx"] = grid.dx();
    rec.details["n_nodes"] = grid.size();
    rec.details["differencing"] = to_string(scheme.differencing);
    if (policy_iter) rec.details["improvement_rounds"] = res.log.policy_changes.size();
}

inline void run_qlearn(const ExperimentConfig& cfg, const fs::path& dir, RunRecord& rec) {
    const auto mdp = cfg.mdp();
    const auto q = cfg.qlearn();
    const auto sol = riccati_solve(mdp.problem);
    const auto res = train(mdp, q);
    {
        CsvWriter csv((dir / "log.csv").string(), {"episode", "max_abs_q", "sup_error"});
        for (const auto& r : res.log) csv.row({r.episode, r.max_abs_q, r.sup_error});
    }
    const auto [v, u] = greedy_extract(res.table);
    write_fields(dir, v, u, sol, "Q-learning");
    rec.status = res.status;
    rec.trip_iteration = res.trip_iteration;
    rec.iterations = res.episodes_run;
    fill_value_metrics(rec, v, u, sol, q.interior_fraction);
    rec.details["gamma"] = sol.gamma_coef;
    rec.details["discount_factor"] = mdp.discount_factor;
    rec.details["max_abs_q"] = sup_norm(res.table.data());
}

inline void run_linfa(const ExperimentConfig& cfg, const fs::path& dir, RunRecord& rec) {
    const auto mdp = cfg.mdp();
    const auto sol = riccati_solve(mdp.problem);
    const auto res = fa_train(mdp, cfg.fa_rule(), static_cast<std::size_t>(cfg.integer("fa.n_steps")), cfg.seed(),
                              cfg.fa_options());
    {
        CsvWriter csv((dir / "log.csv").string(), {"step", "weight_norm", "probe_residual"});
        for (const auto& r : res.log) csv.row({r.step, r.weight_norm, r.probe_residual});
    }
    const auto& p = mdp.problem;
    ValueField v(mdp.state_grid);
    PolicyField u(mdp.state_grid);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = mdp.state_grid.node(i);
        u[i] = greedy_action(res.weights, x, p.u_min, p.u_max);
        v[i] = q_value(res.weights, x, u[i]);
    }
    write_fields(dir, v, u, sol, "linear Q approximation");
    rec.status = res.status;
    rec.trip_iteration = res.trip_iteration;
    rec.iterations = res.log.empty() ? 0 : res.log.back().step;
    fill_value_metrics(rec, v, u, sol, cfg.number("metrics.interior_fraction"));
    rec.details["weights"] = res.weights.w;
    rec.details["initial_probe_residual"] = res.log.front().probe_residual;
    rec.details["final_probe_residual"] = res.log.back().probe_residual;
}

inline nlohmann::json report_json(const MonotonicityReport& r) {
    nlohmann::json j;
    j["n_pairs_tested"] = r.n_pairs_tested;
    j["n_violations"] = r.n_violations;
    j["worst_violation"] = r.worst_violation;
    j["violating_node"] = r.violating_node ? nlohmann::json(*r.violating_node) : nlohmann::json();
    return j;
}

/// Monotonicity reports for the configured scheme around the analytic value.
inline void run_probe(const ExperimentConfig& cfg, const fs::path& dir, RunRecord& rec) {
    const auto p = cfg.problem();
    const auto grid = cfg.hjb_grid();
    const auto scheme = cfg.scheme();
    const auto sol = riccati_solve(p);
    const auto v = ValueField::sample(grid, [&](double x) { return analytic_value(sol, x); });
    const auto coeffs = coefficient_check(p, grid, scheme, v);
    {
        CsvWriter csv((dir / "coefficients.csv").string(),
                      {"node", "x", "u_star", "c_minus", "c_center", "c_plus", "mesh_bound"});
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& c = coeffs.coefficients[i];
            const double bound = scheme.relaxation_rate > p.discount_rate
                                     ? monotone_mesh_bound(p, scheme, grid.node(i), coeffs.controls[i])
                                     : std::numeric_limits<double>::infinity();
            csv.row({i, grid.node(i), coeffs.controls[i], c.c_minus, c.c_center, c.c_plus, bound});
        }
    }
    const auto n_pairs = static_cast<std::size_t>(cfg.integer("probe.n_pairs"));
    const FrozenPolicyOperator frozen(p, scheme, PolicyField(grid, coeffs.controls));
    const SchemeOperator full(p, grid, scheme);
    std::vector<std::size_t> all_nodes(grid.size());
    for (std::size_t i = 0; i < all_nodes.size(); ++i) all_nodes[i] = i;

    const auto frozen_random = probe_operator_monotonicity(frozen, grid, cfg.seed(), n_pairs);
    const auto full_random = probe_operator_monotonicity(full, grid, cfg.seed(), n_pairs);
    const auto frozen_bumps = probe_single_node_bumps(frozen, v, all_nodes);

    nlohmann::json violations = nlohmann::json::array();
    for (const auto& viol : coeffs.violations) {
        violations.push_back({{"node", viol.node}, {"coefficient", viol.coefficient}, {"value", viol.value}});
    }
    rec.details["differencing"] = to_string(scheme.differencing);
    rec.details["relaxation_rate"] = scheme.relaxation_rate;
    rec.details["coefficient_violations"] = coeffs.violations.size();
    rec.details["coefficient_violation_list"] = violations;
    rec.details["frozen_policy_random_pairs"] = report_json(frozen_random);
    rec.details["full_operator_random_pairs"] = report_json(full_random);
    rec.details["frozen_policy_single_node_bumps"] = report_json(frozen_bumps);
    rec.status = SolveStatus::Converged;
}

}  // namespace detail

/// Runs one non-sweep experiment, writing its artifacts into `dir`.
inline RunRecord run_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
    cfg.validate();
    fs::create_directories(dir);
    RunRecord rec;
    rec.config_hash = cfg.hash_hex();
    rec.kind = cfg.kind();
    const auto start = std::chrono::steady_clock::now();
    switch (rec.kind) {
        case ExperimentKind::HjbVi: detail::run_hjb(cfg, dir, rec, false); break;
        case ExperimentKind::HjbPi: detail::run_hjb(cfg, dir, rec, true); break;
        case ExperimentKind::QLearn: detail::run_qlearn(cfg, dir, rec); break;
        case ExperimentKind::LinFa: detail::run_linfa(cfg, dir, rec); break;
        case ExperimentKind::Probe: detail::run_probe(cfg, dir, rec); break;
        case ExperimentKind::Sweep: throw ConfigError("experiment", "use run_sweep for sweep configs");
    }
    rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text((dir / "report.json").string(), rec.to_json().dump(2) + "\n");
    return rec;
}

struct SweepRow {
    double value;
    RunRecord record;
};

/// One run per value of `param`, each in its own subdirectory with seed
/// base_seed + index. Rows come back (and are written) in input order.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& experiment,
                                       const std::string& param, const std::vector<double>& values,
                                       const fs::path& dir, std::size_t jobs = 1) {
    if (values.empty()) throw ConfigError("sweep.values", "must not be empty");
    if (!base.is_numeric(param)) throw ConfigError("sweep.param", "'" + param + "' is not a numeric config key");

    std::vector<ExperimentConfig> configs;
    for (std::size_t k = 0; k < values.size(); ++k) {
        ExperimentConfig c = base;
        c.set("experiment", experiment);
        c.set(param, values[k]);
        if (param != "seed") c.set("seed", static_cast<std::int64_t>(base.seed() + k));
        c.validate();
        configs.push_back(std::move(c));
    }
    fs::create_directories(dir);

    std::vector<SweepRow> rows(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < values.size(); k = next++) {
            rows[k] = {values[k], run_experiment(configs[k], dir / ("run_" + std::to_string(k)))};
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, values.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    CsvWriter csv((dir / "sweep.csv").string(), {"value", "converged", "sup_error", "trip_iteration", "status"});
    for (const auto& r : rows) {
        csv.row({r.value, r.record.converged(), r.record.sup_error, r.record.trip_iteration, to_string(r.record.status)});
    }
    return rows;
}

/// Sweep described entirely by the sweep.* keys of `cfg`.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const fs::path& dir) {
    cfg.validate();
    return run_sweep(cfg, cfg.string("sweep.experiment"), cfg.string("sweep.param"), cfg.numbers("sweep.values"), dir,
                     static_cast<std::size_t>(cfg.integer("sweep.jobs")));
}

}  // namespace lqlab::experiment
