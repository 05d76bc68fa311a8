// lqlab: batch front end for the HJB solvers, Q-learning and linear-FA
// experiments.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lqlab/experiment/config.hpp"
#include "lqlab/experiment/runner.hpp"
#include "lqlab/lq_model.hpp"

namespace {

namespace ex = lqlab::experiment;
namespace fs = std::filesystem;

constexpr const char* kFooter = R"(Exit codes: 0 ok, 1 config error, 2 diverged, 3 not converged.

Output files (CSV: comma-separated, LF line endings, header row):
  log.csv            hjb-vi/hjb-pi: iteration,residual,sup_norm
                     qlearn:        episode,max_abs_q,sup_error
                     linfa:         step,weight_norm,probe_residual
  policy_changes.csv hjb-pi: round,max_policy_change
  fields.csv         node,x,value,policy,analytic_value,analytic_policy
  coefficients.csv   probe: node,x,u_star,c_minus,c_center,c_plus,mesh_bound
  sweep.csv          value,converged,sup_error,trip_iteration,status
  report.json        run summary; value.svg, policy.svg overlay plots

The output root defaults to $LQLAB_OUT, then ./lqlab_out.)";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ex::ConfigError("", "cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path output_dir(const std::string& flag, const ex::ExperimentConfig& cfg) {
    if (!flag.empty()) return flag;
    if (const auto dir = cfg.string("output.dir"); !dir.empty()) return dir;
    if (const char* env = std::getenv("LQLAB_OUT"); env && *env) return env;
    return "lqlab_out";
}

int report_config_error(const std::string& path, const ex::ConfigError& e) {
    std::cerr << path;
    if (e.line() != 0) std::cerr << ':' << e.line();
    std::cerr << ": config error";
    if (!e.field().empty()) std::cerr << " in field '" << e.field() << '\'';
    std::cerr << ": " << e.what() << '\n';
    return ex::kExitConfig;
}

ex::ExperimentConfig load(const std::string& path, std::optional<std::int64_t> seed) {
    auto cfg = ex::ExperimentConfig::parse(read_file(path));
    if (seed) {
        cfg.set("seed", *seed);
        cfg.validate();
    }
    return cfg;
}

void print_record(const ex::RunRecord& rec, const fs::path& dir) {
    std::cout << ex::to_string(rec.kind) << ": " << lqlab::to_string(rec.status);
    if (rec.sup_error) std::cout << ", sup_error " << ex::format_number(*rec.sup_error);
    if (rec.trip_iteration) std::cout << ", tripped at " << *rec.trip_iteration;
    std::cout << " -> " << dir.string() << '\n';
}

int print_sweep(const std::vector<ex::SweepRow>& rows, const fs::path& dir) {
    for (const auto& r : rows) {
        std::cout << ex::format_number(r.value) << ": " << lqlab::to_string(r.record.status);
        if (r.record.sup_error) std::cout << ", sup_error " << ex::format_number(*r.record.sup_error);
        std::cout << '\n';
    }
    std::cout << "summary -> " << (dir / "sweep.csv").string() << '\n';
    return ex::kExitOk;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw ex::ConfigError("--values", "not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lqlab: monotone and non-monotone dynamic programming on the 1D LQ problem"};
    app.footer(kFooter);
    app.require_subcommand(1);

    std::string config_path, out_flag, param, values_text;
    std::optional<std::int64_t> seed;
    std::size_t jobs = 1;
    double alpha = 0.5, beta = 1.0;

    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--out", out_flag, "Output directory");
    run->add_option("--seed", seed, "Override the config seed");

    auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a numeric config key");
    sweep->add_option("config", config_path, "Config file")->required();
    sweep->add_option("--param", param, "Dotted config key to vary")->required();
    sweep->add_option("--values", values_text, "Comma-separated values")->required();
    sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    sweep->add_option("--out", out_flag, "Output directory");
    sweep->add_option("--seed", seed, "Base seed (run k uses seed + k)");

    auto* probe = app.add_subcommand("probe", "Monotonicity reports for the configured scheme");
    probe->add_option("config", config_path, "Config file")->required();
    probe->add_option("--out", out_flag, "Output directory");

    auto* analytic = app.add_subcommand("analytic", "Print the Riccati coefficient and its residual");
    analytic->add_option("--alpha", alpha, "Drift")->required();
    analytic->add_option("--beta", beta, "Discount rate")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analytic) {
            lqlab::LqProblem p;
            p.drift = alpha;
            p.discount_rate = beta;
            const auto sol = lqlab::riccati_solve(p);
            std::cout << "gamma " << ex::format_number(sol.gamma_coef) << '\n'
                      << "residual " << ex::format_number(lqlab::riccati_residual(p, sol.gamma_coef)) << '\n'
                      << "policy u = -" << ex::format_number(sol.gamma_coef) << " x\n";
            return ex::kExitOk;
        }

        auto cfg = load(config_path, seed);
        if (*probe) {
            cfg.set("experiment", std::string("probe"));
            cfg.validate();
        }
        const fs::path dir = output_dir(out_flag, cfg);

        if (*sweep) {
            const auto values = parse_values(values_text);
            if (values.empty()) throw ex::ConfigError("--values", "must list at least one value");
            const std::string experiment =
                cfg.kind() == ex::ExperimentKind::Sweep ? cfg.string("sweep.experiment") : ex::to_string(cfg.kind());
            return print_sweep(ex::run_sweep(cfg, experiment, param, values, dir, jobs), dir);
        }
        if (cfg.kind() == ex::ExperimentKind::Sweep) return print_sweep(ex::run_sweep(cfg, dir), dir);

        const auto rec = ex::run_experiment(cfg, dir);
        print_record(rec, dir);
        return rec.exit_code();
    } catch (const ex::ConfigError& e) {
        return report_config_error(config_path.empty() ? "lqlab" : config_path, e);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ex::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
