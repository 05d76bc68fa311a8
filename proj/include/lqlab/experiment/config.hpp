#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lqlab/hjb.hpp"
#include "lqlab/linear_fa.hpp"
#include "lqlab/lq_model.hpp"
#include "lqlab/qlearning.hpp"

namespace lqlab::experiment {

/// Validation failure tied to one config key (or to the file as a whole
/// when `field` is empty). `line` is 1-based and 0 when unknown.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message, std::size_t line = 0)
        : std::runtime_error(message), field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }
    void set_line(std::size_t line) noexcept { line_ = line; }

private:
    std::string field_;
    std::size_t line_;
};

enum class ExperimentKind { HjbVi, HjbPi, QLearn, LinFa, Probe, Sweep };

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_names() {
    static const std::vector<std::pair<std::string, ExperimentKind>> names = {
        {"hjb-vi", ExperimentKind::HjbVi}, {"hjb-pi", ExperimentKind::HjbPi},
        {"qlearn", ExperimentKind::QLearn}, {"linfa", ExperimentKind::LinFa},
        {"probe", ExperimentKind::Probe},   {"sweep", ExperimentKind::Sweep}};
    return names;
}

inline std::string to_string(ExperimentKind k) {
    for (const auto& [name, kind] : experiment_names()) {
        if (kind == k) return name;
    }
    return "unknown";
}

namespace detail {

using nlohmann::json;

enum class ValueType { Number, Integer, String, NumberList };

struct KeySpec {
    ValueType type;
    json fallback;
    std::function<void(const json&)> check;  // throws std::invalid_argument with a reason
};

inline std::function<void(const json&)> positive() {
    return [](const json& v) {
        if (!(v.get<double>() > 0.0)) throw std::invalid_argument("must be > 0");
    };
}

inline std::function<void(const json&)> non_negative() {
    return [](const json& v) {
        if (!(v.get<double>() >= 0.0)) throw std::invalid_argument("must be >= 0");
    };
}

inline std::function<void(const json&)> in_unit_interval() {
    return [](const json& v) {
        const double x = v.get<double>();
        if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("must lie in [0, 1]");
    };
}

inline std::function<void(const json&)> at_least(std::int64_t lo) {
    return [lo](const json& v) {
        if (v.get<std::int64_t>() < lo) throw std::invalid_argument("must be >= " + std::to_string(lo));
    };
}

inline std::function<void(const json&)> one_of(std::vector<std::string> choices) {
    return [choices](const json& v) {
        const auto s = v.get<std::string>();
        if (std::find(choices.begin(), choices.end(), s) == choices.end()) {
            std::string all;
            for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
            throw std::invalid_argument("must be one of: " + all);
        }
    };
}

inline std::vector<std::string> experiment_choices() {
    std::vector<std::string> out;
    for (const auto& [name, kind] : experiment_names()) out.push_back(name);
    return out;
}

/// Every accepted key with its type and default. Keys not listed here are
/// rejected.
inline const std::map<std::string, KeySpec>& schema() {
    static const std::map<std::string, KeySpec> keys = [] {
        std::map<std::string, KeySpec> k;
        const LqProblem p;
        const SchemeConfig s;
        const QLearnConfig q;
        k["experiment"] = {ValueType::String, "hjb-vi", one_of(experiment_choices())};
        k["seed"] = {ValueType::Integer, 0, at_least(0)};
        k["output.dir"] = {ValueType::String, "", nullptr};

        k["problem.drift"] = {ValueType::Number, p.drift, nullptr};
        k["problem.discount_rate"] = {ValueType::Number, p.discount_rate, positive()};
        k["problem.state_cost"] = {ValueType::Number, p.state_cost, positive()};
        k["problem.control_cost"] = {ValueType::Number, p.control_cost, positive()};
        k["problem.control_gain"] = {ValueType::Number, p.control_gain, nullptr};
        k["problem.x_min"] = {ValueType::Number, p.x_min, nullptr};
        k["problem.x_max"] = {ValueType::Number, p.x_max, nullptr};
        k["problem.u_min"] = {ValueType::Number, p.u_min, nullptr};
        k["problem.u_max"] = {ValueType::Number, p.u_max, nullptr};

        k["grid.dx"] = {ValueType::Number, 0.01, positive()};

        k["scheme.relaxation_rate"] = {ValueType::Number, 0.0, non_negative()};
        k["scheme.differencing"] = {ValueType::String, "upwind", one_of({"upwind", "downwind", "central"})};
        k["scheme.fixed_point_form"] = {ValueType::String, "consistent", one_of({"consistent", "literal"})};
        k["scheme.theta"] = {ValueType::Number, s.theta, positive()};
        k["scheme.max_iters"] = {ValueType::Integer, s.max_iters, at_least(1)};
        k["scheme.theta_v"] = {ValueType::Number, s.theta_v, positive()};
        k["scheme.theta_u"] = {ValueType::Number, s.theta_u, positive()};
        k["scheme.max_policy_evals"] = {ValueType::Integer, s.max_policy_evals, at_least(1)};
        k["scheme.max_policy_improvements"] = {ValueType::Integer, s.max_policy_improvements, at_least(1)};
        k["scheme.initial_policy"] = {ValueType::Number, 1.0, nullptr};

        k["monitor.threshold"] = {ValueType::Number, DivergenceMonitor::kDefaultThreshold, positive()};
        k["metrics.interior_fraction"] = {ValueType::Number, 2.0 / 3.0, [](const json& v) {
                                              const double f = v.get<double>();
                                              if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("must lie in (0, 1]");
                                          }};

        k["mdp.dt"] = {ValueType::Number, 0.1, positive()};
        k["mdp.state_nodes"] = {ValueType::Integer, 161, at_least(3)};
        k["mdp.action_nodes"] = {ValueType::Integer, 41, at_least(3)};

        k["qlearn.learning_rate"] = {ValueType::Number, 0.8, nullptr};
        k["qlearn.schedule"] = {ValueType::String, "constant", one_of({"constant", "per-visit"})};
        k["qlearn.epsilon"] = {ValueType::Number, q.epsilon, in_unit_interval()};
        k["qlearn.n_episodes"] = {ValueType::Integer, q.n_episodes, at_least(1)};
        k["qlearn.episode_len"] = {ValueType::Integer, q.episode_len, at_least(1)};

        k["fa.step_rule"] = {ValueType::String, "bound-scaled", one_of({"bound-scaled", "constant"})};
        k["fa.learning_rate"] = {ValueType::Number, 0.5, nullptr};
        k["fa.n_steps"] = {ValueType::Integer, 100000, at_least(0)};
        k["fa.log_every"] = {ValueType::Integer, 1000, at_least(1)};
        k["fa.probe_per_axis"] = {ValueType::Integer, 9, at_least(2)};

        k["probe.n_pairs"] = {ValueType::Integer, 1000, at_least(1)};

        k["sweep.experiment"] = {ValueType::String, "qlearn", one_of({"hjb-vi", "hjb-pi", "qlearn", "linfa"})};
        k["sweep.param"] = {ValueType::String, "", nullptr};
        k["sweep.values"] = {ValueType::NumberList, json::array(), nullptr};
        k["sweep.jobs"] = {ValueType::Integer, 1, at_least(1)};
        return k;
    }();
    return keys;
}

inline bool type_matches(ValueType t, const json& v) {
    switch (t) {
        case ValueType::Number: return v.is_number();
        case ValueType::Integer: return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<std::int64_t>(v.get<double>())));
        case ValueType::String: return v.is_string();
        case ValueType::NumberList:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); });
    }
    return false;
}

inline const char* type_name(ValueType t) {
    switch (t) {
        case ValueType::Number: return "a number";
        case ValueType::Integer: return "an integer";
        case ValueType::String: return "a string";
        case ValueType::NumberList: return "an array of numbers";
    }
    return "?";
}

/// 1-based line of the first occurrence of "key" in the source text, or 0.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find('"' + key + '"');
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Flat experiment config keyed by dotted names ("problem.drift",
/// "qlearn.epsilon", ...). Every known key is present after parsing, with
/// defaults filled in.
class ExperimentConfig {
public:
    using json = nlohmann::json;

    ExperimentConfig() {
        for (const auto& [key, spec] : detail::schema()) values_[key] = spec.fallback;
    }

    /// Parses and validates JSON text. `source` is only used for context in
    /// error messages.
    static ExperimentConfig parse(const std::string& text) {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            const auto upto = std::min<std::size_t>(e.byte, text.size());
            const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
            throw ConfigError("", std::string("malformed JSON: ") + e.what(), line);
        }
        if (!doc.is_object()) throw ConfigError("", "config must be a JSON object", 1);
        ExperimentConfig cfg;
        try {
            for (const auto& [key, value] : doc.items()) cfg.set(key, value);
            cfg.validate();
        } catch (ConfigError& e) {
            if (e.line() == 0 && !e.field().empty()) e.set_line(detail::line_of_key(text, e.field()));
            throw;
        }
        return cfg;
    }

    /// Sets one key after type and range checks. Does not re-run
    /// cross-field validation; call validate() after a batch of edits.
    void set(const std::string& key, const json& value) {
        const auto& keys = detail::schema();
        const auto it = keys.find(key);
        if (it == keys.end()) throw ConfigError(key, "unknown key");
        const auto& spec = it->second;
        if (!detail::type_matches(spec.type, value)) {
            throw ConfigError(key, std::string("must be ") + detail::type_name(spec.type));
        }
        json stored = value;
        if (spec.type == detail::ValueType::Integer) stored = static_cast<std::int64_t>(value.get<double>());
        if (spec.type == detail::ValueType::Number) stored = value.get<double>();
        if (spec.check) {
            try {
                spec.check(stored);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key, e.what());
            }
        }
        values_[key] = std::move(stored);
    }

    bool is_numeric(const std::string& key) const {
        const auto& keys = detail::schema();
        const auto it = keys.find(key);
        return it != keys.end() &&
               (it->second.type == detail::ValueType::Number || it->second.type == detail::ValueType::Integer);
    }

    double number(const std::string& key) const { return values_.at(key).get<double>(); }
    std::int64_t integer(const std::string& key) const { return values_.at(key).get<std::int64_t>(); }
    std::string string(const std::string& key) const { return values_.at(key).get<std::string>(); }
    std::vector<double> numbers(const std::string& key) const { return values_.at(key).get<std::vector<double>>(); }

    ExperimentKind kind() const {
        const auto name = string("experiment");
        for (const auto& [n, k] : experiment_names()) {
            if (n == name) return k;
        }
        throw ConfigError("experiment", "unknown experiment kind");
    }

    std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }

    LqProblem problem() const {
        LqProblem p;
        p.drift = number("problem.drift");
        p.discount_rate = number("problem.discount_rate");
        p.state_cost = number("problem.state_cost");
        p.control_cost = number("problem.control_cost");
        p.control_gain = number("problem.control_gain");
        p.x_min = number("problem.x_min");
        p.x_max = number("problem.x_max");
        p.u_min = number("problem.u_min");
        p.u_max = number("problem.u_max");
        return p;
    }

    Grid1D hjb_grid() const {
        const auto p = problem();
        return Grid1D::with_spacing(p.x_min, p.x_max, number("grid.dx"));
    }

    /// Scheme settings; a zero relaxation rate selects the monotone minimum
    /// for the HJB grid.
    SchemeConfig scheme() const {
        SchemeConfig s;
        const auto diff = string("scheme.differencing");
        s.differencing = diff == "upwind" ? Differencing::Upwind
                         : diff == "downwind" ? Differencing::Downwind
                                              : Differencing::Central;
        s.form = string("scheme.fixed_point_form") == "literal" ? FixedPointForm::Literal : FixedPointForm::Consistent;
        s.relaxation_rate = number("scheme.relaxation_rate");
        if (s.relaxation_rate == 0.0) s.relaxation_rate = min_monotone_relaxation_rate(problem(), hjb_grid());
        s.theta = number("scheme.theta");
        s.max_iters = static_cast<std::size_t>(integer("scheme.max_iters"));
        s.theta_v = number("scheme.theta_v");
        s.theta_u = number("scheme.theta_u");
        s.max_policy_evals = static_cast<std::size_t>(integer("scheme.max_policy_evals"));
        s.max_policy_improvements = static_cast<std::size_t>(integer("scheme.max_policy_improvements"));
        s.divergence_threshold = number("monitor.threshold");
        return s;
    }

    DiscreteMdp mdp() const {
        return DiscreteMdp::from_continuous(problem(), number("mdp.dt"),
                                            static_cast<std::size_t>(integer("mdp.state_nodes")),
                                            static_cast<std::size_t>(integer("mdp.action_nodes")));
    }

    QLearnConfig qlearn() const {
        QLearnConfig q;
        const double lr = number("qlearn.learning_rate");
        q.learning_rate = string("qlearn.schedule") == "per-visit" ? LearningRate::per_visit() : LearningRate::constant(lr);
        q.epsilon = number("qlearn.epsilon");
        q.n_episodes = static_cast<std::size_t>(integer("qlearn.n_episodes"));
        q.episode_len = static_cast<std::size_t>(integer("qlearn.episode_len"));
        q.seed = seed();
        q.divergence_threshold = number("monitor.threshold");
        q.interior_fraction = number("metrics.interior_fraction");
        return q;
    }

    FaStepRule fa_rule() const {
        const double lr = number("fa.learning_rate");
        return string("fa.step_rule") == "constant" ? FaStepRule::constant(lr) : FaStepRule::bound_scaled(lr);
    }

    FaTrainOptions fa_options() const {
        FaTrainOptions o;
        o.log_every = static_cast<std::size_t>(integer("fa.log_every"));
        o.divergence_threshold = number("monitor.threshold");
        o.probe_per_axis = static_cast<std::size_t>(integer("fa.probe_per_axis"));
        return o;
    }

    /// Cross-field checks, reported against the most specific key.
    void validate() const {
        const auto p = problem();
        if (!(p.x_min < 0.0 && 0.0 < p.x_max)) throw ConfigError("problem.x_min", "state domain must bracket 0");
        if (!(p.u_min < 0.0 && 0.0 < p.u_max)) throw ConfigError("problem.u_min", "control bounds must bracket 0");
        if (p.control_gain == 0.0) throw ConfigError("problem.control_gain", "must be nonzero");
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("problem", e.what());
        }
        const auto k = kind();
        const bool hjb = k == ExperimentKind::HjbVi || k == ExperimentKind::HjbPi || k == ExperimentKind::Probe ||
                         (k == ExperimentKind::Sweep && (string("sweep.experiment") == "hjb-vi" || string("sweep.experiment") == "hjb-pi"));
        if (hjb) {
            const double dx = number("grid.dx");
            if (std::llround((p.x_max - p.x_min) / dx) < 2) throw ConfigError("grid.dx", "grid needs at least 3 nodes");
            const double rate = number("scheme.relaxation_rate");
            if (rate != 0.0 && string("scheme.fixed_point_form") == "consistent" && !(rate > p.discount_rate)) {
                throw ConfigError("scheme.relaxation_rate", "must exceed problem.discount_rate");
            }
            const double u0 = number("scheme.initial_policy");
            if (u0 < p.u_min || u0 > p.u_max) throw ConfigError("scheme.initial_policy", "must lie in [u_min, u_max]");
            try {
                check_controls_unconstrained(p, riccati_solve(p));
            } catch (const std::invalid_argument& e) {
                throw ConfigError("problem.u_max", e.what());
            }
        }
        if (string("fa.step_rule") == "bound-scaled") {
            const double f = number("fa.learning_rate");
            if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fa.learning_rate", "bound-scaled fraction must lie in (0, 1]");
        }
        if (k == ExperimentKind::Sweep) {
            const auto param = string("sweep.param");
            if (!is_numeric(param)) throw ConfigError("sweep.param", "must name a numeric config key");
            if (values_.at("sweep.values").empty()) throw ConfigError("sweep.values", "must not be empty");
        }
    }

    /// Sorted-key JSON of every setting except the output location.
    std::string canonical() const {
        json doc = json::object();
        for (const auto& [key, value] : values_) {
            if (key != "output.dir") doc[key] = value;
        }
        return doc.dump();
    }

    std::uint64_t hash() const { return detail::fnv1a(canonical()); }

    std::string hash_hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        auto h = hash();
        for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        return out;
    }

    const json& raw(const std::string& key) const { return values_.at(key); }

private:
    std::map<std::string, json> values_;
};

}  // namespace lqlab::experiment
