#pragma once

#include "../core.hpp"
#include "../theory.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wcopt::harness {

// Flat "dotted.key = value" text; '#' starts a comment.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline KeyValues parse_key_values(std::istream& in, const std::string& origin = "config") {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::Config, origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorKind::Config, origin + ":" + std::to_string(lineno) + ": empty key");
        kv.emplace_back(std::move(key), std::move(value));
    }
    return kv;
}

inline KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config file " + path);
    return parse_key_values(in, path);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Config, key + ": not a number: '" + v + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 9e15) throw Error(ErrorKind::Config, key + ": not an integer: '" + v + "'");
    return static_cast<long>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorKind::Config, key + ": not a boolean: '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(parse_double(key, s));
    if (out.empty()) throw Error(ErrorKind::Config, key + ": empty list");
    return out;
}

enum class Algorithm { Ssgd, ClippedSsgd };
enum class StepKind { InverseSqrt, Constant, Cor2, ClipAnytime, ClipFixedT };
enum class ClipKind { None, Anytime, FixedT };
enum class MetricKind { Weighted, Uniform };

struct ExperimentConfig {
    std::string name = "experiment";
    // problem
    std::string problem = "abs_reg_d10";
    std::string problem_kind = "abs_reg";  // for CSV data: abs_reg | phase
    std::string a_csv, b_csv;
    double radius = 2.0;
    std::optional<double> rho;  // nominal rho override for abs_reg CSV data
    std::string x0 = "center";  // center | planted | comma list
    // noise
    std::string noise_kind = "gaussian";
    double noise_sigma = 1.0, noise_theta = 0.5, noise_p = 1.5, noise_alpha = 1.8;
    // algorithm and schedules
    Algorithm algorithm = Algorithm::Ssgd;
    StepKind step = StepKind::InverseSqrt;
    double gamma = 0.1, eta = 0.01, eta0 = 1.0;
    ClipKind clip = ClipKind::None;
    double clip_lambda = 1.0, clip_p = 1.5;
    int batch = 1;
    // sweep
    std::vector<long> T{1000};
    int n_runs = 10;
    std::uint64_t seed = 1;
    std::vector<double> deltas{0.1, 0.01};
    // Moreau metrics
    std::string rho_bar_rule = "3rho";  // 3rho | 2rho | explicit number
    int inner_iters = 2000;
    double inner_tol = 1e-6;
    int metric_points = 200;
    long full_eval_max_T = 1000;
    MetricKind metric = MetricKind::Weighted;
    std::optional<BoundKind> bound;
    // reporting
    std::optional<double> expect_slope_min, expect_slope_max;
    bool compare_clipped = false;  // also run a clipped counterpart and report divergence
    std::string output = "out";
    bool write_runs = true;
    // validate subcommand grid
    std::vector<double> val_p{1.2, 1.5, 2.0}, val_B{1, 4, 16}, val_lambda{4, 16};
    double val_sigma = 1.0, val_alpha = 1.8, val_mu_norm = 1.0;
    int val_dim = 10;
    long val_trials = 1000000;
};

inline std::string step_name(StepKind s) {
    switch (s) {
        case StepKind::InverseSqrt: return "inverse_sqrt";
        case StepKind::Constant: return "constant";
        case StepKind::Cor2: return "cor2";
        case StepKind::ClipAnytime: return "clip_anytime";
        default: return "clip_fixed_t";
    }
}

inline void apply_key(ExperimentConfig& c, const std::string& k, const std::string& v) {
    auto num = [&] { return parse_double(k, v); };
    auto integer = [&] { return parse_long(k, v); };
    if (k == "name") c.name = v;
    else if (k == "problem") c.problem = v;
    else if (k == "problem.kind") c.problem_kind = v;
    else if (k == "problem.a_csv") c.a_csv = v;
    else if (k == "problem.b_csv") c.b_csv = v;
    else if (k == "problem.radius") c.radius = num();
    else if (k == "problem.rho") c.rho = num();
    else if (k == "x0") c.x0 = v;
    else if (k == "noise.kind") c.noise_kind = v;
    else if (k == "noise.sigma") c.noise_sigma = num();
    else if (k == "noise.theta") c.noise_theta = num();
    else if (k == "noise.p") c.noise_p = num();
    else if (k == "noise.alpha") c.noise_alpha = num();
    else if (k == "algorithm") {
        if (v == "ssgd") c.algorithm = Algorithm::Ssgd;
        else if (v == "clipped_ssgd") c.algorithm = Algorithm::ClippedSsgd;
        else throw Error(ErrorKind::Config, "algorithm must be ssgd or clipped_ssgd");
    } else if (k == "step.kind") {
        if (v == "inverse_sqrt") c.step = StepKind::InverseSqrt;
        else if (v == "constant") c.step = StepKind::Constant;
        else if (v == "cor2") c.step = StepKind::Cor2;
        else if (v == "clip_anytime") c.step = StepKind::ClipAnytime;
        else if (v == "clip_fixed_t") c.step = StepKind::ClipFixedT;
        else throw Error(ErrorKind::Config, "unknown step.kind: " + v);
    } else if (k == "step.gamma") c.gamma = num();
    else if (k == "step.eta") c.eta = num();
    else if (k == "step.eta0") c.eta0 = num();
    else if (k == "clip.kind") {
        if (v == "none") c.clip = ClipKind::None;
        else if (v == "anytime") c.clip = ClipKind::Anytime;
        else if (v == "fixed_t") c.clip = ClipKind::FixedT;
        else throw Error(ErrorKind::Config, "unknown clip.kind: " + v);
    } else if (k == "clip.lambda") c.clip_lambda = num();
    else if (k == "clip.p") c.clip_p = num();
    else if (k == "batch") c.batch = static_cast<int>(integer());
    else if (k == "T") {
        c.T.clear();
        for (const auto& item : split_list(v)) c.T.push_back(parse_long(k, item));
    } else if (k == "n_runs") c.n_runs = static_cast<int>(integer());
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(integer());
    else if (k == "delta") c.deltas = parse_double_list(k, v);
    else if (k == "moreau.rho_bar") c.rho_bar_rule = v;
    else if (k == "moreau.inner_iters") c.inner_iters = static_cast<int>(integer());
    else if (k == "moreau.inner_tol") c.inner_tol = num();
    else if (k == "metrics.points") c.metric_points = static_cast<int>(integer());
    else if (k == "metrics.full_eval_max_T") c.full_eval_max_T = integer();
    else if (k == "metric") {
        if (v == "weighted") c.metric = MetricKind::Weighted;
        else if (v == "uniform") c.metric = MetricKind::Uniform;
        else throw Error(ErrorKind::Config, "metric must be weighted or uniform");
    } else if (k == "theory.bound") c.bound = v == "none" ? std::nullopt : std::optional(parse_bound(v));
    else if (k == "expect.slope_min") c.expect_slope_min = num();
    else if (k == "expect.slope_max") c.expect_slope_max = num();
    else if (k == "compare_clipped") c.compare_clipped = parse_bool(k, v);
    else if (k == "output") c.output = v;
    else if (k == "write_runs") c.write_runs = parse_bool(k, v);
    else if (k == "validate.p") c.val_p = parse_double_list(k, v);
    else if (k == "validate.B") c.val_B = parse_double_list(k, v);
    else if (k == "validate.lambda") c.val_lambda = parse_double_list(k, v);
    else if (k == "validate.sigma") c.val_sigma = num();
    else if (k == "validate.alpha") c.val_alpha = num();
    else if (k == "validate.mu_norm") c.val_mu_norm = num();
    else if (k == "validate.dim") c.val_dim = static_cast<int>(integer());
    else if (k == "validate.n_trials") c.val_trials = integer();
    else if (k != "preset") throw Error(ErrorKind::Config, "unknown config key: " + k);
}

// ---- presets ---------------------------------------------------------------

inline const std::vector<std::string>& list_presets() {
    static const std::vector<std::string> names{"cor1_theta05", "cor1_theta1", "cor1_theta2", "cor2_theta05",
                                                "thm2_p15",     "thm2_p2",     "thm3_p15",    "thm4_p15",
                                                "thm5_p15",     "vanilla_pbcm_divergence_demo"};
    return names;
}

inline KeyValues preset_keys(const std::string& name) {
    const KeyValues sweep{{"T", "100, 1000, 10000, 100000"}, {"n_runs", "50"}, {"seed", "1"}};
    KeyValues kv;
    auto add = [&](KeyValues more) { kv.insert(kv.end(), more.begin(), more.end()); };
    if (name.rfind("cor1_theta", 0) == 0 || name == "cor2_theta05") {
        const std::string theta = name == "cor1_theta1" ? "1" : (name == "cor1_theta2" ? "2" : "0.5");
        add({{"problem", "abs_reg_d10"}, {"algorithm", "ssgd"}, {"noise.kind", "subweibull"},
             {"noise.sigma", "1"}, {"noise.theta", theta}, {"moreau.rho_bar", "3rho"}});
        if (name == "cor2_theta05")
            add({{"step.kind", "cor2"}, {"metric", "uniform"}, {"theory.bound", "cor2"}});
        else
            add({{"step.kind", "inverse_sqrt"}, {"step.gamma", "0.1"}, {"metric", "weighted"}, {"theory.bound", "cor1"}});
        add({{"expect.slope_min", "-0.65"}, {"expect.slope_max", "-0.35"}});
    } else if (name == "thm2_p15" || name == "thm2_p2" || name == "thm4_p15") {
        const bool p2 = name == "thm2_p2";
        add({{"problem", "abs_reg_d10"}, {"algorithm", "clipped_ssgd"}, {"step.kind", "clip_anytime"},
             {"step.eta0", "1"}, {"clip.kind", "anytime"}, {"clip.lambda", "1"}, {"batch", "1"},
             {"moreau.rho_bar", "2rho"}, {"metric", "uniform"}, {"theory.bound", name == "thm4_p15" ? "thm4" : "thm2"}});
        if (p2) add({{"noise.kind", "gaussian"}, {"noise.sigma", "1"}, {"clip.p", "2"}});
        else add({{"noise.kind", "pareto"}, {"noise.sigma", "1"}, {"noise.p", "1.5"}, {"noise.alpha", "1.8"}, {"clip.p", "1.5"}});
    } else if (name == "thm3_p15" || name == "thm5_p15") {
        add({{"problem", "abs_reg_d10"}, {"x0", "planted"}, {"algorithm", "clipped_ssgd"}, {"step.kind", "clip_fixed_t"},
             {"step.eta0", "1"}, {"clip.kind", "fixed_t"}, {"clip.lambda", "1"}, {"clip.p", "1.5"}, {"batch", "1"},
             {"noise.kind", "pareto"}, {"noise.sigma", "1"}, {"noise.p", "1.5"}, {"noise.alpha", "1.8"},
             {"moreau.rho_bar", "2rho"}, {"metric", "uniform"}, {"theory.bound", name == "thm3_p15" ? "thm3" : "thm5"}});
        if (name == "thm3_p15") add({{"expect.slope_min", "-0.80"}, {"expect.slope_max", "-0.53"}});
    } else if (name == "vanilla_pbcm_divergence_demo") {
        add({{"problem", "phase_d10_m30_free"}, {"x0", "planted"}, {"algorithm", "ssgd"}, {"step.kind", "inverse_sqrt"},
             {"step.gamma", "28"}, {"noise.kind", "pareto"}, {"noise.sigma", "1"}, {"noise.p", "1.2"},
             {"noise.alpha", "1.3"}, {"moreau.rho_bar", "3rho"}, {"theory.bound", "none"}, {"T", "10000"},
             {"n_runs", "50"}, {"compare_clipped", "true"}, {"clip.lambda", "1"}, {"clip.p", "1.2"},
             {"step.eta0", "1"}});
        return kv;
    } else {
        throw Error(ErrorKind::Config, "unknown preset: " + name);
    }
    kv.insert(kv.begin(), sweep.begin(), sweep.end());
    return kv;
}

inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
    if (c.n_runs < 1) fail("n_runs must be >= 1");
    if (c.T.empty()) fail("T list is empty");
    for (std::size_t i = 0; i < c.T.size(); ++i) {
        if (c.T[i] < 1) fail("T values must be >= 1");
        if (i && c.T[i] <= c.T[i - 1]) fail("T values must be strictly increasing");
    }
    if (c.deltas.empty()) fail("delta list is empty");
    for (double d : c.deltas)
        if (!(d > 0.0 && d < 1.0)) fail("delta values must lie in (0,1)");
    const bool clipped = c.algorithm == Algorithm::ClippedSsgd;
    const bool coupled = c.step == StepKind::ClipAnytime || c.step == StepKind::ClipFixedT;
    if (clipped && c.clip == ClipKind::None) fail("clipped_ssgd requires clip.kind");
    if (clipped && !coupled) fail("clipped_ssgd requires a clip-coupled step.kind");
    if (!clipped && c.clip != ClipKind::None) fail("ssgd forbids clip parameters");
    if (!clipped && coupled) fail("ssgd forbids clip-coupled step sizes");
    if (c.batch < 1) fail("batch must be >= 1");
    if (!clipped && c.batch != 1) fail("batch applies to clipped_ssgd only");
    if (c.metric_points < 2) fail("metrics.points must be >= 2");
    if (c.inner_iters < 1 || !(c.inner_tol > 0.0)) fail("moreau inner solver settings must be positive");
    if (c.rho_bar_rule != "3rho" && c.rho_bar_rule != "2rho") parse_double("moreau.rho_bar", c.rho_bar_rule);
    for (const std::string& k : {std::string("zero"), std::string("gaussian"), std::string("subweibull"), std::string("pareto")})
        if (k == c.noise_kind) return;
    fail("unknown noise.kind: " + c.noise_kind);
}

// Applies preset defaults (when `preset` is given) and then the explicit keys.
inline ExperimentConfig build_config(const KeyValues& kv) {
    ExperimentConfig c;
    for (const auto& [k, v] : kv)
        if (k == "preset") {
            c.name = v;
            for (const auto& [pk, pv] : preset_keys(v)) apply_key(c, pk, pv);
        }
    for (const auto& [k, v] : kv) apply_key(c, k, v);
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) { return build_config(load_key_values(path)); }

inline ExperimentConfig preset_config(const std::string& name) { return build_config({{"preset", name}}); }

}  // namespace wcopt::harness
