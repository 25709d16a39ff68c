#pragma once

#include "../metrics.hpp"
#include "../moreau.hpp"
#include "../noise.hpp"
#include "../optim.hpp"
#include "../problems.hpp"
#include "../stats.hpp"
#include "../theory.hpp"
#include "config.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace wcopt::harness {

namespace fs = std::filesystem;

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- building blocks from a config -----------------------------------------

inline ProblemInstance make_config_problem(const ExperimentConfig& c) {
    if (c.a_csv.empty()) return make_preset_problem(c.problem);
    const Matrix A = load_matrix_csv(c.a_csv);
    require(!c.b_csv.empty(), ErrorKind::Config, "problem.a_csv needs problem.b_csv");
    const Vector b = load_vector_csv(c.b_csv);
    if (c.problem_kind == "phase") {
        PhaseRetrievalOptions o;
        o.name = c.problem;
        return make_phase_retrieval(A, b, c.radius, o);
    }
    require(c.problem_kind == "abs_reg", ErrorKind::Config, "problem.kind must be abs_reg or phase");
    AbsRegressionOptions o;
    o.name = c.problem;
    if (c.rho) o.rho = *c.rho;
    return make_abs_regression(A, b, FeasibleSet::full_space(static_cast<int>(A.cols())), o);
}

inline NoiseModel make_config_noise(const ExperimentConfig& c) {
    if (c.noise_kind == "zero") return make_zero_noise();
    if (c.noise_kind == "gaussian") return make_gaussian_noise(c.noise_sigma);
    if (c.noise_kind == "subweibull") return make_subweibull_noise(c.noise_sigma, c.noise_theta);
    return make_pareto_noise(c.noise_sigma, c.noise_p, c.noise_alpha);
}

inline Vector make_x0(const ExperimentConfig& c, const ProblemInstance& p) {
    if (c.x0 == "center") return p.set.center();
    if (c.x0 == "planted") {
        require(p.planted.has_value(), ErrorKind::Config, "x0 = planted but the problem has no planted point");
        return *p.planted;
    }
    const auto items = split_list(c.x0);
    require(static_cast<int>(items.size()) == p.dim, ErrorKind::Config, "x0 has the wrong dimension");
    Vector x(p.dim);
    for (int i = 0; i < p.dim; ++i) x[i] = parse_double("x0", items[i]);
    require(p.set.contains(x), ErrorKind::Config, "x0 is outside the feasible set");
    return x;
}

inline double make_rho_bar(const ExperimentConfig& c, const ProblemInstance& p) {
    if (c.rho_bar_rule == "3rho") return 3.0 * p.rho;
    if (c.rho_bar_rule == "2rho") return 2.0 * p.rho;
    return parse_double("moreau.rho_bar", c.rho_bar_rule);
}

inline double noise_theta(const ExperimentConfig& c) {
    if (c.noise_kind == "subweibull") return c.noise_theta;
    return 0.5;  // zero and Gaussian noise are sub-Gaussian
}

// Everything shared by all runs of one experiment.
struct Setup {
    ExperimentConfig cfg;
    ProblemInstance problem;
    NoiseModel noise;
    Vector x0;
    MoreauConfig moreau;
    double delta1 = 0.0;  // f_{1/rho_bar}(x0) - f_min

    explicit Setup(const ExperimentConfig& c)
        : cfg(c), problem(make_config_problem(c)), noise(make_config_noise(c)), x0(make_x0(c, problem)) {
        moreau.rho_bar = make_rho_bar(c, problem);
        moreau.inner_iters = c.inner_iters;
        moreau.inner_tol = c.inner_tol;
        require(moreau.rho_bar > problem.rho, ErrorKind::Config, "moreau.rho_bar must exceed the problem's rho");
        delta1 = prox_point(problem, moreau, x0).envelope - problem.f_min;
    }

    TheoryConstants constants(long T) const {
        TheoryConstants k;
        const double G = problem.lipschitz_g;
        k.G = G;
        k.rho = problem.rho;
        k.delta = cfg.deltas.front();
        k.T = static_cast<double>(T);
        k.delta1 = delta1;
        k.sigma = noise_sigma(noise);
        if (cfg.noise_kind != "pareto") k.theta = noise_theta(cfg);
        k.gamma = cfg.gamma;
        if (cfg.algorithm == Algorithm::ClippedSsgd) {
            k.p = cfg.clip_p;
            k.lam = cfg.clip_lambda;
            k.eta0 = cfg.eta0;
            k.B = cfg.batch;
        }
        return k;
    }

    StepSchedule step(long T) const {
        const double G = problem.lipschitz_g;
        switch (cfg.step) {
            case StepKind::InverseSqrt: return InverseSqrtStep{cfg.gamma};
            case StepKind::Constant: return ConstantStep{cfg.eta};
            case StepKind::Cor2: return ConstantStep{cor2_step(constants(T))};
            case StepKind::ClipAnytime: return ClipCoupledAnytimeStep{cfg.eta0, G};
            default: return ClipCoupledFixedTStep{cfg.eta0, G, T};
        }
    }

    ClipSchedule clip(long T) const {
        const double G = problem.lipschitz_g;
        switch (cfg.clip) {
            case ClipKind::None: return NoClip{};
            case ClipKind::Anytime: return AnytimeClip{cfg.clip_lambda, cfg.clip_p, G};
            default: return FixedTClip{cfg.clip_lambda, cfg.clip_p, G, T};
        }
    }

    Trajectory run(long T, int r) const {
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(r));
        RunOptions o;
        o.x0 = x0;
        if (cfg.algorithm == Algorithm::Ssgd) return run_ssgd(problem, noise, step(T), T, rng, o);
        return run_clipped_ssgd(problem, noise, step(T), clip(T), cfg.batch, T, rng, o);
    }

    MetricsOptions metrics_options() const {
        MetricsOptions m;
        m.max_points = cfg.metric_points;
        m.full_eval_max_T = cfg.full_eval_max_T;
        return m;
    }

    // Schedule sums feed the general Theorem 1 bound.
    double bound(long T) const {
        if (!cfg.bound) return std::numeric_limits<double>::quiet_NaN();
        TheoryConstants k = constants(T);
        const StepSchedule s = step(T);
        const ClipSchedule cl = clip(T);
        double se = 0, se2 = 0, me = 0;
        for (long t = 1; t <= T; ++t) {
            const double e = step_size(s, t, clip_level(cl, t));
            se += e;
            se2 += e * e;
            me = std::max(me, e);
        }
        k.sum_eta = se;
        k.sum_eta_sq = se2;
        k.max_eta = me;
        try {
            return theory_bound(k, *cfg.bound);
        } catch (const Error&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    }
};

// ---- aggregation -----------------------------------------------------------

struct TRow {
    long T = 0;
    double mean = 0, median = 0;
    std::vector<double> quantiles;  // one per delta, level 1 - delta
    double theory = std::numeric_limits<double>::quiet_NaN();
    int diverged = 0;
    int lemma1_checked = 0, lemma1_failed = 0;
    int inner_warnings = 0;
};

struct AggregateReport {
    std::vector<TRow> rows;
    std::vector<double> deltas;
    std::optional<double> slope_median, slope_mean;
    std::optional<int> clipped_counterpart_diverged;  // divergence demo only
    std::vector<std::pair<std::string, bool>> checks;  // pass/fail lines
    std::vector<std::string> warnings;
    bool all_pass() const {
        for (const auto& [n, ok] : checks)
            if (!ok) return false;
        return true;
    }
};

inline std::string quantile_label(double delta) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%g", 100.0 * (1.0 - delta));
    std::string s = buf;
    for (auto& ch : s)
        if (ch == '.') ch = '_';
    return s;
}

namespace detail {

inline void write_run_csv(const fs::path& path, const RunReport& rep) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    out << "t,grad_sq,err_bound,eta,lambda,clip_active,f_val\n";
    for (const auto& r : rep.rows)
        out << r.t << ',' << fmt(r.grad_sq) << ',' << fmt(r.err_bound) << ',' << fmt(r.eta) << ','
            << (r.lambda ? fmt(*r.lambda) : "") << ',' << (r.clip_active ? 1 : 0) << ',' << fmt(r.f_val) << '\n';
}

inline nlohmann::ordered_json run_summary(const RunReport& rep) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    nlohmann::ordered_json j;
    j["weighted_avg"] = num(rep.weighted_avg);
    j["uniform_avg"] = num(rep.uniform_avg);
    j["delta1"] = num(rep.delta1);
    j["lemma1_max_residual"] = rep.lemma1_max_residual ? num(*rep.lemma1_max_residual) : nlohmann::ordered_json();
    j["lemma1_pass"] = rep.lemma1_pass ? nlohmann::ordered_json(*rep.lemma1_pass) : nlohmann::ordered_json();
    j["diverged"] = rep.diverged;
    j["last_finite_index"] = rep.last_finite_index;
    j["inner_warnings"] = rep.inner_warnings;
    return j;
}

// Runs every index in [0, n) with at most `jobs` workers; results land by index.
template <class F>
void parallel_for(int n, int jobs, F&& body) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline int count_diverged(const Setup& s, long T, int jobs) {
    std::vector<char> d(static_cast<std::size_t>(s.cfg.n_runs), 0);
    parallel_for(s.cfg.n_runs, jobs, [&](int r) { d[r] = s.run(T, r).diverged; });
    int n = 0;
    for (char c : d) n += c;
    return n;
}

}  // namespace detail

// Runs the sweep, aggregates per T, and writes outputs when `write` is set.
inline AggregateReport run_experiment(const ExperimentConfig& cfg, int jobs = 1, bool write = true) {
    validate(cfg);
    const Setup setup(cfg);
    const fs::path out(cfg.output);
    if (write) {
        std::error_code ec;
        fs::create_directories(out, ec);
        require(!ec && fs::is_directory(out), ErrorKind::Io, "cannot create output directory " + out.string());
    }
    AggregateReport agg;
    agg.deltas = cfg.deltas;
    std::mutex io_mu;
    for (long T : cfg.T) {
        std::vector<RunReport> reports(static_cast<std::size_t>(cfg.n_runs));
        const fs::path dir = out / "runs" / std::to_string(T);
        if (write && cfg.write_runs) fs::create_directories(dir);
        detail::parallel_for(cfg.n_runs, jobs, [&](int r) {
            const Trajectory tr = setup.run(T, r);
            RunReport rep = trajectory_metrics(tr, setup.problem, setup.moreau, setup.metrics_options());
            if (write && cfg.write_runs) {
                std::lock_guard lk(io_mu);
                detail::write_run_csv(dir / (std::to_string(r) + ".csv"), rep);
                std::ofstream js(dir / (std::to_string(r) + ".json"));
                js << detail::run_summary(rep).dump(2) << '\n';
            }
            reports[r] = std::move(rep);
        });
        TRow row;
        row.T = T;
        std::vector<double> vals;
        for (const auto& rep : reports) {
            row.inner_warnings += rep.inner_warnings;
            if (rep.lemma1_pass) {
                ++row.lemma1_checked;
                row.lemma1_failed += !*rep.lemma1_pass;
            }
            if (rep.diverged) {
                ++row.diverged;
                continue;
            }
            vals.push_back(cfg.metric == MetricKind::Weighted ? rep.weighted_avg : rep.uniform_avg);
        }
        if (!vals.empty()) {
            double s = 0;
            for (double v : vals) s += v;
            row.mean = s / static_cast<double>(vals.size());
            row.median = median(vals);
            for (double d : cfg.deltas) row.quantiles.push_back(order_quantile(vals, 1.0 - d));
        } else {
            row.mean = row.median = std::numeric_limits<double>::quiet_NaN();
            row.quantiles.assign(cfg.deltas.size(), std::numeric_limits<double>::quiet_NaN());
        }
        row.theory = setup.bound(T);
        agg.rows.push_back(std::move(row));
    }

    if (agg.rows.size() >= 4) {
        std::vector<std::pair<double, double>> med, mean;
        bool ok = true;
        for (const auto& r : agg.rows) {
            ok = ok && r.median > 0 && r.mean > 0 && std::isfinite(r.median);
            med.emplace_back(static_cast<double>(r.T), r.median);
            mean.emplace_back(static_cast<double>(r.T), r.mean);
        }
        if (ok) {
            agg.slope_median = fit_rate(med);
            agg.slope_mean = fit_rate(mean);
        }
    }
    if ((cfg.expect_slope_min || cfg.expect_slope_max) && !agg.slope_median) {
        agg.warnings.push_back("slope undefined (needs >= 4 T values with positive metrics); range check skipped");
    } else if (cfg.expect_slope_min || cfg.expect_slope_max) {
        const bool ok = agg.slope_median && (!cfg.expect_slope_min || *agg.slope_median >= *cfg.expect_slope_min) &&
                        (!cfg.expect_slope_max || *agg.slope_median <= *cfg.expect_slope_max);
        agg.checks.emplace_back("median slope within expected range", ok);
    }
    int checked = 0, failed = 0, warnings = 0;
    for (const auto& r : agg.rows) {
        checked += r.lemma1_checked;
        failed += r.lemma1_failed;
        warnings += r.inner_warnings;
    }
    if (checked > 0) agg.checks.emplace_back("pathwise descent inequality on fully evaluated runs", failed == 0);
    if (warnings > 0)
        agg.warnings.push_back(std::to_string(warnings) + " prox evaluations exceeded moreau.inner_tol");

    if (cfg.compare_clipped) {
        ExperimentConfig cc = cfg;
        cc.algorithm = Algorithm::ClippedSsgd;
        cc.step = StepKind::ClipAnytime;
        cc.clip = ClipKind::Anytime;
        const Setup clipped(cc);
        agg.clipped_counterpart_diverged = detail::count_diverged(clipped, cfg.T.back(), jobs);
        const int vanilla = agg.rows.back().diverged;
        if (!(vanilla >= 1 && *agg.clipped_counterpart_diverged == 0))
            agg.warnings.push_back("divergence demo did not separate: vanilla diverged " + std::to_string(vanilla) +
                                   ", clipped diverged " + std::to_string(*agg.clipped_counterpart_diverged));
    }

    if (write) {
        std::ofstream a(out / "aggregate.csv");
        require(static_cast<bool>(a), ErrorKind::Io, "cannot write aggregate.csv");
        a << "T,mean,median";
        for (double d : cfg.deltas) a << ',' << quantile_label(d);
        a << ",theory_bound,diverged\n";
        for (const auto& r : agg.rows) {
            a << r.T << ',' << fmt(r.mean) << ',' << fmt(r.median);
            for (double q : r.quantiles) a << ',' << fmt(q);
            a << ',' << fmt(r.theory) << ',' << r.diverged << '\n';
        }
        std::ofstream s(out / "summary.txt");
        s << "experiment: " << cfg.name << '\n';
        s << "problem: " << setup.problem.name << " (dim " << setup.problem.dim << ", rho " << fmt(setup.problem.rho)
          << ", G " << fmt(setup.problem.lipschitz_g) << ")\n";
        s << "noise: " << noise_name(setup.noise) << ", algorithm: "
          << (cfg.algorithm == Algorithm::Ssgd ? "ssgd" : "clipped_ssgd") << ", step: " << step_name(cfg.step)
          << ", rho_bar: " << fmt(setup.moreau.rho_bar) << '\n';
        s << "metric: " << (cfg.metric == MetricKind::Weighted ? "weighted" : "uniform")
          << " average of squared Moreau gradient norms\n";
        s << "delta1: " << fmt(setup.delta1) << '\n';
        s << "slope_median: " << (agg.slope_median ? fmt(*agg.slope_median) : "n/a") << '\n';
        s << "slope_mean: " << (agg.slope_mean ? fmt(*agg.slope_mean) : "n/a") << '\n';
        for (const auto& r : agg.rows) s << "T=" << r.T << " diverged " << r.diverged << "/" << cfg.n_runs << '\n';
        if (agg.clipped_counterpart_diverged)
            s << "clipped counterpart at T=" << cfg.T.back() << " diverged " << *agg.clipped_counterpart_diverged << "/"
              << cfg.n_runs << '\n';
        for (const auto& [name, ok] : agg.checks) s << (ok ? "PASS " : "FAIL ") << name << '\n';
        for (const auto& w : agg.warnings) s << "WARN " << w << '\n';
    }
    return agg;
}

}  // namespace wcopt::harness
