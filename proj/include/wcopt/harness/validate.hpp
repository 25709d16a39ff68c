#pragma once

#include "../validators.hpp"
#include "experiment.hpp"

namespace wcopt::harness {

enum class CheckKind { Lemma1, Clip, BatchMoment };

inline CheckKind parse_check(const std::string& s) {
    if (s == "lemma1") return CheckKind::Lemma1;
    if (s == "clip") return CheckKind::Clip;
    if (s == "batch-moment") return CheckKind::BatchMoment;
    throw Error(ErrorKind::Config, "unknown check '" + s + "' (expected lemma1, clip or batch-moment)");
}

struct ValidationRow {
    std::string check;
    std::string params;
    double lhs = 0, rhs = 0, slack = 0;
    bool pass = false;
};

struct ValidationReport {
    std::vector<ValidationRow> rows;
    bool pass() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }
};

// Noise used on the validation grid: p = 2 has no heavy-tailed Pareto law with
// alpha <= 2, so the Gaussian model stands in there.
inline NoiseModel validation_noise(const ExperimentConfig& c, double p) {
    if (p >= 2.0) return make_gaussian_noise(c.val_sigma);
    return make_pareto_noise(c.val_sigma, p, c.val_alpha);
}

namespace detail {

inline std::string kv(std::initializer_list<std::pair<const char*, double>> items) {
    std::string s;
    for (const auto& [k, v] : items) {
        if (!s.empty()) s += ' ';
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s=%g", k, v);
        s += buf;
    }
    return s;
}

inline ValidationReport validate_lemma1(const ExperimentConfig& c, int jobs) {
    const Setup setup(c);
    MoreauConfig mc = setup.moreau;
    mc.inner_tol = std::min(mc.inner_tol, 1e-8);
    ValidationReport rep;
    for (long T : c.T) {
        std::vector<Lemma1Report> out(static_cast<std::size_t>(c.n_runs));
        std::vector<char> div(static_cast<std::size_t>(c.n_runs), 0);
        parallel_for(c.n_runs, jobs, [&](int r) {
            const Trajectory tr = setup.run(T, r);
            if (tr.diverged) {
                div[r] = 1;
                return;
            }
            out[r] = check_pathwise_lemma1(tr, setup.problem, mc);
        });
        for (int r = 0; r < c.n_runs; ++r) {
            ValidationRow row;
            row.check = "lemma1";
            row.params = kv({{"T", static_cast<double>(T)}, {"run", static_cast<double>(r)}});
            if (div[r]) {
                // the inequality is only defined on finite trajectories
                row.params += " diverged_skipped";
                row.lhs = row.rhs = std::numeric_limits<double>::quiet_NaN();
                row.pass = true;
            } else {
                row.lhs = out[r].max_residual;
                row.rhs = 0.0;
                row.slack = out[r].max_residual - out[r].max_violation;
                row.pass = out[r].pass;
            }
            rep.rows.push_back(std::move(row));
        }
    }
    return rep;
}

struct GridPoint {
    double p, B, lambda;
};

inline std::vector<GridPoint> clip_grid(const ExperimentConfig& c) {
    std::vector<GridPoint> g;
    for (double p : c.val_p)
        for (double B : c.val_B)
            for (double l : c.val_lambda) g.push_back({p, B, l});
    return g;
}

inline Vector validation_mu(const ExperimentConfig& c) {
    Vector mu = Vector::Zero(c.val_dim);
    mu[0] = c.val_mu_norm;
    return mu;
}

inline McCheckConfig mc_config(const ExperimentConfig& c, std::size_t stream) {
    McCheckConfig m;
    m.n_trials = c.val_trials;
    m.seed = c.seed;
    m.stream = stream;
    return m;
}

inline ValidationReport validate_clip(const ExperimentConfig& c, int jobs) {
    const auto grid = clip_grid(c);
    const Vector mu = validation_mu(c);
    std::vector<ClipBoundReport> out(grid.size());
    parallel_for(static_cast<int>(grid.size()), jobs, [&](int i) {
        const auto& g = grid[i];
        out[i] = check_clip_bounds(mu, validation_noise(c, g.p), static_cast<int>(g.B), g.lambda, g.p,
                                   mc_config(c, static_cast<std::size_t>(i)));
    });
    ValidationReport rep;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (const auto& b : out[i].checks)
            rep.rows.push_back({"clip_" + b.name, kv({{"p", grid[i].p}, {"B", grid[i].B}, {"lambda", grid[i].lambda}}),
                                b.lhs, b.rhs, b.slack, b.pass});

    // Bias should not grow with the clip level: lambda in {2||mu||, 4, 8, 16}.
    std::vector<double> lambdas{2.0 * mu.norm(), 4.0, 8.0, 16.0};
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    std::vector<std::pair<double, double>> grid2;  // (p, B)
    for (double p : c.val_p)
        for (double B : c.val_B) grid2.emplace_back(p, B);
    std::vector<std::vector<BoundCheck>> bias(grid2.size());
    parallel_for(static_cast<int>(grid2.size()), jobs, [&](int i) {
        const auto [p, B] = grid2[i];
        for (std::size_t j = 0; j < lambdas.size(); ++j) {
            const auto r = check_clip_bounds(mu, validation_noise(c, p), static_cast<int>(B), lambdas[j], p,
                                             mc_config(c, 1000 + i * lambdas.size() + j));
            bias[i].push_back(r.checks[1]);
        }
    });
    for (std::size_t i = 0; i < grid2.size(); ++i) {
        const auto [p, B] = grid2[i];
        for (std::size_t j = 1; j < lambdas.size(); ++j) {
            const auto& lo = bias[i][j - 1];
            const auto& hi = bias[i][j];
            rep.rows.push_back({"clip_bias_monotone", kv({{"p", p}, {"B", B}, {"lambda", lambdas[j]}}), hi.lhs, lo.lhs,
                                hi.slack + lo.slack, hi.lhs <= lo.lhs + hi.slack + lo.slack});
        }
    }
    return rep;
}

inline ValidationReport validate_batch_moment(const ExperimentConfig& c, int jobs) {
    std::vector<std::pair<double, double>> grid;
    for (double p : c.val_p)
        for (double B : c.val_B) grid.emplace_back(p, B);
    std::vector<BatchMomentReport> out(grid.size());
    parallel_for(static_cast<int>(grid.size()), jobs, [&](int i) {
        const auto [p, B] = grid[i];
        out[i] = check_batch_moment(validation_noise(c, p), c.val_dim, static_cast<int>(B), p,
                                    mc_config(c, static_cast<std::size_t>(i)));
    });
    ValidationReport rep;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& b = out[i].check;
        rep.rows.push_back({b.name, kv({{"p", grid[i].first}, {"B", grid[i].second}}), b.lhs, b.rhs, b.slack, b.pass});
    }
    return rep;
}

}  // namespace detail

// Runs one validation check and writes validation.txt / validation.csv when asked.
inline ValidationReport run_validation(const ExperimentConfig& c, CheckKind which, int jobs = 1, bool write = true) {
    validate(c);
    ValidationReport rep;
    switch (which) {
        case CheckKind::Lemma1: rep = detail::validate_lemma1(c, jobs); break;
        case CheckKind::Clip: rep = detail::validate_clip(c, jobs); break;
        case CheckKind::BatchMoment: rep = detail::validate_batch_moment(c, jobs); break;
    }
    if (write) {
        const fs::path out(c.output);
        std::error_code ec;
        fs::create_directories(out, ec);
        require(!ec && fs::is_directory(out), ErrorKind::Io, "cannot create output directory " + out.string());
        std::ofstream csv(out / "validation.csv");
        std::ofstream txt(out / "validation.txt");
        require(csv && txt, ErrorKind::Io, "cannot write validation report");
        csv << "check,params,lhs,rhs,slack,pass\n";
        long failed = 0;
        for (const auto& r : rep.rows) {
            csv << r.check << ',' << r.params << ',' << fmt(r.lhs) << ',' << fmt(r.rhs) << ',' << fmt(r.slack) << ','
                << (r.pass ? 1 : 0) << '\n';
            txt << (r.pass ? "PASS " : "FAIL ") << r.check << " [" << r.params << "] lhs=" << fmt(r.lhs)
                << " rhs=" << fmt(r.rhs) << " slack=" << fmt(r.slack) << '\n';
            failed += !r.pass;
        }
        txt << (failed == 0 ? "all " + std::to_string(rep.rows.size()) + " checks passed"
                            : std::to_string(failed) + " of " + std::to_string(rep.rows.size()) + " checks failed")
            << '\n';
    }
    return rep;
}

}  // namespace wcopt::harness
