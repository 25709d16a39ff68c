#pragma once

#include "core.hpp"
#include "moreau.hpp"
#include "optim.hpp"
#include "problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

namespace wcopt {

struct MetricRow {
    long t = 0;
    double grad_sq = 0.0;    // ||grad f_{1/rho_bar}(x_t)||^2 from the computed prox
    double err_bound = 0.0;  // certified bound on the error of ||grad||
    double eta = 0.0;
    std::optional<double> lambda;
    bool clip_active = false;
    double f_val = 0.0;
};

struct Lemma1Step {
    long t = 0;
    double lhs = 0.0, rhs = 0.0, tol = 0.0;
    double residual() const { return lhs - rhs; }
    bool pass() const { return lhs - rhs <= tol; }
};

struct RunReport {
    std::vector<MetricRow> rows;
    double weighted_avg = std::numeric_limits<double>::quiet_NaN();  // sum eta ||grad||^2 / sum eta
    double uniform_avg = std::numeric_limits<double>::quiet_NaN();   // (1/T) sum ||grad||^2
    double delta1 = 0.0;                                              // f_{1/rho_bar}(x_1) - f_min
    std::optional<double> lemma1_max_residual;
    std::optional<bool> lemma1_pass;
    bool diverged = false;
    long last_finite_index = 0;
    int inner_warnings = 0;
};

struct MetricsOptions {
    int max_points = 200;        // evaluated indices for long runs
    long full_eval_max_T = 1000; // evaluate every step (and check Lemma 1) up to this horizon
    bool lemma1 = true;
};

// Both sides of the pathwise descent inequality at step t:
//   ((rb-rho)/rb) eta ||grad_t||^2 <= D_t - D_{t+1} + rb eta <xhat_t - x_t, xi_t> + rb eta^2 (||xi_t||^2 + G^2)
// tol absorbs the certified prox errors at t and t+1 plus floating-point rounding.
inline Lemma1Step lemma1_step(const ProblemInstance& p, double rho_bar, const StepRecord& rec, const ProxResult& at_t,
                              const ProxResult& at_next) {
    Lemma1Step s;
    s.t = rec.t;
    const double rb = rho_bar, eta = rec.eta, G = p.lipschitz_g;
    const Vector xi = rec.xi();
    const Vector disp = at_t.x_hat - rec.x;
    const double grad_norm = rb * disp.norm();
    const double coef = (rb - p.rho) / rb;
    s.lhs = coef * eta * grad_norm * grad_norm;
    const double d_t = at_t.envelope - p.f_min, d_n = at_next.envelope - p.f_min;
    const double inner = rb * eta * disp.dot(xi);
    const double quad = rb * eta * eta * (xi.squaredNorm() + G * G);
    s.rhs = (d_t - d_n) + inner + quad;
    const double e = at_t.subopt_bound;
    const double slack = 4.0 * rb * (e * (rec.x.norm() + at_t.x_hat.norm() + xi.norm()) + e * e);
    const double rigorous = coef * eta * (2.0 * rb * grad_norm * e + rb * rb * e * e) + rb * eta * e * xi.norm();
    const double rounding = 32.0 * std::numeric_limits<double>::epsilon() *
                            (std::abs(d_t) + std::abs(d_n) + std::abs(s.lhs) + std::abs(inner) + quad + std::abs(p.f_min));
    s.tol = std::max(slack, rigorous) + at_t.envelope_gap + rounding;
    return s;
}

namespace detail {

// Geometric plus linear grid in [1, T]; always includes 1 and T.
inline std::vector<long> sample_indices(long T, int max_points) {
    std::set<long> idx{1, T};
    const int half = std::max(1, max_points / 2);
    for (int k = 0; k < half; ++k) {
        const double frac = half == 1 ? 1.0 : static_cast<double>(k) / (half - 1);
        idx.insert(std::clamp(static_cast<long>(std::llround(std::pow(static_cast<double>(T), frac))), 1L, T));
        idx.insert(std::clamp(1 + static_cast<long>(std::llround(frac * static_cast<double>(T - 1))), 1L, T));
    }
    return {idx.begin(), idx.end()};
}

}  // namespace detail

// Moreau-gradient metrics along a trajectory. Short runs evaluate every step;
// long runs evaluate a grid and weight each point by the block of steps it stands for.
inline RunReport trajectory_metrics(const Trajectory& tr, const ProblemInstance& p, const MoreauConfig& mc,
                                    const MetricsOptions& opt = {}) {
    validate(mc, p);
    RunReport rep;
    rep.diverged = tr.diverged;
    rep.last_finite_index = tr.last_finite_index;
    if (tr.steps.empty()) return rep;
    const long n = static_cast<long>(tr.steps.size());
    const bool full = tr.horizon <= opt.full_eval_max_T;
    const std::vector<long> idx = full ? [&] {
        std::vector<long> all(n);
        for (long i = 0; i < n; ++i) all[i] = i + 1;
        return all;
    }()
                                       : detail::sample_indices(n, opt.max_points);

    std::vector<ProxResult> prox(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const StepRecord& rec = tr.steps[idx[k] - 1];
        prox[k] = prox_point(p, mc, rec.x);
        rep.inner_warnings += prox[k].warning;
        MetricRow row;
        row.t = rec.t;
        const double g = mc.rho_bar * (rec.x - prox[k].x_hat).norm();
        row.grad_sq = g * g;
        row.err_bound = mc.rho_bar * prox[k].subopt_bound;
        row.eta = rec.eta;
        row.lambda = rec.lambda;
        row.clip_active = rec.clip_active;
        row.f_val = rec.f_val;
        rep.rows.push_back(row);
    }
    rep.delta1 = prox.front().envelope - p.f_min;

    if (!tr.diverged) {
        // Block k covers steps idx[k] .. idx[k+1]-1.
        double w_sum = 0.0, w_acc = 0.0, u_acc = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const long lo = idx[k], hi = k + 1 < idx.size() ? idx[k + 1] - 1 : n;
            double eta_block = 0.0;
            for (long t = lo; t <= hi; ++t) eta_block += tr.steps[t - 1].eta;
            w_sum += eta_block;
            w_acc += eta_block * rep.rows[k].grad_sq;
            u_acc += static_cast<double>(hi - lo + 1) * rep.rows[k].grad_sq;
        }
        rep.weighted_avg = w_acc / w_sum;
        rep.uniform_avg = u_acc / static_cast<double>(n);
    }

    if (full && opt.lemma1 && tr.x_final) {
        const ProxResult last = prox_point(p, mc, *tr.x_final);
        double worst = -std::numeric_limits<double>::infinity();
        bool ok = true;
        for (long i = 0; i < n; ++i) {
            const Lemma1Step s = lemma1_step(p, mc.rho_bar, tr.steps[i], prox[i], i + 1 < n ? prox[i + 1] : last);
            worst = std::max(worst, s.residual());
            ok = ok && s.pass();
        }
        rep.lemma1_max_residual = worst;
        rep.lemma1_pass = ok;
    }
    return rep;
}

}  // namespace wcopt
