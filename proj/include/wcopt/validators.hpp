#pragma once

#include "core.hpp"
#include "metrics.hpp"
#include "moreau.hpp"
#include "noise.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "stats.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace wcopt {

struct McCheckConfig {
    long n_trials = 100000;
    double confidence = 0.99;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
};

inline void validate(const McCheckConfig& c) {
    require_arg(c.n_trials >= 10000, "monte carlo check: n_trials must be >= 1e4");
    require_arg(c.confidence > 0.0 && c.confidence < 1.0, "monte carlo check: confidence must lie in (0,1)");
}

struct BoundCheck {
    std::string name;
    double lhs = 0.0;    // estimate
    double rhs = 0.0;    // printed bound
    double slack = 0.0;  // confidence half width added to the bound
    bool pass = false;
};

struct BatchMomentReport {
    BoundCheck check;
    double per_draw_moment = 0.0;
};

// E||sum_{n<=B} X_n||^p <= (2 - 1/B) B E||X||^p, estimated by median of means.
inline BatchMomentReport check_batch_moment(const NoiseModel& model, int dim, int B, double p,
                                            const McCheckConfig& cfg) {
    validate(cfg);
    require_arg(B >= 1, "check_batch_moment: B must be >= 1");
    require_arg(p > 1.0 && p <= 2.0, "check_batch_moment: p must lie in (1,2]");
    const auto moment = noise_p_moment(model, p, dim);
    require_arg(moment.has_value(), "check_batch_moment: model has no finite p-th moment");
    RngStream rng(cfg.seed, cfg.stream);
    std::vector<double> stat(static_cast<std::size_t>(cfg.n_trials));
    Vector draw(dim), sum(dim);
    for (auto& v : stat) {
        sum.setZero();
        for (int n = 0; n < B; ++n) {
            sample_noise_into(model, dim, rng, draw);
            sum += draw;
        }
        v = std::pow(sum.norm(), p);
    }
    const Estimate e = median_of_means(stat, kMomBlocks, cfg.confidence);
    BatchMomentReport rep;
    rep.per_draw_moment = *moment;
    rep.check.name = "batch_moment";
    rep.check.lhs = e.value;
    rep.check.rhs = (2.0 - 1.0 / B) * B * *moment;
    rep.check.slack = e.half_width;
    rep.check.pass = rep.check.lhs <= rep.check.rhs + rep.check.slack;
    return rep;
}

struct ClipBoundReport {
    // (i) pathwise, (ii) bias, (iii) E||Xc - mu||^2, (iv) E||Xc - E Xc||^2, (v) ||E Xc - mu||^2
    std::vector<BoundCheck> checks;
    long pathwise_violations = 0;
    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

// Monte Carlo check of the clipped-mean bounds with epsilon = 1 constants.
// sigma^p is the model's exact per-draw p-th moment bound.
inline ClipBoundReport check_clip_bounds(const Vector& mu, const NoiseModel& model, int B, double lambda, double p,
                                         const McCheckConfig& cfg) {
    validate(cfg);
    require_arg(B >= 1, "check_clip_bounds: B must be >= 1");
    require_arg(p > 1.0 && p <= 2.0, "check_clip_bounds: p must lie in (1,2]");
    require_arg(lambda > 0.0 && lambda >= 2.0 * mu.norm(), "check_clip_bounds: need lambda >= 2 ||mu||");
    const int dim = static_cast<int>(mu.size());
    const double sigma_p = std::pow(noise_sigma(model), p);
    const double batch = (2.0 - 1.0 / B) * sigma_p / std::pow(static_cast<double>(B), p - 1.0);
    const double bias_rhs = 2.0 * batch * std::pow(lambda, 1.0 - p);
    const double var_rhs = 10.0 * batch * std::pow(lambda, 2.0 - p);

    // Streaming block sums keep memory flat; a second replay of the same stream
    // checks the pathwise bound against the final sample mean.
    const auto n = static_cast<std::size_t>(cfg.n_trials);
    const std::size_t K = kMomBlocks;
    Matrix blk_diff = Matrix::Zero(dim, K);  // sums of Xc - X (bias, using E[X] = mu)
    Matrix blk_c = Matrix::Zero(dim, K);     // sums of Xc
    std::vector<double> blk_sq_mu(K, 0.0), blk_sq_c(K, 0.0);
    std::vector<double> blk_n(K, 0.0);
    Vector draw(dim), acc(dim), x(dim), c(dim);
    auto next = [&](RngStream& rng) {
        acc.setZero();
        for (int b = 0; b < B; ++b) {
            sample_noise_into(model, dim, rng, draw);
            acc += draw;
        }
        x = mu + acc / static_cast<double>(B);
        const double nx = x.norm();
        c = nx > lambda ? Vector(x * (lambda / nx)) : x;
    };
    {
        RngStream rng(cfg.seed, cfg.stream);
        for (std::size_t k = 0; k < n; ++k) {
            next(rng);
            const std::size_t b = block_of(k, n, K);
            blk_diff.col(b) += c - x;
            blk_c.col(b) += c;
            blk_sq_mu[b] += (c - mu).squaredNorm();
            blk_sq_c[b] += c.squaredNorm();
            blk_n[b] += 1.0;
        }
    }
    const Vector mean_c = blk_c.rowwise().sum() / static_cast<double>(n);

    ClipBoundReport rep;
    // (i) pathwise against the sample mean, whose norm is at most lambda.
    double worst = 0.0;
    {
        RngStream rng(cfg.seed, cfg.stream);
        for (std::size_t k = 0; k < n; ++k) {
            next(rng);
            const double dev = (c - mean_c).norm();
            worst = std::max(worst, dev);
            if (dev > 2.0 * lambda * (1.0 + 1e-12)) ++rep.pathwise_violations;
        }
    }
    rep.checks.push_back({"pathwise", worst, 2.0 * lambda, 0.0, rep.pathwise_violations == 0});

    // (ii) bias = ||E[Xc - X]||, coordinatewise median of means.
    Vector bias(dim);
    double bias_hw2 = 0.0;
    std::vector<double> means(K);
    for (int j = 0; j < dim; ++j) {
        for (std::size_t b = 0; b < K; ++b) means[b] = blk_diff(j, b) / blk_n[b];
        const Estimate e = median_of_block_means(means, cfg.confidence);
        bias[j] = e.value;
        bias_hw2 += e.half_width * e.half_width;
    }
    const double bias_est = bias.norm(), bias_hw = std::sqrt(bias_hw2);
    rep.checks.push_back({"bias", bias_est, bias_rhs, bias_hw, bias_est <= bias_rhs + bias_hw});

    // (iii) E||Xc - mu||^2
    for (std::size_t b = 0; b < K; ++b) means[b] = blk_sq_mu[b] / blk_n[b];
    const Estimate e3 = median_of_block_means(means, cfg.confidence);
    rep.checks.push_back({"second_moment", e3.value, var_rhs, e3.half_width, e3.value <= var_rhs + e3.half_width});

    // (iv) E||Xc - E Xc||^2, expanded around the overall sample mean
    for (std::size_t b = 0; b < K; ++b)
        means[b] = std::max(0.0, blk_sq_c[b] / blk_n[b] - 2.0 * mean_c.dot(blk_c.col(b)) / blk_n[b] +
                                     mean_c.squaredNorm());
    const Estimate e4 = median_of_block_means(means, cfg.confidence);
    rep.checks.push_back({"variance", e4.value, var_rhs, e4.half_width, e4.value <= var_rhs + e4.half_width});

    // (v) ||E Xc - mu||^2 from the bias estimate
    const double v5 = bias_est * bias_est;
    const double hw5 = (bias_est + bias_hw) * (bias_est + bias_hw) - v5;
    rep.checks.push_back({"bias_squared", v5, var_rhs, hw5, v5 <= var_rhs + hw5});
    return rep;
}

struct Lemma1Report {
    double max_residual = 0.0;   // max over steps of LHS - RHS
    double max_violation = 0.0;  // max over steps of LHS - RHS - tol
    long steps = 0;
    long violations = 0;
    bool pass = false;
};

// Evaluates the pathwise descent inequality at every recorded step.
inline Lemma1Report check_pathwise_lemma1(const Trajectory& tr, const ProblemInstance& p, const MoreauConfig& mc) {
    validate(mc, p);
    require_arg(!tr.diverged && tr.x_final.has_value(), "check_pathwise_lemma1: trajectory diverged");
    require_arg(!tr.steps.empty(), "check_pathwise_lemma1: empty trajectory");
    for (const auto& s : tr.steps)
        require_arg(s.g.size() == p.dim && s.partial.size() == p.dim, "check_pathwise_lemma1: missing noise records");
    Lemma1Report rep;
    rep.max_residual = -std::numeric_limits<double>::infinity();
    rep.max_violation = -std::numeric_limits<double>::infinity();
    ProxResult cur = prox_point(p, mc, tr.steps.front().x);
    for (std::size_t i = 0; i < tr.steps.size(); ++i) {
        const Vector& xn = i + 1 < tr.steps.size() ? tr.steps[i + 1].x : *tr.x_final;
        ProxResult next = prox_point(p, mc, xn);
        const Lemma1Step s = lemma1_step(p, mc.rho_bar, tr.steps[i], cur, next);
        rep.max_residual = std::max(rep.max_residual, s.residual());
        rep.max_violation = std::max(rep.max_violation, s.residual() - s.tol);
        rep.violations += !s.pass();
        ++rep.steps;
        cur = std::move(next);
    }
    rep.pass = rep.violations == 0;
    return rep;
}

}  // namespace wcopt
