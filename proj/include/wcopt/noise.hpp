#pragma once

#include "core.hpp"
#include "rng.hpp"
#include "stats.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace wcopt {

struct ZeroNoise {};
struct GaussianNoise {
    double sigma;  // E||X||^2 = sigma^2
};
// Radius (sigma / 2^theta) W^theta, W ~ Exp(1): E exp((R/sigma)^{1/theta}) = 2 exactly.
struct SubWeibullNoise {
    double sigma, theta;
};
// Radius x_m U^{-1/alpha} with x_m chosen so that E||X||^p = sigma^p exactly.
struct ParetoNoise {
    double sigma, p, alpha;
};

using NoiseModel = std::variant<ZeroNoise, GaussianNoise, SubWeibullNoise, ParetoNoise>;

inline NoiseModel make_zero_noise() { return ZeroNoise{}; }

inline NoiseModel make_gaussian_noise(double sigma) {
    require_arg(sigma > 0.0 && std::isfinite(sigma), "gaussian noise: sigma must be positive");
    return GaussianNoise{sigma};
}

inline NoiseModel make_subweibull_noise(double sigma, double theta) {
    require_arg(sigma > 0.0 && std::isfinite(sigma), "subweibull noise: sigma must be positive");
    require_arg(theta >= 0.5 && std::isfinite(theta), "subweibull noise: theta must be >= 1/2");
    return SubWeibullNoise{sigma, theta};
}

inline NoiseModel make_pareto_noise(double sigma, double p, double alpha) {
    require_arg(sigma > 0.0 && std::isfinite(sigma), "pareto noise: sigma must be positive");
    require_arg(p > 1.0 && p <= 2.0, "pareto noise: p must lie in (1,2]");
    require_arg(alpha > p && alpha <= 2.0, "pareto noise: alpha must satisfy p < alpha <= 2");
    return ParetoNoise{sigma, p, alpha};
}

inline double pareto_scale(const ParetoNoise& n) { return n.sigma * std::pow((n.alpha - n.p) / n.alpha, 1.0 / n.p); }

inline std::string noise_name(const NoiseModel& m) {
    return std::visit(
        [](const auto& n) -> std::string {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ZeroNoise>) return "zero";
            else if constexpr (std::is_same_v<N, GaussianNoise>) return "gaussian";
            else if constexpr (std::is_same_v<N, SubWeibullNoise>) return "subweibull";
            else return "pareto";
        },
        m);
}

inline double noise_sigma(const NoiseModel& m) {
    return std::visit(
        [](const auto& n) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(n)>, ZeroNoise>) return 0.0;
            else return n.sigma;
        },
        m);
}

namespace detail {
inline void random_direction(int dim, RngStream& rng, Vector& out) {
    double n2;
    do {
        for (int j = 0; j < dim; ++j) out[j] = rng.normal();
        n2 = out.squaredNorm();
    } while (n2 == 0.0);
    out /= std::sqrt(n2);
}
}  // namespace detail

// Writes one draw into `out` (resized to dim).
inline void sample_noise_into(const NoiseModel& model, int dim, RngStream& rng, Vector& out) {
    require_arg(dim >= 1, "sample_noise: dim must be positive");
    if (out.size() != dim) out.resize(dim);
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ZeroNoise>) {
                out.setZero();
            } else if constexpr (std::is_same_v<N, GaussianNoise>) {
                const double s = n.sigma / std::sqrt(static_cast<double>(dim));
                for (int j = 0; j < dim; ++j) out[j] = s * rng.normal();
            } else if constexpr (std::is_same_v<N, SubWeibullNoise>) {
                const double w = rng.exponential();
                const double r = n.sigma * std::pow(w, n.theta) / std::pow(2.0, n.theta);
                detail::random_direction(dim, rng, out);
                out *= r;
            } else {
                const double u = rng.uniform_pos();
                const double r = pareto_scale(n) * std::pow(u, -1.0 / n.alpha);
                const int s = rng.sign();
                detail::random_direction(dim, rng, out);
                out *= s * r;
            }
        },
        model);
}

inline Vector sample_noise(const NoiseModel& model, int dim, RngStream& rng) {
    Vector out(dim);
    sample_noise_into(model, dim, rng, out);
    return out;
}

// Closed form E||X||^p for one draw when it is finite.
inline std::optional<double> noise_p_moment(const NoiseModel& model, double p, int dim) {
    require_arg(p > 0.0, "noise_p_moment: p must be positive");
    return std::visit(
        [&](const auto& n) -> std::optional<double> {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ZeroNoise>) {
                return 0.0;
            } else if constexpr (std::is_same_v<N, GaussianNoise>) {
                // ||X||^2 = (sigma^2/d) chi^2_d
                const double dd = dim;
                return std::pow(2.0 * n.sigma * n.sigma / dd, p / 2.0) *
                       std::exp(std::lgamma((dd + p) / 2.0) - std::lgamma(dd / 2.0));
            } else if constexpr (std::is_same_v<N, SubWeibullNoise>) {
                return std::pow(n.sigma / std::pow(2.0, n.theta), p) * std::tgamma(n.theta * p + 1.0);
            } else {
                if (p >= n.alpha) return std::nullopt;
                const double xm = pareto_scale(n);
                return std::pow(xm, p) * n.alpha / (n.alpha - p);
            }
        },
        model);
}

struct MomentReport {
    enum class Statistic { Mgf, PMoment };
    Statistic statistic = Statistic::PMoment;
    double estimate = 0.0;
    double target = 0.0;
    double half_width = 0.0;
    bool pass = false;
    std::optional<double> empirical_mgf;       // E exp((||X||/sigma)^{1/theta}) when meaningful
    std::optional<double> empirical_p_moment;  // E ||X||^p when meaningful
};

inline constexpr int kMomBlocks = 32;

// Checks the defining moment condition of a model at 99% confidence:
// sub-Weibull -> MGF statistic vs 2; Pareto -> E||X||^p vs sigma^p; Gaussian -> E||X||^2 vs sigma^2.
inline MomentReport verify_moment(const NoiseModel& model, int dim, long n_samples, RngStream& rng,
                                  double confidence = 0.99) {
    require_arg(n_samples >= 100000, "verify_moment: n_samples must be >= 1e5");
    MomentReport rep;
    if (std::holds_alternative<ZeroNoise>(model)) {
        rep.statistic = MomentReport::Statistic::PMoment;
        rep.pass = true;
        rep.empirical_mgf = 1.0;
        rep.empirical_p_moment = 0.0;
        return rep;
    }
    std::vector<double> stat(static_cast<std::size_t>(n_samples));
    Vector x(dim);
    bool heavy = false;
    double power = 2.0;
    if (auto* sw = std::get_if<SubWeibullNoise>(&model)) {
        rep.statistic = MomentReport::Statistic::Mgf;
        rep.target = 2.0;
        heavy = sw->theta > 1.0;
    } else if (auto* pa = std::get_if<ParetoNoise>(&model)) {
        power = pa->p;
        rep.target = std::pow(pa->sigma, pa->p);
        heavy = true;
    } else {
        const double s = std::get<GaussianNoise>(model).sigma;
        rep.target = s * s;
    }
    for (auto& v : stat) {
        sample_noise_into(model, dim, rng, x);
        const double r = x.norm();
        if (auto* sw = std::get_if<SubWeibullNoise>(&model))
            v = std::exp(std::pow(r / sw->sigma, 1.0 / sw->theta));
        else
            v = std::pow(r, power);
    }
    const Estimate e = heavy ? median_of_means(stat, kMomBlocks, confidence) : mean_estimate(stat, confidence);
    rep.estimate = e.value;
    rep.half_width = e.half_width;
    rep.pass = rep.estimate <= rep.target + rep.half_width;
    if (rep.statistic == MomentReport::Statistic::Mgf) rep.empirical_mgf = rep.estimate;
    else rep.empirical_p_moment = rep.estimate;
    return rep;
}

}  // namespace wcopt
