#pragma once

#include "core.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wcopt {

// Lanczos approximation (g = 671/128, 14 terms; relative error ~1e-14 on [0.5, 20])
// with reflection below 1/2.
inline double gamma_fn(double x) {
    static constexpr std::array<double, 14> c = {
        57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,     -0.491913816097620199,
        .339946499848118887e-4,  .465236289270485756e-4,  -.983744753048795646e-4, .158088703224912494e-3,
        -.210264441724104883e-3, .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
        -.261908384015814087e-4, .368991826595316234e-5};
    require_arg(std::isfinite(x), "gamma: argument must be finite");
    if (x < 0.5) {
        require_arg(x != std::floor(x), "gamma: pole at non-positive integer");
        return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma_fn(1.0 - x));
    }
    // Integers up to 20 are returned exactly.
    if (x == std::round(x) && x <= 20.0) {
        double f = 1.0;
        for (int k = 2; k < static_cast<int>(x); ++k) f *= k;
        return f;
    }
    const double t = x + 671.0 / 128.0;
    double ser = 0.999999999999997092, y = x;
    for (double ci : c) ser += ci / ++y;
    return std::exp((x + 0.5) * std::log(t) - t) * 2.5066282746310005 * ser / x;
}

enum class BoundKind { Thm1, Cor1, Cor2, Thm2, Thm3, Thm4, Thm5 };

inline std::string bound_name(BoundKind b) {
    switch (b) {
        case BoundKind::Thm1: return "thm1";
        case BoundKind::Cor1: return "cor1";
        case BoundKind::Cor2: return "cor2";
        case BoundKind::Thm2: return "thm2";
        case BoundKind::Thm3: return "thm3";
        case BoundKind::Thm4: return "thm4";
        default: return "thm5";
    }
}

inline BoundKind parse_bound(const std::string& s) {
    for (BoundKind b : {BoundKind::Thm1, BoundKind::Cor1, BoundKind::Cor2, BoundKind::Thm2, BoundKind::Thm3,
                        BoundKind::Thm4, BoundKind::Thm5})
        if (bound_name(b) == s) return b;
    throw Error(ErrorKind::Config, "unknown bound: " + s);
}

// Inputs of the bound formulas; each formula names what it needs.
struct TheoryConstants {
    std::optional<double> theta, sigma, G, rho, delta, T, p, lam, eta0, B, delta1, gamma;
    // Schedule sums for the general Theorem 1 bound.
    std::optional<double> sum_eta, sum_eta_sq, max_eta;
};

namespace detail {
inline double need(const std::optional<double>& v, const char* name) {
    if (!v) throw Error(ErrorKind::MissingConstant, std::string("theory_bound: missing constant ") + name);
    return *v;
}
}  // namespace detail

#define WCOPT_NEED(c, field) detail::need((c).field, #field)

// Lemma 2 case constants.
inline std::pair<double, double> lemma2_ab(double theta, double T, double delta) {
    require_arg(theta >= 0.5, "lemma2: theta must be >= 1/2");
    if (theta == 0.5) return {2.0, 0.0};
    if (theta <= 1.0) return {std::pow(4.0 * theta, 2.0 * theta) * std::exp(2.0), std::pow(4.0 * theta, theta)};
    const double L = std::pow(std::log(4.0 * T / delta), theta - 1.0);
    const double a = (std::pow(2.0, 2.0 * theta + 1.0) + 2.0) * gamma_fn(2.0 * theta + 1.0) +
                     std::pow(2.0, 3.0 * theta) * gamma_fn(3.0 * theta + 1.0) / (3.0 * L);
    return {a, 2.0 * L};
}

// D(theta) of the main-text theorem.
inline double d_theta(double theta, double sigma, double G, double T, double delta) {
    return std::max(G * std::pow(std::log(T / delta), theta - 1.0) * sigma,
                    std::pow(2.0, 3.0 * theta + 1.0) * gamma_fn(3.0 * theta + 1.0) * sigma * sigma);
}

// D-hat(theta) of the full-version theorem.
inline double d_hat_theta(double theta, double sigma, double G, double T, double delta) {
    return std::max(15.0 * std::pow(2.0, 3.0 * theta + 1.0) * gamma_fn(3.0 * theta + 1.0) * sigma * sigma,
                    36.0 * G * sigma * std::pow(std::log(8.0 * T / delta), theta - 1.0));
}

// max{lam / T^{(p-1)/p}, G / sqrt T}
inline double clip_rate_factor(double lam, double G, double T, double p) {
    return std::max(lam / std::pow(T, (p - 1.0) / p), G / std::sqrt(T));
}

namespace detail {

// Pieces shared by Theorem 1 and its corollaries: the coefficient on max eta
// (over sum eta) and on rho sum eta^2 (over sum eta), per theta branch.
struct Thm1Terms {
    double max_eta_coef;  // coefficient of max eta, log(4/delta) included
    double eta_sq_coef;   // coefficient of rho sum eta^2
};

inline Thm1Terms thm1_terms(const TheoryConstants& c) {
    const double theta = WCOPT_NEED(c, theta), sigma = WCOPT_NEED(c, sigma), G = WCOPT_NEED(c, G);
    const double delta = WCOPT_NEED(c, delta);
    require_arg(theta >= 0.5, "theory_bound: theta must be >= 1/2");
    require_arg(delta > 0.0 && delta < 1.0, "theory_bound: delta must lie in (0,1)");
    const double L = std::log(4.0 / delta), s2 = sigma * sigma;
    if (theta == 0.5) return {36.0 * s2 * L, 98.0 * L * s2 + 9.0 * G * G};
    if (theta <= 1.0)
        return {std::max(2130.0 * s2, 72.0 * G * sigma) * L, 2130.0 * s2 * std::pow(L, 2.0 * theta) + 9.0 * G * G};
    const double T = WCOPT_NEED(c, T);
    return {d_hat_theta(theta, sigma, G, T, delta) * L,
            18.0 * std::pow(11.0 * theta * L, 2.0 * theta) * s2 + 9.0 * G * G};
}

}  // namespace detail

// Constant step of Corollary 2 (theta > 1 uses the appendix form with sigma^2 kept).
inline double cor2_step(const TheoryConstants& c) {
    const double rho = WCOPT_NEED(c, rho), d1 = WCOPT_NEED(c, delta1), T = WCOPT_NEED(c, T);
    const double k = detail::thm1_terms(c).eta_sq_coef;
    return std::sqrt(3.0 * d1 / (rho * k * T));
}

// Right-hand side of the named bound, full-version constants where the appendix gives them.
inline double theory_bound(const TheoryConstants& c, BoundKind which) {
    switch (which) {
        case BoundKind::Thm1: {
            const auto k = detail::thm1_terms(c);
            const double se = WCOPT_NEED(c, sum_eta), se2 = WCOPT_NEED(c, sum_eta_sq), me = WCOPT_NEED(c, max_eta);
            const double rho = WCOPT_NEED(c, rho), d1 = WCOPT_NEED(c, delta1);
            return (3.0 * d1 + k.max_eta_coef * me) / se + k.eta_sq_coef * rho * se2 / se;
        }
        case BoundKind::Cor1: {
            const auto k = detail::thm1_terms(c);
            const double T = WCOPT_NEED(c, T), g = WCOPT_NEED(c, gamma), rho = WCOPT_NEED(c, rho);
            const double d1 = WCOPT_NEED(c, delta1), sT = std::sqrt(T);
            return 3.0 * d1 / (g * sT) + k.max_eta_coef / sT + g * rho * k.eta_sq_coef * std::log(std::exp(1.0) * T) / sT;
        }
        case BoundKind::Cor2: {
            const auto k = detail::thm1_terms(c);
            const double T = WCOPT_NEED(c, T), rho = WCOPT_NEED(c, rho), d1 = WCOPT_NEED(c, delta1);
            return std::sqrt(3.0 * rho * d1 * k.eta_sq_coef / T) + k.max_eta_coef / T;
        }
        default: break;
    }
    const double T = WCOPT_NEED(c, T), G = WCOPT_NEED(c, G), p = WCOPT_NEED(c, p), lam = WCOPT_NEED(c, lam);
    const double sigma = WCOPT_NEED(c, sigma), rho = WCOPT_NEED(c, rho), eta0 = WCOPT_NEED(c, eta0);
    const double B = WCOPT_NEED(c, B), d1 = WCOPT_NEED(c, delta1);
    require_arg(lam > 0.0, "theory_bound: lam must be positive");
    const double scale = clip_rate_factor(lam, G, T, p);
    const double noise = std::pow(sigma / lam, p) * std::pow(B, 1.0 - p);
    const double logeT = std::log(std::exp(1.0) * T);
    switch (which) {
        case BoundKind::Thm2: {
            const double delta = WCOPT_NEED(c, delta);
            return (2.0 * d1 / eta0 + (84.0 * G + 364.0 * rho * eta0) * (noise * logeT + std::log(4.0 / delta)) +
                    4.0 * rho * eta0 * logeT) *
                   scale;
        }
        case BoundKind::Thm3: {
            const double delta = WCOPT_NEED(c, delta);
            return (d1 / eta0 + (G + rho * eta0) * (noise + std::log(1.0 / delta))) * scale;
        }
        case BoundKind::Thm4:
            return (2.0 * d1 / eta0 + (32.0 * G + 320.0 * rho * eta0) * noise * logeT + 4.0 * rho * eta0 * logeT) *
                   scale;
        default: return (d1 / eta0 + (rho * eta0 + G) * noise + rho * eta0) * scale;
    }
}

#undef WCOPT_NEED

// Least-squares slope of log(metric) against log(T).
inline double fit_rate(const std::vector<std::pair<double, double>>& points) {
    require_arg(points.size() >= 4, "fit_rate: need at least 4 points");
    double sx = 0, sy = 0;
    for (const auto& [T, v] : points) {
        require_arg(T > 0.0, "fit_rate: T must be positive");
        require_arg(v > 0.0 && std::isfinite(v), "fit_rate: metric must be positive");
        sx += std::log(T);
        sy += std::log(v);
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double sxy = 0, sxx = 0;
    for (const auto& [T, v] : points) {
        const double dx = std::log(T) - mx;
        sxy += dx * (std::log(v) - my);
        sxx += dx * dx;
    }
    require_arg(sxx > 0.0, "fit_rate: T values must not all coincide");
    return sxy / sxx;
}

}  // namespace wcopt
