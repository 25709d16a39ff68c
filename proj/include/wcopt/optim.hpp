#pragma once

#include "core.hpp"
#include "noise.hpp"
#include "problems.hpp"
#include "rng.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace wcopt {

// ---- schedules -------------------------------------------------------------

struct InverseSqrtStep {
    double gamma;  // eta_t = gamma / sqrt(t)
};
struct ConstantStep {
    double eta;
};
// eta_t = eta0 * min{1/lambda_t, 1/(G sqrt t)}
struct ClipCoupledAnytimeStep {
    double eta0, G;
};
// eta_t = eta0 * min{1/lambda_t, 1/(G sqrt T)}
struct ClipCoupledFixedTStep {
    double eta0, G;
    long T;
};
using StepSchedule = std::variant<InverseSqrtStep, ConstantStep, ClipCoupledAnytimeStep, ClipCoupledFixedTStep>;

struct NoClip {};
// lambda_t = max{2G, lam t^{1/p}}
struct AnytimeClip {
    double lam, p, G;
};
// lambda_t = max{2G, lam T^{1/p}}
struct FixedTClip {
    double lam, p, G;
    long T;
};
using ClipSchedule = std::variant<NoClip, AnytimeClip, FixedTClip>;

inline bool is_clip_coupled(const StepSchedule& s) {
    return std::holds_alternative<ClipCoupledAnytimeStep>(s) || std::holds_alternative<ClipCoupledFixedTStep>(s);
}

inline void validate(const StepSchedule& s) {
    std::visit(
        [](const auto& v) {
            using S = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<S, InverseSqrtStep>) require_arg(v.gamma > 0.0, "step: gamma must be positive");
            else if constexpr (std::is_same_v<S, ConstantStep>) require_arg(v.eta > 0.0, "step: eta must be positive");
            else {
                require_arg(v.eta0 > 0.0, "step: eta0 must be positive");
                require_arg(v.G > 0.0, "step: G must be positive");
                if constexpr (std::is_same_v<S, ClipCoupledFixedTStep>) require_arg(v.T >= 1, "step: T must be >= 1");
            }
        },
        s);
}

inline void validate(const ClipSchedule& c) {
    std::visit(
        [](const auto& v) {
            using C = std::decay_t<decltype(v)>;
            if constexpr (!std::is_same_v<C, NoClip>) {
                require_arg(v.lam >= 0.0 && std::isfinite(v.lam), "clip: lambda must be nonnegative");
                require_arg(v.p > 1.0 && v.p <= 2.0, "clip: p must lie in (1,2]");
                require_arg(v.G > 0.0, "clip: G must be positive");
                if constexpr (std::is_same_v<C, FixedTClip>) require_arg(v.T >= 1, "clip: T must be >= 1");
            }
        },
        c);
}

inline std::optional<double> clip_level(const ClipSchedule& c, long t) {
    require_arg(t >= 1, "clip_level: t must be >= 1");
    return std::visit(
        [&](const auto& v) -> std::optional<double> {
            using C = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<C, NoClip>) return std::nullopt;
            else if constexpr (std::is_same_v<C, AnytimeClip>)
                return std::max(2.0 * v.G, v.lam * std::pow(static_cast<double>(t), 1.0 / v.p));
            else
                return std::max(2.0 * v.G, v.lam * std::pow(static_cast<double>(v.T), 1.0 / v.p));
        },
        c);
}

inline double step_size(const StepSchedule& s, long t, std::optional<double> lambda_t = std::nullopt) {
    require_arg(t >= 1, "step_size: t must be >= 1");
    return std::visit(
        [&](const auto& v) -> double {
            using S = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<S, InverseSqrtStep>) return v.gamma / std::sqrt(static_cast<double>(t));
            else if constexpr (std::is_same_v<S, ConstantStep>) return v.eta;
            else {
                require_arg(lambda_t.has_value() && *lambda_t > 0.0, "clip-coupled step needs a positive lambda_t");
                double horizon = static_cast<double>(t);
                if constexpr (std::is_same_v<S, ClipCoupledFixedTStep>) horizon = static_cast<double>(v.T);
                return v.eta0 * std::min(1.0 / *lambda_t, 1.0 / (v.G * std::sqrt(horizon)));
            }
        },
        s);
}

// ---- clipping --------------------------------------------------------------

inline Vector clip(const Vector& y, double lambda) {
    require_arg(lambda > 0.0, "clip: lambda must be positive");
    const double n = y.norm();
    if (n <= lambda) return y;
    return y * (lambda / n);
}

// ---- runs ------------------------------------------------------------------

inline constexpr double kDivergenceNorm = 1e12;

struct StepRecord {
    long t = 0;
    Vector x;        // x_t
    Vector partial;  // oracle subgradient at x_t
    Vector g_tilde;  // pre-clip direction (equals g for unclipped runs)
    Vector g;        // direction actually used
    double eta = 0.0;
    std::optional<double> lambda;
    bool clip_active = false;
    double f_val = 0.0;

    Vector xi() const { return g - partial; }
};

struct Trajectory {
    std::vector<StepRecord> steps;  // t = 1..last recorded
    std::optional<Vector> x_final;  // x_{T+1} when the run finished finite
    bool diverged = false;
    long last_finite_index = 0;
    long horizon = 0;
    bool clipped = false;
    int batch = 1;
    std::string problem;
    std::uint64_t seed = 0, stream_index = 0;
};

struct RunOptions {
    std::optional<Vector> x0;  // defaults to the set center
};

namespace detail {

inline Vector initial_point(const ProblemInstance& p, const RunOptions& o) {
    Vector x = o.x0 ? *o.x0 : p.set.center();
    require_dim(x.size(), p.dim, "x0");
    require_arg(p.set.contains(x), "x0 must lie in the feasible set");
    return x;
}

inline bool diverged(const Vector& x) { return !x.allFinite() || x.norm() > kDivergenceNorm; }

template <class Direction>
Trajectory run_loop(const ProblemInstance& p, const StepSchedule& step, const ClipSchedule& clip_s, long T,
                    const RunOptions& o, Direction&& direction) {
    require_arg(T >= 1, "T must be >= 1");
    Trajectory tr;
    tr.horizon = T;
    tr.steps.reserve(static_cast<std::size_t>(T));
    Vector x = initial_point(p, o);
    for (long t = 1; t <= T; ++t) {
        StepRecord rec;
        rec.t = t;
        rec.x = x;
        rec.partial = p.grad(x);
        rec.f_val = p.value(x);
        rec.lambda = clip_level(clip_s, t);
        rec.eta = step_size(step, t, rec.lambda);
        direction(rec);
        Vector next = project(p.set, x - rec.eta * rec.g);
        tr.steps.push_back(std::move(rec));
        tr.last_finite_index = t;
        if (diverged(next)) {
            tr.diverged = true;
            return tr;
        }
        x = std::move(next);
    }
    tr.x_final = std::move(x);
    return tr;
}

inline void stamp(Trajectory& tr, const ProblemInstance& p, const RngStream& rng) {
    tr.problem = p.name;
    tr.seed = rng.seed();
    tr.stream_index = rng.stream_index();
}

}  // namespace detail

// Projected stochastic subgradient descent: x_{t+1} = Proj(x_t - eta_t (partial_t + xi_t)).
inline Trajectory run_ssgd(const ProblemInstance& p, const NoiseModel& noise, const StepSchedule& step, long T,
                           RngStream& rng, const RunOptions& o = {}) {
    validate(step);
    require_arg(!is_clip_coupled(step), "run_ssgd: step schedule must not be clip-coupled");
    Vector xi(p.dim);
    auto dir = [&](StepRecord& rec) {
        sample_noise_into(noise, p.dim, rng, xi);
        rec.g = rec.partial + xi;
        rec.g_tilde = rec.g;
    };
    Trajectory tr = detail::run_loop(p, step, NoClip{}, T, o, dir);
    detail::stamp(tr, p, rng);
    return tr;
}

// Clipped minibatch variant: g = clip(partial + mean of B noise draws, lambda_t).
inline Trajectory run_clipped_ssgd(const ProblemInstance& p, const NoiseModel& noise, const StepSchedule& step,
                                   const ClipSchedule& clip_s, int B, long T, RngStream& rng,
                                   const RunOptions& o = {}) {
    validate(step);
    validate(clip_s);
    require_arg(is_clip_coupled(step), "run_clipped_ssgd: step schedule must be clip-coupled");
    require_arg(!std::holds_alternative<NoClip>(clip_s), "run_clipped_ssgd: a clip schedule is required");
    require_arg(B >= 1, "run_clipped_ssgd: batch size must be >= 1");
    Vector draw(p.dim), acc(p.dim);
    auto dir = [&](StepRecord& rec) {
        acc.setZero();
        for (int n = 0; n < B; ++n) {
            sample_noise_into(noise, p.dim, rng, draw);
            acc += draw;
        }
        rec.g_tilde = rec.partial + acc / static_cast<double>(B);
        rec.clip_active = rec.g_tilde.norm() > *rec.lambda;
        rec.g = clip(rec.g_tilde, *rec.lambda);
    };
    Trajectory tr = detail::run_loop(p, step, clip_s, T, o, dir);
    tr.clipped = true;
    tr.batch = B;
    detail::stamp(tr, p, rng);
    return tr;
}

}  // namespace wcopt
