#pragma once

#include "core.hpp"
#include "problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace wcopt {

enum class ProxMethod { Auto, ClosedForm, Structured, Subgradient };

struct MoreauConfig {
    double rho_bar = 0.0;
    int inner_iters = 2000;    // subgradient fallback only
    double inner_tol = 1e-6;   // target on the certified distance bound
    ProxMethod method = ProxMethod::Auto;
};

struct ProxResult {
    Vector x_hat;
    double subopt_bound = 0.0;  // certified ||x_hat - prox(x)||
    double envelope = 0.0;      // f(x_hat) + rho_bar/2 ||x_hat - x||^2, an upper bound on f_{1/rho_bar}(x)
    double envelope_gap = 0.0;  // envelope - f_{1/rho_bar}(x) <= envelope_gap
    ProxMethod method = ProxMethod::Auto;
    bool warning = false;       // certified bound exceeds inner_tol
};

struct MoreauGradient {
    Vector grad;             // rho_bar (x - x_hat)
    double err_bound = 0.0;  // rho_bar * subopt_bound
    ProxResult prox;
};

inline void validate(const MoreauConfig& c, const ProblemInstance& p) {
    require_arg(std::isfinite(c.rho_bar) && c.rho_bar > p.rho, "moreau: rho_bar must exceed rho");
    require_arg(c.inner_iters >= 1, "moreau: inner_iters must be positive");
    require_arg(c.inner_tol > 0.0, "moreau: inner_tol must be positive");
}

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline double prox_objective(const ProblemInstance& p, double rho_bar, const Vector& x, const Vector& y) {
    return p.value(y) + 0.5 * rho_bar * (y - x).squaredNorm();
}

// Closed form for f(y) = (1/m) sum |a_i y_i - b_i| with diagonal A on the full space.
inline Vector separable_prox(const AbsTerms& t, double rho_bar, const Vector& x) {
    const double m = t.m();
    Vector y = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double a = t.A(i, i);
        if (a == 0.0) continue;
        const double c = t.b[i] / a;
        const double thr = std::abs(a) / m / rho_bar;
        const double u = x[i] - c;
        y[i] = c + (u > thr ? u - thr : (u < -thr ? u + thr : 0.0));
    }
    return y;
}

// Exact prox for structured abs losses on the full space or a ball.
// Huber smoothing with continuation, Newton inner steps, a multiplier search for
// an active ball, an active-set KKT polish, then a Lagrangian dual bound that
// certifies the result: for u in [-1,1]^m and nu >= 0,
//   D(u,nu) = min_y (1/m) sum u_i r_i(y) + rho_bar/2 ||y-x||^2 + nu/2 (||y-c||^2 - r^2)
// lower-bounds the prox value, so any feasible y gets gap P(y) - D.
class StructuredProx {
public:
    StructuredProx(const ProblemInstance& p, double rho_bar, const Vector& x)
        : t_(*p.terms), rb_(rho_bar), x_(x), m_(t_.m()), d_(static_cast<int>(x.size())), p_(p) {
        if (const Ball* b = p.set.as_ball()) {
            ball_ = true;
            c_ = b->center;
            r_ = b->radius;
        } else {
            c_ = Vector::Zero(d_);
        }
        mu_ = rho_bar - p.rho;
    }

    ProxResult solve() {
        const Vector r0 = t_.residuals(x_);
        const double scale = 1.0 + r0.cwiseAbs().maxCoeff();
        double eps = 0.1 * scale;
        const double eps_min = 1e-10 * scale;
        Vector y = ball_ ? project(p_.set, x_) : x_;
        double nu = 0.0;
        while (true) {
            y = newton(y, eps, nu);
            if (eps <= eps_min) break;
            eps = std::max(eps * 0.1, eps_min);
        }
        if (ball_ && (y - c_).norm() > r_) nu = multiplier_search(y, eps);

        const Vector smooth_u = smooth_duals(y, eps);
        ProxResult best = certify(y, smooth_u, nu);
        Vector u;
        Vector yp;
        if (polish(y, eps, nu, yp, u)) {
            // Primal and dual candidates certify independently; keep the tightest pairing.
            const Vector refined = refine_duals(yp, smooth_u, eps, y, nu);
            for (const Vector* dual : {static_cast<const Vector*>(&u), &smooth_u, &refined}) {
                ProxResult pol = certify(yp, *dual, nu);
                if (pol.envelope_gap < best.envelope_gap) best = pol;
            }
        }
        best.method = ProxMethod::Structured;
        return best;
    }

private:
    double h(double r, double eps) const { return std::abs(r) <= eps ? r * r / (2 * eps) : std::abs(r) - 0.5 * eps; }

    double smooth_value(const Vector& y, double eps, double nu) const {
        const Vector r = t_.residuals(y);
        double s = 0.0;
        for (int i = 0; i < m_; ++i) s += h(r[i], eps);
        return s / m_ + 0.5 * rb_ * (y - x_).squaredNorm() + 0.5 * nu * (y - c_).squaredNorm();
    }

    Vector smooth_duals(const Vector& y, double eps) const {
        const Vector r = t_.residuals(y);
        Vector u(m_);
        for (int i = 0; i < m_; ++i) u[i] = std::clamp(r[i] / eps, -1.0, 1.0);
        return u;
    }

    Vector newton(Vector y, double eps, double nu) const {
        const bool quad = t_.residual == AbsTerms::Residual::Quadratic;
        Vector w1(m_), w2(m_);
        Matrix H(d_, d_);
        for (int it = 0; it < 200; ++it) {
            const Vector z = t_.A * y;
            for (int i = 0; i < m_; ++i) {
                const double r = quad ? z[i] * z[i] - t_.b[i] : z[i] - t_.b[i];
                const double hp = std::clamp(r / eps, -1.0, 1.0);
                const double hpp = std::abs(r) < eps ? 1.0 / eps : 0.0;
                const double rp = quad ? 2.0 * z[i] : 1.0;
                w1[i] = hp * rp / m_;
                w2[i] = (hpp * rp * rp + (quad ? 2.0 * hp : 0.0)) / m_;
            }
            const Vector grad = t_.A.transpose() * w1 + rb_ * (y - x_) + nu * (y - c_);
            const double gtol = 1e-13 * (1.0 + rb_ * x_.norm() + nu * c_.norm() + t_.A.norm());
            if (grad.norm() <= gtol) break;
            H.noalias() = t_.A.transpose() * w2.asDiagonal() * t_.A;
            H.diagonal().array() += rb_ + nu;
            Eigen::LDLT<Matrix> ldlt(H);
            Vector dir = -ldlt.solve(grad);
            if (!dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad / (rb_ + nu);
            const double f0 = smooth_value(y, eps, nu);
            const double slope = grad.dot(dir);
            double step = 1.0;
            bool moved = false;
            while (step > 1e-14) {
                const Vector cand = y + step * dir;
                const double f1 = smooth_value(cand, eps, nu);
                if (f1 <= f0 + 1e-4 * step * slope) {
                    moved = (cand - y).norm() > 0.0;
                    y = cand;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
            if ((step * dir).norm() <= 1e-16 * (1.0 + y.norm())) break;
        }
        return y;
    }

    // Finds nu > 0 with ||y(nu) - c|| = r; y is updated in place.
    double multiplier_search(Vector& y, double eps) const {
        double lo = 0.0, hi = rb_;
        Vector y_hi = newton(y, eps, hi);
        while ((y_hi - c_).norm() > r_ && hi < 1e300) {
            lo = hi;
            y = y_hi;
            hi *= 4.0;
            y_hi = newton(y_hi, eps, hi);
        }
        // phi(nu) = 1/||y(nu)-c|| - 1/r is increasing; regula falsi with bisection fallback.
        auto phi = [&](const Vector& v) { return 1.0 / (v - c_).norm() - 1.0 / r_; };
        double f_lo = phi(y), f_hi = phi(y_hi);
        Vector y_lo = y;
        double nu = hi;
        y = y_hi;
        for (int it = 0; it < 100; ++it) {
            if (std::abs((y - c_).norm() - r_) <= 1e-14 * r_ || hi - lo <= 1e-15 * hi) break;
            double cand = (f_hi - f_lo) != 0.0 ? lo - f_lo * (hi - lo) / (f_hi - f_lo) : 0.5 * (lo + hi);
            if (!(cand > lo && cand < hi) || it % 3 == 2) cand = 0.5 * (lo + hi);
            nu = cand;
            y = newton(f_lo < 0 ? y_lo : y_hi, eps, nu);
            const double f = phi(y);
            if (f < 0.0) {
                lo = nu;
                f_lo = f;
                y_lo = y;
            } else {
                hi = nu;
                f_hi = f;
                y_hi = y;
            }
        }
        return nu;
    }

    // Solves the KKT system with residuals in the smoothing zone pinned to their kinks.
    bool polish(const Vector& y, double eps, double nu, Vector& out, Vector& u) const {
        const bool quad = t_.residual == AbsTerms::Residual::Quadratic;
        const Vector z = t_.A * y;
        const Vector r = t_.residuals(y);
        std::vector<int> E;
        std::vector<double> kink;
        Matrix M = Matrix::Identity(d_, d_) * (rb_ + nu);
        Vector rhs = rb_ * x_ + nu * c_;
        for (int i = 0; i < m_; ++i) {
            const bool kinkable = !quad || t_.b[i] > 0.0;
            if (kinkable && std::abs(r[i]) < eps) {
                E.push_back(i);
                kink.push_back(quad ? (z[i] >= 0 ? 1.0 : -1.0) * std::sqrt(t_.b[i]) : t_.b[i]);
                continue;
            }
            const double s = r[i] >= 0.0 ? 1.0 : -1.0;
            if (quad) M.noalias() += (2.0 * s / m_) * t_.A.row(i).transpose() * t_.A.row(i);
            else rhs.noalias() -= (s / m_) * t_.A.row(i).transpose();
        }
        const int k = static_cast<int>(E.size());
        Matrix K = Matrix::Zero(d_ + k, d_ + k);
        Vector R(d_ + k);
        K.topLeftCorner(d_, d_) = M;
        R.head(d_) = rhs;
        for (int j = 0; j < k; ++j) {
            K.block(0, d_ + j, d_, 1) = t_.A.row(E[j]).transpose();
            K.block(d_ + j, 0, 1, d_) = t_.A.row(E[j]);
            R[d_ + j] = kink[j];
        }
        const Vector sol = K.fullPivLu().solve(R);
        if (!sol.allFinite()) return false;
        out = sol.head(d_);
        const Vector rn = t_.residuals(out);
        u.resize(m_);
        for (int i = 0; i < m_; ++i) u[i] = rn[i] > 0.0 ? 1.0 : (rn[i] < 0.0 ? -1.0 : (r[i] >= 0 ? 1.0 : -1.0));
        for (int j = 0; j < k; ++j) {
            const double w = sol[d_ + j] * m_;
            const double ui = quad ? (kink[j] != 0.0 ? w / (2.0 * kink[j]) : 0.0) : w;
            u[E[j]] = std::clamp(ui, -1.0, 1.0);
        }
        return true;
    }

    // Multipliers that make y stationary for the Lagrangian: signs off the kinks, and on
    // the kinks a minimum-norm correction of the smoothed duals, clamped to [-1,1].
    Vector refine_duals(const Vector& y, const Vector& u0, double eps, const Vector& y_smooth, double nu) const {
        const bool quad = t_.residual == AbsTerms::Residual::Quadratic;
        const Vector z = t_.A * y;
        const Vector r_s = t_.residuals(y_smooth);
        std::vector<int> E;
        Vector v = -rb_ * (y - x_) - nu * (y - c_);
        Vector u = u0;
        for (int i = 0; i < m_; ++i) {
            const double rp = quad ? 2.0 * z[i] : 1.0;
            const bool kinkable = !quad || t_.b[i] > 0.0;
            if (kinkable && std::abs(r_s[i]) < eps) {
                E.push_back(i);
                continue;
            }
            u[i] = r_s[i] >= 0.0 ? 1.0 : -1.0;
            v.noalias() -= (u[i] * rp / m_) * t_.A.row(i).transpose();
        }
        if (E.empty()) return u;
        const int k = static_cast<int>(E.size());
        Matrix Bt(d_, k);
        Vector uE(k);
        for (int j = 0; j < k; ++j) {
            const double rp = quad ? 2.0 * z[E[j]] : 1.0;
            Bt.col(j) = t_.A.row(E[j]).transpose() * (rp / m_);
            uE[j] = u0[E[j]];
        }
        const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Bt);
        for (int it = 0; it < 4; ++it) {
            const Vector resid = v - Bt * uE;
            uE = (uE + cod.solve(resid)).cwiseMax(-1.0).cwiseMin(1.0);
        }
        for (int j = 0; j < k; ++j) u[E[j]] = uE[j];
        return u;
    }

    ProxResult certify(const Vector& y_raw, const Vector& u, double nu) const {
        ProxResult res;
        res.x_hat = ball_ ? project(p_.set, y_raw) : y_raw;
        const Vector rp = t_.residuals(res.x_hat);
        const double fy = rp.cwiseAbs().sum() / m_;
        const double prox_term = 0.5 * rb_ * (res.x_hat - x_).squaredNorm();
        res.envelope = fy + prox_term;

        const bool quad = t_.residual == AbsTerms::Residual::Quadratic;
        Matrix H = Matrix::Identity(d_, d_) * (rb_ + nu);
        Vector rhs = rb_ * x_ + nu * c_;
        if (quad) H.noalias() += (2.0 / m_) * t_.A.transpose() * u.asDiagonal() * t_.A;
        else rhs.noalias() -= t_.A.transpose() * u / m_;
        Eigen::LLT<Matrix> llt(H);
        double gap = std::numeric_limits<double>::infinity();
        if (llt.info() == Eigen::Success) {
            const Vector ys = llt.solve(rhs);
            const Vector rs = t_.residuals(ys);
            double lin = 0.0, lin_abs = 0.0;
            for (int i = 0; i < m_; ++i) {
                lin += u[i] * rs[i];
                lin_abs += std::abs(u[i] * rs[i]);
            }
            const double ball_term = ball_ ? 0.5 * nu * ((ys - c_).squaredNorm() - r_ * r_) : 0.0;
            const double ball_abs = ball_ ? 0.5 * nu * ((ys - c_).squaredNorm() + r_ * r_) : 0.0;
            const double dual = lin / m_ + 0.5 * rb_ * (ys - x_).squaredNorm() + ball_term;
            const double mag = fy + prox_term + lin_abs / m_ + 0.5 * rb_ * (ys - x_).squaredNorm() + ball_abs;
            // Rounding in both evaluations plus the second-order excess of the computed minimizer.
            const double lmax = rb_ + nu + 2.0 * p_.rho;
            const double cond = lmax / std::max(mu_ + nu, 1e-300);
            const double dy = 64.0 * kEps * cond * (1.0 + ys.norm());
            gap = std::max(0.0, res.envelope - dual) + 64.0 * kEps * mag + lmax * dy * dy;
            if (!std::isfinite(dual)) gap = std::numeric_limits<double>::infinity();
        }
        res.envelope_gap = gap;
        res.subopt_bound = std::sqrt(2.0 * gap / mu_);
        return res;
    }

    const AbsTerms& t_;
    double rb_;
    const Vector& x_;
    int m_, d_;
    const ProblemInstance& p_;
    bool ball_ = false;
    Vector c_;
    double r_ = 0.0;
    double mu_ = 0.0;
};

// Projected subgradient on the (rho_bar - rho)-strongly convex prox objective with
// steps 2/(mu (k+1)) and k-weighted averaging; the average is within
// 2 L / (mu sqrt(K+1)) of the prox point, L the largest subgradient norm seen.
inline ProxResult subgradient_prox(const ProblemInstance& p, const MoreauConfig& c, const Vector& x) {
    const double mu = c.rho_bar - p.rho;
    const int K = c.inner_iters;
    Vector y = project(p.set, x);
    Vector avg = Vector::Zero(x.size());
    double wsum = 0.0, L = 0.0;
    for (int k = 1; k <= K; ++k) {
        const Vector s = p.grad(y) + c.rho_bar * (y - x);
        L = std::max(L, s.norm());
        avg += static_cast<double>(k) * y;
        wsum += k;
        y = project(p.set, y - (2.0 / (mu * (k + 1))) * s);
    }
    ProxResult res;
    res.x_hat = project(p.set, avg / wsum);
    const double value_gap = 2.0 * L * L / (mu * (K + 1));
    // Displacement bound ||prox(x) - x|| <= 2 ||g(x)|| / mu gives a second certificate.
    const double alt = p.set.contains(x) ? (res.x_hat - x).norm() + 2.0 * p.grad(x).norm() / mu
                                         : std::numeric_limits<double>::infinity();
    res.subopt_bound = std::min(2.0 * L / (mu * std::sqrt(static_cast<double>(K + 1))), alt);
    res.envelope = prox_objective(p, c.rho_bar, x, res.x_hat);
    res.envelope_gap = value_gap;
    res.method = ProxMethod::Subgradient;
    return res;
}

}  // namespace detail

inline bool has_closed_form_prox(const ProblemInstance& p) {
    return p.terms && p.set.is_full_space() && p.terms->separable();
}

inline bool has_structured_prox(const ProblemInstance& p) {
    return p.terms && (p.set.is_full_space() || p.set.as_ball() != nullptr);
}

// x_hat = argmin_{y in X} f(y) + rho_bar/2 ||y - x||^2 with a certified distance bound.
inline ProxResult prox_point(const ProblemInstance& p, const MoreauConfig& c, const Vector& x) {
    validate(c, p);
    require_dim(x.size(), p.dim, "prox_point");
    require_arg(x.allFinite(), "prox_point: x must be finite");
    ProxMethod method = c.method;
    if (method == ProxMethod::Auto)
        method = has_closed_form_prox(p) ? ProxMethod::ClosedForm
                                         : (has_structured_prox(p) ? ProxMethod::Structured : ProxMethod::Subgradient);
    ProxResult res;
    switch (method) {
        case ProxMethod::ClosedForm: {
            require_arg(has_closed_form_prox(p), "prox_point: no closed form for this problem");
            res.x_hat = detail::separable_prox(*p.terms, c.rho_bar, x);
            res.envelope = detail::prox_objective(p, c.rho_bar, x, res.x_hat);
            res.method = ProxMethod::ClosedForm;
            break;
        }
        case ProxMethod::Structured: {
            require_arg(has_structured_prox(p), "prox_point: problem has no exploitable structure");
            res = detail::StructuredProx(p, c.rho_bar, x).solve();
            break;
        }
        default: res = detail::subgradient_prox(p, c, x);
    }
    res.warning = res.subopt_bound > c.inner_tol;
    return res;
}

inline MoreauGradient moreau_grad(const ProblemInstance& p, const MoreauConfig& c, const Vector& x) {
    MoreauGradient g;
    g.prox = prox_point(p, c, x);
    g.grad = c.rho_bar * (x - g.prox.x_hat);
    g.err_bound = c.rho_bar * g.prox.subopt_bound;
    return g;
}

inline double moreau_envelope(const ProblemInstance& p, const MoreauConfig& c, const Vector& x) {
    return prox_point(p, c, x).envelope;
}

struct DisplacementCheck {
    double displacement = 0.0;  // ||x_hat - x||
    double bound = 0.0;         // 2 ||g|| / (rho_bar - rho)
    double err = 0.0;           // solver slack added to the bound
    bool pass = false;
};

// ||x_hat - x|| <= 2 ||g|| / (rho_bar - rho) for g a subgradient at x.
inline DisplacementCheck displacement_bound_check(const ProblemInstance& p, const MoreauConfig& c, const Vector& x) {
    const ProxResult pr = prox_point(p, c, x);
    DisplacementCheck d;
    d.displacement = (pr.x_hat - x).norm();
    d.bound = 2.0 * p.grad(x).norm() / (c.rho_bar - p.rho);
    d.err = pr.subopt_bound + 1e-12 * (1.0 + x.norm());
    d.pass = d.displacement <= d.bound + d.err;
    return d;
}

}  // namespace wcopt
