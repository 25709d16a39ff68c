#pragma once

#include "core.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace wcopt {

inline constexpr double kMembershipTol = 1e-12;

struct FullSpace {
    int dim;
};
struct Ball {
    Vector center;
    double radius;
};
struct Box {
    Vector lower, upper;
};

class FeasibleSet {
public:
    using Shape = std::variant<FullSpace, Ball, Box>;

    static FeasibleSet full_space(int dim) {
        require_arg(dim >= 1, "full_space: dim must be positive");
        return FeasibleSet(FullSpace{dim});
    }
    static FeasibleSet ball(Vector center, double radius) {
        require_arg(center.size() >= 1, "ball: empty center");
        require_arg(radius > 0.0 && std::isfinite(radius), "ball: radius must be positive and finite");
        require_arg(center.allFinite(), "ball: center must be finite");
        return FeasibleSet(Ball{std::move(center), radius});
    }
    static FeasibleSet box(Vector lower, Vector upper) {
        require_dim(upper.size(), lower.size(), "box bounds");
        require_arg(lower.size() >= 1, "box: empty bounds");
        require_arg((lower.array() <= upper.array()).all(), "box: lower must not exceed upper");
        require_arg(lower.allFinite() && upper.allFinite(), "box: bounds must be finite");
        return FeasibleSet(Box{std::move(lower), std::move(upper)});
    }

    const Shape& shape() const { return shape_; }
    bool is_full_space() const { return std::holds_alternative<FullSpace>(shape_); }
    const Ball* as_ball() const { return std::get_if<Ball>(&shape_); }
    const Box* as_box() const { return std::get_if<Box>(&shape_); }

    int dim() const {
        return std::visit(
            [](const auto& s) -> int {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FullSpace>) return s.dim;
                else if constexpr (std::is_same_v<S, Ball>) return static_cast<int>(s.center.size());
                else return static_cast<int>(s.lower.size());
            },
            shape_);
    }

    Vector center() const {
        return std::visit(
            [](const auto& s) -> Vector {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FullSpace>) return Vector::Zero(s.dim);
                else if constexpr (std::is_same_v<S, Ball>) return s.center;
                else return 0.5 * (s.lower + s.upper);
            },
            shape_);
    }

    bool contains(const Vector& y, double tol = kMembershipTol) const {
        if (y.size() != dim() || !y.allFinite()) return false;
        return std::visit(
            [&](const auto& s) -> bool {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, FullSpace>) return true;
                else if constexpr (std::is_same_v<S, Ball>) return (y - s.center).norm() <= s.radius + tol;
                else
                    return ((y.array() >= s.lower.array() - tol) && (y.array() <= s.upper.array() + tol)).all();
            },
            shape_);
    }

private:
    explicit FeasibleSet(Shape s) : shape_(std::move(s)) {}
    Shape shape_;
};

// Euclidean projection. Non-finite input is returned unchanged so divergence stays visible.
inline Vector project(const FeasibleSet& set, const Vector& y) {
    require_dim(y.size(), set.dim(), "project");
    if (!y.allFinite()) return y;
    return std::visit(
        [&](const auto& s) -> Vector {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, FullSpace>) {
                return y;
            } else if constexpr (std::is_same_v<S, Ball>) {
                const Vector diff = y - s.center;
                const double n = diff.norm();
                if (n <= s.radius) return y;
                return s.center + diff * (s.radius / n);
            } else {
                return y.cwiseMax(s.lower).cwiseMin(s.upper);
            }
        },
        set.shape());
}

// f(y) = (1/m) sum_i |r_i(y)| with r_i affine (a_i.y - b_i) or quadratic ((a_i.y)^2 - b_i).
// Carrying this structure lets the prox solver work exactly instead of by subgradients.
struct AbsTerms {
    enum class Residual { Affine, Quadratic };
    Residual residual;
    Matrix A;
    Vector b;

    int m() const { return static_cast<int>(A.rows()); }

    Vector residuals(const Vector& y) const {
        Vector z = A * y;
        if (residual == Residual::Affine) return z - b;
        return z.array().square().matrix() - b;
    }

    double value(const Vector& y) const { return residuals(y).cwiseAbs().sum() / m(); }

    Vector subgradient(const Vector& y) const {
        const Vector z = A * y;
        Vector w(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double r = residual == Residual::Affine ? z[i] - b[i] : z[i] * z[i] - b[i];
            const double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
            w[i] = residual == Residual::Affine ? s : 2.0 * s * z[i];
        }
        return A.transpose() * w / static_cast<double>(m());
    }

    // Diagonal square affine system: f is separable and its prox has a closed form.
    bool separable() const {
        if (residual != Residual::Affine || A.rows() != A.cols()) return false;
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < A.cols(); ++j)
                if (i != j && A(i, j) != 0.0) return false;
        return true;
    }
};

struct ProblemInstance {
    std::string name;
    int dim = 0;
    std::function<double(const Vector&)> objective;
    std::function<Vector(const Vector&)> subgradient;
    double rho = 0.0;          // weak-convexity modulus
    double lipschitz_g = 0.0;  // bound on subgradient norms over the set
    FeasibleSet set = FeasibleSet::full_space(1);
    double f_min = 0.0;        // reference value (not certified for large d)
    std::optional<AbsTerms> terms;
    std::optional<Vector> planted;

    double value(const Vector& x) const { return objective(x); }
    Vector grad(const Vector& x) const { return subgradient(x); }
};

// Generic constructor for user-supplied oracles.
inline ProblemInstance make_problem(std::string name, int dim, std::function<double(const Vector&)> f,
                                    std::function<Vector(const Vector&)> g, double rho, double G,
                                    FeasibleSet set, double f_min) {
    require_arg(dim >= 1, "make_problem: dim must be positive");
    require_arg(static_cast<bool>(f) && static_cast<bool>(g), "make_problem: oracles must be set");
    require_arg(rho >= 0.0 && std::isfinite(rho), "make_problem: rho must be nonnegative");
    require_arg(G > 0.0 && std::isfinite(G), "make_problem: G must be positive");
    require_dim(set.dim(), dim, "make_problem feasible set");
    ProblemInstance p;
    p.name = std::move(name);
    p.dim = dim;
    p.objective = std::move(f);
    p.subgradient = std::move(g);
    p.rho = rho;
    p.lipschitz_g = G;
    p.set = std::move(set);
    p.f_min = f_min;
    return p;
}

namespace detail {

inline void attach_terms(ProblemInstance& p, AbsTerms terms) {
    auto shared = std::make_shared<const AbsTerms>(terms);
    p.objective = [shared](const Vector& y) { return shared->value(y); };
    p.subgradient = [shared](const Vector& y) { return shared->subgradient(y); };
    p.terms = std::move(terms);
}

// Best value seen by deterministic projected subgradient descent; a reference, not a certificate.
inline double descend_min(const ProblemInstance& p, const Vector& start, int steps, double scale) {
    Vector x = project(p.set, start);
    double best = p.value(x);
    for (int t = 1; t <= steps; ++t) {
        const Vector g = p.grad(x);
        const double gn = g.norm();
        if (gn == 0.0) break;
        x = project(p.set, x - (scale / std::sqrt(static_cast<double>(t))) * g / gn);
        best = std::min(best, p.value(x));
    }
    return best;
}

// Exact minimum of an affine abs regression in d <= 2: a minimizer sits at a
// vertex of the arrangement of the lines a_i.y = b_i (or on one of them in 1-D).
inline std::optional<double> abs_reg_exact_min(const AbsTerms& t, const FeasibleSet& set) {
    const int d = static_cast<int>(t.A.cols());
    if (d > 2 || !set.is_full_space()) return std::nullopt;
    double best = std::numeric_limits<double>::infinity();
    const int m = t.m();
    if (d == 1) {
        for (int i = 0; i < m; ++i)
            if (t.A(i, 0) != 0.0) {
                Vector y(1);
                y[0] = t.b[i] / t.A(i, 0);
                best = std::min(best, t.value(y));
            }
    } else {
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) {
                Eigen::Matrix2d M;
                M << t.A(i, 0), t.A(i, 1), t.A(j, 0), t.A(j, 1);
                if (std::abs(M.determinant()) < 1e-14 * (M.norm() * M.norm() + 1e-300)) continue;
                Eigen::Vector2d rhs(t.b[i], t.b[j]);
                Vector y = M.lu().solve(rhs);
                best = std::min(best, t.value(y));
            }
    }
    if (!std::isfinite(best)) return std::nullopt;
    return best;
}

}  // namespace detail

struct AbsRegressionOptions {
    std::string name = "abs_regression";
    double rho = 1e-2;               // nominal; the objective is convex
    std::optional<double> f_min;     // supply when known
    std::optional<Vector> planted;
};

// f(x) = (1/m) sum |a_i.x - b_i|.
inline ProblemInstance make_abs_regression(const Matrix& A, const Vector& b, FeasibleSet set,
                                           const AbsRegressionOptions& opt = {}) {
    require_arg(A.rows() >= 1 && A.cols() >= 1, "abs_regression: empty design matrix");
    require_dim(b.size(), A.rows(), "abs_regression b");
    require_dim(set.dim(), A.cols(), "abs_regression feasible set");
    require_arg(A.allFinite() && b.allFinite(), "abs_regression: data must be finite");
    require_arg(opt.rho >= 0.0 && std::isfinite(opt.rho), "abs_regression: rho must be nonnegative");
    ProblemInstance p;
    p.name = opt.name;
    p.dim = static_cast<int>(A.cols());
    p.rho = opt.rho;
    p.lipschitz_g = A.rowwise().norm().sum() / static_cast<double>(A.rows());
    require_arg(p.lipschitz_g > 0.0, "abs_regression: all rows are zero");
    p.set = std::move(set);
    p.planted = opt.planted;
    detail::attach_terms(p, AbsTerms{AbsTerms::Residual::Affine, A, b});
    if (opt.f_min) {
        p.f_min = *opt.f_min;
    } else if (auto exact = detail::abs_reg_exact_min(*p.terms, p.set)) {
        p.f_min = *exact;
    } else {
        const Vector start = p.planted ? *p.planted : p.set.center();
        p.f_min = detail::descend_min(p, start, 10000, 1.0);
    }
    return p;
}

struct PhaseRetrievalOptions {
    std::string name = "phase_retrieval";
    std::optional<Vector> planted;
    std::optional<double> f_min;
    // Constants are always taken over Ball(0, radius); this overrides the set the
    // iterates live on (e.g. the full space for divergence experiments).
    std::optional<FeasibleSet> set_override;
};

// f(x) = (1/m) sum |(a_i.x)^2 - b_i| over Ball(0, radius).
inline ProblemInstance make_phase_retrieval(const Matrix& A, const Vector& b, double radius,
                                            const PhaseRetrievalOptions& opt = {}) {
    require_arg(A.rows() >= 1 && A.cols() >= 1, "phase_retrieval: empty design matrix");
    require_dim(b.size(), A.rows(), "phase_retrieval b");
    require_arg(A.allFinite() && b.allFinite(), "phase_retrieval: data must be finite");
    require_arg(radius > 0.0 && std::isfinite(radius), "phase_retrieval: radius must be positive");
    const int d = static_cast<int>(A.cols());
    ProblemInstance p;
    p.name = opt.name;
    p.dim = d;
    const double sq = A.rowwise().squaredNorm().sum() / static_cast<double>(A.rows());
    p.rho = 2.0 * sq;
    p.lipschitz_g = 2.0 * sq * radius;
    require_arg(p.rho > 0.0, "phase_retrieval: all rows are zero");
    p.set = opt.set_override ? *opt.set_override : FeasibleSet::ball(Vector::Zero(d), radius);
    require_dim(p.set.dim(), d, "phase_retrieval feasible set");
    p.planted = opt.planted;
    detail::attach_terms(p, AbsTerms{AbsTerms::Residual::Quadratic, A, b});
    if (opt.f_min) {
        p.f_min = *opt.f_min;
    } else {
        const Vector start = p.planted ? *p.planted : p.set.center();
        p.f_min = detail::descend_min(p, start, 10000, radius * 1e-2);
    }
    return p;
}

// ---- named presets ---------------------------------------------------------

namespace detail {
inline constexpr std::uint64_t kPresetSeed = 0x5EEDCAFEULL;

inline Matrix gaussian_rows(int m, int d, RngStream& rng) {
    Matrix A(m, d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = s * rng.normal();
    return A;
}

inline Vector unit_vector(int d, RngStream& rng) {
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = rng.normal();
    return v / v.norm();
}
}  // namespace detail

// Names: abs_value_d<d> (f = (1/d) sum |x_j|), abs_reg_d<d> (m = 2d planted, f_min = 0),
// phase_d<d>_m<m> (Ball(0,2), planted unit signal), phase_d<d>_m<m>_free (same data on the full space).
inline ProblemInstance make_preset_problem(const std::string& name) {
    std::smatch mt;
    static const std::regex abs_value(R"(abs_value_d(\d+))");
    static const std::regex abs_reg(R"(abs_reg_d(\d+))");
    static const std::regex phase(R"(phase_d(\d+)_m(\d+)(_free)?)");
    auto dim_of = [](const std::string& s) {
        const int v = std::stoi(s);
        require(v >= 1 && v <= 10000, ErrorKind::Config, "preset dimension out of range");
        return v;
    };
    if (std::regex_match(name, mt, abs_value)) {
        const int d = dim_of(mt[1]);
        AbsRegressionOptions o;
        o.name = name;
        o.f_min = 0.0;
        o.planted = Vector::Zero(d);
        return make_abs_regression(Matrix::Identity(d, d), Vector::Zero(d), FeasibleSet::full_space(d), o);
    }
    if (std::regex_match(name, mt, abs_reg)) {
        const int d = dim_of(mt[1]);
        RngStream rng(detail::kPresetSeed, 1000 + static_cast<std::uint64_t>(d));
        const Matrix A = detail::gaussian_rows(2 * d, d, rng);
        const Vector x = detail::unit_vector(d, rng);
        AbsRegressionOptions o;
        o.name = name;
        o.f_min = 0.0;
        o.planted = x;
        return make_abs_regression(A, A * x, FeasibleSet::full_space(d), o);
    }
    if (std::regex_match(name, mt, phase)) {
        const int d = dim_of(mt[1]);
        const int m = dim_of(mt[2]);
        RngStream rng(detail::kPresetSeed, 2000 + static_cast<std::uint64_t>(d) * 10007 + m);
        const Matrix A = detail::gaussian_rows(m, d, rng);
        const Vector x = detail::unit_vector(d, rng);
        PhaseRetrievalOptions o;
        o.name = name;
        o.planted = x;
        o.f_min = 0.0;
        if (mt[3].matched) o.set_override = FeasibleSet::full_space(d);
        return make_phase_retrieval(A, (A * x).array().square().matrix(), 2.0, o);
    }
    throw Error(ErrorKind::Config, "unknown problem preset: " + name);
}

inline std::vector<std::string> problem_preset_examples() {
    return {"abs_value_d1", "abs_reg_d10", "phase_d10_m30", "phase_d10_m30_free"};
}

// ---- CSV data --------------------------------------------------------------

inline Matrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw Error(ErrorKind::Io, path + ": bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(ErrorKind::Io, path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), ErrorKind::Io, path + ": no data");
    Matrix M(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
    return M;
}

// Accepts a single column or a single row.
inline Vector load_vector_csv(const std::string& path) {
    const Matrix M = load_matrix_csv(path);
    require(M.rows() == 1 || M.cols() == 1, ErrorKind::Io, path + ": expected a single row or column");
    return Eigen::Map<const Vector>(M.data(), M.size());
}

}  // namespace wcopt
