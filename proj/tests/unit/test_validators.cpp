#include <wcopt/validators.hpp>

#include <catch_amalgamated.hpp>

using namespace wcopt;
using Catch::Matchers::WithinRel;

namespace {

McCheckConfig mc(long n, std::uint64_t stream = 0) {
    McCheckConfig c;
    c.n_trials = n;
    c.seed = 17;
    c.stream = stream;
    return c;
}

}  // namespace

TEST_CASE("monte carlo config validation") {
    CHECK_THROWS_AS(check_batch_moment(make_gaussian_noise(1.0), 3, 2, 2.0, mc(9999)), Error);
    McCheckConfig c = mc(10000);
    c.confidence = 1.0;
    CHECK_THROWS_AS(check_batch_moment(make_gaussian_noise(1.0), 3, 2, 2.0, c), Error);
}

TEST_CASE("batch moment with B = 1 is an identity") {
    const auto r = check_batch_moment(make_pareto_noise(1.0, 1.5, 1.8), 5, 1, 1.5, mc(200000));
    CHECK(r.check.rhs == r.per_draw_moment);
    CHECK(r.check.pass);
    // heavy tails: the sample mean of ||xi||^p sits below its expectation more often than not
    CHECK_THAT(r.check.lhs, WithinRel(r.check.rhs, 0.25));
}

TEST_CASE("batch moment examples") {
    CHECK(check_batch_moment(make_pareto_noise(1.0, 1.5, 1.8), 5, 4, 1.5, mc(200000, 1)).check.pass);
    const auto g = check_batch_moment(make_gaussian_noise(1.0), 5, 8, 2.0, mc(200000, 2));
    CHECK(g.check.pass);
    // independent summands: E||sum||^2 = 8 sigma^2 exactly
    CHECK_THAT(g.check.lhs, WithinRel(8.0, 0.02));
    CHECK_THAT(g.check.rhs, WithinRel((2.0 - 1.0 / 8.0) * 8.0, 1e-14));
}

TEST_CASE("clip bounds with zero noise") {
    Vector mu = Vector::Zero(3);
    mu[0] = 1.0;
    const auto r = check_clip_bounds(mu, make_zero_noise(), 2, 4.0, 1.5, mc(10000));
    REQUIRE(r.checks.size() == 5);
    CHECK(r.pass());
    for (std::size_t i = 1; i < r.checks.size(); ++i) CHECK(r.checks[i].lhs == 0.0);
}

TEST_CASE("clip bounds with an enormous clip level") {
    const Vector mu = Vector::Zero(3);
    const auto r = check_clip_bounds(mu, make_pareto_noise(1.0, 1.5, 1.8), 1, 1e9, 1.5, mc(100000));
    CHECK(r.pass());
    CHECK(r.checks[1].lhs == 0.0);  // clip never active, so Xc - X is exactly 0
}

TEST_CASE("clip bounds at p = 1.5, lambda = 4, B = 1") {
    const Vector mu = Vector::Zero(10);
    const auto r = check_clip_bounds(mu, make_pareto_noise(1.0, 1.5, 1.8), 1, 4.0, 1.5, mc(1000000));
    CHECK(r.pathwise_violations == 0);
    for (const auto& c : r.checks) {
        INFO(c.name << " lhs " << c.lhs << " rhs " << c.rhs);
        CHECK(c.pass);
    }
}

TEST_CASE("clip bounds precondition") {
    Vector mu = Vector::Zero(2);
    mu[0] = 3.0;
    CHECK_THROWS_AS(check_clip_bounds(mu, make_gaussian_noise(1.0), 1, 4.0, 2.0, mc(10000)), Error);
}

TEST_CASE("clip bias shrinks as lambda grows") {
    Vector mu = Vector::Zero(4);
    mu[0] = 1.0;
    double prev = 1e300, prev_hw = 0.0;
    for (double lam : {2.0, 4.0, 8.0, 16.0}) {
        const auto r = check_clip_bounds(mu, make_pareto_noise(1.0, 1.5, 1.8), 1, lam, 1.5, mc(200000, 5));
        const auto& b = r.checks[1];
        CHECK(b.lhs <= prev + prev_hw + b.slack);
        prev = b.lhs;
        prev_hw = b.slack;
    }
}

TEST_CASE("pathwise lemma 1 across seeds") {
    const auto p = make_preset_problem("abs_reg_d10");
    MoreauConfig c;
    c.rho_bar = 2.0 * p.rho;
    c.inner_tol = 1e-8;
    const double G = p.lipschitz_g;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream r(seed, 0);
        const auto tr = run_clipped_ssgd(p, make_pareto_noise(1.0, 1.5, 1.8), ClipCoupledAnytimeStep{1.0, G},
                                         AnytimeClip{1.0, 1.5, G}, 1, 200, r);
        const auto rep = check_pathwise_lemma1(tr, p, c);
        REQUIRE(rep.steps == 200);
        REQUIRE(rep.pass);
    }
}

TEST_CASE("pathwise lemma 1 hand example and small steps") {
    AbsRegressionOptions o;
    o.rho = 0.0;
    const auto p = make_abs_regression(Matrix::Ones(1, 1), Vector::Zero(1), FeasibleSet::full_space(1), o);
    MoreauConfig c;
    c.rho_bar = 1.0;
    RngStream r(1, 0);
    RunOptions ro;
    ro.x0 = Vector::Constant(1, 3.0);
    auto rep = check_pathwise_lemma1(run_ssgd(p, make_zero_noise(), ConstantStep{1.0}, 1, r, ro), p, c);
    CHECK(rep.max_residual == -1.0);
    CHECK(rep.pass);
    rep = check_pathwise_lemma1(run_ssgd(p, make_gaussian_noise(0.5), InverseSqrtStep{0.01}, 200, r, ro), p, c);
    CHECK(rep.pass);
}

TEST_CASE("pathwise lemma 1 rejects diverged runs") {
    const auto p = make_preset_problem("phase_d10_m30_free");
    RngStream r(1, 0);
    RunOptions o;
    o.x0 = *p.planted;
    const auto tr = run_ssgd(p, make_gaussian_noise(1.0), ConstantStep{50.0}, 1000, r, o);
    REQUIRE(tr.diverged);
    MoreauConfig c;
    c.rho_bar = 3.0 * p.rho;
    CHECK_THROWS_AS(check_pathwise_lemma1(tr, p, c), Error);
}
