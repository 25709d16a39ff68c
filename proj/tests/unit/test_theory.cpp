#include <wcopt/rng.hpp>
#include <wcopt/theory.hpp>

#include <catch_amalgamated.hpp>

using namespace wcopt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TheoryConstants clip_constants(double T) {
    TheoryConstants c;
    c.G = 1.0;
    c.rho = 0.01;
    c.sigma = 1.0;
    c.lam = 1.0;
    c.p = 1.5;
    c.eta0 = 1.0;
    c.B = 1.0;
    c.delta1 = 0.5;
    c.delta = 0.05;
    c.T = T;
    return c;
}

}  // namespace

TEST_CASE("gamma function") {
    CHECK(gamma_fn(4.0) == 6.0);
    CHECK(gamma_fn(1.0) == 1.0);
    CHECK(gamma_fn(11.0) == 3628800.0);
    CHECK_THAT(gamma_fn(0.5), WithinRel(std::sqrt(std::numbers::pi), 1e-10));
    for (double x = 0.5; x <= 20.0; x += 0.37) REQUIRE_THAT(gamma_fn(x), WithinRel(std::tgamma(x), 1e-10));
    CHECK_THROWS_AS(gamma_fn(0.0), Error);
    CHECK_THROWS_AS(gamma_fn(-2.0), Error);
}

TEST_CASE("spot checks") {
    CHECK(clip_rate_factor(1.0, 1.0, 1e4, 2.0) == 0.01);
    CHECK(d_theta(1.0, 1.0, 0.0, 1e4, 0.05) == 16.0 * 6.0);
}

TEST_CASE("lemma 2 constants") {
    const auto [a, b] = lemma2_ab(0.5, 100, 0.05);
    CHECK(a == 2.0);
    CHECK(b == 0.0);
    // continuity inside each branch
    for (double th : {0.7, 1.5}) {
        const auto lo = lemma2_ab(th, 100, 0.05), hi = lemma2_ab(th + 1e-7, 100, 0.05);
        CHECK_THAT(lo.first, WithinRel(hi.first, 1e-5));
        CHECK_THAT(lo.second, WithinRel(hi.second, 1e-5));
    }
}

TEST_CASE("theorem 1 with sigma = 0 reduces to the deterministic bound") {
    TheoryConstants c;
    c.theta = 0.5;
    c.sigma = 0.0;
    c.G = 2.0;
    c.rho = 0.1;
    c.delta = 0.05;
    c.delta1 = 3.0;
    c.sum_eta = 10.0;
    c.sum_eta_sq = 1.5;
    c.max_eta = 0.5;
    const double expected = (3.0 * 3.0 + 9.0 * 4.0 * 0.1 * 1.5) / 10.0;
    CHECK_THAT(theory_bound(c, BoundKind::Thm1), WithinRel(expected, 1e-14));
}

TEST_CASE("missing constants are named") {
    TheoryConstants c = clip_constants(100);
    c.lam.reset();
    try {
        theory_bound(c, BoundKind::Thm2);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingConstant);
        CHECK(std::string(e.what()).find("lam") != std::string::npos);
    }
    TheoryConstants d;
    CHECK_THROWS_AS(theory_bound(d, BoundKind::Cor1), Error);
}

TEST_CASE("bounds decrease in T where the formula does") {
    // the decrease is checked from a T0 found numerically
    for (BoundKind b : {BoundKind::Thm3, BoundKind::Thm5}) {
        long T0 = 0;
        double prev = theory_bound(clip_constants(10), b);
        for (long T = 11; T <= 1000000; T = T * 11 / 10 + 1) {
            const double cur = theory_bound(clip_constants(static_cast<double>(T)), b);
            if (cur >= prev) T0 = T;
            prev = cur;
        }
        INFO(bound_name(b));
        CHECK(T0 < 1000);
    }
    TheoryConstants c;
    c.theta = 0.5;
    c.sigma = 1.0;
    c.G = 1.0;
    c.rho = 0.01;
    c.delta = 0.05;
    c.delta1 = 1.0;
    double prev = 1e300;
    for (double T = 10; T <= 1e7; T *= 3) {
        c.T = T;
        const double cur = theory_bound(c, BoundKind::Cor2);
        REQUIRE(cur < prev);
        prev = cur;
    }
}

TEST_CASE("corollary 2 step has the documented form") {
    TheoryConstants c;
    c.theta = 0.5;
    c.sigma = 1.0;
    c.G = 1.0;
    c.rho = 0.01;
    c.delta = 0.05;
    c.delta1 = 2.0;
    c.T = 1e4;
    const double k = 98.0 * std::log(4.0 / 0.05) + 9.0;
    CHECK_THAT(cor2_step(c), WithinRel(std::sqrt(3.0 * 2.0 / (0.01 * k * 1e4)), 1e-14));
}

TEST_CASE("bound names round trip") {
    for (BoundKind b : {BoundKind::Thm1, BoundKind::Cor1, BoundKind::Cor2, BoundKind::Thm2, BoundKind::Thm3,
                        BoundKind::Thm4, BoundKind::Thm5})
        CHECK(parse_bound(bound_name(b)) == b);
    CHECK_THROWS_AS(parse_bound("thm9"), Error);
}

TEST_CASE("fit_rate recovers planted exponents") {
    const std::vector<double> Ts{1e2, 1e3, 1e4, 1e5};
    auto pts = [&](auto f) {
        std::vector<std::pair<double, double>> v;
        for (double T : Ts) v.emplace_back(T, f(T));
        return v;
    };
    CHECK_THAT(fit_rate(pts([](double T) { return 1.0 / std::sqrt(T); })), WithinAbs(-0.5, 1e-12));
    CHECK_THAT(fit_rate(pts([](double T) { return 3.7 * std::pow(T, -1.0 / 3.0); })), WithinAbs(-1.0 / 3.0, 1e-12));
    CHECK_THAT(fit_rate(pts([](double) { return 2.0; })), WithinAbs(0.0, 1e-12));
    RngStream r(5, 0);
    for (int i = 0; i < 100; ++i) {
        const double e = -2.0 * r.uniform(), c = 0.1 + r.uniform();
        REQUIRE_THAT(fit_rate(pts([&](double T) { return c * std::pow(T, e); })), WithinAbs(e, 1e-9));
    }
    CHECK_THROWS_AS(fit_rate(pts([](double) { return 0.0; })), Error);
    CHECK_THROWS_AS(fit_rate({{1, 1}, {2, 2}, {3, 3}}), Error);
}
