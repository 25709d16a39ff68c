#include <wcopt/optim.hpp>

#include <catch_amalgamated.hpp>

using namespace wcopt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x[i++] = d;
    return x;
}

ProblemInstance abs1() {
    AbsRegressionOptions o;
    o.rho = 0.0;
    return make_abs_regression(Matrix::Ones(1, 1), Vector::Zero(1), FeasibleSet::full_space(1), o);
}

}  // namespace

TEST_CASE("step size examples") {
    CHECK(step_size(InverseSqrtStep{2.0}, 4) == 1.0);
    CHECK(step_size(ClipCoupledAnytimeStep{1.0, 1.0}, 4, 2.0) == 0.5);
    CHECK(step_size(ConstantStep{0.1}, 1) == 0.1);
    CHECK(step_size(ConstantStep{0.1}, 12345) == 0.1);
    CHECK_THROWS_AS(step_size(ClipCoupledAnytimeStep{1.0, 1.0}, 4), Error);
    CHECK_THROWS_AS(step_size(InverseSqrtStep{1.0}, 0), Error);
}

TEST_CASE("inverse sqrt schedule decreases strictly") {
    for (long t = 1; t < 1000; ++t) REQUIRE(step_size(InverseSqrtStep{0.3}, t + 1) < step_size(InverseSqrtStep{0.3}, t));
}

TEST_CASE("clip level examples") {
    CHECK(*clip_level(AnytimeClip{1.0, 2.0, 1.0}, 4) == 2.0);
    CHECK(*clip_level(AnytimeClip{1.0, 2.0, 1.0}, 100) == 10.0);
    CHECK_THAT(*clip_level(FixedTClip{1.0, 1.5, 1.0, 8}, 1), WithinRel(4.0, 1e-14));
    CHECK(*clip_level(FixedTClip{1.0, 1.5, 1.0, 8}, 1) == *clip_level(FixedTClip{1.0, 1.5, 1.0, 8}, 7));
    CHECK_FALSE(clip_level(NoClip{}, 3).has_value());
}

TEST_CASE("anytime clip level is at least 2G") {
    for (long t = 1; t <= 1000; ++t) REQUIRE(*clip_level(AnytimeClip{0.01, 1.3, 2.5}, t) >= 5.0);
}

TEST_CASE("clip examples") {
    CHECK(clip(vec({4, 0}), 2.0) == vec({2, 0}));
    CHECK(clip(vec({0.6, 0.8}), 2.0) == vec({0.6, 0.8}));
    CHECK(clip(vec({3, 4}), 5.0) == vec({3, 4}));
    CHECK(clip(Vector::Zero(3), 1.0) == Vector::Zero(3));
    // g_tilde = 1 + 9 at x = 3 on |x|
    CHECK(clip(vec({10}), 2.0) == vec({2}));
    CHECK_THROWS_AS(clip(vec({1}), 0.0), Error);
}

TEST_CASE("clip keeps direction and bounds the norm") {
    RngStream r(4, 0);
    for (int i = 0; i < 10000; ++i) {
        Vector g(3);
        for (int j = 0; j < 3; ++j) g[j] = 10.0 * r.normal();
        const double lam = 0.1 + 5.0 * r.uniform();
        const Vector c = clip(g, lam);
        REQUIRE(c.norm() <= lam * (1.0 + 1e-15));
        REQUIRE((c.normalized() - g.normalized()).norm() <= 1e-12);
    }
}

TEST_CASE("SsGD on |x| from 3 with unit steps") {
    const auto p = abs1();
    RngStream r(1, 0);
    RunOptions o;
    o.x0 = vec({3});
    const Trajectory tr = run_ssgd(p, make_zero_noise(), ConstantStep{1.0}, 2, r, o);
    REQUIRE(tr.steps.size() == 2);
    CHECK(tr.steps[0].x[0] == 3.0);
    CHECK(tr.steps[1].x[0] == 2.0);
    CHECK((*tr.x_final)[0] == 1.0);
    CHECK(tr.problem == p.name);
    CHECK(tr.seed == 1);
}

TEST_CASE("SsGD fixed point at the kink") {
    const auto p = abs1();
    RngStream r(1, 0);
    const Trajectory tr = run_ssgd(p, make_zero_noise(), InverseSqrtStep{5.0}, 50, r);
    for (const auto& s : tr.steps) REQUIRE(s.x[0] == 0.0);
}

TEST_CASE("large step on a linear objective is pinned by the ball") {
    const auto p = make_problem(
        "linear", 2, [](const Vector& x) { return x[0]; }, [](const Vector&) { return vec({1, 0}); }, 0.0, 1.0,
        FeasibleSet::ball(Vector::Zero(2), 1.0), -1.0);
    RngStream r(1, 0);
    const Trajectory tr = run_ssgd(p, make_zero_noise(), ConstantStep{100.0}, 3, r);
    for (std::size_t i = 1; i < tr.steps.size(); ++i) CHECK(tr.steps[i].x == vec({-1, 0}));
}

TEST_CASE("run preconditions") {
    const auto p = abs1();
    RngStream r(1, 0);
    CHECK_THROWS_AS(run_ssgd(p, make_zero_noise(), ClipCoupledAnytimeStep{1, 1}, 5, r), Error);
    CHECK_THROWS_AS(run_ssgd(p, make_zero_noise(), ConstantStep{1}, 0, r), Error);
    CHECK_THROWS_AS(run_clipped_ssgd(p, make_zero_noise(), ConstantStep{1}, AnytimeClip{1, 2, 1}, 1, 5, r), Error);
    CHECK_THROWS_AS(run_clipped_ssgd(p, make_zero_noise(), ClipCoupledAnytimeStep{1, 1}, NoClip{}, 1, 5, r), Error);
    CHECK_THROWS_AS(run_clipped_ssgd(p, make_zero_noise(), ClipCoupledAnytimeStep{1, 1}, AnytimeClip{1, 2, 1}, 0, 5, r),
                    Error);
    RunOptions o;
    o.x0 = vec({1, 2});
    CHECK_THROWS_AS(run_ssgd(p, make_zero_noise(), ConstantStep{1}, 5, r, o), Error);
}

TEST_CASE("huge clip level reduces clipped SsGD to SsGD") {
    const auto p = make_preset_problem("abs_reg_d10");
    // lambda_t = 1e9 sqrt t never binds and eta_t = 1 / lambda_t, i.e. InverseSqrtStep{1e-9}
    const double G = p.lipschitz_g;
    RngStream a(3, 0), b(3, 0);
    RunOptions o;
    o.x0 = Vector::Constant(10, 0.3);
    const auto t1 = run_clipped_ssgd(p, make_zero_noise(), ClipCoupledAnytimeStep{1.0, G}, AnytimeClip{1e9, 2.0, G}, 1,
                                     300, a, o);
    const auto t2 = run_ssgd(p, make_zero_noise(), InverseSqrtStep{1e-9}, 300, b, o);
    for (std::size_t i = 0; i < t1.steps.size(); ++i) {
        REQUIRE_FALSE(t1.steps[i].clip_active);
        REQUIRE_THAT(t1.steps[i].eta, WithinRel(t2.steps[i].eta, 1e-14));
        REQUIRE((t1.steps[i].x - t2.steps[i].x).norm() <= 1e-14);
    }
}

TEST_CASE("zero noise with lambda >= G T gives bitwise identical iterates") {
    const auto p = make_preset_problem("phase_d10_m30");
    const double G = p.lipschitz_g;
    const long T = 200;
    const StepSchedule step = ClipCoupledFixedTStep{1.0, G, T};
    const ClipSchedule cl = FixedTClip{G * T, 2.0, G, T};
    const double eta = step_size(step, 1, clip_level(cl, 1));
    RngStream a(1, 0), b(1, 0);
    const auto t1 = run_clipped_ssgd(p, make_zero_noise(), step, cl, 1, T, a);
    const auto t2 = run_ssgd(p, make_zero_noise(), ConstantStep{eta}, T, b);
    for (std::size_t i = 0; i < t1.steps.size(); ++i) REQUIRE((t1.steps[i].x.array() == t2.steps[i].x.array()).all());
    CHECK((t1.x_final->array() == t2.x_final->array()).all());
}

TEST_CASE("trajectory invariants under heavy-tailed noise") {
    const auto p = make_preset_problem("phase_d10_m30");
    const double G = p.lipschitz_g, eta0 = 0.5;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RngStream r(seed, 0);
        const long T = 400;
        const auto tr = run_clipped_ssgd(p, make_pareto_noise(1.0, 1.5, 1.8), ClipCoupledAnytimeStep{eta0, G},
                                         AnytimeClip{1.0, 1.5, G}, 4, T, r);
        REQUIRE(static_cast<long>(tr.steps.size()) == T);
        REQUIRE_FALSE(tr.diverged);
        for (const auto& s : tr.steps) {
            REQUIRE(p.set.contains(s.x));
            REQUIRE(s.g.norm() <= *s.lambda * (1.0 + 1e-15));
            REQUIRE(s.clip_active == (s.g_tilde.norm() > *s.lambda));
            REQUIRE(s.eta * *s.lambda <= eta0 * (1.0 + 1e-15));
            REQUIRE(s.eta <= eta0 / (G * std::sqrt(static_cast<double>(s.t))) * (1.0 + 1e-15));
            REQUIRE((s.xi() - (s.g - s.partial)).norm() == 0.0);
        }
    }
}

TEST_CASE("divergence is flagged, not thrown") {
    const auto p = make_preset_problem("phase_d10_m30_free");
    RngStream r(1, 0);
    RunOptions o;
    o.x0 = *p.planted;
    const auto tr = run_ssgd(p, make_gaussian_noise(1.0), ConstantStep{50.0}, 1000, r, o);
    CHECK(tr.diverged);
    CHECK_FALSE(tr.x_final.has_value());
    CHECK(tr.last_finite_index == static_cast<long>(tr.steps.size()));
    CHECK(tr.steps.size() < 1000);
}
