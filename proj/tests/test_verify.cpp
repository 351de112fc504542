#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plap/verify.hpp"

#include <cmath>

using namespace plap;
using doctest::Approx;

namespace {

const Params kPc2{4.0 / 3.0, 1.0, 2};

RhoChoice choice(RhoId id) {
    switch (id) {
        case RhoId::PowerSupercritHighQ: return {id, {1.5, 1.2, 1}, 1.0};
        case RhoId::PowerSupercritLowQ: return {id, {1.5, 0.6, 1}, 1.0};
        case RhoId::LogCritical: return {id, kPc2, 2.0};
        case RhoId::LogCriticalExt: return {id, {4.0 / 3.0, 2.0 / 3.0, 2}, 2.0};
        case RhoId::ImplicitSubcrit: return {id, {1.25, 1.0, 2}, 1.0};
        case RhoId::HamiltonSqrt: return {id, {1.5, 0.6, 1}, 1.0};
        case RhoId::HamiltonPower: return {id, {1.5, 2.0, 1}, 1.0};
    }
    return {};
}

constexpr RhoId kAll[] = {RhoId::PowerSupercritHighQ, RhoId::PowerSupercritLowQ, RhoId::LogCritical,
                          RhoId::LogCriticalExt,      RhoId::ImplicitSubcrit,    RhoId::HamiltonSqrt,
                          RhoId::HamiltonPower};

}  // namespace

TEST_CASE("R1 = 1 for the supercritical power choice, by hand at u = 1") {
    const auto c = choice(RhoId::PowerSupercritHighQ);
    // k = 1/2, c = 2.25^{2/3}, rho = c u^{2/p}: k rho'^2 - rho rho'' = (4/9) c^2
    const double cc = std::pow(2.25, 2.0 / 3.0);
    const auto v = eval_rho(c, 1.0, DerivMode::Closed);
    CHECK(v.rho == Approx(cc));
    CHECK(0.5 * v.d1 * v.d1 - v.rho * v.d2 == Approx(4.0 / 9.0 * cc * cc));
    CHECK(eval_R1_R2(c, 1.0, DerivMode::Closed).R1 == Approx(1.0).epsilon(1e-14));
    CHECK(eval_R1_R2(c, 1.0, DerivMode::FiniteDifference).R1 == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("R1 = R2 for the low-q power choice") {
    const auto c = choice(RhoId::PowerSupercritLowQ);
    for (double u : {1e-3, 0.05, 1.0, 3.0, 10.0}) {
        const auto r = eval_R1_R2(c, u, DerivMode::Closed);
        CHECK(r.R1 == Approx(r.R2).epsilon(1e-12));
    }
}

TEST_CASE("logarithmic choices at p = p_c") {
    const auto c = choice(RhoId::LogCritical);
    const double M = std::exp(1.0) * c.u0_inf;
    for (double u : {0.01, 0.3, 1.0, 1.9}) {
        const double lg = std::log(M) - std::log(u);
        const auto r = eval_R1_R2(c, u, DerivMode::Closed);
        CHECK(r.R1 == Approx(0.75 + 0.375 / lg).epsilon(1e-12));
        CHECK(r.R1 >= 0.75);
    }
    const auto x = choice(RhoId::LogCriticalExt);
    for (double u : {0.01, 0.3, 1.0, 1.9}) {
        const double lg = std::log(M) - std::log(u);
        const auto r = eval_R1_R2(x, u, DerivMode::Closed);
        CHECK(r.R1 == Approx(1.5 * lg).epsilon(1e-12));
        CHECK(r.R2 == Approx(1.5 * (lg - 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("R2 = 1/q for the Hamilton-Jacobi power choice") {
    const auto c = choice(RhoId::HamiltonPower);
    for (double u : {1e-3, 0.1, 1.0, 10.0}) CHECK(eval_R1_R2(c, u, DerivMode::Closed).R2 == Approx(0.5));
}

TEST_CASE("every identity certifies, closed form and finite differences") {
    for (auto id : kAll) {
        CAPTURE(to_string(id));
        const auto c = choice(id);
        REQUIRE_NOTHROW(c.validate());
        const auto rep = certify_identity(c, 64);
        CHECK(rep.passed);
        CHECK(rep.samples.size() == 64);
        CHECK(rep.residual.size() == 64);
        CHECK(rep.max_residual < kIdentityTol);
        CHECK(rep.max_fd_discrepancy < kFdTol);
        CHECK(rho_from_string(to_string(id)) == id);
    }
}

TEST_CASE("choices outside their ranges are rejected") {
    CHECK_THROWS_AS((RhoChoice{RhoId::PowerSupercritHighQ, {1.2, 1.0, 2}, 1.0}.validate()), DomainError);
    CHECK_THROWS_AS((RhoChoice{RhoId::LogCritical, {1.5, 1.0, 2}, 1.0}.validate()), DomainError);
    CHECK_THROWS_AS((RhoChoice{RhoId::LogCriticalExt, kPc2, 1.0}.validate()), DomainError);
    CHECK_THROWS_AS((RhoChoice{RhoId::ImplicitSubcrit, {1.5, 1.0, 1}, 1.0}.validate()), DomainError);
    CHECK_THROWS_AS((RhoChoice{RhoId::HamiltonPower, {1.5, 0.9, 1}, 1.0}.validate()), DomainError);
    CHECK_THROWS_AS(eval_rho(choice(RhoId::LogCritical), -1.0, DerivMode::Closed), DomainError);
}

TEST_CASE("subcritical profile") {
    const Params P{1.25, 1.0, 2};
    const SubcriticalRho rho(P, 1.5);
    CHECK(rho(0.0) == 0.0);
    CHECK(std::abs(rho(1.5) - rho.K0()) < 1e-10 * rho.K0());
    CHECK(rho.K0() == Approx(rho.kappa() * std::pow(1.5, 2.0 / P.p)).epsilon(1e-12));
    CHECK(rho.derivative(1.5) == Approx(0.0).scale(1.0).epsilon(1e-8));
    double prev = 0.0;
    double worst = 0.0;
    for (int i = 1; i <= 32; ++i) {
        const double r = 1.5 * i / 33.0;
        const double v = rho(r);
        CHECK(v > prev);
        prev = v;
        const double h = 1e-4 * std::min(r, 1.5 - r);
        const double d1 = (rho(r + h) - rho(r - h)) / (2 * h);
        const double d2 = (rho(r + h) - 2 * v + rho(r - h)) / (h * h);
        const double res = rho.k() * d1 * d1 - v * d2 - std::pow(v, 2.0 - P.p);
        worst = std::max(worst, std::abs(res) / std::pow(v, 2.0 - P.p));
    }
    CHECK(worst < 1e-5);
    const double C = rho.bound_constant();
    CHECK(std::isfinite(C));
    CHECK(C > 0.0);
    CHECK_THROWS_AS(SubcriticalRho({1.5, 1.0, 2}, 1.0), DomainError);
}

TEST_CASE("exact time barriers cancel to rounding") {
    const auto a = check_time_supersolution(TimeBarrier::PowerHighQ, {1.5, 1.2, 1}, 1.0);
    CHECK(a.passed);
    CHECK(a.metrics.at("max_relative_residual") < 1e-12);
    const auto b = check_time_supersolution(TimeBarrier::HamiltonPower, {1.5, 2.0, 1}, 1.0);
    CHECK(b.passed);
    CHECK(b.metrics.at("max_relative_residual") < 1e-12);
    // coefficient identity behind the first barrier
    const double p = 1.5;
    CHECK(2 * (p - 1) * std::pow(p * (p - 1), -(p + 2) / p) == Approx((2 / p) * std::pow(p * (p - 1), -2 / p)));
}

TEST_CASE("inequality barriers hold with their default constants") {
    struct Case {
        TimeBarrier b;
        Params P;
    };
    const Case cases[] = {
        {TimeBarrier::PowerHighQCompensated, {1.5, 0.9, 1}},
        {TimeBarrier::PowerLowQ, {1.5, 0.6, 1}},
        {TimeBarrier::LogCritical, {4.0 / 3.0, 1.0, 2}},
        {TimeBarrier::LogCriticalCompensated, {4.0 / 3.0, 0.8, 2}},
        {TimeBarrier::LogCriticalExt, {4.0 / 3.0, 2.0 / 3.0, 2}},
        {TimeBarrier::HamiltonSqrt, {1.5, 0.6, 1}},
    };
    for (const auto& c : cases) {
        CAPTURE(to_string(c.b));
        const auto r = check_time_supersolution(c.b, c.P, 1.0);
        CHECK(r.passed);
        CHECK(time_barrier_from_string(to_string(c.b)) == c.b);
    }
    CHECK_THROWS_AS(check_time_supersolution(TimeBarrier::PowerHighQ, {1.2, 1.2, 2}, 1.0), DomainError);
}

TEST_CASE("low-q power barrier: bisected constant below the sufficient threshold") {
    const Params P{1.5, 0.6, 1};
    const double thr = power_low_q_constant_threshold(P);
    const double cmin = minimal_barrier_constant(TimeBarrier::PowerLowQ, P, 1.0);
    CHECK(cmin > 0.0);
    CHECK(cmin <= thr);
    TimeBarrierOptions opt;
    opt.constant = thr;
    CHECK(check_time_supersolution(TimeBarrier::PowerLowQ, P, 1.0, opt).passed);
    opt.constant = 0.5 * cmin;
    CHECK_FALSE(check_time_supersolution(TimeBarrier::PowerLowQ, P, 1.0, opt).passed);
}

TEST_CASE("stationary supersolution around the threshold amplitude") {
    const Params P{1.5, 0.75, 1};
    const double A0 = sigma_constants(P).A0;
    const std::vector<double> radii{0.1, 1.0, 10.0};
    for (double m : {1.0, 2.0, 10.0}) CHECK(check_stationary_supersolution(m * A0, P, radii).passed);
    CHECK(stationary_residual(A0 / 100, P, 1.0) < 0.0);
    CHECK_FALSE(check_stationary_supersolution(A0 / 100, P, {1.0}).passed);
    // E scales like r^{-(alpha+1) q} at fixed A
    const double alpha = sigma_constants(P).alpha;
    const double e1 = stationary_residual(2 * A0, P, 1.0), e2 = stationary_residual(2 * A0, P, 3.0);
    CHECK(e2 / e1 == Approx(std::pow(3.0, -(alpha + 1) * P.q)).epsilon(1e-12));
    CHECK_THROWS_AS(check_stationary_supersolution(1.0, {1.5, 0.4, 1}, radii), DomainError);
}

TEST_CASE("property: stationary margin is non-decreasing in A at A >= A0") {
    for (const Params& P : {Params{1.5, 0.75, 1}, Params{1.6, 0.8, 2}, Params{1.8, 1.0, 3}}) {
        const double A0 = sigma_constants(P).A0;
        for (double r : {0.05, 1.0, 20.0}) {
            double prev = -INFINITY;
            for (int i = 0; i < 40; ++i) {
                const double A = std::max(A0, 1e-3) * std::pow(1.2, i);
                const double e = stationary_residual(A, P, r);
                CHECK(e >= prev);
                prev = e;
            }
        }
    }
}

TEST_CASE("static barrier at p = p_c") {
    const auto r = check_static_barrier_pc({4.0 / 3.0, 1.0, 2}, 1.0, {1.0});
    CHECK(r.passed);
    CHECK(r.metrics.at("degree_diffusion") == Approx(-2.0));
    CHECK(r.metrics.at("degree_absorption") == Approx(-3.0));
    CHECK_THROWS_AS(check_static_barrier_pc({1.5, 1.0, 1}, 1.0, {1.0}), DomainError);
}
