#include "plap/verify.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace plap {

namespace {

constexpr std::array<const char*, 7> kRhoNames = {"PowerSupercritHighQ", "PowerSupercritLowQ", "LogCritical",
                                                  "LogCriticalExt",      "ImplicitSubcrit",    "HamiltonSqrt",
                                                  "HamiltonPower"};
constexpr std::array<const char*, 8> kBarrierNames = {
    "PowerHighQ",  "PowerHighQCompensated", "PowerLowQ",    "LogCritical",
    "LogCriticalCompensated", "LogCriticalExt", "HamiltonSqrt", "HamiltonPower"};

bool near(double a, double b) { return std::abs(a - b) <= kThresholdTol; }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string to_string(RhoId id) { return kRhoNames[static_cast<std::size_t>(id)]; }

RhoId rho_from_string(const std::string& s) {
    for (std::size_t i = 0; i < kRhoNames.size(); ++i) {
        if (s == kRhoNames[i]) return static_cast<RhoId>(i);
    }
    throw DomainError("unknown rho choice: " + s);
}

std::string to_string(TimeBarrier b) { return kBarrierNames[static_cast<std::size_t>(b)]; }

TimeBarrier time_barrier_from_string(const std::string& s) {
    for (std::size_t i = 0; i < kBarrierNames.size(); ++i) {
        if (s == kBarrierNames[i]) return static_cast<TimeBarrier>(i);
    }
    throw DomainError("unknown time barrier: " + s);
}

// ---------------------------------------------------------------------------
// Subcritical profile

SubcriticalRho::SubcriticalRho(const Params& params, double u0_inf) : p_(params.p), U_(u0_inf) {
    const auto e = critical_exponents(params);
    if (!(params.p < e.p_c - kThresholdTol)) throw DomainError("implicit profile requires p < p_c");
    if (!(u0_inf > 0.0)) throw DomainError("u0_inf must be positive");
    k_ = e.k;
    s_ = 2.0 - p_ - 2.0 * k_;
    if (!(s_ > 0.0 && k_ < 1.0)) throw DomainError("implicit profile needs 2-p-2k > 0 and k < 1");
    I1_ = integral(1.0);
    kappa_ = std::pow(2.0 / (s_ * I1_ * I1_), 1.0 / p_);
    K0_ = kappa_ * std::pow(U_, 2.0 / p_);
    scale_ = std::sqrt(s_ * std::pow(K0_, p_) / 2.0);
}

double SubcriticalRho::integral(double y) const {
    thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    const double k = k_, s = s_;
    auto checked = [](auto f, double a, double b) {
        if (!(b > a)) return 0.0;
        double err = 0.0;
        const double v = integrator.integrate(f, a, b, 1e-14, &err);
        if (!std::isfinite(v) || err > 1e-11 * std::max(1.0, std::abs(v))) {
            throw DomainError("quadrature failed to converge near an endpoint");
        }
        return v;
    };
    y = std::clamp(y, 0.0, 1.0);
    // z = t^{1/(1-k)} on [0, min(y,1/2)] removes the z^{-k} singularity.
    const double ylo = std::min(y, 0.5);
    auto lower = [&](double t) {
        const double z_s = std::pow(t, s / (1.0 - k));
        return 1.0 / ((1.0 - k) * std::sqrt(1.0 - z_s));
    };
    double v = checked(lower, 0.0, std::pow(ylo, 1.0 - k));
    if (y > 0.5) {
        // 1 - z = w^2 on [1/2, y] removes the (1-z^s)^{-1/2} singularity.
        auto upper = [&](double w) {
            const double w2 = w * w;
            const double z = 1.0 - w2;
            const double ratio = w2 > 0.0 ? -std::expm1(s * std::log1p(-w2)) / w2 : s;
            return 2.0 * std::pow(z, -k) / std::sqrt(ratio);
        };
        v += checked(upper, std::sqrt(1.0 - y), std::sqrt(0.5));
    }
    return v;
}

double SubcriticalRho::operator()(double r) const {
    if (r <= 0.0) return 0.0;
    if (r >= U_) return K0_;
    const double target = r / U_ * I1_;
    auto f = [&](double y) { return integral(y) - target; };
    std::uintmax_t iters = 200;
    const auto res =
        boost::math::tools::toms748_solve(f, 0.0, 1.0, -target, I1_ - target,
                                          boost::math::tools::eps_tolerance<double>(52), iters);
    if (iters >= 200) throw DomainError("root finder did not converge");
    return K0_ * 0.5 * (res.first + res.second);
}

double SubcriticalRho::derivative(double r) const {
    const double rho = (*this)(r);
    const double gap = std::max(0.0, std::pow(K0_, s_) - std::pow(rho, s_));
    return std::pow(rho, k_) * std::sqrt(2.0 * gap / s_);
}

double SubcriticalRho::bound_constant(int n_samples) const {
    double best = 0.0;
    const double e1 = s_ / (2.0 * (1.0 - k_)), e2 = 1.0 / (1.0 - k_);
    for (int i = 0; i < n_samples; ++i) {
        const double r = U_ * std::pow(10.0, -4.0 + 4.0 * i / (n_samples - 1.0));
        best = std::max(best, (*this)(r) / (std::pow(K0_, e1) * std::pow(r, e2)));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Bernstein choices

void RhoChoice::validate() const {
    const auto e = critical_exponents(params);
    const double p = params.p, q = params.q;
    const bool crit = near(p, e.p_c) && params.N >= 2;
    if (!(u0_inf > 0.0)) throw DomainError("u0_inf must be positive");
    switch (id) {
        case RhoId::PowerSupercritHighQ:
            if (!(2.0 * e.k + p - 2.0 > 0.0)) throw DomainError(to_string(id) + " requires p > p_c");
            break;
        case RhoId::PowerSupercritLowQ:
            if (!(e.k + p - q - 1.0 > 0.0 && q < p)) throw DomainError(to_string(id) + " requires k + p - q - 1 > 0");
            break;
        case RhoId::LogCritical:
            if (!crit) throw DomainError(to_string(id) + " requires p = p_c and N >= 2");
            break;
        case RhoId::LogCriticalExt:
            if (!crit || !near(q, e.p_c / 2.0)) {
                throw DomainError(to_string(id) + " requires p = p_c, q = p_c/2 and N >= 2");
            }
            break;
        case RhoId::ImplicitSubcrit:
            if (!(p < e.p_c - kThresholdTol)) throw DomainError(to_string(id) + " requires p < p_c");
            break;
        case RhoId::HamiltonSqrt:
            if (!(q < 1.0 && p > e.p_sc)) throw DomainError(to_string(id) + " requires q < 1 and p > p_sc");
            break;
        case RhoId::HamiltonPower:
            if (!(q > 1.0)) throw DomainError(to_string(id) + " requires q > 1");
            break;
    }
}

std::pair<double, double> RhoChoice::sample_range() const {
    switch (id) {
        case RhoId::PowerSupercritHighQ:
        case RhoId::PowerSupercritLowQ:
        case RhoId::HamiltonPower:
            return {1e-3, 10.0};
        case RhoId::LogCritical:
        case RhoId::LogCriticalExt:
            return {1e-3 * u0_inf, 0.99 * u0_inf};
        case RhoId::ImplicitSubcrit:
            return {1e-3 * u0_inf, 0.95 * u0_inf};
        case RhoId::HamiltonSqrt:
            return {1e-3 * u0_inf, (1.0 - 1e-3) * u0_inf};
    }
    return {1e-3, 10.0};
}

namespace {

// Upper end of the interval on which rho is defined (for the difference stencil).
double upper_limit(const RhoChoice& c) {
    switch (c.id) {
        case RhoId::HamiltonSqrt:
        case RhoId::ImplicitSubcrit:
            return c.u0_inf;
        case RhoId::LogCritical:
        case RhoId::LogCriticalExt:
            return std::exp(1.0) * c.u0_inf;
        default:
            return std::numeric_limits<double>::infinity();
    }
}

struct PowerForm {
    double c, m;
};

PowerForm power_form(const RhoChoice& c, const CriticalExponents& e) {
    const double p = c.params.p, q = c.params.q;
    switch (c.id) {
        case RhoId::PowerSupercritHighQ:
            return {std::pow(p * p / (2.0 * (2.0 * e.k + p - 2.0)), 1.0 / p), 2.0 / p};
        case RhoId::PowerSupercritLowQ:
            return {std::pow((p - q) / (e.k + p - q - 1.0), 1.0 / (p - q)), 1.0 / (p - q)};
        default:
            return {1.0, 1.0 / q};  // HamiltonPower
    }
}

// u^a L^b with L = log(eU/u)
RhoValues log_form(double u, double U, double a, double b, double N) {
    const double L = std::log(std::exp(1.0) * U / u);
    RhoValues v;
    v.rho = std::pow(u, a) * std::pow(L, b);
    v.d1 = std::pow(u, 1.0 / N) * (a * std::pow(L, b) - b * std::pow(L, b - 1.0));
    v.d2 = std::pow(u, 1.0 / N - 1.0) *
           ((a / N) * std::pow(L, b) - (b / N + a * b) * std::pow(L, b - 1.0) + b * (b - 1.0) * std::pow(L, b - 2.0));
    return v;
}

double rho_only(const RhoChoice& c, const CriticalExponents& e, const SubcriticalRho* sub, double u) {
    const double N = c.params.N;
    switch (c.id) {
        case RhoId::LogCritical:
            return log_form(u, c.u0_inf, (N + 1.0) / N, (N + 1.0) / (2.0 * N), N).rho;
        case RhoId::LogCriticalExt:
            return log_form(u, c.u0_inf, (N + 1.0) / N, (N + 1.0) / N, N).rho;
        case RhoId::ImplicitSubcrit:
            return (*sub)(u);
        case RhoId::HamiltonSqrt:
            return -2.0 * std::sqrt(c.u0_inf - u);
        default: {
            const auto f = power_form(c, e);
            return f.c * std::pow(u, f.m);
        }
    }
}

RhoValues eval_rho_impl(const RhoChoice& c, const CriticalExponents& e, const SubcriticalRho* sub, double u,
                        DerivMode mode) {
    if (mode == DerivMode::FiniteDifference) {
        // step scaled to the distance from the nearest singular point
        const double room = upper_limit(c) - u;
        const double h = 5e-3 * (c.id == RhoId::HamiltonSqrt ? room : std::min(u, room));
        std::array<double, 5> f{};
        for (int j = -2; j <= 2; ++j) f[j + 2] = rho_only(c, e, sub, u + j * h);
        RhoValues v;
        v.rho = f[2];
        v.d1 = (-f[4] + 8.0 * f[3] - 8.0 * f[1] + f[0]) / (12.0 * h);
        v.d2 = (-f[4] + 16.0 * f[3] - 30.0 * f[2] + 16.0 * f[1] - f[0]) / (12.0 * h * h);
        return v;
    }
    const double N = c.params.N, p = c.params.p;
    switch (c.id) {
        case RhoId::LogCritical:
            return log_form(u, c.u0_inf, (N + 1.0) / N, (N + 1.0) / (2.0 * N), N);
        case RhoId::LogCriticalExt:
            return log_form(u, c.u0_inf, (N + 1.0) / N, (N + 1.0) / N, N);
        case RhoId::ImplicitSubcrit: {
            RhoValues v;
            v.rho = (*sub)(u);
            v.d1 = sub->derivative(u);
            v.d2 = (e.k / v.rho) * v.d1 * v.d1 - std::pow(v.rho, 1.0 - p);
            return v;
        }
        case RhoId::HamiltonSqrt: {
            const double g = c.u0_inf - u;
            return {-2.0 * std::sqrt(g), 1.0 / std::sqrt(g), 0.5 * std::pow(g, -1.5)};
        }
        default: {
            const auto f = power_form(c, e);
            return {f.c * std::pow(u, f.m), f.c * f.m * std::pow(u, f.m - 1.0),
                    f.c * f.m * (f.m - 1.0) * std::pow(u, f.m - 2.0)};
        }
    }
}

struct Evaluated {
    R1R2 r;
    double scale1, scale2;
};

Evaluated combine(const RhoValues& v, const Params& P, double k) {
    const double a = std::abs(v.rho);
    Evaluated out;
    out.r.R1 = std::pow(a, P.p - 2.0) * (k * v.d1 * v.d1 - v.rho * v.d2);
    out.r.R2 = std::pow(a, P.q - 2.0) * v.rho * v.d1;
    out.scale1 = std::pow(a, P.p - 2.0) * (std::abs(k) * v.d1 * v.d1 + std::abs(v.rho * v.d2));
    out.scale2 = std::pow(a, P.q - 2.0) * std::abs(v.rho * v.d1);
    return out;
}

}  // namespace

RhoValues eval_rho(const RhoChoice& c, double u, DerivMode mode) {
    c.validate();
    if (!(u > 0.0 && u < upper_limit(c))) throw DomainError("u outside the domain of " + to_string(c.id));
    const auto e = critical_exponents(c.params);
    std::optional<SubcriticalRho> sub;
    if (c.id == RhoId::ImplicitSubcrit) sub.emplace(c.params, c.u0_inf);
    return eval_rho_impl(c, e, sub ? &*sub : nullptr, u, mode);
}

R1R2 eval_R1_R2(const RhoChoice& c, double u, DerivMode mode) {
    const auto e = critical_exponents(c.params);
    return combine(eval_rho(c, u, mode), c.params, e.k).r;
}

R1R2 target_R1_R2(const RhoChoice& c, double u) {
    c.validate();
    const auto e = critical_exponents(c.params);
    const double p = c.params.p, q = c.params.q, N = c.params.N, k = e.k, U = c.u0_inf;
    switch (c.id) {
        case RhoId::PowerSupercritHighQ: {
            const double cc = std::pow(p * p / (2.0 * (2.0 * k + p - 2.0)), 1.0 / p);
            return {1.0, 2.0 / p * std::pow(cc, q) * std::pow(u, (2.0 * q - p) / p)};
        }
        case RhoId::PowerSupercritLowQ: {
            const double r = 1.0 / (p - q) * std::pow((p - q) / (k + p - q - 1.0), q / (p - q)) *
                             std::pow(u, (2.0 * q - p) / (p - q));
            return {r, r};
        }
        case RhoId::LogCritical: {
            const double L = std::log(std::exp(1.0) * U / u);
            const double b = (N + 1.0) / (2.0 * N);
            return {b + (N + 1.0) / (4.0 * N) / L,
                    b * std::pow(u, (q * (N + 1.0) - N) / N) *
                        (2.0 * std::pow(L, (N + 1.0) * q / (2.0 * N)) -
                         std::pow(L, ((N + 1.0) * q - 2.0 * N) / (2.0 * N)))};
        }
        case RhoId::LogCriticalExt: {
            const double L = std::log(std::exp(1.0) * U / u);
            const double a = (N + 1.0) / N;
            return {a * L, a * (L - 1.0)};
        }
        case RhoId::ImplicitSubcrit:
            return {1.0, kNaN};
        case RhoId::HamiltonSqrt: {
            const double v = std::sqrt(U - u);
            return {std::pow(2.0, p - 2.0) * (1.0 + k) * std::pow(v, p - 4.0), -std::pow(2.0, q - 1.0) * std::pow(v, q - 2.0)};
        }
        case RhoId::HamiltonPower:
            return {(k + q - 1.0) / (q * q) * std::pow(u, (p - 2.0 * q) / q), 1.0 / q};
    }
    return {kNaN, kNaN};
}

IdentityReport certify_identity(const RhoChoice& c, int n_samples) {
    c.validate();
    if (n_samples < 2) throw DomainError("need at least two samples");
    const auto e = critical_exponents(c.params);
    std::optional<SubcriticalRho> sub;
    if (c.id == RhoId::ImplicitSubcrit) sub.emplace(c.params, c.u0_inf);
    const auto [lo, hi] = c.sample_range();
    IdentityReport rep;
    rep.id = c.id;
    for (int i = 0; i < n_samples; ++i) {
        const double u = lo * std::pow(hi / lo, static_cast<double>(i) / (n_samples - 1));
        const auto closed = combine(eval_rho_impl(c, e, sub ? &*sub : nullptr, u, DerivMode::Closed), c.params, e.k);
        const auto fd = combine(eval_rho_impl(c, e, sub ? &*sub : nullptr, u, DerivMode::FiniteDifference), c.params, e.k);
        const auto target = target_R1_R2(c, u);
        double res = std::abs(closed.r.R1 - target.R1) / closed.scale1;
        if (!std::isnan(target.R2)) res = std::max(res, std::abs(closed.r.R2 - target.R2) / closed.scale2);
        const double fdd = std::max(std::abs(fd.r.R1 - closed.r.R1) / closed.scale1,
                                    std::abs(fd.r.R2 - closed.r.R2) / closed.scale2);
        rep.samples.push_back(u);
        rep.residual.push_back(res);
        rep.fd_discrepancy.push_back(fdd);
        rep.max_residual = std::max(rep.max_residual, res);
        rep.max_fd_discrepancy = std::max(rep.max_fd_discrepancy, fdd);
    }
    rep.passed = rep.max_residual < kIdentityTol && rep.max_fd_discrepancy < kFdTol;
    return rep;
}

// ---------------------------------------------------------------------------
// Time barriers

double power_low_q_constant_threshold(const Params& P) {
    const auto e = critical_exponents(P);
    const double p = P.p, q = P.q;
    return std::pow(2.0 * (p - q) / (p * (p - 1.0)) * std::pow((e.k + p - q - 1.0) / (p - q), q / (p - q)), 2.0 / p);
}

namespace {

double hamilton_sqrt_default_K(double q) { return std::pow(std::pow(2.0, 1.0 - q) / (q * (1.0 - q)), 2.0 / q); }
double hamilton_sqrt_stated_K(double q) { return std::pow(std::pow(2.0, 1.0 - q) * (1.0 - q * q), 2.0 / q); }

struct BarrierEval {
    double W = 0, dW = 0, reaction = 0;  // LW = dW + reaction
    bool exact = false;
};

void require_barrier(TimeBarrier b, const Params& P) {
    const auto e = critical_exponents(P);
    const double p = P.p, q = P.q;
    const bool super = p > e.p_c + kThresholdTol;
    const bool crit = near(p, e.p_c) && P.N >= 2;
    bool ok = false;
    switch (b) {
        case TimeBarrier::PowerHighQ: ok = super && q >= 1.0 - kThresholdTol; break;
        case TimeBarrier::PowerHighQCompensated: ok = super && q >= p / 2.0 - kThresholdTol && q < 1.0; break;
        case TimeBarrier::PowerLowQ: ok = e.k + p - q - 1.0 > 0.0 && q < 1.0 && q < p / 2.0; break;
        case TimeBarrier::LogCritical: ok = crit && q >= 1.0 - kThresholdTol; break;
        case TimeBarrier::LogCriticalCompensated: ok = crit && q > e.p_c / 2.0 + kThresholdTol && q < 1.0; break;
        case TimeBarrier::LogCriticalExt: ok = crit && near(q, e.p_c / 2.0); break;
        case TimeBarrier::HamiltonSqrt: ok = q < 1.0 && p > e.p_sc; break;
        case TimeBarrier::HamiltonPower: ok = q > 1.0; break;
    }
    if (!ok) throw DomainError(to_string(b) + " is not defined for these parameters");
}

BarrierEval eval_barrier(TimeBarrier b, const Params& P, double U, double constant, double t) {
    const auto e = critical_exponents(P);
    const double p = P.p, q = P.q, N = P.N, k = e.k, pc = e.p_c;
    BarrierEval r;
    switch (b) {
        case TimeBarrier::PowerHighQ: {
            const double A = std::pow(p * (p - 1.0), -2.0 / p);
            r.W = A * std::pow(t, -2.0 / p);
            r.dW = -2.0 / p * r.W / t;
            r.reaction = 2.0 * (p - 1.0) * std::pow(r.W, (p + 2.0) / 2.0);
            r.exact = true;
            break;
        }
        case TimeBarrier::PowerHighQCompensated: {
            const double c1 = 4.0 * (1.0 - q) / p * std::pow(p * p / (2.0 * (2.0 * k + p - 2.0)), q / p) *
                              std::pow(U, (2.0 * q - p) / p);
            const double B = std::pow(p * (p - 1.0) * t / 2.0, -2.0 / p);
            r.W = std::pow(2.0 * c1, 2.0 / (p - q)) + B;
            r.dW = -2.0 / p * B / t;
            r.reaction = 2.0 * (p - 1.0) * std::pow(r.W, (q + 2.0) / 2.0) * (std::pow(r.W, (p - q) / 2.0) - c1);
            break;
        }
        case TimeBarrier::PowerLowQ: {
            const double C = constant > 0.0 ? constant : power_low_q_constant_threshold(P);
            const double K = C * std::pow(U, 2.0 * (p - 2.0 * q) / (p * (p - q)));
            const double R2 = 1.0 / (p - q) * std::pow((p - q) / (k + p - q - 1.0), q / (p - q)) *
                              std::pow(U, (2.0 * q - p) / (p - q));
            const double B = K * std::pow(t, -2.0 / p);
            r.W = std::pow(2.0 * (1.0 - q) / (p - 1.0), 2.0 / (p - q)) + B;
            r.dW = -2.0 / p * B / t;
            r.reaction = 2.0 * (p - 1.0) * R2 * std::pow(r.W, (q + 2.0) / 2.0) *
                         (std::pow(r.W, (p - q) / 2.0) - (1.0 - q) / (p - 1.0));
            break;
        }
        case TimeBarrier::LogCritical: {
            r.W = std::pow((N + 1.0) / ((N - 1.0) * t), 2.0 / pc);
            r.dW = -2.0 / pc * r.W / t;
            r.reaction = (N - 1.0) / N * std::pow(r.W, (pc + 2.0) / 2.0);
            r.exact = true;
            break;
        }
        case TimeBarrier::LogCriticalCompensated: {
            const double a = (q * (N + 1.0) - N) / N, bb = (N + 1.0) * q / (2.0 * N);
            const double shape = bb / a >= 1.0 ? std::exp(a - bb) * std::pow(bb / a, bb) : 1.0;
            const double C1 = (N + 1.0) / N * shape;
            const double c2 = 2.0 * N * (1.0 - q) / (N - 1.0) * C1 * std::pow(U, a);
            const double B = std::pow(2.0 * (N + 1.0) / ((N - 1.0) * t), 2.0 / pc);
            r.W = std::pow(2.0 * c2, 2.0 / (pc - q)) + B;
            r.dW = -2.0 / pc * B / t;
            r.reaction = (N - 1.0) / N * std::pow(r.W, (q + 2.0) / 2.0) * (std::pow(r.W, (pc - q) / 2.0) - c2);
            break;
        }
        case TimeBarrier::LogCriticalExt: {
            const double B = std::pow((N + 1.0) / ((N - 1.0) * t), (N + 1.0) / N);
            r.W = std::pow(2.0 / (N - 1.0), 2.0 * (N + 1.0) / N) + B;
            r.dW = -(N + 1.0) / N * B / t;
            // the logarithmic factor is >= 1 and multiplies a non-negative bracket
            r.reaction = 1.0 / N * (2.0 * (N - 1.0) * std::pow(r.W, (pc + 2.0) / 2.0) - 2.0 * std::pow(r.W, (q + 2.0) / 2.0));
            break;
        }
        case TimeBarrier::HamiltonSqrt: {
            const double K = constant > 0.0 ? constant : hamilton_sqrt_default_K(q);
            r.W = K * std::pow(U, (2.0 - q) / q) * std::pow(t, -2.0 / q);
            r.dW = -2.0 / q * r.W / t;
            // worst case u = 0 in (U - u)^{(q-2)/2}
            r.reaction = std::pow(2.0, q) * (1.0 - q) * std::pow(U, (q - 2.0) / 2.0) * std::pow(r.W, (q + 2.0) / 2.0);
            break;
        }
        case TimeBarrier::HamiltonPower: {
            r.W = std::pow((q - 1.0) * t, -2.0 / q);
            r.dW = -2.0 / q * r.W / t;
            r.reaction = 2.0 * (q - 1.0) / q * std::pow(r.W, (2.0 + q) / 2.0);
            r.exact = true;
            break;
        }
    }
    return r;
}

double min_margin(TimeBarrier b, const Params& P, double U, double constant, const TimeBarrierOptions& opt) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < opt.samples; ++i) {
        const double t = opt.t_min * std::pow(opt.t_max / opt.t_min, static_cast<double>(i) / (opt.samples - 1));
        const auto ev = eval_barrier(b, P, U, constant, t);
        m = std::min(m, (ev.dW + ev.reaction) / (std::abs(ev.dW) + std::abs(ev.reaction)));
    }
    return m;
}

}  // namespace

CheckReport check_time_supersolution(TimeBarrier b, const Params& P, double u0_inf, const TimeBarrierOptions& opt) {
    require_barrier(b, P);
    if (!(u0_inf > 0.0)) throw DomainError("u0_inf must be positive");
    if (!(opt.t_min > 0.0 && opt.t_max > opt.t_min && opt.samples >= 2)) throw DomainError("bad time sampling");
    CheckReport rep;
    rep.id = to_string(b);
    bool exact = false;
    double worst_abs = 0.0;
    for (int i = 0; i < opt.samples; ++i) {
        const double t = opt.t_min * std::pow(opt.t_max / opt.t_min, static_cast<double>(i) / (opt.samples - 1));
        const auto ev = eval_barrier(b, P, u0_inf, opt.constant, t);
        exact = ev.exact;
        worst_abs = std::max(worst_abs, std::abs(ev.dW + ev.reaction) / (std::abs(ev.dW) + std::abs(ev.reaction)));
    }
    const double margin = min_margin(b, P, u0_inf, opt.constant, opt);
    rep.metrics["min_normalized_margin"] = margin;
    rep.metrics["exact"] = exact ? 1.0 : 0.0;
    if (exact) {
        rep.metrics["max_relative_residual"] = worst_abs;
        rep.passed = worst_abs < 1e-12;
    } else {
        rep.passed = margin >= -1e-12;
    }
    if (b == TimeBarrier::PowerLowQ) {
        rep.metrics["C"] = opt.constant > 0.0 ? opt.constant : power_low_q_constant_threshold(P);
        rep.metrics["C_threshold_sufficient"] = power_low_q_constant_threshold(P);
    }
    if (b == TimeBarrier::HamiltonSqrt) {
        rep.metrics["K"] = opt.constant > 0.0 ? opt.constant : hamilton_sqrt_default_K(P.q);
        rep.metrics["K_stated"] = hamilton_sqrt_stated_K(P.q);
        rep.metrics["margin_with_stated_K"] = min_margin(b, P, u0_inf, hamilton_sqrt_stated_K(P.q), opt);
    }
    return rep;
}

double minimal_barrier_constant(TimeBarrier b, const Params& P, double u0_inf, const TimeBarrierOptions& opt) {
    require_barrier(b, P);
    if (b != TimeBarrier::PowerLowQ && b != TimeBarrier::HamiltonSqrt) {
        throw DomainError(to_string(b) + " has no free constant");
    }
    double lo = 0.0;
    double hi = b == TimeBarrier::PowerLowQ ? power_low_q_constant_threshold(P) : hamilton_sqrt_default_K(P.q);
    while (min_margin(b, P, u0_inf, hi, opt) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid > 0.0 && min_margin(b, P, u0_inf, mid, opt) >= 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

// ---------------------------------------------------------------------------
// Stationary barriers

namespace {

struct StationaryTerms {
    double diffusion, absorption;
};

StationaryTerms stationary_terms(double A, double alpha, const Params& P, double r) {
    const double p = P.p, q = P.q, N = P.N;
    const double aA = alpha * A;
    return {std::pow(aA, p - 1.0) * (N - 1.0 - (alpha + 1.0) * (p - 1.0)) *
                std::pow(r, -(alpha + 1.0) * (p - 1.0) - 1.0),
            std::pow(aA, q) * std::pow(r, -(alpha + 1.0) * q)};
}

}  // namespace

double stationary_residual(double A, const Params& P, double r) {
    const auto s = sigma_constants(P);
    const auto t = stationary_terms(A, s.alpha, P, r);
    return t.diffusion + t.absorption;
}

CheckReport check_stationary_supersolution(double A, const Params& P, const std::vector<double>& radii) {
    const auto s = sigma_constants(P);
    if (!(A > 0.0)) throw DomainError("amplitude must be positive");
    if (radii.empty()) throw DomainError("no radii given");
    CheckReport rep;
    rep.id = "stationary";
    double margin = std::numeric_limits<double>::infinity();
    double gmin = margin, gmax = -margin;
    for (double r : radii) {
        if (!(r > 0.0)) throw DomainError("radii must be positive");
        const auto t = stationary_terms(A, s.alpha, P, r);
        const double E = t.diffusion + t.absorption;
        margin = std::min(margin, E / (std::abs(t.diffusion) + std::abs(t.absorption)));
        const double gap = E * std::pow(r, (s.alpha + 1.0) * P.q);
        gmin = std::min(gmin, gap);
        gmax = std::max(gmax, gap);
    }
    rep.metrics["A"] = A;
    rep.metrics["A0"] = s.A0;
    rep.metrics["alpha"] = s.alpha;
    rep.metrics["min_normalized_margin"] = margin;
    rep.metrics["gap_coefficient_min"] = gmin;
    rep.metrics["gap_coefficient_max"] = gmax;
    rep.passed = margin >= -1e-12;
    return rep;
}

CheckReport check_static_barrier_pc(const Params& P, double C0, const std::vector<double>& radii) {
    const auto e = critical_exponents(P);
    if (!(near(P.p, e.p_c) && P.N >= 2)) throw DomainError("static barrier requires p = p_c and N >= 2");
    if (!(C0 > 0.0)) throw DomainError("C0 must be positive");
    if (radii.empty()) throw DomainError("no radii given");
    CheckReport rep;
    rep.id = "static_barrier_pc";
    const double N = P.N;
    double Emin = std::numeric_limits<double>::infinity(), diff_max = 0.0;
    for (double r : radii) {
        if (!(r > 0.0)) throw DomainError("radii must be positive");
        const auto t = stationary_terms(C0, N, P, r);
        diff_max = std::max(diff_max, std::abs(t.diffusion) / t.absorption);
        Emin = std::min(Emin, (t.diffusion + t.absorption) * std::pow(r, (N + 1.0) * P.q));
    }
    rep.metrics["diffusion_coefficient"] = N - 1.0 - (N + 1.0) * (P.p - 1.0);
    rep.metrics["max_diffusion_to_absorption"] = diff_max;
    rep.metrics["min_scaled_residual"] = Emin;
    rep.metrics["degree_diffusion"] = -(N + 1.0) * (P.p - 1.0) - 1.0;
    rep.metrics["degree_absorption"] = -(N + 1.0) * P.q;
    rep.passed = Emin > 0.0 && diff_max < 1e-12;
    return rep;
}

}  // namespace plap
