#include "plap/exponents.hpp"

#include <algorithm>
#include <cmath>

namespace plap {

namespace {

bool lt(double a, double b) { return a < b - kThresholdTol; }
bool near(double a, double b) { return std::abs(a - b) <= kThresholdTol; }

}  // namespace

void Params::validate() const {
    if (!(p > 1.0 && p < 2.0)) throw DomainError("p must lie in (1,2), got " + std::to_string(p));
    if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("q must be positive, got " + std::to_string(q));
    if (N < 1) throw DomainError("N must be >= 1, got " + std::to_string(N));
}

CriticalExponents critical_exponents(const Params& params) {
    params.validate();
    const double p = params.p, q = params.q, N = params.N;
    CriticalExponents e;
    e.p_c = 2.0 * N / (N + 1.0);
    e.p_sc = 2.0 * (N + 1.0) / (N + 3.0);
    e.q_star = p - N / (N + 1.0);
    e.k = (2.0 - p) * (p * (N + 3.0) - 2.0 * (N + 1.0)) / (4.0 * (p - 1.0));
    e.q_1 = std::max(p - 1.0, N / (N + 1.0));
    if (const double d = q * (N + 1.0) - N; d > kThresholdTol) e.xi = 1.0 / d;
    if (const double d = N * (p - 2.0) + p; d > kThresholdTol) e.eta = 1.0 / d;
    if (q < e.q_star - kThresholdTol) e.theta = (N + 1.0) * (e.q_star - q) / (p - q);
    return e;
}

RatePrediction classify(const Params& params, bool fast_decay) {
    const auto e = critical_exponents(params);
    const double p = params.p, q = params.q, N = params.N;
    const double qn = N / (N + 1.0);

    RatePrediction r;
    const bool super = !lt(p, e.p_c) && !near(p, e.p_c);
    const bool critical = near(p, e.p_c);

    // No-tail classification.
    if (super) {
        if (!lt(q, e.q_star) && !near(q, e.q_star)) {
            r.base_case = BaseCase::I;
        } else if (!lt(q, qn) && !near(q, qn)) {
            r.base_case = BaseCase::II;
        } else if (near(q, qn)) {
            r.base_case = BaseCase::III;
            r.exponential_branch = ExponentialBranch::SupercriticalCriticalQ;
        } else {
            r.base_case = BaseCase::IV;
        }
    } else if (critical) {
        if (!lt(q, e.p_c / 2.0)) {
            r.base_case = BaseCase::III;
            r.exponential_branch = ExponentialBranch::CriticalP;
        } else {
            r.base_case = BaseCase::IV;
        }
    } else {
        r.base_case = BaseCase::IV;
    }

    r.l1_limit_positive = !lt(p, e.p_c) && q > e.q_star + kThresholdTol;
    r.positivity = !lt(p, e.p_c) && !lt(q, p / 2.0);

    if (!fast_decay) {
        switch (r.base_case) {
            case BaseCase::I:
                r.regime = Regime::PositivityDiffusionDecay;
                r.linf_exponent = -N * *e.eta;
                break;
            case BaseCase::II:
                r.regime = Regime::PositivityFastAlgebraic;
                r.linf_exponent = -N * *e.xi;
                break;
            case BaseCase::III:
                r.regime = Regime::Exponential;
                r.exponential_decay = true;
                break;
            case BaseCase::IV:
                r.regime = Regime::Extinction;
                break;
        }
        return r;
    }

    // Fast-decaying data.
    if (lt(p, e.p_c)) {
        r.regime = Regime::Extinction;
    } else if (lt(q, p / 2.0)) {
        r.regime = Regime::Extinction;
    } else if (near(q, p / 2.0)) {
        r.regime = Regime::Exponential;
        r.exponential_decay = true;
    } else if (lt(q, e.q_star)) {
        r.regime = Regime::PositivityFastAlgebraic;
        r.linf_exponent = -(p - q) / (2.0 * q - p);
        r.l1_exponent = -(N + 1.0) * (e.q_star - q) / (2.0 * q - p);
    } else {
        r.regime = Regime::PositivityDiffusionDecay;
        if (critical) {
            r.exponential_decay = true;
        } else {
            r.linf_exponent = -N * *e.eta;
        }
    }
    r.fast_decay_data_required = super && !lt(q, qn) && lt(q, e.q_star);
    return r;
}

SigmaConstants sigma_constants(const Params& params) {
    const auto e = critical_exponents(params);
    const double p = params.p, q = params.q, N = params.N;
    if (!(q > p - 1.0 && q < e.q_star)) {
        throw DomainError("stationary supersolution requires q in (p-1, q*)");
    }
    SigmaConstants s;
    const double gap = q - p + 1.0;
    s.alpha = (p - q) / gap;
    s.beta = (N * (p - 1.0) - q * (N - 1.0)) / gap;
    s.A0 = s.beta > 0.0 ? std::pow(s.beta, 1.0 / gap) / s.alpha : 0.0;
    return s;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Extinction: return "Extinction";
        case Regime::Exponential: return "Exponential";
        case Regime::PositivityFastAlgebraic: return "PositivityFastAlgebraic";
        case Regime::PositivityDiffusionDecay: return "PositivityDiffusionDecay";
    }
    return "?";
}

std::string to_string(BaseCase c) {
    switch (c) {
        case BaseCase::I: return "i";
        case BaseCase::II: return "ii";
        case BaseCase::III: return "iii";
        case BaseCase::IV: return "iv";
    }
    return "?";
}

std::string to_string(ExponentialBranch b) {
    switch (b) {
        case ExponentialBranch::None: return "none";
        case ExponentialBranch::SupercriticalCriticalQ: return "supercritical_p_critical_q";
        case ExponentialBranch::CriticalP: return "critical_p";
    }
    return "?";
}

Regime regime_from_string(const std::string& s) {
    for (auto r : {Regime::Extinction, Regime::Exponential, Regime::PositivityFastAlgebraic,
                   Regime::PositivityDiffusionDecay}) {
        if (to_string(r) == s) return r;
    }
    throw DomainError("unknown regime: " + s);
}

}  // namespace plap
