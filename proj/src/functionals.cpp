#include "plap/functionals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace plap {

double l1_norm(const Field& u) {
    const auto w = u.grid->weights();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * std::abs(u.values[i]);
    return s;
}

double l_inf_norm(const Field& u) {
    double m = 0.0;
    for (double v : u.values) m = std::max(m, std::abs(v));
    return m;
}

Field excess(const Field& u, double floor) {
    Field out = u;
    for (double& v : out.values) v -= floor;
    return out;
}

Series ledger_series(const Trajectory& traj, const std::string& column) {
    Series s;
    s.t.reserve(traj.ledger.size());
    s.y.reserve(traj.ledger.size());
    for (const auto& r : traj.ledger) {
        s.t.push_back(r.t);
        if (column == "l1") {
            s.y.push_back(r.l1);
        } else if (column == "linf") {
            s.y.push_back(r.linf);
        } else if (column == "grad_max") {
            s.y.push_back(r.grad_max);
        } else {
            throw DomainError("unknown ledger column: " + column);
        }
    }
    return s;
}

double mass_balance_residual(const Trajectory& traj, double t) {
    const auto& L = traj.ledger;
    if (L.empty() || L.front().t != 0.0) throw DomainError("ledger incomplete: missing initial record");
    if (t < 0.0 || t > L.back().t) throw DomainError("time outside the trajectory");
    double absorbed = 0.0, boundary = 0.0;
    std::size_t i = 0;
    for (; i < L.size(); ++i) {
        if (i > 0) {
            if (!(L[i].t > L[i - 1].t)) throw DomainError("ledger incomplete: non-increasing times");
            if (std::abs((L[i].t - L[i - 1].t) - L[i].dt) > 1e-9 * std::max(1.0, L[i].t)) {
                throw DomainError("ledger incomplete: gap between records");
            }
            absorbed += L[i].absorption_increment;
            boundary += L[i].boundary_flux;
        }
        if (L[i].t >= t) break;
    }
    const double m0 = L.front().l1;
    if (!(m0 > 0.0)) throw DomainError("initial mass must be positive");
    return std::abs(L[i].l1 + absorbed - m0 - boundary) / m0;
}

namespace {

FitResult fit_linear(const Series& s, double t_lo, double t_hi, FitKind kind) {
    if (s.t.size() != s.y.size()) throw DomainError("series length mismatch");
    if (!(t_hi > t_lo)) throw DomainError("empty fit window");
    std::vector<double> X, Y;
    for (std::size_t i = 0; i < s.t.size(); ++i) {
        if (s.t[i] < t_lo || s.t[i] > t_hi) continue;
        if (!(s.y[i] > 0.0)) throw DomainError("fit needs positive values inside the window");
        if (kind == FitKind::Power && !(s.t[i] > 0.0)) throw DomainError("power fit needs t > 0");
        X.push_back(kind == FitKind::Power ? std::log(s.t[i]) : s.t[i]);
        Y.push_back(std::log(s.y[i]));
    }
    if (X.size() < kMinFitPoints) throw DomainError("fewer than 8 points in the fit window");
    const double n = static_cast<double>(X.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < X.size(); ++i) mx += X[i], my += Y[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("degenerate fit window");
    FitResult f;
    f.kind = kind;
    const double slope = sxy / sxx;
    f.value = kind == FitKind::Power ? slope : -slope;
    f.intercept = my - slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    f.t_lo = t_lo;
    f.t_hi = t_hi;
    f.points = X.size();
    return f;
}

}  // namespace

FitResult fit_power_decay(const Series& s, double t_lo, double t_hi) {
    return fit_linear(s, t_lo, t_hi, FitKind::Power);
}

FitResult fit_exp_decay(const Series& s, double t_lo, double t_hi) {
    return fit_linear(s, t_lo, t_hi, FitKind::Exponential);
}

std::optional<ExtinctionTime> detect_extinction(const Series& linf, double tol) {
    if (linf.t.empty()) return std::nullopt;
    std::size_t n = linf.y.size();
    if (linf.y[n - 1] >= tol) return std::nullopt;
    std::size_t i = n - 1;
    while (i > 0 && linf.y[i - 1] < tol) --i;
    ExtinctionTime e;
    e.t_e = linf.t[i];
    e.uncertainty = i > 0 ? linf.t[i] - linf.t[i - 1] : 0.0;
    return e;
}

std::optional<ExtinctionTime> detect_extinction(const Trajectory& traj, std::optional<double> tol) {
    return detect_extinction(ledger_series(traj, "linf"), tol.value_or(1e-4 * traj.u0_inf));
}

ExtinctionReport extinction_exponent_check(const Trajectory& traj, double t_e, double window) {
    const auto& P = traj.params;
    const auto e = critical_exponents(P);
    if (!(P.p > e.p_c + kThresholdTol && P.q > e.q_1 && P.q < P.p / 2.0)) {
        throw DomainError("extinction exponents need p in (p_c,2) and q in (q_1, p/2)");
    }
    ExtinctionReport r;
    r.l1_lower_exponent = (P.N + 1.0) * (e.q_star - P.q) / (P.p - 2.0 * P.q);
    r.linf_lower_exponent = (P.p - P.q) / (P.p - 2.0 * P.q);
    Series s1, sinf;
    r.l1_lower_constant = r.linf_lower_constant = std::numeric_limits<double>::infinity();
    for (const auto& rec : traj.ledger) {
        const double s = t_e - rec.t;
        if (rec.t < (1.0 - window) * t_e || s <= 0.0) continue;
        if (!(rec.l1 > 0.0 && rec.linf > 0.0)) continue;
        s1.t.push_back(s);
        s1.y.push_back(rec.l1);
        sinf.t.push_back(s);
        sinf.y.push_back(rec.linf);
        r.l1_lower_constant = std::min(r.l1_lower_constant, rec.l1 / std::pow(s, r.l1_lower_exponent));
        r.linf_lower_constant = std::min(r.linf_lower_constant, rec.linf / std::pow(s, r.linf_lower_exponent));
    }
    if (s1.t.size() < kMinFitPoints) throw DomainError("too few samples before extinction");
    const double lo = *std::min_element(s1.t.begin(), s1.t.end());
    const double hi = *std::max_element(s1.t.begin(), s1.t.end());
    r.l1_fit = fit_power_decay(s1, lo, hi);
    r.linf_fit = fit_power_decay(sinf, lo, hi);
    return r;
}

namespace {

constexpr std::array<const char*, 15> kEstimateNames = {
    "GradEst1",  "GradEst2",  "GradEst3",        "GradEst4",         "GradEst5",
    "GradEst6",  "GradEst7",  "GradEstEx",       "GradEstHJ",        "GradEstHJ2",
    "DiffusionOnly_i", "DiffusionOnly_ii", "DiffusionOnly_iii", "DiffusionOnly_iv", "DiffusionOnly_v"};

bool lt(double a, double b) { return a < b - kThresholdTol; }
bool near(double a, double b) { return std::abs(a - b) <= kThresholdTol; }

}  // namespace

std::string to_string(EstimateId id) { return kEstimateNames[static_cast<std::size_t>(id)]; }

EstimateId estimate_from_string(const std::string& s) {
    for (std::size_t i = 0; i < kEstimateNames.size(); ++i) {
        if (s == kEstimateNames[i]) return static_cast<EstimateId>(i);
    }
    throw DomainError("unknown estimate id: " + s);
}

bool estimate_applicable(EstimateId id, const Params& P, bool absorption) {
    const auto e = critical_exponents(P);
    const double p = P.p, q = P.q;
    const bool super = p > e.p_c + kThresholdTol;
    const bool crit = near(p, e.p_c) && P.N >= 2;
    const double qn = P.N / (P.N + 1.0);
    switch (id) {
        case EstimateId::GradEst1: return absorption && super && !lt(q, 1.0);
        case EstimateId::GradEst2: return absorption && super && !lt(q, p / 2.0) && lt(q, 1.0);
        case EstimateId::GradEst3:
            return absorption && (super || crit) && q > p - 1.0 + kThresholdTol && lt(q, p / 2.0);
        case EstimateId::GradEst4: return absorption && near(q, p - 1.0);
        case EstimateId::GradEst5: return absorption && lt(q, p - 1.0);
        case EstimateId::GradEst6: return absorption && crit && !lt(q, 1.0);
        case EstimateId::GradEst7: return absorption && crit && q > qn + kThresholdTol && lt(q, 1.0);
        case EstimateId::GradEstEx: return absorption && crit && near(q, e.p_c / 2.0);
        case EstimateId::GradEstHJ: return absorption && !lt(p, e.p_c) && lt(q, 1.0);
        case EstimateId::GradEstHJ2: return absorption && q > 1.0 + kThresholdTol;
        case EstimateId::DiffusionOnly_i: return !absorption && super;
        case EstimateId::DiffusionOnly_ii: return !absorption && crit;
        case EstimateId::DiffusionOnly_iii: return !absorption && p > e.p_sc + kThresholdTol && lt(p, e.p_c);
        case EstimateId::DiffusionOnly_iv: return !absorption && near(p, e.p_sc);
        case EstimateId::DiffusionOnly_v: return !absorption && lt(p, e.p_sc);
    }
    return false;
}

bool estimate_has_explicit_constant(EstimateId id) {
    return id == EstimateId::GradEst1 || id == EstimateId::GradEstHJ2 || id == EstimateId::DiffusionOnly_i;
}

EstimateCheck gradient_estimate_check(const Trajectory& traj, EstimateId id, double delta, double t_lo,
                                      double t_hi) {
    const auto& P = traj.params;
    if (!estimate_applicable(id, P, traj.config.absorption)) {
        throw DomainError(to_string(id) + " is not stated for these parameters");
    }
    if (!(delta >= 0.0)) throw DomainError("delta must be non-negative");
    const auto e = critical_exponents(P);
    const double p = P.p, q = P.q, N = P.N, k = e.k;
    const double U = traj.u0_inf + delta;  // sup of the shifted solution
    const double U0 = std::max(traj.u0_inf, std::numeric_limits<double>::min());

    // |d/dv f(v)| for the transformed quantity f whose gradient is bounded.
    auto fprime = [&](double v) -> double {
        switch (id) {
            case EstimateId::GradEst1:
            case EstimateId::GradEst2:
            case EstimateId::DiffusionOnly_i:
                return (2.0 - p) / p * std::pow(v, -2.0 / p);
            case EstimateId::GradEst3:
                return (q - p + 1.0) / (p - q) * std::pow(v, -1.0 / (p - q));
            case EstimateId::GradEst4:
            case EstimateId::DiffusionOnly_iv:
                return 1.0 / v;
            case EstimateId::GradEst5:
                return (p - q - 1.0) / (p - q) * std::pow(v, -1.0 / (p - q));
            case EstimateId::GradEst6:
            case EstimateId::GradEst7:
            case EstimateId::GradEstEx:
            case EstimateId::DiffusionOnly_ii:
                return std::pow(v, -1.0 / N - 1.0) / N;
            case EstimateId::GradEstHJ:
                return 1.0;
            case EstimateId::GradEstHJ2:
                return (q - 1.0) / q * std::pow(v, -1.0 / q);
            case EstimateId::DiffusionOnly_iii:
                return k / (1.0 - k) * std::pow(v, -1.0 / (1.0 - k));
            case EstimateId::DiffusionOnly_v:
                return -k / (1.0 - k) * std::pow(v, -1.0 / (1.0 - k));
        }
        return 0.0;
    };
    auto rhs = [&](double t, double v) -> double {
        const double pc = e.p_c;
        const double lg = std::log(std::exp(1.0) * U / v);
        switch (id) {
            case EstimateId::GradEst1:
            case EstimateId::DiffusionOnly_i:
                return std::pow((2.0 - p) / p, (p - 1.0) / p) * std::pow(*e.eta, 1.0 / p) * std::pow(t, -1.0 / p);
            case EstimateId::GradEst2:
                return std::pow(U0, (2.0 * q - p) / (p * (p - q))) + std::pow(t, -1.0 / p);
            case EstimateId::GradEst3:
            case EstimateId::GradEst5:
                return 1.0 + std::pow(U0, (p - 2.0 * q) / (p * (p - q))) * std::pow(t, -1.0 / p);
            case EstimateId::GradEst4:
                return 1.0 + std::pow(U0, (2.0 - p) / p) * std::pow(t, -1.0 / p);
            case EstimateId::GradEst6:
            case EstimateId::DiffusionOnly_ii:
                return std::pow(lg, 1.0 / pc) * std::pow(t, -1.0 / pc);
            case EstimateId::GradEst7:
                return (std::pow(U0, 1.0 / (N * *e.xi * (pc - q))) + std::pow(t, -1.0 / pc)) * std::pow(lg, 1.0 / pc);
            case EstimateId::GradEstEx:
                return std::pow(lg, 2.0 / pc) * (1.0 + std::pow(t, -1.0 / pc));
            case EstimateId::GradEstHJ:
                return std::pow(U0, 1.0 / q) * std::pow(t, -1.0 / q);
            case EstimateId::GradEstHJ2:
                return std::pow(q - 1.0, (q - 1.0) / q) / q * std::pow(t, -1.0 / q);
            case EstimateId::DiffusionOnly_iii:
            case EstimateId::DiffusionOnly_v:
                return std::pow(U0, (2.0 - p - 2.0 * k) / (p * (1.0 - k))) * std::pow(t, -1.0 / p);
            case EstimateId::DiffusionOnly_iv:
                return std::pow(U0, (2.0 - p) / p) * std::pow(t, -1.0 / p);
        }
        return 0.0;
    };

    EstimateCheck c;
    c.id = id;
    c.explicit_constant = estimate_has_explicit_constant(id);
    c.delta = delta;
    c.t_lo = t_lo;
    c.t_hi = t_hi;
    for (const auto& snap : traj.snapshots) {
        if (snap.t <= 0.0 || snap.t < t_lo || snap.t > t_hi) continue;
        Field u(traj.grid, snap.values);
        const auto g = gradient_magnitude(u);
        double best = 0.0, best_rhs = 0.0, lhs_max = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double v = snap.values[i] - traj.floor + delta;
            if (!(v > 0.0)) continue;
            const double lhs = fprime(v) * g[i];
            const double r = rhs(snap.t, v);
            lhs_max = std::max(lhs_max, lhs);
            if (lhs / r > best) {
                best = lhs / r;
                best_rhs = r;
            }
        }
        c.ratio.t.push_back(snap.t);
        c.ratio.y.push_back(best);
        c.lhs.t.push_back(snap.t);
        c.lhs.y.push_back(lhs_max);
        c.rhs.t.push_back(snap.t);
        c.rhs.y.push_back(best_rhs);
    }
    if (c.ratio.t.empty()) throw DomainError("no snapshots inside the estimate window");
    c.max_ratio = *std::max_element(c.ratio.y.begin(), c.ratio.y.end());
    const double mn = *std::min_element(c.ratio.y.begin(), c.ratio.y.end());
    c.stability = mn > 0.0 ? c.max_ratio / mn : std::numeric_limits<double>::infinity();
    return c;
}

double gn_ratio(const Field& w) {
    const double N = w.grid->geometry() == Geometry::Line ? 1.0 : w.grid->N();
    const auto d = face_differences(w);
    double gmax = 0.0;
    for (double x : d) gmax = std::max(gmax, std::abs(x));
    const double l1 = l1_norm(w);
    const double linf = l_inf_norm(w);
    if (!(gmax > 0.0 && l1 > 0.0)) throw DomainError("gn_ratio needs a non-constant, non-zero field");
    return linf / (std::pow(gmax, N / (N + 1.0)) * std::pow(l1, 1.0 / (N + 1.0)));
}

}  // namespace plap
