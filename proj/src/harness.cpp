#include "plap/harness.hpp"

#include <boost/crc.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace plap {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------------------
// JSON helpers

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

double num(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing '" + std::string(key) + "' in " + where);
    if (!j[key].is_number()) throw ConfigError("'" + std::string(key) + "' in " + where + " must be a number");
    return j[key].get<double>();
}

double num_or(const json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    return num(j, key, where);
}

std::pair<double, double> window_of(const json& w, const std::string& where) {
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
        throw ConfigError(where + " must be [t_lo, t_hi]");
    }
    return {w[0].get<double>(), w[1].get<double>()};
}

json fit_json(const std::optional<FitResult>& f) {
    if (!f) return nullptr;
    return json{{"kind", f->kind == FitKind::Power ? "power" : "exponential"},
                {"value", f->value},
                {"intercept", f->intercept},
                {"r2", f->r2},
                {"window", {f->t_lo, f->t_hi}},
                {"points", f->points}};
}

json opt_num(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig parse_config(const json& j) {
    only_keys(j, "config", {"name", "params", "fast_decay", "simulate", "grid", "datum", "solver", "analysis"});
    ExperimentConfig c;
    c.name = j.value("name", std::string("run"));
    if (!j.contains("params")) throw ConfigError("missing 'params'");
    const auto& P = j["params"];
    only_keys(P, "params", {"p", "q", "N"});
    c.params.p = num(P, "p", "params");
    c.params.q = num(P, "q", "params");
    c.params.N = P.value("N", 1);
    try {
        c.params.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (j.contains("fast_decay")) c.fast_decay = j["fast_decay"].get<bool>();
    c.simulate = j.value("simulate", true);

    const json G = j.value("grid", json::object());
    only_keys(G, "grid", {"geometry", "L", "M"});
    const std::string geom = G.value("geometry", std::string("line"));
    if (geom == "line") {
        c.geometry = Geometry::Line;
    } else if (geom == "radial") {
        c.geometry = Geometry::Radial;
    } else {
        throw ConfigError("grid.geometry must be 'line' or 'radial'");
    }
    c.L = num_or(G, "L", c.L, "grid");
    c.M = G.value("M", c.M);
    if (c.M < 8) throw ConfigError("grid.M must be >= 8");
    if (!(c.L > 0.0)) throw ConfigError("grid.L must be positive");
    if (c.geometry == Geometry::Line && c.params.N != 1) throw ConfigError("line geometry requires N = 1");

    const json D = j.value("datum", json{{"kind", "bump"}});
    const std::string kind = D.value("kind", std::string("bump"));
    if (kind == "bump") {
        only_keys(D, "datum", {"kind", "amplitude", "width"});
        c.datum = Bump{num_or(D, "amplitude", 1.0, "datum"), num_or(D, "width", 1.0, "datum")};
    } else if (kind == "power_tail") {
        only_keys(D, "datum", {"kind", "C0", "alpha", "core_radius"});
        c.datum = PowerTail{num_or(D, "C0", 1.0, "datum"), num(D, "alpha", "datum"),
                            num_or(D, "core_radius", 1.0, "datum")};
    } else if (kind == "custom") {
        only_keys(D, "datum", {"kind", "values"});
        c.datum = Custom{D.at("values").get<std::vector<double>>()};
    } else {
        throw ConfigError("datum.kind must be bump, power_tail or custom");
    }

    const json S = j.value("solver", json::object());
    only_keys(S, "solver", {"eps", "gamma", "t_end", "scheme", "dt_policy", "observer_stride", "absorption",
                            "max_retries", "max_steps", "stop_below_excess", "stencil"});
    auto& s = c.solver;
    s.t_end = num_or(S, "t_end", 1.0, "solver");
    if (!(s.t_end >= 0.0)) throw ConfigError("solver.t_end must be non-negative");
    const std::string scheme = S.value("scheme", std::string("explicit"));
    if (scheme == "explicit") {
        s.scheme = Scheme::ExplicitEuler;
    } else if (scheme == "semi_implicit") {
        s.scheme = Scheme::SemiImplicit;
    } else {
        throw ConfigError("solver.scheme must be 'explicit' or 'semi_implicit'");
    }
    const json dtp = S.value("dt_policy", json{{"kind", "cfl"}});
    const std::string dk = dtp.value("kind", std::string("cfl"));
    if (dk == "cfl") {
        only_keys(dtp, "dt_policy", {"kind", "safety"});
        s.dt_policy = CflAdaptive{num_or(dtp, "safety", 0.5, "dt_policy")};
    } else if (dk == "fixed") {
        only_keys(dtp, "dt_policy", {"kind", "dt"});
        s.dt_policy = FixedDt{num(dtp, "dt", "dt_policy")};
    } else if (dk == "change_limited") {
        only_keys(dtp, "dt_policy", {"kind", "fraction", "dt_max"});
        s.dt_policy = ChangeLimited{num_or(dtp, "fraction", 0.02, "dt_policy"),
                                    num_or(dtp, "dt_max", s.t_end / 20.0, "dt_policy")};
    } else {
        throw ConfigError("dt_policy.kind must be cfl, fixed or change_limited");
    }
    s.observer_stride = S.value("observer_stride", 0);
    s.absorption = S.value("absorption", true);
    const std::string stencil = S.value("stencil", std::string("face_average"));
    if (stencil == "face_average") {
        s.stencil = AbsorptionStencil::FaceAverage;
    } else if (stencil == "upwind") {
        s.stencil = AbsorptionStencil::Upwind;
    } else {
        throw ConfigError("solver.stencil must be 'face_average' or 'upwind'");
    }
    s.max_retries = S.value("max_retries", s.max_retries);
    s.max_steps = S.value("max_steps", s.max_steps);
    s.stop_below_excess = num_or(S, "stop_below_excess", 0.0, "solver");

    const Grid grid(c.geometry, c.L, c.M, c.params.N);
    const auto defaults = RegEps::defaults(c.params, grid);
    c.eps_default = !S.contains("eps") || S["eps"].is_null();
    c.gamma_default = !S.contains("gamma") || S["gamma"].is_null();
    const double eps = c.eps_default ? defaults.eps : num(S, "eps", "solver");
    const double gamma = c.gamma_default ? defaults.gamma : num(S, "gamma", "solver");
    try {
        s.reg = RegEps::make(eps, gamma, c.params);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }

    const json A = j.value("analysis", json::object());
    only_keys(A, "analysis", {"fit_window", "ext_tol", "boundary_fraction", "l1_plateau_exponent", "collapse_factor",
                              "rate_tolerance", "check_rate", "check_regime", "mass_balance_times", "mass_balance_tol",
                              "estimates", "estimate_ratio_tol", "report_snapshots",
                              "report_series_max"});
    auto& a = c.analysis;
    if (A.contains("fit_window") && !A["fit_window"].is_null()) a.fit_window = window_of(A["fit_window"], "fit_window");
    if (A.contains("ext_tol") && !A["ext_tol"].is_null()) a.ext_tol = num(A, "ext_tol", "analysis");
    a.boundary_fraction = num_or(A, "boundary_fraction", a.boundary_fraction, "analysis");
    a.l1_plateau_exponent = num_or(A, "l1_plateau_exponent", a.l1_plateau_exponent, "analysis");
    a.collapse_factor = num_or(A, "collapse_factor", a.collapse_factor, "analysis");
    a.rate_tolerance = num_or(A, "rate_tolerance", a.rate_tolerance, "analysis");
    a.check_rate = A.value("check_rate", a.check_rate);
    a.check_regime = A.value("check_regime", a.check_regime);
    a.mass_balance_times = A.value("mass_balance_times", std::vector<double>{});
    a.mass_balance_tol = num_or(A, "mass_balance_tol", a.mass_balance_tol, "analysis");
    a.estimate_ratio_tol = num_or(A, "estimate_ratio_tol", a.estimate_ratio_tol, "analysis");
    a.report_snapshots = A.value("report_snapshots", a.report_snapshots);
    a.report_series_max = A.value("report_series_max", a.report_series_max);
    for (const auto& e : A.value("estimates", json::array())) {
        only_keys(e, "estimate", {"id", "delta", "window"});
        EstimateRequest r;
        try {
            r.id = estimate_from_string(e.at("id").get<std::string>());
        } catch (const DomainError& ex) {
            throw ConfigError(ex.what());
        }
        if (e.contains("delta") && e["delta"].is_number()) r.delta = e["delta"].get<double>();
        const auto w = e.contains("window") ? window_of(e["window"], "estimate.window")
                                            : std::pair<double, double>{0.0, s.t_end};
        r.t_lo = w.first;
        r.t_hi = w.second;
        a.estimates.push_back(r);
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["params"] = {{"p", c.params.p}, {"q", c.params.q}, {"N", c.params.N}};
    j["fast_decay"] = c.fast_decay;
    j["simulate"] = c.simulate;
    j["grid"] = {{"geometry", c.geometry == Geometry::Line ? "line" : "radial"}, {"L", c.L}, {"M", c.M}};
    if (const auto* b = std::get_if<Bump>(&c.datum)) {
        j["datum"] = {{"kind", "bump"}, {"amplitude", b->amplitude}, {"width", b->width}};
    } else if (const auto* t = std::get_if<PowerTail>(&c.datum)) {
        j["datum"] = {{"kind", "power_tail"}, {"C0", t->C0}, {"alpha", t->alpha}, {"core_radius", t->core_radius}};
    } else {
        j["datum"] = {{"kind", "custom"}, {"values", std::get<Custom>(c.datum).values}};
    }
    const auto& s = c.solver;
    json dtp;
    if (const auto* f = std::get_if<FixedDt>(&s.dt_policy)) {
        dtp = {{"kind", "fixed"}, {"dt", f->dt}};
    } else if (const auto* a = std::get_if<CflAdaptive>(&s.dt_policy)) {
        dtp = {{"kind", "cfl"}, {"safety", a->safety}};
    } else {
        const auto& l = std::get<ChangeLimited>(s.dt_policy);
        dtp = {{"kind", "change_limited"}, {"fraction", l.fraction}, {"dt_max", l.dt_max}};
    }
    j["solver"] = {{"eps", s.reg.eps},
                   {"gamma", s.reg.gamma},
                   {"t_end", s.t_end},
                   {"scheme", s.scheme == Scheme::ExplicitEuler ? "explicit" : "semi_implicit"},
                   {"dt_policy", dtp},
                   {"observer_stride", s.observer_stride},
                   {"absorption", s.absorption},
                   {"stencil", s.stencil == AbsorptionStencil::FaceAverage ? "face_average" : "upwind"},
                   {"max_retries", s.max_retries},
                   {"max_steps", s.max_steps},
                   {"stop_below_excess", s.stop_below_excess}};
    const auto& a = c.analysis;
    json est = json::array();
    for (const auto& e : a.estimates) {
        est.push_back({{"id", to_string(e.id)}, {"delta", opt_num(e.delta)}, {"window", {e.t_lo, e.t_hi}}});
    }
    j["analysis"] = {{"fit_window", a.fit_window ? json{a.fit_window->first, a.fit_window->second} : json(nullptr)},
                     {"ext_tol", opt_num(a.ext_tol)},
                     {"boundary_fraction", a.boundary_fraction},
                     {"l1_plateau_exponent", a.l1_plateau_exponent},
                     {"collapse_factor", a.collapse_factor},
                     {"rate_tolerance", a.rate_tolerance},
                     {"check_rate", a.check_rate},
                     {"check_regime", a.check_regime},
                     {"mass_balance_times", a.mass_balance_times},
                     {"mass_balance_tol", a.mass_balance_tol},
                     {"estimates", est},
                     {"estimate_ratio_tol", a.estimate_ratio_tol},
                     {"report_snapshots", a.report_snapshots},
                     {"report_series_max", a.report_series_max}};
    return j;
}

// ---------------------------------------------------------------------------
// Regime observation

namespace {

// log sup(u - floor) at time t, linear in t between ledger records
double log_linf_at(const Trajectory& traj, double t) {
    const auto& L = traj.ledger;
    auto it = std::lower_bound(L.begin(), L.end(), t, [](const LedgerRecord& r, double v) { return r.t < v; });
    if (it == L.begin()) return std::log(L.front().linf);
    if (it == L.end()) return std::log(L.back().linf);
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double w = (t - a.t) / (b.t - a.t);
    return (1.0 - w) * std::log(a.linf) + w * std::log(b.linf);
}

}  // namespace

ObservedRegime observe_regime(const Trajectory& traj, const AnalysisConfig& a) {
    ObservedRegime o;
    const double tol = a.ext_tol.value_or(1e-4 * traj.u0_inf);
    const auto linf = ledger_series(traj, "linf");
    o.active_end = traj.t_final();
    for (const auto& r : traj.ledger) {
        if (r.t > 0.0 && r.outer_excess > a.boundary_fraction * r.linf) {
            o.boundary_flag_time = r.t;
            o.active_end = std::min(o.active_end, r.t);
            break;
        }
    }
    if (const auto cross = detect_extinction(linf, tol)) {
        o.threshold_crossing = cross->t_e;
        const double T = cross->t_e;
        const double r1 = (log_linf_at(traj, 0.5 * T) - log_linf_at(traj, 0.75 * T)) / (0.25 * T);
        const double r2 = (log_linf_at(traj, 0.75 * T) - log_linf_at(traj, T)) / (0.25 * T);
        o.collapse_ratio = r1 > 0.0 ? r2 / r1 : std::numeric_limits<double>::infinity();
        if (o.collapse_ratio > a.collapse_factor) {
            o.regime = Regime::Extinction;
            o.extinction = cross;
            o.active_end = std::min(o.active_end, T);
            return o;
        }
        o.active_end = std::min(o.active_end, T);
    }
    const auto w = a.fit_window.value_or(std::pair<double, double>{o.active_end / 10.0, o.active_end});
    const auto l1 = ledger_series(traj, "l1");
    try {
        o.linf_power = fit_power_decay(linf, w.first, w.second);
        o.linf_exp = fit_exp_decay(linf, w.first, w.second);
        o.l1_power = fit_power_decay(l1, w.first, w.second);
    } catch (const DomainError&) {
    }
    if (o.linf_power && o.linf_exp && o.linf_exp->r2 > o.linf_power->r2) {
        o.regime = Regime::Exponential;
    } else if (o.l1_power && o.l1_power->value > a.l1_plateau_exponent) {
        o.regime = Regime::PositivityDiffusionDecay;
    } else {
        o.regime = Regime::PositivityFastAlgebraic;
    }
    return o;
}

bool near_threshold(const Params& P, double rel) {
    const auto e = critical_exponents(P);
    auto close = [&](double x, double thr) {
        const double d = std::abs(x - thr);
        return d > kThresholdTol && d < rel * std::abs(thr);
    };
    return close(P.q, P.p / 2.0) || close(P.q, e.q_star) || close(P.q, P.N / (P.N + 1.0)) || close(P.p, e.p_c);
}

// ---------------------------------------------------------------------------
// Experiments

bool RunReport::passed() const {
    if (error) return false;
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

RunReport run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    RunReport rep;
    rep.config = config;
    rep.prediction = classify(config.params, config.fast_decay);
    rep.near_threshold = near_threshold(config.params);
    if (!config.simulate) return rep;
    try {
        auto grid = make_grid(config.geometry, config.L, config.M, config.params.N);
        const Field u0 = lift_initial(config.datum, grid, config.solver.reg);
        try {
            rep.trajectory = run(config.params, config.solver, u0);
        } catch (const StepAborted& e) {
            rep.trajectory = e.partial();
            rep.error = e.what();
        }
        const auto& a = config.analysis;
        if (!rep.error) {
            rep.observed = observe_regime(rep.trajectory, a);
            rep.agree = rep.observed.regime == rep.prediction.regime;
            if (a.check_regime) {
                rep.checks.push_back({"regime", rep.agree, false,
                                      {{"predicted", to_string(rep.prediction.regime)},
                                       {"observed", to_string(rep.observed.regime)}}});
            }
            if (a.check_rate && rep.prediction.linf_exponent) {
                const double want = *rep.prediction.linf_exponent;
                const bool have = rep.observed.linf_power.has_value();
                const double got = have ? rep.observed.linf_power->value : std::nan("");
                const double relerr = std::abs(got - want) / std::abs(want);
                rep.checks.push_back({"linf_rate", have && relerr <= a.rate_tolerance, false,
                                      {{"predicted", want}, {"fitted", got}, {"relative_error", relerr}}});
            }
            for (double t : a.mass_balance_times) {
                const double r = mass_balance_residual(rep.trajectory, t);
                rep.checks.push_back(
                    {"mass_balance", r < a.mass_balance_tol, false, {{"t", t}, {"residual", r}}});
            }
            for (const auto& req : a.estimates) {
                const double delta = req.delta.value_or(rep.trajectory.floor);
                EstimateCheck ec;
                try {
                    ec = gradient_estimate_check(rep.trajectory, req.id, delta, req.t_lo, req.t_hi);
                } catch (const DomainError& e) {
                    rep.checks.push_back({"estimate:" + to_string(req.id), false, false, {{"error", e.what()}}});
                    continue;
                }
                CheckResult cr{"estimate:" + to_string(req.id), true, !ec.explicit_constant,
                               {{"max_ratio", ec.max_ratio}, {"stability", ec.stability}, {"delta", delta}}};
                if (ec.explicit_constant) cr.passed = ec.max_ratio <= a.estimate_ratio_tol;
                rep.checks.push_back(cr);
                rep.estimates.push_back(std::move(ec));
            }
        }
    } catch (const DomainError& e) {
        rep.error = e.what();
    }
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

namespace {

json prediction_json(const RatePrediction& p) {
    return {{"regime", to_string(p.regime)},
            {"base_case", to_string(p.base_case)},
            {"exponential_branch", to_string(p.exponential_branch)},
            {"exponential_decay", p.exponential_decay},
            {"linf_exponent", opt_num(p.linf_exponent)},
            {"l1_exponent", opt_num(p.l1_exponent)},
            {"l1_limit_positive", p.l1_limit_positive},
            {"positivity", p.positivity},
            {"fast_decay_data_required", p.fast_decay_data_required}};
}

json observed_json(const ObservedRegime& o) {
    return {{"regime", to_string(o.regime)},
            {"T_e", o.extinction ? json(o.extinction->t_e) : json(nullptr)},
            {"T_e_uncertainty", o.extinction ? json(o.extinction->uncertainty) : json(nullptr)},
            {"threshold_crossing", opt_num(o.threshold_crossing)},
            {"collapse_ratio", o.collapse_ratio},
            {"active_end", o.active_end},
            {"boundary_flag_time", opt_num(o.boundary_flag_time)},
            {"linf_power", fit_json(o.linf_power)},
            {"linf_exp", fit_json(o.linf_exp)},
            {"l1_power", fit_json(o.l1_power)}};
}

}  // namespace

json report_to_json(const RunReport& r) {
    json j;
    j["config"] = config_to_json(r.config);
    j["prediction"] = prediction_json(r.prediction);
    if (!r.config.simulate) return j;
    j["observed"] = observed_json(r.observed);
    j["agree"] = r.agree;
    j["near_threshold"] = r.near_threshold;
    j["passed"] = r.passed();
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"informational", c.informational}, {"detail", c.detail}});
    }
    j["checks"] = checks;
    const auto& T = r.trajectory;
    j["summary"] = {{"steps", T.ledger.empty() ? 0 : T.ledger.size() - 1},
                    {"rejected_steps", T.rejected_steps},
                    {"t_final", T.t_final()},
                    {"floor", T.floor},
                    {"u0_inf", T.u0_inf},
                    {"completed", T.completed}};
    // Cumulative columns are summed before thinning so every kept row stays exact.
    std::vector<double> t, dt, l1, linf, gm, ab, bf, oe;
    const std::size_t n = T.ledger.size();
    const std::size_t cap = static_cast<std::size_t>(std::max(2, r.config.analysis.report_series_max));
    double abs_cum = 0.0, bnd_cum = 0.0;
    std::size_t next_pick = 0, picked = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = T.ledger[i];
        if (i > 0) {
            abs_cum += rec.absorption_increment;
            bnd_cum += rec.boundary_flux;
        }
        if (n > cap && i != next_pick && i + 1 != n) continue;
        ++picked;
        next_pick = n > cap ? (picked * (n - 1)) / (cap - 1) : i + 1;
        t.push_back(rec.t);
        dt.push_back(rec.dt);
        l1.push_back(rec.l1);
        linf.push_back(rec.linf);
        gm.push_back(rec.grad_max);
        ab.push_back(abs_cum);
        bf.push_back(bnd_cum);
        oe.push_back(rec.outer_excess);
    }
    json series;
    series["t"] = t;
    series["dt"] = dt;
    series["l1"] = l1;
    series["linf"] = linf;
    series["grad_max"] = gm;
    series["absorption_cum"] = ab;
    series["boundary_cum"] = bf;
    series["outer_excess"] = oe;
    j["series"] = series;
    json est = json::array();
    for (const auto& e : r.estimates) {
        est.push_back({{"id", to_string(e.id)},
                       {"explicit_constant", e.explicit_constant},
                       {"delta", e.delta},
                       {"window", {e.t_lo, e.t_hi}},
                       {"max_ratio", e.max_ratio},
                       {"stability", e.stability},
                       {"t", e.ratio.t},
                       {"lhs", e.lhs.y},
                       {"rhs", e.rhs.y},
                       {"ratio", e.ratio.y}});
    }
    j["estimates"] = est;
    json prof;
    if (T.grid && !T.snapshots.empty()) {
        prof["x"] = std::vector<double>(T.grid->x().begin(), T.grid->x().end());
        const std::size_t n = T.snapshots.size();
        const std::size_t want = std::max<std::size_t>(2, static_cast<std::size_t>(std::max(2, r.config.analysis.report_snapshots)));
        std::vector<std::size_t> pick;
        for (std::size_t i = 0; i < want; ++i) {
            const std::size_t idx = n == 1 ? 0 : (i * (n - 1)) / (want - 1);
            if (pick.empty() || pick.back() != idx) pick.push_back(idx);
        }
        json times = json::array(), rows = json::array();
        for (std::size_t idx : pick) {
            times.push_back(T.snapshots[idx].t);
            std::vector<double> v = T.snapshots[idx].values;
            for (double& x : v) x -= T.floor;
            rows.push_back(v);
        }
        prof["t"] = times;
        prof["u"] = rows;
    }
    j["profiles"] = prof;
    return j;
}

// ---------------------------------------------------------------------------
// Sweeps

double resolve_q(const json& q, double p, int N) {
    if (q.is_number()) return q.get<double>();
    only_keys(q, "q entry", {"anchor", "scale"});
    const std::string anchor = q.at("anchor").get<std::string>();
    const double scale = q.value("scale", 1.0);
    Params P{p, 1.0, N};
    const auto e = critical_exponents(P);
    double base = 0.0;
    if (anchor == "p/2") {
        base = p / 2.0;
    } else if (anchor == "q_star") {
        base = e.q_star;
    } else if (anchor == "q_1") {
        base = e.q_1;
    } else if (anchor == "mid") {
        base = 0.5 * (p / 2.0 + e.q_star);
    } else {
        throw ConfigError("q anchor must be p/2, q_star, q_1 or mid");
    }
    return scale * base;
}

SweepSpec parse_sweep(const json& j) {
    only_keys(j, "sweep", {"base", "p", "q", "N", "workers"});
    SweepSpec s;
    s.base = j.at("base");
    if (s.base.contains("params")) throw ConfigError("sweep base must not fix params");
    s.p_values = j.at("p").get<std::vector<double>>();
    for (const auto& q : j.at("q")) s.q_values.push_back(q);
    s.N = j.value("N", 1);
    s.workers = j.value("workers", 0);
    if (s.p_values.empty() || s.q_values.empty()) throw ConfigError("sweep needs p and q values");
    return s;
}

SweepResult run_sweep(const SweepSpec& spec) {
    std::vector<ExperimentConfig> configs;
    for (double p : spec.p_values) {
        for (const auto& qj : spec.q_values) {
            json cj = spec.base;
            const double q = resolve_q(qj, p, spec.N);
            cj["params"] = {{"p", p}, {"q", q}, {"N", spec.N}};
            std::ostringstream nm;
            nm << "p=" << format_double(p) << ",q=" << format_double(q);
            cj["name"] = nm.str();
            configs.push_back(parse_config(cj));
        }
    }
    std::stable_sort(configs.begin(), configs.end(), [](const ExperimentConfig& a, const ExperimentConfig& b) {
        return std::pair(a.params.p, a.params.q) < std::pair(b.params.p, b.params.q);
    });
    SweepResult res;
    res.cells.resize(configs.size());
    std::atomic<std::size_t> next{0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned nworkers = std::min<unsigned>(spec.workers > 0 ? spec.workers : hw, configs.size());
    auto work = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) res.cells[i] = run_experiment(configs[i]);
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < nworkers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (const auto& c : res.cells) {
        if (c.near_threshold) continue;
        ++res.counted;
        if (c.agree && !c.error) ++res.agreeing;
    }
    return res;
}

namespace {

struct AtlasRow {
    std::string fit_exponent, fit_r2, T_e;
};

AtlasRow atlas_fit(const RunReport& c) {
    AtlasRow r;
    const auto& o = c.observed;
    const auto& f = o.regime == Regime::Exponential ? o.linf_exp : o.linf_power;
    if (f && o.regime != Regime::Extinction) {
        r.fit_exponent = format_double(f->value);
        r.fit_r2 = format_double(f->r2);
    }
    if (o.extinction) r.T_e = format_double(o.extinction->t_e);
    return r;
}

}  // namespace

std::string atlas_csv(const SweepResult& s) {
    std::string out = "p,q,N,predicted_regime,observed_regime,fit_exponent,fit_r2,T_e,agree\n";
    for (const auto& c : s.cells) {
        const auto r = atlas_fit(c);
        const auto& P = c.config.params;
        out += format_double(P.p) + "," + format_double(P.q) + "," + std::to_string(P.N) + "," +
               to_string(c.prediction.regime) + "," + (c.error ? "Error" : to_string(c.observed.regime)) + "," +
               r.fit_exponent + "," + r.fit_r2 + "," + r.T_e + "," + (c.agree && !c.error ? "1" : "0") + "\n";
    }
    return out;
}

json sweep_to_json(const SweepResult& s) {
    json cells = json::array();
    for (const auto& c : s.cells) {
        cells.push_back({{"config", config_to_json(c.config)},
                         {"prediction", prediction_json(c.prediction)},
                         {"observed", observed_json(c.observed)},
                         {"agree", c.agree && !c.error},
                         {"near_threshold", c.near_threshold},
                         {"error", c.error ? json(*c.error) : json(nullptr)}});
    }
    return {{"kind", "sweep"}, {"agreeing", s.agreeing}, {"counted", s.counted}, {"cells", cells}};
}

// ---------------------------------------------------------------------------
// Plot data

PlotKind plot_kind_from_string(const std::string& s) {
    if (s == "DecayLogLog") return PlotKind::DecayLogLog;
    if (s == "MassLedger") return PlotKind::MassLedger;
    if (s == "RegimeAtlas") return PlotKind::RegimeAtlas;
    if (s == "EstimateRatio") return PlotKind::EstimateRatio;
    if (s == "ProfileEvolution") return PlotKind::ProfileEvolution;
    throw ConfigError("unknown plot kind: " + s);
}

std::string emit_plot_data(const json& report, PlotKind kind, const std::string& estimate) {
    auto f = [](const json& v) { return v.is_null() ? std::string() : format_double(v.get<double>()); };
    std::string out;
    if (kind == PlotKind::RegimeAtlas) {
        if (!report.contains("cells")) throw ConfigError("RegimeAtlas needs a sweep report");
        out = "p,q,N,predicted_regime,observed_regime,fit_exponent,fit_r2,T_e,agree\n";
        for (const auto& c : report["cells"]) {
            const auto& o = c["observed"];
            const bool ext = o["regime"] == "Extinction";
            const json& fit = o["regime"] == "Exponential" ? o["linf_exp"] : o["linf_power"];
            out += f(c["config"]["params"]["p"]) + "," + f(c["config"]["params"]["q"]) + "," +
                   std::to_string(c["config"]["params"]["N"].get<int>()) + "," +
                   c["prediction"]["regime"].get<std::string>() + "," + o["regime"].get<std::string>() + "," +
                   (fit.is_null() || ext ? "" : f(fit["value"])) + "," + (fit.is_null() || ext ? "" : f(fit["r2"])) +
                   "," + f(o["T_e"]) + "," + (c["agree"].get<bool>() ? "1" : "0") + "\n";
        }
        return out;
    }
    if (!report.contains("series") || report["series"].is_null()) throw ConfigError("report is missing the ledger series");
    const auto& S = report["series"];
    const std::size_t n = S["t"].size();
    switch (kind) {
        case PlotKind::DecayLogLog:
            out = "t,l1,linf,log_t,log_linf\n";
            for (std::size_t i = 0; i < n; ++i) {
                const double t = S["t"][i].get<double>();
                if (!(t > 0.0)) continue;
                out += f(S["t"][i]) + "," + f(S["l1"][i]) + "," + f(S["linf"][i]) + "," + format_double(std::log(t)) +
                       "," + format_double(std::log(S["linf"][i].get<double>())) + "\n";
            }
            break;
        case PlotKind::MassLedger: {
            out = "t,l1,absorption_cum,boundary_cum,residual\n";
            const double m0 = n ? S["l1"][0].get<double>() : 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double l1 = S["l1"][i].get<double>();
                const double absorbed = S["absorption_cum"][i].get<double>();
                const double boundary = S["boundary_cum"][i].get<double>();
                const double res = m0 > 0.0 ? std::abs(l1 + absorbed - m0 - boundary) / m0 : 0.0;
                out += f(S["t"][i]) + "," + format_double(l1) + "," + format_double(absorbed) + "," +
                       format_double(boundary) + "," + format_double(res) + "\n";
            }
            break;
        }
        case PlotKind::EstimateRatio: {
            const json* chosen = nullptr;
            for (const auto& e : report["estimates"]) {
                if (estimate.empty() || e["id"] == estimate) {
                    chosen = &e;
                    break;
                }
            }
            if (!chosen) throw ConfigError("report has no matching estimate");
            out = "t,lhs_max,rhs,ratio\n";
            for (std::size_t i = 0; i < (*chosen)["t"].size(); ++i) {
                out += f((*chosen)["t"][i]) + "," + f((*chosen)["lhs"][i]) + "," + f((*chosen)["rhs"][i]) + "," +
                       f((*chosen)["ratio"][i]) + "\n";
            }
            break;
        }
        case PlotKind::ProfileEvolution: {
            const auto& P = report["profiles"];
            if (P.is_null()) throw ConfigError("report has no profiles");
            out = "t";
            for (const auto& x : P["x"]) out += ",x=" + f(x);
            out += "\n";
            for (std::size_t i = 0; i < P["t"].size(); ++i) {
                out += f(P["t"][i]);
                for (const auto& v : P["u"][i]) out += "," + f(v);
                out += "\n";
            }
            break;
        }
        default:
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

constexpr const char* kMagic = "PLAPSNAP";
constexpr int kLedgerFields = 9;

static_assert(std::endian::native == std::endian::little, "snapshot block is written little-endian");

std::uint32_t crc_of(const std::string& bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

}  // namespace

void save_snapshot(const Trajectory& traj, const json& config_echo, const std::string& path) {
    if (!traj.grid) throw SnapshotError(SnapshotError::Kind::Format, "trajectory has no grid");
    std::vector<double> block;
    for (const auto& s : traj.snapshots) block.push_back(s.t);
    for (const auto& s : traj.snapshots) block.insert(block.end(), s.values.begin(), s.values.end());
    for (const auto& r : traj.ledger) {
        block.insert(block.end(), {r.t, r.dt, r.l1, r.linf, r.grad_max, r.absorption_increment, r.boundary_flux,
                                   r.outer_excess, 0.0});
    }
    std::string bytes(block.size() * sizeof(double), '\0');
    if (!block.empty()) std::memcpy(bytes.data(), block.data(), bytes.size());
    const auto& g = *traj.grid;
    json header = {{"format", "plap-snapshot"},
                   {"version", kSnapshotVersion},
                   {"params", {{"p", traj.params.p}, {"q", traj.params.q}, {"N", traj.params.N}}},
                   {"grid", {{"geometry", g.geometry() == Geometry::Line ? "line" : "radial"},
                             {"L", g.L()},
                             {"M", g.M()},
                             {"N", g.N()}}},
                   {"floor", traj.floor},
                   {"u0_inf", traj.u0_inf},
                   {"rejected_steps", traj.rejected_steps},
                   {"completed", traj.completed},
                   {"node_count", g.size()},
                   {"snapshot_count", traj.snapshots.size()},
                   {"ledger_count", traj.ledger.size()},
                   {"ledger_fields", kLedgerFields},
                   {"block_bytes", bytes.size()},
                   {"crc32", crc_of(bytes)},
                   {"config", config_echo}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SnapshotError(SnapshotError::Kind::Io, "cannot open " + path + " for writing");
    out << kMagic << '\n' << header.dump() << '\n';
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw SnapshotError(SnapshotError::Kind::Io, "write failed for " + path);
}

LoadedSnapshot load_snapshot(const std::string& path, const Grid* expected_grid) {
    using K = SnapshotError::Kind;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError(K::Io, "cannot open " + path);
    std::string magic, header_line;
    std::getline(in, magic);
    if (magic != kMagic) throw SnapshotError(K::Format, "not a snapshot file");
    std::getline(in, header_line);
    json h;
    try {
        h = json::parse(header_line);
    } catch (const json::exception& e) {
        throw SnapshotError(K::Format, std::string("bad snapshot header: ") + e.what());
    }
    if (h.value("version", -1) != kSnapshotVersion) {
        throw SnapshotError(K::Version, "unsupported snapshot version " + h.value("version", json(-1)).dump());
    }
    const std::size_t n = h.at("node_count"), ns = h.at("snapshot_count"), nl = h.at("ledger_count");
    const std::size_t bytes_declared = h.at("block_bytes");
    if (h.at("ledger_fields").get<int>() != kLedgerFields ||
        bytes_declared != (ns + ns * n + nl * kLedgerFields) * sizeof(double)) {
        throw SnapshotError(K::Length, "snapshot header sizes are inconsistent");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != bytes_declared || crc_of(bytes) != h.at("crc32").get<std::uint32_t>()) {
        throw SnapshotError(K::Checksum, bytes.size() != bytes_declared ? "checksum mismatch: block truncated or padded"
                                                                       : "checksum mismatch");
    }
    const auto& gj = h.at("grid");
    const Geometry geom = gj.at("geometry") == "line" ? Geometry::Line : Geometry::Radial;
    auto grid = make_grid(geom, gj.at("L"), gj.at("M"), gj.at("N"));
    if (grid->size() != n) throw SnapshotError(K::Length, "node count does not match the grid");
    if (expected_grid && !(*expected_grid == *grid)) {
        throw SnapshotError(K::Shape, "snapshot grid differs from the expected grid");
    }
    std::vector<double> block(bytes.size() / sizeof(double));
    if (!block.empty()) std::memcpy(block.data(), bytes.data(), bytes.size());

    LoadedSnapshot out;
    auto& T = out.trajectory;
    T.grid = grid;
    T.params = {h["params"]["p"], h["params"]["q"], h["params"]["N"]};
    T.floor = h.at("floor");
    T.u0_inf = h.at("u0_inf");
    T.rejected_steps = h.at("rejected_steps");
    T.completed = h.at("completed");
    out.config = h.at("config");
    if (!out.config.is_null()) {
        try {
            const auto cfg = parse_config(out.config);
            T.config = cfg.solver;
        } catch (const ConfigError&) {
        }
    }
    std::size_t pos = 0;
    T.snapshots.resize(ns);
    for (std::size_t i = 0; i < ns; ++i) T.snapshots[i].t = block[pos++];
    for (std::size_t i = 0; i < ns; ++i) {
        T.snapshots[i].values.assign(block.begin() + pos, block.begin() + pos + n);
        pos += n;
    }
    T.ledger.resize(nl);
    for (auto& r : T.ledger) {
        r.t = block[pos];
        r.dt = block[pos + 1];
        r.l1 = block[pos + 2];
        r.linf = block[pos + 3];
        r.grad_max = block[pos + 4];
        r.absorption_increment = block[pos + 5];
        r.boundary_flux = block[pos + 6];
        r.outer_excess = block[pos + 7];
        pos += kLedgerFields;
    }
    return out;
}

}  // namespace plap
