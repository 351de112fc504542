#include "plap/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace plap {

double gamma_bound(const Params& params) {
    const auto e = critical_exponents(params);
    return std::min({params.p / 4.0, params.q / 2.0, params.p - 1.0, 1.0 - e.k});
}

RegEps RegEps::make(double eps, double gamma, const Params& params) {
    if (!(eps > 0.0 && eps < 0.5)) throw DomainError("eps must lie in (0, 1/2)");
    const double bound = gamma_bound(params);
    if (!(gamma > 0.0 && gamma < bound)) {
        throw DomainError("gamma must lie in (0, " + std::to_string(bound) + ")");
    }
    return RegEps{eps, gamma};
}

RegEps RegEps::defaults(const Params& params, const Grid& grid) {
    const double eps = std::min(std::max(1e-3, std::sqrt(grid.h())), 0.49);
    return make(eps, 0.9 * gamma_bound(params), params);
}

double RegEps::floor() const { return std::pow(eps, gamma); }

std::vector<double> sample_datum(const InitialDatum& datum, const Grid& grid) {
    const auto x = grid.x();
    std::vector<double> v(x.size());
    if (const auto* b = std::get_if<Bump>(&datum)) {
        if (!(b->amplitude >= 0.0 && b->width > 0.0)) throw DomainError("bump needs amplitude >= 0, width > 0");
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = std::abs(x[i]) / b->width;
            const double c = std::cos(0.5 * std::numbers::pi * s);
            v[i] = s < 1.0 ? b->amplitude * c * c : 0.0;
        }
    } else if (const auto* t = std::get_if<PowerTail>(&datum)) {
        if (!(t->C0 >= 0.0 && t->alpha > 0.0 && t->core_radius > 0.0)) {
            throw DomainError("power tail needs C0 >= 0, alpha > 0, core_radius > 0");
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            v[i] = t->C0 * std::pow(t->core_radius * t->core_radius + x[i] * x[i], -0.5 * t->alpha);
        }
    } else {
        v = std::get<Custom>(datum).values;
        if (v.size() != x.size()) throw DomainError("custom datum has the wrong number of nodes");
    }
    for (double value : v) {
        if (!std::isfinite(value) || value < 0.0) throw DomainError("datum must be finite and non-negative");
    }
    return v;
}

Field lift_initial(const InitialDatum& datum, const GridPtr& grid, const RegEps& reg) {
    auto v = sample_datum(datum, *grid);
    const double lift = reg.floor();
    for (double& value : v) value += lift;
    return Field(grid, std::move(v));
}

double stable_dt(const Grid& grid, double p, double eps, double safety) {
    const double dim = grid.geometry() == Geometry::Line ? 1.0 : grid.N();
    return safety * grid.h() * grid.h() / (2.0 * dim * std::pow(eps, p - 2.0));
}

namespace {

struct Workspace {
    std::vector<double> d, a, g2, b, rate, lo, di, up, rhs, cp;
    std::vector<double> wl, wr;  // absorption weight of the left and right face
};

void face_data(const Field& u, const Params& params, const SolverConfig& cfg, Workspace& w) {
    const double p = params.p, eps = cfg.reg.eps;
    const std::size_t n = u.size();
    const double h = u.grid->h();
    w.d.resize(n - 1);
    w.a.resize(n - 1);
    w.g2.resize(n);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        w.d[j] = (u.values[j + 1] - u.values[j]) / h;
        w.a[j] = a_eps(w.d[j] * w.d[j], p, eps);
    }
    w.wl.assign(n, 0.0);
    w.wr.assign(n, 0.0);
    if (cfg.stencil == AbsorptionStencil::FaceAverage) {
        w.g2[0] = w.d[0] * w.d[0];
        w.g2[n - 1] = w.d[n - 2] * w.d[n - 2];
        w.wr[0] = 1.0;
        w.wl[n - 1] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            w.g2[i] = 0.5 * (w.d[i - 1] * w.d[i - 1] + w.d[i] * w.d[i]);
            w.wl[i] = w.wr[i] = 0.5;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double back = i > 0 ? w.d[i - 1] : -w.d[0];
            const double fwd = i + 1 < n ? w.d[i] : -w.d[n - 2];
            if (back >= -fwd && back > 0.0) {
                w.g2[i] = back * back;
                (i > 0 ? w.wl : w.wr)[i] = 1.0;
            } else if (-fwd > 0.0) {
                w.g2[i] = fwd * fwd;
                (i + 1 < n ? w.wr : w.wl)[i] = 1.0;
            } else {
                w.g2[i] = 0.0;
            }
        }
    }
    w.b.assign(n, 0.0);
    if (cfg.absorption) {
        // b_eps with eps^q hoisted; the direct difference is safe once xi > eps^2
        const double q = params.q, e2 = eps * eps, eq = std::pow(eps, q);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = w.g2[i] / e2;
            w.b[i] = x > 1.0 ? std::pow(w.g2[i] + e2, 0.5 * q) - eq : eq * std::expm1(0.5 * q * std::log1p(x));
        }
    }
}

// du/dt of the explicit operator; expects face_data to be current.
void explicit_rate(const Field& u, const Params&, const SolverConfig&, Workspace& w) {
    const std::size_t n = u.size();
    const auto area = u.grid->face_area();
    const auto vol = u.grid->volume();
    w.rate.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double right = i + 1 < n ? area[i] * w.a[i] * w.d[i] : 0.0;
        const double left = i > 0 ? area[i - 1] * w.a[i - 1] * w.d[i - 1] : 0.0;
        double r = (right - left) / vol[i];
        r -= w.b[i];
        w.rate[i] = r;
    }
}

void thomas(Workspace& w, std::vector<double>& x) {
    const std::size_t n = w.di.size();
    w.cp.resize(n);
    x.resize(n);
    double denom = w.di[0];
    w.cp[0] = w.up[0] / denom;
    x[0] = w.rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = w.di[i] - w.lo[i] * w.cp[i - 1];
        w.cp[i] = i + 1 < n ? w.up[i] / denom : 0.0;
        x[i] = (w.rhs[i] - w.lo[i] * x[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= w.cp[i] * x[i + 1];
}

void semi_implicit(const Field& u, const Params& params, const SolverConfig& cfg, double dt, Workspace& w,
                   std::vector<double>& out) {
    const std::size_t n = u.size();
    const double h = u.grid->h();
    const auto area = u.grid->face_area();
    const auto vol = u.grid->volume();
    const double eps = cfg.reg.eps, q = params.q;
    const double beta0 = 0.5 * q * std::pow(eps, q - 2.0);
    w.lo.assign(n, 0.0);
    w.up.assign(n, 0.0);
    w.di.assign(n, 1.0);
    // Solved for the increment so that exact stationary states stay exact.
    w.rhs.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const bool has_left = i > 0, has_right = i + 1 < n;
        double beta = 0.0;
        if (cfg.absorption) beta = w.g2[i] > 0.0 ? w.b[i] / w.g2[i] : beta0;
        double lower = 0.0, upper = 0.0;
        if (has_left) {
            const double diff = dt * area[i - 1] * w.a[i - 1] / (h * vol[i]);
            const double abs = dt * beta * w.wl[i] * w.d[i - 1] / h;
            lower = -diff - abs;
            if (lower > 0.0) {  // keep the M-matrix structure; this piece goes explicit
                lower = -diff;
                w.rhs[i] -= abs * w.d[i - 1] * h;
            }
        }
        if (has_right) {
            const double diff = dt * area[i] * w.a[i] / (h * vol[i]);
            const double abs = dt * beta * w.wr[i] * w.d[i] / h;
            upper = -diff + abs;
            if (upper > 0.0) {
                upper = -diff;
                w.rhs[i] -= abs * w.d[i] * h;
            }
        }
        w.lo[i] = lower;
        w.up[i] = upper;
        w.di[i] = 1.0 - lower - upper;
        if (has_left) w.rhs[i] += lower * w.d[i - 1] * h;
        if (has_right) w.rhs[i] -= upper * w.d[i] * h;
    }
    thomas(w, out);
    for (std::size_t i = 0; i < n; ++i) out[i] += u.values[i];
}

bool in_box(const std::vector<double>& v, double floor, double u0_inf) {
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * (floor + u0_inf);
    for (double x : v) {
        if (!std::isfinite(x) || x < floor - tol || x > floor + u0_inf + tol) return false;
    }
    return true;
}

// Integral of the absorption the scheme applies.
double absorption_measure(const Field& u, const std::vector<double>& b) {
    const auto w = u.grid->weights();
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += w[i] * b[i];
    return s;
}

LedgerRecord measure(const Field& u, double floor) {
    LedgerRecord r;
    const auto w = u.grid->weights();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double e = u.values[i] - floor;
        r.l1 += w[i] * e;
        r.linf = std::max(r.linf, e);
    }
    r.outer_excess = u.values.back() - floor;
    const auto g = gradient_magnitude(u);
    r.grad_max = *std::max_element(g.begin(), g.end());
    return r;
}

bool do_step(const Params& params, const SolverConfig& cfg, double u0_inf, const Field& u, double dt,
             Workspace& w, Field& out) {
    out.grid = u.grid;
    if (cfg.scheme == Scheme::ExplicitEuler) {
        explicit_rate(u, params, cfg, w);
        out.values.resize(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) out.values[i] = u.values[i] + dt * w.rate[i];
    } else {
        semi_implicit(u, params, cfg, dt, w, out.values);
    }
    return in_box(out.values, cfg.reg.floor(), u0_inf);
}

}  // namespace

bool step(const Params& params, const SolverConfig& config, double u0_inf, const Field& u, double dt,
          Field& out) {
    Workspace w;
    face_data(u, params, config, w);
    return do_step(params, config, u0_inf, u, dt, w, out);
}

Trajectory run(const Params& params, const SolverConfig& config, const Field& u0, const Observer& observer) {
    params.validate();
    const RegEps reg = RegEps::make(config.reg.eps, config.reg.gamma, params);
    if (!(config.t_end >= 0.0) || !std::isfinite(config.t_end)) throw DomainError("t_end must be non-negative");
    if (!u0.grid) throw DomainError("initial field has no grid");
    const Grid& grid = *u0.grid;
    if (grid.geometry() == Geometry::Radial && grid.N() != params.N) {
        throw DomainError("radial grid dimension differs from N");
    }
    if (grid.geometry() == Geometry::Line && params.N != 1) throw DomainError("line geometry requires N = 1");

    Trajectory traj;
    traj.params = params;
    traj.config = config;
    traj.grid = u0.grid;
    traj.floor = reg.floor();
    double umax = 0.0;
    for (double v : u0.values) {
        if (!std::isfinite(v) || v < traj.floor - 1e-15) throw DomainError("initial field must be lifted and finite");
        umax = std::max(umax, v);
    }
    traj.u0_inf = umax - traj.floor;

    const double cfl = stable_dt(grid, params.p, reg.eps,
                                 std::holds_alternative<CflAdaptive>(config.dt_policy)
                                     ? std::get<CflAdaptive>(config.dt_policy).safety
                                     : 0.5);

    Workspace w;
    Field u = u0, next(u0.grid, 0.0);
    double t = 0.0;
    face_data(u, params, config, w);
    double abs_old = config.absorption ? absorption_measure(u, w.b) : 0.0;

    auto rec = measure(u, traj.floor);
    traj.ledger.push_back(rec);
    traj.snapshots.push_back({0.0, u.values});
    if (observer) observer(0.0, u);

    long steps = 0;
    while (t < config.t_end) {
        if (++steps > config.max_steps) throw StepAborted("step budget exhausted", std::move(traj));
        double dt = 0.0;
        if (const auto* f = std::get_if<FixedDt>(&config.dt_policy)) {
            dt = f->dt;
        } else if (std::holds_alternative<CflAdaptive>(config.dt_policy)) {
            dt = cfl;
        } else {
            const auto& c = std::get<ChangeLimited>(config.dt_policy);
            explicit_rate(u, params, config, w);
            double rmax = 0.0;
            for (double r : w.rate) rmax = std::max(rmax, std::abs(r));
            const double excess = traj.ledger.back().linf;
            dt = rmax > 0.0 ? c.fraction * excess / rmax : c.dt_max;
            dt = std::min(dt, c.dt_max);
            if (config.scheme == Scheme::ExplicitEuler) {
                dt = std::min(dt, cfl);
            } else {
                dt = std::max(dt, cfl);
            }
        }
        if (!(dt > 0.0)) throw DomainError("time step must be positive");
        // Land exactly on t_end without leaving a sliver step behind.
        if (t + dt >= config.t_end || t + 1.5 * dt > config.t_end) dt = config.t_end - t;
        if (t + dt <= t) dt = config.t_end - t;

        int tries = 0;
        while (!do_step(params, config, traj.u0_inf, u, dt, w, next)) {
            ++traj.rejected_steps;
            if (++tries > config.max_retries) {
                throw StepAborted("step rejected after " + std::to_string(tries - 1) + " retries at t=" +
                                      std::to_string(t),
                                  std::move(traj));
            }
            dt *= 0.5;
        }
        t = dt == config.t_end - t ? config.t_end : t + dt;
        std::swap(u.values, next.values);

        face_data(u, params, config, w);
        const double abs_new = config.absorption ? absorption_measure(u, w.b) : 0.0;
        rec = measure(u, traj.floor);
        rec.t = t;
        rec.dt = dt;
        rec.absorption_increment = 0.5 * dt * (abs_old + abs_new);
        rec.boundary_flux = 0.0;  // zero-flux boundaries
        abs_old = abs_new;
        traj.ledger.push_back(rec);

        const bool last = t >= config.t_end;
        const bool stop = config.stop_below_excess > 0.0 && rec.linf < config.stop_below_excess;
        if (last || stop || (config.observer_stride > 0 && steps % config.observer_stride == 0)) {
            traj.snapshots.push_back({t, u.values});
        }
        if (observer) observer(t, u);
        if (stop) break;
    }
    traj.completed = true;
    return traj;
}

}  // namespace plap
