#pragma once

#include "plap/exponents.hpp"
#include "plap/grid.hpp"

#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace plap {

/// Regularization: eps smooths both nonlinearities, eps^gamma lifts the datum.
struct RegEps {
    double eps = 0.0;
    double gamma = 0.0;

    /// Validates 0 < eps < 1/2 and 0 < gamma < gamma_bound(params).
    static RegEps make(double eps, double gamma, const Params& params);
    /// eps = max(1e-3, sqrt(h)) clipped below 1/2, gamma = 0.9 * gamma_bound.
    static RegEps defaults(const Params& params, const Grid& grid);

    double floor() const;
};

/// min{p/4, q/2, p-1, 1-k}.
double gamma_bound(const Params& params);

struct FixedDt {
    double dt = 1e-4;
};
struct CflAdaptive {
    double safety = 0.5;
};
/// dt = fraction * max(u - floor) / max|du/dt|, kept within [explicit limit, dt_max].
struct ChangeLimited {
    double fraction = 0.02;
    double dt_max = 1.0;
};
using DtPolicy = std::variant<FixedDt, CflAdaptive, ChangeLimited>;

enum class Scheme {
    ExplicitEuler,
    /// Linearly implicit: diffusion coefficients and the absorption slope frozen
    /// at the old state, one tridiagonal solve per step.
    SemiImplicit,
};

/// Gradient fed to b_eps. FaceAverage is second order but can push a node
/// sitting at the floor below it; Upwind keeps the discrete minimum principle.
enum class AbsorptionStencil { FaceAverage, Upwind };

struct SolverConfig {
    RegEps reg;
    double t_end = 1.0;
    DtPolicy dt_policy = CflAdaptive{};
    Scheme scheme = Scheme::ExplicitEuler;
    int observer_stride = 0;  // 0: keep only the first and last snapshot
    bool absorption = true;
    AbsorptionStencil stencil = AbsorptionStencil::FaceAverage;
    int max_retries = 40;
    long max_steps = 200'000'000;
    /// Stop once max(u - floor) falls below this value (0 disables).
    double stop_below_excess = 0.0;
};

struct Bump {
    double amplitude = 1.0;
    double width = 1.0;
};
/// C0 * (core^2 + |x|^2)^{-alpha/2}, bounded by C0 |x|^{-alpha}.
struct PowerTail {
    double C0 = 1.0;
    double alpha = 2.0;
    double core_radius = 1.0;
};
struct Custom {
    std::vector<double> values;
};
using InitialDatum = std::variant<Bump, PowerTail, Custom>;

std::vector<double> sample_datum(const InitialDatum& datum, const Grid& grid);

/// Samples the datum and adds eps^gamma. Rejects negative or non-finite data.
Field lift_initial(const InitialDatum& datum, const GridPtr& grid, const RegEps& reg);

double stable_dt(const Grid& grid, double p, double eps, double safety);

struct LedgerRecord {
    double t = 0;
    double dt = 0;
    double l1 = 0;    // integral of u - floor
    double linf = 0;  // max of u - floor
    double grad_max = 0;
    double absorption_increment = 0;  // trapezoid-in-time integral of b_eps(|grad u|^2) over the step
    double boundary_flux = 0;
    double outer_excess = 0;  // u - floor at the outer boundary node
};

struct Snapshot {
    double t = 0;
    std::vector<double> values;
};

struct Trajectory {
    Params params;
    SolverConfig config;
    GridPtr grid;
    double floor = 0;
    double u0_inf = 0;  // sup of the unlifted datum
    std::vector<Snapshot> snapshots;
    std::vector<LedgerRecord> ledger;
    long rejected_steps = 0;
    bool completed = false;

    double t_final() const { return ledger.empty() ? 0.0 : ledger.back().t; }
};

/// Thrown when a step cannot be accepted after the retry budget.
class StepAborted : public std::runtime_error {
public:
    StepAborted(const std::string& what, Trajectory partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const Trajectory& partial() const { return partial_; }

private:
    Trajectory partial_;
};

using Observer = std::function<void(double t, const Field& u)>;

/// Integrates the regularized problem from the lifted datum `u0` to t_end.
Trajectory run(const Params& params, const SolverConfig& config, const Field& u0,
               const Observer& observer = {});

/// One step of the chosen scheme, exposed for testing. Returns false if the
/// step left the comparison box or produced non-finite values.
bool step(const Params& params, const SolverConfig& config, double u0_inf, const Field& u, double dt,
          Field& out);

}  // namespace plap
