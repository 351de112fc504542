#pragma once

#include "plap/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace plap {

struct Series {
    std::vector<double> t;
    std::vector<double> y;
};

double l1_norm(const Field& u);
double l_inf_norm(const Field& u);
/// u - floor, nodewise.
Field excess(const Field& u, double floor);

/// Column of the trajectory ledger: "l1", "linf" or "grad_max".
Series ledger_series(const Trajectory& traj, const std::string& column);

/// |l1(t) + absorbed(0,t) - l1(0) - boundary(0,t)| / l1(0), using the first
/// ledger record at or after t.
double mass_balance_residual(const Trajectory& traj, double t);

enum class FitKind { Power, Exponential };

struct FitResult {
    FitKind kind = FitKind::Power;
    /// Power: exponent a in y ~ t^a. Exponential: rate c in y ~ e^{-c t}.
    double value = 0;
    double intercept = 0;  // of log y
    double r2 = 0;
    double t_lo = 0;
    double t_hi = 0;
    std::size_t points = 0;
};

inline constexpr std::size_t kMinFitPoints = 8;

/// Least squares of log y against log t over t in [t_lo, t_hi].
FitResult fit_power_decay(const Series& s, double t_lo, double t_hi);
/// Least squares of log y against t over t in [t_lo, t_hi].
FitResult fit_exp_decay(const Series& s, double t_lo, double t_hi);

struct ExtinctionTime {
    double t_e = 0;
    double uncertainty = 0;  // spacing to the preceding sample
};

/// First time after which y stays below tol.
std::optional<ExtinctionTime> detect_extinction(const Series& linf, double tol);
/// Uses the ledger sup of u - floor; default tol is 1e-4 * sup u0.
std::optional<ExtinctionTime> detect_extinction(const Trajectory& traj, std::optional<double> tol = {});

struct ExtinctionReport {
    FitResult l1_fit;    // against T_e - t
    FitResult linf_fit;
    double l1_lower_exponent = 0;    // (N+1)(q*-q)/(p-2q)
    double linf_lower_exponent = 0;  // (p-q)/(p-2q)
    double l1_lower_constant = 0;    // inf of l1 / (T_e-t)^{l1_lower_exponent}
    double linf_lower_constant = 0;
};

/// Near-extinction behaviour over t in [(1 - window) T_e, T_e).
/// Requires p in (p_c, 2) and q in (q_1, p/2).
ExtinctionReport extinction_exponent_check(const Trajectory& traj, double t_e, double window = 0.3);

enum class EstimateId {
    GradEst1,
    GradEst2,
    GradEst3,
    GradEst4,
    GradEst5,
    GradEst6,
    GradEst7,
    GradEstEx,
    GradEstHJ,
    GradEstHJ2,
    DiffusionOnly_i,
    DiffusionOnly_ii,
    DiffusionOnly_iii,
    DiffusionOnly_iv,
    DiffusionOnly_v,
};

std::string to_string(EstimateId id);
EstimateId estimate_from_string(const std::string& s);

/// Whether the estimate is stated for these parameters and absorption setting.
bool estimate_applicable(EstimateId id, const Params& params, bool absorption);
/// Whether the right-hand side carries an explicit constant.
bool estimate_has_explicit_constant(EstimateId id);

struct EstimateCheck {
    EstimateId id = EstimateId::GradEst1;
    bool explicit_constant = false;
    double delta = 0;
    double t_lo = 0;
    double t_hi = 0;
    /// Sup of LHS/RHS over the window. For estimates without an explicit
    /// constant this is the empirical constant.
    double max_ratio = 0;
    /// max over snapshots of the per-snapshot sup divided by the min.
    double stability = 0;
    Series ratio;  // per-snapshot sup
    Series lhs;    // per-snapshot sup of the left side
    Series rhs;    // right side at the node of the sup ratio
};

/// Evaluates the estimate on every snapshot with t in [t_lo, t_hi], t > 0.
/// The lifted solution u + floor plays the role of u; `delta` is added to
/// u - floor, so delta = floor reproduces the lifted field.
EstimateCheck gradient_estimate_check(const Trajectory& traj, EstimateId id, double delta, double t_lo,
                                      double t_hi);

/// ||w||_inf / (||grad w||_inf^{N/(N+1)} ||w||_1^{1/(N+1)}).
double gn_ratio(const Field& w);

}  // namespace plap
