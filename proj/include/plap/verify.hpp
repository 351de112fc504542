#pragma once

#include "plap/exponents.hpp"

#include <map>
#include <string>
#include <vector>

namespace plap {

enum class RhoId {
    PowerSupercritHighQ,
    PowerSupercritLowQ,
    LogCritical,
    LogCriticalExt,
    ImplicitSubcrit,
    HamiltonSqrt,
    HamiltonPower,
};

std::string to_string(RhoId id);
RhoId rho_from_string(const std::string& s);

/// A change of unknown u = phi(v) written through rho = 1/phi'(phi^{-1}(u)).
struct RhoChoice {
    RhoId id = RhoId::PowerSupercritHighQ;
    Params params;
    double u0_inf = 1.0;  // sup of the datum; fixes M = e*u0_inf, K0 and the sqrt cap

    /// Throws DomainError when the choice is not defined for the parameters.
    void validate() const;
    /// Interval of u on which the choice is sampled.
    std::pair<double, double> sample_range() const;
};

enum class DerivMode { Closed, FiniteDifference };

struct RhoValues {
    double rho = 0, d1 = 0, d2 = 0;
};

RhoValues eval_rho(const RhoChoice& c, double u, DerivMode mode);

struct R1R2 {
    double R1 = 0;
    double R2 = 0;
};

/// R1 = |rho|^{p-2}(k rho'^2 - rho rho''), R2 = |rho|^{q-2} rho rho'.
R1R2 eval_R1_R2(const RhoChoice& c, double u, DerivMode mode);

/// The values R1 and R2 are asserted to take for this choice.
R1R2 target_R1_R2(const RhoChoice& c, double u);

struct IdentityReport {
    RhoId id = RhoId::PowerSupercritHighQ;
    std::vector<double> samples;
    std::vector<double> residual;       // closed form against the target, relative
    std::vector<double> fd_discrepancy;  // finite difference against closed form, relative
    double max_residual = 0;
    double max_fd_discrepancy = 0;
    bool passed = false;
};

inline constexpr double kIdentityTol = 1e-6;
inline constexpr double kFdTol = 1e-4;

IdentityReport certify_identity(const RhoChoice& c, int n_samples = 32);

/// Profile solving k rho'^2 - rho rho'' = rho^{2-p}, rho(0) = 0, rho'(U) = 0,
/// normalized so that rho(U) = K0. Requires p < p_c.
class SubcriticalRho {
public:
    SubcriticalRho(const Params& params, double u0_inf);

    double operator()(double r) const;
    double derivative(double r) const;  // from the first integral
    double K0() const { return K0_; }
    double kappa() const { return kappa_; }
    double k() const { return k_; }
    /// sup over samples of rho(r) / (K0^{(2-p-2k)/(2(1-k))} r^{1/(1-k)}).
    double bound_constant(int n_samples = 64) const;

private:
    double integral(double y) const;  // int_0^y z^{-k}(1-z^s)^{-1/2} dz
    double p_, k_, s_, U_, K0_, kappa_, I1_, scale_;
};

struct CheckReport {
    std::string id;
    bool passed = false;
    std::map<std::string, double> metrics;
    std::string note;
};

enum class TimeBarrier {
    PowerHighQ,
    PowerHighQCompensated,
    PowerLowQ,
    LogCritical,
    LogCriticalCompensated,
    LogCriticalExt,
    HamiltonSqrt,
    HamiltonPower,
};

std::string to_string(TimeBarrier b);
TimeBarrier time_barrier_from_string(const std::string& s);

struct TimeBarrierOptions {
    double t_min = 1e-3;
    double t_max = 1e3;
    int samples = 241;
    /// Amplitude constant where the barrier has one (PowerLowQ: C, HamiltonSqrt: K).
    /// Non-positive selects the default.
    double constant = 0.0;
};

/// Evaluates the reduced operator W' + ... on a log grid in t. Exact
/// cancellations must hold to 1e-12 relative; inequalities need margin >= 0.
CheckReport check_time_supersolution(TimeBarrier b, const Params& params, double u0_inf,
                                     const TimeBarrierOptions& opt = {});

/// Smallest C (PowerLowQ) or K (HamiltonSqrt) with non-negative margin, by bisection.
double minimal_barrier_constant(TimeBarrier b, const Params& params, double u0_inf,
                                const TimeBarrierOptions& opt = {});

/// Closed-form threshold for C in the low-q power barrier.
double power_low_q_constant_threshold(const Params& params);

/// E(r) for A r^{-alpha}, alpha = (p-q)/(q-p+1).
double stationary_residual(double A, const Params& params, double r);

CheckReport check_stationary_supersolution(double A, const Params& params, const std::vector<double>& radii);

/// C0 r^{-N} at p = p_c, N >= 2.
CheckReport check_static_barrier_pc(const Params& params, double C0, const std::vector<double>& radii);

}  // namespace plap
