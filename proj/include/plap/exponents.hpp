#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace plap {

/// Raised when a parameter lies outside the admissible domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Threshold comparisons (q against q*, p/2, N/(N+1); p against p_c) use this.
inline constexpr double kThresholdTol = 1e-12;

struct Params {
    double p = 1.5;
    double q = 1.0;
    int N = 1;

    /// Throws DomainError unless 1 < p < 2, q > 0, N >= 1.
    void validate() const;
};

struct CriticalExponents {
    double p_c = 0;
    double p_sc = 0;
    double q_star = 0;
    double k = 0;
    double q_1 = 0;
    std::optional<double> xi;     // absent when q(N+1) - N <= 0
    std::optional<double> eta;    // absent when N(p-2) + p <= 0
    std::optional<double> theta;  // present only for q < q*
};

CriticalExponents critical_exponents(const Params& params);

enum class Regime {
    Extinction,
    Exponential,
    PositivityFastAlgebraic,
    PositivityDiffusionDecay,
};

/// Which of the four long-time cases applies when no tail assumption is made.
enum class BaseCase { I, II, III, IV };

/// Case III fires on two distinct parameter lines; record which.
enum class ExponentialBranch { None, SupercriticalCriticalQ, CriticalP };

struct RatePrediction {
    Regime regime = Regime::Extinction;
    BaseCase base_case = BaseCase::IV;
    ExponentialBranch exponential_branch = ExponentialBranch::None;
    bool exponential_decay = false;
    std::optional<double> linf_exponent;
    std::optional<double> l1_exponent;
    bool l1_limit_positive = false;
    bool positivity = false;
    bool fast_decay_data_required = false;
};

/// Predicted long-time behaviour. With `fast_decay` the datum is assumed to
/// satisfy the algebraic tail bound that unlocks the sharper classification.
RatePrediction classify(const Params& params, bool fast_decay);

struct SigmaConstants {
    double alpha = 0;
    double beta = 0;
    double A0 = 0;
};

/// Exponent and minimal amplitude of the stationary supersolution A r^{-alpha}.
/// Requires q in (p-1, q*). When beta <= 0 every amplitude works and A0 = 0.
SigmaConstants sigma_constants(const Params& params);

std::string to_string(Regime r);
std::string to_string(BaseCase c);
std::string to_string(ExponentialBranch b);
Regime regime_from_string(const std::string& s);

}  // namespace plap
