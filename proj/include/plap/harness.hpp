#pragma once

#include "plap/functionals.hpp"
#include "plap/solver.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace plap {

using json = nlohmann::ordered_json;

/// Raised for malformed or inconsistent configuration input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EstimateRequest {
    EstimateId id = EstimateId::GradEst1;
    std::optional<double> delta;  // empty: the solver floor
    double t_lo = 0;
    double t_hi = 0;
};

struct AnalysisConfig {
    std::optional<std::pair<double, double>> fit_window;  // default: last decade of the active run
    std::optional<double> ext_tol;                        // default: 1e-4 * sup u0
    double boundary_fraction = 0.01;
    double l1_plateau_exponent = -0.2;
    double collapse_factor = 1.5;
    double rate_tolerance = 0.15;
    bool check_rate = false;
    bool check_regime = true;
    std::vector<double> mass_balance_times;
    double mass_balance_tol = 1e-2;
    std::vector<EstimateRequest> estimates;
    double estimate_ratio_tol = 1.1;
    int report_snapshots = 24;
    int report_series_max = 2000;  // ledger rows kept in the report
};

struct ExperimentConfig {
    std::string name = "run";
    Params params;
    bool simulate = true;  // false: classification only
    bool fast_decay = true;
    Geometry geometry = Geometry::Line;
    double L = 10.0;
    int M = 400;
    InitialDatum datum = Bump{};
    SolverConfig solver;
    bool eps_default = true;
    bool gamma_default = true;
    AnalysisConfig analysis;
};

/// Parses and resolves defaults. Unknown keys are rejected.
ExperimentConfig parse_config(const json& j);
/// Fully resolved configuration, suitable as an echo block.
json config_to_json(const ExperimentConfig& c);

struct ObservedRegime {
    Regime regime = Regime::PositivityDiffusionDecay;
    std::optional<ExtinctionTime> extinction;
    std::optional<double> threshold_crossing;  // first time sup(u - floor) < ext_tol for good
    double active_end = 0;
    std::optional<double> boundary_flag_time;
    std::optional<FitResult> linf_power;
    std::optional<FitResult> linf_exp;
    std::optional<FitResult> l1_power;
    double collapse_ratio = 0;  // late over early log-decay rate before the crossing
};

/// Regime read off a trajectory:
///  1. extinction if sup(u - floor) drops below ext_tol for good and the
///     logarithmic decay rate accelerates into the crossing;
///  2. exponential if log sup(u - floor) is fitted better against t than against log t;
///  3. otherwise diffusion decay if the l1 exponent exceeds the plateau threshold,
///     fast algebraic decay if not.
ObservedRegime observe_regime(const Trajectory& traj, const AnalysisConfig& a);

/// True when q sits within `rel` (relative) of p/2, q* or N/(N+1), or p within
/// `rel` of p_c, without lying on that threshold.
bool near_threshold(const Params& params, double rel = 0.02);

struct CheckResult {
    std::string name;
    bool passed = false;
    bool informational = false;
    json detail;
};

struct RunReport {
    ExperimentConfig config;
    RatePrediction prediction;
    ObservedRegime observed;
    bool agree = false;
    bool near_threshold = false;
    std::vector<CheckResult> checks;
    std::vector<EstimateCheck> estimates;
    Trajectory trajectory;
    std::optional<std::string> error;
    double wall_time = 0;  // not serialized

    bool passed() const;
};

RunReport run_experiment(const ExperimentConfig& config);

/// Deterministic JSON; includes ledger series and a thinned set of profiles.
json report_to_json(const RunReport& r);

struct SweepSpec {
    json base;  // experiment config without params
    std::vector<double> p_values;
    std::vector<json> q_values;  // number or {"anchor": "p/2"|"q_star"|"q_1"|"mid", "scale": s}
    int N = 1;
    int workers = 0;  // 0: hardware concurrency
};

SweepSpec parse_sweep(const json& j);
double resolve_q(const json& q, double p, int N);

struct SweepResult {
    std::vector<RunReport> cells;  // sorted by (p, q)
    int agreeing = 0;
    int counted = 0;  // excludes near-threshold cells
};

SweepResult run_sweep(const SweepSpec& spec);
std::string atlas_csv(const SweepResult& s);
json sweep_to_json(const SweepResult& s);

enum class PlotKind { DecayLogLog, MassLedger, RegimeAtlas, EstimateRatio, ProfileEvolution };
PlotKind plot_kind_from_string(const std::string& s);
/// CSV with a header row. `report` is a run report or a sweep report.
std::string emit_plot_data(const json& report, PlotKind kind, const std::string& estimate = "");

/// Raised by snapshot I/O; `kind` tells which integrity check failed.
class SnapshotError : public std::runtime_error {
public:
    enum class Kind { Io, Format, Version, Length, Checksum, Shape };
    SnapshotError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr int kSnapshotVersion = 1;

void save_snapshot(const Trajectory& traj, const json& config_echo, const std::string& path);

struct LoadedSnapshot {
    Trajectory trajectory;
    json config;
};

LoadedSnapshot load_snapshot(const std::string& path, const Grid* expected_grid = nullptr);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace plap
