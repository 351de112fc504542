#include "plap/harness.hpp"
#include "plap/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

using plap::json;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw plap::ConfigError("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw plap::ConfigError(path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw plap::ConfigError("cannot write " + path);
    out << text;
}

json prediction_block(const plap::Params& P, bool fast) {
    const auto e = plap::critical_exponents(P);
    const auto r = plap::classify(P, fast);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"params", {{"p", P.p}, {"q", P.q}, {"N", P.N}}},
            {"fast_decay", fast},
            {"exponents",
             {{"p_c", e.p_c}, {"p_sc", e.p_sc}, {"q_star", e.q_star}, {"k", e.k}, {"q_1", e.q_1},
              {"xi", opt(e.xi)}, {"eta", opt(e.eta)}, {"theta", opt(e.theta)}}},
            {"regime", plap::to_string(r.regime)},
            {"base_case", plap::to_string(r.base_case)},
            {"exponential_branch", plap::to_string(r.exponential_branch)},
            {"exponential_decay", r.exponential_decay},
            {"linf_exponent", opt(r.linf_exponent)},
            {"l1_exponent", opt(r.l1_exponent)},
            {"l1_limit_positive", r.l1_limit_positive},
            {"positivity", r.positivity},
            {"fast_decay_data_required", r.fast_decay_data_required}};
}

json check_json(const plap::CheckReport& c) {
    json m = json::object();
    for (const auto& [k, v] : c.metrics) m[k] = v;
    return {{"id", c.id}, {"passed", c.passed}, {"metrics", m}, {"note", c.note}};
}

plap::Series read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw plap::ConfigError("cannot read " + path);
    plap::Series s;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double t = 0, y = 0;
        if (!(ls >> t >> y)) {
            if (s.t.empty()) continue;  // header row
            throw plap::ConfigError("malformed row in " + path + ": " + line);
        }
        s.t.push_back(t);
        s.y.push_back(y);
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and verification toolkit for fast diffusion with gradient absorption"};
    app.require_subcommand(1);
    std::string out_path;

    // classify
    plap::Params P;
    bool fast = false;
    auto* classify = app.add_subcommand("classify", "Critical exponents and predicted regime");
    classify->add_option("--p", P.p)->required();
    classify->add_option("--q", P.q)->required();
    classify->add_option("--n", P.N)->default_val(1);
    classify->add_flag("--fast-decay", fast, "Assume the algebraic tail bound on the datum");

    // simulate
    std::string config_path, snapshot_path;
    auto* simulate = app.add_subcommand("simulate", "Run one experiment and print its JSON report");
    simulate->add_option("--config", config_path)->required();
    simulate->add_option("--out", out_path, "Report path (default stdout)");
    simulate->add_option("--snapshot", snapshot_path, "Also write a binary snapshot");

    // sweep
    std::string csv_path;
    int min_agree = -1;
    auto* sweep = app.add_subcommand("sweep", "Run a (p, q) sweep and emit the regime atlas");
    sweep->add_option("--config", config_path)->required();
    sweep->add_option("--out", out_path, "JSON report path (default: none)");
    sweep->add_option("--csv", csv_path, "Atlas CSV path (default stdout)");
    sweep->add_option("--min-agree", min_agree, "Agreeing cells required (default: all counted)");

    // fit
    std::string input, kind, window;
    auto* fit = app.add_subcommand("fit", "Fit a power or exponential decay to a two-column CSV");
    fit->add_option("--input", input)->required();
    fit->add_option("--kind", kind)->required()->check(CLI::IsMember({"power", "exp"}));
    fit->add_option("--window", window, "t_lo,t_hi")->required();

    // verify-bernstein
    std::string choice = "all";
    double u0 = 1.0;
    int samples = 32;
    auto* bern = app.add_subcommand("verify-bernstein", "Certify the R1/R2 identities of a change of unknown");
    bern->add_option("--choice", choice, "Choice id or 'all'");
    bern->add_option("--p", P.p)->required();
    bern->add_option("--q", P.q)->required();
    bern->add_option("--n", P.N)->default_val(1);
    bern->add_option("--u0", u0, "sup of the datum")->default_val(1.0);
    bern->add_option("--samples", samples)->default_val(32);

    // verify-supersolution
    std::string which;
    double A = 0.0, constant = 0.0;
    std::vector<double> radii{0.1, 1.0, 10.0};
    auto* super = app.add_subcommand("verify-supersolution", "Check a barrier function");
    super->add_option("--which", which, "Time barrier id, 'stationary' or 'static-pc'")->required();
    super->add_option("--p", P.p)->required();
    super->add_option("--q", P.q)->required();
    super->add_option("--n", P.N)->default_val(1);
    super->add_option("--u0", u0)->default_val(1.0);
    super->add_option("--A", A, "Amplitude for stationary/static-pc (default: A0, or 1)");
    super->add_option("--constant", constant, "Barrier constant where one exists");
    super->add_option("--radii", radii)->delimiter(',');

    // plot-data
    std::string report_path, plot_kind, estimate;
    auto* plot = app.add_subcommand("plot-data", "Emit CSV plot data from a saved report");
    plot->add_option("--report", report_path)->required();
    plot->add_option("--kind", plot_kind, "DecayLogLog, MassLedger, ProfileEvolution, EstimateRatio, RegimeAtlas")
        ->required();
    plot->add_option("--estimate", estimate, "Estimate id for EstimateRatio");
    plot->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*classify) {
            P.validate();
            std::cout << prediction_block(P, fast).dump(2) << "\n";
            return kOk;
        }
        if (*simulate) {
            const auto cfg = plap::parse_config(read_json(config_path));
            const auto rep = plap::run_experiment(cfg);
            write_text(out_path, plap::report_to_json(rep).dump(2) + "\n");
            if (!snapshot_path.empty() && cfg.simulate) {
                plap::save_snapshot(rep.trajectory, plap::config_to_json(cfg), snapshot_path);
            }
            if (rep.error) std::cerr << "solver: " << *rep.error << "\n";
            return rep.passed() ? kOk : kCheckFailed;
        }
        if (*sweep) {
            const auto spec = plap::parse_sweep(read_json(config_path));
            const auto res = plap::run_sweep(spec);
            write_text(csv_path, plap::atlas_csv(res));
            if (!out_path.empty()) write_text(out_path, plap::sweep_to_json(res).dump(2) + "\n");
            std::cerr << "agree " << res.agreeing << "/" << res.counted << " (near-threshold cells excluded)\n";
            const int need = min_agree >= 0 ? min_agree : res.counted;
            return res.agreeing >= need ? kOk : kCheckFailed;
        }
        if (*fit) {
            const auto comma = window.find(',');
            if (comma == std::string::npos) throw plap::ConfigError("--window expects t_lo,t_hi");
            const double lo = std::stod(window.substr(0, comma));
            const double hi = std::stod(window.substr(comma + 1));
            const auto s = read_series(input);
            const auto f = kind == "power" ? plap::fit_power_decay(s, lo, hi) : plap::fit_exp_decay(s, lo, hi);
            std::cout << json{{"kind", kind},
                              {"value", f.value},
                              {"intercept", f.intercept},
                              {"r2", f.r2},
                              {"window", {f.t_lo, f.t_hi}},
                              {"points", f.points}}
                             .dump(2)
                      << "\n";
            return kOk;
        }
        if (*bern) {
            P.validate();
            std::vector<plap::RhoId> ids;
            if (choice == "all") {
                for (int i = 0; i <= static_cast<int>(plap::RhoId::HamiltonPower); ++i) {
                    const plap::RhoChoice c{static_cast<plap::RhoId>(i), P, u0};
                    try {
                        c.validate();
                        ids.push_back(c.id);
                    } catch (const plap::DomainError&) {
                    }
                }
            } else {
                ids.push_back(plap::rho_from_string(choice));
            }
            json reports = json::array();
            bool ok = true;
            for (auto id : ids) {
                const auto r = plap::certify_identity({id, P, u0}, samples);
                ok = ok && r.passed;
                reports.push_back({{"id", plap::to_string(id)},
                                   {"passed", r.passed},
                                   {"max_residual", r.max_residual},
                                   {"max_fd_discrepancy", r.max_fd_discrepancy},
                                   {"samples", r.samples.size()}});
            }
            std::cout << json{{"params", {{"p", P.p}, {"q", P.q}, {"N", P.N}}}, {"u0_inf", u0}, {"reports", reports}}
                             .dump(2)
                      << "\n";
            return ok ? kOk : kCheckFailed;
        }
        if (*super) {
            P.validate();
            plap::CheckReport r;
            if (which == "stationary") {
                const double amp = A > 0.0 ? A : plap::sigma_constants(P).A0;
                r = plap::check_stationary_supersolution(amp, P, radii);
            } else if (which == "static-pc") {
                r = plap::check_static_barrier_pc(P, A > 0.0 ? A : 1.0, radii);
            } else {
                plap::TimeBarrierOptions opt;
                opt.constant = constant;
                r = plap::check_time_supersolution(plap::time_barrier_from_string(which), P, u0, opt);
            }
            std::cout << check_json(r).dump(2) << "\n";
            return r.passed ? kOk : kCheckFailed;
        }
        if (*plot) {
            const auto rep = read_json(report_path);
            write_text(out_path, plap::emit_plot_data(rep, plap::plot_kind_from_string(plot_kind), estimate));
            return kOk;
        }
    } catch (const plap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const plap::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kUsage;
    } catch (const plap::SnapshotError& e) {
        std::cerr << "snapshot error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
