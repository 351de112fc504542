#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plap/harness.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace plap;
namespace fs = std::filesystem;

namespace {

json load_json(const std::string& rel) {
    std::ifstream in(std::string(PLAP_SOURCE_DIR) + "/" + rel);
    REQUIRE(in.good());
    return json::parse(in);
}

json small_config() {
    return json::parse(R"({
        "name": "small",
        "params": {"p": 1.5, "q": 1.2, "N": 1},
        "grid": {"geometry": "line", "L": 4, "M": 40},
        "datum": {"kind": "bump", "amplitude": 1, "width": 1},
        "solver": {"t_end": 0.5, "scheme": "explicit", "observer_stride": 50,
                   "dt_policy": {"kind": "cfl", "safety": 0.5}},
        "analysis": {"mass_balance_times": [0.25, 0.5],
                     "estimates": [{"id": "GradEst1", "window": [0.1, 0.5]}, {"id": "GradEst5", "window": [0.1, 0.5]}]}
    })");
}

fs::path temp_file(const std::string& stem) {
    return fs::temp_directory_path() / ("plap_test_" + stem + "_" + std::to_string(::getpid()) + ".snap");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

template <class F>
SnapshotError::Kind snapshot_error_kind(F&& f) {
    try {
        f();
    } catch (const SnapshotError& e) {
        return e.kind();
    }
    FAIL("expected SnapshotError");
    return SnapshotError::Kind::Io;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("classify-only config yields the prediction block alone") {
    auto cfg = parse_config(json::parse(R"({"params": {"p": 1.5, "q": 1.2, "N": 1}, "simulate": false})"));
    const auto rep = run_experiment(cfg);
    const auto j = report_to_json(rep);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"config", "prediction"});
    CHECK(j["prediction"]["regime"] == "PositivityDiffusionDecay");
    CHECK(rep.trajectory.ledger.empty());
}

TEST_CASE("diffusion-decay run recovers the sup-norm exponent -1") {
    const auto rep = run_experiment(parse_config(load_json("configs/diffusion_decay.json")));
    REQUIRE_FALSE(rep.error);
    CHECK(rep.observed.regime == Regime::PositivityDiffusionDecay);
    REQUIRE(rep.observed.linf_power);
    CHECK(std::abs(rep.observed.linf_power->value + 1.0) <= 0.15);
    CHECK(rep.passed());
}

TEST_CASE("config validation fails fast and names the field") {
    auto bad = small_config();
    bad["params"]["q"] = 0;
    try {
        parse_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("q") != std::string::npos);
    }
    auto unknown = small_config();
    unknown["solver"]["tolerance"] = 1;
    try {
        parse_config(unknown);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("tolerance") != std::string::npos);
    }
    auto geom = small_config();
    geom["params"]["N"] = 2;
    CHECK_THROWS_AS(parse_config(geom), ConfigError);
    auto scheme = small_config();
    scheme["solver"]["scheme"] = "rk4";
    CHECK_THROWS_AS(parse_config(scheme), ConfigError);
    auto stencil = small_config();
    stencil["solver"]["stencil"] = "central";
    CHECK_THROWS_AS(parse_config(stencil), ConfigError);
    auto eps = small_config();
    eps["solver"]["eps"] = 0.7;
    CHECK_THROWS_AS(parse_config(eps), ConfigError);
    auto est = small_config();
    est["analysis"]["estimates"][0]["id"] = "GradEst99";
    CHECK_THROWS_AS(parse_config(est), ConfigError);
}

TEST_CASE("config echo is complete and a fixed point") {
    const auto echo = config_to_json(parse_config(small_config()));
    CHECK(echo["solver"].contains("eps"));
    CHECK(echo["solver"].contains("gamma"));
    CHECK(echo["solver"]["stencil"] == "face_average");
    const auto again = config_to_json(parse_config(echo));
    CHECK(again.dump() == echo.dump());
}

TEST_CASE("every requested check appears exactly once") {
    auto j = small_config();
    j["analysis"]["check_rate"] = true;
    const auto rep = run_experiment(parse_config(j));
    std::map<std::string, int> count;
    for (const auto& c : rep.checks) ++count[c.name + (c.detail.contains("t") ? "@" + c.detail["t"].dump() : "")];
    CHECK(count["regime"] == 1);
    CHECK(count["linf_rate"] == 1);
    CHECK(count["mass_balance@0.25"] == 1);
    CHECK(count["mass_balance@0.5"] == 1);
    CHECK(count["estimate:GradEst1"] == 1);
    CHECK(count["estimate:GradEst5"] == 1);
    CHECK(rep.checks.size() == 6);
    // GradEst5 is not stated for these parameters: reported, not dropped
    for (const auto& c : rep.checks) {
        if (c.name == "estimate:GradEst5") {
            CHECK_FALSE(c.passed);
            CHECK(c.detail.contains("error"));
        }
        if (c.name == "estimate:GradEst1") CHECK_FALSE(c.informational);
    }
    CHECK_FALSE(rep.error);
}

TEST_CASE("solver aborts are recorded with the partial trajectory") {
    auto j = small_config();
    j["solver"]["dt_policy"] = {{"kind", "fixed"}, {"dt", 1000.0}};
    j["solver"]["max_retries"] = 1;
    const auto rep = run_experiment(parse_config(j));
    REQUIRE(rep.error);
    CHECK(rep.error->find("rejected") != std::string::npos);
    CHECK_FALSE(rep.passed());
    const auto js = report_to_json(rep);
    CHECK(js["passed"] == false);
    CHECK(js["series"]["t"].size() == 1);
}

TEST_CASE("determinism: rerunning a config gives a byte-identical report") {
    const auto a = report_to_json(run_experiment(parse_config(small_config()))).dump();
    const auto b = report_to_json(run_experiment(parse_config(small_config()))).dump();
    CHECK(a == b);
}

TEST_CASE("resolve_q anchors") {
    CHECK(resolve_q(json(0.9), 1.5, 1) == 0.9);
    CHECK(resolve_q(json::parse(R"({"anchor": "p/2"})"), 1.5, 1) == doctest::Approx(0.75));
    CHECK(resolve_q(json::parse(R"({"anchor": "q_star", "scale": 1.2})"), 1.5, 1) == doctest::Approx(1.2));
    CHECK(resolve_q(json::parse(R"({"anchor": "mid"})"), 1.5, 1) == doctest::Approx(0.875));
    CHECK(resolve_q(json::parse(R"({"anchor": "q_1"})"), 1.5, 2) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(resolve_q(json::parse(R"({"anchor": "q_2"})"), 1.5, 1), ConfigError);
}

TEST_CASE("near_threshold") {
    CHECK(near_threshold({1.5, 0.755, 1}));   // 0.7% above p/2
    CHECK(near_threshold({1.5, 0.99, 1}));    // 1% below q*
    CHECK_FALSE(near_threshold({1.5, 0.75, 1}));  // exactly on p/2
    CHECK_FALSE(near_threshold({1.5, 0.9, 1}));
    CHECK(near_threshold({1.34, 1.0, 2}));    // p within 2% of p_c = 4/3
}

TEST_CASE("1x1 sweep equals run_experiment") {
    auto base = load_json("configs/diffusion_decay.json");
    base.erase("params");
    base.erase("name");
    base["solver"]["t_end"] = 10;
    base["analysis"]["fit_window"] = {1, 10};
    base["analysis"]["mass_balance_times"] = {10};
    SweepSpec spec = parse_sweep({{"base", base}, {"p", {1.5}}, {"q", {1.2}}, {"N", 1}});
    const auto sweep = run_sweep(spec);
    REQUIRE(sweep.cells.size() == 1);
    auto single = base;
    single["params"] = {{"p", 1.5}, {"q", 1.2}, {"N", 1}};
    single["name"] = sweep.cells[0].config.name;
    const auto direct = run_experiment(parse_config(single));
    CHECK(report_to_json(direct).dump() == report_to_json(sweep.cells[0]).dump());
    const auto sj = sweep_to_json(sweep);
    const auto dj = report_to_json(direct);
    for (const char* key : {"config", "prediction", "observed", "near_threshold", "error"}) {
        CHECK(sj["cells"][0][key].dump() == dj[key].dump());
    }
}

TEST_CASE("subcritical row: extinction for every q, independent of worker count") {
    auto spec = parse_sweep(load_json("configs/subcritical.json"));
    spec.workers = 1;
    const auto one = run_sweep(spec);
    spec.workers = 4;
    const auto four = run_sweep(spec);
    REQUIRE(one.cells.size() == 4);
    for (const auto& c : one.cells) {
        CHECK_FALSE(c.error);
        CHECK(c.observed.regime == Regime::Extinction);
        CHECK(c.observed.extinction.has_value());
    }
    CHECK(one.agreeing == 4);
    CHECK(atlas_csv(one) == atlas_csv(four));
    CHECK(sweep_to_json(one).dump() == sweep_to_json(four).dump());
    // rows are sorted by (p, q)
    for (std::size_t i = 1; i < one.cells.size(); ++i) {
        CHECK(one.cells[i - 1].config.params.q < one.cells[i].config.params.q);
    }
    const std::string csv = atlas_csv(one);
    CHECK(csv.substr(0, csv.find('\n')) == "p,q,N,predicted_regime,observed_regime,fit_exponent,fit_r2,T_e,agree");
}

TEST_CASE("face-averaged absorption undershoots the floor where the upwind stencil does not") {
    auto j = load_json("configs/subcritical.json")["base"];
    j["params"] = {{"p", 1.25}, {"q", 0.3}, {"N", 2}};
    j["solver"]["stencil"] = "face_average";
    const auto fa = run_experiment(parse_config(j));
    REQUIRE(fa.error);
    CHECK(fa.error->find("rejected") != std::string::npos);
    j["solver"]["stencil"] = "upwind";
    const auto up = run_experiment(parse_config(j));
    CHECK_FALSE(up.error);
    CHECK(up.observed.regime == Regime::Extinction);
}

TEST_CASE("snapshot round trip is bit-exact") {
    const auto cfg = parse_config(small_config());
    const auto rep = run_experiment(cfg);
    const auto& T = rep.trajectory;
    REQUIRE(T.snapshots.size() > 2);
    const auto path = temp_file("rt");
    save_snapshot(T, config_to_json(cfg), path.string());
    const auto L = load_snapshot(path.string(), T.grid.get());
    const auto& R = L.trajectory;
    CHECK(*R.grid == *T.grid);
    CHECK(same_bits(R.floor, T.floor));
    CHECK(same_bits(R.u0_inf, T.u0_inf));
    CHECK(R.completed == T.completed);
    CHECK(R.rejected_steps == T.rejected_steps);
    CHECK(R.params.p == T.params.p);
    CHECK(L.config.dump() == config_to_json(cfg).dump());
    REQUIRE(R.snapshots.size() == T.snapshots.size());
    for (std::size_t s = 0; s < T.snapshots.size(); ++s) {
        CHECK(same_bits(R.snapshots[s].t, T.snapshots[s].t));
        CHECK(std::memcmp(R.snapshots[s].values.data(), T.snapshots[s].values.data(),
                          T.snapshots[s].values.size() * sizeof(double)) == 0);
    }
    REQUIRE(R.ledger.size() == T.ledger.size());
    for (std::size_t i = 0; i < T.ledger.size(); ++i) {
        CHECK(std::memcmp(&R.ledger[i], &T.ledger[i], sizeof(LedgerRecord)) == 0);
    }
    // a resaved load is the same file
    const auto path2 = temp_file("rt2");
    save_snapshot(R, L.config, path2.string());
    CHECK(slurp(path) == slurp(path2));
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("snapshot integrity errors") {
    const auto cfg = parse_config(small_config());
    const auto T = run_experiment(cfg).trajectory;
    const auto path = temp_file("bad");
    save_snapshot(T, config_to_json(cfg), path.string());
    const std::string good = slurp(path);

    spit(path, good.substr(0, good.size() - 16));
    CHECK(snapshot_error_kind([&] { load_snapshot(path.string()); }) == SnapshotError::Kind::Checksum);

    std::string flipped = good;
    flipped[flipped.size() - 3] ^= 0x01;
    spit(path, flipped);
    CHECK(snapshot_error_kind([&] { load_snapshot(path.string()); }) == SnapshotError::Kind::Checksum);

    std::string version = good;
    const auto vpos = version.find("\"version\":1");
    REQUIRE(vpos != std::string::npos);
    version.replace(vpos, 11, "\"version\":7");
    spit(path, version);
    CHECK(snapshot_error_kind([&] { load_snapshot(path.string()); }) == SnapshotError::Kind::Version);

    std::string length = good;
    const auto lpos = length.find("\"ledger_count\":");
    REQUIRE(lpos != std::string::npos);
    length.insert(lpos + 15, "1");
    spit(path, length);
    CHECK(snapshot_error_kind([&] { load_snapshot(path.string()); }) == SnapshotError::Kind::Length);

    spit(path, "PLAPSNAQ\n{}\n");
    CHECK(snapshot_error_kind([&] { load_snapshot(path.string()); }) == SnapshotError::Kind::Format);

    spit(path, good);
    const Grid other(Geometry::Line, 4.0, 80);
    CHECK(snapshot_error_kind([&] { load_snapshot(path.string(), &other); }) == SnapshotError::Kind::Shape);
    CHECK_NOTHROW(load_snapshot(path.string(), T.grid.get()));
    fs::remove(path);
    CHECK(snapshot_error_kind([&] { load_snapshot(path.string()); }) == SnapshotError::Kind::Io);
}

TEST_CASE("plot data headers and contents") {
    const auto cfg = parse_config(small_config());
    const auto rep = run_experiment(cfg);
    const auto j = report_to_json(rep);
    auto header = [](const std::string& csv) { return csv.substr(0, csv.find('\n')); };
    auto rows = [](const std::string& csv) {
        std::vector<std::string> out;
        std::istringstream in(csv);
        for (std::string line; std::getline(in, line);) out.push_back(line);
        return out;
    };
    const auto decay = emit_plot_data(j, PlotKind::DecayLogLog);
    CHECK(header(decay) == "t,l1,linf,log_t,log_linf");
    CHECK(rows(decay).size() == j["series"]["t"].size());  // the t = 0 row is dropped, the header added

    const auto mass = emit_plot_data(j, PlotKind::MassLedger);
    CHECK(header(mass) == "t,l1,absorption_cum,boundary_cum,residual");
    const auto last = rows(mass).back();
    const double residual = std::stod(last.substr(last.rfind(',') + 1));
    CHECK(residual == doctest::Approx(mass_balance_residual(rep.trajectory, 0.5)).epsilon(1e-9));

    const auto ratio = emit_plot_data(j, PlotKind::EstimateRatio, "GradEst1");
    CHECK(header(ratio) == "t,lhs_max,rhs,ratio");
    CHECK(rows(ratio).size() > 2);
    CHECK_THROWS_AS(emit_plot_data(j, PlotKind::EstimateRatio, "GradEst7"), ConfigError);

    const auto prof = emit_plot_data(j, PlotKind::ProfileEvolution);
    CHECK(header(prof).rfind("t,x=", 0) == 0);

    CHECK(plot_kind_from_string("MassLedger") == PlotKind::MassLedger);
    CHECK_THROWS_AS(plot_kind_from_string("Histogram"), ConfigError);
}

TEST_CASE("plot data names the missing series") {
    const auto j = report_to_json(run_experiment(
        parse_config(json::parse(R"({"params": {"p": 1.5, "q": 1.2, "N": 1}, "simulate": false})"))));
    try {
        emit_plot_data(j, PlotKind::DecayLogLog);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("series") != std::string::npos);
    }
    CHECK_THROWS_AS(emit_plot_data(j, PlotKind::RegimeAtlas), ConfigError);
}

TEST_CASE("series thinning keeps cumulative columns exact") {
    auto j = small_config();
    j["analysis"]["report_series_max"] = 10;
    const auto rep = run_experiment(parse_config(j));
    const auto js = report_to_json(rep);
    const auto& S = js["series"];
    CHECK(S["t"].size() == 10);
    CHECK(S["t"].back().get<double>() == rep.trajectory.t_final());
    double total = 0.0;
    for (std::size_t i = 1; i < rep.trajectory.ledger.size(); ++i) total += rep.trajectory.ledger[i].absorption_increment;
    CHECK(S["absorption_cum"].back().get<double>() == total);
}

TEST_CASE("format_double is the shortest round trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e-300) == "1e-300");
    for (double v : {1.0 / 3.0, 2.0 / 7.0, 123456.789e-12}) CHECK(std::stod(format_double(v)) == v);
}
