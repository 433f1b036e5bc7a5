#include <doctest.h>

#include "capmscm/cli.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;
namespace cli = capmscm::cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
    const fs::path dir = fs::current_path() / "cli_work" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
    }
    return files;
}

json error_of(const Result& r) { return json::parse(r.err); }

} // namespace

TEST_CASE("simulate fork writes curve, estimates and comparison") {
    const auto dir = workdir("sim_fork");
    const auto r = run({"simulate", "--preset", "fork", "--seed", "3", "--grid-points", "3", "--out", dir.string()});
    REQUIRE(r.code == cli::ok);
    const auto curve = slurp(dir / "fork_curve.csv");
    CHECK(curve.rfind("sigma_x,beta,lambda,residual_loading\n0,1,1,0\n", 0) == 0);
    const auto cmp = json::parse(slurp(dir / "fork_comparison.json"));
    CHECK(cmp.at("pass") == true);
    CHECK(cmp.at("max_abs_beta_deviation").get<double>() <= 0.02);
    CHECK(cmp.at("max_abs_loading_deviation").get<double>() <= 0.03);
    CHECK(fs::exists(dir / "fork_mc.csv"));
}

TEST_CASE("simulate chain is flat at c") {
    const auto dir = workdir("sim_chain");
    const auto r = run({"simulate", "--preset", "chain", "--seed", "4", "--grid-points", "3", "--c", "0.7",
                        "--out", dir.string()});
    REQUIRE(r.code == cli::ok);
    const auto cmp = json::parse(slurp(dir / "chain_comparison.json"));
    CHECK(cmp.at("max_abs_beta_deviation").get<double>() <= 0.02);
}

TEST_CASE("exit codes") {
    const auto dir = workdir("codes");
    auto r = run({"simulate", "--n", "0", "--out", (dir / "a").string()});
    CHECK(r.code == cli::validation);
    CHECK(error_of(r).at("error") == "invalid_argument");

    r = run({"simulate", "--bogus", "3", "--out", (dir / "b").string()});
    CHECK(r.code == cli::validation);

    r = run({"simulate", "--grid-points", "2", "--out", (dir / "no_seed").string()});
    CHECK(r.code == cli::validation);

    r = run({"frobnicate"});
    CHECK(r.code == cli::validation);

    r = run({"simulate", "--grid-points", "2", "--n", "2000", "--tolerance", "1e-9", "--seed", "1",
             "--out", (dir / "c").string()});
    CHECK(r.code == cli::tolerance);
    CHECK(fs::exists(dir / "c" / "fork_comparison.json"));

    r = run({"check-dag", "--dag", (dir / "missing.json").string(), "--out", (dir / "d").string()});
    CHECK(r.code == cli::validation);
    CHECK(error_of(r).at("error") == "io_error");
}

TEST_CASE("outputs are never silently overwritten") {
    const auto dir = workdir("overwrite");
    const std::vector<std::string> args{"simulate", "--grid-points", "2", "--n", "1000", "--tolerance", "1",
                                        "--seed", "1", "--out", dir.string()};
    REQUIRE(run(args).code == cli::ok);
    const auto before = snapshot(dir);
    const auto again = run(args);
    CHECK(again.code == cli::validation);
    CHECK(error_of(again).contains("message"));
    CHECK(snapshot(dir) == before);
    auto forced = args;
    forced.push_back("--overwrite");
    CHECK(run(forced).code == cli::ok);
}

TEST_CASE("config files and unknown keys") {
    const auto dir = workdir("config");
    write(dir / "good.json", R"({"preset": "fork", "grid_points": 2, "n": 1000, "tolerance": 1, "seed": 2, "out": "o"})");
    CHECK(run({"simulate", "--config", (dir / "good.json").string()}).code == cli::ok);
    CHECK(fs::exists(dir / "o" / "fork_curve.csv"));

    write(dir / "bad.json", R"({"preset": "fork", "windoww": 3})");
    const auto r = run({"simulate", "--config", (dir / "bad.json").string(), "--out", (dir / "p").string()});
    CHECK(r.code == cli::validation);
    CHECK(error_of(r).at("error") == "unknown_field");

    write(dir / "wrong_cmd.json", R"({"window": 100})");
    CHECK(run({"simulate", "--config", (dir / "wrong_cmd.json").string(), "--out", (dir / "q").string()}).code ==
          cli::validation);

    write(dir / "broken.json", "{\n  \"n\": ,\n}");
    const auto b = run({"simulate", "--config", (dir / "broken.json").string(), "--out", (dir / "s").string()});
    CHECK(b.code == cli::validation);
    CHECK(error_of(b).at("error") == "parse_error");
}

TEST_CASE("help lists the knobs") {
    const auto r = run({"diagnose", "--help"});
    CHECK(r.code == cli::ok);
    for (const char* flag : {"--window", "--gap", "--max-lag", "--se-kind", "--min-rows", "--threshold",
                             "--environment-scheme", "--renormalize", "--seed", "--overwrite"}) {
        CHECK(r.out.find(flag) != std::string::npos);
    }
    const auto s = run({"simulate", "--help"});
    for (const char* flag : {"--grid-min", "--grid-max", "--grid-points", "--sigma-z", "--emit-panel", "--tolerance"}) {
        CHECK(s.out.find(flag) != std::string::npos);
    }
}

TEST_CASE("check-dag verdicts") {
    const auto dir = workdir("check_dag");
    write(dir / "fork.json", R"({"nodes":[{"name":"Z","offset":0},{"name":"X","offset":1},{"name":"Y","offset":1}],
        "edges":[{"from":"Z@0","to":"X@1"},{"from":"Z@0","to":"Y@1"}]})");
    REQUIRE(run({"check-dag", "--dag", (dir / "fork.json").string(), "--out", (dir / "f").string()}).code == cli::ok);
    auto v = json::parse(slurp(dir / "f" / "verdict.json"));
    CHECK(v.at("classification").at("class") == "a_fork");
    CHECK(v.at("classification").at("beta_reading") == "proxy");
    CHECK(v.at("validation").at("ok") == true);

    write(dir / "capm.json", R"({"nodes":[{"name":"X","offset":0},{"name":"Y","offset":0}],
        "edges":[{"from":"X@0","to":"Y@0","coef":0.8}], "weights":{"Y":0.3,"B":0.7}, "target":"Y"})");
    REQUIRE(run({"check-dag", "--dag", (dir / "capm.json").string(), "--out", (dir / "c").string()}).code == cli::ok);
    v = json::parse(slurp(dir / "c" / "verdict.json"));
    CHECK(v.at("aggregator").at("status") == "contradiction");
    CHECK(v.at("aggregator").at("rationale") == "cycle_detected");

    write(dir / "loo.json", R"({"nodes":[{"name":"X","offset":0},{"name":"Y","offset":0}],
        "edges":[{"from":"X@0","to":"Y@0","coef":0.8}], "weights":{"Y":0.0,"B":0.6,"C":0.4}, "target":"Y"})");
    REQUIRE(run({"check-dag", "--dag", (dir / "loo.json").string(), "--out", (dir / "l").string()}).code == cli::ok);
    v = json::parse(slurp(dir / "l" / "verdict.json"));
    CHECK(v.at("aggregator").at("status") == "admissible");
    CHECK(v.at("aggregator").at("corollary") == "ii");

    write(dir / "bad.json", R"({"nodes":[{"name":"X","offset":0}], "colour": "red"})");
    const auto r = run({"check-dag", "--dag", (dir / "bad.json").string(), "--out", (dir / "b").string()});
    CHECK(r.code == cli::validation);
    CHECK(error_of(r).at("error") == "unknown_field");
}

TEST_CASE("diagnose on an emitted fork bundle") {
    const auto dir = workdir("diagnose");
    REQUIRE(run({"simulate", "--preset", "fork", "--grid-points", "2", "--n", "2000", "--tolerance", "1",
                 "--emit-panel", "--seed", "11", "--out", dir.string()})
                .code == cli::ok);
    const auto cfg = dir / "panel" / "diagnose.json";
    REQUIRE(fs::exists(cfg));
    const auto r = run({"diagnose", "--config", cfg.string(), "--out", (dir / "report").string()});
    REQUIRE(r.code == cli::ok);
    const auto report = json::parse(slurp(dir / "report" / "report.json"));
    const auto notes = report.at("verdict_notes");
    REQUIRE_FALSE(notes.empty());
    CHECK(notes[0].get<std::string>().rfind("pattern consistent with fork", 0) == 0);
    CHECK(report.at("sections").at("attenuation").at("status") == "ok");
    for (const char* f : {"attenuation.csv", "lag_profile.csv", "leave_one_out.csv", "residual_loadings.csv"}) {
        CHECK(fs::exists(dir / "report" / f));
    }

    // Without an events file the event sections are skipped and the run succeeds.
    fs::remove(dir / "panel" / "events.csv");
    const auto s = run({"diagnose", "--config", cfg.string(), "--out", (dir / "report2").string()});
    CHECK(s.code == cli::ok);
    const auto skipped = json::parse(slurp(dir / "report2" / "report.json"));
    CHECK(skipped.at("sections").at("attenuation").at("status") == "skipped");
    CHECK(skipped.at("sections").at("residual_loadings").at("status") == "skipped");
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
    const auto dir = workdir("determinism");
    const std::vector<std::string> base{"simulate", "--preset", "fork", "--grid-points", "4", "--n", "20000",
                                        "--tolerance", "1", "--emit-panel", "--seed", "5"};
    auto one = base, four = base;
    one.insert(one.end(), {"--threads", "1", "--out", (dir / "t1").string()});
    four.insert(four.end(), {"--threads", "4", "--out", (dir / "t4").string()});
    REQUIRE(run(one).code == cli::ok);
    REQUIRE(run(four).code == cli::ok);
    CHECK(snapshot(dir / "t1") == snapshot(dir / "t4"));

    const auto other = run({"simulate", "--preset", "fork", "--grid-points", "4", "--n", "20000", "--tolerance", "1",
                            "--seed", "6", "--out", (dir / "s6").string()});
    REQUIRE(other.code == cli::ok);
    CHECK(slurp(dir / "s6" / "fork_mc.csv") != slurp(dir / "t1" / "fork_mc.csv"));
}
