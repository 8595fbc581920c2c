#include "lrising/experiments.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace lrising;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("lrising_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::string& args, const std::string& env = "") {
    std::string cmd = env + (env.empty() ? "" : " ") + LRISING_CLI_PATH + std::string(" ") + args + " 2>/dev/null";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kHamiltonian = R"({"experiment": "verify-hamiltonian",
  "model": {"d": 2, "alpha": 3.0, "beta": 1.0, "M": 8.0},
  "window": {"lo": [0, 0], "hi": [3, 3]},
  "params": {"samples": 20, "random_window": {"lo": [0, 0], "hi": [4, 4]}}})";

}  // namespace

TEST(Config, DefaultsAreMaterialized) {
    RunConfig c = parse_config(R"({"experiment": "decay", "window": {"lo": [0, 0], "hi": [5, 2]}})");
    json j = config_json(c);
    EXPECT_EQ(j["params"]["x0"], json({0, 1}));
    EXPECT_EQ(j["params"]["max_dist"], 5);
    EXPECT_EQ(j["model"]["alpha"], 3.0);
    EXPECT_DOUBLE_EQ(j["model"]["a"].get<double>(), 9.0);
    EXPECT_EQ(j["guards"]["oracle"], kOracleGuardDefault);
    RunConfig h = parse_config(kHamiltonian);
    EXPECT_EQ(config_json(h)["params"]["tolerance"], 1e-9);
    EXPECT_EQ(config_json(h)["params"]["random_window"]["hi"], json({4, 4}));
}

TEST(Config, Diagnostics) {
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("{\"experiment\": \"decay\",\n \"model\": {\"beta\": }}").find("line 2"), std::string::npos);
    EXPECT_NE(message(R"({"experiment": "decay", "model": {"bta": 1}})").find("model.bta"), std::string::npos);
    EXPECT_NE(message(R"({"experiment": "decay", "model": {"beta": "hot"}})").find("model.beta"), std::string::npos);
    EXPECT_NE(message(R"({"experiment": "decay", "model": {"alpha": 1.5}})").find("alpha"), std::string::npos);
    EXPECT_NE(message(R"({"experiment": "decay", "guards": {"oracle": 29}})").find("guards.oracle"), std::string::npos);
    EXPECT_NE(message(R"({"experiment": "decay", "params": {"slope": 1}})").find("params.slope"), std::string::npos);
    EXPECT_NE(message(R"({"experiment": "anneal"})").find("anneal"), std::string::npos);
    EXPECT_NE(message(R"({"schema_version": 7, "experiment": "decay"})").find("schema_version"), std::string::npos);
    EXPECT_NE(message(R"({"experiment": "decay", "window": {"lo": [0, 0, 0]}})").find("window.lo"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    fs::path dir = scratch("exit");
    EXPECT_EQ(cli("--config " + write(dir, "bad.json", "{ not json").string() + " --out " + dir.string()), kExitConfig);
    EXPECT_EQ(cli("--config " + (dir / "missing.json").string()), kExitConfig);
    EXPECT_EQ(cli("--threads x"), kExitConfig);
    auto big = write(dir, "big.json",
                     R"({"experiment": "decay", "model": {"beta": 1.0}, "window": {"lo": [0, 0], "hi": [13, 1]}})");
    EXPECT_EQ(cli("--config " + big.string() + " --out " + dir.string()), kExitGuard);
    auto bad_env = write(dir, "ok.json", R"({"experiment": "entropy-scan", "params": {"n_max": 5}})");
    EXPECT_EQ(cli("--config " + bad_env.string() + " --out " + dir.string(), "LRISING_THREADS=many"), kExitConfig);
    EXPECT_EQ(cli("--config " + bad_env.string() + " --out " + dir.string()), kExitOk);
}

TEST(Cli, DecayAtInfiniteTemperatureIsDegenerate) {
    fs::path dir = scratch("decay0");
    auto cfg = write(dir, "c.json",
                     R"({"experiment": "decay", "model": {"beta": 0.0}, "window": {"lo": [0, 0], "hi": [6, 1]}})");
    ASSERT_EQ(cli("--config " + cfg.string() + " --out " + dir.string()), kExitOk);
    json r = json::parse(slurp(dir / "decay.json"));
    EXPECT_TRUE(r["results"]["degenerate"].get<bool>());
    EXPECT_TRUE(r["results"]["fitted_slope"].is_null());
    EXPECT_TRUE(fs::exists(dir / "decay.csv"));
}

TEST(Cli, ReportsAreDeterministic) {
    fs::path dir = scratch("det");
    auto cfg = write(dir, "h.json", kHamiltonian);
    ASSERT_EQ(cli("--config " + cfg.string() + " --out " + (dir / "a").string()), kExitOk);
    ASSERT_EQ(cli("--config " + cfg.string() + " --out " + (dir / "b").string()), kExitOk);
    ASSERT_EQ(cli("--config " + cfg.string() + " --out " + (dir / "c").string() + " --threads 3"), kExitOk);
    ASSERT_EQ(cli("--config " + cfg.string() + " --out " + (dir / "d").string(), "LRISING_THREADS=2"), kExitOk);
    std::string ref = slurp(dir / "a" / "verify-hamiltonian.json");
    for (const char* sub : {"b", "c", "d"}) EXPECT_EQ(slurp(dir / sub / "verify-hamiltonian.json"), ref) << sub;

    json r = json::parse(ref);
    for (const char* key : {"model", "guards", "seed", "code_version", "schema_version", "params"})
        EXPECT_TRUE(r.contains(key)) << key;
    EXPECT_EQ(r["results"]["exhaustive"]["configurations"], 65536);
    EXPECT_LE(r["results"]["exhaustive"]["max_relative_residual"].get<double>(), 1e-9);
    json info = json::parse(slurp(dir / "d" / "verify-hamiltonian.run.json"));
    EXPECT_EQ(info["threads"], 2);
    EXPECT_GE(info["wall_time_s"].get<double>(), 0.0);
}

TEST(Cli, FailureArtifactReplays) {
    fs::path dir = scratch("replay");
    // tolerance 0 turns rounding residuals into a violation
    auto cfg = write(dir, "h.json", R"({"experiment": "verify-hamiltonian", "window": {"lo": [0, 0], "hi": [3, 3]},
        "params": {"samples": 0, "peierls": false, "tolerance": 0.0}})");
    ASSERT_EQ(cli("--config " + cfg.string() + " --out " + dir.string()), kExitInvariant);
    fs::path art = dir / "verify-hamiltonian.failure.json";
    ASSERT_TRUE(fs::exists(art));
    EXPECT_EQ(json::parse(slurp(art))["kind"], "hamiltonian-residual");
    EXPECT_EQ(cli("replay " + art.string() + " --out " + (dir / "r1").string()), kExitInvariant);
    EXPECT_EQ(cli("replay " + art.string() + " --out " + (dir / "r2").string(), "LRISING_THREADS=4"), kExitInvariant);
    json r1 = json::parse(slurp(dir / "r1" / "replay.json")), r2 = json::parse(slurp(dir / "r2" / "replay.json"));
    EXPECT_TRUE(r1["matches_artifact"].get<bool>());
    EXPECT_EQ(r1["residual"], r2["residual"]);
}

TEST(Replay, ErasureCostInstance) {
    RunConfig c = parse_config(kHamiltonian);
    Region window = box_region(make_site({0, 0}), make_site({3, 3}));
    Region minus(std::vector<Site>{make_site({1, 1}), make_site({1, 2})});
    json art = instance_json(c, "erasure-cost", erasure_instance(window, minus, 0, c.model));
    json r = replay_artifact(art);
    EXPECT_TRUE(r["pass"].get<bool>());
    EXPECT_TRUE(r["matches_artifact"].get<bool>());
    EXPECT_EQ(r["c2"], 1.0 / 160);
    EXPECT_EQ(r["delta_h"], art["instance"]["delta_h"]);

    json broken = art;
    broken["schema_version"] = 99;
    EXPECT_THROW(replay_artifact(broken), ConfigError);
    broken = art;
    broken["kind"] = "mystery";
    EXPECT_THROW(replay_artifact(broken), ConfigError);
}

TEST(Replay, PassingEdgeErasingInstance) {
    RunConfig c = parse_config(R"({"experiment": "lemma-bounds"})");
    json art = instance_json(c, "edge-erasing", {{"A", {{0, 0}}}, {"B", {{5, 0}}}, {"C", {{10, 0}}}});
    json r = replay_artifact(art);
    EXPECT_TRUE(r["pass"].get<bool>());
    EXPECT_EQ(r["diam_B"], 1.0);
}
