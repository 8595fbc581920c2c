#include "lrising/experiments.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace lrising;

namespace {

bool verbose = false;

void log(const std::string& msg) {
    if (verbose) std::cerr << "[lrising] " << msg << "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_run_info(const fs::path& dir, const std::string& stem, double wall, int threads, int code) {
    json info = {{"schema_version", kSchemaVersion},
                 {"code_version", kCodeVersion},
                 {"report", stem + ".json"},
                 {"wall_time_s", wall},
                 {"threads", threads},
                 {"exit_code", code}};
    write_file(dir / (stem + ".run.json"), dump(info));
}

int run(const std::string& config_path, const fs::path& out, int threads_flag) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = parse_config(read_file(config_path));
    const int threads = resolve_threads(threads_flag);
    fs::create_directories(out);
    const std::string stem = cfg.experiment;
    log("experiment " + stem + " on " + std::to_string(threads) + " thread(s)");

    int code = kExitOk;
    Outcome o;
    try {
        o = run_experiment(cfg, threads);
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        o.failure = instance_json(cfg, "run", {{"message", e.what()}});
        add_check(o, "library_invariant", false, {{"message", e.what()}});
    }
    json report = make_report(cfg, o);
    write_file(out / (stem + ".json"), dump(report));
    if (!o.csv.empty()) write_file(out / (stem + ".csv"), o.csv);
    if (!o.pass()) {
        code = kExitInvariant;
        json art = o.failure ? *o.failure : instance_json(cfg, "run", json::object());
        write_file(out / (stem + ".failure.json"), dump(art));
        for (const json& c : o.checks)
            if (!c.at("pass").get<bool>()) std::cerr << "failed check: " << c.at("name").get<std::string>() << "\n";
        std::cerr << "failing instance written to " << (out / (stem + ".failure.json")).string() << "\n";
    }
    for (const json& c : o.checks) log(c.dump());
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_info(out, stem, wall, threads, code);
    log("wall time " + std::to_string(wall) + " s");
    return code;
}

int replay(const std::string& artifact, const fs::path& out, int threads_flag) {
    const auto t0 = std::chrono::steady_clock::now();
    json art;
    try {
        art = json::parse(read_file(artifact));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed artifact: ") + e.what());
    }
    const int threads = resolve_threads(threads_flag);
    json r = replay_artifact(art);
    r["schema_version"] = kSchemaVersion;
    r["code_version"] = kCodeVersion;
    r["artifact"] = art;
    fs::create_directories(out);
    write_file(out / "replay.json", dump(r));
    const int code = r.at("pass").get<bool>() ? kExitOk : kExitInvariant;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_info(out, "replay", wall, threads, code);
    log(std::string("replay ") + (code ? "fails" : "passes"));
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Long-range Ising contour and cluster-expansion experiments"};
    std::string config, artifact;
    std::string out = "out";
    int threads = 1;
    app.add_option("--config", config, "JSON run configuration");
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--threads", threads, "worker threads, 0 for all cores; LRISING_THREADS overrides")
        ->capture_default_str();
    app.add_flag("--verbose", verbose, "progress on stderr");
    auto* rep = app.add_subcommand("replay", "re-run one failing instance from an artifact");
    rep->add_option("artifact", artifact, "failure artifact")->required();
    rep->fallthrough();
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*rep) return replay(artifact, out, threads);
        if (config.empty()) throw ConfigError("--config is required");
        return run(config, out, threads);
    } catch (const GuardExceeded& e) {
        std::cerr << "guard exceeded: " << e.what() << "\n";
        return kExitGuard;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
