#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "afmpc/fuzzy.hpp"
#include "afmpc/harness.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(AFMPC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("afmpc_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& text = {}) const {
        const fs::path p = path / name;
        if (!text.empty()) std::ofstream(p) << text;
        return p.string();
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("exit codes") {
    TempDir dir;
    const std::string shortrun = dir.file("short.cfg", "sim.duration = 0.2\nlog.wall_clock = false\n");

    CHECK(run("--print-defaults") == 0);
    CHECK(run("run --config " + shortrun + " --controller classical --out " + dir.file("a.csv")) == 0);

    CHECK(run("run --config " + dir.file("bad.cfg", "mpc.kc = 9\n") + " --out " + dir.file("b.csv")) == 1);
    CHECK(run("run --config " + dir.file("missing.cfg") + " --out " + dir.file("b.csv")) == 1);
    CHECK(run("run --config " + shortrun + " --controller pid --out " + dir.file("b.csv")) == 1);
    CHECK(run("bogus") == 1);

    const std::string blowup =
        dir.file("blowup.cfg", "sim.duration = 1\nfuzzy.gain = 1e6\nfuzzy.parameter_bound = 10\n");
    CHECK(run("run --config " + blowup + " --controller afmpc --out " + dir.file("c.csv")) == 2);
    CHECK(fs::exists(dir.path / "c.csv"));

    CHECK(run("run --config " + shortrun + " --out /nonexistent/dir/out.csv") == 3);
}

TEST_CASE("printed defaults are a valid config") {
    TempDir dir;
    const std::string path = dir.file("defaults.cfg");
    const std::string cmd = std::string(AFMPC_CLI_PATH) + " --print-defaults > " + path;
    REQUIRE(std::system(cmd.c_str()) == 0);
    const auto config = afmpc::harness::load_config(path);
    CHECK(config.mpc.prediction_horizon == 5);
}

TEST_CASE("compare writes both logs and a report") {
    TempDir dir;
    const std::string cfg = dir.file("short.cfg", "sim.duration = 0.3\nlog.wall_clock = false\n");
    const fs::path out = dir.path / "cmp";
    REQUIRE(run("compare --config " + cfg + " --out-dir " + out.string()) == 0);
    for (const char* name : {"classical.csv", "afmpc.csv", "report.txt"}) CHECK(fs::exists(out / name));

    std::ifstream in(out / "afmpc.csv");
    const auto log = afmpc::harness::read_csv(in);
    CHECK(log.records.size() == 30);
    CHECK(slurp((out / "report.txt").string()).find("steady-state error ratio") != std::string::npos);
}

TEST_CASE("same seed, same bytes") {
    TempDir dir;
    const std::string cfg = dir.file(
        "noise.cfg",
        "sim.duration = 0.3\nlog.wall_clock = false\ndisturbance.kind = noise\n"
        "disturbance.amplitude = 0.05\ndisturbance.frequency = 4\n");
    const std::string a = dir.file("a.csv"), b = dir.file("b.csv"), c = dir.file("c.csv");
    REQUIRE(run("run --config " + cfg + " --controller afmpc --seed 5 --out " + a) == 0);
    REQUIRE(run("run --config " + cfg + " --controller afmpc --seed 5 --out " + b) == 0);
    REQUIRE(run("run --config " + cfg + " --controller afmpc --seed 6 --out " + c) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));
}

TEST_CASE("snapshot export") {
    TempDir dir;
    const std::string cfg = dir.file("short.cfg", "sim.duration = 0.1\n");
    const std::string snap = dir.file("model.txt");
    REQUIRE(run("run --config " + cfg + " --controller afmpc --out " + dir.file("a.csv") + " --snapshot " + snap) == 0);
    std::ifstream in(snap);
    const auto model = afmpc::fuzzy::read_snapshot(in);
    CHECK(model.rule_count() == 81);
}
