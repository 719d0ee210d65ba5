#include "doctest.h"
#include "switchlab/scenario.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

using namespace switchlab;
namespace fs = std::filesystem;

namespace {

const char* kNeumann =
    "id = neumann_small\n"
    "experiment = neumann_check\n"
    "seed = 5\n"
    "sweep.sweepable = experiment.states, rates.scale\n"
    "[experiment]\n"
    "instances = 4\n"
    "states = 3\n";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path("test_scenario_out") / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

RunContext ctx_at(const fs::path& root) {
    RunContext c;
    c.out_root = root;
    return c;
}

int cli(const std::string& args) {
    const int raw = std::system((std::string(SWITCHLAB_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_CASE("status exit codes") {
    CHECK(exit_code(Status::Pass) == 0);
    CHECK(exit_code(Status::Inconclusive) == 2);
    CHECK(exit_code(Status::Fail) == 1);
}

TEST_CASE("runs write reproducible output") {
    const auto a = run_scenario(Config::parse(kNeumann), ctx_at(scratch("a")));
    const auto b = run_scenario(Config::parse(kNeumann), ctx_at(scratch("b")));
    CHECK(a.status() == Status::Pass);
    CHECK(a.seed == 5);
    REQUIRE(fs::exists(a.out_dir / "report.txt"));
    REQUIRE(fs::exists(a.out_dir / "neumann.csv"));
    CHECK(slurp(a.out_dir / "neumann.csv") == slurp(b.out_dir / "neumann.csv"));
    CHECK(a.config_hash == b.config_hash);
    CHECK(a.config_hash.size() == 40);

    const auto report = Config::load(a.out_dir / "report.txt");
    CHECK(report.str("scenario") == "neumann_small");
    CHECK(report.str("config_hash") == a.config_hash);
    CHECK(report.num("metrics.residual_max") == doctest::Approx(a.metric("residual_max")->value));
    CHECK(report.str("verdicts.residual") == "pass");

    RunContext other = ctx_at(scratch("c"));
    other.seed = 6;
    const auto c = run_scenario(Config::parse(kNeumann), other);
    CHECK(c.seed == 6);
    CHECK(c.config_hash != a.config_hash);
}

TEST_CASE("scenario errors") {
    RunContext quiet;
    quiet.write_files = false;
    CHECK_THROWS_WITH_AS(run_scenario(Config::parse(std::string(kNeumann) + "typo = 1\n", "s.cfg"), quiet),
                         doctest::Contains("s.cfg:8:1: unknown key 'experiment.typo'"), ConfigError);
    CHECK_THROWS_AS(run_scenario(Config::parse("id = x\nexperiment = warp\n"), quiet), ConfigError);
    CHECK_THROWS_AS(run_scenario(Config::parse("experiment = neumann_check\n"), quiet), ConfigError);
}

TEST_CASE("outer sweeps") {
    const auto cfg = Config::parse(kNeumann);
    CHECK_THROWS_WITH_AS(sweep_scenario(cfg, "experiment.states", {}, {}), doctest::Contains("at least one value"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(sweep_scenario(cfg, "experiment.instances", {2}, {}),
                         doctest::Contains("not a declared sweepable key"), ConfigError);
    // Declared, but nothing in this experiment reads it.
    CHECK_THROWS_WITH_AS(sweep_scenario(cfg, "rates.scale", {2}, {}), doctest::Contains("unknown key 'rates.scale'"),
                         ConfigError);

    const auto r = sweep_scenario(cfg, "experiment.states", {2, 4}, ctx_at(scratch("sweep")));
    CHECK(r.status() == Status::Pass);
    CHECK(r.verdicts.size() == 2);
    const std::string csv = slurp(r.out_dir / "sweep.csv");
    CHECK(csv.rfind("value,metric,estimate,verdict\n2,", 0) == 0);
    CHECK(fs::exists(r.out_dir / "sweep_1" / "neumann.csv"));
}

TEST_CASE("shipped scenarios list and parse") {
    const auto all = list_scenarios(SWITCHLAB_SCENARIO_DIR);
    REQUIRE(all.size() >= 11);
    std::set<std::string> ids;
    for (const auto& s : all) {
        CHECK(ids.insert(s.id).second);
        CHECK(std::count(experiment_names().begin(), experiment_names().end(), s.experiment) == 1);
        CHECK(s.budget > 0);
    }
    CHECK(std::is_sorted(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.id < b.id; }));
    CHECK_THROWS_AS(list_scenarios("no/such/dir"), ConfigError);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.cfg") << "id = bad\nexperiment = neumann_check\nthis is not a pair\n";
    std::ofstream(dir / "ok.cfg") << kNeumann;
    const std::string out = "--out-dir " + (dir / "out").string();
    CHECK(cli("--help") == 0);
    CHECK(cli("") == 1);
    CHECK(cli("run " + (dir / "bad.cfg").string()) == 1);
    CHECK(cli("run " + (dir / "missing.cfg").string()) == 1);
    CHECK(cli(out + " run " + (dir / "ok.cfg").string()) == 0);
    CHECK(cli(out + " --seed 9 run " + (dir / "ok.cfg").string()) == 0);
    CHECK(cli(out + " sweep " + (dir / "ok.cfg").string() + " --param experiment.states --values ''") == 1);
    CHECK(cli(out + " sweep " + (dir / "ok.cfg").string() + " --param experiment.states --values 2,3") == 0);
    CHECK(cli("list-scenarios") == 0);
}
