#include "switchlab/parallel.hpp"
#include "switchlab/scenario.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace switchlab;

namespace {

void print_report(const RunReport& r) {
    std::cout << r.scenario << " [" << r.experiment << "] " << to_string(r.status()) << " in "
              << r.wall_time << " s (config " << r.config_hash.substr(0, 12) << ", seed " << r.seed << ")\n";
    for (const auto& m : r.metrics) std::cout << "  " << m.key << " = " << m.value << "\n";
    for (const auto& v : r.verdicts)
        if (v.status != Status::Info) std::cout << "  [" << to_string(v.status) << "] " << v.name << ": " << v.detail << "\n";
    std::cout << "report: " << (r.out_dir / "report.txt").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Switching-system experiments: run, sweep and list scenarios"};
    app.require_subcommand(1);
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int threads = 0;
    app.add_option("--seed", seed, "Master seed (overrides the scenario's seed)");
    app.add_option("--out-dir", out_dir, "Output root (default: $SWITCHLAB_OUT or ./out)");
    app.add_option("--threads", threads, "Worker threads (0: one per hardware thread)")->check(CLI::NonNegativeNumber);

    std::string file;
    auto* run = app.add_subcommand("run", "Run one scenario file");
    run->add_option("file", file, "Scenario file")->required();

    std::string param, values;
    auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of a sweepable key");
    sweep->add_option("file", file, "Scenario file")->required();
    sweep->add_option("--param", param, "Sweepable key, e.g. rates.scale")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();

    std::string dir = SWITCHLAB_SCENARIO_DIR;
    auto* list = app.add_subcommand("list-scenarios", "List shipped scenarios");
    list->add_option("--dir", dir, "Scenario directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    RunContext ctx;
    ctx.out_root = out_dir.empty() ? default_out_root() : std::filesystem::path(out_dir);
    ctx.threads = threads;
    ctx.seed = seed;
    default_threads() = threads;

    try {
        if (*list) {
            for (const auto& s : list_scenarios(dir))
                std::cout << s.id << "  " << s.experiment << "  budget " << s.budget << " s  " << s.description << "\n";
            return 0;
        }
        const Config cfg = Config::load(file);
        const RunReport r = *run ? run_scenario(cfg, ctx) : sweep_scenario(cfg, param, parse_number_list(values, "--values"), ctx);
        print_report(r);
        return exit_code(r.status());
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
