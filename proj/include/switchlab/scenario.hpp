#pragma once

#include "switchlab/config.hpp"
#include "switchlab/density.hpp"
#include "switchlab/pdmp.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace switchlab {

enum class Experiment {
    SpectralRadius,
    ExpansionRates,
    OrbitFloquet,
    InvariantDensity,
    ThresholdSweep,
    FastSwitchingSweep,
    BlowupAffine,
    GammaSupport,
    NeumannCheck,
    TelegraphOracle,
};

std::string to_string(Experiment e);
const std::vector<std::string>& experiment_names();

enum class Status { Pass, Inconclusive, Fail, Info };
std::string to_string(Status s);
/// 0 pass, 2 inconclusive, 1 failure.
int exit_code(Status s);

struct Metric {
    std::string key;
    double value = 0.0;
    std::string diagnostic;  // window, resolution, sample size or interval
};

struct VerdictEntry {
    std::string name;
    Status status = Status::Info;
    std::string detail;
};

struct RunReport {
    std::string scenario;
    std::string experiment;
    std::string config_hash;
    std::uint64_t seed = 0;
    double wall_time = 0.0;
    double budget = 0.0;  // seconds, 0 when undeclared
    std::vector<Metric> metrics;
    std::vector<VerdictEntry> verdicts;
    std::vector<std::string> files;  // relative to the output directory
    std::filesystem::path out_dir;

    /// Fail if any verdict failed, else Inconclusive if any was, else Pass.
    Status status() const;
    const Metric* metric(const std::string& key) const;
    const VerdictEntry* verdict(const std::string& name) const;
    /// Same key = value grammar as scenario files.
    void write(std::ostream& os) const;
};

struct RunContext {
    /// Output root; the run writes into root / <scenario output name>.
    std::filesystem::path out_root = "out";
    int threads = 0;
    std::optional<std::uint64_t> seed;
    bool write_files = true;
};

/// Output root from SWITCHLAB_OUT, else "out".
std::filesystem::path default_out_root();

// Builders shared by the runners. Each reads only its own keys.
Space build_space(const Config& cfg, const std::string& prefix = "space");
FieldSpec build_field(const Config& cfg, const std::string& prefix, int dim);
std::vector<FieldSpec> build_modes(const Config& cfg, int dim);
Eigen::MatrixXd build_rates(const Config& cfg, int modes);
Characteristics build_characteristics(const Config& cfg);
MapHandle build_map(const Config& cfg);

/// Runs one scenario. Unknown keys raise ConfigError before any work starts.
RunReport run_scenario(Config cfg, const RunContext& ctx = {});
RunReport run_file(const std::filesystem::path& file, const RunContext& ctx = {});

/// One sub-run per value (seed derived from the master seed and the value's
/// index), plus sweep.csv with columns value,metric,estimate,verdict. A
/// sweep experiment whose own sweep.param is `param` runs once over the
/// given values instead.
RunReport sweep_scenario(Config cfg, const std::string& param, const std::vector<double>& values,
                         const RunContext& ctx = {});

struct ScenarioInfo {
    std::string id;
    std::string experiment;
    std::string description;
    double budget = 0.0;
    std::filesystem::path file;
};

/// Every *.cfg file in dir, sorted by id.
std::vector<ScenarioInfo> list_scenarios(const std::filesystem::path& dir);

}  // namespace switchlab
