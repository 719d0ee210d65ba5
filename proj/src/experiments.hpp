#pragma once

#include "switchlab/scenario.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace switchlab::detail {

std::string fmt(double v);
std::string join(const std::vector<double>& v);

/// Collects the files a run writes; nothing touches the disk when disabled.
class Output {
public:
    Output(std::filesystem::path dir, bool enabled);

    void file(const std::string& name, const std::string& content);
    /// Two-column series file plus an entry in the gnuplot script.
    void series(const std::string& name, const std::vector<double>& x, const std::vector<double>& y,
                const std::string& xlabel, const std::string& ylabel, bool log_y = false);
    /// Writes plot.gp when any series exists.
    void finish();

    const std::vector<std::string>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    bool enabled_;
    std::vector<std::string> files_;
    std::string script_;
};

struct ExpCtx {
    const Config& cfg;
    std::uint64_t seed;
    int threads;
    Output& out;
    RunReport& report;

    void metric(const std::string& key, double value, const std::string& diagnostic);
    void verdict(const std::string& name, Status status, const std::string& detail);
    /// Every parameter has been read: reject leftovers before computing.
    void ready() const { cfg.reject_unused(); }
};

void run_spectral_radius(ExpCtx& x);
void run_expansion_rates(ExpCtx& x);
void run_orbit_floquet(ExpCtx& x);
void run_invariant_density(ExpCtx& x);
void run_threshold_sweep(ExpCtx& x);
void run_fast_switching_sweep(ExpCtx& x);
void run_blowup_affine(ExpCtx& x);
void run_gamma_support(ExpCtx& x);
void run_neumann_check(ExpCtx& x);
void run_telegraph_oracle(ExpCtx& x);

}  // namespace switchlab::detail
