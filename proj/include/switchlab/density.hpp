#pragma once

#include "switchlab/mask.hpp"
#include "switchlab/pdmp.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace switchlab {

/// Per-mode histogram densities on a dyadic ladder of resolutions, plus the
/// same for independent replicates (e.g. Monte Carlo chains) for noise levels.
/// Densities integrate to the mode weight fraction.
struct EmpiricalDensity {
    using Levels = std::vector<std::vector<std::vector<double>>>;  // [level][mode][cell]

    Space space;
    int modes = 0;
    std::vector<int> ladder;  // bins per dimension, doubling
    Levels rho;
    std::vector<Levels> replicates;
    double samples = 0.0;  // total occupation weight
    std::string scenario;

    int levels() const { return static_cast<int>(ladder.size()); }
    int dim() const { return space.dim(); }
    double cell_width(int level, int axis) const { return space.extent(axis) / ladder[level]; }
    long cell_of(int level, const Vec& x) const;
    double mode_weight(int mode) const;
};

EmpiricalDensity estimate_density(const OccupationAccumulator& acc, const std::vector<int>& ladder,
                                  const std::vector<OccupationAccumulator>& replicates = {},
                                  std::string scenario = {});
/// Chains serve as replicates.
EmpiricalDensity estimate_density(const McResult& mc, const std::vector<int>& ladder,
                                  std::string scenario = {});

/// Axis-aligned box of cells, selected by cell centre. On a torus upper may
/// be below lower, meaning the interval wraps. Differences run along
/// diff_axis; in 2D with pool_axis >= 0 the density is first averaged over
/// the region along pool_axis (a tube along an orbit).
/// Under refinement, stencil centres stay within the span of the coarsest
/// level's centres, except towards an edge flagged as a boundary (a support
/// edge where a singularity is being probed), which they may approach.
struct Region {
    Vec lower, upper;
    int diff_axis = 0;
    int pool_axis = -1;
    bool lower_is_boundary = false;
    bool upper_is_boundary = false;
};

enum class Verdict { BoundedStable, Diverging, Inconclusive };
std::string to_string(Verdict v);

struct SmoothnessOpts {
    double diverging_ratio = 1.25;
    double stable_ratio = 1.15;
    /// Each mode's sup must exceed this multiple of its replicate noise level
    /// at every resolution, else the mode counts as noise-dominated.
    double min_snr = 5.0;
    /// 0: plain k-th forward difference over k + 1 cells. Otherwise the k-th
    /// derivative of a least-squares degree-k polynomial over this many cells
    /// (>= k + 1), which damps histogram noise at the same scaling in h.
    int fit_width = 0;
};

struct SmoothnessReport {
    int k = 0;
    std::vector<int> resolutions;
    std::vector<double> sups;                     // max over modes
    std::vector<double> ratios;                   // of sups
    std::vector<std::vector<double>> mode_sups;   // [mode][level]
    std::vector<std::vector<double>> mode_noise;  // [mode][level], NaN without replicates
    Verdict verdict = Verdict::Inconclusive;
    std::string reason;
};

/// sup over the region of the k-th difference quotient along diff_axis at each ladder
/// level. Diverging when some resolved mode grows by at least
/// diverging_ratio at every refinement; BoundedStable when every mode is
/// resolved (or identically zero) and never grows by more than stable_ratio.
SmoothnessReport smoothness_probe(const EmpiricalDensity& d, int k, const Region& region,
                                  const SmoothnessOpts& opts = {});

struct BlowupReport {
    std::vector<double> values;  // density at p per level (max over cells touching p)
    std::vector<double> ratios;
    double exponent = 0.0;  // least-squares slope of log2 value per refinement
    bool flagged = false;
};

/// Flags blow-up when the value at p grows by at least `growth` per refinement.
BlowupReport blowup_at(const EmpiricalDensity& d, const Vec& p, int mode, double growth = 1.5);

struct SupportEstimate {
    int level = 0;
    std::vector<GridMask> masks;  // per mode
    GridMask combined;            // union over modes
    /// max over mode pairs of |M_i xor M_j| / |union|.
    double mode_disagreement = 0.0;
};

/// A cell is in mode i's support when it carries more than `threshold` of
/// mode i's mass.
SupportEstimate support_estimate(const EmpiricalDensity& d, double threshold, int level = -1);

/// Rows (mode, centre coords..., density at every level) on the finest grid.
void write_density_csv(std::ostream& os, const EmpiricalDensity& d);

}  // namespace switchlab
