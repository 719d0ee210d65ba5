#pragma once

#include "switchlab/geometry.hpp"

#include <vector>

namespace switchlab {

/// Finite-horizon estimate of a superadditive rate.
struct RateEstimate {
    double value = 0.0;                // per_n_values.back()
    int n_used = 0;
    std::vector<double> per_n_values;  // entry n-1 holds (1/n) min over grid
    int grid_resolution = 0;           // points per dimension
    /// max_n per_n_values. The grid quantities are superadditive in n, so by
    /// Fekete this is the best of the finite-n values as an approximation
    /// from below of the limit.
    double fekete_bound = 0.0;
};

/// Smallest singular value of a 1x1 or 2x2 matrix.
double smallest_singular_value(const Mat& m);

/// E(map, x): smallest singular value of the tangent.
double expansion_constant(const MapHandle& map, const Vec& x);

/// Uniform evaluation grid: grid_res points per dimension, cell-corner
/// aligned (includes the lower corner).
std::vector<Vec> evaluation_grid(const Space& space, int grid_res);

/// Expansion rate: (1/n) log min_x E(map^n, x) for n = 1..n_max.
RateEstimate expansion_rate(const MapHandle& map, int grid_res, int n_max, int threads = 0);

/// k-expansion-volume rate: (1/n) min_x [log J(map^n, x) + k log E(map^n, x)].
RateEstimate expansion_volume_rate(const MapHandle& map, int k, int grid_res, int n_max,
                                   int threads = 0);

/// Rates for k = 0..k_max from a single pass over the grid orbits. Entry
/// k_max + 1 of the result is the expansion rate.
std::vector<RateEstimate> expansion_rates(const MapHandle& map, int k_max, int grid_res,
                                          int n_max, int threads = 0);

struct LyapunovSpectrum {
    std::vector<double> exponents;      // ascending
    int n_iterates = 0;
    Vec start;
    std::vector<double> log_accumulators;  // sum of log |R_ii| per direction
    double log_jacobian_rate = 0.0;        // (1/n) sum log J along the orbit
    std::vector<std::vector<double>> window_means;  // exponents per window
    bool non_convergence = false;
};

/// QR-renormalized tangent iteration from x0 after burn_in iterates. The run
/// is split into 10 windows; non_convergence is set when the last two window
/// means differ by more than threshold in any exponent.
LyapunovSpectrum lyapunov_spectrum(const MapHandle& map, const Vec& x0, int n, int burn_in,
                                   double threshold = 1e-2);

enum class OrbitKind { Equilibrium, PeriodicOrbit };

struct OrbitRecord {
    OrbitKind kind = OrbitKind::Equilibrium;
    Vec anchor;
    double period = 0.0;
    std::vector<double> floquet;  // ascending, per unit time
    bool stable = false;          // floquet.front() < 0
    int section_axis = -1;
};

/// Seed for orbit detection. The Poincare section is {x : x[axis] = point[axis]}.
struct OrbitSeed {
    Vec point;
    int axis = 0;
};

struct OrbitSearchOpts {
    IntegratorOpts integrator;
    double horizon = 100.0;   // maximal return time
    int newton_iters = 50;
    double equilibrium_tol = 1e-12;
    double return_tol = 1e-11;
};

/// Detects equilibria (Newton on F) and periodic orbits (Newton on the
/// Poincare return map) from each seed. Duplicate detections are merged.
/// Throws NoSectionCrossing if a seed that is not an equilibrium never
/// returns to its section within the horizon.
std::vector<OrbitRecord> find_periodic_orbits(const Space& space, const FieldSpec& field,
                                              const std::vector<OrbitSeed>& seeds,
                                              const OrbitSearchOpts& opts = {});

struct ErgplanReport {
    double log_jacobian_rate = 0.0;  // (1/T) log J(Phi^T, anchor), T = 1 for equilibria
    double floquet_sum = 0.0;
    double difference = 0.0;
};

ErgplanReport ergplan_check(const Space& space, const FieldSpec& field, const OrbitRecord& orbit,
                            const IntegratorOpts& opts = {});

}  // namespace switchlab
