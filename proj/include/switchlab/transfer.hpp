#pragma once

#include "switchlab/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace switchlab {

/// A real function sampled at x_j = lo + j h, h = (hi - lo) / N, j < N.
/// Periodic grids live on the circle [0, 1); non-periodic grids cover a
/// trapping interval and read as zero outside it.
class GridFunction {
public:
    GridFunction(int n, double lo = 0.0, double hi = 1.0, bool periodic = true);

    static GridFunction sample(int n, const std::function<double(double)>& f, double lo = 0.0,
                               double hi = 1.0, bool periodic = true);
    /// Grid matching a one-dimensional space.
    static GridFunction on(const Space& space, int n);

    int size() const { return static_cast<int>(values_.size()); }
    double step() const { return (hi_ - lo_) / size(); }
    double lower() const { return lo_; }
    double upper() const { return hi_; }
    bool periodic() const { return periodic_; }
    double x(int j) const { return lo_ + j * step(); }

    Eigen::VectorXd& values() { return values_; }
    const Eigen::VectorXd& values() const { return values_; }
    double& operator[](int j) { return values_[j]; }
    double operator[](int j) const { return values_[j]; }

    /// Riemann sum h * sum(values).
    double integral() const { return step() * values_.sum(); }

    bool same_grid(const GridFunction& o) const;

private:
    Eigen::VectorXd values_;
    double lo_, hi_;
    bool periodic_;
};

/// Cubic interpolant of a GridFunction: periodic cubic B-spline on periodic
/// grids, four-point Lagrange on intervals (zero outside).
class CubicInterpolant {
public:
    explicit CubicInterpolant(const GridFunction& f);
    double operator()(double x) const;

private:
    double lo_, hi_, h_;
    bool periodic_;
    Eigen::VectorXd coef_;
};

/// Discretized transfer operator of a circle map (or a 1D flow-time map) on a
/// fixed grid: for each grid point y_j and branch b, the preimage psi_b(y_j)
/// and the weight |psi_b'(y_j)| = 1 / J(map, psi_b(y_j)).
class CircleMapModel {
public:
    CircleMapModel(const MapHandle& map, int n);

    int degree() const { return degree_; }
    int size() const { return n_; }
    const MapHandle& map() const { return map_; }
    const GridFunction& grid() const { return grid_; }
    /// preimage(b, j), weight(b, j); weight 0 marks a preimage outside the space.
    double preimage(int b, int j) const { return pre_(b, j); }
    double weight(int b, int j) const { return wt_(b, j); }
    /// max_j,b |map(psi_b(y_j)) - y_j| (circle distance).
    double inversion_residual() const { return residual_; }

private:
    MapHandle map_;
    int n_;
    int degree_;
    GridFunction grid_;
    Eigen::MatrixXd pre_, wt_;
    double residual_ = 0.0;
};

GridFunction apply_transfer(const CircleMapModel& model, const GridFunction& rho);

/// Transfer operator of the time-t flow: rho(Phi^{-t} x) exp(log J(Phi^{-t}, x)).
/// Points whose backward orbit leaves a trapping interval get 0.
GridFunction apply_transfer_flow(const Space& space, const FieldSpec& field, double t,
                                 const GridFunction& rho, const IntegratorOpts& opts = {});

/// apply_transfer_flow at several times, sharing one backward sweep per grid
/// point. Times must be ascending and nonnegative.
std::vector<GridFunction> apply_transfer_flow_times(const Space& space, const FieldSpec& field,
                                                    const std::vector<double>& times,
                                                    const GridFunction& rho,
                                                    const IntegratorOpts& opts = {});

/// sum_{j=0..k} max_i |Delta^j rho_i| / h^j with forward differences (on a
/// periodic grid every shift of the stencil is visited, so the sup equals
/// that of the centred stencil).
double ck_seminorm(const GridFunction& rho, int k);

/// Per-order terms of ck_seminorm: entry j is max |Delta^j rho| / h^j.
std::vector<double> fd_sups(const GridFunction& rho, int k);

struct SpectralOpts {
    /// An iterate counts as resolved while h * S_{k+1} / S_k stays below this,
    /// where S_j is the j-th difference sup.
    double resolution_threshold = 0.75;
    int min_window = 5;
};

struct SpectralEstimate {
    int k = 0;
    std::vector<double> growth;      // ratios of the winning probe
    double radius = 0.0;
    std::pair<int, int> window{0, 0};  // 1-based iterations, inclusive
    int best_probe = -1;
    std::vector<double> probe_radii;   // NaN for collapsed probes
    std::vector<double> resolution;    // h S_{k+1} / S_k of the winning probe
    int resolved_iterations = 0;       // of the winning probe
    bool under_resolved = false;
};

/// Probe functions: 1, sin(2 pi x), cos(2 pi x), then seeded random
/// band-limited positive functions.
std::vector<GridFunction> spectral_probes(int n, int n_probes, std::uint64_t seed);

SpectralEstimate spectral_radius(const CircleMapModel& model, int k, int n_iter, int n_probes,
                                 std::uint64_t seed, const SpectralOpts& opts = {});

struct QuadOpts {
    int nodes = 64;
    IntegratorOpts integrator;
};

/// Gauss-Laguerre nodes and weights for the weight e^{-s} on [0, inf).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_laguerre(int n);

/// L_i rho = int_0^inf alpha e^{-alpha t} L_{Phi^t} rho dt by Gauss-Laguerre
/// quadrature, dropping nodes beyond t = 40 / alpha.
GridFunction transfer_exp_average(const Space& space, const FieldSpec& field, double alpha,
                                  const GridFunction& rho, const QuadOpts& quad = {});

/// pi * sum_k Delta^k for P = 1 pi^T + Delta.
Eigen::RowVectorXd neumann_invariant(const Eigen::MatrixXd& p, const Eigen::RowVectorXd& pi,
                                     const Eigen::MatrixXd& delta);

}  // namespace switchlab
