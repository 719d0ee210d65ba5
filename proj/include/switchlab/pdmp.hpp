#pragma once

#include "switchlab/geometry.hpp"
#include "switchlab/random.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <vector>

namespace switchlab {

/// Switching-rate function from the closed catalog: a constant, or
/// a + b sin(2 pi x[axis] + phase) with a >= |b|.
struct RateFunction {
    enum class Kind { Constant, Trig };
    Kind kind = Kind::Constant;
    double a = 0.0, b = 0.0, phase = 0.0;
    int axis = 0;

    static RateFunction constant(double c);
    static RateFunction trig(int axis, double a, double b, double phase = 0.0);
    double operator()(const Vec& x) const;
    bool is_zero() const { return a == 0.0 && b == 0.0; }
};

/// PDMP characteristics: mode fields, switching rates alpha_ij(x) and an
/// intensity bound alpha > sup_x sum_j alpha_ij(x).
class Characteristics {
public:
    /// alpha defaults to 1.25 times the largest row sum.
    static Characteristics constant_rates(Space space, std::vector<FieldSpec> modes,
                                          const Eigen::MatrixXd& rates,
                                          std::optional<double> alpha = {},
                                          bool check_irreducible = true);
    /// Row sums are bounded on a 64-per-dimension grid with safety factor
    /// 1.05; alpha defaults to 1.25 times that bound.
    static Characteristics state_dependent(Space space, std::vector<FieldSpec> modes,
                                           std::vector<std::vector<RateFunction>> rates,
                                           std::optional<double> alpha = {},
                                           bool check_irreducible = true);

    const Space& space() const { return space_; }
    int modes() const { return static_cast<int>(fields_.size()); }
    const FieldSpec& field(int i) const { return fields_[i]; }
    const std::vector<FieldSpec>& fields() const { return fields_; }
    double alpha() const { return alpha_; }
    bool has_constant_rates() const { return constant_; }
    /// Constant-rate matrix (zero diagonal); only meaningful with constant rates.
    const Eigen::MatrixXd& rate_matrix() const { return matrix_; }
    double rate(int i, int j, const Vec& x) const;
    double total_rate(int i, const Vec& x) const;
    /// A(x): A_ij = alpha_ij(x) / alpha, A_ii = 1 - sum_j A_ij.
    Eigen::MatrixXd switch_matrix(const Vec& x) const;
    /// Grid estimate of sup_x sum_j alpha_ij(x) over all i.
    double rate_bound() const { return bound_; }

    const IntegratorOpts& integrator() const { return opts_; }
    void set_integrator(const IntegratorOpts& opts) { opts_ = opts; }

private:
    Characteristics() = default;
    void validate(std::optional<double> alpha, bool check_irreducible, double safety);

    Space space_;
    std::vector<FieldSpec> fields_;
    bool constant_ = true;
    Eigen::MatrixXd matrix_;
    std::vector<std::vector<RateFunction>> functions_;
    double alpha_ = 1.0;
    double bound_ = 0.0;
    IntegratorOpts opts_;
};

struct EmbeddedState {
    Vec x;
    int mode = 0;
};

/// Per-mode occupation histogram on a uniform grid of bins^d cells.
/// Cells are stored row-major with axis 0 fastest.
class OccupationAccumulator {
public:
    OccupationAccumulator(const Space& space, int modes, int bins);

    const Space& space() const { return space_; }
    int modes() const { return static_cast<int>(hist_.size()); }
    int bins() const { return bins_; }
    int dim() const { return space_.dim(); }
    long cells() const { return static_cast<long>(hist_.front().size()); }
    double cell_width(int axis) const { return space_.extent(axis) / bins_; }

    long cell_of(const Vec& x) const;
    void deposit_point(int mode, const Vec& x, double w);
    /// Spreads w over the straight segment a -> b (unwrapped coordinates) in
    /// proportion to the length inside each cell.
    void deposit_segment(int mode, const Vec& a, const Vec& b, double w);
    /// Straight segment a -> b traversed at constant speed over times
    /// [t0, t1]; each piece gets its time length, or its integral of
    /// exp(-decay t) when decay > 0.
    void deposit_path(int mode, const Vec& a, const Vec& b, double t0, double t1, double decay);
    void add(int mode, long cell, double w);
    void merge(const OccupationAccumulator& other);
    void clear();

    const std::vector<double>& hist(int mode) const { return hist_[mode]; }
    double mode_weight(int mode) const { return mode_w_[mode]; }
    double total() const;
    /// Sum of all bins, for checking against total().
    double bin_sum() const;

private:
    template <typename Weight>
    void spread(int mode, const Vec& a, const Vec& b, Weight&& weight);

    Space space_;
    int bins_;
    std::vector<std::vector<double>> hist_;
    std::vector<double> mode_w_;
    std::vector<double> cuts_;
};

enum class DepositScheme {
    Segment,    // exact spread along each RK4 chord
    Trapezoid,  // half of each step's weight at both ends
};

struct SimOpts {
    DepositScheme scheme = DepositScheme::Segment;
    std::ostream* event_log = nullptr;  // CSV rows: t,mode,x...,kind
};

struct TrajectorySummary {
    EmbeddedState final_state;
    long real_events = 0;
    long fictitious_events = 0;
    double time = 0.0;
};

/// Writes the CSV header matching simulate_continuous event rows.
void write_event_header(std::ostream& os, int dim);

/// One step of the embedded chain P = KA.
EmbeddedState embedded_step(const Characteristics& ch, const EmbeddedState& s, Philox& rng);

/// Continuous-time trajectory on [0, t_end] by thinning: proposals at rate
/// alpha (state-dependent rates) or at the exact total rate of the current
/// mode (constant rates, every proposal is a real switch). Occupation time is
/// deposited into acc along the flowed segments at the integrator step.
TrajectorySummary simulate_continuous(const Characteristics& ch, const EmbeddedState& z0,
                                      double t_end, Philox& rng, OccupationAccumulator* acc,
                                      const SimOpts& opts = {});

/// As simulate_continuous but stops after n_events proposals.
TrajectorySummary simulate_events(const Characteristics& ch, const EmbeddedState& z0,
                                  long n_events, Philox& rng, OccupationAccumulator* acc,
                                  const SimOpts& opts = {});

/// mu -> mu K: each sample flowed for an independent Exp(alpha) time.
std::vector<EmbeddedState> k_pushforward(const Characteristics& ch,
                                         const std::vector<EmbeddedState>& samples, Philox& rng);

enum class McEstimator {
    Continuous,  // occupation time of the continuous process
    Embedded,    // embedded-chain states (an estimate of Inv(P))
    EmbeddedK,   // embedded-chain states pushed through K
    Conditional, // per sojourn, the expected occupation given its start
};

struct McOpts {
    McEstimator estimator = McEstimator::Continuous;
    int bins = 64;
    double split_threshold = 0.1;
    int diagnostic_bins = 32;
    SimOpts sim;
    int threads = 0;
    std::optional<EmbeddedState> start;  // default: uniform point, mode = chain % m
};

struct McResult {
    OccupationAccumulator merged;
    std::vector<OccupationAccumulator> chains;
    double split_half_l1 = 0.0;
    bool non_convergence = false;
    long events = 0;
    long real_events = 0;
};

/// n_steps events per chain after burn_in. Chain c uses Philox stream
/// stream_id(0, c) under the master seed.
McResult invariant_measure_mc(const Characteristics& ch, long n_steps, long burn_in, int n_chains,
                              std::uint64_t seed, const McOpts& opts = {});

/// L1 distance between two accumulators after normalizing each to unit total
/// mass, computed on cells aggregated down to `bins` per dimension.
double l1_distance(const OccupationAccumulator& a, const OccupationAccumulator& b, int bins);

/// Stationary vector of the constant switch matrix A (left eigenvector).
Eigen::RowVectorXd switch_stationary(const Characteristics& ch);

}  // namespace switchlab
