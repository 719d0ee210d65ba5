#include "switchlab/pdmp.hpp"
#include "switchlab/invariants.hpp"
#include "switchlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace switchlab {

// ---------------------------------------------------------------------------
// Rates

RateFunction RateFunction::constant(double c) {
    require(c >= 0.0 && std::isfinite(c), "rates must be finite and nonnegative");
    RateFunction r;
    r.a = c;
    return r;
}

RateFunction RateFunction::trig(int axis, double a, double b, double phase) {
    require(a >= std::abs(b), "trig rate a + b sin(.) needs a >= |b|");
    RateFunction r;
    r.kind = Kind::Trig;
    r.axis = axis;
    r.a = a;
    r.b = b;
    r.phase = phase;
    return r;
}

double RateFunction::operator()(const Vec& x) const {
    if (kind == Kind::Constant) return a;
    return a + b * std::sin(kTwoPi * x[axis] + phase);
}

// ---------------------------------------------------------------------------
// Characteristics

Characteristics Characteristics::constant_rates(Space space, std::vector<FieldSpec> modes,
                                                const Eigen::MatrixXd& rates,
                                                std::optional<double> alpha,
                                                bool check_irreducible) {
    const auto m = static_cast<Eigen::Index>(modes.size());
    require(rates.rows() == m && rates.cols() == m, "rate matrix must be m x m");
    Characteristics ch;
    ch.space_ = std::move(space);
    ch.fields_ = std::move(modes);
    ch.constant_ = true;
    ch.matrix_ = rates;
    ch.matrix_.diagonal().setZero();
    require((ch.matrix_.array() >= 0.0).all() && ch.matrix_.allFinite(),
            "rates must be finite and nonnegative");
    ch.functions_.assign(m, std::vector<RateFunction>(m));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) ch.functions_[i][j] = RateFunction::constant(ch.matrix_(i, j));
    ch.validate(alpha, check_irreducible, 1.0);
    return ch;
}

Characteristics Characteristics::state_dependent(Space space, std::vector<FieldSpec> modes,
                                                 std::vector<std::vector<RateFunction>> rates,
                                                 std::optional<double> alpha,
                                                 bool check_irreducible) {
    const std::size_t m = modes.size();
    require(rates.size() == m, "rate table must be m x m");
    for (auto& row : rates) require(row.size() == m, "rate table must be m x m");
    Characteristics ch;
    ch.space_ = std::move(space);
    ch.fields_ = std::move(modes);
    ch.constant_ = false;
    for (std::size_t i = 0; i < m; ++i) {
        rates[i][i] = RateFunction::constant(0.0);
        for (const auto& r : rates[i])
            require(r.axis >= 0 && r.axis < ch.space_.dim(), "rate function axis out of range");
    }
    ch.functions_ = std::move(rates);
    ch.matrix_ = Eigen::MatrixXd::Zero(m, m);
    ch.validate(alpha, check_irreducible, 1.05);
    return ch;
}

void Characteristics::validate(std::optional<double> alpha, bool check_irreducible, double safety) {
    const int m = modes();
    require(m >= 1, "need at least one mode");
    for (int i = 0; i < m; ++i) {
        require(fields_[i].dim() == space_.dim(), "mode field dimension does not match the space");
        if (!space_.periodic())
            require(points_inward(space_, fields_[i]),
                    "mode " + std::to_string(i) + " field does not point inward on the trapping box");
    }
    if (constant_) {
        bound_ = m > 1 ? matrix_.rowwise().sum().maxCoeff() : 0.0;
    } else {
        bound_ = 0.0;
        for (const auto& x : evaluation_grid(space_, 64))
            for (int i = 0; i < m; ++i) bound_ = std::max(bound_, total_rate(i, x));
        bound_ *= safety;
    }
    if (alpha) {
        require(*alpha > bound_ && std::isfinite(*alpha),
                "intensity bound alpha must exceed the largest total switching rate " +
                    std::to_string(bound_));
        alpha_ = *alpha;
    } else {
        alpha_ = bound_ > 0.0 ? 1.25 * bound_ : 1.0;
    }
    if (check_irreducible && m > 1) {
        for (int s = 0; s < m; ++s) {
            std::vector<bool> seen(m, false);
            std::vector<int> stack{s};
            seen[s] = true;
            while (!stack.empty()) {
                const int i = stack.back();
                stack.pop_back();
                for (int j = 0; j < m; ++j)
                    if (!seen[j] && !functions_[i][j].is_zero()) {
                        seen[j] = true;
                        stack.push_back(j);
                    }
            }
            require(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }),
                    "switching rates are not irreducible");
        }
    }
}

double Characteristics::rate(int i, int j, const Vec& x) const {
    if (i == j) return 0.0;
    return constant_ ? matrix_(i, j) : functions_[i][j](x);
}

double Characteristics::total_rate(int i, const Vec& x) const {
    if (constant_) return matrix_.row(i).sum();
    double s = 0.0;
    for (int j = 0; j < modes(); ++j) s += rate(i, j, x);
    return s;
}

Eigen::MatrixXd Characteristics::switch_matrix(const Vec& x) const {
    const int m = modes();
    Eigen::MatrixXd a(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) a(i, j) = rate(i, j, x) / alpha_;
        a(i, i) = 1.0 - total_rate(i, x) / alpha_;
    }
    return a;
}

Eigen::RowVectorXd switch_stationary(const Characteristics& ch) {
    require(ch.has_constant_rates(), "stationary switch law needs constant rates");
    const int m = ch.modes();
    const Eigen::MatrixXd a = ch.switch_matrix(Vec::Zero(ch.space().dim()));
    Eigen::MatrixXd sys(m + 1, m);
    sys.topRows(m) = a.transpose() - Eigen::MatrixXd::Identity(m, m);
    sys.row(m).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs[m] = 1.0;
    return sys.colPivHouseholderQr().solve(rhs).transpose();
}

// ---------------------------------------------------------------------------
// Accumulator

OccupationAccumulator::OccupationAccumulator(const Space& space, int modes, int bins)
    : space_(space), bins_(bins) {
    require(modes >= 1, "accumulator needs at least one mode");
    require(bins >= 1, "accumulator needs at least one bin");
    const long cells = space.dim() == 1 ? bins : static_cast<long>(bins) * bins;
    hist_.assign(modes, std::vector<double>(cells, 0.0));
    mode_w_.assign(modes, 0.0);
}

namespace {

inline int axis_cell(double u, int bins, bool periodic) {
    long i = static_cast<long>(std::floor(u));
    if (periodic) {
        i %= bins;
        if (i < 0) i += bins;
        return static_cast<int>(i);
    }
    return static_cast<int>(std::clamp<long>(i, 0, bins - 1));
}

}  // namespace

long OccupationAccumulator::cell_of(const Vec& x) const {
    long idx = 0, stride = 1;
    for (int a = 0; a < dim(); ++a) {
        const double u = (x[a] - space_.lower()[a]) / cell_width(a);
        idx += stride * axis_cell(u, bins_, space_.periodic());
        stride *= bins_;
    }
    return idx;
}

void OccupationAccumulator::deposit_point(int mode, const Vec& x, double w) {
    hist_[mode][cell_of(x)] += w;
    mode_w_[mode] += w;
}

template <typename Weight>
void OccupationAccumulator::spread(int mode, const Vec& a, const Vec& b, Weight&& weight) {
    const int d = dim();
    double ua[kMaxDim], ub[kMaxDim];
    std::vector<double>& cuts = cuts_;
    cuts.clear();
    for (int k = 0; k < d; ++k) {
        ua[k] = (a[k] - space_.lower()[k]) / cell_width(k);
        ub[k] = (b[k] - space_.lower()[k]) / cell_width(k);
        const double lo = std::min(ua[k], ub[k]), hi = std::max(ua[k], ub[k]);
        for (double n = std::floor(lo) + 1.0; n < hi; n += 1.0) cuts.push_back((n - ua[k]) / (ub[k] - ua[k]));
    }
    if (d > 1) std::sort(cuts.begin(), cuts.end());
    else if (ub[0] < ua[0]) std::reverse(cuts.begin(), cuts.end());
    auto& h = hist_[mode];
    auto put = [&](double s0, double s1) {
        const double mid = 0.5 * (s0 + s1);
        long idx = 0, stride = 1;
        for (int k = 0; k < d; ++k) {
            idx += stride * axis_cell(ua[k] + mid * (ub[k] - ua[k]), bins_, space_.periodic());
            stride *= bins_;
        }
        const double w = weight(s0, s1);
        h[idx] += w;
        mode_w_[mode] += w;
    };
    double prev = 0.0;
    for (double c : cuts) {
        put(prev, c);
        prev = c;
    }
    put(prev, 1.0);
}

void OccupationAccumulator::deposit_segment(int mode, const Vec& a, const Vec& b, double w) {
    spread(mode, a, b, [w](double s0, double s1) { return w * (s1 - s0); });
}

void OccupationAccumulator::deposit_path(int mode, const Vec& a, const Vec& b, double t0, double t1,
                                         double decay) {
    const double dt = t1 - t0;
    if (decay <= 0.0) {
        deposit_segment(mode, a, b, dt);
        return;
    }
    spread(mode, a, b, [=](double s0, double s1) {
        return (std::exp(-decay * (t0 + s0 * dt)) - std::exp(-decay * (t0 + s1 * dt))) / decay;
    });
}

void OccupationAccumulator::add(int mode, long cell, double w) {
    hist_[mode][cell] += w;
    mode_w_[mode] += w;
}

void OccupationAccumulator::merge(const OccupationAccumulator& other) {
    require(other.bins_ == bins_ && other.modes() == modes() && other.dim() == dim(),
            "accumulators have different layouts");
    for (int m = 0; m < modes(); ++m) {
        for (std::size_t c = 0; c < hist_[m].size(); ++c) hist_[m][c] += other.hist_[m][c];
        mode_w_[m] += other.mode_w_[m];
    }
}

void OccupationAccumulator::clear() {
    for (auto& h : hist_) std::fill(h.begin(), h.end(), 0.0);
    std::fill(mode_w_.begin(), mode_w_.end(), 0.0);
}

double OccupationAccumulator::total() const {
    double s = 0.0;
    for (double w : mode_w_) s += w;
    return s;
}

double OccupationAccumulator::bin_sum() const {
    double s = 0.0;
    for (const auto& h : hist_)
        for (double v : h) s += v;
    return s;
}

double l1_distance(const OccupationAccumulator& a, const OccupationAccumulator& b, int bins) {
    require(a.bins() == b.bins() && a.modes() == b.modes() && a.dim() == b.dim(),
            "accumulators have different layouts");
    require(bins >= 1 && a.bins() % bins == 0, "diagnostic resolution must divide the bin count");
    const double ta = a.total(), tb = b.total();
    if (ta <= 0.0 || tb <= 0.0) throw EmptyAccumulator("cannot compare an empty accumulator");
    const int f = a.bins() / bins;
    const int d = a.dim();
    const long coarse = d == 1 ? bins : static_cast<long>(bins) * bins;
    double l1 = 0.0;
    std::vector<double> ca(coarse), cb(coarse);
    for (int m = 0; m < a.modes(); ++m) {
        std::fill(ca.begin(), ca.end(), 0.0);
        std::fill(cb.begin(), cb.end(), 0.0);
        for (long c = 0; c < a.cells(); ++c) {
            long cc;
            if (d == 1) cc = c / f;
            else cc = (c % a.bins()) / f + bins * ((c / a.bins()) / f);
            ca[cc] += a.hist(m)[c];
            cb[cc] += b.hist(m)[c];
        }
        for (long c = 0; c < coarse; ++c) l1 += std::abs(ca[c] / ta - cb[c] / tb);
    }
    return l1;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

// e^{-decay t} drops below this past the conditional-deposit horizon.
constexpr double kDecayTolerance = 1e-10;

double horizon(double decay) { return std::log(1.0 / kDecayTolerance) / decay; }

double piece_weight(double t0, double t1, double decay) {
    if (decay <= 0.0) return t1 - t0;
    const double e1 = std::isfinite(t1) ? std::exp(-decay * t1) : 0.0;
    return (std::exp(-decay * t0) - e1) / decay;
}

// x' = a (x - p) on an interval, contracting.
bool affine_interval(const Space& space, const FieldSpec& f, double& a, double& p) {
    if (space.periodic() || space.dim() != 1) return false;
    const auto* af = std::get_if<AffineField>(&f.variant());
    if (!af) return false;
    a = af->matrix(0, 0);
    p = af->anchor[0];
    return a < 0.0;
}

// Exact occupation of the path x -> p of x' = a (x - p): each cell crossed
// gets the weight of the time spent in it, up to time t_end.
void deposit_affine(OccupationAccumulator& acc, int mode, double x, double a, double p, double t_end,
                    double decay) {
    const double lo = acc.space().lower()[0], w = acc.cell_width(0);
    const int bins = acc.bins();
    const double end = std::isfinite(t_end) ? p + (x - p) * std::exp(a * t_end) : p;
    auto cell = [&](double y) { return std::clamp<long>(static_cast<long>(std::floor((y - lo) / w)), 0, bins - 1); };
    long c = cell(x);
    const long last = cell(end);
    const long dir = end > x ? 1 : -1;
    double t_in = 0.0;
    while (c != last) {
        const double edge = lo + w * static_cast<double>(dir > 0 ? c + 1 : c);
        const double t_out = std::clamp(std::log((edge - p) / (x - p)) / a, t_in, t_end);
        acc.add(mode, c, piece_weight(t_in, t_out, decay));
        t_in = t_out;
        c += dir;
    }
    acc.add(mode, c, piece_weight(t_in, t_end, decay));
}

// Flows `mode` from x for time tau and returns the (reduced) endpoint. With an
// accumulator, deposits the path occupation on [0, tau] when decay == 0, and
// the expected occupation int_0^inf e^{-decay t} delta_{Phi^t x} dt otherwise.
Vec sojourn(const Characteristics& ch, int mode, const Vec& x, double tau, double decay,
            OccupationAccumulator* acc, DepositScheme scheme) {
    const Space& space = ch.space();
    const FieldSpec& f = ch.field(mode);
    const bool conditional = decay > 0.0;
    const double t_dep = conditional ? std::max(tau, horizon(decay)) : tau;

    double a, p;
    if (affine_interval(space, f, a, p)) {
        if (acc) deposit_affine(*acc, mode, x[0], a, p, conditional ? INFINITY : tau, decay);
        return Vec::Constant(1, p + (x[0] - p) * std::exp(a * tau));
    }
    if (f.is_constant() && (scheme == DepositScheme::Segment || !acc)) {
        const Vec v = f.value(x);
        const Vec y = x + tau * v;
        if (!space.periodic() && !space.contains(y, 1e-9))
            throw BoundaryExit("trajectory left the trapping box");
        if (acc) acc->deposit_path(mode, x, x + t_dep * v, 0.0, t_dep, decay);
        return space.reduce(y);
    }
    auto none = [](const Vec&, const Vec&, double) {};
    if (!acc) return space.reduce(advance_visit(space, f, x, tau, ch.integrator(), none));

    double t = 0.0;
    auto visit = [&](const Vec& u, const Vec& v, double dt) {
        if (scheme == DepositScheme::Segment) {
            acc->deposit_path(mode, u, v, t, t + dt, decay);
        } else {
            const double half = 0.5 * piece_weight(t, t + dt, decay);
            acc->deposit_point(mode, u, half);
            acc->deposit_point(mode, v, half);
        }
        t += dt;
    };
    const Vec y = advance_visit(space, f, x, tau, ch.integrator(), visit);
    if (t_dep > tau) advance_visit(space, f, y, t_dep - tau, ch.integrator(), visit);
    return space.reduce(y);
}

int pick_target(const Characteristics& ch, int i, const Vec& x, double u) {
    double cum = 0.0;
    for (int j = 0; j < ch.modes(); ++j) {
        if (j == i) continue;
        cum += ch.rate(i, j, x);
        if (u < cum) return j;
    }
    return -1;
}

void log_event(std::ostream* os, double t, const EmbeddedState& s, bool real) {
    if (!os) return;
    *os << t << ',' << s.mode;
    for (Eigen::Index k = 0; k < s.x.size(); ++k) *os << ',' << s.x[k];
    *os << ',' << (real ? "switch" : "fictitious") << '\n';
}

TrajectorySummary run(const Characteristics& ch, const EmbeddedState& z0, double t_end,
                      long max_events, Philox& rng, OccupationAccumulator* acc,
                      const SimOpts& opts, bool conditional = false) {
    require(z0.mode >= 0 && z0.mode < ch.modes(), "initial mode out of range");
    require(z0.x.size() == ch.space().dim(), "initial point has the wrong dimension");
    TrajectorySummary out;
    EmbeddedState s{ch.space().reduce(z0.x), z0.mode};
    double t = 0.0;
    long events = 0;
    while (t < t_end && events < max_events) {
        const double rate = ch.has_constant_rates() ? ch.total_rate(s.mode, s.x) : ch.alpha();
        if (rate <= 0.0) {
            if (!std::isfinite(t_end))
                throw InvalidArgument("mode " + std::to_string(s.mode) + " never switches");
            s.x = sojourn(ch, s.mode, s.x, t_end - t, 0.0, acc, opts.scheme);
            t = t_end;
            break;
        }
        const double tau = rng.exponential(rate);
        if (t + tau >= t_end) {
            s.x = sojourn(ch, s.mode, s.x, t_end - t, 0.0, acc, opts.scheme);
            t = t_end;
            break;
        }
        s.x = sojourn(ch, s.mode, s.x, tau, conditional ? rate : 0.0, acc, opts.scheme);
        t += tau;
        ++events;
        const int j = pick_target(ch, s.mode, s.x, rng.uniform() * rate);
        if (j >= 0) {
            s.mode = j;
            ++out.real_events;
        } else {
            ++out.fictitious_events;
        }
        log_event(opts.event_log, t, s, j >= 0);
    }
    out.final_state = s;
    out.time = t;
    return out;
}

}  // namespace

void write_event_header(std::ostream& os, int dim) {
    os << "t,mode";
    for (int k = 0; k < dim; ++k) os << ",x" << k;
    os << ",kind\n";
}

TrajectorySummary simulate_continuous(const Characteristics& ch, const EmbeddedState& z0,
                                      double t_end, Philox& rng, OccupationAccumulator* acc,
                                      const SimOpts& opts) {
    require(t_end > 0.0, "t_end must be positive");
    return run(ch, z0, t_end, std::numeric_limits<long>::max(), rng, acc, opts);
}

TrajectorySummary simulate_events(const Characteristics& ch, const EmbeddedState& z0,
                                  long n_events, Philox& rng, OccupationAccumulator* acc,
                                  const SimOpts& opts) {
    require(n_events >= 0, "event count must be nonnegative");
    return run(ch, z0, std::numeric_limits<double>::infinity(), n_events, rng, acc, opts);
}

EmbeddedState embedded_step(const Characteristics& ch, const EmbeddedState& s, Philox& rng) {
    const double t = rng.exponential(ch.alpha());
    EmbeddedState out{sojourn(ch, s.mode, ch.space().reduce(s.x), t, 0.0, nullptr, DepositScheme::Segment),
                      s.mode};
    const int j = pick_target(ch, s.mode, out.x, rng.uniform() * ch.alpha());
    if (j >= 0) out.mode = j;
    return out;
}

std::vector<EmbeddedState> k_pushforward(const Characteristics& ch,
                                         const std::vector<EmbeddedState>& samples, Philox& rng) {
    std::vector<EmbeddedState> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const double t = rng.exponential(ch.alpha());
        out.push_back({sojourn(ch, s.mode, ch.space().reduce(s.x), t, 0.0, nullptr, DepositScheme::Segment),
                       s.mode});
    }
    return out;
}

McResult invariant_measure_mc(const Characteristics& ch, long n_steps, long burn_in, int n_chains,
                              std::uint64_t seed, const McOpts& opts) {
    require(n_steps >= 10'000, "invariant_measure_mc needs n_steps >= 1e4");
    require(n_chains >= 1, "need at least one chain");
    require(burn_in >= 0, "burn_in must be nonnegative");
    const Space& space = ch.space();
    const int m = ch.modes();
    std::vector<OccupationAccumulator> first(n_chains, OccupationAccumulator(space, m, opts.bins));
    std::vector<OccupationAccumulator> second = first;
    std::vector<long> events(n_chains, 0), real(n_chains, 0);

    parallel_for(n_chains, [&](long c) {
        Philox rng(seed, stream_id(0, static_cast<std::uint32_t>(c)));
        EmbeddedState s;
        if (opts.start) {
            s = *opts.start;
        } else {
            s.x = Vec(space.dim());
            for (int k = 0; k < space.dim(); ++k)
                s.x[k] = space.lower()[k] + space.extent(k) * rng.uniform();
            s.mode = static_cast<int>(c % m);
        }
        const long half = n_steps / 2;
        if (opts.estimator == McEstimator::Continuous || opts.estimator == McEstimator::Conditional) {
            const bool cond = opts.estimator == McEstimator::Conditional;
            const double inf = std::numeric_limits<double>::infinity();
            auto r = run(ch, s, inf, burn_in, rng, nullptr, opts.sim);
            r = run(ch, r.final_state, inf, half, rng, &first[c], opts.sim, cond);
            events[c] += half;
            real[c] += r.real_events;
            r = run(ch, r.final_state, inf, n_steps - half, rng, &second[c], opts.sim, cond);
            events[c] += n_steps - half;
            real[c] += r.real_events;
            return;
        }
        for (long n = 0; n < burn_in; ++n) s = embedded_step(ch, s, rng);
        for (long n = 0; n < n_steps; ++n) {
            const EmbeddedState next = embedded_step(ch, s, rng);
            if (next.mode != s.mode) ++real[c];
            s = next;
            auto& acc = n < half ? first[c] : second[c];
            if (opts.estimator == McEstimator::Embedded) {
                acc.deposit_point(s.mode, s.x, 1.0);
            } else {
                const double t = rng.exponential(ch.alpha());
                acc.deposit_point(s.mode, sojourn(ch, s.mode, s.x, t, 0.0, nullptr, DepositScheme::Segment), 1.0);
            }
        }
        events[c] = n_steps;
    }, opts.threads);

    McResult res{OccupationAccumulator(space, m, opts.bins), {}, 0.0, false, 0, 0};
    OccupationAccumulator a(space, m, opts.bins), b(space, m, opts.bins);
    for (int c = 0; c < n_chains; ++c) {
        a.merge(first[c]);
        b.merge(second[c]);
        OccupationAccumulator chain = first[c];
        chain.merge(second[c]);
        res.chains.push_back(std::move(chain));
        res.events += events[c];
        res.real_events += real[c];
    }
    res.merged = a;
    res.merged.merge(b);
    const int diag = std::min(opts.diagnostic_bins, opts.bins);
    res.split_half_l1 = opts.bins % diag == 0 ? l1_distance(a, b, diag) : l1_distance(a, b, opts.bins);
    res.non_convergence = res.split_half_l1 > opts.split_threshold;
    return res;
}

}  // namespace switchlab
