#include "switchlab/transfer.hpp"
#include "switchlab/parallel.hpp"
#include "switchlab/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace switchlab {

// ---------------------------------------------------------------------------
// GridFunction

GridFunction::GridFunction(int n, double lo, double hi, bool periodic)
    : values_(Eigen::VectorXd::Zero(n)), lo_(lo), hi_(hi), periodic_(periodic) {
    require(n >= 16 && (n & (n - 1)) == 0, "grid size must be a power of two and at least 16");
    require(hi > lo, "grid interval must be nonempty");
}

GridFunction GridFunction::sample(int n, const std::function<double(double)>& f, double lo,
                                  double hi, bool periodic) {
    GridFunction g(n, lo, hi, periodic);
    for (int j = 0; j < n; ++j) g[j] = f(g.x(j));
    return g;
}

GridFunction GridFunction::on(const Space& space, int n) {
    require(space.dim() == 1, "grid functions live on one-dimensional spaces");
    return GridFunction(n, space.lower()[0], space.upper()[0], space.periodic());
}

bool GridFunction::same_grid(const GridFunction& o) const {
    return size() == o.size() && lo_ == o.lo_ && hi_ == o.hi_ && periodic_ == o.periodic_;
}

// ---------------------------------------------------------------------------
// Interpolation

CubicInterpolant::CubicInterpolant(const GridFunction& f)
    : lo_(f.lower()), hi_(f.upper()), h_(f.step()), periodic_(f.periodic()), coef_(f.values()) {
    if (!periodic_) return;
    // Periodic cubic B-spline prefilter (causal/anticausal recursion).
    const int n = f.size();
    const double z = std::sqrt(3.0) - 2.0;
    const double zn = std::pow(z, n);
    const auto& v = f.values();
    Eigen::VectorXd cp(n);
    double acc = 0.0, zk = 1.0;
    for (int m = 0; m < n; ++m) {
        acc += zk * v[(n - m) % n];
        zk *= z;
    }
    cp[0] = acc / (1.0 - zn);
    for (int j = 1; j < n; ++j) cp[j] = v[j] + z * cp[j - 1];
    Eigen::VectorXd cm(n);
    acc = 0.0;
    zk = 1.0;
    for (int m = 0; m < n; ++m) {
        acc += zk * cp[(n - 1 + m) % n];
        zk *= z;
    }
    cm[n - 1] = -z * acc / (1.0 - zn);
    for (int j = n - 2; j >= 0; --j) cm[j] = z * (cm[j + 1] - cp[j]);
    coef_ = 6.0 * cm;
}

double CubicInterpolant::operator()(double x) const {
    const int n = static_cast<int>(coef_.size());
    double u = (x - lo_) / h_;
    if (periodic_) {
        u -= n * std::floor(u / n);
        int j = static_cast<int>(std::floor(u));
        const double t = u - j;
        if (j >= n) j -= n;
        const double t2 = t * t, t3 = t2 * t;
        const double w0 = (1 - t) * (1 - t) * (1 - t) / 6.0;
        const double w1 = (3 * t3 - 6 * t2 + 4) / 6.0;
        const double w2 = (-3 * t3 + 3 * t2 + 3 * t + 1) / 6.0;
        const double w3 = t3 / 6.0;
        return w0 * coef_[(j - 1 + n) % n] + w1 * coef_[j] + w2 * coef_[(j + 1) % n] +
               w3 * coef_[(j + 2) % n];
    }
    if (x < lo_ || x > hi_) return 0.0;
    const int j = std::clamp(static_cast<int>(std::floor(u)) - 1, 0, n - 4);
    double out = 0.0;
    for (int a = 0; a < 4; ++a) {
        double w = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) w *= (u - (j + b)) / static_cast<double>(a - b);
        out += w * coef_[j + a];
    }
    return out;
}

// ---------------------------------------------------------------------------
// CircleMapModel

namespace {

double circle_distance(double a, double b) {
    double d = a - b;
    d -= std::round(d);
    return std::abs(d);
}

}  // namespace

CircleMapModel::CircleMapModel(const MapHandle& map, int n)
    : map_(map), n_(n), degree_(1), grid_(GridFunction::on(map.space(), n)) {
    require(map.dim() == 1, "transfer operators are one-dimensional");
    const Space& space = map.space();
    if (space.periodic()) degree_ = static_cast<int>(std::lround(map.lift(1.0) - map.lift(0.0)));
    require(degree_ >= 1, "circle map must have positive degree");
    pre_.resize(degree_, n);
    wt_.resize(degree_, n);

    if (map.is_flow()) {
        parallel_for(n, [&](long j) {
            const double y = grid_.x(static_cast<int>(j));
            auto back = try_flow(space, *map.field(), Vec::Constant(1, y), -map.time(), map.opts());
            pre_(0, j) = back ? back->endpoint[0] : y;
            wt_(0, j) = back ? std::exp(back->log_jacobian) : 0.0;
        });
        for (int j = 0; j < n; j += std::max(1, n / 16)) {
            if (wt_(0, j) == 0.0) continue;
            const double fwd = map.apply(Vec::Constant(1, pre_(0, j)))[0];
            const double y = grid_.x(j);
            residual_ = std::max(residual_, space.periodic() ? circle_distance(fwd, y) : std::abs(fwd - y));
        }
        return;
    }

    const double l0 = map.lift(0.0);
    parallel_for(n, [&](long j) {
        const double y = grid_.x(static_cast<int>(j));
        const double base = std::ceil(l0 - y);
        for (int b = 0; b < degree_; ++b) {
            const double target = y + base + b;
            double lo = 0.0, hi = 1.0, x = (target - l0) / degree_;
            bool ok = false;
            for (int it = 0; it < 200; ++it) {
                const double g = map.lift(x) - target;
                if (std::abs(g) < 1e-14 * std::max(1.0, std::abs(target))) {
                    ok = true;
                    break;
                }
                (g < 0 ? lo : hi) = x;
                const double xn = x - g / map.lift_derivative(x);
                x = (xn > lo && xn < hi) ? xn : 0.5 * (lo + hi);
                if (hi - lo < 1e-15) {
                    ok = std::abs(g) < 1e-10;
                    break;
                }
            }
            if (!ok)
                throw BranchInversionFailure("no convergence for branch " + std::to_string(b) +
                                             " at y = " + std::to_string(y));
            pre_(b, j) = x - std::floor(x);
            wt_(b, j) = 1.0 / std::abs(map.lift_derivative(x));
        }
    });
    for (int j = 0; j < n; ++j)
        for (int b = 0; b < degree_; ++b)
            residual_ = std::max(residual_, circle_distance(map.lift(pre_(b, j)), grid_.x(j)));
}

GridFunction apply_transfer(const CircleMapModel& model, const GridFunction& rho) {
    require(rho.same_grid(model.grid()), "density grid does not match the model grid");
    const CubicInterpolant interp(rho);
    GridFunction out = rho;
    for (int j = 0; j < model.size(); ++j) {
        double acc = 0.0;
        for (int b = 0; b < model.degree(); ++b) {
            const double w = model.weight(b, j);
            if (w != 0.0) acc += interp(model.preimage(b, j)) * w;
        }
        out[j] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flow transfer operators

GridFunction apply_transfer_flow(const Space& space, const FieldSpec& field, double t,
                                 const GridFunction& rho, const IntegratorOpts& opts) {
    require(t >= 0.0, "transfer operator time must be nonnegative");
    require(space.dim() == 1 && rho.same_grid(GridFunction::on(space, rho.size())),
            "density grid does not match the space");
    if (t == 0.0) return rho;
    const CubicInterpolant interp(rho);
    GridFunction out = rho;
    parallel_for(rho.size(), [&](long j) {
        const auto back = try_flow(space, field, Vec::Constant(1, rho.x(static_cast<int>(j))), -t, opts);
        out[static_cast<int>(j)] = back ? interp(back->endpoint[0]) * std::exp(back->log_jacobian) : 0.0;
    });
    return out;
}

std::vector<GridFunction> apply_transfer_flow_times(const Space& space, const FieldSpec& field,
                                                    const std::vector<double>& times,
                                                    const GridFunction& rho,
                                                    const IntegratorOpts& opts) {
    require(space.dim() == 1 && rho.same_grid(GridFunction::on(space, rho.size())),
            "density grid does not match the space");
    for (std::size_t i = 0; i < times.size(); ++i)
        require(times[i] >= 0.0 && (i == 0 || times[i] >= times[i - 1]),
                "times must be ascending and nonnegative");
    const CubicInterpolant interp(rho);
    std::vector<GridFunction> out(times.size(), rho);
    parallel_for(rho.size(), [&](long jl) {
        const int j = static_cast<int>(jl);
        double x = rho.x(j), l = 0.0, t = 0.0;
        bool inside = true;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double span = times[i] - t;
            if (inside && span > 0.0) {
                const long steps = step_count(span, opts);
                const double dt = -span / static_cast<double>(steps);
                for (long s = 0; s < steps && inside; ++s) {
                    // RK4 on (x, l) with l' = div F(x)
                    const auto fx = [&](double y) { return field.value(Vec::Constant(1, y))[0]; };
                    const auto dv = [&](double y) { return field.divergence(Vec::Constant(1, y)); };
                    const double k1 = fx(x), m1 = dv(x);
                    const double k2 = fx(x + 0.5 * dt * k1), m2 = dv(x + 0.5 * dt * k1);
                    const double k3 = fx(x + 0.5 * dt * k2), m3 = dv(x + 0.5 * dt * k2);
                    const double k4 = fx(x + dt * k3), m4 = dv(x + dt * k3);
                    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
                    l += dt / 6.0 * (m1 + 2 * m2 + 2 * m3 + m4);
                    if (!space.periodic() && !space.contains(Vec::Constant(1, x), 1e-9)) inside = false;
                }
                t = times[i];
            }
            out[i][j] = inside ? interp(space.periodic() ? x - std::floor(x) : x) * std::exp(l) : 0.0;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Seminorms and spectral radius

std::vector<double> fd_sups(const GridFunction& rho, int k) {
    const int n = rho.size();
    const double h = rho.step();
    std::vector<double> out;
    Eigen::VectorXd d = rho.values();
    for (int j = 0; j <= k; ++j) {
        if (j > 0) {
            if (rho.periodic()) {
                const double first = d[0];
                for (int i = 0; i + 1 < n; ++i) d[i] = d[i + 1] - d[i];
                d[n - 1] = first - d[n - 1];
            } else {
                const auto m = d.size();
                d = (d.tail(m - 1) - d.head(m - 1)).eval();
            }
        }
        out.push_back(d.size() ? d.cwiseAbs().maxCoeff() / std::pow(h, j) : 0.0);
    }
    return out;
}

double ck_seminorm(const GridFunction& rho, int k) {
    require(k >= 0 && k <= 4, "seminorm order must be in [0, 4]");
    require(rho.size() >= (1 << (k + 4)), "grid too coarse for this seminorm order");
    double s = 0.0;
    for (double v : fd_sups(rho, k)) s += v;
    return s;
}

std::vector<GridFunction> spectral_probes(int n, int n_probes, std::uint64_t seed) {
    require(n_probes >= 3, "need at least three probes");
    std::vector<GridFunction> out;
    out.push_back(GridFunction::sample(n, [](double) { return 1.0; }));
    out.push_back(GridFunction::sample(n, [](double x) { return std::sin(kTwoPi * x); }));
    out.push_back(GridFunction::sample(n, [](double x) { return std::cos(kTwoPi * x); }));
    for (int p = 3; p < n_probes; ++p) {
        Philox rng(seed, stream_id(0, static_cast<std::uint32_t>(p)));
        constexpr int modes = 8;
        std::vector<double> a(modes + 1), b(modes + 1);
        for (int m = 1; m <= modes; ++m) {
            a[m] = (2.0 * rng.uniform() - 1.0) / (m * m);
            b[m] = (2.0 * rng.uniform() - 1.0) / (m * m);
        }
        double amp = 0.0;
        for (int m = 1; m <= modes; ++m) amp += std::abs(a[m]) + std::abs(b[m]);
        out.push_back(GridFunction::sample(n, [&](double x) {
            double s = 0.0;
            for (int m = 1; m <= modes; ++m)
                s += a[m] * std::cos(kTwoPi * m * x) + b[m] * std::sin(kTwoPi * m * x);
            return 1.0 + 0.9 * s / amp;
        }));
    }
    return out;
}

namespace {

struct ProbeRun {
    bool collapsed = false;
    std::vector<double> growth, resolution;
    double radius = 0.0;
    std::pair<int, int> window;
    int resolved = 0;
    bool under_resolved = false;
};

ProbeRun run_probe(const CircleMapModel& model, GridFunction rho, int k, int n_iter,
                   const SpectralOpts& opts) {
    ProbeRun r;
    const double h = rho.step();
    double norm = ck_seminorm(rho, k);
    if (!(norm > 1e-300)) {
        r.collapsed = true;
        return r;
    }
    rho.values() /= norm;
    for (int it = 1; it <= n_iter; ++it) {
        rho = apply_transfer(model, rho);
        const auto sups = fd_sups(rho, k + 1);
        double nk = 0.0;
        for (int j = 0; j <= k; ++j) nk += sups[j];
        // A probe in the numerical kernel of the operator has nothing to say
        // about growth; it is dropped rather than renormalized noise.
        if (!(nk > 1e-300) || nk < 1e-12) {
            r.collapsed = true;
            return r;
        }
        r.growth.push_back(nk);
        // Differences at roundoff level carry no scale information.
        const double floor = 1e3 * std::pow(2.0, k) * 1e-16 * sups[0] / std::pow(h, k);
        r.resolution.push_back(sups[k] > floor ? h * sups[k + 1] / sups[k] : 0.0);
        rho.values() /= nk;
    }
    int resolved = 0;
    while (resolved < n_iter && r.resolution[resolved] <= opts.resolution_threshold) ++resolved;
    r.resolved = resolved;
    // The first ratio compares against the raw probe and is skipped.
    int end = resolved, len = std::max(opts.min_window, (resolved - 1) / 2);
    if (resolved < opts.min_window + 1) {
        r.under_resolved = true;
        end = opts.min_window + 1;
        len = opts.min_window;
    }
    r.window = {end - len + 1, end};
    double logsum = 0.0;
    for (int i = r.window.first; i <= r.window.second; ++i) logsum += std::log(r.growth[i - 1]);
    r.radius = std::exp(logsum / len);
    return r;
}

}  // namespace

SpectralEstimate spectral_radius(const CircleMapModel& model, int k, int n_iter, int n_probes,
                                 std::uint64_t seed, const SpectralOpts& opts) {
    require(n_iter >= 20, "spectral_radius needs n_iter >= 20");
    require(model.grid().periodic(), "spectral radius is estimated on the circle");
    const auto probes = spectral_probes(model.size(), n_probes, seed);
    std::vector<ProbeRun> runs(probes.size());
    parallel_for(static_cast<long>(probes.size()),
                 [&](long p) { runs[p] = run_probe(model, probes[p], k, n_iter, opts); });

    SpectralEstimate est;
    est.k = k;
    for (std::size_t p = 0; p < runs.size(); ++p) {
        const auto& r = runs[p];
        est.probe_radii.push_back(r.collapsed ? std::numeric_limits<double>::quiet_NaN() : r.radius);
        if (!r.collapsed && (est.best_probe < 0 || r.radius > est.radius)) {
            est.best_probe = static_cast<int>(p);
            est.radius = r.radius;
        }
    }
    if (est.best_probe < 0) throw Underflow("every probe collapsed under the transfer operator");
    const auto& best = runs[est.best_probe];
    est.growth = best.growth;
    est.resolution = best.resolution;
    est.window = best.window;
    est.resolved_iterations = best.resolved;
    est.under_resolved = best.under_resolved;
    return est;
}

// ---------------------------------------------------------------------------
// Exponential-time average

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_laguerre(int n) {
    require(n >= 1, "quadrature needs at least one node");
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        jac(i, i) = 2.0 * i + 1.0;
        if (i + 1 < n) jac(i, i + 1) = jac(i + 1, i) = i + 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    Eigen::VectorXd w = es.eigenvectors().row(0).transpose().array().square();
    return {es.eigenvalues(), w};
}

GridFunction transfer_exp_average(const Space& space, const FieldSpec& field, double alpha,
                                  const GridFunction& rho, const QuadOpts& quad) {
    require(alpha > 0.0, "alpha must be positive");
    const auto [nodes, weights] = gauss_laguerre(quad.nodes);
    std::vector<double> times, ws;
    for (int i = 0; i < nodes.size(); ++i) {
        if (nodes[i] > 40.0) continue;
        times.push_back(nodes[i] / alpha);
        ws.push_back(weights[i]);
    }
    const auto parts = apply_transfer_flow_times(space, field, times, rho, quad.integrator);
    GridFunction out = rho;
    out.values().setZero();
    for (std::size_t i = 0; i < parts.size(); ++i) out.values() += ws[i] * parts[i].values();
    return out;
}

// ---------------------------------------------------------------------------
// Neumann series

Eigen::RowVectorXd neumann_invariant(const Eigen::MatrixXd& p, const Eigen::RowVectorXd& pi,
                                     const Eigen::MatrixXd& delta) {
    const auto m = pi.size();
    require(p.rows() == m && p.cols() == m && delta.rows() == m && delta.cols() == m,
            "matrix sizes do not match");
    require((delta.array() >= 0.0).all() && (pi.array() >= 0.0).all(),
            "pi and Delta must be nonnegative");
    const Eigen::MatrixXd recon = Eigen::VectorXd::Ones(m) * pi + delta;
    require((recon - p).cwiseAbs().maxCoeff() <= 1e-12, "P differs from 1 pi + Delta");
    const double worst = delta.rowwise().sum().maxCoeff();
    if (worst >= 1.0) throw NotSubstochastic("Delta has a row sum of " + std::to_string(worst));
    Eigen::RowVectorXd v = pi, term = pi;
    for (int it = 0; it < 10'000'000; ++it) {
        term = term * delta;
        v += term;
        if (term.cwiseAbs().sum() < 1e-14) break;
    }
    return v;
}

}  // namespace switchlab
