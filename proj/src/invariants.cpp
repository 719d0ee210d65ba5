#include "switchlab/invariants.hpp"
#include "switchlab/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace switchlab {

namespace {

double largest_singular_value(const Mat& m) {
    if (m.size() == 1) return std::abs(m(0, 0));
    const double f2 = m.squaredNorm();
    const double det = m.determinant();
    const double disc = std::max(0.0, f2 * f2 - 4.0 * det * det);
    return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
}

Vec torus_delta(const Space& space, const Vec& a, const Vec& b) {
    Vec d = a - b;
    if (space.periodic())
        for (Eigen::Index i = 0; i < d.size(); ++i) d[i] -= std::round(d[i]);
    return d;
}

}  // namespace

double smallest_singular_value(const Mat& m) {
    if (m.size() == 1) return std::abs(m(0, 0));
    const double smax = largest_singular_value(m);
    return smax == 0.0 ? 0.0 : std::abs(m.determinant()) / smax;
}

double expansion_constant(const MapHandle& map, const Vec& x) {
    return smallest_singular_value(map.tangent(x));
}

std::vector<Vec> evaluation_grid(const Space& space, int grid_res) {
    require(grid_res >= 1, "grid resolution must be positive");
    std::vector<Vec> pts;
    const int d = space.dim();
    const long total = d == 1 ? grid_res : static_cast<long>(grid_res) * grid_res;
    pts.reserve(total);
    for (long idx = 0; idx < total; ++idx) {
        Vec x(d);
        long rem = idx;
        for (int a = 0; a < d; ++a) {
            const long j = rem % grid_res;
            rem /= grid_res;
            const double frac = space.periodic() ? static_cast<double>(j) / grid_res
                                                 : (j + 0.5) / grid_res;
            x[a] = space.lower()[a] + space.extent(a) * frac;
        }
        pts.push_back(x);
    }
    return pts;
}

std::vector<RateEstimate> expansion_rates(const MapHandle& map, int k_max, int grid_res,
                                          int n_max, int threads) {
    require(n_max >= 1, "n_max must be at least 1");
    require(k_max >= 0, "k must be nonnegative");
    require(grid_res >= 8, "grid resolution must be at least 8 per dimension");
    const auto pts = evaluation_grid(map.space(), grid_res);
    const int n_out = k_max + 2;
    // per point, per n: log J and log E of map^n
    std::vector<double> log_j(pts.size() * n_max), log_e(pts.size() * n_max);
    const int d = map.dim();

    parallel_for(static_cast<long>(pts.size()), [&](long p) {
        Vec y = pts[p];
        Mat m = Mat::Identity(d, d);
        double scale = 0.0, lj = 0.0;
        for (int n = 0; n < n_max; ++n) {
            const auto st = map.step(y);
            if (!std::isfinite(st.log_jacobian) || st.tangent.determinant() == 0.0)
                throw Degenerate("singular tangent along the orbit of a grid point");
            m = st.tangent * m;
            const double s = m.cwiseAbs().maxCoeff();
            m /= s;
            scale += std::log(s);
            lj += st.log_jacobian;
            y = st.image;
            const double lmax = scale + std::log(largest_singular_value(m));
            log_j[p * n_max + n] = lj;
            log_e[p * n_max + n] = d == 1 ? lmax : lj - lmax;
        }
    }, threads);

    std::vector<RateEstimate> out(n_out);
    for (int k = 0; k < n_out; ++k) {
        auto& r = out[k];
        r.n_used = n_max;
        r.grid_resolution = grid_res;
        r.per_n_values.resize(n_max);
        for (int n = 0; n < n_max; ++n) {
            double lo = std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < pts.size(); ++p) {
                const double v = k <= k_max ? log_j[p * n_max + n] + k * log_e[p * n_max + n]
                                            : log_e[p * n_max + n];
                lo = std::min(lo, v);
            }
            r.per_n_values[n] = lo / (n + 1);
        }
        r.value = r.per_n_values.back();
        r.fekete_bound = *std::max_element(r.per_n_values.begin(), r.per_n_values.end());
    }
    return out;
}

RateEstimate expansion_rate(const MapHandle& map, int grid_res, int n_max, int threads) {
    return expansion_rates(map, 0, grid_res, n_max, threads).back();
}

RateEstimate expansion_volume_rate(const MapHandle& map, int k, int grid_res, int n_max,
                                   int threads) {
    return expansion_rates(map, k, grid_res, n_max, threads)[k];
}

LyapunovSpectrum lyapunov_spectrum(const MapHandle& map, const Vec& x0, int n, int burn_in,
                                   double threshold) {
    require(n >= 100, "lyapunov_spectrum needs n >= 100");
    require(burn_in >= 0, "burn_in must be nonnegative");
    const int d = map.dim();
    LyapunovSpectrum out;
    out.start = x0;
    out.n_iterates = n;
    out.log_accumulators.assign(d, 0.0);

    Vec y = x0;
    Mat q = Mat::Identity(d, d);
    auto qr_step = [&](const Mat& t, std::vector<double>* acc) {
        Eigen::HouseholderQR<Mat> qr(t * q);
        const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        q = qr.householderQ();
        for (int i = 0; i < d; ++i) {
            if (r(i, i) < 0.0) q.col(i) *= -1.0;
            if (acc) (*acc)[i] += std::log(std::abs(r(i, i)));
        }
    };

    for (int i = 0; i < burn_in; ++i) {
        const auto st = map.step(y);
        qr_step(st.tangent, nullptr);
        y = st.image;
    }

    const int windows = 10;
    const int wlen = n / windows;
    std::vector<double> wacc(d, 0.0);
    double lj = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto st = map.step(y);
        std::vector<double> before = out.log_accumulators;
        qr_step(st.tangent, &out.log_accumulators);
        for (int j = 0; j < d; ++j) wacc[j] += out.log_accumulators[j] - before[j];
        lj += st.log_jacobian;
        y = st.image;
        if ((i + 1) % wlen == 0 && static_cast<int>(out.window_means.size()) < windows) {
            std::vector<double> m(d);
            for (int j = 0; j < d; ++j) m[j] = wacc[j] / wlen;
            std::sort(m.begin(), m.end());
            out.window_means.push_back(m);
            std::fill(wacc.begin(), wacc.end(), 0.0);
        }
    }
    out.exponents.resize(d);
    for (int j = 0; j < d; ++j) out.exponents[j] = out.log_accumulators[j] / n;
    std::sort(out.exponents.begin(), out.exponents.end());
    out.log_jacobian_rate = lj / n;
    const auto& w = out.window_means;
    if (w.size() >= 2)
        for (int j = 0; j < d; ++j)
            if (std::abs(w[w.size() - 1][j] - w[w.size() - 2][j]) > threshold) out.non_convergence = true;
    return out;
}

// ---------------------------------------------------------------------------
// Orbits

namespace {

struct Return {
    double time;
    Vec endpoint;  // unwrapped
};

// First crossing of the section level (mod 1 on tori) in the starting direction.
Return section_return(const Space& space, const FieldSpec& field, const Vec& start, int axis,
                      const OrbitSearchOpts& opts) {
    const double c = start[axis];
    const double dir = field.value(start)[axis] > 0.0 ? 1.0 : -1.0;
    const double h = opts.integrator.step;
    const long max_steps = static_cast<long>(std::ceil(opts.horizon / h));
    Vec x = start;
    double t = 0.0;
    for (long i = 0; i < max_steps; ++i) {
        const Vec next = rk4_state_step(field, x, h);
        if (!space.periodic() && !space.contains(next, 1e-9))
            throw BoundaryExit("orbit search left the trapping box");
        const double a = dir * (x[axis] - c), b = dir * (next[axis] - c);
        double level = std::numeric_limits<double>::quiet_NaN();
        if (space.periodic()) {
            if (std::floor(b) > std::floor(a)) level = c + dir * std::floor(b);
        } else if (a < 0.0 && b >= 0.0) {
            level = c;
        }
        if (!std::isnan(level)) {
            double lo = 0.0, hi = h;
            while (hi - lo > 1e-12) {
                const double mid = 0.5 * (lo + hi);
                const double v = dir * (rk4_state_step(field, x, mid)[axis] - level);
                (v < 0.0 ? lo : hi) = mid;
            }
            const double tau = 0.5 * (lo + hi);
            return {t + tau, rk4_state_step(field, x, tau)};
        }
        x = next;
        t += h;
    }
    throw NoSectionCrossing("no return to the section within time " + std::to_string(opts.horizon));
}

std::vector<double> floquet_exponents(const Mat& monodromy, double period) {
    std::vector<double> out;
    if (monodromy.size() == 1) {
        out.push_back(std::log(std::abs(monodromy(0, 0))) / period);
    } else {
        Eigen::EigenSolver<Eigen::Matrix2d> es{Eigen::Matrix2d(monodromy)};
        for (int i = 0; i < 2; ++i) out.push_back(std::log(std::abs(es.eigenvalues()[i])) / period);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<Vec> newton_equilibrium(const Space& space, const FieldSpec& field, Vec x,
                                      const OrbitSearchOpts& opts) {
    for (int it = 0; it < opts.newton_iters; ++it) {
        const Vec f = field.value(x);
        if (f.norm() < opts.equilibrium_tol) return space.reduce(x);
        const Mat j = field.jacobian(x);
        if (std::abs(j.determinant()) < 1e-14) return std::nullopt;
        x -= j.partialPivLu().solve(f);
        if (!x.allFinite() || (!space.periodic() && !space.contains(x))) return std::nullopt;
    }
    if (field.value(x).norm() < opts.equilibrium_tol) return space.reduce(x);
    return std::nullopt;
}

std::optional<OrbitRecord> newton_orbit(const Space& space, const FieldSpec& field,
                                        const OrbitSeed& seed, const OrbitSearchOpts& opts) {
    const int d = space.dim();
    const int axis = seed.axis;
    require(axis >= 0 && axis < d, "section axis out of range");
    if (field.value(seed.point)[axis] == 0.0)
        throw NoSectionCrossing("field is tangent to the section at the seed");
    Vec start = seed.point;
    Return ret = section_return(space, field, start, axis, opts);
    if (d == 2) {
        const int other = 1 - axis;
        bool converged = false;
        for (int it = 0; it < opts.newton_iters; ++it) {
            double g = ret.endpoint[other] - start[other];
            if (space.periodic()) g -= std::round(g);
            if (std::abs(g) < opts.return_tol) {
                converged = true;
                break;
            }
            const auto fr = flow_lift(space, field, start, ret.time, opts.integrator);
            const Vec fe = field.value(fr.endpoint);
            const double dtdy = -fr.tangent(axis, other) / fe[axis];
            const double dg = fr.tangent(other, other) + fe[other] * dtdy - 1.0;
            if (std::abs(dg) < 1e-12) return std::nullopt;
            const double stepy = g / dg;
            start[other] -= std::clamp(stepy, -0.25, 0.25);
            if (!space.periodic() && !space.contains(start)) return std::nullopt;
            ret = section_return(space, field, start, axis, opts);
        }
        if (!converged) return std::nullopt;
    }
    OrbitRecord rec;
    rec.kind = OrbitKind::PeriodicOrbit;
    rec.anchor = space.reduce(start);
    rec.period = ret.time;
    rec.section_axis = axis;
    const auto fr = flow_lift(space, field, rec.anchor, rec.period, opts.integrator);
    rec.floquet = floquet_exponents(fr.tangent, rec.period);
    rec.stable = rec.floquet.front() < -1e-6;
    return rec;
}

bool same_orbit(const Space& space, const FieldSpec& field, const OrbitRecord& a,
                const OrbitRecord& b, const IntegratorOpts& opts) {
    if (a.kind != b.kind) return false;
    if (a.kind == OrbitKind::Equilibrium) return torus_delta(space, a.anchor, b.anchor).norm() < 1e-8;
    if (std::abs(a.period - b.period) > 1e-6 * std::max(1.0, a.period)) return false;
    double speed = 0.0;
    double best = std::numeric_limits<double>::infinity();
    advance_visit(space, field, a.anchor, a.period, opts, [&](const Vec&, const Vec& nx, double) {
        speed = std::max(speed, field.value(nx).norm());
        best = std::min(best, torus_delta(space, nx, b.anchor).norm());
    });
    return best < 2.0 * opts.step * speed + 1e-7;
}

}  // namespace

std::vector<OrbitRecord> find_periodic_orbits(const Space& space, const FieldSpec& field,
                                              const std::vector<OrbitSeed>& seeds,
                                              const OrbitSearchOpts& opts) {
    require(field.dim() == space.dim(), "field dimension does not match the space");
    std::vector<OrbitRecord> found;
    auto add = [&](OrbitRecord r) {
        for (const auto& o : found)
            if (same_orbit(space, field, o, r, opts.integrator)) return;
        found.push_back(std::move(r));
    };
    for (const auto& seed : seeds) {
        require(seed.point.size() == space.dim(), "seed dimension does not match the space");
        if (auto eq = newton_equilibrium(space, field, seed.point, opts)) {
            OrbitRecord r;
            r.kind = OrbitKind::Equilibrium;
            r.anchor = *eq;
            const Mat j = field.jacobian(*eq);
            if (j.size() == 1) {
                r.floquet = {j(0, 0)};
            } else {
                Eigen::EigenSolver<Eigen::Matrix2d> es{Eigen::Matrix2d(j), false};
                r.floquet = {es.eigenvalues()[0].real(), es.eigenvalues()[1].real()};
                std::sort(r.floquet.begin(), r.floquet.end());
            }
            r.stable = r.floquet.front() < -1e-6;
            add(std::move(r));
            continue;
        }
        if (field.value(seed.point).norm() < opts.equilibrium_tol) continue;
        if (auto orb = newton_orbit(space, field, seed, opts)) add(std::move(*orb));
    }
    return found;
}

ErgplanReport ergplan_check(const Space& space, const FieldSpec& field, const OrbitRecord& orbit,
                            const IntegratorOpts& opts) {
    const double t = orbit.kind == OrbitKind::Equilibrium ? 1.0 : orbit.period;
    const auto fr = flow_lift(space, field, orbit.anchor, t, opts);
    ErgplanReport rep;
    rep.log_jacobian_rate = fr.log_jacobian / t;
    for (double l : orbit.floquet) rep.floquet_sum += l;
    rep.difference = std::abs(rep.log_jacobian_rate - rep.floquet_sum);
    return rep;
}

}  // namespace switchlab
