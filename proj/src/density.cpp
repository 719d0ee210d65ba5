#include "switchlab/density.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace switchlab {

namespace {

EmpiricalDensity::Levels levels_of(const OccupationAccumulator& acc, const std::vector<int>& ladder) {
    const double total = acc.total();
    if (!(total > 0.0)) throw EmptyAccumulator("accumulator holds no occupation weight");
    const int d = acc.dim();
    EmpiricalDensity::Levels out;
    for (int n : ladder) {
        const int f = acc.bins() / n;
        double vol = 1.0;
        for (int a = 0; a < d; ++a) vol *= acc.space().extent(a) / n;
        const long cells = d == 1 ? n : static_cast<long>(n) * n;
        std::vector<std::vector<double>> lv(acc.modes(), std::vector<double>(cells, 0.0));
        for (int m = 0; m < acc.modes(); ++m) {
            const auto& h = acc.hist(m);
            for (long c = 0; c < acc.cells(); ++c) {
                const long cc = d == 1 ? c / f : (c % acc.bins()) / f + n * ((c / acc.bins()) / f);
                lv[m][cc] += h[c];
            }
            for (double& v : lv[m]) v /= total * vol;
        }
        out.push_back(std::move(lv));
    }
    return out;
}

// Cell indices along one axis whose centres lie in [lo, hi], in order; wraps
// on a torus when lo > hi.
std::vector<int> axis_cells(const Space& space, int axis, int n, double lo, double hi) {
    const double len = space.extent(axis), w = len / n, base = space.lower()[axis];
    std::vector<int> first, second;
    if (space.periodic()) {
        if (hi - lo >= len) {
            lo = base;
            hi = base + len;
        } else {
            lo = base + std::fmod(std::fmod(lo - base, len) + len, len);
            hi = base + std::fmod(std::fmod(hi - base, len) + len, len);
        }
    }
    for (int i = 0; i < n; ++i) {
        const double c = base + (i + 0.5) * w;
        if (lo <= hi) {
            if (c >= lo && c <= hi) first.push_back(i);
        } else {
            if (c >= lo) first.push_back(i);
            else if (c <= hi) second.push_back(i);
        }
    }
    if (lo > hi && !space.periodic()) return {};
    first.insert(first.end(), second.begin(), second.end());
    return first;
}

// Profiles along diff_axis of one mode's density at one level.
std::vector<std::vector<double>> profiles(const std::vector<double>& rho, int n, int dim,
                                          const Region& r, const std::vector<int>& along,
                                          const std::vector<int>& across) {
    std::vector<std::vector<double>> out;
    auto at = [&](int i_diff, int i_other) {
        const int i = r.diff_axis == 0 ? i_diff : i_other;
        const int j = r.diff_axis == 0 ? i_other : i_diff;
        return rho[i + static_cast<long>(n) * j];
    };
    if (dim == 1) {
        std::vector<double> p;
        for (int i : along) p.push_back(rho[i]);
        out.push_back(std::move(p));
    } else if (r.pool_axis >= 0) {
        std::vector<double> p;
        for (int i : along) {
            double s = 0.0;
            for (int j : across) s += at(i, j);
            p.push_back(s / across.size());
        }
        out.push_back(std::move(p));
    } else {
        for (int j : across) {
            std::vector<double> p;
            for (int i : along) p.push_back(at(i, j));
            out.push_back(std::move(p));
        }
    }
    return out;
}

// Weights c with sum_j c_j f(j) = h^k f^(k) for polynomials of degree k.
std::vector<double> stencil(int k, int width) {
    if (width == k + 1) {
        std::vector<double> c(k + 1);
        for (int j = 0; j <= k; ++j) c[j] = ((k - j) % 2 ? -1.0 : 1.0) * std::tgamma(k + 1.0) /
                                           (std::tgamma(j + 1.0) * std::tgamma(k - j + 1.0));
        return c;
    }
    Eigen::MatrixXd v(width, k + 1);
    const double mid = 0.5 * (width - 1);
    for (int j = 0; j < width; ++j)
        for (int p = 0; p <= k; ++p) v(j, p) = std::pow(j - mid, p);
    const Eigen::MatrixXd pinv = v.completeOrthogonalDecomposition().pseudoInverse();
    std::vector<double> c(width);
    for (int j = 0; j < width; ++j) c[j] = pinv(k, j) * std::tgamma(k + 1.0);
    return c;
}

std::vector<double> apply_stencil(const std::vector<double>& p, const std::vector<double>& c, bool cyclic) {
    const int w = static_cast<int>(c.size()), n = static_cast<int>(p.size());
    std::vector<double> out;
    for (int i = 0; i < (cyclic ? n : n - w + 1); ++i) {
        double s = 0.0;
        for (int j = 0; j < w; ++j) s += c[j] * p[(i + j) % n];
        out.push_back(s);
    }
    return out;
}

}  // namespace

long EmpiricalDensity::cell_of(int level, const Vec& x) const {
    const int n = ladder[level];
    long idx = 0, stride = 1;
    for (int a = 0; a < dim(); ++a) {
        long i = static_cast<long>(std::floor((x[a] - space.lower()[a]) / cell_width(level, a)));
        if (space.periodic()) i = ((i % n) + n) % n;
        else i = std::clamp<long>(i, 0, n - 1);
        idx += stride * i;
        stride *= n;
    }
    return idx;
}

double EmpiricalDensity::mode_weight(int mode) const {
    double vol = 1.0;
    for (int a = 0; a < dim(); ++a) vol *= cell_width(0, a);
    double s = 0.0;
    for (double v : rho[0][mode]) s += v;
    return s * vol;
}

EmpiricalDensity estimate_density(const OccupationAccumulator& acc, const std::vector<int>& ladder,
                                  const std::vector<OccupationAccumulator>& replicates,
                                  std::string scenario) {
    require(!ladder.empty() && ladder.front() >= 1, "ladder needs at least one positive resolution");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        require(ladder[i] == 2 * ladder[i - 1], "ladder resolutions must double");
    require(acc.bins() % ladder.back() == 0, "finest ladder resolution must divide the accumulator bins");
    EmpiricalDensity d;
    d.space = acc.space();
    d.modes = acc.modes();
    d.ladder = ladder;
    d.rho = levels_of(acc, ladder);
    d.samples = acc.total();
    d.scenario = std::move(scenario);
    for (const auto& r : replicates) {
        require(r.bins() == acc.bins() && r.modes() == acc.modes(), "replicate layout differs");
        if (r.total() > 0.0) d.replicates.push_back(levels_of(r, ladder));
    }
    return d;
}

EmpiricalDensity estimate_density(const McResult& mc, const std::vector<int>& ladder, std::string scenario) {
    return estimate_density(mc.merged, ladder, mc.chains, std::move(scenario));
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::BoundedStable: return "BoundedStable";
        case Verdict::Diverging: return "Diverging";
        case Verdict::Inconclusive: break;
    }
    return "Inconclusive";
}

SmoothnessReport smoothness_probe(const EmpiricalDensity& d, int k, const Region& region,
                                  const SmoothnessOpts& opts) {
    require(k >= 0 && k <= 3, "smoothness order must be in 0..3");
    require(region.lower.size() == d.dim() && region.upper.size() == d.dim(), "region dimension mismatch");
    require(region.diff_axis >= 0 && region.diff_axis < d.dim(), "diff_axis out of range");
    require(opts.fit_width == 0 || opts.fit_width >= k + 1, "fit_width must be at least k + 1");
    const int width = opts.fit_width == 0 ? k + 1 : opts.fit_width;
    const auto coef = stencil(k, width);
    const int other = 1 - region.diff_axis;
    if (d.dim() == 2) require(region.pool_axis < 0 || region.pool_axis == other, "pool_axis must differ from diff_axis");

    SmoothnessReport rep;
    rep.k = k;
    rep.resolutions = d.ladder;
    rep.mode_sups.assign(d.modes, {});
    rep.mode_noise.assign(d.modes, {});
    std::vector<double> scale(d.modes, 0.0);

    // A region spanning a whole periodic axis has no edges: stencils wrap.
    const bool cyclic = d.space.periodic() &&
                        region.upper[region.diff_axis] - region.lower[region.diff_axis] >=
                            d.space.extent(region.diff_axis) - 1e-12;
    double span_lo = 0.0, span_hi = 0.0;
    for (int l = 0; l < d.levels(); ++l) {
        const int n = d.ladder[l];
        const auto along = axis_cells(d.space, region.diff_axis, n, region.lower[region.diff_axis],
                                      region.upper[region.diff_axis]);
        std::vector<int> across{0};
        if (d.dim() == 2) across = axis_cells(d.space, other, n, region.lower[other], region.upper[other]);
        if (along.empty() || across.empty()) throw RegionEmpty("region contains no cells at resolution " + std::to_string(n));
        if (static_cast<int>(along.size()) < width)
            throw RegionEmpty("region is narrower than a difference stencil of order " + std::to_string(k) +
                              " at resolution " + std::to_string(n));
        const double h = d.cell_width(l, region.diff_axis);
        const double hk = std::pow(h, k);

        // Stencil q covers along[q..q+width-1]; its centre in unwrapped coordinates.
        const double first = d.space.lower()[region.diff_axis] + (along[0] + 0.5) * h;
        const int n_st = static_cast<int>(along.size()) - (cyclic ? 0 : width - 1);
        auto centre = [&](int q) { return first + (q + 0.5 * (width - 1)) * h; };
        if (l == 0) {
            span_lo = centre(0);
            span_hi = centre(n_st - 1);
        }
        std::vector<char> keep(n_st, 1);
        for (int q = 0; q < n_st && !cyclic; ++q) {
            const double c = centre(q);
            if (!region.lower_is_boundary && c < span_lo - 1e-12) keep[q] = 0;
            if (!region.upper_is_boundary && c > span_hi + 1e-12) keep[q] = 0;
        }

        for (int m = 0; m < d.modes; ++m) {
            const auto prof = profiles(d.rho[l][m], n, d.dim(), region, along, across);
            double sup = 0.0;
            std::vector<std::vector<double>> diffs;
            for (const auto& p : prof) {
                for (double v : p) scale[m] = std::max(scale[m], std::abs(v));
                diffs.push_back(apply_stencil(p, coef, cyclic));
                for (int q = 0; q < n_st; ++q)
                    if (keep[q]) sup = std::max(sup, std::abs(diffs.back()[q]));
            }
            rep.mode_sups[m].push_back(sup / hk);

            double noise = std::numeric_limits<double>::quiet_NaN();
            const auto nr = d.replicates.size();
            if (nr >= 2) {
                std::vector<std::vector<std::vector<double>>> rd;
                for (const auto& r : d.replicates) {
                    std::vector<std::vector<double>> one;
                    for (const auto& p : profiles(r[l][m], n, d.dim(), region, along, across))
                        one.push_back(apply_stencil(p, coef, cyclic));
                    rd.push_back(std::move(one));
                }
                noise = 0.0;
                for (std::size_t line = 0; line < diffs.size(); ++line)
                    for (int q = 0; q < n_st; ++q) {
                        if (!keep[q]) continue;
                        double mean = 0.0, sq = 0.0;
                        for (const auto& one : rd) mean += one[line][q];
                        mean /= nr;
                        for (const auto& one : rd) sq += (one[line][q] - mean) * (one[line][q] - mean);
                        noise = std::max(noise, std::sqrt(sq / (nr - 1) / nr));
                    }
                noise /= hk;
            }
            rep.mode_noise[m].push_back(noise);
        }
    }

    for (int l = 0; l < d.levels(); ++l) {
        double s = 0.0;
        for (int m = 0; m < d.modes; ++m) s = std::max(s, rep.mode_sups[m][l]);
        rep.sups.push_back(s);
        if (l > 0) rep.ratios.push_back(rep.sups[l - 1] > 0.0 ? s / rep.sups[l - 1] : std::numeric_limits<double>::quiet_NaN());
    }

    bool any_diverging = false, all_stable = true;
    std::string why;
    for (int m = 0; m < d.modes; ++m) {
        const auto& s = rep.mode_sups[m];
        bool negligible = true, resolved = true;
        for (int l = 0; l < d.levels(); ++l) {
            const double hk = std::pow(d.cell_width(l, region.diff_axis), k);
            if (s[l] * hk > 1e-9 * scale[m]) negligible = false;
            const double nz = rep.mode_noise[m][l];
            if (!std::isnan(nz) && s[l] < opts.min_snr * nz) resolved = false;
        }
        if (negligible) continue;
        if (!resolved) {
            all_stable = false;
            why += "mode " + std::to_string(m) + " noise-dominated; ";
            continue;
        }
        bool grows = true, flat = true;
        for (int l = 1; l < d.levels(); ++l) {
            const double r = s[l] / s[l - 1];
            if (!(r >= opts.diverging_ratio)) grows = false;
            if (!(r <= opts.stable_ratio)) flat = false;
        }
        if (d.levels() < 2) grows = flat = false;
        if (grows) {
            any_diverging = true;
            why += "mode " + std::to_string(m) + " grows at every refinement; ";
        }
        if (!flat) all_stable = false;
    }
    if (any_diverging) rep.verdict = Verdict::Diverging;
    else if (all_stable && d.levels() >= 2) rep.verdict = Verdict::BoundedStable;
    else rep.verdict = Verdict::Inconclusive;
    if (why.empty()) why = rep.verdict == Verdict::BoundedStable ? "all modes flat under refinement" : "growth between thresholds";
    else why.resize(why.size() - 2);
    rep.reason = why;
    return rep;
}

BlowupReport blowup_at(const EmpiricalDensity& d, const Vec& p, int mode, double growth) {
    require(mode >= 0 && mode < d.modes, "mode out of range");
    require(d.space.periodic() || d.space.contains(p, 1e-12), "point outside the space");
    BlowupReport rep;
    for (int l = 0; l < d.levels(); ++l) {
        const int n = d.ladder[l];
        std::vector<int> idx[2];
        for (int a = 0; a < d.dim(); ++a) {
            const double u = (p[a] - d.space.lower()[a]) / d.cell_width(l, a);
            const int i = static_cast<int>(std::floor(u));
            idx[a].push_back(i);
            if (std::abs(u - std::round(u)) < 1e-9) idx[a].push_back(static_cast<int>(std::round(u)) - 1);
        }
        if (d.dim() == 1) idx[1] = {0};
        double v = 0.0;
        for (int i : idx[0])
            for (int j : idx[1]) {
                int ii = i, jj = j;
                if (d.space.periodic()) {
                    ii = ((ii % n) + n) % n;
                    jj = ((jj % n) + n) % n;
                } else if (ii < 0 || ii >= n || jj < 0 || (d.dim() == 2 && jj >= n)) {
                    continue;
                }
                v = std::max(v, d.rho[l][mode][ii + static_cast<long>(n) * jj]);
            }
        rep.values.push_back(v);
        if (l > 0) rep.ratios.push_back(rep.values[l - 1] > 0.0 ? v / rep.values[l - 1] : 0.0);
    }
    const int L = d.levels();
    if (L >= 2 && rep.values.front() > 0.0) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int l = 0; l < L; ++l) {
            const double y = std::log2(std::max(rep.values[l], 1e-300));
            sx += l;
            sy += y;
            sxx += double(l) * l;
            sxy += l * y;
        }
        rep.exponent = (L * sxy - sx * sy) / (L * sxx - sx * sx);
    }
    rep.flagged = !rep.ratios.empty() &&
                  std::all_of(rep.ratios.begin(), rep.ratios.end(), [&](double r) { return r >= growth; });
    return rep;
}

SupportEstimate support_estimate(const EmpiricalDensity& d, double threshold, int level) {
    require(threshold > 0.0, "support threshold must be positive");
    if (level < 0) level = d.levels() - 1;
    require(level < d.levels(), "level out of range");
    const int n = d.ladder[level];
    double vol = 1.0;
    for (int a = 0; a < d.dim(); ++a) vol *= d.cell_width(level, a);
    SupportEstimate out{level, {}, GridMask(d.space, n), 0.0};
    for (int m = 0; m < d.modes; ++m) {
        GridMask mask(d.space, n);
        const auto& r = d.rho[level][m];
        double w = 0.0;
        for (double v : r) w += v * vol;
        if (w > 0.0)
            for (long c = 0; c < mask.cells(); ++c)
                if (r[c] * vol / w > threshold) {
                    mask.set(c);
                    out.combined.set(c);
                }
        out.masks.push_back(std::move(mask));
    }
    const double u = static_cast<double>(out.combined.count());
    for (int i = 0; i < d.modes; ++i)
        for (int j = i + 1; j < d.modes; ++j)
            if (u > 0) out.mode_disagreement = std::max(out.mode_disagreement, out.masks[i].symmetric_difference(out.masks[j]) / u);
    return out;
}

void write_density_csv(std::ostream& os, const EmpiricalDensity& d) {
    os.precision(10);
    os << "mode";
    for (int a = 0; a < d.dim(); ++a) os << ",x" << a;
    for (int n : d.ladder) os << ",rho_" << n;
    os << '\n';
    const int fine = d.levels() - 1;
    const GridMask grid(d.space, d.ladder[fine]);
    for (int m = 0; m < d.modes; ++m)
        for (long c = 0; c < grid.cells(); ++c) {
            const Vec x = grid.center(c);
            os << m;
            for (int a = 0; a < d.dim(); ++a) os << ',' << x[a];
            for (int l = 0; l < d.levels(); ++l) os << ',' << d.rho[l][m][d.cell_of(l, x)];
            os << '\n';
        }
}

}  // namespace switchlab
