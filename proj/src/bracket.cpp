#include "switchlab/bracket.hpp"

#include "switchlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace switchlab {

Vec lie_bracket(const FieldSpec& f, const FieldSpec& g, const Vec& x) {
    require(f.dim() == g.dim() && f.dim() == x.size(), "bracket of fields with different dimensions");
    return g.jacobian(x) * f.value(x) - f.jacobian(x) * g.value(x);
}

BracketFamily::BracketFamily(std::vector<FieldSpec> fields, int n) : base_(std::move(fields)), n_(n) {
    require(!base_.empty(), "bracket family needs at least one field");
    require(n >= 0 && n <= 3, "bracket generation must be in 0..3");
    for (const auto& f : base_) require(f.dim() == base_.front().dim(), "fields have different dimensions");
    for (int i = 0; i < static_cast<int>(base_.size()); ++i)
        members_.push_back({0, -1, -1, "F" + std::to_string(i)});
    std::set<std::pair<int, int>> seen;
    for (int g = 1; g <= n; ++g) {
        const int prev = size();
        for (int f = 0; f < static_cast<int>(base_.size()); ++f)
            for (int h = 0; h < prev; ++h) {
                if (f == h || !seen.insert({f, h}).second) continue;
                members_.push_back({g, f, h, "[" + members_[f].label + "," + members_[h].label + "]"});
            }
    }
}

int BracketFamily::size_through(int g) const {
    int c = 0;
    for (const auto& m : members_) c += m.generation <= g;
    return c;
}

Vec BracketFamily::value(int i, const Vec& x) const {
    const Member& m = members_[i];
    if (m.generation == 0) return base_[i].value(x);
    return jacobian(m.right, x) * value(m.left, x) - jacobian(m.left, x) * value(m.right, x);
}

Mat BracketFamily::jacobian(int i, const Vec& x) const {
    if (members_[i].generation == 0) return base_[i].jacobian(x);
    const int d = dim();
    Mat j(d, d);
    for (int k = 0; k < d; ++k) {
        Vec a = x, b = x;
        a[k] += kDiffStep;
        b[k] -= kDiffStep;
        j.col(k) = (value(i, a) - value(i, b)) / (2.0 * kDiffStep);
    }
    return j;
}

Eigen::MatrixXd BracketFamily::evaluate(const Vec& x) const {
    Eigen::MatrixXd out(dim(), size());
    for (int i = 0; i < size(); ++i) out.col(i) = value(i, x);
    return out;
}

BracketRank weak_bracket_rank(const BracketFamily& family, const Vec& x) {
    constexpr double tol = 1e-8;
    const Eigen::MatrixXd cols = family.evaluate(x);
    BracketRank out;
    out.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(cols).singularValues();
    for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) out.rank += out.singular_values[i] > tol;

    // Greedy witness: keep a column when it raises the rank of those kept.
    Eigen::MatrixXd kept(cols.rows(), 0);
    for (int i = 0; i < family.size() && static_cast<int>(out.witness.size()) < out.rank; ++i) {
        Eigen::MatrixXd trial(cols.rows(), kept.cols() + 1);
        trial << kept, cols.col(i);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(trial).singularValues();
        if (sv[sv.size() - 1] > tol && sv.size() == trial.cols()) {
            kept = std::move(trial);
            out.witness.push_back(i);
            out.labels.push_back(family.member(i).label);
        }
    }
    return out;
}

BracketRank weak_bracket_rank(const std::vector<FieldSpec>& fields, int n, const Vec& x) {
    return weak_bracket_rank(BracketFamily(fields, n), x);
}

namespace {

constexpr int kMaxChunks = 1000;

double max_speed(const Characteristics& ch, int grid_res) {
    const GridMask grid(ch.space(), grid_res);
    double v = 0.0;
    for (long c = 0; c < grid.cells(); ++c)
        for (const auto& f : ch.fields()) v = std::max(v, f.value(grid.center(c)).norm());
    return v;
}

}  // namespace

ReachableMask reachable_set(const Characteristics& ch, const Vec& x0, int grid_res, double dt, int max_iter,
                            const ReachOpts& opts) {
    const Space& space = ch.space();
    require(x0.size() == space.dim(), "seed dimension mismatch");
    require(space.periodic() || space.contains(x0), "seed outside the space");
    require(dt > 0.0 && dt <= 0.1, "reachability step dt must lie in (0, 0.1]");
    require(max_iter >= 1, "max_iter must be positive");

    ReachableMask out{GridMask(space, grid_res), x0, 0, false, {}};
    double h = space.extent(0) / grid_res;
    for (int a = 1; a < space.dim(); ++a) h = std::min(h, space.extent(a) / grid_res);
    const double v = max_speed(ch, grid_res);
    IntegratorOpts io;
    io.step = v > 0.0 ? std::min(dt, 0.5 * h / v) : dt;

    auto& mask = out.mask;
    std::vector<Vec> rep(mask.cells());
    const Vec start = space.reduce(x0);
    std::vector<long> frontier{mask.cell_of(start)};
    mask.set(frontier.front());
    rep[frontier.front()] = start;
    while (!frontier.empty()) {
        if (out.iterations == max_iter) {
            out.iteration_cap = true;
            break;
        }
        std::vector<std::vector<std::pair<long, Vec>>> hits(frontier.size());
        parallel_for(
            static_cast<long>(frontier.size()),
            [&](long q) {
                const long home = frontier[q];
                auto& mine = hits[q];
                for (const auto& f : ch.fields()) {
                    Vec y = rep[home];
                    try {
                        for (int chunk = 0; chunk < kMaxChunks; ++chunk) {
                            y = advance_visit(space, f, y, dt, io, [&](const Vec&, const Vec& next, double) {
                                const Vec z = space.reduce(next);
                                const long cell = mask.cell_of(z);
                                if (!mask[cell]) mine.emplace_back(cell, z);
                            });
                            y = space.reduce(y);
                            if (mask.cell_of(y) != home) break;
                        }
                    } catch (const BoundaryExit&) {
                    }
                }
            },
            opts.threads);
        std::vector<long> next;
        for (const auto& hs : hits)
            for (const auto& [cell, z] : hs)
                if (!mask[cell]) {
                    mask.set(cell);
                    rep[cell] = z;
                    next.push_back(cell);
                }
        frontier = std::move(next);
        ++out.iterations;
        out.counts.push_back(mask.count());
    }
    return out;
}

GammaEstimate gamma_estimate(const Characteristics& ch, const std::vector<Vec>& seeds, int grid_res, double dt,
                             int max_iter, const ReachOpts& opts) {
    require(seeds.size() >= 4, "gamma_estimate needs at least four seeds");
    GammaEstimate out{GridMask(ch.space(), grid_res), {}, 0, false, false, false};
    std::vector<std::optional<ReachableMask>> runs(seeds.size());
    ReachOpts inner = opts;
    inner.threads = 1;
    parallel_for(
        static_cast<long>(seeds.size()),
        [&](long i) { runs[i] = reachable_set(ch, seeds[i], grid_res, dt, max_iter, inner); }, opts.threads);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.mask = i == 0 ? runs[i]->mask : out.mask.intersect(runs[i]->mask);
        out.iteration_cap = out.iteration_cap || runs[i]->iteration_cap;
        out.per_seed.push_back(std::move(*runs[i]));
    }
    out.empty_intersection = out.mask.count() == 0;
    out.components = out.mask.components();
    out.connected = out.components == 1;
    return out;
}

std::vector<Vec> spread_seeds(const Space& space, int n) {
    require(n >= 1, "need at least one seed");
    auto halton = [](int i, int base) {
        double f = 1.0, r = 0.0;
        for (; i > 0; i /= base) {
            f /= base;
            r += f * (i % base);
        }
        return r;
    };
    const double margin = space.periodic() ? 0.0 : 1.0 / 64;
    std::vector<Vec> out;
    for (int i = 1; i <= n; ++i) {
        Vec x(space.dim());
        for (int a = 0; a < space.dim(); ++a) {
            const double u = margin + (1.0 - 2.0 * margin) * halton(i, a == 0 ? 2 : 3);
            x[a] = space.lower()[a] + u * space.extent(a);
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace switchlab
