#include "doctest.h"
#include "switchlab/density.hpp"
#include "switchlab/mask.hpp"
#include "telegraph_oracle.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <string>

using namespace switchlab;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// Exact cell masses of a law on [0, 1] given by its cdf.
OccupationAccumulator from_cdf(int bins, const std::vector<std::function<double(double)>>& cdfs) {
    OccupationAccumulator acc(Space::box(v1(0.0), v1(1.0)), static_cast<int>(cdfs.size()), bins);
    for (std::size_t m = 0; m < cdfs.size(); ++m)
        for (int i = 0; i < bins; ++i)
            acc.add(static_cast<int>(m), i, cdfs[m](double(i + 1) / bins) - cdfs[m](double(i) / bins));
    return acc;
}

// Density proportional to x^beta on [0, 1].
std::function<double(double)> power_cdf(double beta) {
    return [beta](double x) { return std::pow(x, beta + 1); };
}

Region left_half() { return Region{v1(0.0), v1(0.5), 0, -1, true, false}; }

}  // namespace

TEST_CASE("ladder levels integrate to mode weights") {
    auto acc = from_cdf(256, {power_cdf(0.0), power_cdf(2.0)});
    const auto d = estimate_density(acc, {32, 64, 128}, {}, "two-law");
    CHECK(d.levels() == 3);
    CHECK(d.scenario == "two-law");
    for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 2; ++m) {
            double s = 0.0;
            for (double v : d.rho[l][m]) s += v * d.cell_width(l, 0);
            CHECK(s == doctest::Approx(0.5).epsilon(1e-12));
        }
    CHECK(d.mode_weight(1) == doctest::Approx(0.5));
    CHECK(d.rho[2][0][5] == doctest::Approx(0.5));
    CHECK_THROWS_AS(estimate_density(acc, {32, 48}), InvalidArgument);
    CHECK_THROWS_AS(estimate_density(acc, {3, 6}), InvalidArgument);
}

TEST_CASE("empty accumulator and empty region") {
    OccupationAccumulator empty(Space::torus1(), 2, 64);
    CHECK_THROWS_AS(estimate_density(empty, {16, 32, 64}), EmptyAccumulator);

    auto acc = from_cdf(128, {power_cdf(0.0)});
    const auto d = estimate_density(acc, {16, 32, 64});
    CHECK_THROWS_AS(smoothness_probe(d, 0, Region{v1(0.2), v1(0.21)}), RegionEmpty);
    CHECK_THROWS_AS(smoothness_probe(d, 3, Region{v1(0.0), v1(0.12)}), RegionEmpty);
    CHECK_THROWS_AS(smoothness_probe(d, 4, Region{v1(0.0), v1(1.0)}), InvalidArgument);
}

TEST_CASE("uniform density is stable at every order") {
    auto acc = from_cdf(256, {power_cdf(0.0), power_cdf(0.0)});
    const auto d = estimate_density(acc, {32, 64, 128});
    for (int k = 0; k <= 3; ++k) {
        const auto rep = smoothness_probe(d, k, Region{v1(0.0), v1(1.0)});
        CHECK(rep.verdict == Verdict::BoundedStable);
        CHECK(rep.ratios.size() == 2);
    }
}

TEST_CASE("power laws at a boundary diverge at the predicted order") {
    // x^beta has a bounded k-th derivative near 0 exactly when k <= beta.
    struct Case {
        double beta;
        int diverging;
    };
    for (const Case c : {Case{-0.5, 0}, Case{0.5, 1}, Case{1.5, 2}, Case{2.5, 3}}) {
        auto acc = from_cdf(512, {power_cdf(c.beta)});
        const auto d = estimate_density(acc, {64, 128, 256});
        for (int k = 0; k <= 3; ++k) {
            const auto rep = smoothness_probe(d, k, left_half());
            CAPTURE(c.beta);
            CAPTURE(k);
            CHECK(rep.verdict == (k >= c.diverging ? Verdict::Diverging : Verdict::BoundedStable));
        }
    }
}

TEST_CASE("soft region edges do not drift under refinement") {
    // Region (0.1, 0.5] without the boundary flag excludes the singular end.
    auto acc = from_cdf(512, {power_cdf(-0.5)});
    const auto d = estimate_density(acc, {64, 128, 256});
    const auto rep = smoothness_probe(d, 1, Region{v1(0.1), v1(0.5)});
    CHECK(rep.verdict == Verdict::BoundedStable);
}

TEST_CASE("fitted stencils recover polynomial derivatives") {
    // rho = 3x^2: second derivative 6 everywhere.
    auto acc = from_cdf(256, {power_cdf(2.0)});
    const auto d = estimate_density(acc, {16, 32, 64});
    for (int w : {0, 3, 5, 7}) {
        SmoothnessOpts o;
        o.fit_width = w;
        const auto rep = smoothness_probe(d, 2, Region{v1(0.0), v1(1.0)}, o);
        for (double s : rep.sups) CHECK(s == doctest::Approx(6.0).epsilon(1e-9));
        CHECK(rep.verdict == Verdict::BoundedStable);
    }
    SmoothnessOpts bad;
    bad.fit_width = 2;
    CHECK_THROWS_AS(smoothness_probe(d, 2, Region{v1(0.0), v1(1.0)}, bad), InvalidArgument);
}

TEST_CASE("whole periodic axis wraps stencils") {
    // rho = 1 + 0.5 sin(2 pi x) on the circle; cell averages shrink the
    // second difference by a factor approaching 1 as h -> 0.
    const int bins = 512;
    OccupationAccumulator acc(Space::torus1(), 1, bins);
    auto cdf = [](double x) { return x - 0.5 * std::cos(2 * M_PI * x) / (2 * M_PI); };
    for (int i = 0; i < bins; ++i) acc.add(0, i, cdf(double(i + 1) / bins) - cdf(double(i) / bins));
    const auto d = estimate_density(acc, {32, 64, 128});
    const auto rep = smoothness_probe(d, 2, Region{v1(0.0), v1(1.0)});
    CHECK(rep.verdict == Verdict::BoundedStable);
    CHECK(rep.sups.back() == doctest::Approx(0.5 * 4 * M_PI * M_PI).epsilon(0.01));
}

TEST_CASE("noise-dominated modes are inconclusive") {
    Philox rng(7, 0);
    const Space s = Space::torus1();
    OccupationAccumulator merged(s, 1, 64);
    std::vector<OccupationAccumulator> reps;
    for (int r = 0; r < 4; ++r) {
        OccupationAccumulator one(s, 1, 64);
        for (int i = 0; i < 2000; ++i) one.deposit_point(0, v1(rng.uniform()), 1.0);
        merged.merge(one);
        reps.push_back(one);
    }
    const auto d = estimate_density(merged, {16, 32, 64}, reps);
    const auto rep = smoothness_probe(d, 2, Region{v1(0.0), v1(1.0)});
    CHECK(rep.verdict == Verdict::Inconclusive);
    CHECK(rep.reason.find("noise") != std::string::npos);
}

TEST_CASE("telegraph verdicts from simulation") {
    // Rate 1/4 out of mode 0: its density grows like x^(-3/4) at 0.
    auto ch = Characteristics::constant_rates(
        Space::box(v1(-0.5), v1(1.5)),
        {FieldSpec::affine(Mat::Constant(1, 1, -1.0), v1(0.0)),
         FieldSpec::affine(Mat::Constant(1, 1, -1.0), v1(1.0))},
        (Eigen::MatrixXd(2, 2) << 0.0, 0.25, 0.5, 0.0).finished());
    McOpts o;
    o.bins = 128;
    o.estimator = McEstimator::Conditional;
    const auto mc = invariant_measure_mc(ch, 100000, 1000, 4, 3, o);
    const auto d = estimate_density(mc, {32, 64, 128});
    const Region r{v1(0.0), v1(0.5), 0, -1, true, false};
    CHECK(smoothness_probe(d, 0, r).verdict == Verdict::Diverging);
    const auto b = blowup_at(d, v1(0.0), 0);
    CHECK(b.flagged);
    CHECK(b.exponent == doctest::Approx(0.75).epsilon(0.1));
    CHECK_FALSE(blowup_at(d, v1(0.5), 0).flagged);
}

TEST_CASE("blowup on exact power laws") {
    auto acc = from_cdf(256, {power_cdf(-0.75), power_cdf(0.0)});
    const auto d = estimate_density(acc, {32, 64, 128});
    const auto b = blowup_at(d, v1(0.0), 0);
    CHECK(b.flagged);
    CHECK(b.exponent == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(b.values.size() == 3);
    CHECK_FALSE(blowup_at(d, v1(0.0), 1).flagged);
    CHECK_FALSE(blowup_at(d, v1(0.7), 0).flagged);
    CHECK_THROWS_AS(blowup_at(d, v1(2.0), 0), InvalidArgument);
}

TEST_CASE("support masks") {
    const Space sq = Space::box(v2(0, 0), v2(1, 1));
    OccupationAccumulator acc(sq, 2, 32);
    for (int m = 0; m < 2; ++m)
        for (int j = 8; j < 24; ++j)
            for (int i = 8; i < 24; ++i) acc.add(m, i + 32L * j, m == 0 ? 1.0 : 2.0);
    const auto d = estimate_density(acc, {8, 16, 32});
    const auto s = support_estimate(d, 1e-6);
    CHECK(s.level == 2);
    CHECK(s.combined.count() == 256);
    CHECK(s.masks[0] == s.masks[1]);
    CHECK(s.mode_disagreement == 0.0);
    CHECK(s.combined[s.combined.cell_of(v2(0.5, 0.5))]);
    CHECK_FALSE(s.combined[s.combined.cell_of(v2(0.1, 0.9))]);

    acc.add(1, 0, 1.0);
    const auto s2 = support_estimate(estimate_density(acc, {8, 16, 32}), 1e-6);
    CHECK(s2.mode_disagreement == doctest::Approx(1.0 / 257));
    CHECK_THROWS_AS(support_estimate(d, 0.0), InvalidArgument);
}

TEST_CASE("mask utilities") {
    GridMask box(Space::box(v2(0, 0), v2(1, 1)), 8);
    box.set(box.index(0, 0));
    box.set(box.index(7, 7));
    CHECK(box.count() == 2);
    CHECK(box.components() == 2);
    CHECK(box.index(-1, 0) == -1);
    const auto grown = box.dilated();
    CHECK(grown.count() == 8);
    CHECK(box.covered_by(grown) == 1.0);
    CHECK(grown.covered_by(box) == doctest::Approx(0.25));
    CHECK(grown.symmetric_difference(box) == 6);
    CHECK(grown.intersect(box) == box);

    GridMask tor(Space::torus2(), 8);
    tor.set(tor.index(0, 0));
    tor.set(tor.index(7, 7));
    CHECK(tor.components() == 1);
    CHECK(tor.dilated().count() == 14);
    CHECK(tor.index(8, -1) == tor.index(0, 7));

    GridMask line(Space::torus1(), 10);
    line.set(2);
    CHECK(line.dilated(2).count() == 5);
    CHECK(line.center(2)[0] == doctest::Approx(0.25));

    std::ostringstream os;
    write_mask_csv(os, box);
    const std::string csv = os.str();
    CHECK(csv.rfind("row,col,flag\n", 0) == 0);
    CHECK(csv.find("\n0,0,1\n") != std::string::npos);
    CHECK(csv.find("\n7,7,1") != std::string::npos);
}

TEST_CASE("density csv layout") {
    auto acc = from_cdf(64, {power_cdf(0.0), power_cdf(1.0)});
    const auto d = estimate_density(acc, {16, 32, 64});
    std::ostringstream os;
    write_density_csv(os, d);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "mode,x0,rho_16,rho_32,rho_64");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 128);
}
