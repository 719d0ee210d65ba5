#include "doctest.h"
#include "switchlab/pdmp.hpp"
#include "telegraph_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

using namespace switchlab;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Eigen::MatrixXd rates2(double a01, double a10) {
    Eigen::MatrixXd r(2, 2);
    r << 0.0, a01, a10, 0.0;
    return r;
}

Characteristics telegraph_system(double a, double b) {
    auto ch = Characteristics::constant_rates(
        Space::box(v1(-0.5), v1(1.5)),
        {FieldSpec::affine(Mat::Constant(1, 1, -1.0), v1(0.0)),
         FieldSpec::affine(Mat::Constant(1, 1, -1.0), v1(1.0))},
        rates2(a, b));
    IntegratorOpts io;
    io.step = 0.01;
    ch.set_integrator(io);
    return ch;
}

Characteristics shuttle(double r) {
    return Characteristics::constant_rates(Space::torus1(),
                                           {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))},
                                           rates2(r, r));
}

}  // namespace

TEST_CASE("characteristics validation") {
    CHECK_THROWS_AS(Characteristics::constant_rates(
                        Space::box(v1(0.0), v1(1.0)),
                        {FieldSpec::constant(v1(1.0)), FieldSpec::affine(Mat::Constant(1, 1, -1.0), v1(0.5))},
                        rates2(1, 1)),
                    InvalidArgument);
    CHECK_THROWS_AS(Characteristics::constant_rates(Space::torus1(),
                                                    {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))},
                                                    rates2(1, 2), 2.0),
                    InvalidArgument);
    CHECK_THROWS_AS(shuttle(-1.0), InvalidArgument);
    CHECK_THROWS_AS(Characteristics::constant_rates(Space::torus1(),
                                                    {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))},
                                                    rates2(1, 0)),
                    InvalidArgument);
    CHECK_NOTHROW(Characteristics::constant_rates(Space::torus1(),
                                                  {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))},
                                                  rates2(1, 0), {}, false));
    CHECK_THROWS_AS(RateFunction::trig(0, 1.0, 1.5), InvalidArgument);

    const auto ch = shuttle(2.0);
    CHECK(ch.alpha() == doctest::Approx(2.5));
    const Eigen::MatrixXd a = ch.switch_matrix(v1(0.3));
    CHECK(a(0, 1) == doctest::Approx(0.8));
    CHECK(a(0, 0) == doctest::Approx(0.2));
    CHECK(a.rowwise().sum().isApproxToConstant(1.0));

    auto sd = Characteristics::state_dependent(
        Space::torus1(), {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))},
        {{RateFunction::constant(0), RateFunction::trig(0, 1.0, 0.5)},
         {RateFunction::constant(1.0), RateFunction::constant(0)}});
    CHECK(sd.rate_bound() == doctest::Approx(1.5 * 1.05).epsilon(1e-3));
    CHECK(sd.alpha() > sd.rate_bound());
    CHECK(sd.rate(0, 1, v1(0.25)) == doctest::Approx(1.5));
}

TEST_CASE("stationary vector of the switch matrix") {
    const auto ch = shuttle(1.0);
    const auto two = Characteristics::constant_rates(
        Space::torus1(), {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))}, rates2(1.0, 3.0));
    const Eigen::RowVectorXd pi = switch_stationary(two);
    CHECK(pi[0] == doctest::Approx(0.75));
    CHECK(pi[1] == doctest::Approx(0.25));
    CHECK(switch_stationary(ch)[0] == doctest::Approx(0.5));
}

TEST_CASE("segment deposition conserves mass") {
    OccupationAccumulator t(Space::torus2(), 2, 16);
    t.deposit_segment(0, (Vec(2) << 0.1, 0.2).finished(), (Vec(2) << 3.7, -1.3).finished(), 2.5);
    t.deposit_segment(1, (Vec(2) << 0.5, 0.5).finished(), (Vec(2) << 0.51, 0.5).finished(), 1.0);
    t.deposit_point(1, (Vec(2) << 0.99, 0.01).finished(), 0.5);
    CHECK(t.total() == doctest::Approx(4.0));
    CHECK(t.bin_sum() == doctest::Approx(4.0));
    CHECK(t.mode_weight(0) == doctest::Approx(2.5));
    CHECK(t.hist(1)[t.cell_of((Vec(2) << 0.505, 0.5).finished())] == doctest::Approx(1.0));

    // A horizontal segment across exactly four cells of a 1D grid.
    OccupationAccumulator l(Space::torus1(), 1, 8);
    l.deposit_segment(0, v1(0.125), v1(0.625), 1.0);
    for (int c = 1; c < 5; ++c) CHECK(l.hist(0)[c] == doctest::Approx(0.25));
    CHECK(l.hist(0)[0] == 0.0);
    CHECK(l.hist(0)[5] == 0.0);

    OccupationAccumulator other = l;
    l.merge(other);
    CHECK(l.total() == doctest::Approx(2.0));
    l.clear();
    CHECK(l.bin_sum() == 0.0);
    CHECK_THROWS_AS(l1_distance(l, other, 8), EmptyAccumulator);
}

TEST_CASE("embedded chain switch frequency is binomial") {
    const auto ch = Characteristics::constant_rates(
        Space::torus1(), {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))}, rates2(1, 1), 4.0);
    Philox rng(11, 0);
    EmbeddedState s{v1(0.2), 0};
    const long n = 100000;
    long switches = 0;
    for (long i = 0; i < n; ++i) {
        const auto next = embedded_step(ch, s, rng);
        switches += next.mode != s.mode;
        s = next;
    }
    const double p = 0.25, sd = std::sqrt(n * p * (1 - p));
    CHECK(std::abs(switches - n * p) < 4 * sd);
}

TEST_CASE("switch counts are Poisson and waiting times exponential") {
    const double r = 2.0, t_end = 5.0;
    const auto ch = shuttle(r);
    Philox rng(5, 0);
    const int reps = 4000;
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < reps; ++i) {
        const auto s = simulate_continuous(ch, {v1(0.0), i % 2}, t_end, rng, nullptr);
        CHECK(s.fictitious_events == 0);
        CHECK(s.time == t_end);
        mean += s.real_events;
        sq += double(s.real_events) * s.real_events;
    }
    mean /= reps;
    const double var = sq / reps - mean * mean;
    CHECK(std::abs(mean - r * t_end) < 4 * std::sqrt(r * t_end / reps));
    CHECK(var / (r * t_end) == doctest::Approx(1.0).epsilon(0.1));

    std::ostringstream log;
    write_event_header(log, 1);
    SimOpts so;
    so.event_log = &log;
    simulate_events(ch, {v1(0.0), 0}, 5000, rng, nullptr, so);
    std::istringstream in(log.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,mode,x0,kind");
    std::vector<double> gaps;
    double prev = 0.0;
    while (std::getline(in, line)) {
        const double t = std::stod(line.substr(0, line.find(',')));
        CHECK(line.substr(line.rfind(',') + 1) == "switch");
        gaps.push_back(t - prev);
        prev = t;
    }
    REQUIRE(gaps.size() == 5000);
    std::sort(gaps.begin(), gaps.end());
    double d = 0.0;
    const double n = gaps.size();
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        const double f = 1.0 - std::exp(-r * gaps[i]);
        d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    CHECK(d < 1.63 / std::sqrt(n));
}

TEST_CASE("thinning with state-dependent rates") {
    // alpha_01 = 1 + 0.8 sin(2 pi x) in mode 0 moving at unit speed; the
    // real-event fraction is the mean rate over alpha.
    auto ch = Characteristics::state_dependent(
        Space::torus1(), {FieldSpec::constant(v1(1.0)), FieldSpec::constant(v1(-1.0))},
        {{RateFunction::constant(0), RateFunction::trig(0, 1.0, 0.8)},
         {RateFunction::trig(0, 1.0, -0.8), RateFunction::constant(0)}},
        3.0);
    Philox rng(3, 1);
    const auto s = simulate_events(ch, {v1(0.0), 0}, 200000, rng, nullptr);
    const double frac = double(s.real_events) / (s.real_events + s.fictitious_events);
    CHECK(frac == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("K push-forward keeps modes") {
    const auto ch = telegraph_system(1.5, 1.5);
    Philox rng(1, 2);
    std::vector<EmbeddedState> samples;
    for (int i = 0; i < 500; ++i) samples.push_back({v1(rng.uniform()), i % 2});
    const auto out = k_pushforward(ch, samples, rng);
    REQUIRE(out.size() == samples.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].mode == samples[i].mode);
        CHECK(out[i].x[0] >= -0.5);
        CHECK(out[i].x[0] <= 1.5);
        if (samples[i].mode == 0) CHECK(out[i].x[0] <= samples[i].x[0]);
        else CHECK(out[i].x[0] >= samples[i].x[0]);
    }
}

TEST_CASE("opposite constant fields give the uniform law") {
    const auto ch = shuttle(1.0);
    McOpts o;
    o.bins = 64;
    const auto res = invariant_measure_mc(ch, 1'000'000, 1000, 1, 17, o);
    CHECK(res.merged.bin_sum() == doctest::Approx(res.merged.total()).epsilon(1e-10));
    double worst = 0.0;
    for (int m = 0; m < 2; ++m)
        for (double v : res.merged.hist(m)) worst = std::max(worst, std::abs(v * 64 / res.merged.total() - 0.5));
    CHECK(worst < 0.02);
    CHECK_FALSE(res.non_convergence);
}

TEST_CASE("telegraph occupation matches the closed form") {
    const double a = 1.5, b = 2.5;
    const auto ch = telegraph_system(a, b);
    const telegraph::Law law{a, b};
    McOpts o;
    o.bins = 64;
    o.threads = 2;
    const auto cont = invariant_measure_mc(ch, 100000, 1000, 2, 99, o);

    double l1 = 0.0;
    for (int m = 0; m < 2; ++m) {
        const auto exact = law.bin_masses(m, 32);
        for (int c = 0; c < 32; ++c) l1 += std::abs(cont.merged.hist(m)[c + 16] / cont.merged.total() - exact[c]);
    }
    CHECK(l1 < 0.05);
    CHECK(cont.merged.mode_weight(0) / cont.merged.total() == doctest::Approx(b / (a + b)).epsilon(0.02));

    o.estimator = McEstimator::EmbeddedK;
    const auto emb = invariant_measure_mc(ch, 100000, 1000, 2, 99, o);
    CHECK(l1_distance(cont.merged, emb.merged, 64) < 0.05);

    // Inv(P) differs from the time law, but both put the same weight on modes.
    o.estimator = McEstimator::Embedded;
    const auto raw = invariant_measure_mc(ch, 100000, 1000, 2, 99, o);
    CHECK(raw.merged.mode_weight(0) / raw.merged.total() == doctest::Approx(b / (a + b)).epsilon(0.03));
}

TEST_CASE("runs are reproducible across thread counts") {
    const auto ch = telegraph_system(1.0, 2.0);
    McOpts o;
    o.bins = 16;
    o.threads = 1;
    const auto one = invariant_measure_mc(ch, 10000, 100, 3, 7, o);
    o.threads = 3;
    const auto three = invariant_measure_mc(ch, 10000, 100, 3, 7, o);
    for (int m = 0; m < 2; ++m) CHECK(one.merged.hist(m) == three.merged.hist(m));
    CHECK(one.split_half_l1 == three.split_half_l1);
    const auto other = invariant_measure_mc(ch, 10000, 100, 3, 8, o);
    CHECK(other.merged.hist(0) != one.merged.hist(0));
    CHECK_THROWS_AS(invariant_measure_mc(ch, 100, 0, 1, 1, o), InvalidArgument);
}
