#include "doctest.h"
#include "switchlab/geometry.hpp"

#include <cmath>
#include <random>

using namespace switchlab;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}
Mat m11(double a) { return Mat::Constant(1, 1, a); }

struct Case {
    Space space;
    FieldSpec field;
};

std::vector<Case> catalog() {
    Mat a(2, 2);
    a << -1.0, 0.3, -0.2, -2.0;
    return {
        {Space::torus2(), FieldSpec::constant(v2(1.0, 0.381966))},
        {Space::torus2(), FieldSpec::shear_sin(1.0, 0.1)},
        {Space::box(v2(-1e10, -1e10), v2(1e10, 1e10)), FieldSpec::affine(a, v2(0.5, -0.25))},
        {Space::torus1(), FieldSpec::circle1d(Profile::Trig, {1.0, 0.5, 0.3})},
        {Space::box(v1(-1e10), v1(1e10)), FieldSpec::circle1d(Profile::Poly, {0.3, -0.7})},
        {Space::torus1(), FieldSpec::counter_campbell(2.0)},
    };
}

Vec random_point(const Space& s, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec x(s.dim());
    for (int i = 0; i < s.dim(); ++i) {
        double lo = s.lower()[i], ext = s.extent(i);
        if (!s.periodic()) lo = -1.0, ext = 2.0;
        x[i] = lo + ext * u(gen);
    }
    return x;
}

}  // namespace

TEST_CASE("zero field is the identity flow") {
    const auto r = flow(Space::torus2(), FieldSpec::constant(v2(0, 0)), v2(0.3, 0.7), 5.0);
    CHECK(r.endpoint.isApprox(v2(0.3, 0.7)));
    CHECK(r.tangent.isIdentity());
    CHECK(r.log_jacobian == 0.0);
}

TEST_CASE("constant translation on the torus") {
    const auto r = flow(Space::torus2(), FieldSpec::constant(v2(1, 0)), v2(0.25, 0.5), 0.5);
    CHECK(r.endpoint[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(r.endpoint[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.log_jacobian == 0.0);
}

TEST_CASE("one-dimensional linear contraction") {
    const Space box = Space::box(v1(-2), v1(2));
    const auto f = FieldSpec::affine(m11(-1), v1(0));
    const auto r = flow(box, f, v1(0.8), 1.0);
    CHECK(r.endpoint[0] == doctest::Approx(0.8 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(r.tangent(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(r.log_jacobian == doctest::Approx(-1.0).epsilon(1e-12));

    const auto map = flow_map_as_function(box, f, std::log(2.0));
    CHECK(map.tangent(v1(0.3))(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("map handle of zero field and shear orbit") {
    const auto id = flow_map_as_function(Space::torus2(), FieldSpec::constant(v2(0, 0)), 3.0);
    CHECK(id.apply(v2(0.1, 0.2)).isApprox(v2(0.1, 0.2)));

    const auto shear = flow_map_as_function(Space::torus2(), FieldSpec::shear_sin(1.0, 0.1), 1.0);
    const Vec y = shear.apply(v2(0, 0));
    CHECK(std::min(y[0], 1.0 - y[0]) < 1e-12);
    CHECK(std::abs(y[1]) < 1e-15);
}

TEST_CASE("torus endpoints are reduced") {
    const auto r = flow(Space::torus2(), FieldSpec::constant(v2(-1.3, 2.7)), v2(0.1, 0.9), 3.0);
    for (int i = 0; i < 2; ++i) {
        CHECK(r.endpoint[i] >= 0.0);
        CHECK(r.endpoint[i] < 1.0);
    }
}

TEST_CASE("jacobian trace equals divergence and matches finite differences") {
    std::mt19937_64 gen(11);
    for (const auto& c : catalog()) {
        for (int k = 0; k < 20; ++k) {
            const Vec x = random_point(c.space, gen);
            const Mat j = c.field.jacobian(x);
            CHECK(j.trace() == doctest::Approx(c.field.divergence(x)).epsilon(1e-12));
            for (int col = 0; col < x.size(); ++col) {
                const double h = 1e-6;
                Vec xp = x, xm = x;
                xp[col] += h;
                xm[col] -= h;
                const Vec fd = (c.field.value(xp) - c.field.value(xm)) / (2 * h);
                for (int row = 0; row < x.size(); ++row)
                    CHECK(fd[row] == doctest::Approx(j(row, col)).epsilon(1e-6).scale(1.0));
            }
        }
    }
}

TEST_CASE("group, cocycle and Liouville properties") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> ut(-3.0, 3.0);
    IntegratorOpts opts;
    for (const auto& c : catalog()) {
        for (int k = 0; k < 10; ++k) {
            const Vec x = random_point(c.space, gen);
            const double t1 = ut(gen), t2 = ut(gen);
            const auto whole = flow_lift(c.space, c.field, x, t1 + t2, opts);
            const auto a = flow_lift(c.space, c.field, x, t1, opts);
            const auto b = flow_lift(c.space, c.field, a.endpoint, t2, opts);
            CHECK((whole.endpoint - b.endpoint).norm() < 1e-8);
            CHECK((whole.tangent - b.tangent * a.tangent).norm() < 1e-7 * (1.0 + whole.tangent.norm()));
            CHECK(std::abs(whole.log_jacobian - std::log(std::abs(whole.tangent.determinant()))) < 1e-6);
        }
    }
}

TEST_CASE("Liouville consistency at long times") {
    std::mt19937_64 gen(9);
    for (const auto& c : catalog()) {
        for (int k = 0; k < 100; ++k) {
            const Vec x = random_point(c.space, gen);
            const double t = (k % 2 ? 1.0 : -1.0) * 10.0 * (k + 1) / 100.0;
            const auto r = flow(c.space, c.field, x, t);
            CHECK(std::abs(r.log_jacobian - std::log(std::abs(r.tangent.determinant()))) <= 1e-6);
        }
    }
}

TEST_CASE("counter-Campbell profile") {
    const double a = 2.0;
    CHECK(counter_campbell_profile(a, 0.0).value == 0.0);
    CHECK(counter_campbell_profile(a, 0.0).derivative == doctest::Approx(-std::log(a)));
    CHECK(std::abs(counter_campbell_profile(a, 0.5).value) < 1e-15);
    CHECK(counter_campbell_profile(a, 0.5).derivative == doctest::Approx(std::log(a)));
    for (int i = 1; i < 1000; ++i) {
        const double x = i / 1000.0;
        if (std::abs(x - 0.5) < 1e-9) continue;
        CHECK(counter_campbell_profile(a, x).value != 0.0);
    }
    // Time-one map is exactly x / alpha near 0.
    const auto r = flow(Space::torus1(), FieldSpec::counter_campbell(a), v1(0.05), 1.0);
    CHECK(r.endpoint[0] == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(r.tangent(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("errors") {
    IntegratorOpts tight{1e-3, 1000};
    CHECK_THROWS_AS(flow(Space::torus1(), FieldSpec::counter_campbell(2.0), v1(0.1), 5.0, tight),
                    StepCountOverflow);
    const Space box = Space::box(v1(0), v1(1));
    CHECK_THROWS_AS(flow(box, FieldSpec::affine(m11(1.0), v1(0.5)), v1(0.9), 5.0), BoundaryExit);
    CHECK_FALSE(try_flow(box, FieldSpec::affine(m11(1.0), v1(0.5)), v1(0.9), 5.0).has_value());
    CHECK_THROWS_AS(FieldSpec::counter_campbell(0.5), InvalidArgument);
}

TEST_CASE("inward check on trapping boxes") {
    Mat a(2, 2);
    a << -1, 0, 0, -2;
    const Space box = Space::box(v2(-0.5, -0.5), v2(1.5, 1.5));
    CHECK(points_inward(box, FieldSpec::affine(a, v2(1, 1))));
    CHECK(points_inward(box, FieldSpec::affine(a, v2(0, 0))));
    CHECK_FALSE(points_inward(box, FieldSpec::affine(-a, v2(0, 0))));
    CHECK(points_inward(Space::box(v1(0), v1(1)), FieldSpec::circle1d(Profile::Poly, {0.0, -1.0})) == false);
    CHECK(points_inward(Space::box(v1(0), v1(1)), FieldSpec::circle1d(Profile::Poly, {0.5, -1.0})));
}

TEST_CASE("closed-form circle maps") {
    const auto d = MapHandle::expanding(2);
    CHECK(d.degree() == 2);
    CHECK(d.apply(v1(0.75))[0] == doctest::Approx(0.5));
    CHECK(d.tangent(v1(0.1))(0, 0) == 2.0);
    const auto r = MapHandle::rotation(0.3);
    CHECK(r.apply(v1(0.8))[0] == doctest::Approx(0.1));
    CHECK(r.log_jacobian(v1(0.2)) == 0.0);
}
