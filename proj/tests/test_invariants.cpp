#include "doctest.h"
#include "switchlab/invariants.hpp"

#include <cmath>

using namespace switchlab;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

const double kShearLambda = -kTwoPi * 0.1;

MapHandle shear_map() {
    return MapHandle::from_flow(Space::torus2(), FieldSpec::shear_sin(1.0, 0.1), 1.0,
                                IntegratorOpts{1e-2});
}

MapHandle campbell_map(double alpha = 2.0) {
    return MapHandle::from_flow(Space::torus1(), FieldSpec::counter_campbell(alpha), 1.0);
}

}  // namespace

TEST_CASE("expansion constant") {
    CHECK(expansion_constant(MapHandle::identity(Space::torus2()), v2(0.2, 0.3)) == doctest::Approx(1.0));
    CHECK(expansion_constant(campbell_map(), v1(0.0)) == doctest::Approx(0.5).epsilon(1e-10));
    Mat m(2, 2);
    m << 2, 0, 0, 3;
    CHECK(smallest_singular_value(m) == doctest::Approx(2.0));
    m << 1, 1, 0, 1;
    const double golden = (1 + std::sqrt(5.0)) / 2;
    CHECK(smallest_singular_value(m) == doctest::Approx(1.0 / golden));
}

TEST_CASE("rotation is an isometry") {
    const auto r = MapHandle::rotation(0.1234);
    const auto rates = expansion_rates(r, 3, 64, 10);
    for (const auto& e : rates) {
        CHECK(e.value == 0.0);
        CHECK(e.per_n_values.size() == 10);
    }
}

TEST_CASE("counter-Campbell rates") {
    const auto rates = expansion_rates(campbell_map(), 2, 512, 30);
    for (int k = 0; k <= 2; ++k)
        CHECK(rates[k].value == doctest::Approx(-std::log(2.0) * (k + 1)).epsilon(0.05));
    CHECK(rates[3].value == doctest::Approx(-std::log(2.0)).epsilon(0.05));
    // monotone in k since EV_0 <= 0
    CHECK(rates[1].value <= rates[0].value + 1e-9);
    CHECK(rates[2].value <= rates[1].value + 1e-9);
    // d * E <= EV_0 <= log deg
    CHECK(rates[3].value <= rates[0].value + 1e-9);
    CHECK(rates[0].value <= 0.0 + 1e-9);
}

TEST_CASE("shear flow rates follow the stable orbit") {
    const auto rates = expansion_rates(shear_map(), 2, 32, 20);
    for (int k = 0; k <= 2; ++k)
        CHECK(rates[k].value == doctest::Approx((k + 1) * kShearLambda).epsilon(0.1));
}

TEST_CASE("doubling map rates") {
    const auto rates = expansion_rates(MapHandle::expanding(2), 2, 64, 10);
    for (int k = 0; k <= 2; ++k) CHECK(rates[k].value == doctest::Approx((k + 1) * std::log(2.0)));
    CHECK(rates[0].value <= std::log(2.0) + 1e-12);
}

TEST_CASE("lyapunov spectra") {
    const auto id = lyapunov_spectrum(MapHandle::identity(Space::torus2()), v2(0.1, 0.2), 200, 0);
    CHECK(id.exponents[0] == 0.0);
    CHECK(id.exponents[1] == 0.0);

    const Space box = Space::box(v1(-2), v1(2));
    const auto aff = MapHandle::from_flow(box, FieldSpec::affine(Mat::Constant(1, 1, -1.0), v1(0)), 1.0);
    const auto la = lyapunov_spectrum(aff, v1(1.0), 100, 0);
    CHECK(la.exponents[0] == doctest::Approx(-1.0).epsilon(1e-9));

    const auto ls = lyapunov_spectrum(shear_map(), v2(0.0, 0.01), 2000, 200);
    CHECK(ls.exponents[0] == doctest::Approx(kShearLambda).epsilon(1e-3));
    CHECK(std::abs(ls.exponents[1]) < 1e-3);
    CHECK(ls.exponents[0] + ls.exponents[1] == doctest::Approx(ls.log_jacobian_rate).epsilon(1e-6));
    CHECK_FALSE(ls.non_convergence);
}

TEST_CASE("equilibrium of an affine field") {
    Mat a(2, 2);
    a << -1, 0, 0, -2;
    const Space box = Space::box(v2(-1, -1), v2(1, 1));
    const auto f = FieldSpec::affine(a, v2(0, 0));
    const auto orbits = find_periodic_orbits(box, f, {{v2(0.3, -0.4), 0}, {v2(-0.5, 0.2), 1}});
    REQUIRE(orbits.size() == 1);
    CHECK(orbits[0].kind == OrbitKind::Equilibrium);
    CHECK(orbits[0].anchor.norm() < 1e-12);
    CHECK(orbits[0].floquet[0] == doctest::Approx(-2.0));
    CHECK(orbits[0].floquet[1] == doctest::Approx(-1.0));
    const auto rep = ergplan_check(box, f, orbits[0]);
    CHECK(rep.log_jacobian_rate == doctest::Approx(a.trace()).epsilon(1e-10));
    CHECK(rep.difference < 1e-6);
}

TEST_CASE("shear orbits and ergodic identity") {
    const auto f = FieldSpec::shear_sin(1.0, 0.1);
    const auto orbits = find_periodic_orbits(
        Space::torus2(), f, {{v2(0.0, 0.05), 0}, {v2(0.3, 0.93), 0}, {v2(0.0, 0.45), 0}});
    REQUIRE(orbits.size() == 2);
    const auto& stable = orbits[0].anchor[1] < 0.25 || orbits[0].anchor[1] > 0.75 ? orbits[0] : orbits[1];
    const auto& unstable = &stable == &orbits[0] ? orbits[1] : orbits[0];
    CHECK(std::min(stable.anchor[1], 1.0 - stable.anchor[1]) < 1e-9);
    CHECK(unstable.anchor[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(stable.period == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(stable.floquet[0] == doctest::Approx(kShearLambda).epsilon(1e-6));
    CHECK(std::abs(stable.floquet[1]) < 1e-6);
    CHECK(stable.stable);
    CHECK(std::abs(unstable.floquet[0]) < 1e-6);
    CHECK(unstable.floquet[1] == doctest::Approx(-kShearLambda).epsilon(1e-6));
    CHECK_FALSE(unstable.stable);
    for (const auto& o : orbits) {
        const auto rep = ergplan_check(Space::torus2(), f, o);
        CHECK(rep.difference < 1e-6);
    }
    CHECK(ergplan_check(Space::torus2(), f, stable).log_jacobian_rate ==
          doctest::Approx(kShearLambda).epsilon(1e-6));
}

TEST_CASE("irrational linear flow has no closed orbits") {
    const double golden = (1 + std::sqrt(5.0)) / 2;
    const auto f = FieldSpec::constant(v2(1.0, golden));
    const auto orbits = find_periodic_orbits(Space::torus2(), f, {{v2(0.0, 0.1), 0}, {v2(0.2, 0.7), 1}});
    CHECK(orbits.empty());
    const auto rep = ergplan_check(Space::torus2(), FieldSpec::constant(v2(1.0, 0.0)),
                                   find_periodic_orbits(Space::torus2(), FieldSpec::constant(v2(1.0, 0.0)),
                                                        {{v2(0.0, 0.3), 0}})
                                       .at(0));
    CHECK(rep.log_jacobian_rate == 0.0);
    CHECK(rep.floquet_sum == 0.0);
}

TEST_CASE("tangent section seed") {
    const auto f = FieldSpec::constant(v2(0.0, 1.0));
    CHECK_THROWS_AS(find_periodic_orbits(Space::torus2(), f, {{v2(0.1, 0.1), 0}}), NoSectionCrossing);
}
