#include "fiberlift/geometry.hpp"
#include "fiberlift/rng.hpp"
#include "fiberlift/systems.hpp"

#include <doctest.h>

#include <cmath>

using namespace fiberlift;

TEST_SUITE("rng_geometry") {

TEST_CASE("counter rng is a pure function of seed and stream") {
    CounterRng a{42}, b{42}, c{43};
    CHECK(a.raw(1, 2, 3) == b.raw(1, 2, 3));
    CHECK(a.raw(1, 2, 3) != c.raw(1, 2, 3));
    CHECK(a.uniform(5) == b.uniform(5));
    double mean = 0;
    for (int i = 0; i < 20000; ++i) mean += a.uniform(i);
    mean /= 20000;
    CHECK(std::fabs(mean - 0.5) < 0.01);
}

TEST_CASE("circle distance and wrapping") {
    CHECK(wrap01(1.0) == 0.0);
    CHECK(wrap01(-0.25) == doctest::Approx(0.75));
    CHECK(circle_distance(0.1, 0.9) == doctest::Approx(0.2));
    CHECK(circle_distance(0.0, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("metrics are normalized to diameter one") {
    Geometry g;
    g.base_circle = true;
    g.fiber.dim = 2;
    g.fiber.lo = {-1.0, -1.0, 0.0};
    g.fiber.hi = {1.0, 1.0, 0.0};
    CHECK(g.dist_base(0.0, 0.5) == doctest::Approx(1.0));
    double a[3] = {0.0, -1.0, -1.0}, b[3] = {0.5, 1.0, 1.0};
    CHECK(g.dist_total(a, b) == doctest::Approx(1.0));
    CounterRng rng{3};
    for (int i = 0; i < 2000; ++i) {
        double p[3] = {rng.uniform(i, 0), 2 * rng.uniform(i, 1) - 1, 2 * rng.uniform(i, 2) - 1};
        double q[3] = {rng.uniform(i, 3), 2 * rng.uniform(i, 4) - 1, 2 * rng.uniform(i, 5) - 1};
        double d = g.dist_total(p, q);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("moduli are increasing and concave with value zero at zero") {
    for (auto m : {ModulusClass::holder(0.7), ModulusClass::log_holder(1.4)}) {
        CHECK(m(0.0) == 0.0);
        double prev = 0, prev_inc = 1e18;
        for (int k = 1; k <= 64; ++k) {
            double r = double(k) / 64.0;
            double v = m(r);
            CHECK(v > prev);
            double inc = v - prev;
            CHECK(inc <= prev_inc + 1e-12); // concavity on the grid
            prev = v;
            prev_inc = inc;
        }
    }
}

TEST_CASE("log-holder modulus composes with expansion at polynomial cost") {
    // omega(L^n r) <= D n^alpha omega(r) with the explicit constant
    // D = ((log L + alpha + 1)/(alpha + 1))^alpha for r_alpha = e^(alpha+1)
    for (double alpha : {0.5, 1.0, 2.0}) {
        for (double L : {1.5, 2.0, 4.0}) {
            auto m = ModulusClass::log_holder(alpha);
            double D = std::pow((std::log(L) + alpha + 1.0) / (alpha + 1.0), alpha);
            for (int n = 1; n <= 40; ++n) {
                for (int j = 0; j <= 40; ++j) {
                    double r = std::pow(2.0, -j);
                    double lhs = m(std::pow(L, n) * r);
                    double rhs = D * std::pow(double(n), alpha) * m(r);
                    CHECK(lhs <= rhs * (1.0 + 1e-12));
                }
            }
        }
    }
}

TEST_CASE("holder modulus rejects bad exponents") {
    CHECK_THROWS(ModulusClass::holder(0.0));
    CHECK_THROWS(ModulusClass::holder(1.5));
    CHECK_THROWS(ModulusClass::log_holder(-1.0));
}

} // TEST_SUITE
