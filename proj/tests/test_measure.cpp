#include "fiberlift/measure.hpp"
#include "fiberlift/errors.hpp"

#include <doctest.h>

#include "test_helpers.hpp"

#include <cmath>

using namespace fiberlift;
using namespace testutil;

TEST_SUITE("measure") {

TEST_CASE("weights and domains are enforced") {
    auto mu = random_base_cloud(Geometry{}, 500, 3);
    mu.check();
    CHECK(mu.total_weight() == doctest::Approx(1.0).epsilon(1e-13));
    mu.weights[0] = -1;
    CHECK_THROWS_AS(mu.check(), ParameterError);
}

TEST_CASE("pushforward moves atoms and keeps mass") {
    auto sys = solenoid_system(0.4);
    auto mu = random_total_cloud(sys, 400, 9);
    auto nu = pushforward(mu, sys);
    CHECK(nu.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
    std::array<double, kMaxDim> t{};
    sys.step(mu.point(7), t.data());
    for (int c = 0; c < 3; ++c) CHECK(nu.point(7)[c] == t[c]); // exact atom image
}

TEST_CASE("pushforward reports escaping atoms") {
    FiberedSystem sys = solenoid_system(0.4);
    sys.apply_T = [](const double* in, double* out) {
        out[0] = in[0];
        out[1] = 5.0; // leaves the disk box
        out[2] = 0.0;
    };
    auto mu = random_total_cloud(sys, 10, 1);
    CHECK_THROWS_AS(pushforward(mu, sys), DomainViolation);
}

TEST_CASE("projection is the base marginal") {
    auto sys = solenoid_system(0.4);
    auto mu = random_total_cloud(sys, 300, 5);
    auto base = project_measure(mu);
    CHECK(base.dim == 1);
    for (size_t i = 0; i < mu.size(); ++i) CHECK(base.points[i] == mu.point(i)[0]);
    // and it matches the disintegration cell masses for several resolutions
    for (int m : {1, 4, 9, 32}) {
        auto dis = disintegrate(mu, m);
        auto gm = dis.base_marginal();
        gm.check();
        std::vector<double> hist(m, 0.0);
        for (size_t i = 0; i < base.size(); ++i) hist[cell_of(base.points[i], m)] += base.weights[i];
        for (int c = 0; c < m; ++c) CHECK(gm.masses[c] == doctest::Approx(hist[c]).epsilon(1e-12));
    }
}

TEST_CASE("birkhoff orbit of a dyadic point collapses to zero") {
    auto sys = doubling_base_system();
    auto mu = birkhoff_measure(sys, {0.375}, 0, 200, OrbitPolicy::exact);
    // after the mantissa is exhausted every iterate is exactly 0
    CHECK(mu.points.back() == 0.0);
    double first_moment = integrate(mu, [](const double* x) { return x[0]; });
    CHECK(first_moment < 0.02); // mass parked at the fixed point
}

TEST_CASE("dithered birkhoff orbit reproduces the uniform moment") {
    auto sys = doubling_base_system();
    auto mu = birkhoff_measure(sys, {0.37519101}, 100, 100000, OrbitPolicy::dithered, 77);
    double first_moment = integrate(mu, [](const double* x) { return x[0]; });
    CHECK(std::fabs(first_moment - 0.5) <= 0.01);
}

TEST_CASE("single-step birkhoff measure is one atom") {
    auto sys = doubling_base_system();
    auto mu = birkhoff_measure(sys, {0.3}, 2, 1, OrbitPolicy::exact);
    CHECK(mu.size() == 1);
    // T^(burn_in+1) x0 with burn_in=2
    double y = 0.3;
    for (int i = 0; i < 3; ++i) y = sys.apply_S(y);
    CHECK(mu.points[0] == y);
    CHECK(mu.weights[0] == 1.0);
}

TEST_CASE("birkhoff reports the escape step") {
    FiberedSystem sys = solenoid_system(0.4);
    int fires_at = 5;
    auto inner = sys.apply_T;
    int* counter = new int(0);
    sys.apply_T = [inner, counter, fires_at](const double* in, double* out) {
        inner(in, out);
        if (++*counter == fires_at) out[1] = 9.0;
    };
    try {
        birkhoff_measure(sys, {0.3, 0.0, 0.0}, 0, 100, OrbitPolicy::exact);
        CHECK(false);
    } catch (const DomainViolation& e) {
        CHECK(std::string(e.what()).find("step 5") != std::string::npos);
    }
    delete counter;
}

TEST_CASE("disintegration with one cell returns the measure itself") {
    auto sys = solenoid_system(0.4);
    auto mu = random_total_cloud(sys, 50, 2);
    auto dis = disintegrate(mu, 1);
    CHECK(dis.bins[0].mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dis.bins[0].atoms.size() == 50);
}

TEST_CASE("product measure disintegrates into uniform cells with point conditionals") {
    // uniform base x delta at z=0, four cells
    EmpiricalMeasure mu;
    auto sys = make_system("skew", {{"q", 0.0}});
    mu.tag = SpaceTag::total;
    mu.dim = 2;
    mu.geom = sys.geom;
    int n = 400;
    for (int i = 0; i < n; ++i) {
        mu.points.push_back((i + 0.5) / n);
        mu.points.push_back(0.0);
        mu.weights.push_back(1.0 / n);
    }
    auto dis = disintegrate(mu, 4);
    for (auto& bin : dis.bins) {
        CHECK(bin.mass == doctest::Approx(0.25).epsilon(1e-12));
        for (size_t k = 0; k < bin.atoms.size(); ++k)
            CHECK(mu.point(bin.atoms[k])[1] == 0.0);
    }
}

TEST_CASE("reassembly restores the measure atom for atom") {
    auto sys = solenoid_system(0.4);
    auto mu = random_total_cloud(sys, 123, 8);
    auto dis = disintegrate(mu, 7);
    std::vector<char> seen(mu.size(), 0);
    double mass = 0;
    for (auto& bin : dis.bins) {
        for (size_t k = 0; k < bin.atoms.size(); ++k) {
            size_t idx = bin.atoms[k];
            CHECK(!seen[idx]);
            seen[idx] = 1;
            CHECK(bin.cond_weights[k] * bin.mass == doctest::Approx(mu.weights[idx]).epsilon(1e-12));
            CHECK(cell_of(mu.point(idx)[0], 7) == &bin - dis.bins.data());
        }
        mass += bin.mass;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    for (char s : seen) CHECK(s == 1);
}

TEST_CASE("boundary atoms go to the right-closed cell") {
    CHECK(cell_of(0.25, 4) == 1);
    CHECK(cell_of(0.0, 4) == 0);
    CHECK(cell_of(0.999999999, 4) == 3);
    CHECK(cell_of(1.0, 4) == 0);        // circle wrap: 1 is the same point as 0
    CHECK(cell_of(1.0, 4, false) == 3); // interval: last cell closed
}

TEST_CASE("integration is linear and exact on constants") {
    auto mu = random_base_cloud(Geometry{}, 1000, 4);
    auto f = [](const double* x) { return 2.0 * x[0] - 0.3; };
    auto g = [](const double* x) { return std::sin(x[0]); };
    CHECK(integrate(mu, [](const double*) { return 3.25; }) == doctest::Approx(3.25).epsilon(1e-14));
    double lhs = integrate(mu, [&](const double* x) { return 2.0 * f(x) - 5.0 * g(x); });
    double rhs = 2.0 * integrate(mu, f) - 5.0 * integrate(mu, g);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("monte carlo moment of the uniform cloud") {
    auto mu = random_base_cloud(Geometry{}, 100000, 6);
    CHECK(std::fabs(integrate(mu, [](const double* x) { return x[0]; }) - 0.5) < 0.01);
}

TEST_CASE("disintegration consistency: conditional means integrate to the total") {
    auto sys = solenoid_system(0.4);
    auto mu = random_total_cloud(sys, 777, 12);
    auto f = [](const double* x) { return x[1] + 0.3 * x[2] + x[0]; };
    auto dis = disintegrate(mu, 13);
    double total = 0;
    for (size_t c = 0; c < dis.bins.size(); ++c)
        if (dis.bins[c].mass > 0) total += dis.bins[c].mass * dis.conditional_mean(c, f);
    CHECK(total == doctest::Approx(integrate(mu, f)).epsilon(1e-12));
}

TEST_CASE("csv serialization carries atoms and weights") {
    auto mu = atoms_1d({0.5, 0.25}, {0.75, 0.25});
    auto csv = to_csv(mu);
    CHECK(csv == "x0,weight\n0.5,0.75\n0.25,0.25\n");
}

} // TEST_SUITE
