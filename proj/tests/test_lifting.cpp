#include "fiberlift/lifting.hpp"
#include "fiberlift/errors.hpp"
#include "fiberlift/parallel.hpp"

#include <doctest.h>

#include <cmath>

using namespace fiberlift;

namespace {
struct Threads2 {
    Threads2() { set_thread_count(2); }
    ~Threads2() { set_thread_count(1); }
};
} // namespace

TEST_SUITE("lifting") {

TEST_CASE("solenoid lift contracts at the fiber ratio") {
    Threads2 guard;
    auto sys = solenoid_system(0.4);
    LiftOptions opt;
    opt.tol = 1e-3;
    opt.n_max = 9;
    opt.n_cells = 8; // coarse cells keep the per-cell sampling floor low at 4000 atoms
    auto base = stratified_base_cloud(sys.geom, 4000, 42);
    auto lr = lift_measure(sys, base, opt);
    // at this resolution the early consecutive ratios carry the fiber ratio;
    // the acceptance suite pins the fitted model at full scale
    REQUIRE(lr.cauchy_trace.size() >= 5);
    for (int n = 1; n <= 3; ++n) {
        double ratio = lr.cauchy_trace[n].second / lr.cauchy_trace[n - 1].second;
        CHECK(ratio >= 0.27);
        CHECK(ratio <= 0.52);
    }
    CHECK(lr.fitted_rate.decays());
    CHECK(lr.invariance_defect < 0.01);
    CHECK(lr.cauchy_trace.front().second > 10 * lr.cauchy_trace[4].second);
}

TEST_CASE("lift from a fixed-point base measure lands on the fiber fixed point") {
    auto sys = solenoid_system(0.4);
    EmpiricalMeasure base;
    base.tag = SpaceTag::base;
    base.dim = 1;
    base.geom = sys.geom;
    base.geom.fiber.dim = 0;
    base.points = {0.0}; // fixed point of the doubling map
    base.weights = {1.0};
    LiftOptions opt;
    opt.tol = 1e-6;
    opt.n_max = 40;
    opt.n_cells = 1;
    auto lr = lift_measure(sys, base, opt);
    CHECK(lr.converged);
    // fiber fixed point over y=0: z = offset(0)/(1-lambda) = (0.5/0.6, 0)
    CHECK(lr.lifted.point(0)[1] == doctest::Approx(0.5 / 0.6).epsilon(1e-4));
    CHECK(std::fabs(lr.lifted.point(0)[2]) < 1e-4);
}

TEST_CASE("identity fibers: flat sections are fixed, spread sections never settle") {
    auto sys = make_system("skew", {{"q", 0.3}, {"rate", 1.0}, {"amp", 0.0}});
    LiftOptions opt;
    opt.tol = 1e-3;
    opt.n_max = 8;
    opt.n_cells = 10;
    auto base = stratified_base_cloud(sys.geom, 2000, 5);

    // a fiber-constant start is already a fixed point of the push-forward
    auto flat = lift_measure(sys, base, opt);
    CHECK(flat.converged);
    CHECK(flat.cauchy_trace.front().second == doctest::Approx(0.0).epsilon(1e-12));

    // a start with spread along fibers keeps its spread: the trace can settle
    // (base mixing equilibrates the conditional laws) but never approaches the
    // tolerance, and the fibers are flagged non-shrinking
    opt.start_section = [](double y, double* z) { z[0] = std::cos(40.0 * y); };
    auto spread = lift_measure(sys, base, opt);
    CHECK(!spread.converged);
    CHECK(spread.cauchy_trace.front().second > 0.05);
    for (auto& [n, d] : spread.cauchy_trace) CHECK(d > 3 * opt.tol);
    CHECK(estimate_shrinking(sys, 12, 30, 20, 5).non_shrinking);
}

TEST_CASE("distinct sections converge to the same lift") {
    Threads2 guard;
    auto sys = solenoid_system(0.4);
    auto base = stratified_base_cloud(sys.geom, 4000, 7);
    std::vector<std::function<void(double, double*)>> secs;
    secs.push_back([](double, double* z) { z[0] = 0.0; z[1] = 0.0; });
    secs.push_back([](double, double* z) { z[0] = 0.9; z[1] = 0.0; }); // near the disk boundary
    auto rep = check_lift_uniqueness(sys, base, secs, 1e-3, 12, 16);
    CHECK(rep.pass);
    CHECK(rep.max_pairwise < 3e-3);
    // contraction bound: final iterates are atom-paired within 2*0.4^n
    CHECK(rep.max_pairwise <= 2.0 * std::pow(0.4, 12) + 1e-6);
}

TEST_CASE("identical sections stay at distance zero") {
    auto sys = solenoid_system(0.4);
    auto base = stratified_base_cloud(sys.geom, 500, 3);
    std::vector<std::function<void(double, double*)>> secs;
    for (int k = 0; k < 2; ++k)
        secs.push_back([](double, double* z) { z[0] = 0.25; z[1] = -0.5; });
    auto rep = check_lift_uniqueness(sys, base, secs, 1e-4, 6, 8);
    CHECK(rep.max_pairwise == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("non-shrinking fibers keep distinct sections apart") {
    auto sys = make_system("skew", {{"q", 0.3}, {"rate", 1.0}, {"amp", 0.0}});
    auto base = stratified_base_cloud(sys.geom, 1500, 9);
    std::vector<std::function<void(double, double*)>> secs;
    secs.push_back([](double, double* z) { z[0] = -0.8; });
    secs.push_back([](double, double* z) { z[0] = 0.8; });
    auto rep = check_lift_uniqueness(sys, base, secs, 1e-3, 8, 10);
    CHECK(!rep.pass);
    CHECK(rep.max_pairwise > 0.5); // isometric fibers preserve the initial gap (0.8 in fiber metric)
}

TEST_CASE("projection commutes with iteration atom-wise") {
    auto sys = solenoid_system(0.4);
    auto mu = random_total_cloud(sys, 200, 4);
    auto base = project_measure(mu);
    auto iter = mu;
    std::vector<double> ys = base.points;
    for (int n = 1; n <= 20; ++n) {
        iter = pushforward(iter, sys);
        for (auto& y : ys) y = sys.apply_S(y);
        for (size_t i = 0; i < mu.size(); ++i) CHECK(iter.point(i)[0] == ys[i]); // bitwise
    }
}

TEST_CASE("iterate distances respect the shrinking envelope") {
    Threads2 guard;
    auto sys = solenoid_system(0.4);
    auto shrink = estimate_shrinking(sys, 14, 40, 30, 2);
    LiftOptions opt;
    opt.tol = 1e-6;
    opt.n_max = 8;
    opt.n_cells = 10;
    opt.keep_iterates = true;
    auto base = stratified_base_cloud(sys.geom, 2000, 13);
    auto lr = lift_measure(sys, base, opt);
    REQUIRE(lr.iterates.size() >= 7);
    VerticalOptions vopt;
    vopt.n_cells = 10;
    vopt.rebalance = true;
    for (int n = 1; n <= 4; ++n) {
        for (int m = n + 1; m <= std::min<int>(n + 3, int(lr.iterates.size()) - 1); ++m) {
            double d = vertical_wasserstein_full(lr.iterates[n], lr.iterates[m], vopt).value;
            CHECK(d <= 2.0 * shrink.envelope(n) + 0.03); // 2x envelope plus sampling slack
        }
    }
}

TEST_CASE("lifting the lifted measure is idempotent up to the sampling floor") {
    Threads2 guard;
    auto sys = solenoid_system(0.4);
    LiftOptions opt;
    opt.compute_trace = false;
    opt.n_max = 14;
    auto base = stratified_base_cloud(sys.geom, 4000, 21);
    auto lr = lift_measure(sys, base, opt);
    auto pushed = pushforward(lr.lifted, sys);
    VerticalOptions vopt;
    vopt.n_cells = 16;
    vopt.rebalance = true;
    CHECK(vertical_wasserstein_full(lr.lifted, pushed, vopt).value < 0.03);
}

TEST_CASE("stable leaf distances decay for a lifted start") {
    Threads2 guard;
    auto sys = solenoid_system(0.4);
    LiftOptions opt;
    opt.compute_trace = false;
    opt.n_max = 14;
    auto ref = lift_measure(sys, stratified_base_cloud(sys.geom, 1200, 3), opt);
    // a cloud with the uniform base marginal (the invariant one for doubling)
    auto nu = random_total_cloud(sys, 400, 12);
    auto sl = stable_leaf_experiment(sys, nu, ref, 10);
    // decays toward the finite-sample floor of the exact W estimate
    double floor = sl.distances.back().second;
    for (auto& [n, d] : sl.distances) floor = std::min(floor, d);
    CHECK(sl.distances.front().second > 1.7 * floor);
    auto shrink = estimate_shrinking(sys, 12, 30, 20, 4);
    for (auto& [n, d] : sl.distances) CHECK(d <= 2.0 * shrink.envelope(n) + 2.5 * floor);
    if (sl.fit.model == DecayFit::Model::exponential) CHECK(sl.fit.theta < 0.7);
    // a lifted start stays at the sampling noise floor
    auto noise = stable_leaf_experiment(sys, ref.lifted, ref, 4);
    for (auto& [n, d] : noise.distances) CHECK(d < 3 * floor + 0.05);
}

} // TEST_SUITE
