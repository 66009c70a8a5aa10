// Acceptance suite: one quantitative criterion per --criterion id, each
// printing a PASS/FAIL line with the measured numbers.
//
// Two criteria check facts that the implemented systems provably cannot
// satisfy and are expected to stay red; they are kept faithful rather than
// loosened, and the ctest harness marks them WILL_FAIL:
//  - 6b: the exact Ulam matrix of the doubling map on a 64-cell (dyadic) grid
//    forgets one bit per step, so its spectrum is {1} with a nilpotent
//    remainder. The second eigenvalue is 0, not the 0.5 folklore value (0.5
//    is the transfer-operator rate on smooth functions, which criterion 6a's
//    companion test observes as the transient contraction ratio and which the
//    sawtooth decay test recovers; see tests/test_ulam.cpp).
//  - 9b: a tenfold growth of the Holder quotient at exponent gamma+0.2 across
//    dyadic scales 2^-3..2^-12 would need the quotient to grow like r^-s with
//    s >= log2(10)/9 ~ 0.37 > 0.2, which no exponent choice can reach; for
//    the fiber ratio 0.4 the projected potential is moreover Lipschitz away
//    from kink points (2 * 0.4 < 1), so the measured quotient declines.

#include "fiberlift/eigen.hpp"
#include "fiberlift/io.hpp"
#include "fiberlift/lifting.hpp"
#include "fiberlift/parallel.hpp"
#include "fiberlift/render.hpp"
#include "fiberlift/stats.hpp"
#include "fiberlift/systems.hpp"
#include "fiberlift/thermo.hpp"
#include "fiberlift/transport.hpp"
#include "fiberlift/ulam.hpp"

#include <json.hpp>

#include "ot_oracle.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace fiberlift;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string id;
    std::string label;
    std::function<bool(std::ostringstream&)> run;
};

// ---------------------------------------------------------------- criterion 1
bool crit_ot_oracle(std::ostringstream& out) {
    long total_vertices = 0;
    double worst = 0;
    for (uint64_t s = 0; s < 50; ++s) {
        CounterRng rng{s ^ 0xac1ULL};
        int n = 2 + int(rng.index(5, 1)), m = 2 + int(rng.index(5, 2));
        std::vector<double> a(n), b(m);
        double sa = 0, sb = 0;
        for (int i = 0; i < n; ++i) sa += a[i] = 0.05 + rng.uniform(3, i);
        for (int j = 0; j < m; ++j) sb += b[j] = 0.05 + rng.uniform(4, j);
        for (int i = 0; i < n; ++i) a[i] /= sa;
        for (int j = 0; j < m; ++j) b[j] /= sb;
        std::vector<double> cost(size_t(n) * m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) cost[size_t(i) * m + j] = rng.uniform(5, i, j);
        auto exact = solve_transport(a, b, [&](size_t i, size_t j) { return cost[i * m + j]; });
        auto brute = ot_oracle::brute_force_min_cost(
            a, b, [&](int i, int j) { return cost[size_t(i) * m + j]; });
        worst = std::max(worst, std::fabs(exact.cost - brute.min_cost));
        total_vertices += brute.vertices;
    }
    out << "worst |exact - brute| = " << worst << " over 50 instances (" << total_vertices
        << " polytope vertices enumerated)";
    return worst <= 1e-9;
}

// ---------------------------------------------------------------- criterion 2
bool crit_dominance(std::ostringstream& out) {
    auto sys = solenoid_system(0.4);
    int violations = 0, strict = 0;
    double worst_gap = 0;
    const int cells = 8, per = 6;
    for (uint64_t s = 0; s < 100; ++s) {
        CounterRng rng{s ^ 0xd011ULL};
        EmpiricalMeasure mu, nu;
        mu.tag = nu.tag = SpaceTag::total;
        mu.dim = nu.dim = 3;
        mu.geom = nu.geom = sys.geom;
        for (int c = 0; c < cells; ++c) {
            double y = (c + 0.5) / cells; // atoms on exact fibers: binning is exact
            for (int k = 0; k < per; ++k) {
                mu.points.insert(mu.points.end(),
                                 {y, 2 * rng.uniform(c, k, 0) - 1, 2 * rng.uniform(c, k, 1) - 1});
                nu.points.insert(nu.points.end(),
                                 {y, 2 * rng.uniform(c, k, 2) - 1, 2 * rng.uniform(c, k, 3) - 1});
                mu.weights.push_back(1.0);
                nu.weights.push_back(1.0);
            }
        }
        mu.normalize();
        nu.normalize();
        double wfull = wasserstein_discrete(mu, nu, OtMethod::exact).distance;
        double wvert = vertical_wasserstein(mu, nu, cells);
        worst_gap = std::max(worst_gap, wfull - wvert);
        if (wfull < wvert - 1e-9) ++strict;
        if (wfull > wvert + 1e-9) ++violations;
    }
    out << violations << " violations over 100 same-marginal pairs, worst W - W_vert = "
        << worst_gap << ", strictly below on " << strict << " pairs";
    return violations == 0;
}

// ---------------------------------------------------------------- criterion 3
bool crit_lift(std::ostringstream& out) {
    auto sys = solenoid_system(0.4);
    LiftOptions opt;
    opt.tol = 1e-3;
    opt.n_max = 10;
    opt.n_cells = 25;
    auto base = stratified_base_cloud(sys.geom, 10000, 42);
    auto lr = lift_measure(sys, base, opt);
    bool fit_ok = lr.fitted_rate.model == DecayFit::Model::exponential &&
                  lr.fitted_rate.theta >= 0.35 && lr.fitted_rate.theta <= 0.45;

    std::vector<std::function<void(double, double*)>> secs;
    secs.push_back([](double, double* z) { z[0] = 0.0; z[1] = 0.0; });
    secs.push_back([](double, double* z) { z[0] = 0.9; z[1] = 0.0; });
    auto rep = check_lift_uniqueness(sys, base, secs, 1e-3, 12, 25);

    out << "fitted theta = " << lr.fitted_rate.theta << " (model "
        << (lr.fitted_rate.model == DecayFit::Model::exponential ? "exponential" : "other")
        << ", " << lr.fitted_rate.points_used << " points), section gap = " << rep.max_pairwise
        << " vs 3 tol = " << rep.threshold;
    return fit_ok && rep.pass;
}

// ---------------------------------------------------------------- criterion 4
bool crit_negative_control(std::ostringstream& out) {
    auto sys = make_system("skew", {{"q", 0.3}, {"rate", 1.0}, {"amp", 0.0}});
    LiftOptions opt;
    opt.tol = 1e-3;
    opt.n_max = 8;
    opt.n_cells = 10;
    opt.start_section = [](double y, double* z) { z[0] = std::cos(40.0 * y); };
    auto lr = lift_measure(sys, stratified_base_cloud(sys.geom, 2000, 5), opt);
    double min_trace = 1e18;
    for (auto& [n, d] : lr.cauchy_trace) min_trace = std::min(min_trace, d);
    auto shrink = estimate_shrinking(sys, 15, 30, 20, 3);
    out << "converged = " << lr.converged << ", min consecutive distance = " << min_trace
        << " (tol 1e-3), non_shrinking flag = " << shrink.non_shrinking;
    return !lr.converged && min_trace > 3e-3 && shrink.non_shrinking;
}

// ---------------------------------------------------------------- criterion 5
bool crit_doubling_covariance(std::ostringstream& out) {
    auto sys = doubling_base_system();
    OrbitSpec orbit;
    orbit.length = 1000000;
    orbit.seed = 2024;
    auto f = [](const double* x) { return x[0]; };
    auto tr = correlations_orbit(sys, orbit, f, f, 10);
    double worst_sigmas = 0;
    for (int n = 0; n <= 10; ++n) {
        double expected = n == 0 ? 1.0 / 12.0 : std::pow(2.0, -n) / 12.0;
        worst_sigmas = std::max(worst_sigmas,
                                std::fabs(tr.values[n].second - expected) / tr.std_errors[n]);
    }
    auto gk = green_kubo_variance(sys, orbit, f);
    out << "worst closed-form deviation = " << worst_sigmas
        << " standard errors (n <= 10); green-kubo sigma^2 = " << gk.variance;
    return worst_sigmas <= 3.0 && std::fabs(gk.variance - 0.25) <= 0.01;
}

// --------------------------------------------------------------- criterion 6a
bool crit_spectral_basics(std::ostringstream& out) {
    auto op = build_ulam(doubling_base_system(), 64, UlamOperator::Construction::exact_branches);
    auto spec = invariant_density(op, 1e-12);
    double worst_mass = 0;
    for (double mass : spec.invariant_density.masses)
        worst_mass = std::max(worst_mass, std::fabs(mass - 1.0 / 64));
    out << "leading eigenvalue = " << spec.leading_eigenvalue
        << ", worst density deviation from uniform = " << worst_mass;
    return std::fabs(spec.leading_eigenvalue - 1.0) <= 1e-6 && worst_mass <= 1e-9;
}

// --------------------------------------------------------------- criterion 6b
bool crit_second_modulus(std::ostringstream& out) {
    auto op = build_ulam(doubling_base_system(), 64, UlamOperator::Construction::exact_branches);
    auto spec = invariant_density(op, 1e-12);
    auto moduli = eigenvalue_moduli(op.dense(), 64);
    double dense_second = moduli[1];
    bool cross_ok = std::fabs(spec.second_modulus - dense_second) <= 0.02;
    bool band_ok = spec.second_modulus >= 0.45 && spec.second_modulus <= 0.55;
    out << "deflated power iteration = " << spec.second_modulus << " (collapsed = "
        << spec.collapsed << ", transient ratio = " << spec.transient_ratio
        << "), dense eigensolve = " << dense_second
        << "; the dyadic-grid matrix is 1 (+) nilpotent, so the 0.5 band cannot be met";
    return cross_ok && band_ok;
}

// ---------------------------------------------------------------- criterion 7
bool crit_pm_density(std::ostringstream& out) {
    auto op = build_ulam(pm_base_system(0.3), 2048, UlamOperator::Construction::exact_branches);
    auto spec = invariant_density(op, 1e-12);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int i = 2; i <= 64; ++i) {
        double x = std::log(op.cell_center(i));
        double y = std::log(spec.invariant_density.masses[i] * 2048);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    out << "log-log density slope over cells 2..64 = " << slope << " (target -0.3 +- 0.1)";
    return std::fabs(slope + 0.3) <= 0.1;
}

// ---------------------------------------------------------------- criterion 8
bool crit_coboundary(std::ostringstream& out) {
    // closed-form toy
    Box seg;
    seg.dim = 1;
    seg.lo = {-1.0, 0, 0};
    seg.hi = {1.0, 0, 0};
    auto toy = make_skew_product("toy", [](double y) { return wrap01(2.0 * y); },
                                 [](double, const double* z, double* w) { w[0] = 0.4 * z[0]; },
                                 seg, true);
    toy.base_branches = doubling_base_system().base_branches;
    Potential phi_toy;
    phi_toy.f = [](const double* x) { return x[1]; };
    phi_toy.modulus = ModulusClass::holder(1.0);
    phi_toy.hol_constant = 2.0;
    auto shrink_toy = estimate_shrinking(toy, 25, 50, 40, 3);
    auto cob_toy = build_coboundary(toy, phi_toy, shrink_toy, 1e-4);
    bool toy_ok = cob_toy.fiber_oscillation <= cob_toy.truncation_bound * 1.1;

    // solenoid certificate and energies
    auto sys = solenoid_system(0.4);
    auto shrink = estimate_shrinking(sys, 25, 60, 40, 11);
    Potential phi;
    phi.f = [](const double* x) { return std::hypot(x[1], x[2]); };
    phi.modulus = ModulusClass::holder(1.0);
    phi.hol_constant = 2.0;
    auto cob = build_coboundary(sys, phi, shrink, 1e-3);
    bool osc_ok = cob.fiber_oscillation <= 1e-3 + 2e-4;

    LiftOptions lopt;
    lopt.compute_trace = false;
    lopt.n_max = 10;
    auto lifted = lift_measure(sys, stratified_base_cloud(sys.geom, 100000, 23), lopt);
    auto op = build_ulam(sys, 64, UlamOperator::Construction::exact_branches);
    auto spec = invariant_density(op, 1e-12);
    auto en = energy_consistency(sys, phi, cob, lifted.lifted, spec.invariant_density);
    // 1e-3 oscillation target plus Monte Carlo and grid-quadrature slack
    bool energy_ok = en.total_gap <= 1e-3 + 5e-3;

    out << "toy oscillation " << cob_toy.fiber_oscillation << " vs bound "
        << cob_toy.truncation_bound << "; solenoid oscillation " << cob.fiber_oscillation
        << " (N = " << cob.N << "), energy gap |mu(phi) - equilibrium(phi_check)| = "
        << en.total_gap;
    return toy_ok && osc_ok && energy_ok;
}

// ------------------------------------------------------- criteria 9a and 9b
struct QuotientScan {
    std::vector<double> q_gamma, q_above;
    double gamma = 0;
};

QuotientScan holder_quotients() {
    auto sys = solenoid_system(0.4);
    auto shrink = estimate_shrinking(sys, 25, 60, 40, 11);
    Potential phi;
    phi.f = [](const double* x) { return std::hypot(x[1], x[2]); };
    phi.modulus = ModulusClass::holder(1.0);
    phi.hol_constant = 2.0;
    auto cob = build_coboundary(sys, phi, shrink, 1e-5);
    double L = estimate_lipschitz(sys, 4000, 3);
    QuotientScan scan;
    scan.gamma = exponent_arithmetic(1.0, 1.0, L, shrink.fit, ModulusClass::Kind::holder).exponent;
    CounterRng rng{17};
    for (int j = 3; j <= 12; ++j) {
        double r = std::pow(2.0, -j);
        double qg = 0, qa = 0;
        for (int t = 0; t < 3000; ++t) {
            double y = rng.uniform(j, t);
            double y2 = wrap01(y + r / 2.0); // base distance r in the normalized metric
            double d = std::fabs(cob.phi_check(y) - cob.phi_check(y2));
            qg = std::max(qg, d / std::pow(r, scan.gamma));
            qa = std::max(qa, d / std::pow(r, scan.gamma + 0.2));
        }
        scan.q_gamma.push_back(qg);
        scan.q_above.push_back(qa);
    }
    return scan;
}

bool crit_exponent_bounded(std::ostringstream& out) {
    auto scan = holder_quotients();
    double qmax = 0;
    for (double q : scan.q_gamma) qmax = std::max(qmax, q);
    out << "gamma = " << scan.gamma << ", quotient at gamma spans [" << scan.q_gamma.back()
        << ", " << qmax << "] over scales 2^-3..2^-12 (first scale " << scan.q_gamma.front()
        << ")";
    // bounded across scales: no growth beyond a factor 2 of the coarse-scale level
    return qmax <= 2.0 * scan.q_gamma.front();
}

bool crit_exponent_divergence(std::ostringstream& out) {
    auto scan = holder_quotients();
    double coarse = std::min(scan.q_above[0], scan.q_above[1]);
    double fine = std::max(scan.q_above[8], scan.q_above[9]);
    out << "quotient at gamma+0.2: coarse scales " << coarse << ", finest scales " << fine
        << ", growth factor = " << fine / coarse << " (tenfold required)";
    return fine >= 10.0 * coarse;
}

// --------------------------------------------------------------- criterion 10
bool crit_corr_bound(std::ostringstream& out) {
    auto sys = solenoid_system(0.4);
    auto op = build_ulam(sys, 64, UlamOperator::Construction::exact_branches);
    auto shrink = estimate_shrinking(sys, 20, 40, 30, 2);
    OrbitSpec orbit;
    orbit.length = 400000;
    orbit.seed = 14;
    auto f = [](const double* x) { return x[1]; };
    auto g = [](const double* x) { return std::hypot(x[1], x[2]); };
    double worst = 1e18;
    int fails = 0;
    for (int k = 0; k <= 4; ++k)
        for (int m = 1; m <= 4; ++m) {
            auto rep = correlation_lift_bound_check(sys, op, f, g, 2.0, k, m, shrink, orbit);
            worst = std::min(worst, rep.slack + 3.0 * rep.combined_se);
            if (!rep.pass) ++fails;
        }
    out << fails << " failures over 20 (k,m) pairs; min(slack + 3 se) = " << worst;
    return fails == 0;
}

// --------------------------------------------------------------- criterion 11
bool crit_clt(std::ostringstream& out) {
    auto sys = solenoid_system(0.4);
    LiftOptions lopt;
    lopt.compute_trace = false;
    lopt.n_max = 10;
    auto lifted = lift_measure(sys, stratified_base_cloud(sys.geom, 100000, 5), lopt);
    auto rep = clt_diagnostic(sys, lifted.lifted, [](const double* x) { return x[0]; }, 10000,
                              1000, 2);
    auto base_sys = doubling_base_system();
    OrbitSpec orbit;
    orbit.length = 1000000;
    orbit.seed = 2;
    auto gk = green_kubo_variance(base_sys, orbit, [](const double* x) { return x[0]; });
    double sigma_base = std::sqrt(gk.variance);
    double rel = std::fabs(rep.green_kubo_sigma - sigma_base) / sigma_base;
    out << "ks = " << rep.ks_statistic << " (threshold 0.05), lifted sigma = "
        << rep.green_kubo_sigma << " vs base sigma = " << sigma_base << " (rel " << rel << ")";
    return rep.ks_statistic < 0.05 && rel <= 0.05;
}

// --------------------------------------------------------------- criterion 12
bool crit_disintegration(std::ostringstream& out) {
    auto sys = solenoid_system(0.4);
    auto op = build_ulam(sys, 64, UlamOperator::Construction::exact_branches);
    auto f = [](const double* x) { return x[1]; };
    auto via_op = disintegration_via_transfer(sys, op, f, 12, 192);
    LiftOptions lopt;
    lopt.compute_trace = false;
    lopt.n_max = 10; // stays below the stratification-degradation horizon
    auto lifted = lift_measure(sys, stratified_base_cloud(sys.geom, 100000, 7), lopt);
    auto dis = disintegrate(lifted.lifted, 64);
    double sup = 0;
    for (int c = 0; c < 64; ++c)
        sup = std::max(sup, std::fabs(dis.conditional_mean(c, f) - via_op.values[c]));
    out << "sup over 64 cells |cloud conditional - transfer route| = " << sup
        << " (tolerance 0.02)";
    return sup <= 0.02;
}

// --------------------------------------------------------------- criterion 13
bool crit_attractor(std::ostringstream& out) {
    auto sys = solenoid_system(0.4);
    RenderOptions opt; // 512 px, odd base grid
    Raster prev = render_attractor(sys, 0, opt);
    bool nested = true;
    size_t last_lit = prev.lit_count();
    for (int n = 1; n <= 8; ++n) {
        Raster cur = render_attractor(sys, n, opt);
        nested = nested && cur.subset_of(prev.dilate());
        last_lit = cur.lit_count();
        prev = std::move(cur);
    }
    out << "images nest under 1-pixel dilation for n <= 8; final image has " << last_lit
        << " lit pixels";
    return nested && last_lit > 0;
}

// --------------------------------------------------------------- criterion 14
bool crit_determinism(std::ostringstream& out) {
    const char* env = std::getenv("FIBERLIFT_BIN");
    std::string bin = env ? env : (fs::exists("./fiberlift") ? "./fiberlift" : "build/fiberlift");
    auto dir = fs::temp_directory_path() / "fiberlift_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string cfg = (dir / "cfg.ini").string();
    write_file(cfg,
               "[system]\nname = solenoid\nlambda = 0.4\n\n[pipeline]\nname = lift\n\n"
               "[params]\natoms = 2000\ncells = 8\ntol = 0.001\nn_max = 6\nseed = 42\n");
    auto run = [&](const std::string& sub, int threads) {
        std::string cmd = bin + " --config " + cfg + " --out " + (dir / sub).string() +
                          " --threads " + std::to_string(threads) + " >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    if (run("a", 1) != 0 || run("b", 8) != 0) {
        out << "cli runs failed";
        return false;
    }
    bool csv_equal = read_file((dir / "a/trace.csv").string()) ==
                     read_file((dir / "b/trace.csv").string());
    auto ea = nlohmann::json::parse(read_file((dir / "a/envelope.json").string()));
    auto eb = nlohmann::json::parse(read_file((dir / "b/envelope.json").string()));
    ea.erase("timings");
    eb.erase("timings");
    bool env_equal = ea.dump() == eb.dump();
    out << "trace.csv byte-identical = " << csv_equal
        << ", envelope (timings stripped) identical = " << env_equal << " at 1 vs 8 threads";
    return csv_equal && env_equal;
}

} // namespace

int main(int argc, char** argv) {
    set_thread_count(2);
    std::vector<Criterion> criteria = {
        {"1", "exact transport matches brute-force vertex enumeration", crit_ot_oracle},
        {"2", "plain Wasserstein never exceeds the vertical value", crit_dominance},
        {"3", "lift trace contracts at the fiber ratio; sections agree", crit_lift},
        {"4", "identity fibers refuse to converge and are flagged", crit_negative_control},
        {"5", "doubling covariances and green-kubo variance", crit_doubling_covariance},
        {"6a", "doubling ulam: eigenvalue one and uniform density", crit_spectral_basics},
        {"6b", "doubling ulam: second modulus in the 0.5 band", crit_second_modulus},
        {"7", "pm density power law", crit_pm_density},
        {"8", "coboundary certificate and energy consistency", crit_coboundary},
        {"9a", "holder quotient bounded at the projected exponent", crit_exponent_bounded},
        {"9b", "holder quotient diverges tenfold above the exponent", crit_exponent_divergence},
        {"10", "correlation transfer inequality slack", crit_corr_bound},
        {"11", "clt diagnostic on the lifted measure", crit_clt},
        {"12", "conditional averages: transfer route vs binned cloud", crit_disintegration},
        {"13", "attractor images nest under iteration", crit_attractor},
        {"14", "byte-identical outputs across thread counts", crit_determinism},
    };

    std::string which = "all";
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) which = argv[++i];
    }

    int failures = 0;
    bool ran_any = false;
    for (auto& c : criteria) {
        if (which != "all" && which != c.id) continue;
        ran_any = true;
        auto t0 = std::chrono::steady_clock::now();
        std::ostringstream detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail << "exception: " << e.what();
        }
        auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("ACCEPTANCE %-3s %s [%.1fs] %s: %s\n", c.id.c_str(), ok ? "PASS" : "FAIL", dt,
                    c.label.c_str(), detail.str().c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (!ran_any) {
        std::fprintf(stderr, "unknown criterion id '%s'\n", which.c_str());
        return 2;
    }
    if (which == "all")
        std::printf("summary: %d of %zu criteria failed (6b and 9b are documented red)\n",
                    failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
