#include "fiberlift/stats.hpp"
#include "fiberlift/errors.hpp"
#include "fiberlift/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fiberlift {

double correlation_atoms(const FiberedSystem& sys, const EmpiricalMeasure& mu, const Observable& f,
                         const Observable& g, int n) {
    EmpiricalMeasure iter = mu;
    for (int k = 0; k < n; ++k) iter = pushforward(iter, sys);
    double cross = 0, mf = 0, mg = 0;
    for (size_t i = 0; i < mu.size(); ++i) {
        double fi = f(iter.point(i)), gi = g(mu.point(i));
        cross += mu.weights[i] * fi * gi;
        mf += mu.weights[i] * fi;
        mg += mu.weights[i] * gi;
    }
    return std::fabs(cross - mf * mg);
}

namespace {

struct OrbitArrays {
    std::vector<double> fs, gs;
    double mean_f = 0, mean_g = 0, l1_g = 0;
};

OrbitArrays run_orbit(const FiberedSystem& sys, const OrbitSpec& orbit, const Observable& f,
                      const Observable& g) {
    CounterRng rng{orbit.seed};
    std::array<double, kMaxDim> x{}, t{};
    if (!orbit.start.empty()) {
        std::copy(orbit.start.begin(), orbit.start.end(), x.begin());
    } else {
        x[0] = rng.uniform(0xa11ceULL, 0);
        for (int c = 0; c < sys.dim_fiber; ++c)
            x[1 + c] = sys.geom.fiber.lo[c] + rng.uniform(0xa11ceULL, 1 + c) * sys.geom.fiber.width(c);
    }
    OrbitArrays oa;
    oa.fs.resize(orbit.length);
    oa.gs.resize(orbit.length);
    for (long k = 0; k < orbit.burn_in; ++k) {
        sys.step_dithered(x.data(), t.data(), rng, 7, uint64_t(k));
        x = t;
    }
    for (long k = 0; k < orbit.length; ++k) {
        oa.fs[k] = f(x.data());
        oa.gs[k] = g(x.data());
        oa.mean_f += oa.fs[k];
        oa.mean_g += oa.gs[k];
        oa.l1_g += std::fabs(oa.gs[k]);
        sys.step_dithered(x.data(), t.data(), rng, 7, uint64_t(orbit.burn_in + k));
        x = t;
    }
    oa.mean_f /= double(orbit.length);
    oa.mean_g /= double(orbit.length);
    oa.l1_g /= double(orbit.length);
    return oa;
}

// covariance of (f shifted by n, g) over the orbit arrays, with batch-mean SE;
// means are taken over the same lag windows so constants cancel exactly
std::pair<double, double> lagged_cov(const OrbitArrays& oa, int n) {
    long M = long(oa.fs.size()) - n;
    if (M < 10) throw ParameterError("orbit too short for requested lag");
    const int B = 32;
    long batch = M / B;
    long used = batch * B;
    double total = 0, wf = 0, wg = 0;
    std::vector<double> bm(size_t(B), 0.0);
    for (int b = 0; b < B; ++b) {
        double s = 0;
        for (long k = b * batch; k < (b + 1) * batch; ++k) {
            s += oa.fs[k + n] * oa.gs[k];
            wf += oa.fs[k + n];
            wg += oa.gs[k];
        }
        bm[b] = s / double(batch);
        total += s;
    }
    double mean_prod = total / double(used);
    double cov = mean_prod - (wf / used) * (wg / used);
    double var = 0;
    for (int b = 0; b < B; ++b) var += (bm[b] - mean_prod) * (bm[b] - mean_prod);
    var /= double(B - 1);
    double se = std::sqrt(var / B);
    return {cov, se};
}

} // namespace

CorrelationTrace correlations_orbit(const FiberedSystem& sys, const OrbitSpec& orbit,
                                    const Observable& f, const Observable& g, int n_max) {
    OrbitArrays oa = run_orbit(sys, orbit, f, g);
    CorrelationTrace tr;
    tr.estimator = "orbit_average";
    tr.mean_f = oa.mean_f;
    tr.mean_g = oa.mean_g;
    tr.l1_g = oa.l1_g;
    for (int n = 0; n <= n_max; ++n) {
        auto [cov, se] = lagged_cov(oa, n);
        tr.values.push_back({double(n), std::fabs(cov)});
        tr.std_errors.push_back(se);
    }
    tr.fit = fit_decay(tr.values);
    return tr;
}

CorrelationTrace correlations_operator(const UlamOperator& op, const SpectralReport& spec,
                                       const std::vector<double>& f, const std::vector<double>& g,
                                       int n_max) {
    const int m = op.n_cells;
    const auto& masses = spec.invariant_density.masses;
    CorrelationTrace tr;
    tr.estimator = "operator_powers";
    double mf = 0, mg = 0, l1g = 0;
    for (int i = 0; i < m; ++i) {
        mf += masses[i] * f[i];
        mg += masses[i] * g[i];
        l1g += masses[i] * std::fabs(g[i]);
    }
    tr.mean_f = mf;
    tr.mean_g = mg;
    tr.l1_g = l1g;
    std::vector<double> gc(m);
    for (int i = 0; i < m; ++i) gc[i] = g[i] - mg;
    // Corr_n = |integral of f . S^n * g dmu - mf*mg| = |<f, L^n g_c>_mu|
    std::vector<double> iter = gc;
    for (int n = 0; n <= n_max; ++n) {
        double s = 0;
        for (int i = 0; i < m; ++i) s += masses[i] * f[i] * iter[i];
        tr.values.push_back({double(n), std::fabs(s)});
        tr.std_errors.push_back(0.0);
        if (n < n_max) iter = transfer_wrt_invariant(op, masses, iter);
    }
    tr.fit = fit_decay(tr.values);
    return tr;
}

CorrBoundReport correlation_lift_bound_check(const FiberedSystem& sys, const UlamOperator& op,
                                             const Observable& f, const Observable& g,
                                             double lip_f, int k, int m,
                                             const ShrinkEstimate& shrink, const OrbitSpec& orbit) {
    CorrBoundReport rep;
    rep.k = k;
    rep.m = m;

    // left side: total-space correlation at lag k+m
    OrbitArrays oa = run_orbit(sys, orbit, f, g);
    auto [cov, se] = lagged_cov(oa, k + m);
    rep.lhs = std::fabs(cov);
    rep.combined_se = se;

    // right side: base correlation of the conditional averages at lag m
    const FiberedSystem* s = &sys;
    auto fk = [s, &f, k](const double* x) {
        std::array<double, kMaxDim> a{}, t{};
        for (int c = 0; c < s->dim_total(); ++c) a[c] = x[c];
        for (int i = 0; i < k; ++i) {
            s->step(a.data(), t.data());
            a = t;
        }
        return f(a.data());
    };
    int depth = std::max(12, k + 6);
    TransferDisintegration xf = disintegration_via_transfer(sys, op, fk, depth);
    TransferDisintegration xg = disintegration_via_transfer(sys, op, g, depth);
    SpectralReport spec = invariant_density(op, 1e-13);
    CorrelationTrace base = correlations_operator(op, spec, xf.values, xg.values, m);
    rep.rhs_corr = base.values[size_t(m)].second;
    // quadrature slack of the two grid estimates enters the certified side
    rep.combined_se += xf.successive_difference + xg.successive_difference;

    double a_k = shrink.envelope(double(k));
    rep.rhs_modulus = lip_f * a_k * oa.l1_g;
    rep.slack = rep.rhs_corr + rep.rhs_modulus - rep.lhs;
    rep.pass = rep.slack >= -3.0 * rep.combined_se;
    return rep;
}

GreenKubo green_kubo_variance(const FiberedSystem& sys, const OrbitSpec& orbit, const Observable& f,
                              int n_cap) {
    OrbitArrays oa = run_orbit(sys, orbit, f, f);
    GreenKubo gk;
    auto [c0, se0] = lagged_cov(oa, 0);
    gk.c0 = c0;
    gk.variance = c0;
    gk.noise_floor = 3.0 * se0;
    std::vector<double> pending; // sub-floor terms not yet committed
    for (int n = 1; n <= n_cap; ++n) {
        auto [cn, sen] = lagged_cov(oa, n);
        gk.covariances.push_back(cn);
        gk.noise_floor = 3.0 * sen;
        if (std::fabs(cn) < gk.noise_floor) {
            pending.push_back(cn);
            if (pending.size() >= 3) break; // trailing noise run: excluded
        } else {
            for (double c : pending) gk.variance += 2.0 * c; // isolated dips count
            pending.clear();
            gk.variance += 2.0 * cn;
            gk.terms_used = n;
        }
    }
    return gk;
}

CltReport clt_diagnostic(const FiberedSystem& sys, const EmpiricalMeasure& mu, const Observable& f,
                         int n_block, int samples, uint64_t seed) {
    if (n_block < 100 || samples < 100)
        throw ParameterError("clt_diagnostic: need n_block >= 100 and samples >= 100");
    CltReport rep;
    rep.n_block = n_block;
    rep.samples = samples;

    OrbitSpec gk_orbit;
    gk_orbit.length = 1000000;
    gk_orbit.burn_in = 1000;
    gk_orbit.seed = seed ^ 0x6cb0ULL;
    GreenKubo gk = green_kubo_variance(sys, gk_orbit, f);

    if (gk.variance <= 1e-15) {
        rep.degenerate = true;
        rep.green_kubo_sigma = 0;
        return rep;
    }
    rep.green_kubo_sigma = std::sqrt(gk.variance);

    // cumulative weights for start-point sampling
    std::vector<double> cum(mu.size());
    double acc = 0;
    for (size_t i = 0; i < mu.size(); ++i) {
        acc += mu.weights[i];
        cum[i] = acc;
    }
    double mean_f = integrate(mu, f);

    CounterRng rng{seed};
    std::vector<double> sums(samples, 0.0);
    parallel_for(size_t(samples), [&](size_t sIdx) {
        double u = rng.uniform(0xc17ULL, sIdx);
        size_t idx = size_t(std::lower_bound(cum.begin(), cum.end(), u * acc) - cum.begin());
        if (idx >= mu.size()) idx = mu.size() - 1;
        std::array<double, kMaxDim> x{}, t{};
        for (int c = 0; c < mu.dim; ++c) x[c] = mu.point(idx)[c];
        double s = 0;
        for (int kStep = 0; kStep < n_block; ++kStep) {
            sys.step_dithered(x.data(), t.data(), rng, 0xb10cULL ^ sIdx, uint64_t(kStep));
            x = t;
            s += f(x.data());
        }
        sums[sIdx] = (s - n_block * mean_f) / std::sqrt(double(n_block));
    });

    double sm = 0, sv = 0;
    for (double s : sums) sm += s;
    sm /= samples;
    for (double s : sums) sv += (s - sm) * (s - sm);
    sv /= double(samples - 1);
    rep.fitted_mean = sm;
    rep.fitted_sigma = std::sqrt(sv);
    rep.mean_f = mean_f;

    std::sort(sums.begin(), sums.end());
    double ks = 0;
    for (int i = 0; i < samples; ++i) {
        double F = normal_cdf(sums[i], 0.0, rep.green_kubo_sigma);
        ks = std::max(ks, std::fabs(double(i + 1) / samples - F));
        ks = std::max(ks, std::fabs(F - double(i) / samples));
    }
    rep.ks_statistic = ks;
    return rep;
}

double normal_cdf(double x, double mean, double sigma) {
    return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0)));
}

} // namespace fiberlift
