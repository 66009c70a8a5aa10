#include "fiberlift/thermo.hpp"
#include "fiberlift/errors.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fiberlift {

double estimate_hol_constant(const FiberedSystem& sys, const Potential& phi, int pairs,
                             uint64_t seed) {
    CounterRng rng{seed ^ 0x401cULL};
    double best = 0;
    std::array<double, kMaxDim> a{}, b{};
    for (int s = 0; s < pairs; ++s) {
        a[0] = rng.uniform(s, 0);
        b[0] = rng.uniform(s, 1);
        for (int c = 0; c < sys.dim_fiber; ++c) {
            double w = sys.geom.fiber.width(c);
            a[1 + c] = sys.geom.fiber.lo[c] + rng.uniform(s, 2 + 2 * c) * w;
            b[1 + c] = sys.geom.fiber.lo[c] + rng.uniform(s, 3 + 2 * c) * w;
        }
        double d = sys.geom.dist_total(a.data(), b.data());
        if (d < 1e-12) continue;
        double q = std::fabs(phi.f(a.data()) - phi.f(b.data())) / phi.modulus(d);
        best = std::max(best, q);
    }
    return best;
}

namespace {

// sum_{n>N} omega(fit(n)) under the fitted decay model; throws when the tail
// does not converge for the given modulus/decay combination.
double modulus_tail(const ModulusClass& omega, const DecayFit& fit, int N) {
    if (!fit.decays()) throw InfeasibilityError("coboundary: shrink model does not decay");
    const bool holder = omega.kind == ModulusClass::Kind::holder;
    const double al = omega.exponent;

    if (fit.model == DecayFit::Model::exponential && holder) {
        double ta = std::pow(fit.theta, al);
        return std::pow(fit.amplitude, al) * std::pow(ta, N + 1) / (1.0 - ta);
    }
    if (fit.model == DecayFit::Model::polynomial && !holder)
        throw InfeasibilityError(
            "coboundary: log-holder modulus with polynomially shrinking fibers never sums");
    if (fit.model == DecayFit::Model::polynomial && al * fit.degree <= 1.0) {
        std::ostringstream os;
        os << "coboundary: tail sum diverges, polynomial shrinking of degree " << fit.degree
           << " needs modulus exponent > " << 1.0 / fit.degree << " (alpha*d > 1)";
        throw InfeasibilityError(os.str());
    }
    if (fit.model == DecayFit::Model::exponential && !holder && al <= 1.0)
        throw InfeasibilityError(
            "coboundary: log-holder tail needs exponent alpha > 1 with exponential shrinking");

    // partial sum plus an integral remainder of the monotone tail
    double sum = 0;
    const int K = 20000;
    for (int n = N + 1; n <= N + K; ++n) sum += omega(fit.value(double(n)));
    double from = double(N + K);
    if (fit.model == DecayFit::Model::polynomial) {
        // omega(fit(n)) = (C^alpha) n^{-alpha d}
        double p = al * fit.degree;
        sum += std::pow(fit.amplitude, al) * std::pow(from, 1.0 - p) / (p - 1.0);
    } else {
        // omega(fit(n)) = (a + b n)^{-alpha}, b = log(1/theta); clamped early
        // terms are already inside the partial sum
        double b = -std::log(fit.theta);
        double a = std::log(omega.r_alpha) - std::log(fit.amplitude);
        sum += std::pow(a + b * from, 1.0 - al) / (b * (al - 1.0));
    }
    return sum;
}

} // namespace

CoboundaryResult build_coboundary(const FiberedSystem& sys, const Potential& phi,
                                  const ShrinkEstimate& shrink, double target_osc,
                                  const CoboundaryOptions& opt) {
    if (!shrink.fit.decays() || shrink.non_shrinking)
        throw InfeasibilityError("build_coboundary: fibers are not shrinking under the fitted model");
    if (target_osc <= 0) throw ParameterError("build_coboundary: target oscillation must be positive");

    CoboundaryResult res;
    if (phi.hol_constant > 0) {
        res.hol_constant = phi.hol_constant;
        // declared constants are audited on sampled pairs; excesses are
        // recorded rather than fatal
        CounterRng vrng{opt.seed ^ 0x401cULL};
        int viol = 0;
        std::array<double, kMaxDim> pa{}, pb{};
        for (int t = 0; t < 10000; ++t) {
            pa[0] = vrng.uniform(t, 0);
            pb[0] = vrng.uniform(t, 1);
            for (int c = 0; c < sys.dim_fiber; ++c) {
                double w = sys.geom.fiber.width(c);
                pa[1 + c] = sys.geom.fiber.lo[c] + vrng.uniform(t, 2 + 2 * c) * w;
                pb[1 + c] = sys.geom.fiber.lo[c] + vrng.uniform(t, 3 + 2 * c) * w;
            }
            double d = sys.geom.dist_total(pa.data(), pb.data());
            if (d < 1e-12) continue;
            if (std::fabs(phi.f(pa.data()) - phi.f(pb.data())) >
                phi.hol_constant * phi.modulus(d) * (1.0 + 1e-9))
                ++viol;
        }
        res.declared_constant_violations = viol;
    } else {
        res.hol_constant = estimate_hol_constant(sys, phi, 10000, opt.seed);
    }
    double H = res.hol_constant;

    // Smallest N whose inclusive tail (counting the N-th term as well) meets
    // the target; one step more conservative than the strict tail, so the
    // reported strict bound always clears the target with margin.
    int N = 0;
    const int N_cap = 100000;
    while (N < N_cap && 2.0 * H * modulus_tail(phi.modulus, shrink.fit, N - 1) > target_osc) ++N;
    if (N >= N_cap) throw InfeasibilityError("build_coboundary: truncation order exceeds cap");
    res.N = N;
    res.truncation_bound = 2.0 * H * modulus_tail(phi.modulus, shrink.fit, N);

    const FiberedSystem* s = &sys;
    auto phif = phi.f;
    int N_used = N;
    res.h_series = [s, phif, N_used](const double* x) {
        std::array<double, kMaxDim> a{}, b{}, t{};
        // orbit of x and of the section point over pi(x), advanced in lockstep;
        // shared keyed dither keeps the common base coordinate generic (exact
        // binary shifts would otherwise park dyadic points at zero) while both
        // orbits see bitwise the same base sequence
        for (int c = 0; c < s->dim_total(); ++c) a[c] = x[c];
        s->section(x[0], b.data());
        CounterRng rng{0xc0b0ULL};
        uint64_t ybits;
        std::memcpy(&ybits, &x[0], sizeof ybits);
        double sum = 0;
        for (int n = 0; n <= N_used; ++n) {
            sum += phif(b.data()) - phif(a.data());
            if (n == N_used) break;
            s->step_dithered(a.data(), t.data(), rng, ybits, uint64_t(n));
            a = t;
            s->step_dithered(b.data(), t.data(), rng, ybits, uint64_t(n));
            b = t;
        }
        return sum;
    };
    auto h = res.h_series;
    res.phi_hat = [s, phif, h](const double* x) {
        std::array<double, kMaxDim> tx{};
        s->step(x, tx.data());
        return phif(x) + h(x) - h(tx.data());
    };
    auto hat = res.phi_hat;
    res.phi_check = [s, hat](double y) {
        std::array<double, kMaxDim> sec{};
        s->section(y, sec.data());
        return hat(sec.data());
    };

    // measured oscillation over sampled fibers
    CounterRng rng{opt.seed};
    double worst = 0;
    for (int fIdx = 0; fIdx < opt.oscillation_fibers; ++fIdx) {
        double y = rng.uniform(0xf1be5ULL, fIdx);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::array<double, kMaxDim> x{};
        for (int k = 0; k < opt.oscillation_samples; ++k) {
            x[0] = y;
            for (int c = 0; c < sys.dim_fiber; ++c)
                x[1 + c] = sys.geom.fiber.lo[c] +
                           rng.uniform(fIdx, k, c) * sys.geom.fiber.width(c);
            double v = res.phi_hat(x.data());
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        worst = std::max(worst, hi - lo);
    }
    res.fiber_oscillation = worst;
    return res;
}

ModulusClass exponent_arithmetic(double alpha, double beta, double lipschitz_L,
                                 const DecayFit& shrink_fit, ModulusClass::Kind kind) {
    if (!shrink_fit.decays()) throw InfeasibilityError("exponent_arithmetic: no decaying shrink model");
    if (lipschitz_L < 1.0) throw ParameterError("exponent_arithmetic: L must be >= 1");

    if (shrink_fit.model == DecayFit::Model::exponential && kind == ModulusClass::Kind::holder) {
        if (alpha <= 0 || alpha > 1 || beta <= 0 || beta > 1)
            throw InfeasibilityError("exponent_arithmetic: holder case needs alpha, beta in (0,1]");
        double gamma = alpha * beta / (1.0 - std::log(lipschitz_L) / std::log(shrink_fit.theta));
        return ModulusClass::holder(gamma);
    }
    if (shrink_fit.model == DecayFit::Model::polynomial && kind == ModulusClass::Kind::holder) {
        double d = shrink_fit.degree;
        if (alpha * d <= 1.0) {
            std::ostringstream os;
            os << "exponent_arithmetic: polynomial case requires alpha > 1/d (alpha=" << alpha
               << ", d=" << d << ")";
            throw InfeasibilityError(os.str());
        }
        return ModulusClass::log_holder(alpha * d - 1.0);
    }
    if (shrink_fit.model == DecayFit::Model::exponential && kind == ModulusClass::Kind::log_holder) {
        if (alpha <= 1.0)
            throw InfeasibilityError("exponent_arithmetic: log-holder case requires alpha > 1");
        return ModulusClass::log_holder((alpha - 1.0) / 2.0);
    }
    throw InfeasibilityError("exponent_arithmetic: combination not covered");
}

std::vector<double> WeightedTransfer::apply(const std::vector<double>& f, bool use_normalized) const {
    const auto& M = use_normalized ? normalized : matrix;
    std::vector<double> out(n_cells, 0.0);
    for (int j = 0; j < n_cells; ++j) {
        double s = 0;
        for (int i = 0; i < n_cells; ++i) s += M[size_t(j) * n_cells + i] * f[i];
        out[j] = s;
    }
    return out;
}

WeightedTransfer weighted_transfer(const FiberedSystem& sys,
                                   const std::function<double(double)>& phi_check, int m) {
    if (sys.base_branches.empty())
        throw CapabilityError("weighted_transfer: no branch decomposition available");
    WeightedTransfer wt;
    wt.n_cells = m;
    wt.matrix.assign(size_t(m) * m, 0.0);
    // target cell j receives, from each branch, the preimage cells of cell j
    // weighted by exp(potential) and the branch derivative (jacobian-free sum)
    for (int i = 0; i < m; ++i) {
        double cl = double(i) / m, cr = double(i + 1) / m;
        for (const auto& b : sys.base_branches) {
            double lo = std::max(cl, b.lo), hi = std::min(cr, b.hi);
            if (hi <= lo) continue;
            double ia = b.forward(lo), ib = b.forward(hi);
            int j0 = std::max(0, std::min(int(std::floor(ia * m)), m - 1));
            int j1 = std::min(int(std::floor(ib * m - 1e-15)), m - 1);
            for (int j = j0; j <= j1; ++j) {
                double ta = std::max(ia, double(j) / m);
                double tb = std::min(ib, double(j + 1) / m);
                if (tb <= ta) continue;
                double da = b.inverse(ta), db = b.inverse(tb);
                double rep = 0.5 * (da + db); // midpoint of the preimage piece
                double cell_frac = (db - da) * m;
                wt.matrix[size_t(j) * m + i] +=
                    cell_frac * b.deriv(rep) * std::exp(phi_check(rep));
            }
        }
    }

    // leading eigen-pair by power iteration (column action), dual by row action
    std::vector<double> v(m, 1.0);
    double rho = 0;
    for (int it = 0; it < 100000; ++it) {
        std::vector<double> nv = wt.apply(v, false);
        double nn = 0;
        for (double x : nv) nn += std::fabs(x);
        nn /= m;
        for (double& x : nv) x /= nn;
        double change = 0;
        for (int i = 0; i < m; ++i) change += std::fabs(nv[i] - v[i]);
        v = std::move(nv);
        rho = nn;
        if (change < 1e-13 * m) break;
    }
    wt.leading_eigenvalue = rho;
    wt.eigenfunction = v;

    std::vector<double> u(m, 1.0 / m);
    for (int it = 0; it < 100000; ++it) {
        std::vector<double> nu(m, 0.0);
        for (int j = 0; j < m; ++j) {
            double uj = u[j];
            if (uj == 0) continue;
            for (int i = 0; i < m; ++i) nu[i] += uj * wt.matrix[size_t(j) * m + i];
        }
        double nn = std::accumulate(nu.begin(), nu.end(), 0.0);
        for (double& x : nu) x /= nn;
        double change = 0;
        for (int i = 0; i < m; ++i) change += std::fabs(nu[i] - u[i]);
        u = std::move(nu);
        if (change < 1e-13) break;
    }
    wt.dual_masses = u;

    wt.equilibrium.n_cells = m;
    wt.equilibrium.masses.resize(m);
    double tot = 0;
    for (int i = 0; i < m; ++i) {
        wt.equilibrium.masses[i] = u[i] * v[i];
        tot += wt.equilibrium.masses[i];
    }
    for (double& x : wt.equilibrium.masses) x /= tot;

    wt.normalized.assign(size_t(m) * m, 0.0);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
            wt.normalized[size_t(j) * m + i] =
                wt.matrix[size_t(j) * m + i] * v[i] / (rho * v[j]);
    return wt;
}

EnergyReport energy_consistency(const FiberedSystem& sys, const Potential& phi,
                                const CoboundaryResult& cob, const EmpiricalMeasure& lifted,
                                const GridMeasure& base_equilibrium) {
    EnergyReport rep;
    rep.mu_phi = integrate(lifted, phi.f);
    rep.mu_phi_hat = integrate(lifted, cob.phi_hat);
    double s = 0;
    CounterRng rng{0xe6e9ULL};
    for (int i = 0; i < base_equilibrium.n_cells; ++i) {
        // jittered in-cell nodes: phi_check runs an orbit, and exact dyadic
        // cell centers collapse under binary-shift bases
        double rep_y = (i + 0.2 + 0.6 * rng.uniform(uint64_t(i))) / base_equilibrium.n_cells;
        s += base_equilibrium.masses[i] * cob.phi_check(rep_y);
    }
    rep.base_phi_check = s;
    rep.coboundary_gap = std::fabs(rep.mu_phi - rep.mu_phi_hat);
    rep.projection_gap = std::fabs(rep.mu_phi_hat - rep.base_phi_check);
    rep.total_gap = std::fabs(rep.mu_phi - rep.base_phi_check);
    (void)sys;
    return rep;
}

} // namespace fiberlift
