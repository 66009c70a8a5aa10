#include "fiberlift/ulam.hpp"
#include "fiberlift/errors.hpp"
#include "fiberlift/io.hpp"
#include "fiberlift/parallel.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <numeric>

namespace fiberlift {

std::vector<double> UlamOperator::apply_density(const std::vector<double>& rho) const {
    std::vector<double> out(n_cells, 0.0);
    for (int i = 0; i < n_cells; ++i) {
        double r = rho[i];
        if (r == 0) continue;
        for (auto& [j, p] : rows[i]) out[j] += r * p;
    }
    return out;
}

std::vector<double> UlamOperator::apply_observable(const std::vector<double>& f) const {
    std::vector<double> out(n_cells, 0.0);
    for (int i = 0; i < n_cells; ++i) {
        double s = 0;
        for (auto& [j, p] : rows[i]) s += p * f[j];
        out[i] = s;
    }
    return out;
}

std::vector<double> UlamOperator::dense() const {
    std::vector<double> d(size_t(n_cells) * n_cells, 0.0);
    for (int i = 0; i < n_cells; ++i)
        for (auto& [j, p] : rows[i]) d[size_t(i) * n_cells + j] += p;
    return d;
}

double UlamOperator::max_row_sum_error() const {
    double worst = 0;
    for (auto& row : rows) {
        double s = 0;
        for (auto& [j, p] : row) s += p;
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    return worst;
}

std::string UlamOperator::to_csv() const {
    std::string out = "i,j,p\n";
    for (int i = 0; i < n_cells; ++i)
        for (auto& [j, p] : rows[i]) {
            out += std::to_string(i);
            out += ',';
            out += std::to_string(j);
            out += ',';
            out += format_double(p);
            out += '\n';
        }
    return out;
}

UlamOperator build_ulam(const FiberedSystem& sys, int m, UlamOperator::Construction construction,
                        long samples_per_cell, uint64_t seed) {
    if (m < 2) throw ParameterError("build_ulam: need at least 2 cells");
    UlamOperator op;
    op.n_cells = m;
    op.construction = construction;
    op.rows.assign(m, {});

    if (construction == UlamOperator::Construction::exact_branches) {
        if (sys.base_branches.empty())
            throw CapabilityError("build_ulam: no branch decomposition available for exact construction");
        parallel_for(size_t(m), [&](size_t i) {
            double cl = double(i) / m, cr = double(i + 1) / m;
            std::vector<std::pair<int, double>> row;
            for (const auto& b : sys.base_branches) {
                double lo = std::max(cl, b.lo), hi = std::min(cr, b.hi);
                if (hi <= lo) continue;
                double ia = b.forward(lo), ib = b.forward(hi);
                int j0 = std::min(int(std::floor(ia * m)), m - 1);
                int j1 = std::min(int(std::floor(ib * m - 1e-15)), m - 1);
                for (int j = std::max(0, j0); j <= j1; ++j) {
                    double ta = std::max(ia, double(j) / m);
                    double tb = std::min(ib, double(j + 1) / m);
                    if (tb <= ta) continue;
                    double mass = (b.inverse(tb) - b.inverse(ta)) * m;
                    if (mass > 0) row.push_back({j, mass});
                }
            }
            std::sort(row.begin(), row.end());
            // merge duplicate targets
            std::vector<std::pair<int, double>> merged;
            for (auto& e : row) {
                if (!merged.empty() && merged.back().first == e.first)
                    merged.back().second += e.second;
                else
                    merged.push_back(e);
            }
            op.rows[i] = std::move(merged);
        });
    } else {
        op.mc_samples = samples_per_cell;
        op.mc_seed = seed;
        CounterRng rng{seed};
        parallel_for(size_t(m), [&](size_t i) {
            std::vector<long> counts(m, 0);
            for (long s = 0; s < samples_per_cell; ++s) {
                double y = (double(i) + rng.uniform(i, uint64_t(s))) / m;
                counts[cell_of(sys.apply_S(y), m)]++;
            }
            std::vector<std::pair<int, double>> row;
            for (int j = 0; j < m; ++j)
                if (counts[j] > 0) row.push_back({j, double(counts[j]) / double(samples_per_cell)});
            op.rows[i] = std::move(row);
        });
    }
    return op;
}

namespace {

double l1(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += std::fabs(x);
    return s;
}

} // namespace

SpectralReport invariant_density(const UlamOperator& op, double tol, int max_iterations) {
    const int m = op.n_cells;
    SpectralReport rep;
    std::vector<double> rho(m, 1.0 / m);
    int it = 0;
    double change = 0;
    for (; it < max_iterations; ++it) {
        std::vector<double> next = op.apply_density(rho);
        double mass = std::accumulate(next.begin(), next.end(), 0.0);
        rep.leading_eigenvalue = mass; // row sums stay within their construction error of 1
        for (double& x : next) x /= mass;
        change = 0;
        for (int i = 0; i < m; ++i) change += std::fabs(next[i] - rho[i]);
        rho = std::move(next);
        if (change < tol) break;
    }
    if (change >= tol) throw ConvergenceError("invariant_density: power iteration did not settle");
    rep.iterations = it + 1;
    rep.invariant_density.n_cells = m;
    rep.invariant_density.masses = rho;

    // Deflated power iteration for the second modulus. The invariant
    // projection is v -> v - (sum v) * rho (left eigenvector rho, right
    // eigenvector the constant function).
    CounterRng rng{0x5ecadULL};
    double best = 0;
    bool any_converged = false;
    bool any_collapsed = false;
    std::vector<double> ratios_early;
    for (int restart = 0; restart < 3; ++restart) {
        std::vector<double> v(m);
        for (int i = 0; i < m; ++i) v[i] = rng.uniform(uint64_t(restart), uint64_t(i)) - 0.5;
        auto deflate = [&](std::vector<double>& w) {
            double s = std::accumulate(w.begin(), w.end(), 0.0);
            for (int i = 0; i < m; ++i) w[i] -= s * rho[i];
        };
        deflate(v);
        double norm0 = l1(v);
        if (norm0 == 0) continue;
        for (double& x : v) x /= norm0;

        double r_prev = 0, prev_est = -1, est = 0;
        int stable = 0;
        bool converged = false, collapsed = false;
        for (int k = 1; k <= 600; ++k) {
            v = op.apply_density(v);
            deflate(v);
            double nn = l1(v); // one-step ratio: the iterate was normalized
            if (nn < 1e-280) {
                collapsed = true;
                break;
            }
            if (restart == 0 && k <= 8) ratios_early.push_back(nn);
            for (double& x : v) x /= nn;
            if (k >= 2) {
                // geometric mean of consecutive ratios; steady for complex pairs
                double s = std::sqrt(nn * r_prev);
                if (prev_est > 0 && std::fabs(s - prev_est) < 1e-5 * std::max(s, 1e-12)) {
                    if (++stable >= 5) {
                        est = s;
                        converged = true;
                        break;
                    }
                } else {
                    stable = 0;
                }
                prev_est = s;
                est = s;
            }
            r_prev = nn;
        }
        if (collapsed) {
            any_collapsed = true;
            continue;
        }
        if (converged) any_converged = true;
        best = std::max(best, est);
    }
    if (any_collapsed && !any_converged) {
        rep.collapsed = true;
        rep.second_modulus = 0.0; // remainder is nilpotent to numerical precision
    } else {
        rep.second_modulus = best;
        rep.second_converged = any_converged;
    }
    if (!ratios_early.empty()) {
        std::sort(ratios_early.begin(), ratios_early.end());
        rep.transient_ratio = ratios_early[ratios_early.size() / 2];
    }
    rep.gap = 1.0 - rep.second_modulus;
    return rep;
}

std::vector<double> transfer_wrt_invariant(const UlamOperator& op, const std::vector<double>& masses,
                                           const std::vector<double>& f) {
    const int m = op.n_cells;
    std::vector<double> weighted(m);
    for (int i = 0; i < m; ++i) weighted[i] = f[i] * masses[i];
    std::vector<double> pushed = op.apply_density(weighted);
    std::vector<double> out(m, 0.0);
    for (int j = 0; j < m; ++j) out[j] = masses[j] > 1e-300 ? pushed[j] / masses[j] : 0.0;
    return out;
}

OperatorDecay operator_decay(const UlamOperator& op, const SpectralReport& spec,
                             std::vector<double> f, int n_max) {
    const int m = op.n_cells;
    const auto& masses = spec.invariant_density.masses;
    double mean = 0;
    for (int i = 0; i < m; ++i) mean += masses[i] * f[i];
    OperatorDecay out;
    if (std::fabs(mean) > 1e-9) {
        out.centered_by = mean;
        for (double& x : f) x -= mean;
    }
    for (int n = 1; n <= n_max; ++n) {
        f = transfer_wrt_invariant(op, masses, f);
        double sup = 0;
        for (double x : f) sup = std::max(sup, std::fabs(x));
        out.sup_norms.push_back({double(n), sup});
    }
    out.fit = fit_decay(out.sup_norms);
    return out;
}

TransferDisintegration disintegration_via_transfer(const FiberedSystem& sys, const UlamOperator& op,
                                                   const std::function<double(const double*)>& f,
                                                   int n, int samples_per_cell) {
    if (n < 1) throw ParameterError("disintegration_via_transfer: n must be >= 1");
    const int m = op.n_cells;
    SpectralReport spec = invariant_density(op, 1e-13);
    const auto& masses = spec.invariant_density.masses;

    // Cell averages of the orbit observable over jittered in-cell nodes: exact
    // cell centers are dyadic rationals, which a binary-shift base parks at
    // zero within log2(m) float steps, and single nodes leave too much
    // quadrature noise after the transfer contraction.
    CounterRng rng{0xd17a5ULL};
    const int K = std::max(1, samples_per_cell);
    auto stage = [&](int steps) {
        std::vector<double> g(m, 0.0);
        parallel_for(size_t(m), [&](size_t i) {
            std::array<double, kMaxDim> x{}, t{};
            double acc = 0;
            for (int s = 0; s < K; ++s) {
                double rep = (double(i) + rng.uniform(i, uint64_t(s))) / m;
                sys.section(rep, x.data());
                uint64_t ybits;
                std::memcpy(&ybits, &x[0], sizeof ybits);
                for (int k = 0; k < steps; ++k) {
                    sys.step_dithered(x.data(), t.data(), rng, ybits, uint64_t(k));
                    x = t;
                }
                acc += f(x.data());
            }
            g[i] = acc / K;
        });
        for (int k = 0; k < steps; ++k) g = transfer_wrt_invariant(op, masses, g);
        return g;
    };

    TransferDisintegration res;
    res.n = n;
    std::vector<double> prev = stage(n - 1);
    res.values = stage(n);
    double diff = 0;
    for (int i = 0; i < m; ++i) diff = std::max(diff, std::fabs(res.values[i] - prev[i]));
    res.successive_difference = diff;
    return res;
}

} // namespace fiberlift
