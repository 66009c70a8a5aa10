#pragma once
#include "fiberlift/measure.hpp"
#include "fiberlift/systems.hpp"
#include "fiberlift/ulam.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fiberlift {

using Observable = std::function<double(const double*)>;

// |E[f(T^n .) g] - E[f] E[g]| for an atom measure, evaluated exactly.
double correlation_atoms(const FiberedSystem& sys, const EmpiricalMeasure& mu, const Observable& f,
                         const Observable& g, int n);

struct CorrelationTrace {
    std::vector<std::pair<double, double>> values; // (n, |Corr_n|)
    std::vector<double> std_errors;                // batch-mean error per n
    std::string estimator;
    DecayFit fit;
    double mean_f = 0, mean_g = 0;
    double l1_g = 0; // orbit average of |g|, feeds the modulus term of the transfer bound
};

struct OrbitSpec {
    long length = 1000000;
    long burn_in = 1000;
    uint64_t seed = 1;
    std::vector<double> start; // empty: seed-derived start point
};

// Long-orbit estimator: (1/M) sum f(x_{k+n}) g(x_k) - means, with batch-mean
// standard errors. Uses dithered stepping on binary-shift bases.
CorrelationTrace correlations_orbit(const FiberedSystem& sys, const OrbitSpec& orbit,
                                    const Observable& f, const Observable& g, int n_max);

// Operator-power estimator on the base (grid observables against the Ulam
// invariant measure).
CorrelationTrace correlations_operator(const UlamOperator& op, const SpectralReport& spec,
                                       const std::vector<double>& f, const std::vector<double>& g,
                                       int n_max);

struct CorrBoundReport {
    double lhs = 0;          // Corr_{k+m} of (f,g) on the total space
    double rhs_corr = 0;     // base correlation of the conditional averages
    double rhs_modulus = 0;  // omega(a_k) * ||g||_L1
    double slack = 0;        // rhs_corr + rhs_modulus - lhs
    double combined_se = 0;
    int k = 0, m = 0;
    bool pass = false; // slack >= -3 se
};

// Checks the correlation transfer inequality: the total-space correlation at
// lag k+m is bounded by the base correlation of conditional averages at lag m
// plus a fiber-regularity term at lag k.
CorrBoundReport correlation_lift_bound_check(const FiberedSystem& sys, const UlamOperator& op,
                                             const Observable& f, const Observable& g,
                                             double lip_f, int k, int m,
                                             const ShrinkEstimate& shrink, const OrbitSpec& orbit);

struct GreenKubo {
    double variance = 0;  // sigma^2 = c_0 + 2 sum_{n>=1} c_n
    double c0 = 0;
    int terms_used = 0;
    double noise_floor = 0;
    std::vector<double> covariances;
};

GreenKubo green_kubo_variance(const FiberedSystem& sys, const OrbitSpec& orbit, const Observable& f,
                              int n_cap = 200);

struct CltReport {
    int n_block = 0;
    int samples = 0;
    double ks_statistic = 1;
    double fitted_mean = 0;
    double fitted_sigma = 0;
    double green_kubo_sigma = 0;
    double mean_f = 0;
    bool degenerate = false;
};

// Draw start points from the measure, form centered normalized block sums,
// and compare against the Gaussian with the Green-Kubo variance via the
// Kolmogorov-Smirnov statistic.
CltReport clt_diagnostic(const FiberedSystem& sys, const EmpiricalMeasure& mu, const Observable& f,
                         int n_block, int samples, uint64_t seed);

double normal_cdf(double x, double mean, double sigma);

} // namespace fiberlift
