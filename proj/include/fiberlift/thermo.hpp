#pragma once
#include "fiberlift/measure.hpp"
#include "fiberlift/systems.hpp"
#include "fiberlift/ulam.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fiberlift {

struct Potential {
    std::function<double(const double*)> f; // on the total space
    ModulusClass modulus = ModulusClass::holder(1.0);
    double hol_constant = 0; // 0: estimate by pair sampling (reported lower bound)
    bool constant_estimated = false;
    int estimation_violations = 0;
};

// Estimate the modulus constant by the max quotient over sampled pairs.
double estimate_hol_constant(const FiberedSystem& sys, const Potential& phi, int pairs,
                             uint64_t seed);

struct CoboundaryResult {
    int N = 0;                  // truncation order of the correction series
    double hol_constant = 0;    // constant used for the tail bound
    int declared_constant_violations = 0; // sampled pairs exceeding a declared constant
    double truncation_bound = 0; // 2 * H * sum_{n>N} omega(a_n) under the fitted model
    double fiber_oscillation = 0; // measured max oscillation of phi_hat over sampled fibers
    // evaluators (fresh orbit computation per call)
    std::function<double(const double*)> h_series;  // truncated correction h_N
    std::function<double(const double*)> phi_hat;   // phi + h_N - h_N(T .)
    std::function<double(double)> phi_check;        // phi_hat composed with the section
};

struct CoboundaryOptions {
    int oscillation_fibers = 100;
    int oscillation_samples = 30;
    uint64_t seed = 11;
};

// Build the fiber-flattening correction: h_N sums the first N+1 differences
// between the potential along the orbit of the section point and along the
// orbit itself; phi_hat = phi + h_N - h_N o T is then nearly constant on
// fibers, with the tail of the series as the certificate.
CoboundaryResult build_coboundary(const FiberedSystem& sys, const Potential& phi,
                                  const ShrinkEstimate& shrink, double target_osc,
                                  const CoboundaryOptions& opt = {});

// Projected modulus class for the base potential, by shrinking regime:
//  - exponential fibers, holder(alpha) potential: holder(alpha*beta/(1 - log L/log theta))
//  - polynomial degree d fibers, holder(alpha), alpha > 1/d: log_holder(alpha*d - 1)
//  - exponential fibers, log_holder(alpha), alpha > 1: log_holder((alpha-1)/2)
ModulusClass exponent_arithmetic(double alpha, double beta, double lipschitz_L,
                                 const DecayFit& shrink_fit, ModulusClass::Kind kind);

struct WeightedTransfer {
    int n_cells = 0;
    std::vector<double> matrix; // dense row-major; column action on grid observables
    double leading_eigenvalue = 0;
    std::vector<double> eigenfunction;    // right eigenvector, positive
    std::vector<double> dual_masses;      // left eigenvector normalized to mass 1
    GridMeasure equilibrium;              // masses prop. to eigenfunction * dual
    std::vector<double> normalized;       // conjugated operator fixing constants
    std::vector<double> apply(const std::vector<double>& f, bool use_normalized) const;
};

// Grid approximation of the weighted transfer operator: sums over inverse
// branches with weights exp(potential at the preimage). With zero potential
// this counts preimages (leading eigenvalue = branch count); normalization
// divides by the leading eigenvalue and conjugates by the eigenfunction.
WeightedTransfer weighted_transfer(const FiberedSystem& sys,
                                   const std::function<double(double)>& phi_check, int m);

struct EnergyReport {
    double mu_phi = 0;        // lifted-measure energy of phi
    double mu_phi_hat = 0;    // lifted-measure energy of the flattened potential
    double base_phi_check = 0; // base-equilibrium energy of the projected potential
    double coboundary_gap = 0; // |mu_phi - mu_phi_hat|
    double projection_gap = 0; // |mu_phi_hat - base_phi_check|
    double total_gap = 0;      // |mu_phi - base_phi_check|
};

EnergyReport energy_consistency(const FiberedSystem& sys, const Potential& phi,
                                const CoboundaryResult& cob, const EmpiricalMeasure& lifted,
                                const GridMeasure& base_equilibrium);

} // namespace fiberlift
