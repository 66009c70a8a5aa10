#pragma once
#include "fiberlift/measure.hpp"
#include "fiberlift/systems.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fiberlift {

// Row-stochastic cell-to-cell transition matrix of a base map on a uniform
// circle partition. Convention: densities are row vectors acted on the right
// (rho P = push-forward on grid densities), observables are column vectors
// acted on the left (P f = composition with the map).
struct UlamOperator {
    enum class Construction { exact_branches, monte_carlo };

    int n_cells = 0;
    Construction construction = Construction::exact_branches;
    long mc_samples = 0;
    uint64_t mc_seed = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;

    double cell_center(int i) const { return (i + 0.5) / n_cells; }
    std::vector<double> apply_density(const std::vector<double>& rho) const;
    std::vector<double> apply_observable(const std::vector<double>& f) const;
    std::vector<double> dense() const;
    double max_row_sum_error() const;
    std::string to_csv() const; // sparse triplets
};

UlamOperator build_ulam(const FiberedSystem& sys, int m, UlamOperator::Construction construction,
                        long samples_per_cell = 10000, uint64_t seed = 1);

struct SpectralReport {
    double leading_eigenvalue = 0;
    GridMeasure invariant_density; // cell masses of the fixed density
    double second_modulus = 0;     // spectral estimate from deflated power iteration
    double gap = 0;                // 1 - second_modulus
    double transient_ratio = 0;    // typical contraction before collapse, if any
    bool second_converged = false;
    bool collapsed = false; // deflated iterate hit exact zero (finite-rank remainder)
    int iterations = 0;
    std::string method = "power_iteration+deflation";
};

// Power iteration on the density side; second modulus by deflated power
// iteration with restarts. Collapse to the zero vector (finite-step
// annihilation) is reported rather than treated as convergence.
SpectralReport invariant_density(const UlamOperator& op, double tol, int max_iterations = 200000);

// Transfer action relative to the invariant masses (fixes constants); used
// for decay and correlation computations against the invariant measure.
std::vector<double> transfer_wrt_invariant(const UlamOperator& op,
                                           const std::vector<double>& masses,
                                           const std::vector<double>& f);

struct OperatorDecay {
    std::vector<std::pair<double, double>> sup_norms; // (n, ||L^n f||_inf)
    DecayFit fit;
    double centered_by = 0; // subtracted mean, when auto-centering fired
};

OperatorDecay operator_decay(const UlamOperator& op, const SpectralReport& spec,
                             std::vector<double> f, int n_max);

struct TransferDisintegration {
    std::vector<double> values;      // y_cell -> xi_y(f) estimate
    double successive_difference = 0; // sup |g_n - g_{n-1}|, error proxy
    int n = 0;
};

// Conditional expectation of an observable on fibers via the transfer-operator
// limit: iterate the transfer action on cell averages of f composed with T^n
// and the section (samples_per_cell jittered quadrature nodes per cell).
TransferDisintegration disintegration_via_transfer(const FiberedSystem& sys, const UlamOperator& op,
                                                   const std::function<double(const double*)>& f,
                                                   int n, int samples_per_cell = 128);

} // namespace fiberlift
