#pragma once
#include "fiberlift/measure.hpp"
#include "fiberlift/systems.hpp"
#include "fiberlift/transport.hpp"

#include <functional>
#include <vector>

namespace fiberlift {

struct LiftOptions {
    double tol = 1e-3;
    int n_max = 20;
    int n_cells = 0;          // cells for the vertical metric; 0 = ceil(sqrt(atoms))
    bool compute_trace = true; // off: just iterate n_max push-forwards
    bool keep_iterates = false;
    // custom start section (fiber part); empty = system section
    std::function<void(double, double*)> start_section;
};

struct LiftResult {
    EmpiricalMeasure lifted;
    int iterations = 0;
    bool converged = false;
    double invariance_defect = 0; // W(S_* base, base) of the input base measure
    std::vector<std::pair<double, double>> cauchy_trace; // (n, W_vert(nu_n, nu_{n+1}))
    DecayFit fitted_rate;
    std::vector<EmpiricalMeasure> iterates; // when keep_iterates
};

// Constructive lift: start from a section copy of the base measure and iterate
// the push-forward until consecutive iterates are close in the vertical
// metric. Non-convergence is reported in the result, not thrown.
LiftResult lift_measure(const FiberedSystem& sys, const EmpiricalMeasure& base_mu,
                        const LiftOptions& opt = {});

struct UniquenessReport {
    std::vector<LiftResult> runs;
    std::vector<double> pairwise_vertical; // upper bounds on pairwise W of final iterates
    double max_pairwise = 0;
    double threshold = 0; // 3 * tol
    bool pass = false;
};

// Lift from several sections and compare the final iterates; distinct starts
// must land within 3*tol of each other when fibers genuinely shrink.
UniquenessReport check_lift_uniqueness(const FiberedSystem& sys, const EmpiricalMeasure& base_mu,
                                       const std::vector<std::function<void(double, double*)>>& sections,
                                       double tol, int n_max, int n_cells = 0);

struct StableLeafResult {
    std::vector<std::pair<double, double>> distances; // (n, W(T^n nu, lifted))
    DecayFit fit;
};

// Full (unconstrained) Wasserstein distance from the push-forward orbit of nu
// to a converged lift, step by step.
StableLeafResult stable_leaf_experiment(const FiberedSystem& sys, const EmpiricalMeasure& nu,
                                        const LiftResult& reference, int n_max);

} // namespace fiberlift
