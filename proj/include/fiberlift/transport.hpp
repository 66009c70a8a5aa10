#pragma once
#include "fiberlift/measure.hpp"

#include <functional>
#include <vector>

namespace fiberlift {

// Sparse transport plan between two weighted clouds.
struct Coupling {
    size_t n_rows = 0, n_cols = 0;
    std::vector<size_t> row, col;
    std::vector<double> mass;
    double cost = 0;

    void add(size_t i, size_t j, double m) {
        row.push_back(i);
        col.push_back(j);
        mass.push_back(m);
    }
    // max-norm violation of the prescribed marginals
    double marginal_violation(const std::vector<double>& a, const std::vector<double>& b) const;
    double eval_cost(const std::function<double(size_t, size_t)>& c) const;
    std::string to_csv() const; // triplets i,j,mass
};

struct ExactOtResult {
    double cost = 0;
    Coupling plan;
    std::vector<double> dual_row, dual_col; // optimal potentials
    int pivots = 0;
};

// Exact optimal transport between weight vectors a and b (both summing to the
// same total) with arbitrary costs, solved by a transportation simplex on the
// dense bipartite graph. Intended for desk-scale instances (<= 5000 a side).
ExactOtResult solve_transport(const std::vector<double>& a, const std::vector<double>& b,
                              const std::function<double(size_t, size_t)>& cost);

struct SinkhornOptions {
    double epsilon = 1e-3;      // target regularization
    double tol = 1e-9;          // marginal violation target
    int max_iterations = 20000; // per epsilon stage
    bool scale_epsilon = true;  // anneal from a coarse epsilon down to target
};

struct SinkhornResult {
    double cost = 0; // cost of the rounded (exactly feasible) plan
    double epsilon = 0;
    double marginal_violation = 0; // before rounding
    int iterations = 0;
    Coupling plan;
};

SinkhornResult sinkhorn_transport(const std::vector<double>& a, const std::vector<double>& b,
                                  const std::function<double(size_t, size_t)>& cost,
                                  const SinkhornOptions& opt);

// ---------------------------------------------------------------------------
// Measure-level interfaces
// ---------------------------------------------------------------------------

// Exact W1 between 1D measures: quantile coupling on the interval; on the
// circle the cdf-offset form min_t \int |F - G - t| (exact weighted median).
double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

enum class OtMethod { exact, sinkhorn };

struct WassersteinResult {
    double distance = 0;
    Coupling plan;
    SinkhornResult sinkhorn; // populated for OtMethod::sinkhorn
};

WassersteinResult wasserstein_discrete(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                       OtMethod method = OtMethod::exact,
                                       const SinkhornOptions& sopt = {});

struct VerticalOptions {
    int n_cells = 0;          // 0: ceil(sqrt(atom count))
    double tau_marg = 1e-9;   // cell-wise marginal tolerance in strict mode
    bool rebalance = false;   // renormalize mismatched cell masses instead of failing
};

struct VerticalResult {
    double value = 0;
    int n_cells = 0;
    int empty_mismatch_cells = 0; // cells where exactly one side is empty
    double rebalanced_mass = 0;   // total cell-mass discrepancy absorbed
    double worst_marginal_gap = 0;
    int worst_cell = -1;
    std::vector<double> per_cell_cost;
};

// Fiber-constrained W1: disintegrate both measures over the same base cells
// and average the fiber-metric OT cost of matching conditionals. Requires
// matching base marginals (cell-wise) unless rebalancing is enabled; a cell
// with exactly one empty conditional contributes its mass times the fiber
// diameter, keeping the estimate on the conservative side.
VerticalResult vertical_wasserstein_full(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                         const VerticalOptions& opt);
double vertical_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int n_cells);

} // namespace fiberlift
