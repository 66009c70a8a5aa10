#pragma once
#include "fiberlift/geometry.hpp"
#include "fiberlift/rng.hpp"
#include "fiberlift/systems.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fiberlift {

enum class SpaceTag { base, total };

// Weighted point cloud on the base or the total space. Immutable by
// convention: operations return new measures.
struct EmpiricalMeasure {
    SpaceTag tag = SpaceTag::base;
    int dim = 1;
    Geometry geom;                 // metric of the ambient space
    std::vector<double> points;    // flat, stride = dim
    std::vector<double> weights;   // positive, sum to 1

    size_t size() const { return weights.size(); }
    const double* point(size_t i) const { return points.data() + i * dim; }
    double& coord(size_t i, int c) { return points[i * dim + c]; }
    double coord(size_t i, int c) const { return points[i * dim + c]; }

    void normalize();
    void check() const; // weight-sum and domain invariants
    double total_weight() const;
};

// i.i.d. uniform cloud on the base circle [0,1).
EmpiricalMeasure random_base_cloud(const Geometry& geom, size_t n, uint64_t seed);
// Stratified uniform cloud: one jittered atom per interval of width 1/n.
// Same law cell-by-cell, far lower binning noise than i.i.d. sampling.
EmpiricalMeasure stratified_base_cloud(const Geometry& geom, size_t n, uint64_t seed);
// Uniform cloud on the full product space.
EmpiricalMeasure random_total_cloud(const FiberedSystem& sys, size_t n, uint64_t seed);
EmpiricalMeasure dirac(const Geometry& geom, SpaceTag tag, const std::vector<double>& x);

// Histogram on a uniform partition of the base circle.
struct GridMeasure {
    int n_cells = 0;
    std::vector<double> masses;
    double cell_center(int i) const { return (i + 0.5) / n_cells; }
    void check() const;
};

// Conditional decomposition of a total-space measure over base cells.
struct DisintegrationBin {
    double cell_center = 0;
    double mass = 0;
    std::vector<size_t> atoms;          // indices into the source measure
    std::vector<double> cond_weights;   // conditional weights, sum to 1 (empty bin: none)
};

struct Disintegration {
    int n_cells = 0;
    const EmpiricalMeasure* source = nullptr;
    std::vector<DisintegrationBin> bins;

    GridMeasure base_marginal() const;
    // conditional average of f over bin i (f sees full atom coordinates)
    double conditional_mean(size_t i, const std::function<double(const double*)>& f) const;
};

// Atoms bucketed by the base cell of their projection; cells are
// left-closed/right-open. On the circle the right edge wraps to cell 0; on an
// interval the last cell is closed.
Disintegration disintegrate(const EmpiricalMeasure& mu, int n_cells);
int cell_of(double y, int n_cells, bool circle = true);

// Push atoms through a map (total -> total).
EmpiricalMeasure pushforward(const EmpiricalMeasure& mu, const FiberedSystem& sys);
// Base marginal (projection push-forward).
EmpiricalMeasure project_measure(const EmpiricalMeasure& mu);

enum class OrbitPolicy { exact, dithered };

// Equal-weight cloud on {T^(burn_in+1) x0, ..., T^(burn_in+n) x0}.
EmpiricalMeasure birkhoff_measure(const FiberedSystem& sys, const std::vector<double>& x0,
                                  long burn_in, long n,
                                  OrbitPolicy policy = OrbitPolicy::exact, uint64_t seed = 0);

double integrate(const EmpiricalMeasure& mu, const std::function<double(const double*)>& f);

// Serialization (one atom per row: coordinates then weight).
std::string to_csv(const EmpiricalMeasure& mu);
std::string to_csv(const GridMeasure& gm);
std::string to_json(const EmpiricalMeasure& mu);

} // namespace fiberlift
