#pragma once
#include "fiberlift/geometry.hpp"
#include "fiberlift/rng.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fiberlift {

// ---------------------------------------------------------------------------
// Decay-model fit shared across modules: v_n ~ C*theta^n or v_n ~ C*n^-d.
// ---------------------------------------------------------------------------
struct DecayFit {
    enum class Model { none, exponential, polynomial };
    Model model = Model::none;
    double theta = 0;     // exponential ratio, in (0,1) when valid
    double degree = 0;    // polynomial degree, > 0 when valid
    double amplitude = 0; // leading constant C
    double residual = 0;  // RMS residual of the winning fit in log space
    double noise_floor = 0;
    int points_used = 0;
    bool exact_collapse = false; // all values (numerically) zero

    double value(double n) const; // fitted model evaluated at n
    bool decays() const { return model != Model::none; }
};

// Least-squares fit of a positive, decreasing sequence against exponential
// and polynomial decay; trailing plateaus are treated as a noise floor and
// excluded. Ties within 5% go to the exponential model.
DecayFit fit_decay(const std::vector<std::pair<double, double>>& values);

// ---------------------------------------------------------------------------
// Moduli of continuity.
// ---------------------------------------------------------------------------
struct ModulusClass {
    enum class Kind { holder, log_holder };
    Kind kind = Kind::holder;
    double exponent = 1.0;
    double r_alpha = 0.0; // normalization point of the log-Holder modulus

    static ModulusClass holder(double alpha);
    static ModulusClass log_holder(double alpha);

    double operator()(double r) const;
    std::string describe() const;
};

// Monotone increasing branch of a circle map, mapping [lo,hi] onto
// [image_lo, image_hi] without wrap; inverse solved exactly or by bisection.
struct MonotoneBranch {
    double lo = 0, hi = 0;
    double image_lo = 0, image_hi = 0;
    std::function<double(double)> forward; // no wrap-around
    std::function<double(double)> inverse; // image -> domain
    std::function<double(double)> deriv;   // S' on the branch
};

// ---------------------------------------------------------------------------
// Fibered system: T on X = base x fiber, factor S on the base, projection =
// first coordinate, section y -> (y, section_point).
// ---------------------------------------------------------------------------
struct FiberedSystem {
    std::string name;
    Geometry geom;                 // metric data; geom.fiber.dim may be 0
    int dim_base = 1;
    int dim_fiber = 0;

    std::function<double(double)> apply_S;
    // maps (y, z) in place: in[0..dim] -> out[0..dim]
    std::function<void(const double*, double*)> apply_T;
    std::array<double, kMaxDim> section_point{}; // fiber part of the section
    std::optional<double> lipschitz_T;
    // base map is an exact binary shift in floating point (doubling and
    // friends); orbit statistics must re-randomize the lowest mantissa bit
    bool dyadic_base = false;
    // piecewise-monotone decomposition of the base map, when known; empty
    // means exact Ulam construction is unavailable
    std::vector<MonotoneBranch> base_branches;

    int dim_total() const { return dim_base + dim_fiber; }
    void section(double y, double* out) const;
    double project(const double* x) const { return x[0]; }
    void step(const double* x, double* out) const { apply_T(x, out); }

    // One orbit step with low-bit dither on the base coordinate (no-op unless
    // dyadic_base). Keyed draws keep parallel runs deterministic.
    void step_dithered(const double* x, double* out, const CounterRng& rng,
                       uint64_t stream, uint64_t k) const;
};

// ---------------------------------------------------------------------------
// System zoo.
// ---------------------------------------------------------------------------

// Circle map with a neutral fixed point at 0: (1+(2y)^q) y on [0,1/2]
// (boundary point included in the first branch), 2y-1 on [1/2,1).
std::function<double(double)> pomeau_manneville(double q);

FiberedSystem doubling_base_system();
FiberedSystem pm_base_system(double q);
FiberedSystem expanding_base_system(int k);

FiberedSystem make_skew_product(const std::string& name,
                                std::function<double(double)> base,
                                std::function<void(double, const double*, double*)> fiber_map,
                                const Box& fiber_domain, bool dyadic_base,
                                std::optional<double> lipschitz = std::nullopt);

// Solid-torus skew product (2y mod 1, lambda z + offset(y)); requires
// lambda + max|offset| <= 1 so the closed unit disk maps into itself.
FiberedSystem solenoid_system(double lambda,
                              std::function<void(double, double*)> offset,
                              double max_offset_norm);
FiberedSystem solenoid_system(double lambda); // default circular offsets (0.5cos, 0.5sin)

// Registry for the CLI: name + parameter map -> system.
FiberedSystem make_system(const std::string& name, const std::map<std::string, double>& params);

// ---------------------------------------------------------------------------
// Empirical regularity estimates.
// ---------------------------------------------------------------------------
struct ShrinkEstimate {
    std::vector<double> a_n; // a_n[n] = max sampled same-fiber distance after n steps, n>=1
    DecayFit fit;
    int samples_per_fiber = 0;
    int fibers_sampled = 0;
    bool non_shrinking = false;
    bool exact_collapse = false;

    // fitted upper envelope at step n (amplitude*theta^n or amplitude*n^-d)
    double envelope(double n) const { return fit.value(n); }
};

// Max over sampled fibers and same-fiber pairs of d(T^n x, T^n x'); this is a
// certified lower envelope of the true shrinking sequence.
ShrinkEstimate estimate_shrinking(const FiberedSystem& sys, int n_max, int fibers,
                                  int pairs_per_fiber, uint64_t seed);

// Max sampled ratio d(Tx,Tx')/d(x,x'): a lower bound on the true constant.
double estimate_lipschitz(const FiberedSystem& sys, int samples, uint64_t seed);

} // namespace fiberlift
