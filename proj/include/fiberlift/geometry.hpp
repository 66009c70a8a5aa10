#pragma once
#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace fiberlift {

constexpr int kMaxDim = 3;

// Axis-aligned box in up to kMaxDim coordinates.
struct Box {
    int dim = 0;
    std::array<double, kMaxDim> lo{};
    std::array<double, kMaxDim> hi{};

    double width(int i) const { return hi[i] - lo[i]; }
    double max_width() const;
    bool contains(const double* p, double slack = 0.0) const;
    std::array<double, kMaxDim> center() const;
};

// Metric data for a phase space: a 1D base (interval or circle) optionally
// crossed with a fiber box. All distances are rescaled so diameters are <= 1,
// which keeps transport costs comparable across systems.
struct Geometry {
    bool base_circle = true;  // base is [0,1) with wrap-around metric
    Box fiber;                // fiber.dim == 0 for base-only spaces

    int total_dim() const { return 1 + fiber.dim; }

    double dist_base(double a, double b) const;
    double dist_fiber(const double* a, const double* b) const;
    // max(base, fiber) metric on the product
    double dist_total(const double* a, const double* b) const;
};

double circle_distance(double a, double b);  // un-normalized, in [0, 1/2]
double wrap01(double y);

} // namespace fiberlift
