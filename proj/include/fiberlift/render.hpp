#pragma once
#include "fiberlift/systems.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fiberlift {

struct Raster {
    int width = 0, height = 0;
    std::vector<uint8_t> pixels; // 0 or 255, row-major

    bool lit(int x, int y) const { return pixels[size_t(y) * width + x] != 0; }
    size_t lit_count() const;
    std::string to_pgm() const;          // binary P5, dependency-free
    std::string to_png() const;          // 8-bit grayscale, stored-deflate
    Raster dilate() const;               // 8-neighborhood, 1 pixel
    bool subset_of(const Raster& other) const;
};

struct RenderOptions {
    int image_size = 512;
    int base_grid = 721;   // initial grid resolution along the base (odd avoids aliasing)
    int fiber_grid = 40;   // per fiber dimension
    double inner_radius = 0.35; // annulus inner/outer radii, fraction of half-size
    double outer_radius = 0.95;
};

// Image of a fine grid of the phase space under n iterates, drawn in annulus
// coordinates (base angle, first fiber coordinate as radius).
Raster render_attractor(const FiberedSystem& sys, int n_iter, const RenderOptions& opt = {});

} // namespace fiberlift
