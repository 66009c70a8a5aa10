#include "fiberlift/geometry.hpp"
#include <algorithm>
#include <cmath>

namespace fiberlift {

double Box::max_width() const {
    double w = 0;
    for (int i = 0; i < dim; ++i) w = std::max(w, hi[i] - lo[i]);
    return w;
}

bool Box::contains(const double* p, double slack) const {
    for (int i = 0; i < dim; ++i)
        if (p[i] < lo[i] - slack || p[i] > hi[i] + slack) return false;
    return true;
}

std::array<double, kMaxDim> Box::center() const {
    std::array<double, kMaxDim> c{};
    for (int i = 0; i < dim; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
}

double wrap01(double y) {
    double r = y - std::floor(y);
    return r < 1.0 ? r : 0.0;
}

double circle_distance(double a, double b) {
    double d = std::fabs(wrap01(a) - wrap01(b));
    return std::min(d, 1.0 - d);
}

double Geometry::dist_base(double a, double b) const {
    if (base_circle) return 2.0 * circle_distance(a, b);
    return std::fabs(a - b);
}

double Geometry::dist_fiber(const double* a, const double* b) const {
    if (fiber.dim == 0) return 0.0;
    double w = fiber.max_width();
    double d = 0;
    for (int i = 0; i < fiber.dim; ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return w > 0 ? d / w : 0.0;
}

double Geometry::dist_total(const double* a, const double* b) const {
    return std::max(dist_base(a[0], b[0]), dist_fiber(a + 1, b + 1));
}

} // namespace fiberlift
