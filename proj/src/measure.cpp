#include "fiberlift/measure.hpp"
#include "fiberlift/errors.hpp"
#include "fiberlift/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fiberlift {

void EmpiricalMeasure::normalize() {
    double s = 0;
    for (double w : weights) s += w;
    if (s <= 0) throw ParameterError("measure has no mass");
    for (double& w : weights) w /= s;
}

double EmpiricalMeasure::total_weight() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
}

void EmpiricalMeasure::check() const {
    if (weights.size() * dim != points.size())
        throw ParameterError("measure: points/weights size mismatch");
    double s = 0;
    for (double w : weights) {
        if (!(w > 0)) throw ParameterError("measure: nonpositive weight");
        s += w;
    }
    if (std::fabs(s - 1.0) > 1e-12) throw ParameterError("measure: weights do not sum to 1");
}

EmpiricalMeasure random_base_cloud(const Geometry& geom, size_t n, uint64_t seed) {
    EmpiricalMeasure mu;
    mu.tag = SpaceTag::base;
    mu.dim = 1;
    mu.geom = geom;
    mu.geom.fiber.dim = 0;
    mu.points.resize(n);
    mu.weights.assign(n, 1.0 / double(n));
    CounterRng rng{seed};
    for (size_t i = 0; i < n; ++i) mu.points[i] = rng.uniform(i, 7);
    return mu;
}

EmpiricalMeasure stratified_base_cloud(const Geometry& geom, size_t n, uint64_t seed) {
    EmpiricalMeasure mu = random_base_cloud(geom, n, seed);
    CounterRng rng{seed};
    for (size_t i = 0; i < n; ++i) mu.points[i] = (double(i) + rng.uniform(i, 13)) / double(n);
    return mu;
}

EmpiricalMeasure random_total_cloud(const FiberedSystem& sys, size_t n, uint64_t seed) {
    EmpiricalMeasure mu;
    mu.tag = SpaceTag::total;
    mu.dim = sys.dim_total();
    mu.geom = sys.geom;
    mu.points.resize(n * mu.dim);
    mu.weights.assign(n, 1.0 / double(n));
    CounterRng rng{seed ^ 0x707a1ULL};
    for (size_t i = 0; i < n; ++i) {
        mu.points[i * mu.dim] = rng.uniform(i, 0);
        for (int c = 0; c < sys.dim_fiber; ++c)
            mu.points[i * mu.dim + 1 + c] =
                sys.geom.fiber.lo[c] + rng.uniform(i, 1 + c) * sys.geom.fiber.width(c);
    }
    return mu;
}

EmpiricalMeasure dirac(const Geometry& geom, SpaceTag tag, const std::vector<double>& x) {
    EmpiricalMeasure mu;
    mu.tag = tag;
    mu.dim = static_cast<int>(x.size());
    mu.geom = geom;
    mu.points = x;
    mu.weights = {1.0};
    return mu;
}

void GridMeasure::check() const {
    double s = 0;
    for (double m : masses) {
        if (m < -1e-15) throw ParameterError("grid measure: negative mass");
        s += m;
    }
    if (std::fabs(s - 1.0) > 1e-12) throw ParameterError("grid measure: masses do not sum to 1");
}

int cell_of(double y, int n_cells, bool circle) {
    double yy = circle ? wrap01(y) : y;
    int c = static_cast<int>(std::floor(yy * n_cells));
    if (c >= n_cells) c = n_cells - 1; // right edge: interval keeps the last cell closed
    if (c < 0) c = 0;
    return c;
}

Disintegration disintegrate(const EmpiricalMeasure& mu, int n_cells) {
    if (mu.tag != SpaceTag::total) throw PreconditionError("disintegrate: measure must live on the total space");
    if (n_cells < 1) throw ParameterError("disintegrate: n_cells must be >= 1");
    Disintegration dis;
    dis.n_cells = n_cells;
    dis.source = &mu;
    dis.bins.resize(n_cells);
    for (int c = 0; c < n_cells; ++c) dis.bins[c].cell_center = (c + 0.5) / n_cells;
    for (size_t i = 0; i < mu.size(); ++i) {
        int c = cell_of(mu.point(i)[0], n_cells, mu.geom.base_circle);
        dis.bins[c].atoms.push_back(i);
        dis.bins[c].mass += mu.weights[i];
    }
    for (auto& bin : dis.bins) {
        if (bin.mass <= 0) continue;
        bin.cond_weights.reserve(bin.atoms.size());
        for (size_t idx : bin.atoms) bin.cond_weights.push_back(mu.weights[idx] / bin.mass);
    }
    return dis;
}

GridMeasure Disintegration::base_marginal() const {
    GridMeasure gm;
    gm.n_cells = n_cells;
    gm.masses.reserve(bins.size());
    for (auto& b : bins) gm.masses.push_back(b.mass);
    return gm;
}

double Disintegration::conditional_mean(size_t i, const std::function<double(const double*)>& f) const {
    const auto& bin = bins[i];
    double s = 0;
    for (size_t k = 0; k < bin.atoms.size(); ++k)
        s += bin.cond_weights[k] * f(source->point(bin.atoms[k]));
    return s;
}

EmpiricalMeasure pushforward(const EmpiricalMeasure& mu, const FiberedSystem& sys) {
    bool tagged_ok = mu.tag == SpaceTag::total || sys.dim_fiber == 0;
    if (!tagged_ok || mu.dim != sys.dim_total())
        throw PreconditionError("pushforward: measure dimension does not match system");
    EmpiricalMeasure out = mu;
    std::array<double, kMaxDim> tmp{};
    for (size_t i = 0; i < mu.size(); ++i) {
        sys.step(mu.point(i), tmp.data());
        if (sys.dim_fiber > 0 && !sys.geom.fiber.contains(tmp.data() + 1, 1e-9)) {
            std::ostringstream os;
            os << "pushforward: atom " << i << " left the fiber domain";
            throw DomainViolation(os.str());
        }
        for (int c = 0; c < mu.dim; ++c) out.points[i * mu.dim + c] = tmp[c];
    }
    return out;
}

EmpiricalMeasure project_measure(const EmpiricalMeasure& mu) {
    EmpiricalMeasure out;
    out.tag = SpaceTag::base;
    out.dim = 1;
    out.geom = mu.geom;
    out.geom.fiber.dim = 0;
    out.weights = mu.weights;
    out.points.resize(mu.size());
    for (size_t i = 0; i < mu.size(); ++i) out.points[i] = mu.point(i)[0];
    return out;
}

EmpiricalMeasure birkhoff_measure(const FiberedSystem& sys, const std::vector<double>& x0,
                                  long burn_in, long n, OrbitPolicy policy, uint64_t seed) {
    if (n < 1) throw ParameterError("birkhoff_measure: n must be >= 1");
    if (static_cast<int>(x0.size()) != sys.dim_total())
        throw ParameterError("birkhoff_measure: x0 dimension mismatch");
    EmpiricalMeasure mu;
    mu.tag = sys.dim_fiber > 0 ? SpaceTag::total : SpaceTag::base;
    mu.dim = sys.dim_total();
    mu.geom = sys.geom;
    mu.points.resize(n * mu.dim);
    mu.weights.assign(n, 1.0 / double(n));

    CounterRng rng{seed};
    std::array<double, kMaxDim> x{}, t{};
    std::copy(x0.begin(), x0.end(), x.begin());
    long step = 0;
    auto advance = [&]() {
        if (policy == OrbitPolicy::dithered)
            sys.step_dithered(x.data(), t.data(), rng, 1, static_cast<uint64_t>(step));
        else
            sys.step(x.data(), t.data());
        ++step;
        if (sys.dim_fiber > 0 && !sys.geom.fiber.contains(t.data() + 1, 1e-9)) {
            std::ostringstream os;
            os << "birkhoff_measure: orbit left the domain at step " << step;
            throw DomainViolation(os.str());
        }
        x = t;
    };
    for (long k = 0; k < burn_in + 1; ++k) advance();
    for (long k = 0; k < n; ++k) {
        for (int c = 0; c < mu.dim; ++c) mu.points[k * mu.dim + c] = x[c];
        if (k + 1 < n) advance();
    }
    return mu;
}

double integrate(const EmpiricalMeasure& mu, const std::function<double(const double*)>& f) {
    double s = 0;
    for (size_t i = 0; i < mu.size(); ++i) s += mu.weights[i] * f(mu.point(i));
    return s;
}

std::string to_csv(const EmpiricalMeasure& mu) {
    std::string out;
    for (int c = 0; c < mu.dim; ++c) out += (c ? ",x" : "x") + std::to_string(c);
    out += ",weight\n";
    for (size_t i = 0; i < mu.size(); ++i) {
        for (int c = 0; c < mu.dim; ++c) {
            out += format_double(mu.coord(i, c));
            out += ',';
        }
        out += format_double(mu.weights[i]);
        out += '\n';
    }
    return out;
}

std::string to_json(const EmpiricalMeasure& mu) {
    std::string out = "{\"space\":\"";
    out += mu.tag == SpaceTag::base ? "base" : "total";
    out += "\",\"dim\":" + std::to_string(mu.dim) + ",\"atoms\":[";
    for (size_t i = 0; i < mu.size(); ++i) {
        out += i ? ",[" : "[";
        for (int c = 0; c < mu.dim; ++c) {
            out += format_double(mu.coord(i, c));
            out += ',';
        }
        out += format_double(mu.weights[i]);
        out += ']';
    }
    out += "]}\n";
    return out;
}

std::string to_csv(const GridMeasure& gm) {
    std::string out = "cell,center,mass\n";
    for (int i = 0; i < gm.n_cells; ++i) {
        out += std::to_string(i);
        out += ',';
        out += format_double(gm.cell_center(i));
        out += ',';
        out += format_double(gm.masses[i]);
        out += '\n';
    }
    return out;
}

} // namespace fiberlift
