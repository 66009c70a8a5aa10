#include "fiberlift/systems.hpp"
#include "fiberlift/errors.hpp"
#include "fiberlift/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fiberlift {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LineFit {
    double slope = 0, intercept = 0, rms = 0;
    bool ok = false;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    size_t n = x.size();
    if (n < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double det = n * sxx - sx * sx;
    if (std::fabs(det) < 1e-14) return f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0;
    for (size_t i = 0; i < n; ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    f.ok = true;
    return f;
}

LineFit loglog_slope(const std::vector<std::pair<double, double>>& pts, size_t from, size_t to) {
    std::vector<double> xs, ys;
    for (size_t i = from; i < to && i < pts.size(); ++i) {
        if (pts[i].first > 0) {
            xs.push_back(std::log(pts[i].first));
            ys.push_back(std::log(pts[i].second));
        }
    }
    return least_squares(xs, ys);
}

} // namespace

double DecayFit::value(double n) const {
    switch (model) {
        case Model::exponential: return amplitude * std::pow(theta, n);
        case Model::polynomial: return n >= 1 ? amplitude * std::pow(n, -degree) : amplitude;
        default: return 0;
    }
}

DecayFit fit_decay(const std::vector<std::pair<double, double>>& values) {
    DecayFit out;
    std::vector<std::pair<double, double>> pts;
    for (auto& [n, v] : values)
        if (std::isfinite(v) && v > 0) pts.push_back({n, v});
    if (pts.empty()) {
        out.exact_collapse = true;
        out.theta = 0;
        return out;
    }

    // Trailing plateau detection in log-log space: genuine exponential or
    // polynomial decay keeps steepening or stays linear there, while a noise
    // plateau flattens out (or creeps back up as sampling degrades).
    bool plateau = false;
    if (pts.size() >= 6) {
        size_t half = pts.size() / 2;
        LineFit head = loglog_slope(pts, 0, half);
        LineFit tail = loglog_slope(pts, half, pts.size());
        if (head.ok && tail.ok && head.slope <= -0.5 && tail.slope >= 0.3 * head.slope)
            plateau = true;
    }

    std::vector<std::pair<double, double>> usable;
    if (!plateau) {
        usable = pts;
    } else {
        double vmin = pts.front().second;
        for (auto& p : pts) vmin = std::min(vmin, p.second);
        size_t ntail = std::max<size_t>(3, (pts.size() + 9) / 10);
        std::vector<double> tail_vals;
        for (size_t i = pts.size() - ntail; i < pts.size(); ++i) tail_vals.push_back(pts[i].second);
        // flat tails: the tail median is the floor; rising tails: the minimum is
        out.noise_floor = std::min(median_of(tail_vals), 2.0 * vmin);

        // preliminary fit on points safely above the floor, then extend the
        // window while measurements stay near the predicted decay
        std::vector<std::pair<double, double>> clean;
        for (auto& p : pts) {
            if (p.second <= 3.0 * vmin) break;
            clean.push_back(p);
        }
        if (clean.size() < 2) {
            out.points_used = static_cast<int>(clean.size());
            return out;
        }
        std::vector<double> xs, ys;
        for (auto& [n, v] : clean) {
            xs.push_back(n);
            ys.push_back(std::log(v));
        }
        LineFit pre = least_squares(xs, ys);
        usable = clean;
        for (size_t i = clean.size(); i < pts.size(); ++i) {
            double predicted = std::exp(pre.intercept + pre.slope * pts[i].first);
            if (pts[i].second > 2.0 * predicted || pts[i].second < 0.4 * predicted) break;
            usable.push_back(pts[i]);
        }
    }
    out.points_used = static_cast<int>(usable.size());
    if (usable.size() < 5) return out; // not enough signal above the floor

    std::vector<double> ns, lnv, ns_pos, lnn, lnv_pos;
    for (auto& [n, v] : usable) {
        ns.push_back(n);
        lnv.push_back(std::log(v));
        if (n > 0) {
            ns_pos.push_back(n);
            lnn.push_back(std::log(n));
            lnv_pos.push_back(std::log(v));
        }
    }
    LineFit fe = least_squares(ns, lnv);
    LineFit fp = least_squares(lnn, lnv_pos);

    bool exp_ok = fe.ok && std::exp(fe.slope) < 0.999 && std::exp(fe.slope) > 1e-12;
    bool poly_ok = fp.ok && -fp.slope > 0.02;

    // 5% tie margin defaults to the exponential model; residuals compared on
    // the common n >= 1 subset (log-log cannot use n = 0)
    double fe_rms_pos = 0;
    for (size_t i = 0; i < ns_pos.size(); ++i) {
        double r = lnv_pos[i] - (fe.intercept + fe.slope * ns_pos[i]);
        fe_rms_pos += r * r;
    }
    fe_rms_pos = ns_pos.empty() ? fe.rms : std::sqrt(fe_rms_pos / ns_pos.size());
    bool pick_exp;
    if (exp_ok && poly_ok)
        pick_exp = fe_rms_pos <= 1.05 * fp.rms;
    else
        pick_exp = exp_ok;

    if (pick_exp && exp_ok) {
        out.model = DecayFit::Model::exponential;
        out.theta = std::exp(fe.slope);
        out.amplitude = std::exp(fe.intercept);
        out.residual = fe.rms;
    } else if (poly_ok) {
        out.model = DecayFit::Model::polynomial;
        out.degree = -fp.slope;
        out.amplitude = std::exp(fp.intercept);
        out.residual = fp.rms;
    }
    return out;
}

// ---------------------------------------------------------------------------
// ModulusClass
// ---------------------------------------------------------------------------

ModulusClass ModulusClass::holder(double alpha) {
    if (alpha <= 0 || alpha > 1) throw ParameterError("holder modulus requires alpha in (0,1]");
    ModulusClass m;
    m.kind = Kind::holder;
    m.exponent = alpha;
    return m;
}

ModulusClass ModulusClass::log_holder(double alpha) {
    if (alpha <= 0) throw ParameterError("log-holder modulus requires alpha > 0");
    ModulusClass m;
    m.kind = Kind::log_holder;
    m.exponent = alpha;
    m.r_alpha = std::exp(alpha + 1.0); // smallest choice keeping the modulus concave on (0,1]
    return m;
}

double ModulusClass::operator()(double r) const {
    if (r <= 0) return 0;
    if (kind == Kind::holder) return std::pow(r, exponent);
    double rr = std::min(r, 1.0);
    return std::pow(std::log(r_alpha / rr), -exponent);
}

std::string ModulusClass::describe() const {
    std::ostringstream os;
    if (kind == Kind::holder)
        os << "holder(" << exponent << ")";
    else
        os << "log_holder(" << exponent << ", r_alpha=" << r_alpha << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// FiberedSystem
// ---------------------------------------------------------------------------

void FiberedSystem::section(double y, double* out) const {
    out[0] = y;
    for (int i = 0; i < dim_fiber; ++i) out[1 + i] = section_point[i];
}

void FiberedSystem::step_dithered(const double* x, double* out, const CounterRng& rng,
                                  uint64_t stream, uint64_t k) const {
    apply_T(x, out);
    if (dyadic_base) {
        // refresh the lowest mantissa bit: the binary shift otherwise runs out
        // of digits after ~52 steps and every float orbit collapses to 0
        uint64_t bit = rng.raw(0xd17e4ULL ^ stream, k) & 1ULL;
        if (bit) out[0] = wrap01(out[0] + 0x1.0p-52);
    }
}

// ---------------------------------------------------------------------------
// Zoo
// ---------------------------------------------------------------------------

std::function<double(double)> pomeau_manneville(double q) {
    if (q < 0 || q >= 1) throw ParameterError("pomeau_manneville requires q in [0,1)");
    return [q](double y) {
        y = wrap01(y);
        if (y <= 0.5) return wrap01((1.0 + std::pow(2.0 * y, q)) * y);
        return 2.0 * y - 1.0;
    };
}

namespace {

std::vector<MonotoneBranch> linear_branches(int k) {
    std::vector<MonotoneBranch> out;
    for (int j = 0; j < k; ++j) {
        MonotoneBranch b;
        b.lo = double(j) / k;
        b.hi = double(j + 1) / k;
        b.image_lo = 0;
        b.image_hi = 1;
        b.forward = [k, j](double y) { return k * y - j; };
        b.inverse = [k, j](double t) { return (t + j) / k; };
        b.deriv = [k](double) { return double(k); };
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<MonotoneBranch> pm_branches(double q) {
    std::vector<MonotoneBranch> out;
    MonotoneBranch b1;
    b1.lo = 0;
    b1.hi = 0.5;
    b1.image_lo = 0;
    b1.image_hi = 1;
    b1.forward = [q](double y) { return (1.0 + std::pow(2.0 * y, q)) * y; };
    b1.deriv = [q](double y) { return 1.0 + (q + 1.0) * std::pow(2.0 * y, q); };
    b1.inverse = [q](double t) {
        // no closed form for general q; bisect to ~1e-16
        double lo = 0, hi = 0.5;
        for (int it = 0; it < 100; ++it) {
            double mid = 0.5 * (lo + hi);
            ((1.0 + std::pow(2.0 * mid, q)) * mid < t ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    out.push_back(std::move(b1));
    MonotoneBranch b2;
    b2.lo = 0.5;
    b2.hi = 1.0;
    b2.image_lo = 0;
    b2.image_hi = 1;
    b2.forward = [](double y) { return 2.0 * y - 1.0; };
    b2.inverse = [](double t) { return 0.5 * (t + 1.0); };
    b2.deriv = [](double) { return 2.0; };
    out.push_back(std::move(b2));
    return out;
}

FiberedSystem base_only(std::string name, std::function<double(double)> S, bool dyadic,
                        double lipschitz) {
    FiberedSystem sys;
    sys.name = std::move(name);
    sys.geom.base_circle = true;
    sys.geom.fiber.dim = 0;
    sys.dim_fiber = 0;
    sys.apply_S = S;
    sys.apply_T = [S](const double* in, double* out) { out[0] = S(in[0]); };
    sys.dyadic_base = dyadic;
    sys.lipschitz_T = lipschitz;
    return sys;
}

} // namespace

FiberedSystem doubling_base_system() {
    auto sys = base_only("doubling", [](double y) { return wrap01(2.0 * y); }, true, 2.0);
    sys.base_branches = linear_branches(2);
    return sys;
}

FiberedSystem pm_base_system(double q) {
    auto S = pomeau_manneville(q);
    auto sys = base_only("pm", S, q == 0.0, q + 2.0);
    sys.base_branches = pm_branches(q);
    return sys;
}

FiberedSystem expanding_base_system(int k) {
    if (k < 2) throw ParameterError("expanding_k requires k >= 2");
    bool dyadic = (k & (k - 1)) == 0;
    auto sys = base_only("expanding_" + std::to_string(k),
                         [k](double y) { return wrap01(k * y); }, dyadic, static_cast<double>(k));
    sys.base_branches = linear_branches(k);
    return sys;
}

FiberedSystem make_skew_product(const std::string& name, std::function<double(double)> base,
                                std::function<void(double, const double*, double*)> fiber_map,
                                const Box& fiber_domain, bool dyadic_base,
                                std::optional<double> lipschitz) {
    if (fiber_domain.dim < 1 || fiber_domain.dim > kMaxDim - 1)
        throw ParameterError("fiber domain must have 1 or 2 dimensions");

    // sampled invariance check of the fiber domain
    CounterRng rng{0x5eedULL};
    for (int s = 0; s < 512; ++s) {
        double y = rng.uniform(s, 0);
        std::array<double, kMaxDim> z{}, w{};
        for (int i = 0; i < fiber_domain.dim; ++i)
            z[i] = fiber_domain.lo[i] + rng.uniform(s, 1 + i) * fiber_domain.width(i);
        fiber_map(y, z.data(), w.data());
        if (!fiber_domain.contains(w.data(), 1e-12)) {
            std::ostringstream os;
            os << "fiber map leaves its domain at y=" << y << ", z=(";
            for (int i = 0; i < fiber_domain.dim; ++i) os << (i ? "," : "") << z[i];
            os << ") -> (";
            for (int i = 0; i < fiber_domain.dim; ++i) os << (i ? "," : "") << w[i];
            os << ")";
            throw DomainViolation(os.str());
        }
    }

    FiberedSystem sys;
    sys.name = name;
    sys.geom.base_circle = true;
    sys.geom.fiber = fiber_domain;
    sys.dim_fiber = fiber_domain.dim;
    sys.apply_S = base;
    sys.dyadic_base = dyadic_base;
    sys.lipschitz_T = lipschitz;
    sys.section_point = fiber_domain.center();
    int df = fiber_domain.dim;
    sys.apply_T = [base, fiber_map, df](const double* in, double* out) {
        double y = in[0];
        std::array<double, kMaxDim> z{};
        fiber_map(y, in + 1, z.data());
        out[0] = base(y);
        for (int i = 0; i < df; ++i) out[1 + i] = z[i];
    };
    return sys;
}

FiberedSystem solenoid_system(double lambda, std::function<void(double, double*)> offset,
                              double max_offset_norm) {
    if (lambda <= 0 || lambda >= 1) throw ParameterError("solenoid requires lambda in (0,1)");
    if (lambda + max_offset_norm > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "solenoid disk not preserved: lambda + max|offset| = "
           << lambda + max_offset_norm << " > 1";
        throw DomainViolation(os.str());
    }
    Box disk;
    disk.dim = 2;
    disk.lo = {-1.0, -1.0, 0.0};
    disk.hi = {1.0, 1.0, 0.0};
    auto fiber_map = [lambda, offset](double y, const double* z, double* w) {
        double off[2];
        offset(y, off);
        w[0] = lambda * z[0] + off[0];
        w[1] = lambda * z[1] + off[1];
    };
    auto sys = make_skew_product("solenoid", [](double y) { return wrap01(2.0 * y); },
                                 fiber_map, disk, true, 2.0);
    sys.base_branches = linear_branches(2);
    return sys;
}

FiberedSystem solenoid_system(double lambda) {
    return solenoid_system(
        lambda,
        [](double y, double* off) {
            off[0] = 0.5 * std::cos(6.283185307179586 * y);
            off[1] = 0.5 * std::sin(6.283185307179586 * y);
        },
        0.5);
}

FiberedSystem make_system(const std::string& name, const std::map<std::string, double>& params) {
    auto get = [&](const std::string& key, double dflt) {
        auto it = params.find(key);
        return it == params.end() ? dflt : it->second;
    };
    if (name == "doubling") return doubling_base_system();
    if (name == "pm") return pm_base_system(get("q", 0.3));
    if (name == "expanding_k") return expanding_base_system(static_cast<int>(get("k", 3)));
    if (name == "solenoid") {
        double lambda = get("lambda", 0.4);
        double amp = get("offset", 0.5);
        return solenoid_system(
            lambda,
            [amp](double y, double* off) {
                off[0] = amp * std::cos(6.283185307179586 * y);
                off[1] = amp * std::sin(6.283185307179586 * y);
            },
            amp);
    }
    if (name == "skew") {
        double q = get("q", 0.3);
        double rate = get("rate", 0.4);
        double amp = get("amp", 0.25);
        if (std::fabs(rate) + amp > 1.0 + 1e-12)
            throw DomainViolation("skew fiber map leaves [-1,1]: |rate| + amp > 1");
        Box seg;
        seg.dim = 1;
        seg.lo = {-1.0, 0.0, 0.0};
        seg.hi = {1.0, 0.0, 0.0};
        auto base = q == 0.0 ? std::function<double(double)>([](double y) { return wrap01(2.0 * y); })
                             : pomeau_manneville(q);
        auto sys = make_skew_product(
            "skew", base,
            [rate, amp](double y, const double* z, double* w) {
                w[0] = rate * z[0] + amp * std::cos(6.283185307179586 * y);
            },
            seg, q == 0.0, q + 2.0);
        sys.base_branches = q == 0.0 ? linear_branches(2) : pm_branches(q);
        return sys;
    }
    throw ParameterError("unknown system name: " + name);
}

// ---------------------------------------------------------------------------
// Regularity estimates
// ---------------------------------------------------------------------------

ShrinkEstimate estimate_shrinking(const FiberedSystem& sys, int n_max, int fibers,
                                  int pairs_per_fiber, uint64_t seed) {
    if (n_max < 2) throw ParameterError("estimate_shrinking: n_max must be >= 2");
    if (fibers < 1) throw ParameterError("estimate_shrinking: fibers must be >= 1");
    if (sys.dim_fiber == 0) throw ParameterError("estimate_shrinking: system has no fiber");

    CounterRng rng{seed};
    std::vector<std::vector<double>> per_fiber(fibers, std::vector<double>(n_max, 0.0));

    parallel_for(static_cast<size_t>(fibers), [&](size_t f) {
        double y = rng.uniform(f, 0, 0);
        std::vector<double> a(n_max, 0.0);
        std::array<double, kMaxDim> x0{}, x1{}, t0{}, t1{};
        for (int p = 0; p < pairs_per_fiber; ++p) {
            x0[0] = y;
            x1[0] = y;
            for (int i = 0; i < sys.dim_fiber; ++i) {
                x0[1 + i] = sys.geom.fiber.lo[i] + rng.uniform(f, p, 2 * i + 1) * sys.geom.fiber.width(i);
                x1[1 + i] = sys.geom.fiber.lo[i] + rng.uniform(f, p, 2 * i + 2) * sys.geom.fiber.width(i);
            }
            for (int n = 0; n < n_max; ++n) {
                sys.step(x0.data(), t0.data());
                sys.step(x1.data(), t1.data());
                x0 = t0;
                x1 = t1;
                a[n] = std::max(a[n], sys.geom.dist_total(x0.data(), x1.data()));
            }
        }
        per_fiber[f] = std::move(a);
    });

    ShrinkEstimate est;
    est.samples_per_fiber = pairs_per_fiber;
    est.fibers_sampled = fibers;
    est.a_n.assign(n_max, 0.0);
    for (int f = 0; f < fibers; ++f)
        for (int n = 0; n < n_max; ++n) est.a_n[n] = std::max(est.a_n[n], per_fiber[f][n]);

    double amax = *std::max_element(est.a_n.begin(), est.a_n.end());
    if (amax <= 0) {
        est.exact_collapse = true;
        est.fit.exact_collapse = true;
        est.fit.theta = 0;
        return est;
    }
    est.non_shrinking = est.a_n.back() >= 0.5 * amax;

    std::vector<std::pair<double, double>> pts;
    for (int n = 0; n < n_max; ++n) pts.push_back({double(n + 1), est.a_n[n]});
    est.fit = fit_decay(pts);
    if (!est.fit.decays()) est.non_shrinking = true;
    return est;
}

double estimate_lipschitz(const FiberedSystem& sys, int samples, uint64_t seed) {
    if (samples < 2) throw ParameterError("estimate_lipschitz: samples must be >= 2");
    CounterRng rng{seed ^ 0x11bULL};
    std::vector<double> slot(samples, 0.0);
    parallel_for(static_cast<size_t>(samples), [&](size_t s) {
        std::array<double, kMaxDim> a{}, b{}, ta{}, tb{};
        // mix global pairs with short-range pairs so the max is explored at
        // several scales
        double scale = (s % 2) ? 1.0 : std::pow(10.0, -1.0 - double(s % 7));
        a[0] = rng.uniform(s, 1);
        b[0] = wrap01(a[0] + scale * (rng.uniform(s, 2) - 0.5));
        for (int i = 0; i < sys.dim_fiber; ++i) {
            double w = sys.geom.fiber.width(i);
            a[1 + i] = sys.geom.fiber.lo[i] + rng.uniform(s, 3 + 2 * i) * w;
            double delta = scale * (rng.uniform(s, 4 + 2 * i) - 0.5) * w;
            b[1 + i] = std::clamp(a[1 + i] + delta, sys.geom.fiber.lo[i], sys.geom.fiber.hi[i]);
        }
        double d0 = sys.geom.dist_total(a.data(), b.data());
        if (d0 < 1e-15) return; // coincident pair, skipped
        sys.step(a.data(), ta.data());
        sys.step(b.data(), tb.data());
        slot[s] = sys.geom.dist_total(ta.data(), tb.data()) / d0;
    });
    double best = 0;
    for (double r : slot) best = std::max(best, r);
    return best;
}

} // namespace fiberlift
