#include "fiberlift/lifting.hpp"
#include "fiberlift/errors.hpp"

#include <cmath>

namespace fiberlift {

namespace {

EmpiricalMeasure section_lift(const FiberedSystem& sys, const EmpiricalMeasure& base_mu,
                              const std::function<void(double, double*)>& section) {
    EmpiricalMeasure nu;
    nu.tag = SpaceTag::total;
    nu.dim = sys.dim_total();
    nu.geom = sys.geom;
    nu.weights = base_mu.weights;
    nu.points.resize(base_mu.size() * nu.dim);
    std::array<double, kMaxDim> z{};
    for (size_t i = 0; i < base_mu.size(); ++i) {
        double y = base_mu.points[i];
        if (section)
            section(y, z.data());
        else
            for (int c = 0; c < sys.dim_fiber; ++c) z[c] = sys.section_point[c];
        nu.points[i * nu.dim] = y;
        for (int c = 0; c < sys.dim_fiber; ++c) nu.points[i * nu.dim + 1 + c] = z[c];
    }
    return nu;
}

EmpiricalMeasure base_pushforward(const FiberedSystem& sys, const EmpiricalMeasure& base_mu) {
    EmpiricalMeasure out = base_mu;
    for (size_t i = 0; i < out.size(); ++i) out.points[i] = sys.apply_S(base_mu.points[i]);
    return out;
}

} // namespace

LiftResult lift_measure(const FiberedSystem& sys, const EmpiricalMeasure& base_mu,
                        const LiftOptions& opt) {
    if (base_mu.tag != SpaceTag::base) throw PreconditionError("lift_measure: base measure expected");
    if (sys.dim_fiber == 0) throw PreconditionError("lift_measure: system has no fiber");

    LiftResult res;
    res.invariance_defect = wasserstein_1d(base_pushforward(sys, base_mu), base_mu);

    VerticalOptions vopt;
    vopt.n_cells = opt.n_cells > 0 ? opt.n_cells
                                   : int(std::ceil(std::sqrt(double(base_mu.size()))));
    vopt.rebalance = true; // push-forward marginals of a point cloud never match exactly

    EmpiricalMeasure current = section_lift(sys, base_mu, opt.start_section);
    if (opt.keep_iterates) res.iterates.push_back(current);

    for (int n = 0; n < opt.n_max; ++n) {
        EmpiricalMeasure next = pushforward(current, sys);
        if (opt.keep_iterates) res.iterates.push_back(next);
        res.iterations = n + 1;
        if (opt.compute_trace) {
            double d = vertical_wasserstein_full(current, next, vopt).value;
            res.cauchy_trace.push_back({double(n), d});
            if (d < opt.tol) {
                res.converged = true;
                res.lifted = std::move(next);
                break;
            }
        }
        current = std::move(next);
    }
    if (!res.converged) res.lifted = std::move(current);
    if (opt.compute_trace) res.fitted_rate = fit_decay(res.cauchy_trace);
    return res;
}

UniquenessReport check_lift_uniqueness(const FiberedSystem& sys, const EmpiricalMeasure& base_mu,
                                       const std::vector<std::function<void(double, double*)>>& sections,
                                       double tol, int n_max, int n_cells) {
    if (sections.size() < 2)
        throw PreconditionError("check_lift_uniqueness: need at least two sections");
    UniquenessReport rep;
    rep.threshold = 3.0 * tol;
    LiftOptions opt;
    opt.tol = tol;
    opt.n_max = n_max;
    opt.n_cells = n_cells;
    opt.compute_trace = false; // only the final iterates are compared
    for (auto& s : sections) {
        opt.start_section = s;
        rep.runs.push_back(lift_measure(sys, base_mu, opt));
    }
    VerticalOptions vopt;
    vopt.n_cells = n_cells > 0 ? n_cells : int(std::ceil(std::sqrt(double(base_mu.size()))));
    vopt.rebalance = true;
    for (size_t i = 0; i < rep.runs.size(); ++i)
        for (size_t j = i + 1; j < rep.runs.size(); ++j) {
            // runs share base atoms, so the vertical value is a valid upper
            // bound for the plain Wasserstein distance between finals
            double d = vertical_wasserstein_full(rep.runs[i].lifted, rep.runs[j].lifted, vopt).value;
            rep.pairwise_vertical.push_back(d);
            rep.max_pairwise = std::max(rep.max_pairwise, d);
        }
    rep.pass = rep.max_pairwise < rep.threshold;
    return rep;
}

StableLeafResult stable_leaf_experiment(const FiberedSystem& sys, const EmpiricalMeasure& nu,
                                        const LiftResult& reference, int n_max) {
    StableLeafResult out;
    EmpiricalMeasure current = nu;
    for (int n = 1; n <= n_max; ++n) {
        current = pushforward(current, sys);
        double d = wasserstein_discrete(current, reference.lifted, OtMethod::exact).distance;
        out.distances.push_back({double(n), d});
    }
    out.fit = fit_decay(out.distances);
    return out;
}

} // namespace fiberlift
