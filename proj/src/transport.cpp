#include "fiberlift/transport.hpp"
#include "fiberlift/errors.hpp"
#include "fiberlift/io.hpp"
#include "fiberlift/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace fiberlift {

double Coupling::marginal_violation(const std::vector<double>& a, const std::vector<double>& b) const {
    std::vector<double> ra(n_rows, 0.0), rb(n_cols, 0.0);
    for (size_t k = 0; k < mass.size(); ++k) {
        ra[row[k]] += mass[k];
        rb[col[k]] += mass[k];
    }
    double worst = 0;
    for (size_t i = 0; i < n_rows; ++i) worst = std::max(worst, std::fabs(ra[i] - a[i]));
    for (size_t j = 0; j < n_cols; ++j) worst = std::max(worst, std::fabs(rb[j] - b[j]));
    return worst;
}

double Coupling::eval_cost(const std::function<double(size_t, size_t)>& c) const {
    double s = 0;
    for (size_t k = 0; k < mass.size(); ++k) s += mass[k] * c(row[k], col[k]);
    return s;
}

std::string Coupling::to_csv() const {
    std::string out = "i,j,mass\n";
    for (size_t k = 0; k < mass.size(); ++k) {
        out += std::to_string(row[k]);
        out += ',';
        out += std::to_string(col[k]);
        out += ',';
        out += format_double(mass[k]);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transportation simplex
// ---------------------------------------------------------------------------
namespace {

struct TransportSimplex {
    size_t n, m, V;
    const std::vector<double>&a, &b;
    std::vector<double> C; // dense row-major costs

    // basis: V-1 edges (source i, sink j, flow)
    struct Edge {
        int i, j;
        double flow;
    };
    std::vector<Edge> basis;
    std::vector<int> parent, pred_edge, order; // tree as rebuilt by BFS
    std::vector<double> pot;                   // node potentials
    std::vector<char> in_basis;                // nm flags

    TransportSimplex(const std::vector<double>& a_, const std::vector<double>& b_,
                     const std::function<double(size_t, size_t)>& cost)
        : n(a_.size()), m(b_.size()), V(n + m), a(a_), b(b_) {
        C.resize(n * m);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) C[i * m + j] = cost(i, j);
        in_basis.assign(n * m, 0);
        parent.assign(V, -1);
        pred_edge.assign(V, -1);
        pot.assign(V, 0.0);
        order.reserve(V);
        northwest_start();
    }

    void northwest_start() {
        std::vector<double> ra = a, rb = b;
        size_t i = 0, j = 0;
        basis.reserve(V - 1);
        while (true) {
            double f = std::min(ra[i], rb[j]);
            basis.push_back({int(i), int(j), f});
            in_basis[i * m + j] = 1;
            if (i == n - 1 && j == m - 1) break;
            if (ra[i] <= rb[j] && i < n - 1) {
                rb[j] -= ra[i];
                ra[i] = 0;
                ++i;
            } else if (j < m - 1) {
                ra[i] -= rb[j];
                rb[j] = 0;
                ++j;
            } else {
                rb[j] -= ra[i];
                ra[i] = 0;
                ++i;
            }
        }
    }

    // Rebuild parent/pred/potentials from the basis edge list. Nodes: sources
    // are 0..n-1, sinks n..n+m-1. Root is node 0 with potential 0.
    std::vector<std::vector<int>> adj_; // edge indices per node, reused
    void rebuild_tree() {
        if (adj_.empty()) adj_.assign(V, {});
        for (auto& v : adj_) v.clear();
        for (size_t e = 0; e < basis.size(); ++e) {
            adj_[basis[e].i].push_back(int(e));
            adj_[size_t(n) + basis[e].j].push_back(int(e));
        }
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(pred_edge.begin(), pred_edge.end(), -1);
        order.clear();
        order.push_back(0);
        parent[0] = 0;
        pot[0] = 0;
        for (size_t head = 0; head < order.size(); ++head) {
            int u = order[head];
            for (int e : adj_[u]) {
                int other = (basis[e].i == u) ? int(n) + basis[e].j : basis[e].i;
                if (parent[other] != -1) continue;
                parent[other] = u;
                pred_edge[other] = e;
                // basic arcs satisfy pot[src] + pot[sink] = cost
                pot[other] = C[size_t(basis[e].i) * m + basis[e].j] - pot[u];
                order.push_back(other);
            }
        }
        if (order.size() != V) throw ConvergenceError("transport simplex: basis is not spanning");
    }

    // entering-arc search: block pricing with a rolling cursor
    size_t cursor = 0;
    bool find_entering(size_t& ei, size_t& ej, bool full_scan) {
        size_t total = n * m;
        size_t block = full_scan ? total : std::max<size_t>(256, 4 * size_t(std::sqrt(double(total))));
        block = std::min(block, total);
        double best = -1e-12;
        bool found = false;
        size_t scanned = 0;
        while (scanned < total) {
            for (size_t t = 0; t < block && scanned < total; ++t, ++scanned) {
                size_t k = cursor;
                cursor = cursor + 1 == total ? 0 : cursor + 1;
                if (in_basis[k]) continue;
                size_t i = k / m, j = k % m;
                double rc = C[k] - pot[i] - pot[n + j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                    found = true;
                }
            }
            if (found || full_scan) break;
        }
        return found;
    }

    // collect tree path node -> root as a node list
    void path_to_root(int v, std::vector<int>& out) const {
        out.clear();
        while (true) {
            out.push_back(v);
            if (v == 0) break;
            v = parent[v];
        }
    }

    int solve(int max_pivots) {
        int pivots = 0;
        std::vector<int> pa, pb;
        std::vector<char> on_a(V, 0);
        rebuild_tree();
        while (true) {
            size_t ei = 0, ej = 0;
            if (!find_entering(ei, ej, false)) break;
            if (++pivots > max_pivots)
                throw ConvergenceError("transport simplex: pivot limit exceeded");

            // cycle = entering arc + tree paths from its endpoints to their LCA
            path_to_root(int(ei), pa);
            path_to_root(int(n + ej), pb);
            for (int v : pa) on_a[v] = 1;
            int lca = -1;
            for (int v : pb)
                if (on_a[v]) {
                    lca = v;
                    break;
                }
            for (int v : pa) on_a[v] = 0;

            // Flow alternates sign along the cycle; the tree edge adjacent to
            // each endpoint of the entering arc loses flow first.
            double theta = std::numeric_limits<double>::infinity();
            int leave = -1;
            auto scan_path = [&](const std::vector<int>& path) {
                int sign = -1;
                for (int v : path) {
                    if (v == lca) break;
                    int e = pred_edge[v];
                    if (sign < 0 && basis[e].flow < theta) {
                        theta = basis[e].flow;
                        leave = e;
                    }
                    sign = -sign;
                }
            };
            scan_path(pa);
            scan_path(pb);
            if (leave < 0) throw ConvergenceError("transport simplex: unbounded pivot");

            auto apply_path = [&](const std::vector<int>& path) {
                int sign = -1;
                for (int v : path) {
                    if (v == lca) break;
                    basis[pred_edge[v]].flow += sign * theta;
                    sign = -sign;
                }
            };
            apply_path(pa);
            apply_path(pb);

            in_basis[size_t(basis[leave].i) * m + basis[leave].j] = 0;
            basis[leave] = {int(ei), int(ej), theta};
            in_basis[ei * m + ej] = 1;
            rebuild_tree();
        }
        return pivots;
    }
};

} // namespace

ExactOtResult solve_transport(const std::vector<double>& a, const std::vector<double>& b,
                              const std::function<double(size_t, size_t)>& cost) {
    if (a.empty() || b.empty()) throw ParameterError("solve_transport: empty measure");
    if (a.size() > 5000 || b.size() > 5000)
        throw PreconditionError("solve_transport: exact solver capped at 5000 atoms a side");
    double sa = std::accumulate(a.begin(), a.end(), 0.0);
    double sb = std::accumulate(b.begin(), b.end(), 0.0);
    if (std::fabs(sa - sb) > 1e-9) throw PreconditionError("solve_transport: unbalanced masses");

    TransportSimplex ts(a, b, cost);
    ExactOtResult res;
    res.pivots = ts.solve(int(200 * (a.size() + b.size()) + 20000));
    res.plan.n_rows = a.size();
    res.plan.n_cols = b.size();
    double total = 0;
    for (auto& e : ts.basis) {
        if (e.flow > 0) {
            res.plan.add(size_t(e.i), size_t(e.j), e.flow);
            total += e.flow * ts.C[size_t(e.i) * b.size() + e.j];
        }
    }
    res.cost = total;
    res.plan.cost = total;
    res.dual_row.assign(a.size(), 0.0);
    res.dual_col.assign(b.size(), 0.0);
    for (size_t i = 0; i < a.size(); ++i) res.dual_row[i] = ts.pot[i];
    for (size_t j = 0; j < b.size(); ++j) res.dual_col[j] = ts.pot[a.size() + j];
    return res;
}

// ---------------------------------------------------------------------------
// Sinkhorn
// ---------------------------------------------------------------------------

SinkhornResult sinkhorn_transport(const std::vector<double>& a, const std::vector<double>& b,
                                  const std::function<double(size_t, size_t)>& cost,
                                  const SinkhornOptions& opt) {
    size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) throw ParameterError("sinkhorn: empty measure");
    std::vector<double> C(n * m);
    double cmax = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) {
            C[i * m + j] = cost(i, j);
            cmax = std::max(cmax, C[i * m + j]);
        }
    std::vector<double> f(n, 0.0), g(m, 0.0), la(n), lb(m);
    for (size_t i = 0; i < n; ++i) la[i] = std::log(a[i]);
    for (size_t j = 0; j < m; ++j) lb[j] = std::log(b[j]);

    std::vector<double> eps_stages;
    if (opt.scale_epsilon && cmax > 0) {
        double e = 0.2 * cmax;
        while (e > opt.epsilon * 1.5) {
            eps_stages.push_back(e);
            e *= 0.5;
        }
    }
    eps_stages.push_back(opt.epsilon);

    auto lse_row = [&](size_t i, double eps) {
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < m; ++j) mx = std::max(mx, (g[j] - C[i * m + j]) / eps + lb[j]);
        double s = 0;
        for (size_t j = 0; j < m; ++j) s += std::exp((g[j] - C[i * m + j]) / eps + lb[j] - mx);
        return mx + std::log(s);
    };
    auto lse_col = [&](size_t j, double eps) {
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < n; ++i) mx = std::max(mx, (f[i] - C[i * m + j]) / eps + la[i]);
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += std::exp((f[i] - C[i * m + j]) / eps + la[i] - mx);
        return mx + std::log(s);
    };

    SinkhornResult res;
    res.epsilon = opt.epsilon;
    double viol = std::numeric_limits<double>::infinity();
    int iters = 0;
    for (size_t stage = 0; stage < eps_stages.size(); ++stage) {
        double eps = eps_stages[stage];
        bool last = stage + 1 == eps_stages.size();
        int cap = last ? opt.max_iterations : std::max(50, opt.max_iterations / 50);
        for (int it = 0; it < cap; ++it) {
            for (size_t i = 0; i < n; ++i) f[i] = -eps * lse_row(i, eps);
            for (size_t j = 0; j < m; ++j) g[j] = -eps * lse_col(j, eps);
            ++iters;
            // row marginals after a column update carry the violation
            viol = 0;
            for (size_t i = 0; i < n; ++i) {
                double s = 0;
                for (size_t j = 0; j < m; ++j)
                    s += std::exp((f[i] + g[j] - C[i * m + j]) / eps + la[i] + lb[j]);
                viol += std::fabs(s - a[i]);
            }
            if (viol < opt.tol) break;
        }
        if (last && viol >= opt.tol && viol > 1e-6) {
            std::ostringstream os;
            os << "sinkhorn failed to converge: marginal violation " << viol << " after " << iters
               << " iterations at epsilon " << eps;
            throw ConvergenceError(os.str());
        }
    }
    res.iterations = iters;
    res.marginal_violation = viol;

    // round to an exactly feasible plan
    double eps = opt.epsilon;
    std::vector<double> plan(n * m);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j)
            plan[i * m + j] = std::exp((f[i] + g[j] - C[i * m + j]) / eps + la[i] + lb[j]);
    std::vector<double> rs(n, 0.0), cs(m, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) rs[i] += plan[i * m + j];
    for (size_t i = 0; i < n; ++i) {
        double sc = rs[i] > 0 ? std::min(1.0, a[i] / rs[i]) : 0.0;
        for (size_t j = 0; j < m; ++j) plan[i * m + j] *= sc;
    }
    for (size_t j = 0; j < m; ++j)
        for (size_t i = 0; i < n; ++i) cs[j] += plan[i * m + j];
    for (size_t j = 0; j < m; ++j) {
        double sc = cs[j] > 0 ? std::min(1.0, b[j] / cs[j]) : 0.0;
        for (size_t i = 0; i < n; ++i) plan[i * m + j] *= sc;
    }
    std::vector<double> ea(n, 0.0), eb(m, 0.0);
    double tot = 0;
    for (size_t i = 0; i < n; ++i) {
        double s = 0;
        for (size_t j = 0; j < m; ++j) s += plan[i * m + j];
        ea[i] = a[i] - s;
        tot += ea[i];
    }
    for (size_t j = 0; j < m; ++j) {
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += plan[i * m + j];
        eb[j] = b[j] - s;
    }
    if (tot > 1e-300) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) plan[i * m + j] += ea[i] * eb[j] / tot;
    }
    res.plan.n_rows = n;
    res.plan.n_cols = m;
    double total_cost = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) {
            if (plan[i * m + j] > 1e-300) res.plan.add(i, j, plan[i * m + j]);
            total_cost += plan[i * m + j] * C[i * m + j];
        }
    res.cost = total_cost;
    res.plan.cost = total_cost;
    return res;
}

// ---------------------------------------------------------------------------
// 1D exact
// ---------------------------------------------------------------------------

double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.size() == 0 || nu.size() == 0) throw ParameterError("wasserstein_1d: empty measure");
    if (mu.tag != SpaceTag::base || nu.tag != SpaceTag::base)
        throw PreconditionError("wasserstein_1d: expects 1D base measures");
    bool circle = mu.geom.base_circle;

    // cdf difference H = F - G is piecewise constant on atom-position segments
    struct Ev {
        double x, dw;
    };
    std::vector<Ev> ev;
    ev.reserve(mu.size() + nu.size());
    for (size_t i = 0; i < mu.size(); ++i) ev.push_back({circle ? wrap01(mu.points[i]) : mu.points[i], mu.weights[i]});
    for (size_t j = 0; j < nu.size(); ++j) ev.push_back({circle ? wrap01(nu.points[j]) : nu.points[j], -nu.weights[j]});
    std::sort(ev.begin(), ev.end(), [](const Ev& p, const Ev& q) { return p.x < q.x; });

    std::vector<double> level, seglen;
    double h = 0;
    for (size_t k = 0; k < ev.size();) {
        double x = ev[k].x;
        while (k < ev.size() && ev[k].x == x) h += ev[k++].dw;
        double next = (k < ev.size()) ? ev[k].x : (circle ? ev.front().x + 1.0 : x);
        if (next > x) {
            level.push_back(h);
            seglen.push_back(next - x);
        }
    }
    if (level.empty()) return 0;

    double shift = 0;
    if (circle) {
        // minimizing shift is the seglen-weighted median of the levels
        std::vector<size_t> idx(level.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t p, size_t q) { return level[p] < level[q]; });
        double tot = std::accumulate(seglen.begin(), seglen.end(), 0.0), run = 0;
        for (size_t p : idx) {
            run += seglen[p];
            if (run >= 0.5 * tot) {
                shift = level[p];
                break;
            }
        }
    }
    double w = 0;
    for (size_t s = 0; s < level.size(); ++s) w += seglen[s] * std::fabs(level[s] - shift);
    // normalized base metric: |dx| on the interval, 2x circle distance
    return circle ? 2.0 * w : w;
}

WassersteinResult wasserstein_discrete(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                       OtMethod method, const SinkhornOptions& sopt) {
    if (mu.size() == 0 || nu.size() == 0) throw ParameterError("wasserstein_discrete: empty measure");
    if (mu.tag != nu.tag || mu.dim != nu.dim)
        throw PreconditionError("wasserstein_discrete: measures live on different spaces");
    const Geometry& g = mu.geom;
    auto cost = [&](size_t i, size_t j) {
        if (mu.tag == SpaceTag::base) return g.dist_base(mu.points[i], nu.points[j]);
        return g.dist_total(mu.point(i), nu.point(j));
    };
    WassersteinResult out;
    if (method == OtMethod::exact) {
        auto res = solve_transport(mu.weights, nu.weights, cost);
        out.distance = res.cost;
        out.plan = std::move(res.plan);
    } else {
        out.sinkhorn = sinkhorn_transport(mu.weights, nu.weights, cost, sopt);
        out.distance = out.sinkhorn.cost;
        out.plan = out.sinkhorn.plan;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vertical (fiber-constrained) W1
// ---------------------------------------------------------------------------

VerticalResult vertical_wasserstein_full(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                         const VerticalOptions& opt) {
    if (mu.tag != SpaceTag::total || nu.tag != SpaceTag::total)
        throw PreconditionError("vertical_wasserstein: expects total-space measures");
    if (mu.dim != nu.dim) throw PreconditionError("vertical_wasserstein: dimension mismatch");
    int cells = opt.n_cells > 0
                    ? opt.n_cells
                    : int(std::ceil(std::sqrt(double(std::max(mu.size(), nu.size())))));

    Disintegration da = disintegrate(mu, cells);
    Disintegration db = disintegrate(nu, cells);

    VerticalResult res;
    res.n_cells = cells;
    for (int c = 0; c < cells; ++c) {
        double gap = std::fabs(da.bins[c].mass - db.bins[c].mass);
        if (gap > res.worst_marginal_gap) {
            res.worst_marginal_gap = gap;
            res.worst_cell = c;
        }
    }
    if (!opt.rebalance && res.worst_marginal_gap > opt.tau_marg) {
        std::ostringstream os;
        os << "vertical_wasserstein: base marginals differ by " << res.worst_marginal_gap
           << " at cell " << res.worst_cell << " (tolerance " << opt.tau_marg << ")";
        throw PreconditionError(os.str());
    }

    const Geometry& g = mu.geom;
    res.per_cell_cost.assign(cells, 0.0);
    std::vector<double> contribution(cells, 0.0);
    std::vector<int> empty_flag(cells, 0);

    parallel_for(size_t(cells), [&](size_t c) {
        const auto& ba = da.bins[c];
        const auto& bb = db.bins[c];
        double common = opt.rebalance ? 0.5 * (ba.mass + bb.mass) : ba.mass;
        if (common <= 0) return;
        bool ea = ba.atoms.empty(), eb = bb.atoms.empty();
        if (ea != eb) {
            // conservative: pay the whole fiber diameter for the mismatch
            empty_flag[c] = 1;
            res.per_cell_cost[c] = 1.0;
            contribution[c] = common * 1.0;
            return;
        }
        if (ea && eb) return;
        auto cost = [&](size_t i, size_t j) {
            return g.dist_fiber(mu.point(ba.atoms[i]) + 1, nu.point(bb.atoms[j]) + 1);
        };
        auto sol = solve_transport(ba.cond_weights, bb.cond_weights, cost);
        res.per_cell_cost[c] = sol.cost;
        contribution[c] = common * sol.cost;
    });

    for (int c = 0; c < cells; ++c) {
        res.value += contribution[c];
        res.empty_mismatch_cells += empty_flag[c];
        if (opt.rebalance) res.rebalanced_mass += std::fabs(da.bins[c].mass - db.bins[c].mass) * 0.5;
    }
    return res;
}

double vertical_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int n_cells) {
    VerticalOptions opt;
    opt.n_cells = n_cells;
    return vertical_wasserstein_full(mu, nu, opt).value;
}

} // namespace fiberlift
