// Batch front end: read a sectioned key=value config, run one pipeline, and
// emit machine-readable results (JSON envelope + CSV artifacts + raster
// images). One pipeline per process; exit 0 = success, 2 = an assertion in
// the pipeline failed, 1 = configuration or runtime error.

#include "fiberlift/errors.hpp"
#include "fiberlift/io.hpp"
#include "fiberlift/lifting.hpp"
#include "fiberlift/measure.hpp"
#include "fiberlift/parallel.hpp"
#include "fiberlift/render.hpp"
#include "fiberlift/stats.hpp"
#include "fiberlift/systems.hpp"
#include "fiberlift/thermo.hpp"
#include "fiberlift/transport.hpp"
#include "fiberlift/ulam.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using nlohmann::json;
using namespace fiberlift;

namespace {

struct Config {
    std::string raw;
    std::string system_name;
    std::map<std::string, double> system_params;
    std::string pipeline;
    std::map<std::string, double> params;
    std::string out_dir;
};

[[noreturn]] void parse_fail(int line, int col, const std::string& msg) {
    std::ostringstream os;
    os << "config parse error at line " << line << ", column " << col << ": " << msg;
    throw ConfigError(os.str());
}

Config parse_config(const std::string& text) {
    Config cfg;
    cfg.raw = text;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    static const std::set<std::string> known_sections = {"system", "pipeline", "params", "output"};
    while (std::getline(in, line)) {
        ++lineno;
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#' || line[first] == ';') continue;
        size_t last = line.find_last_not_of(" \t\r");
        std::string body = line.substr(first, last - first + 1);
        if (body.front() == '[') {
            if (body.back() != ']') parse_fail(lineno, int(first) + 1, "unterminated section header");
            section = body.substr(1, body.size() - 2);
            if (!known_sections.count(section)) parse_fail(lineno, int(first) + 2, "unknown section '" + section + "'");
            continue;
        }
        size_t eq = body.find('=');
        if (eq == std::string::npos) parse_fail(lineno, int(first) + 1, "expected key = value");
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t");
            size_t b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(body.substr(0, eq));
        std::string val = trim(body.substr(eq + 1));
        if (key.empty()) parse_fail(lineno, int(first) + 1, "empty key");
        if (section.empty()) parse_fail(lineno, int(first) + 1, "key outside any section");
        if (section == "system") {
            if (key == "name") {
                cfg.system_name = val;
            } else {
                try {
                    cfg.system_params[key] = std::stod(val);
                } catch (...) {
                    parse_fail(lineno, int(eq) + 2, "expected a number for '" + key + "'");
                }
            }
        } else if (section == "pipeline") {
            if (key != "name") parse_fail(lineno, int(first) + 1, "unknown key '" + key + "' in [pipeline]");
            cfg.pipeline = val;
        } else if (section == "params") {
            try {
                cfg.params[key] = std::stod(val);
            } catch (...) {
                parse_fail(lineno, int(eq) + 2, "expected a number for '" + key + "'");
            }
        } else if (section == "output") {
            if (key != "dir") parse_fail(lineno, int(first) + 1, "unknown key '" + key + "' in [output]");
            cfg.out_dir = val;
        }
    }
    if (cfg.system_name.empty()) throw ConfigError("config: [system] name is required");
    if (cfg.pipeline.empty()) throw ConfigError("config: [pipeline] name is required");
    return cfg;
}

void validate_keys(const Config& cfg) {
    static const std::map<std::string, std::set<std::string>> system_keys = {
        {"doubling", {}},
        {"pm", {"q"}},
        {"expanding_k", {"k"}},
        {"solenoid", {"lambda", "offset"}},
        {"skew", {"q", "rate", "amp"}},
    };
    static const std::map<std::string, std::set<std::string>> pipeline_keys = {
        {"lift", {"atoms", "cells", "tol", "n_max", "seed", "stratified", "write_measure"}},
        {"uniqueness", {"atoms", "cells", "tol", "n_max", "seed"}},
        {"stable-leaf", {"atoms", "lift_atoms", "n_max", "tol", "seed", "cells"}},
        {"ulam", {"m", "construction", "samples", "seed", "tol", "write_operator"}},
        {"spectrum", {"m", "construction", "samples", "seed", "tol"}},
        {"coboundary", {"target_osc", "shrink_n_max", "fibers", "pairs", "seed", "atoms", "lift_n"}},
        {"corr", {"orbit_length", "burn_in", "n_max", "seed", "f", "g"}},
        {"clt", {"n_block", "samples", "seed", "atoms", "lift_n"}},
        {"attractor", {"n_iter", "image_size", "base_grid", "fiber_grid", "png"}},
        {"wasserstein", {"atoms", "seed", "method", "epsilon", "tol", "cells", "space"}},
    };
    auto sit = system_keys.find(cfg.system_name);
    if (sit == system_keys.end()) throw ConfigError("config: unknown system '" + cfg.system_name + "'");
    for (auto& [k, v] : cfg.system_params)
        if (!sit->second.count(k))
            throw ConfigError("config: unknown key '" + k + "' for system " + cfg.system_name);
    auto pit = pipeline_keys.find(cfg.pipeline);
    if (pit == pipeline_keys.end()) throw ConfigError("config: unknown pipeline '" + cfg.pipeline + "'");
    for (auto& [k, v] : cfg.params)
        if (!pit->second.count(k))
            throw ConfigError("config: unknown key '" + k + "' for pipeline " + cfg.pipeline);

    static const std::set<std::string> stochastic = {"lift",       "uniqueness", "stable-leaf",
                                                     "coboundary", "corr",       "clt",
                                                     "wasserstein"};
    bool ulam_mc = cfg.pipeline == "ulam" || cfg.pipeline == "spectrum";
    ulam_mc = ulam_mc && cfg.params.count("construction") && cfg.params.at("construction") == 1;
    if ((stochastic.count(cfg.pipeline) || ulam_mc) && !cfg.params.count("seed"))
        throw ConfigError("config: 'seed' is mandatory for stochastic pipeline " + cfg.pipeline);
}

double get(const std::map<std::string, double>& m, const std::string& k, double dflt) {
    auto it = m.find(k);
    return it == m.end() ? dflt : it->second;
}

struct Emitter {
    std::filesystem::path dir;
    json manifest = json::array();
    void emit(const std::string& name, const std::string& content) {
        write_file((dir / name).string(), content);
        manifest.push_back(name);
    }
};

Observable pick_observable(const FiberedSystem& sys, int code) {
    switch (code) {
        case 0: return [](const double* x) { return x[0]; };
        case 1: {
            int df = sys.dim_fiber;
            return [df](const double* x) {
                double s = 0;
                for (int c = 0; c < df; ++c) s += x[1 + c] * x[1 + c];
                return std::sqrt(s);
            };
        }
        case 2: return [](const double* x) { return x[1]; };
        default: throw ConfigError("unknown observable code (expected 0=base, 1=fiber_norm, 2=fiber_1)");
    }
}

json run_pipeline(const Config& cfg, const FiberedSystem& sys, uint64_t seed, Emitter& em,
                  json& pass) {
    json results;
    const auto& P = cfg.params;

    if (cfg.pipeline == "lift") {
        size_t atoms = size_t(get(P, "atoms", 10000));
        LiftOptions opt;
        opt.tol = get(P, "tol", 1e-3);
        opt.n_max = int(get(P, "n_max", 14));
        opt.n_cells = int(get(P, "cells", 0));
        auto base = get(P, "stratified", 1) != 0
                        ? stratified_base_cloud(sys.geom, atoms, seed)
                        : random_base_cloud(sys.geom, atoms, seed);
        LiftResult lr = lift_measure(sys, base, opt);
        em.emit("trace.csv", trace_csv("n", "vertical_distance", lr.cauchy_trace));
        if (get(P, "write_measure", 0) != 0) {
            em.emit("lifted.csv", to_csv(lr.lifted));
            em.emit("lifted.json", to_json(lr.lifted));
        }
        results["converged"] = lr.converged;
        results["iterations"] = lr.iterations;
        results["invariance_defect"] = lr.invariance_defect;
        results["fit"] = {{"model", lr.fitted_rate.model == DecayFit::Model::exponential
                                        ? "exponential"
                                        : lr.fitted_rate.model == DecayFit::Model::polynomial
                                              ? "polynomial"
                                              : "none"},
                          {"theta", lr.fitted_rate.theta},
                          {"degree", lr.fitted_rate.degree},
                          {"amplitude", lr.fitted_rate.amplitude},
                          {"residual", lr.fitted_rate.residual},
                          {"points_used", lr.fitted_rate.points_used},
                          {"noise_floor", lr.fitted_rate.noise_floor}};
        pass["ran"] = true;
    } else if (cfg.pipeline == "uniqueness") {
        size_t atoms = size_t(get(P, "atoms", 10000));
        double tol = get(P, "tol", 1e-3);
        int n_max = int(get(P, "n_max", 14));
        auto base = stratified_base_cloud(sys.geom, atoms, seed);
        std::vector<std::function<void(double, double*)>> secs;
        secs.push_back([&sys](double, double* z) {
            for (int c = 0; c < sys.dim_fiber; ++c) z[c] = sys.section_point[c];
        });
        secs.push_back([&sys](double, double* z) {
            for (int c = 0; c < sys.dim_fiber; ++c) z[c] = sys.geom.fiber.hi[c] * 0.9;
        });
        auto rep = check_lift_uniqueness(sys, base, secs, tol, n_max, int(get(P, "cells", 0)));
        results["max_pairwise"] = rep.max_pairwise;
        results["threshold"] = rep.threshold;
        pass["uniqueness"] = rep.pass;
    } else if (cfg.pipeline == "stable-leaf") {
        size_t atoms = size_t(get(P, "atoms", 600));
        LiftOptions opt;
        opt.tol = get(P, "tol", 1e-3);
        opt.n_max = 15;
        auto base = stratified_base_cloud(sys.geom, size_t(get(P, "lift_atoms", 2000)), seed);
        LiftResult ref = lift_measure(sys, base, opt);
        auto nu = random_total_cloud(sys, atoms, seed + 1);
        auto sl = stable_leaf_experiment(sys, nu, ref, int(get(P, "n_max", 12)));
        em.emit("stable_leaf.csv", trace_csv("n", "distance", sl.distances));
        if (sl.fit.model == DecayFit::Model::exponential) results["fitted_theta"] = sl.fit.theta;
        results["points"] = sl.distances.size();
        pass["ran"] = true;
    } else if (cfg.pipeline == "ulam" || cfg.pipeline == "spectrum") {
        int m = int(get(P, "m", 64));
        auto mode = get(P, "construction", 0) == 0 ? UlamOperator::Construction::exact_branches
                                                   : UlamOperator::Construction::monte_carlo;
        UlamOperator op = build_ulam(sys, m, mode, long(get(P, "samples", 10000)), seed);
        SpectralReport spec = invariant_density(op, get(P, "tol", 1e-12));
        GridMeasure gm = spec.invariant_density;
        em.emit("density.csv", to_csv(gm));
        if (get(P, "write_operator", 0) != 0) em.emit("operator.csv", op.to_csv());
        results["leading_eigenvalue"] = spec.leading_eigenvalue;
        results["second_modulus"] = spec.second_modulus;
        results["gap"] = spec.gap;
        results["collapsed"] = spec.collapsed;
        results["iterations"] = spec.iterations;
        if (mode == UlamOperator::Construction::exact_branches)
            pass["leading_eigenvalue_is_one"] = std::fabs(spec.leading_eigenvalue - 1.0) <= 1e-6;
    } else if (cfg.pipeline == "coboundary") {
        auto shrink = estimate_shrinking(sys, int(get(P, "shrink_n_max", 25)),
                                         int(get(P, "fibers", 60)), int(get(P, "pairs", 40)), seed);
        Potential phi;
        phi.f = pick_observable(sys, 1);
        phi.modulus = ModulusClass::holder(1.0);
        CoboundaryResult cob = build_coboundary(sys, phi, shrink, get(P, "target_osc", 1e-3));
        results["N"] = cob.N;
        results["truncation_bound"] = cob.truncation_bound;
        results["fiber_oscillation"] = cob.fiber_oscillation;
        results["hol_constant"] = cob.hol_constant;
        std::vector<std::pair<double, double>> samples;
        for (int i = 0; i < 256; ++i) {
            double y = (i + 0.5) / 256.0;
            samples.push_back({y, cob.phi_check(y)});
        }
        em.emit("phi_check.csv", grid_samples_csv(samples));
        size_t atoms = size_t(get(P, "atoms", 20000));
        LiftOptions lopt;
        lopt.compute_trace = false;
        lopt.n_max = int(get(P, "lift_n", 20));
        auto lifted = lift_measure(sys, stratified_base_cloud(sys.geom, atoms, seed), lopt);
        auto op = build_ulam(sys, 64, UlamOperator::Construction::exact_branches);
        auto spec = invariant_density(op, 1e-12);
        auto en = energy_consistency(sys, phi, cob, lifted.lifted, spec.invariant_density);
        results["mu_phi"] = en.mu_phi;
        results["base_phi_check"] = en.base_phi_check;
        results["total_gap"] = en.total_gap;
        pass["oscillation_bounded"] = cob.fiber_oscillation <= cob.truncation_bound * 1.1;
    } else if (cfg.pipeline == "corr") {
        OrbitSpec orbit;
        orbit.length = long(get(P, "orbit_length", 1000000));
        orbit.burn_in = long(get(P, "burn_in", 1000));
        orbit.seed = seed;
        auto f = pick_observable(sys, int(get(P, "f", 0)));
        auto g = pick_observable(sys, int(get(P, "g", 0)));
        auto tr = correlations_orbit(sys, orbit, f, g, int(get(P, "n_max", 15)));
        std::string csv = "n,corr,se\n";
        for (size_t i = 0; i < tr.values.size(); ++i) {
            csv += format_double(tr.values[i].first) + "," + format_double(tr.values[i].second) +
                   "," + format_double(tr.std_errors[i]) + "\n";
        }
        em.emit("corr.csv", csv);
        if (tr.fit.model == DecayFit::Model::exponential) results["fitted_theta"] = tr.fit.theta;
        if (tr.fit.model == DecayFit::Model::polynomial) results["fitted_degree"] = tr.fit.degree;
        results["mean_f"] = tr.mean_f;
        pass["ran"] = true;
    } else if (cfg.pipeline == "clt") {
        EmpiricalMeasure mu;
        if (sys.dim_fiber > 0) {
            LiftOptions lopt;
            lopt.compute_trace = false;
            lopt.n_max = int(get(P, "lift_n", 15));
            mu = lift_measure(sys, stratified_base_cloud(sys.geom, size_t(get(P, "atoms", 20000)), seed),
                              lopt)
                     .lifted;
        } else {
            mu = stratified_base_cloud(sys.geom, size_t(get(P, "atoms", 20000)), seed);
        }
        auto f = pick_observable(sys, 0);
        auto rep = clt_diagnostic(sys, mu, f, int(get(P, "n_block", 10000)),
                                  int(get(P, "samples", 1000)), seed);
        results["ks_statistic"] = rep.ks_statistic;
        results["green_kubo_sigma"] = rep.green_kubo_sigma;
        results["fitted_sigma"] = rep.fitted_sigma;
        results["degenerate"] = rep.degenerate;
        pass["nondegenerate"] = !rep.degenerate;
    } else if (cfg.pipeline == "attractor") {
        RenderOptions ro;
        ro.image_size = int(get(P, "image_size", 512));
        ro.base_grid = int(get(P, "base_grid", 720));
        ro.fiber_grid = int(get(P, "fiber_grid", 40));
        int n_iter = int(get(P, "n_iter", 8));
        bool nested = true;
        Raster prev;
        for (int k = 0; k <= n_iter; ++k) {
            Raster img = render_attractor(sys, k, ro);
            em.emit("attractor_" + std::to_string(k) + ".pgm", img.to_pgm());
            if (k > 0) nested = nested && img.subset_of(prev.dilate());
            prev = std::move(img);
        }
        if (get(P, "png", 1) != 0) em.emit("attractor.png", prev.to_png());
        results["n_iter"] = n_iter;
        results["lit_pixels"] = prev.lit_count();
        pass["nested"] = nested;
    } else if (cfg.pipeline == "wasserstein") {
        size_t atoms = size_t(get(P, "atoms", 200));
        bool total = get(P, "space", sys.dim_fiber > 0 ? 1 : 0) != 0;
        EmpiricalMeasure a, b;
        if (total) {
            a = random_total_cloud(sys, atoms, seed);
            b = random_total_cloud(sys, atoms, seed + 1);
        } else {
            a = random_base_cloud(sys.geom, atoms, seed);
            b = random_base_cloud(sys.geom, atoms, seed + 1);
        }
        if (get(P, "method", 0) == 0) {
            auto r = wasserstein_discrete(a, b, OtMethod::exact);
            em.emit("plan.csv", r.plan.to_csv());
            results["distance"] = r.distance;
        } else {
            SinkhornOptions so;
            so.epsilon = get(P, "epsilon", 1e-3);
            // the returned plan is rounded to exact feasibility, so a modest
            // marginal-violation stop is enough for reporting purposes
            so.tol = get(P, "tol", 1e-5);
            so.max_iterations = 40000;
            auto r = wasserstein_discrete(a, b, OtMethod::sinkhorn, so);
            em.emit("plan.csv", r.plan.to_csv());
            results["distance"] = r.distance;
            results["epsilon"] = r.sinkhorn.epsilon;
            results["marginal_violation"] = r.sinkhorn.marginal_violation;
        }
        pass["ran"] = true;
    } else {
        throw ConfigError("unknown pipeline: " + cfg.pipeline);
    }
    return results;
}

} // namespace

int main(int argc, char** argv) {
    std::string config_path, out_dir;
    int threads = 1;
    bool verbose = false;
    std::optional<uint64_t> seed_override;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        auto need = [&](const char* what) -> std::string {
            if (i + 1 >= argc) {
                std::cerr << "missing value for " << what << "\n";
                std::exit(1);
            }
            return argv[++i];
        };
        if (arg == "--config") config_path = need("--config");
        else if (arg == "--out") out_dir = need("--out");
        else if (arg == "--threads") threads = std::stoi(need("--threads"));
        else if (arg == "--seed") seed_override = std::stoull(need("--seed"));
        else if (arg == "--verbose") verbose = true;
        else if (arg == "--help" || arg == "-h") {
            std::cout << "usage: fiberlift --config <file> [--out <dir>] [--threads <n>]"
                         " [--seed <u64>] [--verbose]\n";
            return 0;
        } else {
            std::cerr << "unknown flag: " << arg << "\n";
            return 1;
        }
    }
    if (config_path.empty()) {
        std::cerr << "usage: fiberlift --config <file> [--out <dir>] [--threads <n>] [--seed <u64>]\n";
        return 1;
    }
    set_thread_count(threads);

    json envelope;
    envelope["pass"] = json::object();
    Emitter em;
    auto t0 = std::chrono::steady_clock::now();
    int exit_code = 0;
    try {
        Config cfg = parse_config(read_file(config_path));
        validate_keys(cfg);
        if (out_dir.empty()) out_dir = cfg.out_dir;
        if (out_dir.empty()) {
            const char* env = std::getenv("FIBERLIFT_OUT");
            out_dir = env ? env : "fiberlift_out";
        }
        std::filesystem::create_directories(out_dir);
        em.dir = out_dir;

        uint64_t seed = seed_override ? *seed_override : uint64_t(get(cfg.params, "seed", 1));
        envelope["config"] = cfg.raw;
        envelope["config_sha1"] = git_blob_sha1(cfg.raw);
        envelope["system"] = cfg.system_name;
        envelope["pipeline"] = cfg.pipeline;
        envelope["seed"] = seed;

        FiberedSystem sys = make_system(cfg.system_name, cfg.system_params);
        if (verbose) std::cerr << "running " << cfg.pipeline << " on " << sys.name << "\n";
        envelope["results"] = run_pipeline(cfg, sys, seed, em, envelope["pass"]);

        bool all_pass = true;
        for (auto& [k, v] : envelope["pass"].items()) all_pass = all_pass && v.get<bool>();
        envelope["ok"] = all_pass;
        exit_code = all_pass ? 0 : 2;
    } catch (const std::exception& e) {
        envelope["ok"] = false;
        envelope["error"] = e.what();
        std::cerr << "error: " << e.what() << "\n";
        exit_code = 1;
    }
    auto t1 = std::chrono::steady_clock::now();
    envelope["artifacts"] = em.manifest;
    envelope["timings"] = {{"total_seconds", std::chrono::duration<double>(t1 - t0).count()},
                           {"threads", threads}};
    if (!em.dir.empty()) {
        try {
            write_file((em.dir / "envelope.json").string(), envelope.dump(2) + "\n");
        } catch (const std::exception& e) {
            std::cerr << "error writing envelope: " << e.what() << "\n";
            if (exit_code == 0) exit_code = 1;
        }
    }
    if (verbose || exit_code != 0) std::cerr << "exit " << exit_code << "\n";
    return exit_code;
}
