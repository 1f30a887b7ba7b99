#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cgdyn/conditional.hpp"
#include "cgdyn/experiments.hpp"
#include "cgdyn/integrate.hpp"
#include "cgdyn/model.hpp"
#include "cgdyn/run_config.hpp"

namespace cgdyn::cli {

struct Arguments {
    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> workers;
};

struct System {
    ModelSpec model;
    ReactionCoordinate rc;
    Configuration default_x0;
};

/// Instantiates the named model and reaction coordinate, recording parameter defaults.
inline System make_system(RunConfig& cfg, std::optional<double> epsilon_override = {}) {
    const std::string model = cfg.str("", "model"), rc = cfg.str("", "rc");
    if (model == "doublewell") {
        cfg.set_default("", "epsilon", "0.01");
        const double eps = epsilon_override.value_or(cfg.positive("", "epsilon"));
        System s{builtin_doublewell(eps), {}, Configuration{1.0, 0.0}};
        if (rc == "xi1") s.rc = builtin_xi1();
        else if (rc == "xi2") s.rc = builtin_xi2();
        else throw config_error("model 'doublewell' supports rc = xi1 | xi2, got '" + rc + "'");
        return s;
    }
    if (model == "threeatom") {
        cfg.set_default("", "epsilon", "0.001");
        cfg.set_default("", "l0", "1");
        cfg.set_default("", "theta0", "1.187");
        cfg.set_default("", "ktheta", "208");
        const double eps = epsilon_override.value_or(cfg.positive("", "epsilon"));
        const double l0 = cfg.positive("", "l0"), th0 = cfg.positive("", "theta0");
        auto t = builtin_threeatom(eps, l0, th0, cfg.positive("", "ktheta"));
        if (rc != "theta") throw config_error("model 'threeatom' supports rc = theta, got '" + rc + "'");
        return {std::move(t.model), std::move(t.angle), Configuration{l0, l0 * std::cos(th0), l0 * std::sin(th0)}};
    }
    if (model == "omega") {
        cfg.set_default("", "epsilon", "0.001");
        const double eps = epsilon_override.value_or(cfg.positive("", "epsilon"));
        auto t = builtin_omega_testcase(eps);
        if (rc != "x") throw config_error("model 'omega' supports rc = x, got '" + rc + "'");
        return {std::move(t.model), std::move(t.rc), Configuration{1.0, 0.0}};
    }
    throw config_error("unknown model '" + model + "' (doublewell | threeatom | omega)");
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline Configuration parse_x0(const RunConfig& cfg, const std::string& section, const System& sys) {
    if (!cfg.has(section, "x0")) return sys.default_x0;
    const auto v = cfg.list(section, "x0");
    if (v.size() != sys.model.dimension) {
        throw config_error(section + ".x0 must have " + std::to_string(sys.model.dimension) + " entries");
    }
    return Configuration(std::span<const double>(v));
}

inline std::string x0_text(const Configuration& x) {
    std::string s;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + fmt(x[i]);
    return s;
}

struct Context {
    RunConfig cfg;
    std::filesystem::path out_dir;
    unsigned workers = 1;
    std::uint64_t seed = 1;
    double beta = 1.0;
    double dt = 1e-4;
};

inline GridSpec table_grid(RunConfig& cfg) {
    cfg.set_default("table", "z_min", "-2");
    cfg.set_default("table", "z_max", "2");
    cfg.set_default("table", "dz", "0.1");
    GridSpec g{cfg.num("table", "z_min"), cfg.num("table", "z_max"), cfg.positive("table", "dz"), std::nullopt};
    const bool any = cfg.has("table", "refine_min") || cfg.has("table", "refine_max") || cfg.has("table", "refine_dz");
    if (any) {
        g.refine = GridSpec::Refinement{cfg.num("table", "refine_min"), cfg.num("table", "refine_max"),
                                        cfg.positive("table", "refine_dz")};
    }
    return g;
}

inline EngineSpec table_engine(Context& ctx) {
    RunConfig& cfg = ctx.cfg;
    cfg.set_default("table", "engine", "quadrature");
    EngineSpec e;
    const std::string name = cfg.str("table", "engine");
    if (name == "quadrature") {
        e.kind = EngineKind::quadrature;
    } else if (name == "mc") {
        e.kind = EngineKind::monte_carlo;
        cfg.set_default("table", "mc_steps", "1000000");
        cfg.set_default("table", "mc_dt", fmt(ctx.dt));
        e.mc.n_steps = cfg.count("table", "mc_steps");
        e.mc.dt = cfg.positive("table", "mc_dt");
        e.mc.seed = ctx.seed;
    } else {
        throw config_error("table.engine must be quadrature | mc, got '" + name + "'");
    }
    return e;
}

/// Loads table.file when given, otherwise builds the table from the [table] grid.
inline CoefficientTable obtain_table(Context& ctx, const System& sys) {
    if (ctx.cfg.has("table", "file")) {
        std::ifstream in(ctx.cfg.str("table", "file"));
        if (!in) throw config_error("cannot open table file '" + ctx.cfg.str("table", "file") + "'");
        return read_table_csv(in, ctx.beta);
    }
    const GridSpec g = table_grid(ctx.cfg);
    const EngineSpec e = table_engine(ctx);
    return build_coefficient_table(sys.model, sys.rc, ctx.beta, g, e, ctx.workers);
}

inline std::ofstream open_artifact(const Context& ctx, const std::string& name) {
    std::filesystem::create_directories(ctx.out_dir);
    const auto path = ctx.out_dir / name;
    std::ofstream os(path);
    if (!os) throw config_error("cannot write '" + path.string() + "'");
    for (const auto& l : ctx.cfg.header_lines()) os << "# " << l << '\n';
    os << std::setprecision(17);
    return os;
}

// --- commands ---------------------------------------------------------------

inline int cmd_estimate(Context& ctx, const System& sys) {
    ctx.cfg.set_default("estimate-coefficients", "output", "coefficients.csv");
    const CoefficientTable t = obtain_table(ctx, sys);
    const double stat = check_stationarity(t);
    auto os = open_artifact(ctx, ctx.cfg.str("estimate-coefficients", "output"));
    std::ostringstream body;
    write_table_csv(body, t);
    os << body.str();
    std::cout << "coefficient table: " << t.size() << " nodes on [" << t.z_min() << ", " << t.z_max() << "]\n"
              << "  min sigma              " << t.min_sigma() << "\n"
              << "  stationarity residual  " << stat << "\n"
              << "  written to " << (ctx.out_dir / ctx.cfg.str("estimate-coefficients", "output")).string() << "\n";
    return 0;
}

inline int cmd_simulate(Context& ctx, const System& sys) {
    RunConfig& cfg = ctx.cfg;
    cfg.set_default("simulate", "dynamics", "coupled");
    cfg.set_default("simulate", "T", "1");
    cfg.set_default("simulate", "stride", "100");
    cfg.set_default("simulate", "output", "trajectory.csv");
    const Configuration x0 = parse_x0(cfg, "simulate", sys);
    cfg.set_default("simulate", "x0", x0_text(x0));
    const std::string dyn = cfg.str("simulate", "dynamics");
    const double T = cfg.num("simulate", "T");
    if (T < 0.0) throw config_error("simulate.T must be non-negative");
    const std::uint64_t stride = std::max<std::uint64_t>(1, cfg.count("simulate", "stride"));
    const auto n_steps = static_cast<std::uint64_t>(std::llround(T / ctx.dt));
    const double sqdt = std::sqrt(ctx.dt);

    if (dyn == "coupled") {
        const CoefficientTable table = obtain_table(ctx, sys);
        CoupledOptions co;
        co.stride = stride;
        const auto tr = coupled_run(sys.model, sys.rc, table, x0, T, ctx.dt, ctx.beta, ctx.seed, co);
        auto os = open_artifact(ctx, cfg.str("simulate", "output"));
        std::ostringstream body;
        write_coupled_csv(body, tr);
        os << body.str();
        std::cout << "coupled run: " << n_steps << " steps, max |xi(X_t) - y_t| = " << tr.max_deviation()
                  << ", table clamps = " << tr.clamps << "\n";
        return 0;
    }
    if (dyn == "full") {
        auto os = open_artifact(ctx, cfg.str("simulate", "output"));
        os << "t";
        for (std::size_t i = 0; i < x0.size(); ++i) os << ",x" << i + 1;
        os << ",xi\n";
        NoiseStream noise(ctx.seed, streams::kFull);
        FullState s{x0, 0.0, 0};
        auto emit = [&] {
            os << s.t;
            for (double v : s.x) os << ',' << v;
            os << ',' << sys.rc.value(s.x) << '\n';
        };
        emit();
        for (std::uint64_t k = 1; k <= n_steps; ++k) {
            s = em_step_full(sys.model, s, ctx.dt, ctx.beta, noise);
            if (k % stride == 0 || k == n_steps) emit();
        }
        std::cout << "full dynamics: " << n_steps << " steps, final xi = " << sys.rc.value(s.x) << "\n";
        return 0;
    }
    if (dyn == "effective" || dyn == "free_energy") {
        const CoefficientTable table = obtain_table(ctx, sys);
        auto os = open_artifact(ctx, cfg.str("simulate", "output"));
        os << "t,value\n";
        NoiseStream noise(ctx.seed, streams::kReduced);
        ReducedState s{sys.rc.value(x0), 0.0, 0};
        std::uint64_t clamps = 0;
        os << s.t << ',' << s.y << '\n';
        for (std::uint64_t k = 1; k <= n_steps; ++k) {
            const double dB = sqdt * noise.normal();
            s = dyn == "effective"
                    ? em_step_reduced(table, s, ctx.dt, ctx.beta, dB, &clamps)
                    : em_step_freeenergy([&](double z) { return table.interpolate(z).aprime; }, s, ctx.dt, ctx.beta, dB);
            if (k % stride == 0 || k == n_steps) os << s.t << ',' << s.y << '\n';
        }
        std::cout << dyn << " dynamics: " << n_steps << " steps, final y = " << s.y << ", clamps = " << clamps << "\n";
        return 0;
    }
    throw config_error("simulate.dynamics must be coupled | full | effective | free_energy, got '" + dyn + "'");
}

inline DynamicsKind parse_kind(const std::string& s) {
    if (s == "full") return DynamicsKind::full;
    if (s == "effective") return DynamicsKind::effective;
    if (s == "free_energy") return DynamicsKind::free_energy;
    throw config_error("residence.dynamics entries must be full | effective | free_energy, got '" + s + "'");
}

inline int cmd_residence(Context& ctx, const System& sys) {
    RunConfig& cfg = ctx.cfg;
    cfg.set_default("residence", "n", "2000");
    cfg.set_default("residence", "dynamics", "full, effective, free_energy");
    cfg.set_default("residence", "sample_stride", "10000");
    cfg.set_default("residence", "sample_cap", "1000000000");
    cfg.set_default("residence", "step_cap", "100000000");
    cfg.set_default("residence", "output", "residence.csv");
    const double th = cfg.positive("residence", "threshold");
    const std::size_t n = cfg.count("residence", "n");
    std::vector<DynamicsKind> kinds;
    for (const auto& w : cfg.words("residence", "dynamics")) kinds.push_back(parse_kind(w));

    ResidenceOptions ro;
    ro.dt = ctx.dt;
    ro.beta = ctx.beta;
    ro.seed = ctx.seed;
    ro.workers = ctx.workers;
    ro.step_cap = cfg.count("residence", "step_cap");
    WellSamplingOptions so;
    so.dt = ctx.dt;
    so.stride = cfg.count("residence", "sample_stride");
    so.step_cap = cfg.count("residence", "sample_cap");
    so.start = sys.default_x0;

    std::optional<CoefficientTable> table;
    for (auto k : kinds)
        if (k != DynamicsKind::full && !table) table = obtain_table(ctx, sys);

    const auto initials = sample_well_initials(sys.model, sys.rc, th, n, ctx.beta, ctx.seed, so);
    std::vector<double> y0;
    for (const auto& x : initials.configs) y0.push_back(sys.rc.value(x));
    std::vector<ResidenceReport> reports;
    for (auto k : kinds) {
        if (k == DynamicsKind::full) {
            reports.push_back(residence_time_full(sys.model, sys.rc, initials.configs, th, ro));
        } else if (k == DynamicsKind::effective) {
            reports.push_back(residence_time_reduced({&*table, {}}, y0, th, ro));
        } else {
            const CoefficientTable* t = &*table;
            reports.push_back(residence_time_reduced({nullptr, [t](double z) { return t->interpolate(z).aprime; }},
                                                     y0, th, ro));
        }
    }
    auto os = open_artifact(ctx, cfg.str("residence", "output"));
    os << "kind,threshold,n_traj,mean_tau,half_ci,sd_tau,clamps\n";
    std::cout << "residence times (threshold " << th << ", " << n << " trajectories, sampling acceptance "
              << initials.acceptance << ")\n";
    for (const auto& r : reports) {
        os << to_string(r.kind) << ',' << r.threshold << ',' << r.n_traj << ',' << r.mean_tau << ',' << r.half_ci
           << ',' << r.sd_tau << ',' << r.clamps << '\n';
        std::cout << "  " << std::left << std::setw(12) << to_string(r.kind) << std::right << std::fixed
                  << std::setprecision(3) << r.mean_tau << " +/- " << r.half_ci << std::defaultfloat << "\n";
    }
    return 0;
}

inline int cmd_pathwise(Context& ctx, const System& sys) {
    RunConfig& cfg = ctx.cfg;
    cfg.set_default("pathwise", "epsilons", "0.01, 0.001");
    cfg.set_default("pathwise", "T", "10");
    cfg.set_default("pathwise", "replicas", "100");
    cfg.set_default("pathwise", "stride", "1000");
    cfg.set_default("pathwise", "output", "pathwise.csv");
    const Configuration x0 = parse_x0(cfg, "pathwise", sys);
    cfg.set_default("pathwise", "x0", x0_text(x0));
    PathwiseOptions po;
    po.T = cfg.num("pathwise", "T");
    po.dt = ctx.dt;
    po.beta = ctx.beta;
    po.n_replicas = cfg.count("pathwise", "replicas");
    po.seed = ctx.seed;
    po.stride = std::max<std::uint64_t>(1, cfg.count("pathwise", "stride"));
    po.workers = ctx.workers;
    if (po.n_replicas == 0) throw config_error("pathwise.replicas must be positive");
    const auto eps = cfg.list("pathwise", "epsilons");
    const GridSpec g = table_grid(cfg);
    const EngineSpec e = table_engine(ctx);
    RunConfig probe = cfg;
    auto model_for = [&](double epsilon) { return make_system(probe, epsilon).model; };
    auto table_for = [&](const ModelSpec& m) {
        return build_coefficient_table(m, sys.rc, ctx.beta, g, e, ctx.workers);
    };
    const auto reps = pathwise_study(model_for, sys.rc, table_for, eps, x0, po);
    auto os = open_artifact(ctx, cfg.str("pathwise", "output"));
    os << "epsilon,sup_rms,n_replicas,clamps\n";
    std::cout << "pathwise deviation sup_t RMS |xi(X_t) - y_t| over " << po.n_replicas << " replicas, T = " << po.T << "\n";
    for (const auto& r : reps) {
        os << r.epsilon << ',' << r.sup_rms << ',' << r.n_replicas << ',' << r.clamps << '\n';
        std::cout << "  eps = " << r.epsilon << "  sup_rms = " << r.sup_rms << "\n";
    }
    return 0;
}

inline int cmd_marginals(Context& ctx, const System& sys) {
    RunConfig& cfg = ctx.cfg;
    cfg.set_default("marginals", "t", "1");
    cfg.set_default("marginals", "n", "10000");
    cfg.set_default("marginals", "bins", "50");
    cfg.set_default("marginals", "output", "marginals.csv");
    const Configuration x0 = parse_x0(cfg, "marginals", sys);
    cfg.set_default("marginals", "x0", x0_text(x0));
    MarginalOptions mo;
    mo.dt = ctx.dt;
    mo.beta = ctx.beta;
    mo.n_ensemble = cfg.count("marginals", "n");
    mo.bins = cfg.count("marginals", "bins");
    mo.seed = ctx.seed;
    mo.workers = ctx.workers;
    const auto ts = cfg.list("marginals", "t");
    const CoefficientTable table = obtain_table(ctx, sys);
    const std::vector<Configuration> initials{x0};
    const auto rep = marginal_study(sys.model, sys.rc, table, initials, ts, mo);
    auto os = open_artifact(ctx, cfg.str("marginals", "output"));
    os << "t,tv_distance,bin_lo,bin_hi,bins\n";
    std::cout << "time-marginal TV, the L1 norm of histogram differences (" << mo.n_ensemble << " trajectories per ensemble)\n";
    for (std::size_t c = 0; c < ts.size(); ++c) {
        os << ts[c] << ',' << rep.tv_distance[c] << ',' << rep.bin_range[c].first << ',' << rep.bin_range[c].second
           << ',' << rep.bins << '\n';
        std::cout << "  t = " << ts[c] << "  TV = " << rep.tv_distance[c] << "\n";
    }
    return 0;
}

struct CheckLine {
    std::string name;
    double value, threshold;
    bool pass() const { return value < threshold; }
};

/// Invariant suite over the builtin models at the configured epsilon and beta.
inline int cmd_check(Context& ctx) {
    RunConfig& cfg = ctx.cfg;
    cfg.set_default("check", "points", "1000");
    cfg.set_default("check", "output", "check.csv");
    cfg.set_default("", "epsilon", "0.01");
    const int pts = static_cast<int>(cfg.count("check", "points"));
    const double eps = cfg.positive("", "epsilon");
    const double beta = ctx.beta;
    std::vector<CheckLine> lines;

    const auto dw = builtin_doublewell(eps);
    const auto ta = builtin_threeatom(1e-3, 1.0, 1.187, 208.0);
    const auto om = builtin_omega_testcase(eps);
    for (const ModelSpec* m : {&dw, &ta.model, &om.model}) {
        lines.push_back({m->name + " gradient vs finite differences", max_gradient_fd_error(*m, pts, ctx.seed), 1e-5});
        lines.push_back({m->name + " hessian vs finite differences", max_hessian_fd_error(*m, pts, ctx.seed), 1e-4});
    }
    std::vector<double> zs;
    for (int i = 0; i <= 40; ++i) zs.push_back(-2.0 + 0.1 * i);
    lines.push_back({"xi2 orthogonality grad xi2 . grad q", condition_cs1_check(builtin_xi2(), zs).max_abs, 1e-12});
    std::vector<double> thetas;
    for (int i = 0; i <= 20; ++i) thetas.push_back(0.9 + 0.03 * i);
    for (const auto& [name, v] : condition_cs1_check(ta.angle, thetas, true).per_constraint) {
        lines.push_back({"threeatom orthogonality grad theta . grad " + name + " (fd)", v, 1e-5});
    }
    {
        // [H1] for xi2 on the sampling box.
        std::mt19937_64 rng(ctx.seed);
        const auto rc = builtin_xi2();
        double worst = 0.0;
        for (int k = 0; k < pts; ++k) {
            const double g = norm(rc.gradient(sample_in_box(dw, rng)));
            worst = std::max({worst, rc.grad_min - g, g - rc.grad_max});
        }
        lines.push_back({"xi2 gradient bounds violation", std::max(worst, 0.0), 1e-12});
    }
    GridSpec fine{-0.3, 0.3, 0.005, std::nullopt};
    lines.push_back({"xi1 analytic table stationarity", check_stationarity(analytic_xi1_table(fine, beta)), 1e-6});
    lines.push_back({"xi2 quadrature table stationarity",
                     check_stationarity(build_coefficient_table(dw, builtin_xi2(), beta, fine, {}, ctx.workers)), 1e-2});

    auto os = open_artifact(ctx, cfg.str("check", "output"));
    os << "check,value,threshold,pass\n";
    bool all = true;
    for (const auto& l : lines) {
        all = all && l.pass();
        os << '"' << l.name << "\"," << l.value << ',' << l.threshold << ',' << (l.pass() ? "yes" : "no") << '\n';
        std::cout << (l.pass() ? "PASS  " : "FAIL  ") << l.name << "  " << std::setprecision(3) << l.value
                  << " (< " << l.threshold << ")\n";
    }
    return all ? 0 : static_cast<int>(ErrorKind::numeric);
}

}  // namespace detail

/// Executes one command; returns the process exit status. Library errors map to
/// 2 (configuration), 3 (numeric failure) and 4 (insufficient samples).
inline int run(const Arguments& args) {
    try {
        std::ifstream in(args.config_path);
        if (!in) throw config_error("cannot read config file '" + args.config_path + "'");
        detail::Context ctx{RunConfig::parse(in, args.command), {}, 1, 1, 1.0, 1e-4};
        RunConfig& cfg = ctx.cfg;
        if (args.seed) cfg.set("", "seed", std::to_string(*args.seed));
        if (args.out) cfg.set("", "out", *args.out);
        if (args.workers) cfg.set("", "workers", std::to_string(*args.workers));
        cfg.set_default("", "seed", "1");
        cfg.set_default("", "out", ".");
        cfg.set_default("", "dt", "0.0001");
        cfg.set_default("", "workers", "0");
        ctx.seed = cfg.count("", "seed");
        ctx.out_dir = cfg.str("", "out");
        ctx.beta = cfg.positive("", "beta");
        ctx.dt = cfg.positive("", "dt");
        const auto w = cfg.count("", "workers");
        ctx.workers = w == 0 ? default_workers() : static_cast<unsigned>(w);

        if (args.command == "check") return detail::cmd_check(ctx);
        const System sys = make_system(cfg);
        if (args.command == "estimate-coefficients") return detail::cmd_estimate(ctx, sys);
        if (args.command == "simulate") return detail::cmd_simulate(ctx, sys);
        if (args.command == "residence") return detail::cmd_residence(ctx, sys);
        if (args.command == "pathwise") return detail::cmd_pathwise(ctx, sys);
        if (args.command == "marginals") return detail::cmd_marginals(ctx, sys);
        throw config_error("unknown command '" + args.command + "'");
    } catch (const Error& e) {
        const char* cat = e.kind() == ErrorKind::config    ? "config error"
                          : e.kind() == ErrorKind::numeric ? "numeric failure"
                                                           : "insufficient samples";
        std::cerr << "cgdyn: " << cat << ": " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "cgdyn: error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cgdyn::cli
