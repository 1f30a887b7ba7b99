#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cgdyn/conditional.hpp"
#include "cgdyn/integrate.hpp"
#include "cgdyn/model.hpp"
#include "cgdyn/parallel.hpp"
#include "cgdyn/rng.hpp"
#include "cgdyn/stats.hpp"

namespace cgdyn {

inline Error insufficient_samples(const std::string& msg) { return {ErrorKind::insufficient_samples, msg}; }

// ---------------------------------------------------------------------------
// Initial conditions in the right well

struct WellSamplingOptions {
    double dt = 1e-4;
    std::uint64_t stride = 10'000;         ///< steps between retained samples
    std::uint64_t step_cap = 1'000'000'000;
    std::optional<Configuration> start;    ///< default: a point on {xi = 1}
};

struct WellSamples {
    std::vector<Configuration> configs;
    double acceptance = 0.0;  ///< fraction of subsampled points with xi > threshold
    std::uint64_t steps = 0;
};

/// Subsamples one long equilibrium run of the full dynamics every `stride` steps
/// and keeps the points with xi > threshold.
inline WellSamples sample_well_initials(const ModelSpec& model, const ReactionCoordinate& rc, double threshold,
                                       std::size_t n, double beta, std::uint64_t seed,
                                       const WellSamplingOptions& opt = {}) {
    if (!(threshold > 0.0)) throw config_error("sample_well_initials: threshold must be positive");
    NoiseStream noise(seed, streams::kSampling);
    FullState s{opt.start ? *opt.start : rc.point_on_levelset(1.0), 0.0, 0};
    WellSamples out;
    std::uint64_t looked = 0;
    // One stride of burn-in from the arbitrary start.
    for (std::uint64_t k = 0; k < opt.stride; ++k) s = em_step_full(model, s, opt.dt, beta, noise);
    while (out.configs.size() < n) {
        if (s.step >= opt.step_cap) {
            throw insufficient_samples("sample_well_initials: only " + std::to_string(out.configs.size()) + " of " +
                                       std::to_string(n) + " samples after " + std::to_string(s.step) + " steps");
        }
        for (std::uint64_t k = 0; k < opt.stride; ++k) s = em_step_full(model, s, opt.dt, beta, noise);
        ++looked;
        if (rc.value(s.x) > threshold) out.configs.push_back(s.x);
    }
    out.acceptance = static_cast<double>(out.configs.size()) / static_cast<double>(looked);
    out.steps = s.step;
    return out;
}

// ---------------------------------------------------------------------------
// Residence times

enum class DynamicsKind { full, effective, free_energy };

inline std::string to_string(DynamicsKind k) {
    switch (k) {
        case DynamicsKind::full: return "full";
        case DynamicsKind::effective: return "effective";
        case DynamicsKind::free_energy: return "free_energy";
    }
    return "?";
}

struct ResidenceReport {
    std::size_t n_traj = 0;
    double mean_tau = 0.0;
    double sd_tau = 0.0;
    double half_ci = 0.0;
    DynamicsKind kind = DynamicsKind::full;
    double threshold = 0.0;
    std::uint64_t clamps = 0;
    std::vector<double> taus;

    double ci_lo() const { return mean_tau - half_ci; }
    double ci_hi() const { return mean_tau + half_ci; }
    bool overlaps(const ResidenceReport& o) const { return ci_lo() <= o.ci_hi() && o.ci_lo() <= ci_hi(); }
};

struct ResidenceOptions {
    double dt = 1e-4;
    double beta = 3.0;
    std::uint64_t seed = 1;
    std::uint64_t step_cap = 100'000'000;
    unsigned workers = 1;
};

/// What drives a reduced residence run: the tabulated effective dynamics or
/// the free-energy dynamics with a given mean force.
struct ReducedDriver {
    const CoefficientTable* table = nullptr;
    std::function<double(double)> aprime;
};

namespace detail {

inline ResidenceReport finish_report(std::vector<double> taus, DynamicsKind kind, double threshold,
                                     std::uint64_t clamps) {
    const auto ci = stats::mean_ci(taus);
    ResidenceReport r;
    r.n_traj = taus.size();
    r.mean_tau = ci.mean;
    r.sd_tau = ci.sd;
    r.half_ci = ci.half_ci;
    r.kind = kind;
    r.threshold = threshold;
    r.clamps = clamps;
    r.taus = std::move(taus);
    return r;
}

[[noreturn]] inline void censored(std::size_t i, std::uint64_t cap) {
    throw numeric_error("residence study: trajectory " + std::to_string(i) + " did not exit within " +
                        std::to_string(cap) + " steps (censored)");
}

}  // namespace detail

/// First step at which xi(X) < -threshold, started from each configuration.
inline ResidenceReport residence_time_full(const ModelSpec& model, const ReactionCoordinate& rc,
                                           std::span<const Configuration> initials, double threshold,
                                           const ResidenceOptions& opt) {
    std::vector<double> taus(initials.size());
    parallel_for(initials.size(), opt.workers, [&](std::size_t i) {
        NoiseStream noise(opt.seed, streams::kFull + i);
        FullState s{initials[i], 0.0, 0};
        while (!(rc.value(s.x) < -threshold)) {
            if (s.step >= opt.step_cap) detail::censored(i, opt.step_cap);
            s = em_step_full(model, s, opt.dt, opt.beta, noise);
        }
        taus[i] = static_cast<double>(s.step) * opt.dt;
    });
    return detail::finish_report(std::move(taus), DynamicsKind::full, threshold, 0);
}

/// First step at which y <= -threshold for the effective (table) or free-energy dynamics.
inline ResidenceReport residence_time_reduced(const ReducedDriver& driver, std::span<const double> y0,
                                              double threshold, const ResidenceOptions& opt) {
    if (!driver.table && !driver.aprime) throw config_error("residence study: reduced driver has no coefficients");
    const DynamicsKind kind = driver.table ? DynamicsKind::effective : DynamicsKind::free_energy;
    std::vector<double> taus(y0.size());
    std::vector<std::uint64_t> clamps(y0.size(), 0);
    const double sqdt = std::sqrt(opt.dt);
    parallel_for(y0.size(), opt.workers, [&](std::size_t i) {
        NoiseStream noise(opt.seed, streams::kReduced + i);
        ReducedState s{y0[i], 0.0, 0};
        while (!(s.y <= -threshold)) {
            if (s.step >= opt.step_cap) detail::censored(i, opt.step_cap);
            const double dB = sqdt * noise.normal();
            s = driver.table ? em_step_reduced(*driver.table, s, opt.dt, opt.beta, dB, &clamps[i])
                             : em_step_freeenergy(driver.aprime, s, opt.dt, opt.beta, dB);
        }
        taus[i] = static_cast<double>(s.step) * opt.dt;
    });
    std::uint64_t total_clamps = 0;
    for (auto c : clamps) total_clamps += c;
    return detail::finish_report(std::move(taus), kind, threshold, total_clamps);
}

/// Full protocol: sample n right-well configurations, then run the requested dynamics
/// from them (reduced runs start at xi of the same configurations).
inline ResidenceReport residence_time_study(const ModelSpec& model, const ReactionCoordinate& rc,
                                            const ReducedDriver& driver, double threshold, std::size_t n,
                                            DynamicsKind kind, const ResidenceOptions& opt,
                                            const WellSamplingOptions& sampling = {}) {
    WellSamplingOptions so = sampling;
    so.dt = opt.dt;
    const auto initials = sample_well_initials(model, rc, threshold, n, opt.beta, opt.seed, so);
    if (kind == DynamicsKind::full) return residence_time_full(model, rc, initials.configs, threshold, opt);
    std::vector<double> y0;
    for (const auto& x : initials.configs) y0.push_back(rc.value(x));
    ReducedDriver d = driver;
    if (kind == DynamicsKind::free_energy) {
        if (!d.aprime && d.table) {
            const CoefficientTable* t = d.table;
            d.aprime = [t](double z) { return t->interpolate(z).aprime; };
        }
        d.table = nullptr;
    }
    return residence_time_reduced(d, y0, threshold, opt);
}

// ---------------------------------------------------------------------------
// Pathwise comparison under shared noise

struct PathwiseReport {
    double epsilon = 0.0;
    double sup_rms = 0.0;  ///< max over checkpoints of the RMS over replicas of |xi(X_t) - y_t|
    std::size_t n_replicas = 0;
    std::vector<double> t, rms;
    std::vector<double> replica_max;  ///< per-replica max over checkpoints of |xi(X_t) - y_t|
    std::uint64_t clamps = 0;
};

struct PathwiseOptions {
    double T = 10.0;
    double dt = 1e-5;
    double beta = 3.0;
    std::size_t n_replicas = 100;
    std::uint64_t seed = 1;
    std::size_t stride = 1000;
    unsigned workers = 1;
};

/// RMS deviation between xi(X_t) and y_t across replicas sharing x0.
inline PathwiseReport pathwise_replicas(const ModelSpec& model, const ReactionCoordinate& rc,
                                        const CoefficientTable& table, const Configuration& x0,
                                        const PathwiseOptions& opt) {
    std::vector<CoupledTrajectory> runs(opt.n_replicas);
    parallel_for(opt.n_replicas, opt.workers, [&](std::size_t r) {
        CoupledOptions co;
        co.stride = opt.stride;
        co.stream_id = streams::kCoupled + r;
        runs[r] = coupled_run(model, rc, table, x0, opt.T, opt.dt, opt.beta, opt.seed, co);
    });
    PathwiseReport rep;
    rep.n_replicas = opt.n_replicas;
    rep.t = runs.front().t;
    rep.rms.assign(rep.t.size(), 0.0);
    for (const auto& tr : runs) {
        double worst = 0.0;
        for (std::size_t k = 0; k < rep.t.size(); ++k) {
            const double d = tr.xi[k] - tr.y[k];
            rep.rms[k] += d * d;
            worst = std::max(worst, std::abs(d));
        }
        rep.replica_max.push_back(worst);
        rep.clamps += tr.clamps;
    }
    for (double& v : rep.rms) {
        v = std::sqrt(v / static_cast<double>(opt.n_replicas));
        rep.sup_rms = std::max(rep.sup_rms, v);
    }
    return rep;
}

/// Rebuilds model and table for each epsilon and reports the sup-RMS deviation.
inline std::vector<PathwiseReport> pathwise_study(const std::function<ModelSpec(double)>& model_for,
                                                  const ReactionCoordinate& rc,
                                                  const std::function<CoefficientTable(const ModelSpec&)>& table_for,
                                                  std::span<const double> epsilons, const Configuration& x0,
                                                  const PathwiseOptions& opt) {
    std::vector<PathwiseReport> out;
    for (double eps : epsilons) {
        const ModelSpec m = model_for(eps);
        const CoefficientTable t = table_for(m);
        PathwiseReport r = pathwise_replicas(m, rc, t, x0, opt);
        r.epsilon = eps;
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Time marginals

struct MarginalOptions {
    double dt = 1e-4;
    double beta = 3.0;
    std::size_t n_ensemble = 10'000;
    std::size_t bins = 50;
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct MarginalReport {
    std::vector<double> t_checkpoints;
    std::vector<double> tv_distance;
    std::vector<std::pair<double, double>> bin_range;  ///< uniform bins over [first, second]
    std::size_t bins = 0;
};

/// values[c][i]: xi(X) of trajectory i at checkpoint c.
using EnsembleSnapshots = std::vector<std::vector<double>>;

namespace detail {

inline std::vector<std::uint64_t> checkpoint_steps(std::span<const double> ts, double dt) {
    std::vector<std::uint64_t> steps;
    for (double t : ts) {
        if (t < 0.0) throw config_error("marginal study: negative checkpoint time");
        steps.push_back(static_cast<std::uint64_t>(std::llround(t / dt)));
    }
    if (!std::is_sorted(steps.begin(), steps.end())) throw config_error("marginal study: checkpoints must be sorted");
    return steps;
}

}  // namespace detail

/// Full dynamics from initials[i % size]; trajectory i uses stream stream_base + i.
inline EnsembleSnapshots full_ensemble(const ModelSpec& model, const ReactionCoordinate& rc,
                                       std::span<const Configuration> initials, std::span<const double> ts,
                                       const MarginalOptions& opt, std::uint64_t stream_base = streams::kFull) {
    const auto steps = detail::checkpoint_steps(ts, opt.dt);
    EnsembleSnapshots snap(ts.size(), std::vector<double>(opt.n_ensemble));
    parallel_for(opt.n_ensemble, opt.workers, [&](std::size_t i) {
        NoiseStream noise(opt.seed, stream_base + i);
        FullState s{initials[i % initials.size()], 0.0, 0};
        for (std::size_t c = 0; c < steps.size(); ++c) {
            while (s.step < steps[c]) s = em_step_full(model, s, opt.dt, opt.beta, noise);
            snap[c][i] = rc.value(s.x);
        }
    });
    return snap;
}

/// Effective dynamics from y0[i % size]; trajectory i uses stream stream_base + i.
inline EnsembleSnapshots reduced_ensemble(const CoefficientTable& table, std::span<const double> y0,
                                          std::span<const double> ts, const MarginalOptions& opt,
                                          std::uint64_t stream_base = streams::kReduced) {
    const auto steps = detail::checkpoint_steps(ts, opt.dt);
    EnsembleSnapshots snap(ts.size(), std::vector<double>(opt.n_ensemble));
    const double sqdt = std::sqrt(opt.dt);
    parallel_for(opt.n_ensemble, opt.workers, [&](std::size_t i) {
        NoiseStream noise(opt.seed, stream_base + i);
        ReducedState s{y0[i % y0.size()], 0.0, 0};
        for (std::size_t c = 0; c < steps.size(); ++c) {
            while (s.step < steps[c]) s = em_step_reduced(table, s, opt.dt, opt.beta, sqdt * noise.normal());
            snap[c][i] = s.y;
        }
    });
    return snap;
}

inline MarginalReport compare_marginals(std::span<const double> ts, const EnsembleSnapshots& a,
                                        const EnsembleSnapshots& b, std::size_t bins) {
    MarginalReport rep;
    rep.bins = bins;
    rep.t_checkpoints.assign(ts.begin(), ts.end());
    for (std::size_t c = 0; c < ts.size(); ++c) {
        const auto& u = a[c];
        const auto& v = b[c];
        const double lo = std::min(*std::min_element(u.begin(), u.end()), *std::min_element(v.begin(), v.end()));
        const double hi = std::max(*std::max_element(u.begin(), u.end()), *std::max_element(v.begin(), v.end()));
        rep.bin_range.emplace_back(lo, hi);
        rep.tv_distance.push_back(stats::tv_between_samples(u, v, bins));
    }
    return rep;
}

/// Histogram distance between xi(X_t) and y_t ensembles started from the same law.
inline MarginalReport marginal_study(const ModelSpec& model, const ReactionCoordinate& rc,
                                     const CoefficientTable& table, std::span<const Configuration> initials,
                                     std::span<const double> t_checkpoints, const MarginalOptions& opt) {
    if (opt.n_ensemble < 100) throw config_error("marginal study: n_ensemble must be at least 100");
    if (initials.empty()) throw config_error("marginal study: no initial configurations");
    std::vector<double> y0;
    for (const auto& x : initials) y0.push_back(rc.value(x));
    const auto full = full_ensemble(model, rc, initials, t_checkpoints, opt);
    const auto red = reduced_ensemble(table, y0, t_checkpoints, opt);
    return compare_marginals(t_checkpoints, full, red, opt.bins);
}

// ---------------------------------------------------------------------------
// Orthogonality of grad xi and grad q on {q = 0}

struct Cs1Result {
    std::vector<std::pair<std::string, double>> per_constraint;  ///< max |grad xi . grad q_k|
    double max_abs = 0.0;
};

/// For each constraint q_k and each z, starts from a point with xi = z, moves it onto
/// {q_k = 0} by Newton along grad q_k, and evaluates |grad xi . grad q_k| there.
/// With use_fd, both gradients come from central differences (step fd_step).
inline Cs1Result condition_cs1_check(const ReactionCoordinate& rc, std::span<const double> z_samples,
                                     bool use_fd = false, double fd_step = 1e-6) {
    if (rc.constraints.empty()) throw config_error("cs1 check: reaction coordinate has no constraint field");
    Cs1Result res;
    for (const auto& q : rc.constraints) {
        ReactionCoordinate as_rc;
        as_rc.name = q.name;
        as_rc.value = q.value;
        as_rc.gradient = q.gradient;
        double worst = 0.0;
        for (double z : z_samples) {
            const Configuration start = rc.point_on_levelset(z);
            const auto p = project_to_levelset(as_rc, start, q.gradient(start), 0.0);
            if (!p) throw numeric_error("cs1 check: projection onto " + q.name + " = 0 failed at z = " + std::to_string(z));
            const Vector gx = use_fd ? fd_gradient(rc.value, *p, fd_step) : rc.gradient(*p);
            const Vector gq = use_fd ? fd_gradient(q.value, *p, fd_step) : q.gradient(*p);
            worst = std::max(worst, std::abs(dot(gx, gq)));
        }
        res.per_constraint.emplace_back(q.name, worst);
        res.max_abs = std::max(res.max_abs, worst);
    }
    return res;
}

}  // namespace cgdyn
