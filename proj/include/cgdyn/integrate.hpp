#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cgdyn/conditional.hpp"
#include "cgdyn/core.hpp"
#include "cgdyn/geometry.hpp"
#include "cgdyn/model.hpp"
#include "cgdyn/rng.hpp"

namespace cgdyn {

/// |coordinate| beyond which a trajectory is declared divergent.
inline constexpr double kDivergenceBound = 1e6;

struct FullState {
    Configuration x;
    double t = 0.0;
    std::uint64_t step = 0;
};

struct ReducedState {
    double y = 0.0;
    double t = 0.0;
    std::uint64_t step = 0;
};

namespace detail {

[[noreturn]] inline void diverged(std::uint64_t step, const std::string& what) {
    throw numeric_error(what + " diverged at step " + std::to_string(step) +
                        " (non-finite or |value| > 1e6); reduce dt");
}

}  // namespace detail

/// One Euler-Maruyama step of dX = -grad V dt + sqrt(2 dt / beta) G with given standard normals G.
inline FullState em_step_full(const ModelSpec& model, const FullState& s, double dt, double beta,
                              const Vector& gaussians) {
    const Vector g = model.gradient(s.x);
    const double amp = std::sqrt(2.0 * dt / beta);
    FullState out{s.x, s.t + dt, s.step + 1};
    for (std::size_t i = 0; i < out.x.size(); ++i) {
        out.x[i] += -dt * g[i] + amp * gaussians[i];
        if (!(std::abs(out.x[i]) <= kDivergenceBound)) detail::diverged(out.step, "full dynamics");
    }
    return out;
}

inline FullState em_step_full(const ModelSpec& model, const FullState& s, double dt, double beta, NoiseStream& noise) {
    Vector g(s.x.size());
    for (double& v : g) v = noise.normal();
    return em_step_full(model, s, dt, beta, g);
}

/// y' = y + b(y) dt + sqrt(2/beta) sigma(y) dB, with dB ~ N(0, dt) supplied by the caller.
/// `clamps` counts evaluations outside the tabulated range.
inline ReducedState em_step_reduced(const CoefficientTable& table, const ReducedState& s, double dt, double beta,
                                    double dB, std::uint64_t* clamps = nullptr) {
    const auto c = table.interpolate(s.y);
    if (c.clamped && clamps) ++*clamps;
    ReducedState out{s.y + c.b * dt + std::sqrt(2.0 / beta) * c.sigma * dB, s.t + dt, s.step + 1};
    if (!(std::abs(out.y) <= kDivergenceBound)) detail::diverged(out.step, "effective dynamics");
    return out;
}

/// y' = y - A'(y) dt + sqrt(2/beta) dB
template <class MeanForce>
ReducedState em_step_freeenergy(MeanForce&& aprime, const ReducedState& s, double dt, double beta, double dB) {
    ReducedState out{s.y - aprime(s.y) * dt + std::sqrt(2.0 / beta) * dB, s.t + dt, s.step + 1};
    if (!(std::abs(out.y) <= kDivergenceBound)) detail::diverged(out.step, "free-energy dynamics");
    return out;
}

/// Mean force of the double well along xi_1, A_1'(z) = 4 z (z^2 - 1).
inline double xi1_mean_force(double z) noexcept { return 4.0 * z * (z * z - 1.0); }

struct CoupledTrajectory {
    std::vector<double> t, xi, y;
    std::vector<Configuration> x;  ///< full states, when requested
    std::uint64_t clamps = 0;

    double max_deviation() const {
        double m = 0.0;
        for (std::size_t i = 0; i < xi.size(); ++i) m = std::max(m, std::abs(xi[i] - y[i]));
        return m;
    }
};

struct CoupledOptions {
    std::size_t stride = 100;
    std::uint64_t stream_id = streams::kCoupled;
    bool keep_full_state = false;
};

/// Full and effective dynamics driven by one noise realisation: the reduced
/// increment is the projection of the full increment on grad xi / |grad xi|.
/// Records (t, xi(X_t), y_t) every `stride` steps, including t = 0 and the final time.
inline CoupledTrajectory coupled_run(const ModelSpec& model, const ReactionCoordinate& rc,
                                     const CoefficientTable& table, const Configuration& x0, double T, double dt,
                                     double beta, std::uint64_t seed, const CoupledOptions& opt = {}) {
    if (!(dt > 0.0 && beta > 0.0 && T >= 0.0)) throw config_error("coupled_run: need dt > 0, beta > 0, T >= 0");
    const auto n_steps = static_cast<std::uint64_t>(std::llround(T / dt));
    const std::size_t stride = std::max<std::size_t>(opt.stride, 1);
    NoiseStream noise(seed, opt.stream_id);
    FullState full{x0, 0.0, 0};
    ReducedState red{rc.value(x0), 0.0, 0};
    CoupledTrajectory tr;
    auto record = [&] {
        tr.t.push_back(full.t);
        tr.xi.push_back(rc.value(full.x));
        tr.y.push_back(red.y);
        if (opt.keep_full_state) tr.x.push_back(full.x);
    };
    record();
    const double sqdt = std::sqrt(dt);
    const std::size_t n = x0.size();
    Vector gauss(n), dW(n);
    for (std::uint64_t k = 1; k <= n_steps; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            gauss[i] = noise.normal();
            dW[i] = sqdt * gauss[i];
        }
        const double dB = project_noise(rc, full.x, dW);
        full = em_step_full(model, full, dt, beta, gauss);
        red = em_step_reduced(table, red, dt, beta, dB, &tr.clamps);
        if (k % stride == 0 || k == n_steps) record();
    }
    return tr;
}

/// Gnuplot-friendly trajectory output: `t,xi,y`.
inline void write_coupled_csv(std::ostream& os, const CoupledTrajectory& tr, const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << '\n';
    os << "t,xi,y\n" << std::setprecision(17);
    for (std::size_t i = 0; i < tr.t.size(); ++i) os << tr.t[i] << ',' << tr.xi[i] << ',' << tr.y[i] << '\n';
}

}  // namespace cgdyn
