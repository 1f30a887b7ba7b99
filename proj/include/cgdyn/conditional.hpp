#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cgdyn/core.hpp"
#include "cgdyn/geometry.hpp"
#include "cgdyn/model.hpp"
#include "cgdyn/parallel.hpp"
#include "cgdyn/quadrature.hpp"
#include "cgdyn/rng.hpp"

namespace cgdyn {

using Observable = std::function<double(const Configuration&)>;

struct ConditionalEstimate {
    double value = 0.0;
    double std_error = 0.0;  ///< 0 for the quadrature engine
    std::size_t n_samples = 0;
};

// ---------------------------------------------------------------------------
// Quadrature engine: integrate along the level-set chart s -> levelset_param(z, s)
// with weight exp(-beta V) |grad xi|^{-1} |d_s chart|, which is the co-area
// density of the conditional measure in chart coordinates.

struct QuadratureOptions {
    double rel_tol = 1e-11;
    std::size_t scan_points = 8001;
    /// Log-weight drop (in nats) that delimits the integration window.
    double window_drop = 60.0;
    std::size_t max_segments = 4000;
};

template <std::size_t K>
struct QuadratureEstimates {
    std::array<double, K> values{};
    /// log of the unnormalised conditional mass: int exp(-beta V)|grad xi|^{-1} dsigma
    double log_normalization = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {

inline double chart_log_weight(const ModelSpec& model, const ReactionCoordinate& rc, double z, double s,
                               double beta, Configuration& x) {
    x = rc.levelset_param(z, s);
    const double v = model.potential(x);
    const double g = norm(rc.gradient(x));
    const double t = norm(rc.tangent_at(z, s));
    const double lw = -beta * v - std::log(g) + std::log(t);
    return std::isfinite(lw) ? lw : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Conditional expectations of K observables at once. `obs` maps a configuration
/// to std::array<double, K>.
template <std::size_t K, class Obs>
QuadratureEstimates<K> conditional_expectations_quadrature(const ModelSpec& model, const ReactionCoordinate& rc,
                                                           double z, double beta, Obs&& obs,
                                                           const QuadratureOptions& opt = {}) {
    if (!rc.has_chart()) {
        throw config_error("quadrature engine needs a level-set chart; '" + rc.name + "' has none");
    }
    if (!(beta > 0.0)) throw config_error("beta must be positive");

    // Locate the mass of the conditional density on a uniform scan.
    const auto [s_lo, s_hi] = rc.chart_range;
    const std::size_t n = opt.scan_points;
    const double ds = (s_hi - s_lo) / static_cast<double>(n - 1);
    std::vector<double> lw(n);
    Configuration x;
    double peak = -std::numeric_limits<double>::infinity();
    std::size_t ipeak = 0;
    for (std::size_t i = 0; i < n; ++i) {
        lw[i] = detail::chart_log_weight(model, rc, z, s_lo + ds * static_cast<double>(i), beta, x);
        if (lw[i] > peak) {
            peak = lw[i];
            ipeak = i;
        }
    }
    if (!std::isfinite(peak)) {
        throw numeric_error("conditional measure is empty on level set z = " + std::to_string(z));
    }
    std::size_t first = n, last = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (lw[i] > peak - opt.window_drop) {
            first = std::min(first, i);
            last = std::max(last, i);
        }
    }
    first = first > 0 ? first - 1 : 0;
    last = std::min(last + 1, n - 1);
    const double a = s_lo + ds * static_cast<double>(first);
    const double b = s_lo + ds * static_cast<double>(last);
    const double mode = s_lo + ds * static_cast<double>(ipeak);

    // Scales for the error control: mass from the scan, observable magnitude at the mode.
    double mass = 0.0;
    for (std::size_t i = first; i <= last; ++i) mass += std::exp(lw[i] - peak) * ds;
    quad::Values<K + 1> scale{};
    scale[0] = mass;
    {
        const auto o = obs(rc.levelset_param(z, mode));
        for (std::size_t k = 0; k < K; ++k) scale[k + 1] = mass * std::max(std::abs(o[k]), 1e-3);
    }

    auto integrand = [&](double s) {
        quad::Values<K + 1> out{};
        Configuration p;
        const double l = detail::chart_log_weight(model, rc, z, s, beta, p);
        const double w = std::exp(l - peak);
        if (w == 0.0) return out;
        out[0] = w;
        const auto o = obs(p);
        for (std::size_t k = 0; k < K; ++k) out[k + 1] = w * o[k];
        return out;
    };
    std::vector<double> breaks{a};
    if (mode > a && mode < b) breaks.push_back(mode);
    breaks.push_back(b);
    const auto res = quad::integrate<K + 1>(integrand, breaks, opt.rel_tol, 0.0, opt.max_segments, scale);
    if (!(res.value[0] > 1e-300)) {
        throw numeric_error("conditional normalisation vanishes on level set z = " + std::to_string(z));
    }

    QuadratureEstimates<K> est;
    for (std::size_t k = 0; k < K; ++k) est.values[k] = res.value[k + 1] / res.value[0];
    est.log_normalization = std::log(res.value[0]) + peak;
    est.evaluations = res.evaluations + n;
    return est;
}

inline ConditionalEstimate conditional_expectation_quadrature(const ModelSpec& model, const ReactionCoordinate& rc,
                                                              const Observable& observable, double z, double beta,
                                                              const QuadratureOptions& opt = {}) {
    const auto e = conditional_expectations_quadrature<1>(
        model, rc, z, beta, [&](const Configuration& x) { return std::array<double, 1>{observable(x)}; }, opt);
    return {e.values[0], 0.0, e.evaluations};
}

// ---------------------------------------------------------------------------
// Constrained-sampling engine. Each step is an unconstrained Euler-Maruyama
// proposal followed by a projection back onto {xi = z} along grad xi at the
// current point (one scalar Newton solve for the multiplier). The chain samples
// exp(-beta V) dsigma on the level set; time averages are reweighted by
// |grad xi|^{-1} to target the co-area conditional measure.

struct McOptions {
    std::size_t n_steps = 1'000'000;
    double dt = 1e-4;
    std::uint64_t seed = 1;
    std::uint64_t stream_id = 0;
    std::size_t burn_in = 0;  ///< 0 means n_steps / 10
    std::optional<Configuration> start;
};

template <std::size_t K>
struct McEstimates {
    std::array<ConditionalEstimate, K> values{};
    std::size_t rejected_projections = 0;
    double final_dt = 0.0;
};

/// Solves xi(x + lambda d) = z for lambda by Newton; nullopt when it does not converge.
inline std::optional<Configuration> project_to_levelset(const ReactionCoordinate& rc, const Configuration& x,
                                                        const Vector& d, double z, int max_iter = 50) {
    const double tol = 1e-12 * std::max(1.0, std::abs(z));
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const Configuration p = axpy(x, lambda, d);
        const double f = rc.value(p) - z;
        if (!std::isfinite(f)) return std::nullopt;
        if (std::abs(f) <= tol) return p;
        const double fp = dot(rc.gradient(p), d);
        if (!(std::abs(fp) > 0.0)) return std::nullopt;
        lambda -= f / fp;
    }
    return std::nullopt;
}

template <std::size_t K, class Obs>
McEstimates<K> conditional_expectations_mc(const ModelSpec& model, const ReactionCoordinate& rc, double z,
                                           double beta, Obs&& obs, const McOptions& opt) {
    if (!(beta > 0.0 && opt.dt > 0.0)) throw config_error("constrained sampling needs beta > 0 and dt > 0");
    if (opt.n_steps < 100) throw config_error("constrained sampling needs at least 100 steps");

    Configuration x = opt.start ? *opt.start : rc.point_on_levelset(z);
    {
        auto p = project_to_levelset(rc, x, rc.gradient(x), z);
        if (!p) throw numeric_error("cannot place the starting point on level set z = " + std::to_string(z));
        x = *p;
    }

    NoiseStream noise(opt.seed, opt.stream_id);
    double dt = opt.dt;
    bool halved = false;
    McEstimates<K> out;
    const std::size_t n = x.size();
    const std::size_t burn = opt.burn_in ? opt.burn_in : opt.n_steps / 10;
    const std::size_t blocks = 100, block_len = opt.n_steps / blocks;
    std::array<double, K> tot_wo{};
    double tot_w = 0.0;
    std::array<std::vector<double>, K> block_ratio;
    std::array<double, K> blk_wo{};
    double blk_w = 0.0;

    auto step = [&]() {
        while (true) {
            const Vector gv = model.gradient(x);
            const double amp = std::sqrt(2.0 * dt / beta);
            Configuration prop(n);
            for (std::size_t i = 0; i < n; ++i) prop[i] = x[i] - dt * gv[i] + amp * noise.normal();
            if (auto p = project_to_levelset(rc, prop, rc.gradient(x), z)) {
                x = *p;
                return;
            }
            ++out.rejected_projections;
            if (halved) {
                throw numeric_error("constrained projection failed twice on level set z = " + std::to_string(z));
            }
            halved = true;
            dt *= 0.5;
        }
    };

    for (std::size_t i = 0; i < burn; ++i) step();
    const std::size_t total = block_len * blocks;
    for (std::size_t i = 0; i < total; ++i) {
        step();
        const double w = 1.0 / norm(rc.gradient(x));
        const auto o = obs(x);
        for (std::size_t k = 0; k < K; ++k) blk_wo[k] += w * o[k];
        blk_w += w;
        if ((i + 1) % block_len == 0) {
            for (std::size_t k = 0; k < K; ++k) {
                block_ratio[k].push_back(blk_wo[k] / blk_w);
                tot_wo[k] += blk_wo[k];
                blk_wo[k] = 0.0;
            }
            tot_w += blk_w;
            blk_w = 0.0;
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        const double mean = tot_wo[k] / tot_w;
        double ss = 0.0;
        for (double r : block_ratio[k]) ss += (r - mean) * (r - mean);
        const double sd = std::sqrt(ss / static_cast<double>(blocks - 1));
        out.values[k] = {mean, sd / std::sqrt(static_cast<double>(blocks)), total};
    }
    out.final_dt = dt;
    return out;
}

inline ConditionalEstimate conditional_expectation_mc(const ModelSpec& model, const ReactionCoordinate& rc,
                                                      const Observable& observable, double z, double beta,
                                                      const McOptions& opt) {
    return conditional_expectations_mc<1>(
               model, rc, z, beta, [&](const Configuration& x) { return std::array<double, 1>{observable(x)}; },
               opt)
        .values[0];
}

// ---------------------------------------------------------------------------
// Coefficient table

/// Tabulated drift b, diffusion sigma and mean force A' of the effective dynamics.
/// A(z) is rebuilt by trapezoidal integration of A' with A(z_min) = 0.
class CoefficientTable {
public:
    struct Sample {
        double b, sigma, aprime;
        bool clamped;
    };

    CoefficientTable() = default;
    CoefficientTable(std::vector<double> z, std::vector<double> b, std::vector<double> sigma,
                     std::vector<double> aprime, double beta)
        : z_(std::move(z)), b_(std::move(b)), sigma_(std::move(sigma)), aprime_(std::move(aprime)), beta_(beta) {
        const std::size_t n = z_.size();
        if (n < 2 || b_.size() != n || sigma_.size() != n || aprime_.size() != n) {
            throw config_error("coefficient table: need >= 2 nodes and equal-length columns");
        }
        if (!(beta_ > 0.0)) throw config_error("coefficient table: beta must be positive");
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0 && !(z_[i] > z_[i - 1])) throw config_error("coefficient table: grid not strictly increasing");
            if (!(sigma_[i] > 0.0)) throw config_error("coefficient table: sigma must be positive");
            if (!std::isfinite(b_[i]) || !std::isfinite(sigma_[i]) || !std::isfinite(aprime_[i])) {
                throw numeric_error("coefficient table: non-finite entry at z = " + std::to_string(z_[i]));
            }
        }
        a_.assign(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) a_[i] = a_[i - 1] + 0.5 * (aprime_[i] + aprime_[i - 1]) * (z_[i] - z_[i - 1]);
    }

    std::size_t size() const noexcept { return z_.size(); }
    double beta() const noexcept { return beta_; }
    const std::vector<double>& z() const noexcept { return z_; }
    const std::vector<double>& b() const noexcept { return b_; }
    const std::vector<double>& sigma() const noexcept { return sigma_; }
    const std::vector<double>& aprime() const noexcept { return aprime_; }
    const std::vector<double>& free_energy() const noexcept { return a_; }
    double z_min() const noexcept { return z_.front(); }
    double z_max() const noexcept { return z_.back(); }

    /// Piecewise-linear values; outside the grid the boundary node is returned with clamped = true.
    Sample interpolate(double z) const noexcept {
        if (!(z > z_.front())) return node(0, z < z_.front());
        if (!(z < z_.back())) return node(z_.size() - 1, z > z_.back());
        const auto it = std::upper_bound(z_.begin(), z_.end(), z);
        const std::size_t i = static_cast<std::size_t>(it - z_.begin()) - 1;
        const double t = (z - z_[i]) / (z_[i + 1] - z_[i]);
        return {b_[i] + t * (b_[i + 1] - b_[i]), sigma_[i] + t * (sigma_[i + 1] - sigma_[i]),
                aprime_[i] + t * (aprime_[i + 1] - aprime_[i]), false};
    }

    /// Linear interpolation of the reconstructed free energy, clamped at the ends.
    double free_energy_at(double z) const noexcept {
        if (!(z > z_.front())) return a_.front();
        if (!(z < z_.back())) return a_.back();
        const auto it = std::upper_bound(z_.begin(), z_.end(), z);
        const std::size_t i = static_cast<std::size_t>(it - z_.begin()) - 1;
        const double t = (z - z_[i]) / (z_[i + 1] - z_[i]);
        return a_[i] + t * (a_[i + 1] - a_[i]);
    }

    double min_sigma() const { return *std::min_element(sigma_.begin(), sigma_.end()); }

    /// Same table with sigma scaled; used to exercise the stationarity check.
    CoefficientTable with_sigma_scaled(double factor) const {
        std::vector<double> s = sigma_;
        for (double& v : s) v *= factor;
        return {z_, b_, std::move(s), aprime_, beta_};
    }

private:
    Sample node(std::size_t i, bool clamped) const noexcept { return {b_[i], sigma_[i], aprime_[i], clamped}; }

    std::vector<double> z_, b_, sigma_, aprime_, a_;
    double beta_ = 1.0;
};

/// Uniform coarse grid with an optional finer sub-range.
struct GridSpec {
    double z_min = -2.0, z_max = 2.0, dz = 0.1;
    struct Refinement {
        double lo, hi, dz;
    };
    std::optional<Refinement> refine;

    std::vector<double> nodes() const {
        if (!(z_max > z_min && dz > 0.0)) throw config_error("grid: need z_max > z_min and dz > 0");
        std::vector<double> out;
        const auto count = static_cast<long>(std::floor((z_max - z_min) / dz + 1e-9));
        for (long i = 0; i <= count; ++i) out.push_back(z_min + dz * static_cast<double>(i));
        if (out.back() < z_max - 1e-9 * dz) out.push_back(z_max);
        if (refine) {
            const auto& r = *refine;
            if (!(r.hi > r.lo && r.dz > 0.0 && r.lo >= z_min && r.hi <= z_max)) {
                throw config_error("grid: refinement must be a non-empty sub-range with positive step");
            }
            std::erase_if(out, [&](double z) { return z > r.lo && z < r.hi; });
            const auto rc = static_cast<long>(std::floor((r.hi - r.lo) / r.dz + 1e-9));
            for (long i = 0; i <= rc; ++i) out.push_back(r.lo + r.dz * static_cast<double>(i));
            out.push_back(r.hi);
        }
        std::sort(out.begin(), out.end());
        std::vector<double> uniq;
        for (double z : out)
            if (uniq.empty() || z - uniq.back() > 1e-9 * std::min(dz, refine ? refine->dz : dz)) uniq.push_back(z);
        return uniq;
    }
};

enum class EngineKind { quadrature, monte_carlo };

struct EngineSpec {
    EngineKind kind = EngineKind::quadrature;
    QuadratureOptions quadrature;
    McOptions mc;
};

/// b-integrand, |grad xi|^2 and F at one point.
inline std::array<double, 3> coefficient_integrands(const ModelSpec& model, const ReactionCoordinate& rc,
                                                    const Configuration& x, double beta) {
    const DerivativeBundle d = derivatives(rc, x);
    const Vector gv = model.gradient(x);
    const double gvx = dot(gv, d.grad_xi);
    const double g2 = d.grad_norm * d.grad_norm;
    return {-gvx + d.laplacian_xi / beta, g2, gvx / g2 - d.div_grad_over_sq / beta};
}

/// Per-node estimates kept alongside the table (standard errors are 0 for quadrature).
struct TableDiagnostics {
    std::vector<double> b_err, sigma2_err, aprime_err;
    std::vector<double> log_normalization;  ///< quadrature only
};

inline CoefficientTable build_coefficient_table(const ModelSpec& model, const ReactionCoordinate& rc, double beta,
                                                const GridSpec& grid, const EngineSpec& engine,
                                                unsigned workers = 1, TableDiagnostics* diag = nullptr) {
    const std::vector<double> zs = grid.nodes();
    const std::size_t n = zs.size();
    std::vector<double> b(n), s2(n), ap(n), eb(n), es(n), ea(n), lz(n);
    auto obs = [&](const Configuration& x) { return coefficient_integrands(model, rc, x, beta); };
    parallel_for(n, workers, [&](std::size_t i) {
        if (engine.kind == EngineKind::quadrature) {
            const auto e = conditional_expectations_quadrature<3>(model, rc, zs[i], beta, obs, engine.quadrature);
            b[i] = e.values[0];
            s2[i] = e.values[1];
            ap[i] = e.values[2];
            lz[i] = e.log_normalization;
        } else {
            McOptions o = engine.mc;
            o.stream_id = streams::kConstrained + i;
            const auto e = conditional_expectations_mc<3>(model, rc, zs[i], beta, obs, o);
            b[i] = e.values[0].value;
            s2[i] = e.values[1].value;
            ap[i] = e.values[2].value;
            eb[i] = e.values[0].std_error;
            es[i] = e.values[1].std_error;
            ea[i] = e.values[2].std_error;
        }
    });
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i) sigma[i] = std::sqrt(s2[i]);
    if (diag) *diag = {std::move(eb), std::move(es), std::move(ea), std::move(lz)};
    return {zs, std::move(b), std::move(sigma), std::move(ap), beta};
}

/// Table of the exactly known xi_1 coefficients for the double well: b = -A_1', sigma = 1.
inline CoefficientTable analytic_xi1_table(const GridSpec& grid, double beta) {
    const auto zs = grid.nodes();
    std::vector<double> b, s, ap;
    for (double z : zs) {
        ap.push_back(4.0 * z * (z * z - 1.0));
        b.push_back(-ap.back());
        s.push_back(1.0);
    }
    return {zs, std::move(b), std::move(s), std::move(ap), beta};
}

/// Max over interior nodes of |beta^{-1} d/dz(sigma^2 e^{-beta A}) - b e^{-beta A}|,
/// relative to max |b e^{-beta A}|. The derivative is expanded by the product rule:
/// e^{-beta A}(beta^{-1} (sigma^2)' - sigma^2 A'), with (sigma^2)' from three-point
/// central differences on the (possibly non-uniform) grid and A' taken from the table.
/// Only nodes inside [lo, hi] enter, when given.
inline double check_stationarity(const CoefficientTable& t, std::optional<std::pair<double, double>> range = {}) {
    const auto& z = t.z();
    const auto& a = t.free_energy();
    const double beta = t.beta();
    auto inside = [&](std::size_t i) { return !range || (z[i] >= range->first && z[i] <= range->second); };
    double a_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < z.size(); ++i)
        if (inside(i)) a_min = std::min(a_min, a[i]);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 1; i + 1 < z.size(); ++i) {
        if (!inside(i)) continue;
        const double hm = z[i] - z[i - 1], hp = z[i + 1] - z[i];
        const double sm = t.sigma()[i - 1] * t.sigma()[i - 1];
        const double s0 = t.sigma()[i] * t.sigma()[i];
        const double sp = t.sigma()[i + 1] * t.sigma()[i + 1];
        const double ds2 = (hm * hm * sp - hp * hp * sm + (hp * hp - hm * hm) * s0) / (hm * hp * (hm + hp));
        const double w = std::exp(-beta * (a[i] - a_min));
        const double lhs = w * (ds2 / beta - s0 * t.aprime()[i]);
        const double rhs = w * t.b()[i];
        worst = std::max(worst, std::abs(lhs - rhs));
        scale = std::max(scale, std::abs(rhs));
    }
    return scale > 0.0 ? worst / scale : worst;
}

// ---------------------------------------------------------------------------
// CSV: header `z,b,sigma,aprime`, 17 significant digits, optional `#` comment lines.

inline void write_table_csv(std::ostream& os, const CoefficientTable& t, const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << '\n';
    os << "# beta = " << std::setprecision(17) << t.beta() << '\n';
    os << "z,b,sigma,aprime\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << t.z()[i] << ',' << t.b()[i] << ',' << t.sigma()[i] << ',' << t.aprime()[i] << '\n';
    }
}

/// Reads a table; beta comes from a `# beta = ...` comment when present, else `beta_fallback`.
inline CoefficientTable read_table_csv(std::istream& is, std::optional<double> beta_fallback = {}) {
    std::string line;
    std::optional<double> beta;
    bool header = false;
    std::vector<double> z, b, s, a;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("beta =");
            if (pos != std::string::npos && line.find_first_not_of("# ") == pos) beta = std::stod(line.substr(pos + 6));
            continue;
        }
        if (!header) {
            if (line != "z,b,sigma,aprime") throw config_error("table: expected header 'z,b,sigma,aprime'");
            header = true;
            continue;
        }
        std::array<double, 4> v{};
        std::istringstream ls(line);
        std::string cell;
        for (int k = 0; k < 4; ++k) {
            if (!std::getline(ls, cell, ',')) throw config_error("table: short row '" + line + "'");
            v[k] = std::stod(cell);
        }
        z.push_back(v[0]);
        b.push_back(v[1]);
        s.push_back(v[2]);
        a.push_back(v[3]);
    }
    if (!beta) beta = beta_fallback;
    if (!beta) throw config_error("table: beta neither in the file nor supplied");
    return {std::move(z), std::move(b), std::move(s), std::move(a), *beta};
}

}  // namespace cgdyn
