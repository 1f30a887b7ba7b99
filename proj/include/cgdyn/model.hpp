#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cgdyn/core.hpp"

namespace cgdyn {

using ScalarField = std::function<double(const Configuration&)>;
using VectorField = std::function<Vector(const Configuration&)>;
using MatrixField = std::function<SymMatrix(const Configuration&)>;

/// Step used when a Hessian has to be recovered from a gradient.
inline constexpr double kHessianFdStep = 1e-4;

/// Central-difference gradient of a scalar field.
inline Vector fd_gradient(const ScalarField& f, const Configuration& x, double h) {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        Configuration xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

/// Central-difference Jacobian of a gradient field, symmetrised.
inline SymMatrix fd_hessian(const VectorField& grad, const Configuration& x, double h) {
    const std::size_t n = x.size();
    std::array<Vector, kMaxDim> cols;
    for (std::size_t j = 0; j < n; ++j) {
        Configuration xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vector gp = grad(xp), gm = grad(xm);
        cols[j] = Vector(n);
        for (std::size_t i = 0; i < n; ++i) cols[j][i] = (gp[i] - gm[i]) / (2.0 * h);
    }
    SymMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) m.set(i, j, 0.5 * (cols[j][i] + cols[i][j]));
    return m;
}

/// Potential energy with derivatives. Immutable once built.
struct ModelSpec {
    std::string name;
    std::size_t dimension = 0;
    ScalarField potential;
    VectorField gradient;
    MatrixField hessian;  ///< may be empty: finite differences of the gradient are used
    std::map<std::string, double> params;
    /// Axis-aligned box on which derivative checks sample points.
    std::vector<std::pair<double, double>> sampling_box;

    SymMatrix hessian_at(const Configuration& x) const {
        return hessian ? hessian(x) : fd_hessian(gradient, x, kHessianFdStep);
    }
};

/// A named stiff field q (bond length, manifold constraint) with its gradient.
struct ConstraintField {
    std::string name;
    ScalarField value;
    VectorField gradient;
};

/// Scalar reaction coordinate xi with derivatives and optional level-set chart.
struct ReactionCoordinate {
    std::string name;
    ScalarField value;
    VectorField gradient;
    MatrixField hessian;  ///< may be empty

    /// (z, s) -> point on {xi = z}; 2D models only.
    std::function<Configuration(double, double)> levelset_param;
    /// d/ds of levelset_param; central differences are used when empty.
    std::function<Vector(double, double)> levelset_tangent;
    /// Parameter range scanned when locating the mass of the conditional measure.
    std::pair<double, double> chart_range{-10.0, 10.0};
    /// z -> some point with xi = z (starting point for constrained sampling).
    std::function<Configuration(double)> levelset_point;

    std::vector<ConstraintField> constraints;

    /// Bounds m <= |grad xi| <= M on the model's sampling box.
    double grad_min = 0.0;
    double grad_max = 0.0;

    bool has_chart() const noexcept { return static_cast<bool>(levelset_param); }
    const ConstraintField* constraint_field() const noexcept {
        return constraints.empty() ? nullptr : &constraints.front();
    }

    SymMatrix hessian_at(const Configuration& x) const {
        return hessian ? hessian(x) : fd_hessian(gradient, x, kHessianFdStep);
    }

    Vector tangent_at(double z, double s) const {
        if (levelset_tangent) return levelset_tangent(z, s);
        constexpr double h = 1e-6;
        const Configuration p = levelset_param(z, s + h), m = levelset_param(z, s - h);
        Vector t(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) t[i] = (p[i] - m[i]) / (2.0 * h);
        return t;
    }

    /// A point on {xi = z}, from the chart when no explicit seed point is given.
    Configuration point_on_levelset(double z) const {
        if (levelset_point) return levelset_point(z);
        if (levelset_param) return levelset_param(z, 0.5 * (chart_range.first + chart_range.second));
        throw config_error("reaction coordinate '" + name + "' provides no level-set point");
    }
};

// ---------------------------------------------------------------------------
// Double well  V(x,y) = (x^2-1)^2 + (x^2+y-1)^2 / eps

inline ModelSpec builtin_doublewell(double epsilon) {
    if (!(epsilon > 0.0)) throw config_error("doublewell: epsilon must be positive");
    const double inv = 1.0 / epsilon;
    ModelSpec m;
    m.name = "doublewell";
    m.dimension = 2;
    m.params = {{"epsilon", epsilon}};
    m.sampling_box = {{-2.0, 2.0}, {-2.0, 2.0}};
    m.potential = [inv](const Configuration& p) {
        const double x = p[0], y = p[1];
        const double a = x * x - 1.0, q = x * x + y - 1.0;
        return a * a + inv * q * q;
    };
    m.gradient = [inv](const Configuration& p) {
        const double x = p[0], y = p[1];
        const double q = x * x + y - 1.0;
        return Vector{4.0 * x * (x * x - 1.0) + 4.0 * inv * x * q, 2.0 * inv * q};
    };
    m.hessian = [inv](const Configuration& p) {
        const double x = p[0], y = p[1];
        const double q = x * x + y - 1.0;
        SymMatrix h(2);
        h.set(0, 0, 12.0 * x * x - 4.0 + inv * (8.0 * x * x + 4.0 * q));
        h.set(0, 1, 4.0 * inv * x);
        h.set(1, 1, 2.0 * inv);
        return h;
    };
    return m;
}

namespace detail {

inline ConstraintField doublewell_constraint() {
    return {"q",
            [](const Configuration& p) { return p[0] * p[0] + p[1] - 1.0; },
            [](const Configuration& p) { return Vector{2.0 * p[0], 1.0}; }};
}

}  // namespace detail

/// xi_1(x,y) = x
inline ReactionCoordinate builtin_xi1() {
    ReactionCoordinate rc;
    rc.name = "xi1";
    rc.value = [](const Configuration& p) { return p[0]; };
    rc.gradient = [](const Configuration&) { return Vector{1.0, 0.0}; };
    rc.hessian = [](const Configuration&) { return SymMatrix(2); };
    rc.levelset_param = [](double z, double s) { return Configuration{z, s}; };
    rc.levelset_tangent = [](double, double) { return Vector{0.0, 1.0}; };
    rc.chart_range = {-10.0, 10.0};
    rc.levelset_point = [](double z) { return Configuration{z, 1.0 - z * z}; };
    rc.constraints = {detail::doublewell_constraint()};
    rc.grad_min = 1.0;
    rc.grad_max = 1.0;
    return rc;
}

/// xi_2(x,y) = x exp(-2y); orthogonal to grad q for q = x^2 + y - 1.
inline ReactionCoordinate builtin_xi2() {
    ReactionCoordinate rc;
    rc.name = "xi2";
    rc.value = [](const Configuration& p) { return p[0] * std::exp(-2.0 * p[1]); };
    rc.gradient = [](const Configuration& p) {
        const double e = std::exp(-2.0 * p[1]);
        return Vector{e, -2.0 * p[0] * e};
    };
    rc.hessian = [](const Configuration& p) {
        const double e = std::exp(-2.0 * p[1]);
        SymMatrix h(2);
        h.set(0, 0, 0.0);
        h.set(0, 1, -2.0 * e);
        h.set(1, 1, 4.0 * p[0] * e);
        return h;
    };
    rc.levelset_param = [](double z, double s) { return Configuration{z * std::exp(2.0 * s), s}; };
    rc.levelset_tangent = [](double z, double s) { return Vector{2.0 * z * std::exp(2.0 * s), 1.0}; };
    rc.chart_range = {-10.0, 10.0};
    rc.constraints = {detail::doublewell_constraint()};
    rc.grad_min = std::exp(-4.0);
    rc.grad_max = std::exp(4.0) * std::sqrt(17.0);
    return rc;
}

// ---------------------------------------------------------------------------
// Three-atom molecule. Gauge: r2 = 0, r1 = (a, 0); coordinates (a, r3x, r3y).

struct ThreeAtom {
    ModelSpec model;
    ReactionCoordinate angle;
};

namespace detail {

struct AngleParts {
    double theta;
    double u, v, rho2;    // theta = atan2(v, u), rho2 = u^2 + v^2 = |r3|^2
    double sa, sy;        // sign(a), sign(r3y)
};

inline AngleParts angle_parts(const Configuration& p) {
    const double a = p[0], x3 = p[1], y3 = p[2];
    if (a == 0.0 || (x3 == 0.0 && y3 == 0.0)) {
        throw numeric_error("threeatom: bond angle undefined for a zero-length bond");
    }
    AngleParts r;
    r.sa = a > 0.0 ? 1.0 : -1.0;
    r.sy = y3 >= 0.0 ? 1.0 : -1.0;
    r.u = r.sa * x3;
    r.v = std::abs(y3);
    r.rho2 = x3 * x3 + y3 * y3;
    r.theta = std::atan2(r.v, r.u);
    return r;
}

inline Vector angle_gradient(const AngleParts& g) {
    return Vector{0.0, -g.v / g.rho2 * g.sa, g.u / g.rho2 * g.sy};
}

inline SymMatrix angle_hessian(const AngleParts& g) {
    const double r4 = g.rho2 * g.rho2;
    SymMatrix h(3);
    h.set(1, 1, 2.0 * g.u * g.v / r4);
    h.set(2, 2, -2.0 * g.u * g.v / r4);
    h.set(1, 2, g.sa * g.sy * (g.v * g.v - g.u * g.u) / r4);
    return h;
}

}  // namespace detail

inline ThreeAtom builtin_threeatom(double epsilon, double l0, double theta0, double ktheta) {
    if (!(epsilon > 0.0 && l0 > 0.0 && theta0 > 0.0 && ktheta > 0.0)) {
        throw config_error("threeatom: epsilon, l0, theta0 and ktheta must be positive");
    }
    const double inv = 1.0 / epsilon;
    ThreeAtom out;
    ModelSpec& m = out.model;
    m.name = "threeatom";
    m.dimension = 3;
    m.params = {{"epsilon", epsilon}, {"l0", l0}, {"theta0", theta0}, {"ktheta", ktheta}};
    m.sampling_box = {{0.5, 1.5}, {-1.5, 1.5}, {0.2, 1.5}};
    m.potential = [=](const Configuration& p) {
        const auto g = detail::angle_parts(p);
        const double q1 = std::abs(p[0]) - l0, q3 = std::sqrt(g.rho2) - l0;
        const double d = g.theta - theta0;
        return 0.5 * inv * (q1 * q1 + q3 * q3) + 0.5 * ktheta * d * d;
    };
    m.gradient = [=](const Configuration& p) {
        const auto g = detail::angle_parts(p);
        const double rho = std::sqrt(g.rho2);
        const double q1 = std::abs(p[0]) - l0, q3 = rho - l0;
        const double kd = ktheta * (g.theta - theta0);
        const Vector gt = detail::angle_gradient(g);
        return Vector{inv * q1 * g.sa,
                      inv * q3 * p[1] / rho + kd * gt[1],
                      inv * q3 * p[2] / rho + kd * gt[2]};
    };
    m.hessian = [=](const Configuration& p) {
        const auto g = detail::angle_parts(p);
        const double rho = std::sqrt(g.rho2);
        const double q3 = rho - l0;
        const double kd = ktheta * (g.theta - theta0);
        const Vector gt = detail::angle_gradient(g);
        const SymMatrix ht = detail::angle_hessian(g);
        const double nx = p[1] / rho, ny = p[2] / rho;
        SymMatrix h(3);
        h.set(0, 0, inv);
        // (1/eps)(n n^T + q3 (I - n n^T)/rho) + k (grad theta grad theta^T + d * H theta)
        h.set(1, 1, inv * (nx * nx + q3 * (1.0 - nx * nx) / rho) + ktheta * gt[1] * gt[1] + kd * ht(1, 1));
        h.set(2, 2, inv * (ny * ny + q3 * (1.0 - ny * ny) / rho) + ktheta * gt[2] * gt[2] + kd * ht(2, 2));
        h.set(1, 2, inv * (nx * ny - q3 * nx * ny / rho) + ktheta * gt[1] * gt[2] + kd * ht(1, 2));
        return h;
    };

    ReactionCoordinate& rc = out.angle;
    rc.name = "theta";
    rc.value = [](const Configuration& p) { return detail::angle_parts(p).theta; };
    rc.gradient = [](const Configuration& p) { return detail::angle_gradient(detail::angle_parts(p)); };
    rc.hessian = [](const Configuration& p) { return detail::angle_hessian(detail::angle_parts(p)); };
    rc.levelset_point = [l0](double z) { return Configuration{l0, l0 * std::cos(z), l0 * std::sin(z)}; };
    rc.constraints = {
        {"q1", [l0](const Configuration& p) { return std::abs(p[0]) - l0; },
         [](const Configuration& p) { return Vector{p[0] > 0.0 ? 1.0 : -1.0, 0.0, 0.0}; }},
        {"q3",
         [l0](const Configuration& p) { return std::hypot(p[1], p[2]) - l0; },
         [](const Configuration& p) {
             const double r = std::hypot(p[1], p[2]);
             return Vector{0.0, p[1] / r, p[2] / r};
         }},
    };
    // |grad theta| = 1/|r3|; the sampling box keeps |r3| in [0.2, 1.5*sqrt(2)].
    rc.grad_min = 1.0 / (1.5 * std::sqrt(2.0));
    rc.grad_max = 1.0 / 0.2;
    return out;
}

// ---------------------------------------------------------------------------
// Stiff harmonic valley with position-dependent frequency:
//   V(x,y) = V0(x,y) + Omega(x)^2 y^2 / eps,  V0 = (x^2-1)^2 + (1+x^2) y,  Omega = 2 + sin x.

struct OmegaTestCase {
    ModelSpec model;
    ReactionCoordinate rc;

    /// eps -> 0 drift of the reduced dynamics at xi = alpha.
    static double limit_drift(double alpha, double beta) {
        const double dv0 = 4.0 * alpha * (alpha * alpha - 1.0);
        return -dv0 - std::cos(alpha) / (beta * (2.0 + std::sin(alpha)));
    }
};

inline OmegaTestCase builtin_omega_testcase(double epsilon) {
    if (!(epsilon > 0.0)) throw config_error("omega: epsilon must be positive");
    const double inv = 1.0 / epsilon;
    OmegaTestCase out;
    ModelSpec& m = out.model;
    m.name = "omega";
    m.dimension = 2;
    m.params = {{"epsilon", epsilon}};
    m.sampling_box = {{-2.0, 2.0}, {-2.0, 2.0}};
    m.potential = [inv](const Configuration& p) {
        const double x = p[0], y = p[1];
        const double a = x * x - 1.0, om = 2.0 + std::sin(x);
        return a * a + (1.0 + x * x) * y + inv * om * om * y * y;
    };
    m.gradient = [inv](const Configuration& p) {
        const double x = p[0], y = p[1];
        const double om = 2.0 + std::sin(x), dom = std::cos(x);
        return Vector{4.0 * x * (x * x - 1.0) + 2.0 * x * y + 2.0 * inv * om * dom * y * y,
                      1.0 + x * x + 2.0 * inv * om * om * y};
    };
    m.hessian = [inv](const Configuration& p) {
        const double x = p[0], y = p[1];
        const double om = 2.0 + std::sin(x), dom = std::cos(x), ddom = -std::sin(x);
        SymMatrix h(2);
        h.set(0, 0, 12.0 * x * x - 4.0 + 2.0 * y + 2.0 * inv * (dom * dom + om * ddom) * y * y);
        h.set(0, 1, 2.0 * x + 4.0 * inv * om * dom * y);
        h.set(1, 1, 2.0 * inv * om * om);
        return h;
    };

    ReactionCoordinate& rc = out.rc;
    rc.name = "x";
    rc.value = [](const Configuration& p) { return p[0]; };
    rc.gradient = [](const Configuration&) { return Vector{1.0, 0.0}; };
    rc.hessian = [](const Configuration&) { return SymMatrix(2); };
    rc.levelset_param = [](double z, double s) { return Configuration{z, s}; };
    rc.levelset_tangent = [](double, double) { return Vector{0.0, 1.0}; };
    rc.chart_range = {-5.0, 5.0};
    rc.levelset_point = [](double z) { return Configuration{z, 0.0}; };
    rc.constraints = {{"q",
                       [](const Configuration& p) { return (2.0 + std::sin(p[0])) * p[1]; },
                       [](const Configuration& p) {
                           return Vector{std::cos(p[0]) * p[1], 2.0 + std::sin(p[0])};
                       }}};
    rc.grad_min = 1.0;
    rc.grad_max = 1.0;
    return out;
}

// ---------------------------------------------------------------------------
// Derivative self-checks

/// Uniform random point in the model's sampling box.
template <class Rng>
Configuration sample_in_box(const ModelSpec& m, Rng& rng) {
    Configuration x(m.dimension);
    for (std::size_t i = 0; i < m.dimension; ++i) {
        std::uniform_real_distribution<double> u(m.sampling_box[i].first, m.sampling_box[i].second);
        x[i] = u(rng);
    }
    return x;
}

/// max over samples of |g - g_fd| / max(|g|, 1) for the potential gradient.
inline double max_gradient_fd_error(const ModelSpec& m, int n_points, std::uint64_t seed, double h = 1e-5) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < n_points; ++k) {
        const Configuration x = sample_in_box(m, rng);
        const Vector g = m.gradient(x), gfd = fd_gradient(m.potential, x, h);
        Vector d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gfd[i];
        worst = std::max(worst, norm(d) / std::max(norm(g), 1.0));
    }
    return worst;
}

/// Same check for the analytic Hessian against differences of the gradient.
inline double max_hessian_fd_error(const ModelSpec& m, int n_points, std::uint64_t seed, double h = 1e-5) {
    if (!m.hessian) return 0.0;
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int k = 0; k < n_points; ++k) {
        const Configuration x = sample_in_box(m, rng);
        const SymMatrix a = m.hessian(x), f = fd_hessian(m.gradient, x, h);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < m.dimension; ++i)
            for (std::size_t j = 0; j < m.dimension; ++j) {
                num += (a(i, j) - f(i, j)) * (a(i, j) - f(i, j));
                den += a(i, j) * a(i, j);
            }
        worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1.0));
    }
    return worst;
}

}  // namespace cgdyn
