#pragma once

#include <cmath>
#include <string>

#include "cgdyn/core.hpp"
#include "cgdyn/model.hpp"

namespace cgdyn {

/// First and second order quantities of xi at a point.
struct DerivativeBundle {
    Vector grad_xi;
    double laplacian_xi = 0.0;
    double div_grad_over_sq = 0.0;  ///< div(grad xi / |grad xi|^2)
    double grad_norm = 0.0;
};

inline DerivativeBundle derivatives(const ReactionCoordinate& rc, const Configuration& x) {
    DerivativeBundle d;
    d.grad_xi = rc.gradient(x);
    const double g2 = dot(d.grad_xi, d.grad_xi);
    d.grad_norm = std::sqrt(g2);
    if (!(d.grad_norm > 0.0)) {
        throw numeric_error("reaction coordinate '" + rc.name + "' has a vanishing gradient");
    }
    const SymMatrix h = rc.hessian_at(x);
    d.laplacian_xi = h.trace();
    d.div_grad_over_sq = d.laplacian_xi / g2 - 2.0 * h.quadratic_form(d.grad_xi) / (g2 * g2);
    return d;
}

/// F = grad V . grad xi / |grad xi|^2 - beta^{-1} div(grad xi / |grad xi|^2)
inline double local_mean_force(const ModelSpec& model, const ReactionCoordinate& rc,
                               const Configuration& x, double beta) {
    const DerivativeBundle d = derivatives(rc, x);
    const Vector gv = model.gradient(x);
    return dot(gv, d.grad_xi) / (d.grad_norm * d.grad_norm) - d.div_grad_over_sq / beta;
}

/// Ito drift of xi(X_t): -grad V . grad xi + beta^{-1} laplacian xi
inline double drift_integrand(const ModelSpec& model, const ReactionCoordinate& rc,
                              const Configuration& x, double beta) {
    const Vector gv = model.gradient(x);
    const Vector gx = rc.gradient(x);
    return -dot(gv, gx) + rc.hessian_at(x).trace() / beta;
}

/// Increment of the 1D Brownian motion driving xi(X_t): (grad xi/|grad xi|) . dW
inline double project_noise(const ReactionCoordinate& rc, const Configuration& x, const Vector& dW) {
    const Vector g = rc.gradient(x);
    const double n = norm(g);
    if (!(n > 0.0)) {
        throw numeric_error("project_noise: reaction coordinate '" + rc.name + "' has a vanishing gradient");
    }
    return dot(g, dW) / n;
}

}  // namespace cgdyn
