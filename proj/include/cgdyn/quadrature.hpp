#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

namespace cgdyn::quad {

template <std::size_t N>
using Values = std::array<double, N>;

template <std::size_t N>
struct Result {
    Values<N> value{};
    Values<N> error{};
    std::size_t evaluations = 0;
    bool converged = false;
};

namespace detail {

// 15-point Kronrod abscissae on [0, 1]; odd indices are the embedded 7-point Gauss nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
struct Segment {
    double a, b;
    Values<N> value, error;
    double worst;
    bool operator<(const Segment& o) const { return worst < o.worst; }
};

template <std::size_t N, class F>
Segment<N> kronrod15(F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    Values<N> gauss{}, kron{};
    const Values<N> fc = f(c);
    for (std::size_t k = 0; k < N; ++k) {
        kron[k] = kWgk[7] * fc[k];
        gauss[k] = kWg[3] * fc[k];
    }
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const Values<N> f1 = f(c - dx), f2 = f(c + dx);
        for (std::size_t k = 0; k < N; ++k) {
            const double s = f1[k] + f2[k];
            kron[k] += kWgk[j] * s;
            if (j % 2 == 1) gauss[k] += kWg[j / 2] * s;
        }
    }
    Segment<N> seg{a, b, {}, {}, 0.0};
    for (std::size_t k = 0; k < N; ++k) {
        seg.value[k] = kron[k] * h;
        seg.error[k] = std::abs((kron[k] - gauss[k]) * h);
    }
    return seg;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of a vector-valued integrand.
/// Bisects the segment with the largest scaled error until every component
/// satisfies err_k <= max(abs_tol, rel_tol * |I_k|), or max_segments is reached.
/// `scale[k]` (if nonzero) replaces |I_k| in the relative criterion, which is
/// how ratios of integrals get a tolerance relative to their denominator.
template <std::size_t N, class F>
Result<N> integrate(F&& f, std::span<const double> breakpoints, double rel_tol, double abs_tol,
                    std::size_t max_segments = 2000, const Values<N>& scale = {}) {
    std::priority_queue<detail::Segment<N>> heap;
    Result<N> res;
    auto tolerance = [&](std::size_t k) {
        const double ref = scale[k] != 0.0 ? std::abs(scale[k]) : std::abs(res.value[k]);
        return std::max(abs_tol, rel_tol * ref);
    };
    auto rescore = [&](detail::Segment<N>& s) {
        s.worst = 0.0;
        for (std::size_t k = 0; k < N; ++k) s.worst = std::max(s.worst, s.error[k] / tolerance(k));
    };

    std::vector<detail::Segment<N>> initial;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        initial.push_back(detail::kronrod15<N>(f, breakpoints[i], breakpoints[i + 1]));
        res.evaluations += 15;
        for (std::size_t k = 0; k < N; ++k) {
            res.value[k] += initial.back().value[k];
            res.error[k] += initial.back().error[k];
        }
    }
    for (auto& s : initial) {
        rescore(s);
        heap.push(s);
    }

    while (true) {
        bool ok = true;
        for (std::size_t k = 0; k < N; ++k) ok = ok && res.error[k] <= tolerance(k);
        if (ok) {
            res.converged = true;
            break;
        }
        if (heap.size() >= max_segments) break;
        detail::Segment<N> worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto left = detail::kronrod15<N>(f, worst.a, mid);
        auto right = detail::kronrod15<N>(f, mid, worst.b);
        res.evaluations += 30;
        for (std::size_t k = 0; k < N; ++k) {
            res.value[k] += left.value[k] + right.value[k] - worst.value[k];
            res.error[k] += left.error[k] + right.error[k] - worst.error[k];
        }
        rescore(left);
        rescore(right);
        heap.push(left);
        heap.push(right);
    }
    // Re-sum from the leaves to shed accumulated cancellation error.
    res.value = {};
    res.error = {};
    while (!heap.empty()) {
        const auto& s = heap.top();
        for (std::size_t k = 0; k < N; ++k) {
            res.value[k] += s.value[k];
            res.error[k] += s.error[k];
        }
        heap.pop();
    }
    return res;
}

}  // namespace cgdyn::quad
