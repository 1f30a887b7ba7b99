#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace cgdyn::stats {

struct MeanCi {
    double mean = 0.0;
    double sd = 0.0;
    double half_ci = 0.0;  ///< 1.96 sd / sqrt(n)
    std::size_t n = 0;
};

inline MeanCi mean_ci(std::span<const double> v) {
    MeanCi r;
    r.n = v.size();
    if (r.n == 0) return r;
    double s = 0.0;
    for (double x : v) s += x;
    r.mean = s / static_cast<double>(r.n);
    if (r.n > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.sd = std::sqrt(ss / static_cast<double>(r.n - 1));
    }
    r.half_ci = 1.96 * r.sd / std::sqrt(static_cast<double>(r.n));
    return r;
}

/// Uniform bins on [lo, hi]; samples outside fall into the end bins.
class Histogram {
public:
    Histogram(double lo, double hi, std::size_t bins) : lo_(lo), hi_(hi), counts_(bins, 0.0) {}

    void add(double x, double w = 1.0) noexcept {
        const double f = (x - lo_) / (hi_ - lo_) * static_cast<double>(counts_.size());
        auto i = static_cast<long>(std::floor(f));
        i = std::clamp<long>(i, 0, static_cast<long>(counts_.size()) - 1);
        counts_[static_cast<std::size_t>(i)] += w;
        total_ += w;
    }
    void add_all(std::span<const double> xs) noexcept {
        for (double x : xs) add(x);
    }

    std::size_t bins() const noexcept { return counts_.size(); }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    double edge(std::size_t i) const noexcept {
        return lo_ + (hi_ - lo_) * static_cast<double>(i) / static_cast<double>(counts_.size());
    }
    const std::vector<double>& counts() const noexcept { return counts_; }

    std::vector<double> probabilities() const {
        std::vector<double> p(counts_.size(), 0.0);
        if (total_ > 0.0)
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = counts_[i] / total_;
        return p;
    }

private:
    double lo_, hi_;
    std::vector<double> counts_;
    double total_ = 0.0;
};

/// sum_i |p_i - q_i|, the L1 distance between two discrete distributions (in [0, 2]).
inline double l1_distance(std::span<const double> p, std::span<const double> q) {
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
    return d;
}

/// L1 distance of the normalised histograms of two samples on 'bins' uniform bins
/// spanning the pooled min/max.
inline double tv_between_samples(std::span<const double> a, std::span<const double> b, std::size_t bins) {
    double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
    double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
    if (!(hi > lo)) hi = lo + 1.0;
    Histogram ha(lo, hi, bins), hb(lo, hi, bins);
    ha.add_all(a);
    hb.add_all(b);
    return l1_distance(ha.probabilities(), hb.probabilities());
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace cgdyn::stats
