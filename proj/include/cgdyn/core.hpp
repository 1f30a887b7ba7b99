#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>

namespace cgdyn {

/// Largest configuration dimension handled by the fixed-capacity storage.
inline constexpr std::size_t kMaxDim = 8;

/// Failure categories; each maps to a distinct CLI exit status.
enum class ErrorKind { config = 2, numeric = 3, insufficient_samples = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return {ErrorKind::config, msg}; }
inline Error numeric_error(const std::string& msg) { return {ErrorKind::numeric, msg}; }

/// A point in R^n with n <= kMaxDim, stored inline so hot loops never allocate.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::size_t dim) : dim_(dim) {
        if (dim == 0 || dim > kMaxDim) {
            throw config_error("configuration dimension must be in [1, " +
                               std::to_string(kMaxDim) + "], got " + std::to_string(dim));
        }
    }
    Configuration(std::initializer_list<double> values) : Configuration(values.size()) {
        std::copy(values.begin(), values.end(), data_.begin());
    }
    explicit Configuration(std::span<const double> values) : Configuration(values.size()) {
        std::copy(values.begin(), values.end(), data_.begin());
    }

    std::size_t size() const noexcept { return dim_; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double* begin() noexcept { return data_.data(); }
    double* end() noexcept { return data_.data() + dim_; }
    const double* begin() const noexcept { return data_.data(); }
    const double* end() const noexcept { return data_.data() + dim_; }
    std::span<const double> view() const noexcept { return {data_.data(), dim_}; }

    bool all_finite() const noexcept {
        return std::all_of(begin(), end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Configuration& a, const Configuration& b) noexcept {
        return a.dim_ == b.dim_ && std::equal(a.begin(), a.end(), b.begin());
    }

private:
    std::array<double, kMaxDim> data_{};
    std::size_t dim_ = 0;
};

/// Gradients share the storage type of configurations.
using Vector = Configuration;

inline double dot(const Vector& a, const Vector& b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vector& a) noexcept { return std::sqrt(dot(a, a)); }

/// x + alpha * d
inline Vector axpy(const Vector& x, double alpha, const Vector& d) noexcept {
    Vector r = x;
    for (std::size_t i = 0; i < x.size(); ++i) r[i] += alpha * d[i];
    return r;
}

/// Dense symmetric matrix, row-major, dim <= kMaxDim.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim) : dim_(dim) {}

    std::size_t size() const noexcept { return dim_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * kMaxDim + j]; }
    void set(std::size_t i, std::size_t j, double v) noexcept {
        data_[i * kMaxDim + j] = v;
        data_[j * kMaxDim + i] = v;
    }
    double trace() const noexcept {
        double t = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
        return t;
    }
    /// v^T M v
    double quadratic_form(const Vector& v) const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) s += v[i] * (*this)(i, j) * v[j];
        return s;
    }

private:
    std::array<double, kMaxDim * kMaxDim> data_{};
    std::size_t dim_ = 0;
};

}  // namespace cgdyn
