#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "vdm/errors.hpp"

namespace vdm {

// Dense row-major 64-bit tensor. Deliberately minimal: the lab only needs
// vectors and matrices, and every op checks finiteness on demand (NaN/Inf is
// an error surface, never a silent state).
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_)) {
            throw DimensionError("data size does not match shape product");
        }
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor vec(std::initializer_list<double> vals) {
        return Tensor({vals.size()}, std::vector<double>(vals));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Matrix accessors (2-D tensors only).
    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : (shape_.empty() ? 0 : shape_[0]); }
    std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : 1; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void require_finite(const char* what) const {
        if (!all_finite()) throw NumericError(std::string("non-finite values in ") + what);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Elementwise helpers used throughout; all check shape compatibility.
inline Tensor operator+(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

inline Tensor operator*(double c, const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

inline double squared_norm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return s;
}

inline double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace vdm
