#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mmss/error.hpp"

namespace mmss {

// Dense row-major tensor of 64-bit floats. Rank is arbitrary in storage but
// every operation in the engine works on rank-2 views; scalars are 1x1 and
// row vectors are 1xd.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims)
        : dims_(std::move(dims)), data_(checked_size(dims_), 0.0) {}

    Tensor(std::vector<std::size_t> dims, std::vector<double> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        if (checked_size(dims_) != data_.size())
            throw_shape("tensor: dims " + dims_string() + " do not match payload of " +
                        std::to_string(data_.size()) + " values");
    }

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.dims_); }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const {
        require_rank2("rows()");
        return dims_[0];
    }
    std::size_t cols() const {
        require_rank2("cols()");
        return dims_[1];
    }

    double& at(std::size_t r, std::size_t c) {
        require_rank2("at()");
        return data_[r * dims_[1] + c];
    }
    double at(std::size_t r, std::size_t c) const {
        require_rank2("at()");
        return data_[r * dims_[1] + c];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double item() const {
        if (size() != 1)
            throw_contract("item(): tensor has " + std::to_string(size()) + " elements, expected 1");
        return data_[0];
    }

    bool same_dims(const Tensor& o) const { return dims_ == o.dims_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    std::string dims_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& dims) {
        std::size_t n = 1;
        for (std::size_t d : dims) {
            if (d == 0) throw_shape("tensor: zero dimension is not allowed");
            n *= d;
        }
        return dims.empty() ? 0 : n;
    }

    void require_rank2(const char* what) const {
        if (dims_.size() != 2)
            throw_shape(std::string("tensor: ") + what + " requires rank 2, got " + dims_string());
    }

    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

}  // namespace mmss
