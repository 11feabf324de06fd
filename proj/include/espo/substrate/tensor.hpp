// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "espo/errors.hpp"

namespace espo::nn {

// Dense row-major array of doubles. Rank 0 (shape {}) is a scalar with one
// element; rank 1 a vector; rank 2 a matrix.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_)) {
            throw InputDomainError("tensor data size does not match shape");
        }
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Rank-2 accessors.
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double value() const { return data_.empty() ? 0.0 : data_[0]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace espo::nn
