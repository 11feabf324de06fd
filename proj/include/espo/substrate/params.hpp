// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "espo/errors.hpp"
#include "espo/substrate/tensor.hpp"

namespace espo::nn {

// Named parameter arrays. Names are unique, shapes are fixed at creation,
// and the version counter advances on every mutation so cached evaluations
// can detect staleness.
class ParameterSet {
public:
    void add(const std::string& name, Tensor values);

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const Tensor& at(const std::string& name) const;

    // Mutable access bumps the version; the shape stays frozen.
    Tensor& mutate(const std::string& name);

    const std::vector<std::string>& names() const { return order_; }

    std::uint64_t version() const { return version_; }

    std::size_t total_size() const;

    // Element-wise axpy over every array: this += alpha * other.
    void axpy(double alpha, const ParameterSet& other);

    // Gradient containers and frozen copies share this type.
    static ParameterSet zeros_like(const ParameterSet& ref);

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> arrays_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t version_ = 0;
};

}  // namespace espo::nn
