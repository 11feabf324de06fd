// SPDX-License-Identifier: Apache-2.0
#include "espo/substrate/params.hpp"

#include <cmath>

namespace espo::nn {

void ParameterSet::add(const std::string& name, Tensor values) {
    if (index_.count(name)) {
        throw InputDomainError("parameter name already present: " + name);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError("non-finite value in parameter array: " + name);
        }
    }
    index_[name] = order_.size();
    order_.push_back(name);
    arrays_.emplace(name, std::move(values));
    ++version_;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw InputDomainError("unknown parameter array: " + name);
    return it->second;
}

Tensor& ParameterSet::mutate(const std::string& name) {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw InputDomainError("unknown parameter array: " + name);
    ++version_;
    return it->second;
}

std::size_t ParameterSet::total_size() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += at(name).size();
    return n;
}

void ParameterSet::axpy(double alpha, const ParameterSet& other) {
    for (const auto& name : order_) {
        Tensor& dst = mutate(name);
        const Tensor& src = other.at(name);
        if (!dst.same_shape(src)) throw InputDomainError("axpy shape mismatch: " + name);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
    }
}

ParameterSet ParameterSet::zeros_like(const ParameterSet& ref) {
    ParameterSet out;
    for (const auto& name : ref.names()) {
        out.add(name, Tensor::zeros(ref.at(name).shape()));
    }
    return out;
}

}  // namespace espo::nn
