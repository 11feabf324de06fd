// SPDX-License-Identifier: Apache-2.0
#include "espo/train/optimizer.hpp"

#include <cmath>

namespace espo::train {

AdamW::AdamW(const nn::ParameterSet& params, AdamWConfig cfg)
    : cfg_(cfg),
      m_(nn::ParameterSet::zeros_like(params)),
      v_(nn::ParameterSet::zeros_like(params)) {}

double global_norm(const nn::ParameterSet& grads) {
    double acc = 0.0;
    for (const std::string& name : grads.names()) {
        const nn::Tensor& g = grads.at(name);
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * g[i];
    }
    return std::sqrt(acc);
}

double AdamW::step(nn::ParameterSet& params, const nn::ParameterSet& grads) {
    const double norm = global_norm(grads);
    double scale = 1.0;
    if (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    for (const std::string& name : params.names()) {
        nn::Tensor& p = params.mutate(name);
        nn::Tensor& m = m_.mutate(name);
        nn::Tensor& v = v_.mutate(name);
        const nn::Tensor& g = grads.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] * scale;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i]);
        }
    }
    return norm;
}

nn::ParameterSet AdamW::state_arrays() const {
    nn::ParameterSet out;
    for (const std::string& name : m_.names()) out.add("adam.m." + name, m_.at(name));
    for (const std::string& name : v_.names()) out.add("adam.v." + name, v_.at(name));
    nn::Tensor t({1});
    t[0] = static_cast<double>(t_);
    out.add("adam.t", std::move(t));
    return out;
}

void AdamW::load_state_arrays(const nn::ParameterSet& arrays) {
    const auto copy_into = [](nn::Tensor& dst, const nn::Tensor& src) {
        if (!dst.same_shape(src)) {
            throw InputDomainError("optimizer state: shape mismatch on load");
        }
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i];
    };
    for (const std::string& name : m_.names()) {
        copy_into(m_.mutate(name), arrays.at("adam.m." + name));
    }
    for (const std::string& name : v_.names()) {
        copy_into(v_.mutate(name), arrays.at("adam.v." + name));
    }
    t_ = static_cast<std::uint64_t>(arrays.at("adam.t")[0]);
}

}  // namespace espo::train
