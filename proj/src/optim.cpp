#include "malgraph/optim.hpp"

#include <cmath>

namespace malgraph {

void ParamSet::add(const std::string& name, Tensor value, bool trainable) {
    if (map_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
    ParamEntry entry;
    entry.value = std::move(value);
    entry.trainable = trainable;
    map_.emplace(name, std::move(entry));
    order_.push_back(name);
}

ParamEntry& ParamSet::at(const std::string& name) {
    const auto it = map_.find(name);
    if (it == map_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
}

const ParamEntry& ParamSet::at(const std::string& name) const {
    const auto it = map_.find(name);
    if (it == map_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
}

void ParamSet::reset_optimizer_state() {
    for (auto& [name, entry] : map_) {
        entry.moment1 = Tensor{};
        entry.moment2 = Tensor{};
    }
    step_ = 0;
}

void ParamSet::replace(const std::string& name, Tensor value) {
    ParamEntry& entry = at(name);
    entry.value = std::move(value);
    entry.moment1 = Tensor{};
    entry.moment2 = Tensor{};
}

void adam_step(ParamSet& params, const GradMap& grads, double lr, double beta1, double beta2,
               double eps) {
    params.step_ += 1;
    const double t = static_cast<double>(params.step_);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (const auto& name : params.order_) {
        ParamEntry& entry = params.map_.at(name);
        if (!entry.trainable) continue;
        const auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        if (!g.same_shape(entry.value)) {
            throw ValidationError("gradient shape mismatch for parameter '" + name + "'");
        }
        if (entry.moment1.v.empty()) {
            entry.moment1 = Tensor::zeros(entry.value.shape);
            entry.moment2 = Tensor::zeros(entry.value.shape);
        }
        for (std::size_t i = 0; i < entry.value.v.size(); ++i) {
            double& m = entry.moment1.v[i];
            double& v = entry.moment2.v[i];
            m = beta1 * m + (1.0 - beta1) * g.v[i];
            v = beta2 * v + (1.0 - beta2) * g.v[i] * g.v[i];
            entry.value.v[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        }
        if (!entry.value.all_finite()) {
            throw ValidationError("adam_step produced a non-finite value in parameter '" + name + "'");
        }
    }
}

void sgd_step(ParamSet& params, const GradMap& grads, double lr) {
    params.step_ += 1;
    for (const auto& name : params.order_) {
        ParamEntry& entry = params.map_.at(name);
        if (!entry.trainable) continue;
        const auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        if (!g.same_shape(entry.value)) {
            throw ValidationError("gradient shape mismatch for parameter '" + name + "'");
        }
        for (std::size_t i = 0; i < entry.value.v.size(); ++i) entry.value.v[i] -= lr * g.v[i];
        if (!entry.value.all_finite()) {
            throw ValidationError("sgd_step produced a non-finite value in parameter '" + name + "'");
        }
    }
}

}  // namespace malgraph
