#pragma once

#include <map>
#include <string>
#include <vector>

#include "malgraph/autodiff.hpp"

namespace malgraph {

struct ParamEntry {
    Tensor value;
    bool trainable = true;
    // Adam state, allocated on first use.
    Tensor moment1;
    Tensor moment2;
};

// Named parameter tensors with per-parameter optimizer state. Iteration
// follows insertion order.
class ParamSet {
public:
    void add(const std::string& name, Tensor value, bool trainable = true);
    bool has(const std::string& name) const { return map_.count(name) != 0; }
    ParamEntry& at(const std::string& name);
    const ParamEntry& at(const std::string& name) const;
    const std::vector<std::string>& order() const { return order_; }
    std::int64_t step_count() const { return step_; }
    void set_step_count(std::int64_t s) { step_ = s; }
    void reset_optimizer_state();
    // Replaces a tensor, keeping its position; shape may change (classifier
    // reinitialization).
    void replace(const std::string& name, Tensor value);

private:
    friend void adam_step(ParamSet&, const std::map<std::string, Tensor>&, double, double, double, double);
    friend void sgd_step(ParamSet&, const std::map<std::string, Tensor>&, double);

    std::vector<std::string> order_;
    std::map<std::string, ParamEntry> map_;
    std::int64_t step_ = 0;
};

using GradMap = std::map<std::string, Tensor>;

// Standard Adam with bias correction. Parameters without a gradient entry
// (or marked non-trainable) are left alone. Throws on a non-finite update,
// naming the parameter.
void adam_step(ParamSet& params, const GradMap& grads, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

void sgd_step(ParamSet& params, const GradMap& grads, double lr);

}  // namespace malgraph
