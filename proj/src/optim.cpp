#include "fusion/optim.hpp"

#include <cmath>

namespace fusion {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    if (contains(name)) throw ContractError("ParamSet: duplicate parameter name " + name);
    t.set_requires_grad(true);
    Entry e;
    e.name = name;
    e.tensor = std::move(t);
    e.m.assign(static_cast<std::size_t>(e.tensor.size()), 0.0);
    e.v.assign(static_cast<std::size_t>(e.tensor.size()), 0.0);
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back().tensor;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("ParamSet: unknown parameter " + name);
    return entries_[it->second].tensor;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("ParamSet: unknown parameter " + name);
    return entries_[it->second].tensor;
}

std::int64_t ParamSet::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

void ParamSet::zero_grads() {
    for (auto& e : entries_) {
        e.tensor.grad_mut();  // allocate if absent
        e.tensor.zero_grad();
    }
}

ParamSet ParamSet::clone() const {
    ParamSet out;
    for (const auto& e : entries_) {
        Tensor& t = out.add(e.name, e.tensor.detach());
        (void)t;
        out.entries_.back().m = e.m;
        out.entries_.back().v = e.v;
    }
    out.step_ = step_;
    return out;
}

void adam_step(ParamSet& params, double lr, double beta1, double beta2, double eps) {
    for (auto& e : params.entries_)
        if (!e.tensor.has_grad())
            throw ContractError("adam_step: missing gradient for parameter " + e.name);
    params.step_ += 1;
    const double t = static_cast<double>(params.step_);
    const double corr1 = 1.0 - std::pow(beta1, t);
    const double corr2 = 1.0 - std::pow(beta2, t);
    for (auto& e : params.entries_) {
        double* w = e.tensor.data();
        std::span<double> g = e.tensor.grad_mut();
        const std::size_t n = e.m.size();
        for (std::size_t i = 0; i < n; ++i) {
            e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g[i];
            e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = e.m[i] / corr1;
            const double vhat = e.v[i] / corr2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        e.tensor.zero_grad();
    }
}

}  // namespace fusion
