#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusion/tensor.hpp"

namespace fusion {

// Named collection of learnable tensors plus per-parameter moment buffers for
// the adaptive-moment optimizer. Iteration order is insertion order, which
// makes updates, checkpoints and parameter counts deterministic.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        std::vector<double> m;  // first moment
        std::vector<double> v;  // second moment
    };

    Tensor& add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::int64_t parameter_count() const;
    long long step() const { return step_; }
    void set_step(long long s) { step_ = s; }

    void zero_grads();

    // Deep copy (tensors and optimizer state).
    ParamSet clone() const;

    friend void adam_step(ParamSet& params, double lr, double beta1, double beta2, double eps);

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    long long step_ = 0;
};

// Standard adaptive-moment update, applied in place. Requires grads to be
// populated (a zero grad counts); zeroes them afterwards and advances the
// step counter.
void adam_step(ParamSet& params, double lr, double beta1 = 0.5, double beta2 = 0.999,
               double eps = 1e-8);

}  // namespace fusion
