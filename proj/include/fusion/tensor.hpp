#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fusion/errors.hpp"

namespace fusion {

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;
    bool on_tape = false;  // produced by a recorded op

    bool needs_grad() const { return requires_grad || on_tape; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major f64 tensor participating in a reverse-mode gradient graph.
// Copies are shallow (shared node); shape is immutable after construction.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(node_->data.size()); }
    int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }

    double* data() { return node_->data.data(); }
    const double* data() const { return node_->data.data(); }
    std::span<double> values() { return node_->data; }
    std::span<const double> values() const { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> grad_mut() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        if (has_grad()) node_->grad.assign(node_->data.size(), 0.0);
    }

    // Value of a 1-element tensor.
    double item() const {
        if (size() != 1) throw ContractError("item() requires a 1-element tensor");
        return node_->data[0];
    }

    // Deep copy of the data with no graph attachment.
    Tensor detach() const;
    // Deep copy preserving requires_grad (still a fresh leaf).
    Tensor clone() const;

    std::shared_ptr<detail::Node> node_;  // internal; ops and tests reach in
};

// Records backward rules while alive; replaying them in reverse order
// populates grads of every reachable tensor that needs them. One tape is
// active at a time and a tape never spans an optimizer step.
class GradTape {
public:
    GradTape();
    ~GradTape();
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* active();

    void record(std::function<void()> backward_rule);
    std::size_t num_records() const { return records_.size(); }
    void clear() { records_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Grads
    // accumulate additively; call zero_grad on leaves between steps.
    void backward_from(const Tensor& loss);

private:
    std::vector<std::function<void()>> records_;
};

// Backward pass on the active tape (the loss must be a scalar recorded on it).
void backward(const Tensor& loss);

}  // namespace fusion
