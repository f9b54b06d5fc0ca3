#include "fusion/tensor.hpp"

#include <numeric>

namespace fusion {

namespace {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

GradTape* g_active_tape = nullptr;

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    const std::int64_t n = shape_numel(shape);
    t.node_->shape = std::move(shape);
    t.node_->data.assign(static_cast<std::size_t>(n), 0.0);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.node_->data) v = value;
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    const std::int64_t n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(data.size()))
        throw ShapeError("data length does not match product of dimensions");
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::detach() const {
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = node_->shape;
    t.node_->data = node_->data;
    t.node_->requires_grad = false;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t = detach();
    t.node_->requires_grad = node_->requires_grad;
    return t;
}

GradTape::GradTape() {
    if (g_active_tape != nullptr)
        throw ContractError("a GradTape is already active; tapes do not nest");
    g_active_tape = this;
}

GradTape::~GradTape() { g_active_tape = nullptr; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::record(std::function<void()> backward_rule) {
    records_.push_back(std::move(backward_rule));
}

void GradTape::backward_from(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward requires a scalar loss tensor");
    if (!loss.node_->on_tape && !loss.node_->requires_grad)
        throw ContractError("backward requires a loss recorded on the active tape");
    loss.node_->ensure_grad();
    loss.node_->grad[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss) {
    GradTape* tape = GradTape::active();
    if (tape == nullptr) throw ContractError("backward called with no active tape");
    tape->backward_from(loss);
}

}  // namespace fusion
