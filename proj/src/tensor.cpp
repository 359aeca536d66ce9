#include "sadga/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "sadga/errors.hpp"
#include "sadga/parameters.hpp"

namespace sadga::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::vector<double>& Node::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

namespace {
NodePtr new_leaf(const Shape& shape, std::vector<double> values) {
    if (shape.empty()) throw InvalidShapeError("tensor shape must be non-empty");
    for (std::size_t d : shape) {
        if (d == 0) throw InvalidShapeError("zero dimension in shape " + shape_str(shape));
    }
    if (values.size() != shape_numel(shape)) {
        throw InvalidShapeError("data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->value = std::move(values);
    return node;
}
}  // namespace

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0); }

Tensor Tensor::full(const Shape& shape, double value) {
    for (std::size_t d : shape) {
        if (d == 0) throw InvalidShapeError("zero dimension in shape " + shape_str(shape));
    }
    return Tensor(new_leaf(shape, std::vector<double>(shape_numel(shape), value)));
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values) {
    return Tensor(new_leaf(shape, std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::size_t Tensor::cols() const { return node_->shape.back(); }
std::size_t Tensor::rows() const { return numel() / cols(); }

std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
double& Tensor::at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    return *this;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }
void Tensor::clear_grad() {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const { return from(shape(), node_->value); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   BackwardFn backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(parents.size());
            for (auto& p : parents) node->parents.push_back(p.node_ptr());
            node->backward = std::move(backward);
        }
    }
    return Tensor(std::move(node));
}

void backward(const Tensor& loss, ParameterStore* store) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() requires a scalar loss");
    }
    if (store) store->ensure_grads();
    Node* root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty()) {
            node->backward(*node);
            // interior gradients are not needed after propagation
            node->grad.clear();
            node->grad.shrink_to_fit();
        }
    }
}

}  // namespace sadga::ad
