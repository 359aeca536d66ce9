#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sadga::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

// One vertex of the recorded computation. Leaves (parameters, inputs) carry no
// backward function; interior nodes hold their parents alive until released.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    BackwardFn backward;

    // Returns the gradient buffer, allocating zeros on first use.
    std::vector<double>& grad_buffer();
};

// Dense float64 array with row-major storage and optional participation in the
// reverse-mode tape. Copies share the underlying node (handle semantics).
// Ops treat every tensor as a matrix: rows() = product of leading dims,
// cols() = last dim.
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(const Shape& shape);
    static Tensor full(const Shape& shape, double value);
    static Tensor from(const Shape& shape, std::vector<double> values);
    static Tensor scalar(double value);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    // Direct writes bypass the tape; only for parameter updates and test setup.
    std::span<double> mutable_values();
    double item() const;
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    bool requires_grad() const;
    Tensor& set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void clear_grad();

    // Fresh leaf holding a copy of the values.
    Tensor detach() const;

    Node* node() const { return node_.get(); }
    const NodePtr& node_ptr() const { return node_; }

   private:
    NodePtr node_;
};

// Disables recording while alive (evaluation / decoding paths).
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

bool grad_mode_enabled();

// Builds an op result; records parents and the backward rule only when grad
// mode is on and some parent requires grad.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   BackwardFn backward);

class ParameterStore;

// Reverse sweep from a scalar loss. Gradients accumulate into every reachable
// leaf with requires_grad. When a store is given, every registered parameter
// is guaranteed a gradient buffer afterwards (zeros if unreachable).
void backward(const Tensor& loss, ParameterStore* store = nullptr);

}  // namespace sadga::ad
