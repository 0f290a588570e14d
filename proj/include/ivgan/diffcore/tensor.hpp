#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ivgan/error.hpp"

namespace ivgan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

/// Global switch for NaN/Inf detection on every op output. On by default in
/// debug builds.
inline std::atomic<bool>& finite_checks_flag()
{
#ifdef NDEBUG
    static std::atomic<bool> flag{false};
#else
    static std::atomic<bool> flag{true};
#endif
    return flag;
}

inline void set_finite_checks(bool enabled) { finite_checks_flag().store(enabled); }
inline bool finite_checks_enabled() { return finite_checks_flag().load(); }

template <class T>
class Tensor;

namespace detail {

template <class T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until something accumulates into it
    bool requires_grad = false;
    bool consumed = false;  // interior node whose graph was already back-propagated
    std::string op;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<T>& grad_buffer()
    {
        if (grad.empty()) {
            grad.assign(value.size(), T{0});
        }
        return grad;
    }
};

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

}  // namespace detail

/// Dense row-major N-d array with optional reverse-mode gradient tracking.
///
/// A Tensor is a cheap handle: copies share the same storage and graph node.
/// Op outputs are never mutated after construction; only leaf tensors (network
/// parameters) are updated in place by optimizers.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0}, bool requires_grad = false)
        : node_(std::make_shared<detail::Node<T>>())
    {
        validate_shape(shape);
        node_->value.assign(shape_numel(shape), fill);
        node_->shape = std::move(shape);
        node_->requires_grad = requires_grad;
        node_->op = "leaf";
    }

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<detail::Node<T>>())
    {
        validate_shape(shape);
        if (shape_numel(shape) != values.size()) {
            throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                             std::to_string(shape_numel(shape)) + " elements but " +
                             std::to_string(values.size()) + " values were given");
        }
        node_->value = std::move(values);
        node_->shape = std::move(shape);
        node_->requires_grad = requires_grad;
        node_->op = "leaf";
    }

    static Tensor scalar(T v, bool requires_grad = false) { return Tensor(Shape{1}, v, requires_grad); }

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node().shape; }
    std::size_t rank() const { return node().shape.size(); }
    std::size_t dim(std::size_t axis) const { return node().shape.at(axis); }
    std::size_t numel() const { return node().value.size(); }

    std::span<const T> data() const { return node().value; }
    /// Mutable access for leaves (parameter updates, fixtures). Mutating an op
    /// output that is still part of a live graph invalidates its gradient.
    std::span<T> mutable_data() { return node().value; }
    const std::vector<T>& values() const { return node().value; }

    bool requires_grad() const { return node().requires_grad; }
    void set_requires_grad(bool on) { node().requires_grad = on; }

    bool has_grad() const { return !node().grad.empty(); }
    /// Gradient after backward(); zeros if nothing reached this tensor.
    std::span<const T> grad() const
    {
        auto& n = node();
        if (n.grad.empty() && n.requires_grad) {
            n.grad.assign(n.value.size(), T{0});
        }
        return n.grad;
    }
    std::span<T> mutable_grad() { return node().grad_buffer(); }
    void zero_grad()
    {
        auto& g = node().grad;
        std::fill(g.begin(), g.end(), T{0});
    }

    T item() const
    {
        if (numel() != 1) {
            throw ShapeError("item() on tensor of shape " + shape_str(shape()));
        }
        return node().value[0];
    }

    T operator[](std::size_t i) const { return node().value.at(i); }

    /// Same values, no graph history, no gradient tracking.
    Tensor detach() const { return Tensor(node().shape, node().value, false); }

    Tensor clone(bool requires_grad = false) const { return Tensor(node().shape, node().value, requires_grad); }

    const std::string& op_name() const { return node().op; }

    // Graph plumbing used by op implementations.
    const detail::NodePtr<T>& node_ptr() const { return node_; }
    static Tensor from_node(detail::NodePtr<T> n)
    {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

private:
    static void validate_shape(const Shape& shape)
    {
        if (shape.empty()) {
            throw ShapeError("tensor shape must have rank >= 1");
        }
        for (std::size_t extent : shape) {
            if (extent == 0) {
                throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
            }
        }
    }

    detail::Node<T>& node() const
    {
        if (!node_) {
            throw Error("use of an undefined tensor");
        }
        return *node_;
    }

    detail::NodePtr<T> node_;
};

namespace detail {

template <class T>
void check_finite(const Node<T>& n)
{
    if (!finite_checks_enabled()) {
        return;
    }
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        if (!std::isfinite(n.value[i])) {
            throw NumericError("non-finite value produced by op '" + n.op + "' at flat index " +
                               std::to_string(i));
        }
    }
}

/// Builds an op output. The backward closure is attached only when some input
/// tracks gradients.
template <class T>
Tensor<T> make_result(std::string op, Shape shape, std::vector<T> value,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward_fn)
{
    auto n = std::make_shared<Node<T>>();
    n->op = std::move(op);
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (const Tensor<T>* in : inputs) {
        if (in && in->defined() && in->requires_grad()) {
            n->requires_grad = true;
        }
    }
    if (n->requires_grad) {
        for (const Tensor<T>* in : inputs) {
            if (in && in->defined()) {
                n->parents.push_back(in->node_ptr());
            }
        }
        n->backward_fn = std::move(backward_fn);
    }
    check_finite(*n);
    return Tensor<T>::from_node(std::move(n));
}

/// Parent gradient buffer, or nullptr when the parent does not track gradients.
template <class T>
std::vector<T>* grad_of(const NodePtr<T>& n)
{
    return (n && n->requires_grad) ? &n->grad_buffer() : nullptr;
}

}  // namespace detail

/// Reverse-mode accumulation from a scalar loss into every reachable tensor
/// that requires gradients. Leaf gradients accumulate across calls; callers
/// zero them explicitly. A loss graph can be back-propagated once.
template <class T>
void backward(const Tensor<T>& loss)
{
    if (loss.numel() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    const auto& root = loss.node_ptr();
    if (root->consumed) {
        throw Error("backward() already ran on this graph; rebuild the forward pass");
    }
    if (!root->requires_grad) {
        root->consumed = true;
        return;
    }

    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<detail::Node<T>*> order;
    std::unordered_set<const detail::Node<T>*> seen;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next_parent] = stack.back();
        if (next_parent < node->parents.size()) {
            detail::Node<T>* parent = node->parents[next_parent++].get();
            if (parent->requires_grad && seen.insert(parent).second) {
                if (parent->consumed) {
                    throw Error("backward() reached op '" + parent->op +
                                "' whose graph was already back-propagated");
                }
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad_buffer().assign(1, T{1});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node<T>* node = *it;
        if (node->backward_fn && !node->grad.empty()) {
            node->backward_fn(*node);
        }
    }
    // Release the graph: interior closures and gradients are no longer needed.
    for (detail::Node<T>* node : order) {
        if (node->backward_fn) {
            node->backward_fn = nullptr;
            node->parents.clear();
            node->grad.clear();
            node->grad.shrink_to_fit();
            node->consumed = true;
        }
    }
    root->consumed = true;
}

}  // namespace ivgan
