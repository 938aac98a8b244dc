// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ndgait/diff/tensor.hpp"

namespace ndg::diff {

/// Named trainable (or frozen) array with its gradient accumulator.
template <class T> struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v, bool train = true)
        : name(std::move(n)), value(std::move(v)), grad(value.shape), trainable(train) {}

    void zero_grad() { grad = Tensor<T>(value.shape); }
};

template <class T> class Tape;

/// Handle to a node on a tape.
template <class T> struct Var {
    Tape<T> *tape = nullptr;
    std::uint32_t id = 0;

    const Tensor<T> &value() const { return tape->value(id); }
    const Shape &shape() const { return tape->value(id).shape; }
    std::size_t dim(std::size_t i) const { return shape().at(i); }
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const { return value().size(); }
    const T *data() const { return value().ptr(); }
    T item() const { return value().item(); }
    bool requires_grad() const { return tape->requires_grad(id); }
};

/// Linear record of a forward computation. Nodes are appended in creation
/// order, which is already a topological order, and backward() walks them
/// in reverse exactly once.
template <class T> class Tape {
public:
    using BackFn = std::function<void(Tape &, const Tensor<T> &)>;

    explicit Tape(std::uint64_t seed = 0, bool grad_enabled = true)
        : seed_(seed), grad_enabled_(grad_enabled) {}

    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    std::uint64_t seed() const { return seed_; }
    bool grad_enabled() const { return grad_enabled_; }
    std::size_t num_nodes() const { return nodes_.size(); }

    Var<T> constant(Tensor<T> v) {
        Node n;
        n.value = std::move(v);
        return push(std::move(n));
    }

    /// Differentiable input owned by the tape. Its gradient survives
    /// repeated backward() calls and accumulates.
    Var<T> leaf(Tensor<T> v) {
        Node n;
        n.value = std::move(v);
        n.requires_grad = grad_enabled_;
        n.leaf = true;
        return push(std::move(n));
    }

    /// Reference to an external parameter. Gradients accumulate into p.grad.
    /// Frozen parameters are recorded as constants.
    Var<T> param(Parameter<T> &p) {
        Node n;
        n.ext_value = &p.value;
        if (p.trainable && grad_enabled_) {
            if (p.grad.shape != p.value.shape) p.zero_grad();
            n.ext_grad = &p.grad;
            n.requires_grad = true;
            n.leaf = true;
        }
        return push(std::move(n));
    }

    Var<T> param(const Parameter<T> &p) {
        Node n;
        n.ext_value = &p.value;
        return push(std::move(n));
    }

    /// Used by operations: appends a result node. The backward closure is kept
    /// only if some input requires a gradient.
    Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackFn fn) {
        Node n;
        n.value = std::move(value);
        bool rg = false;
        for (const auto &v : inputs) {
            check_owner(v);
            rg = rg || nodes_[v.id].requires_grad;
        }
        if (rg && grad_enabled_) {
            n.requires_grad = true;
            n.fn = std::move(fn);
        }
        return push(std::move(n));
    }

    const Tensor<T> &value(std::uint32_t id) const {
        const Node &n = nodes_.at(id);
        return n.ext_value ? *n.ext_value : n.value;
    }

    bool requires_grad(std::uint32_t id) const { return nodes_.at(id).requires_grad; }

    /// Gradient buffer of a node, allocated (zero-filled) on first use.
    T *grad_ptr(std::uint32_t id) {
        Node &n = nodes_[id];
        if (n.ext_grad) return n.ext_grad->ptr();
        if (!n.grad_alloc) {
            n.grad = Tensor<T>(value(id).shape);
            n.grad_alloc = true;
        }
        return n.grad.ptr();
    }

    /// Accumulated gradient of a leaf (or any node after backward()).
    const Tensor<T> &grad(Var<T> v) {
        check_owner(v);
        Node &n = nodes_[v.id];
        if (n.ext_grad) return *n.ext_grad;
        grad_ptr(v.id);
        return n.grad;
    }

    void backward(Var<T> root) {
        check_owner(root);
        if (value(root.id).size() != 1)
            throw ContractError("backward() requires a scalar root, got shape " +
                                shape_str(value(root.id).shape));
        for (auto &n : nodes_) {
            if (!n.leaf) {
                n.grad = Tensor<T>();
                n.grad_alloc = false;
            }
        }
        if (!nodes_[root.id].requires_grad) return;
        grad_ptr(root.id)[0] += T(1);
        for (std::size_t i = root.id + 1; i-- > 0;) {
            Node &n = nodes_[i];
            if (!n.fn || !n.grad_alloc) continue;
            n.fn(*this, n.grad);
            if (!n.leaf) {
                n.grad = Tensor<T>();
                n.grad_alloc = false;
            }
        }
    }

    /// Folds a discrete forward decision (ReLU mask, pooling argmax, clamp) into
    /// a running signature so finite-difference probes can detect kink crossings.
    /// Ops skip the hashing unless tracking is on.
    void mix_kink(std::uint64_t h) {
        kink_ ^= h + 0x9e3779b97f4a7c15ULL + (kink_ << 6) + (kink_ >> 2);
    }
    std::uint64_t kink_signature() const { return kink_; }
    void set_track_kinks(bool on) { track_kinks_ = on; }
    bool track_kinks() const { return track_kinks_; }

private:
    struct Node {
        Tensor<T> value;
        const Tensor<T> *ext_value = nullptr;
        Tensor<T> grad;
        Tensor<T> *ext_grad = nullptr;
        BackFn fn;
        bool requires_grad = false;
        bool leaf = false;
        bool grad_alloc = false;
    };

    Var<T> push(Node n) {
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    void check_owner(const Var<T> &v) const {
        if (v.tape != this || v.id >= nodes_.size())
            throw ContractError("variable does not belong to this tape");
    }

    std::vector<Node> nodes_;
    std::uint64_t seed_;
    bool grad_enabled_;
    std::uint64_t kink_ = 0;
    bool track_kinks_ = false;
};

} // namespace ndg::diff
