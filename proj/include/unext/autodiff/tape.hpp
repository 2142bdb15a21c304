#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "unext/core/error.hpp"
#include "unext/core/tensor.hpp"
#include "unext/nn/parameter.hpp"

namespace unext {

// Handle into a Tape. Only meaningful for the tape that issued it.
struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over rank-4 tensors. Nodes are appended in evaluation
// order, so a single reverse sweep from the loss visits parents after
// children. Parameter leaves reference the parameter's storage instead of
// copying it; computed nodes own their values.
template <typename T>
class Tape {
public:
    using BackFn = std::function<void(Tape&, const Tensor<T>&)>;

    Var leaf(Tensor<T> value, bool requires_grad = false) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    // Binds a node to a parameter; gradients land in p.grad after backward.
    Var param(Parameter<T>& p) {
        Node n;
        n.external = &p.values;
        n.requires_grad = p.trainable;
        n.bound = &p;
        return push(std::move(n));
    }

    // requires_grad propagates from parents; the backward closure is dropped
    // when no parent needs gradients.
    Var emit(Tensor<T> value, const std::vector<Var>& parents, BackFn backward) {
        Node n;
        n.value = std::move(value);
        for (Var p : parents) {
            check(p);
            if (nodes_[static_cast<size_t>(p.id)].requires_grad) n.requires_grad = true;
        }
        if (n.requires_grad) n.backward = std::move(backward);
        return push(std::move(n));
    }

    const Tensor<T>& value(Var v) const {
        check(v);
        const Node& n = nodes_[static_cast<size_t>(v.id)];
        return n.external ? *n.external : n.value;
    }

    bool requires_grad(Var v) const {
        check(v);
        return nodes_[static_cast<size_t>(v.id)].requires_grad;
    }

    bool has_grad(Var v) const {
        check(v);
        return nodes_[static_cast<size_t>(v.id)].has_grad;
    }

    // Zero-initialized on first touch; backward closures accumulate into it.
    Tensor<T>& grad_buffer(Var v) {
        check(v);
        Node& n = nodes_[static_cast<size_t>(v.id)];
        if (!n.has_grad) {
            n.grad = Tensor<T>(value(v).shape());
            n.has_grad = true;
        }
        return n.grad;
    }

    const Tensor<T>& grad(Var v) const {
        check(v);
        const Node& n = nodes_[static_cast<size_t>(v.id)];
        if (!n.has_grad) throw StateError("tape: gradient not computed for node");
        return n.grad;
    }

    // Seeds d(loss)/d(loss) = 1, sweeps the tape in reverse, then copies
    // accumulated gradients into every bound trainable parameter.
    void backward(Var loss) {
        if (nodes_.empty()) throw StateError("tape: backward called before any forward");
        check(loss);
        if (ran_backward_) throw StateError("tape: backward already ran on this tape");
        const Tensor<T>& lv = value(loss);
        require(lv.shape().numel() == 1,
                "tape: loss must be scalar, got " + lv.shape().str());
        if (!lv.all_finite()) throw StateError("tape: loss is not finite");
        ran_backward_ = true;

        grad_buffer(loss).fill(T(1));
        for (int32_t i = loss.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.has_grad && n.requires_grad && n.backward) n.backward(*this, n.grad);
        }
        for (Node& n : nodes_) {
            if (n.bound && n.bound->trainable && n.has_grad) {
                if (n.bound->grad) {
                    accumulate(*n.bound->grad, n.grad);
                } else {
                    n.bound->grad = n.grad;
                }
            }
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        const Tensor<T>* external = nullptr;
        Tensor<T> grad;
        bool has_grad = false;
        bool requires_grad = false;
        BackFn backward;
        Parameter<T>* bound = nullptr;
    };

    Var push(Node n) {
        nodes_.push_back(std::move(n));
        return Var{static_cast<int32_t>(nodes_.size() - 1)};
    }

    void check(Var v) const {
        if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size()) {
            throw StateError("tape: invalid node handle");
        }
    }

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

} // namespace unext
