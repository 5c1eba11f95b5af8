#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "core/tensor.hpp"

namespace steadapt::ad {

// Define-by-run reverse-mode tape. Each op allocates a Node whose closure
// scatters the output gradient into the parents' gradients. Creation order
// (seq) doubles as the topological order for the backward sweep.
template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // undefined until first accumulation
    bool requires_grad = false;
    bool leaf = false;
    std::int64_t seq = 0;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backprop;

    Tensor<T>& ensure_grad() {
        if (!grad.defined()) grad = Tensor<T>::zeros(value.shape());
        return grad;
    }
    void clear_grad() { grad = Tensor<T>(); }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

inline std::int64_t next_seq() {
    thread_local std::int64_t counter = 0;
    return ++counter;
}

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

// Disables graph construction in scope (inference).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class T>
Var<T> leaf(Tensor<T> value, bool requires_grad) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->leaf = true;
    n->seq = next_seq();
    return n;
}

template <class T>
Var<T> constant(Tensor<T> value) {
    return leaf(std::move(value), false);
}

// Builds an op node. The closure is dropped when no parent needs gradients,
// so inference carries no tape.
template <class T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->seq = next_seq();
    bool rg = false;
    if (grad_mode())
        for (const auto& p : parents)
            if (p && p->requires_grad) rg = true;
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// Reverse sweep from a scalar root. Non-leaf grads and closures are released
// as soon as they have been consumed.
template <class T>
void backward(const Var<T>& root) {
    if (!root->requires_grad)
        throw InvalidInput("backward() on a value that does not require gradients");
    if (root->value.numel() != 1) throw InvalidShape("backward() root must be a scalar");

    // Hold shared ownership for the whole sweep: releasing a node's parents
    // below must not free nodes still queued for processing.
    std::vector<Var<T>> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<Var<T>> stack{root};
    seen.insert(root.get());
    while (!stack.empty()) {
        Var<T> n = stack.back();
        stack.pop_back();
        for (const auto& p : n->parents)
            if (p && p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        order.push_back(std::move(n));
    }
    std::sort(order.begin(), order.end(),
              [](const Var<T>& a, const Var<T>& b) { return a->seq > b->seq; });

    root->ensure_grad().fill(T(1));
    for (const Var<T>& n : order) {
        if (n->backprop && n->grad.defined()) n->backprop(*n);
        if (!n->leaf) {
            n->clear_grad();
            n->backprop = nullptr;
            n->parents.clear();
        }
    }
}

}  // namespace steadapt::ad
