#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lobster/kernels.hpp"
#include "lobster/tensor.hpp"

namespace lobster {

/// Append-only record of a forward pass. Each op returns the id of its
/// output value; backward() walks the record in reverse and accumulates
/// gradients additively into every value, leaves included.
class Tape {
public:
    using Id = std::size_t;

    /// Registers a leaf value (input or parameter).
    Id leaf(Tensor value);

    Id matmul(Id a, Id b);
    Id add_bias(Id x, Id b);
    Id relu(Id x);
    Id conv2d(Id x, Id kernel, Id bias);
    Id maxpool2(Id x);
    Id flatten(Id x);
    Id softmax_cross_entropy(Id logits, std::vector<int> labels);

    /// Elementwise product and scalar scaling; used by small nets and tests.
    Id hadamard(Id a, Id b);
    Id scale(Id x, double factor);
    /// Sum of all elements, scalar output.
    Id sum(Id x);

    const Tensor& value(Id id) const { return values_[id]; }
    /// Valid after backward(); zero tensor for values the loss does not reach.
    const Tensor& grad(Id id) const { return grads_[id]; }

    std::size_t num_nodes() const { return nodes_.size(); }

    /// Reverse pass from `loss` (must be scalar). Throws if the tape is
    /// empty, the loss is not scalar, or a non-finite gradient appears.
    void backward(Id loss);

private:
    struct Node {
        std::function<void(Tape&)> pull;
    };

    Id push_value(Tensor t);
    Tensor& grad_mut(Id id) { return grads_[id]; }

    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
    std::vector<Node> nodes_;
};

}  // namespace lobster
