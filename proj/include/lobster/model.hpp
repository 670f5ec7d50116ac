#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lobster/tape.hpp"
#include "lobster/tensor.hpp"

namespace lobster {

/// Per-coordinate keep/pruned bits. Bits only ever transition 1 -> 0
/// (pruning is permanent); prune() enforces this.
struct Mask {
    std::vector<std::uint8_t> bits;  // 1 = alive, 0 = pruned

    Mask() = default;
    explicit Mask(std::size_t n) : bits(n, 1) {}

    std::size_t size() const { return bits.size(); }
    bool alive(std::size_t i) const { return bits[i] != 0; }
    void prune(std::size_t i) { bits[i] = 0; }

    std::size_t alive_count() const;
    std::size_t pruned_count() const { return size() - alive_count(); }
};

enum class LayerKind { Dense, Conv, Relu, Pool, Flatten };

struct LayerSpec {
    LayerKind kind;
    std::string name;
    std::size_t in = 0, out = 0;      // dense: in/out features
    std::size_t filters = 0, ksize = 0, channels = 0;  // conv
};

/// One learnable tensor with its pruning mask.
struct Param {
    std::string name;
    Tensor value;
    Mask mask;
};

struct Batch {
    Tensor images;            // [N, 784]
    std::vector<int> labels;  // one class per sample
};

/// Ordered layers over a flat parameter store. The forward pass always
/// uses w * mask, so pruned coordinates contribute exactly zero even if
/// a stray write left a nonzero behind.
class Model {
public:
    std::vector<LayerSpec> layers;
    std::vector<Param> params;
    std::vector<std::size_t> input_shape;  // per-sample, e.g. {784} or {1, 28, 28}

    std::size_t param_count() const;
    std::size_t alive_count() const;

    /// Pruned coordinates set to exactly zero (pinning).
    void repin();

    /// Tape-free masked forward; returns logits [N, 10].
    Tensor forward(const Tensor& images) const;

    /// Recorded forward for training. Registers masked parameters as tape
    /// leaves; `param_ids[i]` is the leaf for `params[i]`.
    Tape::Id forward_loss(Tape& tape, const Batch& batch,
                          std::vector<Tape::Id>& param_ids) const;
};

struct EvalResult {
    double loss;
    double top1_error;
};

/// Mean cross-entropy and top-1 error over the whole dataset, masked
/// forward, no tape. Ties in argmax go to the lowest class index.
EvalResult evaluate(const Model& model, const Tensor& images, const std::vector<int>& labels,
                    std::size_t batch_size = 500);

/// 784 -> 300 -> 100 -> 10 dense net, ReLU between dense layers.
Model build_lenet300(std::uint64_t seed);

/// conv 20@5x5 -> pool -> conv 50@5x5 -> pool -> dense 500 -> dense 10.
Model build_lenet5(std::uint64_t seed);

}  // namespace lobster
