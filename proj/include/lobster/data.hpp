#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lobster/tensor.hpp"
#include "lobster/trainer.hpp"

namespace lobster {

struct Dataset {
    Tensor images;            // [N, features]
    std::vector<int> labels;  // class per sample
    std::string tag;          // train | val | test

    std::size_t size() const { return labels.size(); }
};

/// Decodes a big-endian IDX file: magic 0x00000803 (3-D uint8 images) or
/// 0x00000801 (1-D uint8 labels), per-dimension 4-byte sizes, then raw
/// bytes. Values are returned as doubles without normalization.
Tensor read_idx(const std::string& path);

/// Loads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`,
/// flattens images to [N, 784] and scales pixels to [0, 1].
struct MnistData {
    Dataset train;
    Dataset test;
};
MnistData load_mnist_dir(const std::string& dir);

/// Seeded permutation split; the last `val_size` permuted samples form
/// the validation set. Throws if val_size >= N.
std::pair<Dataset, Dataset> split_train_val(const Dataset& train, std::size_t val_size,
                                            std::uint64_t seed);

/// Gaussian clusters with seeded, well-separated means (unit sigma,
/// pairwise mean distance >= `separation`). Linearly separable by
/// construction for separation >= 6.
Dataset synthetic_blobs(std::size_t n_per_class, std::size_t classes, std::size_t dim,
                        std::uint64_t seed, double separation = 8.0);

/// train/val/test split for a run: MNIST-style dir or synthetic task.
DataSplit make_split(const Dataset& train, const Dataset& val, const Dataset& test);

}  // namespace lobster
