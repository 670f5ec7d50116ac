#pragma once

#include <cstdint>
#include <vector>

#include "lobster/tensor.hpp"

// Forward kernels shared between the autodiff tape and tape-free evaluation.
// Shapes: batch dimension leading everywhere; images are NCHW.

namespace lobster::kernels {

/// C = A * B; A [m,k], B [k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// x [n,f] + b [f], broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& b);

Tensor relu(const Tensor& x);

/// Valid padding, stride 1. x [N,C,H,W], kernel [F,C,kh,kw], bias [F].
/// Output [N,F,H-kh+1,W-kw+1]. If `cols_out` is non-null the per-sample
/// im2col matrices ([C*kh*kw] x [OH*OW] each, concatenated) are stored
/// there for reuse in backward.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              std::vector<double>* cols_out = nullptr);

/// 2x2 max-pool, stride 2. x [N,C,H,W] with even H, W. `argmax_out`, when
/// non-null, receives the flat input index of each selected element.
Tensor maxpool2(const Tensor& x, std::vector<std::uint32_t>* argmax_out = nullptr);

/// [N, d1, d2, ...] -> [N, d1*d2*...].
Tensor flatten(const Tensor& x);

/// Fused softmax + cross-entropy, mean over the batch. logits [N,C].
/// `probs_out`, when non-null, receives the softmax probabilities [N,C].
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* probs_out = nullptr);

}  // namespace lobster::kernels
