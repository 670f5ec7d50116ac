#include "lobster/kernels.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lobster::kernels {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

namespace {

[[noreturn]] void shape_error(const char* prim, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(prim) + ": incompatible shapes " + shape_str(a.shape) +
                                " and " + shape_str(b.shape));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) shape_error("matmul", a, b);
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    CMapRM ma(a.data.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    CMapRM mb(b.data.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    MapRM mo(out.data.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    mo.noalias() = ma * mb;
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
    if (x.rank() != 2 || b.rank() != 1 || x.shape[1] != b.shape[0]) shape_error("add_bias", x, b);
    Tensor out = x;
    const std::size_t n = x.shape[0], f = x.shape[1];
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < f; ++c) out.data[r * f + c] += b.data[c];
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              std::vector<double>* cols_out) {
    if (x.rank() != 4 || kernel.rank() != 4 || x.shape[1] != kernel.shape[1])
        shape_error("conv2d", x, kernel);
    const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::size_t F = kernel.shape[0], kh = kernel.shape[2], kw = kernel.shape[3];
    if (bias.rank() != 1 || bias.shape[0] != F) shape_error("conv2d bias", kernel, bias);
    if (kh > H || kw > W) shape_error("conv2d", x, kernel);
    const std::size_t OH = H - kh + 1, OW = W - kw + 1;
    const std::size_t K = C * kh * kw, P = OH * OW;

    Tensor out = Tensor::zeros({N, F, OH, OW});
    std::vector<double> cols_local;
    std::vector<double>& cols = cols_out ? *cols_out : cols_local;
    cols.assign(N * K * P, 0.0);

    CMapRM mk(kernel.data.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(K));
    for (std::size_t n = 0; n < N; ++n) {
        double* col = cols.data() + n * K * P;
        const double* img = x.data.data() + n * C * H * W;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j) {
                    const std::size_t krow = (c * kh + i) * kw + j;
                    for (std::size_t oh = 0; oh < OH; ++oh) {
                        const double* src = img + c * H * W + (oh + i) * W + j;
                        double* dst = col + krow * P + oh * OW;
                        for (std::size_t ow = 0; ow < OW; ++ow) dst[ow] = src[ow];
                    }
                }
        MapRM mcol(col, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
        MapRM mout(out.data.data() + n * F * P, static_cast<Eigen::Index>(F),
                   static_cast<Eigen::Index>(P));
        mout.noalias() = mk * mcol;
        for (std::size_t f = 0; f < F; ++f) {
            double* o = out.data.data() + (n * F + f) * P;
            const double bv = bias.data[f];
            for (std::size_t p = 0; p < P; ++p) o[p] += bv;
        }
    }
    return out;
}

Tensor maxpool2(const Tensor& x, std::vector<std::uint32_t>* argmax_out) {
    if (x.rank() != 4 || x.shape[2] % 2 != 0 || x.shape[3] % 2 != 0)
        throw std::invalid_argument("maxpool2: need NCHW input with even H, W, got " +
                                    shape_str(x.shape));
    const std::size_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::size_t OH = H / 2, OW = W / 2;
    Tensor out = Tensor::zeros({N, C, OH, OW});
    if (argmax_out) argmax_out->assign(out.size(), 0);
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* img = x.data.data() + nc * H * W;
        double* o = out.data.data() + nc * OH * OW;
        for (std::size_t oh = 0; oh < OH; ++oh)
            for (std::size_t ow = 0; ow < OW; ++ow) {
                std::size_t base = (2 * oh) * W + 2 * ow;
                std::size_t best = base;
                double bv = img[base];
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        std::size_t idx = base + di * W + dj;
                        if (img[idx] > bv) { bv = img[idx]; best = idx; }
                    }
                o[oh * OW + ow] = bv;
                if (argmax_out)
                    (*argmax_out)[nc * OH * OW + oh * OW + ow] =
                        static_cast<std::uint32_t>(nc * H * W + best);
            }
    }
    return out;
}

Tensor flatten(const Tensor& x) {
    if (x.rank() < 2) throw std::invalid_argument("flatten: rank >= 2 required, got " + shape_str(x.shape));
    Tensor out = x;
    out.shape = {x.shape[0], x.size() / x.shape[0]};
    return out;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* probs_out) {
    if (logits.rank() != 2 || logits.shape[0] != labels.size())
        throw std::invalid_argument("softmax_cross_entropy: logits " + shape_str(logits.shape) +
                                    " vs " + std::to_string(labels.size()) + " labels");
    const std::size_t N = logits.shape[0], C = logits.shape[1];
    if (probs_out) *probs_out = Tensor::zeros({N, C});
    double loss = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const double* row = logits.data.data() + n * C;
        const int label = labels[n];
        if (label < 0 || static_cast<std::size_t>(label) >= C)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        double mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - row[label];
        if (probs_out) {
            double* p = probs_out->data.data() + n * C;
            for (std::size_t c = 0; c < C; ++c) p[c] = std::exp(row[c] - lse);
        }
    }
    return loss / static_cast<double>(N);
}

}  // namespace lobster::kernels
