#include "lobster/tape.hpp"

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <utility>

namespace lobster {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Tape::Id Tape::push_value(Tensor t) {
    values_.push_back(std::move(t));
    return values_.size() - 1;
}

Tape::Id Tape::leaf(Tensor value) { return push_value(std::move(value)); }

Tape::Id Tape::matmul(Id a, Id b) {
    Id out = push_value(kernels::matmul(values_[a], values_[b]));
    nodes_.push_back({[a, b, out](Tape& t) {
        const Tensor& ga = t.values_[a];
        const Tensor& gb = t.values_[b];
        const Tensor& go = t.grads_[out];
        const std::size_t m = ga.shape[0], k = ga.shape[1], n = gb.shape[1];
        CMapRM ma(ga.data.data(), m, k), mb(gb.data.data(), k, n), mgo(go.data.data(), m, n);
        MapRM mda(t.grads_[a].data.data(), m, k), mdb(t.grads_[b].data.data(), k, n);
        mda.noalias() += mgo * mb.transpose();
        mdb.noalias() += ma.transpose() * mgo;
    }});
    return out;
}

Tape::Id Tape::add_bias(Id x, Id b) {
    Id out = push_value(kernels::add_bias(values_[x], values_[b]));
    nodes_.push_back({[x, b, out](Tape& t) {
        const Tensor& go = t.grads_[out];
        const std::size_t n = go.shape[0], f = go.shape[1];
        Tensor& dx = t.grads_[x];
        Tensor& db = t.grads_[b];
        for (std::size_t i = 0; i < go.size(); ++i) dx.data[i] += go.data[i];
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < f; ++c) db.data[c] += go.data[r * f + c];
    }});
    return out;
}

Tape::Id Tape::relu(Id x) {
    Id out = push_value(kernels::relu(values_[x]));
    nodes_.push_back({[x, out](Tape& t) {
        const Tensor& xv = t.values_[x];
        const Tensor& go = t.grads_[out];
        Tensor& dx = t.grads_[x];
        for (std::size_t i = 0; i < go.size(); ++i)
            if (xv.data[i] > 0.0) dx.data[i] += go.data[i];
    }});
    return out;
}

Tape::Id Tape::conv2d(Id x, Id kernel, Id bias) {
    auto cols = std::make_shared<std::vector<double>>();
    Id out = push_value(kernels::conv2d(values_[x], values_[kernel], values_[bias], cols.get()));
    nodes_.push_back({[x, kernel, bias, out, cols](Tape& t) {
        const Tensor& xv = t.values_[x];
        const Tensor& kv = t.values_[kernel];
        const Tensor& go = t.grads_[out];
        const std::size_t N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3];
        const std::size_t F = kv.shape[0], kh = kv.shape[2], kw = kv.shape[3];
        const std::size_t OH = H - kh + 1, OW = W - kw + 1;
        const std::size_t K = C * kh * kw, P = OH * OW;

        Tensor& dk = t.grads_[kernel];
        Tensor& db = t.grads_[bias];
        Tensor& dx = t.grads_[x];
        CMapRM mk(kv.data.data(), F, K);
        MapRM mdk(dk.data.data(), F, K);
        MatRM dcol(K, P);
        for (std::size_t n = 0; n < N; ++n) {
            CMapRM mgo(go.data.data() + n * F * P, F, P);
            CMapRM mcol(cols->data() + n * K * P, K, P);
            mdk.noalias() += mgo * mcol.transpose();
            for (std::size_t f = 0; f < F; ++f) db.data[f] += mgo.row(f).sum();
            dcol.noalias() = mk.transpose() * mgo;
            // col2im scatter
            double* dimg = dx.data.data() + n * C * H * W;
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t i = 0; i < kh; ++i)
                    for (std::size_t j = 0; j < kw; ++j) {
                        const std::size_t krow = (c * kh + i) * kw + j;
                        for (std::size_t oh = 0; oh < OH; ++oh) {
                            double* dst = dimg + c * H * W + (oh + i) * W + j;
                            const double* src = dcol.data() + krow * P + oh * OW;
                            for (std::size_t ow = 0; ow < OW; ++ow) dst[ow] += src[ow];
                        }
                    }
        }
    }});
    return out;
}

Tape::Id Tape::maxpool2(Id x) {
    auto argmax = std::make_shared<std::vector<std::uint32_t>>();
    Id out = push_value(kernels::maxpool2(values_[x], argmax.get()));
    nodes_.push_back({[x, out, argmax](Tape& t) {
        const Tensor& go = t.grads_[out];
        Tensor& dx = t.grads_[x];
        for (std::size_t i = 0; i < go.size(); ++i) dx.data[(*argmax)[i]] += go.data[i];
    }});
    return out;
}

Tape::Id Tape::flatten(Id x) {
    Id out = push_value(kernels::flatten(values_[x]));
    nodes_.push_back({[x, out](Tape& t) {
        const Tensor& go = t.grads_[out];
        Tensor& dx = t.grads_[x];
        for (std::size_t i = 0; i < go.size(); ++i) dx.data[i] += go.data[i];
    }});
    return out;
}

Tape::Id Tape::softmax_cross_entropy(Id logits, std::vector<int> labels) {
    auto probs = std::make_shared<Tensor>();
    double loss = kernels::softmax_cross_entropy(values_[logits], labels, probs.get());
    Id out = push_value(Tensor::scalar(loss));
    auto lab = std::make_shared<std::vector<int>>(std::move(labels));
    nodes_.push_back({[logits, out, probs, lab](Tape& t) {
        const double g = t.grads_[out].data[0];
        const std::size_t N = probs->shape[0], C = probs->shape[1];
        Tensor& dl = t.grads_[logits];
        const double inv_n = 1.0 / static_cast<double>(N);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c) {
                double p = probs->data[n * C + c];
                if (static_cast<int>(c) == (*lab)[n]) p -= 1.0;
                dl.data[n * C + c] += g * p * inv_n;
            }
    }});
    return out;
}

Tape::Id Tape::hadamard(Id a, Id b) {
    const Tensor& av = values_[a];
    const Tensor& bv = values_[b];
    if (!av.same_shape(bv))
        throw std::invalid_argument("hadamard: incompatible shapes " + shape_str(av.shape) +
                                    " and " + shape_str(bv.shape));
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
    Id o = push_value(std::move(out));
    nodes_.push_back({[a, b, o](Tape& t) {
        const Tensor& go = t.grads_[o];
        for (std::size_t i = 0; i < go.size(); ++i) {
            t.grads_[a].data[i] += go.data[i] * t.values_[b].data[i];
            t.grads_[b].data[i] += go.data[i] * t.values_[a].data[i];
        }
    }});
    return o;
}

Tape::Id Tape::scale(Id x, double factor) {
    Tensor out = values_[x];
    for (double& v : out.data) v *= factor;
    Id o = push_value(std::move(out));
    nodes_.push_back({[x, o, factor](Tape& t) {
        const Tensor& go = t.grads_[o];
        for (std::size_t i = 0; i < go.size(); ++i) t.grads_[x].data[i] += factor * go.data[i];
    }});
    return o;
}

Tape::Id Tape::sum(Id x) {
    double s = 0.0;
    for (double v : values_[x].data) s += v;
    Id o = push_value(Tensor::scalar(s));
    nodes_.push_back({[x, o](Tape& t) {
        const double g = t.grads_[o].data[0];
        for (double& d : t.grads_[x].data) d += g;
    }});
    return o;
}

void Tape::backward(Id loss) {
    if (nodes_.empty()) throw std::runtime_error("backward: empty tape");
    if (values_[loss].size() != 1)
        throw std::runtime_error("backward: loss must be scalar, got shape " +
                                 shape_str(values_[loss].shape));
    grads_.clear();
    grads_.reserve(values_.size());
    for (const Tensor& v : values_) grads_.push_back(Tensor::zeros(v.shape));
    grads_[loss].data[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->pull(*this);
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        if (!grads_[i].all_finite())
            throw std::runtime_error("backward: non-finite gradient at value " + std::to_string(i));
    }
}

}  // namespace lobster
