#include "lobster/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lobster {

std::size_t Mask::alive_count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const Param& p : params) n += p.value.size();
    return n;
}

std::size_t Model::alive_count() const {
    std::size_t n = 0;
    for (const Param& p : params) n += p.mask.alive_count();
    return n;
}

void Model::repin() {
    for (Param& p : params)
        for (std::size_t i = 0; i < p.value.size(); ++i)
            if (!p.mask.alive(i)) p.value.data[i] = 0.0;
}

namespace {

Tensor masked(const Param& p) {
    Tensor t = p.value;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!p.mask.alive(i)) t.data[i] = 0.0;
    return t;
}

Tensor reshape_input(const Tensor& images, const std::vector<std::size_t>& per_sample) {
    const std::size_t n = images.shape[0];
    std::size_t want = shape_numel(per_sample);
    if (images.size() / n != want)
        throw std::invalid_argument("model input: expected " + std::to_string(want) +
                                    " values per sample, got shape " + shape_str(images.shape));
    Tensor x = images;
    x.shape = {n};
    x.shape.insert(x.shape.end(), per_sample.begin(), per_sample.end());
    return x;
}

}  // namespace

Tensor Model::forward(const Tensor& images) const {
    Tensor x = reshape_input(images, input_shape);
    std::size_t pi = 0;
    for (const LayerSpec& l : layers) {
        switch (l.kind) {
            case LayerKind::Dense: {
                Tensor w = masked(params[pi]);
                Tensor b = masked(params[pi + 1]);
                pi += 2;
                x = kernels::add_bias(kernels::matmul(x, w), b);
                break;
            }
            case LayerKind::Conv: {
                Tensor k = masked(params[pi]);
                Tensor b = masked(params[pi + 1]);
                pi += 2;
                x = kernels::conv2d(x, k, b);
                break;
            }
            case LayerKind::Relu: x = kernels::relu(x); break;
            case LayerKind::Pool: x = kernels::maxpool2(x); break;
            case LayerKind::Flatten: x = kernels::flatten(x); break;
        }
    }
    return x;
}

Tape::Id Model::forward_loss(Tape& tape, const Batch& batch,
                             std::vector<Tape::Id>& param_ids) const {
    param_ids.clear();
    Tape::Id x = tape.leaf(reshape_input(batch.images, input_shape));
    std::size_t pi = 0;
    auto push_param = [&](const Param& p) {
        Tape::Id id = tape.leaf(masked(p));
        param_ids.push_back(id);
        return id;
    };
    for (const LayerSpec& l : layers) {
        switch (l.kind) {
            case LayerKind::Dense: {
                Tape::Id w = push_param(params[pi]);
                Tape::Id b = push_param(params[pi + 1]);
                pi += 2;
                x = tape.add_bias(tape.matmul(x, w), b);
                break;
            }
            case LayerKind::Conv: {
                Tape::Id k = push_param(params[pi]);
                Tape::Id b = push_param(params[pi + 1]);
                pi += 2;
                x = tape.conv2d(x, k, b);
                break;
            }
            case LayerKind::Relu: x = tape.relu(x); break;
            case LayerKind::Pool: x = tape.maxpool2(x); break;
            case LayerKind::Flatten: x = tape.flatten(x); break;
        }
    }
    return tape.softmax_cross_entropy(x, batch.labels);
}

EvalResult evaluate(const Model& model, const Tensor& images, const std::vector<int>& labels,
                    std::size_t batch_size) {
    const std::size_t n = images.shape[0];
    if (n == 0 || labels.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (n != labels.size()) throw std::invalid_argument("evaluate: images/labels size mismatch");
    const std::size_t per = images.size() / n;
    double loss_sum = 0.0;
    std::size_t wrong = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t m = std::min(batch_size, n - start);
        Tensor chunk({m, per}, std::vector<double>(images.data.begin() + start * per,
                                                   images.data.begin() + (start + m) * per));
        Tensor logits = model.forward(chunk);
        require_finite(logits, "evaluate forward");
        std::vector<int> lab(labels.begin() + start, labels.begin() + start + m);
        loss_sum += kernels::softmax_cross_entropy(logits, lab) * static_cast<double>(m);
        const std::size_t C = logits.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = logits.data.data() + i * C;
            std::size_t best = 0;
            for (std::size_t c = 1; c < C; ++c)
                if (row[c] > row[best]) best = c;  // lowest index wins ties
            if (static_cast<int>(best) != lab[i]) ++wrong;
        }
    }
    return {loss_sum / static_cast<double>(n),
            static_cast<double>(wrong) / static_cast<double>(n)};
}

namespace {

// uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
Tensor glorot_init(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                   std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = dist(rng);
    return t;
}

void add_dense(Model& m, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng) {
    m.layers.push_back({LayerKind::Dense, name, in, out, 0, 0, 0});
    m.params.push_back({name + ".w", glorot_init({in, out}, in, out, rng), Mask(in * out)});
    m.params.push_back({name + ".b", Tensor::zeros({out}), Mask(out)});
}

void add_conv(Model& m, const std::string& name, std::size_t channels, std::size_t filters,
              std::size_t ksize, std::mt19937_64& rng) {
    m.layers.push_back({LayerKind::Conv, name, 0, 0, filters, ksize, channels});
    const std::size_t fan_in = channels * ksize * ksize;
    const std::size_t fan_out = filters * ksize * ksize;
    m.params.push_back({name + ".w",
                        glorot_init({filters, channels, ksize, ksize}, fan_in, fan_out, rng),
                        Mask(filters * channels * ksize * ksize)});
    m.params.push_back({name + ".b", Tensor::zeros({filters}), Mask(filters)});
}

}  // namespace

Model build_lenet300(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Model m;
    m.input_shape = {784};
    add_dense(m, "fc1", 784, 300, rng);
    m.layers.push_back({LayerKind::Relu, "relu1"});
    add_dense(m, "fc2", 300, 100, rng);
    m.layers.push_back({LayerKind::Relu, "relu2"});
    add_dense(m, "fc3", 100, 10, rng);
    if (m.param_count() != 266610)
        throw std::logic_error("build_lenet300: parameter count self-check failed");
    return m;
}

Model build_lenet5(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Model m;
    m.input_shape = {1, 28, 28};
    add_conv(m, "conv1", 1, 20, 5, rng);
    m.layers.push_back({LayerKind::Relu, "relu1"});
    m.layers.push_back({LayerKind::Pool, "pool1"});
    add_conv(m, "conv2", 20, 50, 5, rng);
    m.layers.push_back({LayerKind::Relu, "relu2"});
    m.layers.push_back({LayerKind::Pool, "pool2"});
    m.layers.push_back({LayerKind::Flatten, "flatten"});
    add_dense(m, "fc1", 800, 500, rng);
    m.layers.push_back({LayerKind::Relu, "relu3"});
    add_dense(m, "fc2", 500, 10, rng);
    if (m.param_count() != 431080)
        throw std::logic_error("build_lenet5: parameter count self-check failed");
    return m;
}

}  // namespace lobster
