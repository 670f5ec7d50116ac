#include <doctest.h>

#include <cmath>

#include "lobster/data.hpp"
#include "lobster/metrics.hpp"
#include "lobster/model.hpp"
#include "support/oracles.hpp"

using namespace lobster;

TEST_CASE("LeNet-300 builder: parameter count and determinism") {
    Model a = build_lenet300(0);
    CHECK(a.param_count() == 266610);
    CHECK(a.alive_count() == 266610);

    Model b = build_lenet300(0);
    for (std::size_t pi = 0; pi < a.params.size(); ++pi)
        for (std::size_t i = 0; i < a.params[pi].value.size(); ++i)
            REQUIRE(a.params[pi].value.data[i] == b.params[pi].value.data[i]);

    Model c = build_lenet300(1);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params[0].value.size() && !any_diff; ++i)
        any_diff = a.params[0].value.data[i] != c.params[0].value.data[i];
    CHECK(any_diff);
}

TEST_CASE("LeNet-300 forward on a zero image gives all-zero logits") {
    Model m = build_lenet300(3);
    Tensor logits = m.forward(Tensor::zeros({1, 784}));
    for (double v : logits.data) CHECK(v == 0.0);
}

TEST_CASE("LeNet-5 builder: 20 first-layer filters, 431080 parameters, output shape") {
    Model m = build_lenet5(0);
    CHECK(m.layers[0].kind == LayerKind::Conv);
    CHECK(m.layers[0].filters == 20);
    CHECK(m.param_count() == 431080);

    Tensor logits = m.forward(Tensor::full({2, 784}, 0.5));
    CHECK(logits.shape == std::vector<std::size_t>{2, 10});
}

TEST_CASE("evaluate: uniform logits lose ln(10), perfect logits err 0") {
    // single dense layer with zero weights: logits are the bias path
    Model m;
    m.input_shape = {4};
    m.layers.push_back({LayerKind::Dense, "fc", 4, 10});
    m.params.push_back({"fc.w", Tensor::zeros({4, 10}), Mask(40)});
    m.params.push_back({"fc.b", Tensor::zeros({10}), Mask(10)});

    Tensor imgs = Tensor::full({5, 4}, 1.0);
    std::vector<int> labels = {0, 1, 2, 3, 4};
    EvalResult r = evaluate(m, imgs, labels);
    CHECK(r.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    // argmax tie-break: lowest class index wins, so only label 0 is right
    CHECK(r.top1_error == doctest::Approx(0.8));

    // bias spikes make each sample's label the argmax
    Model m2 = m;
    m2.params[1].value.data[7] = 50.0;
    std::vector<int> lab7(5, 7);
    EvalResult r2 = evaluate(m2, imgs, lab7);
    CHECK(r2.top1_error == 0.0);

    CHECK_THROWS(evaluate(m, imgs, {}));
}

TEST_CASE("untrained seeded LeNet-300 on MNIST test set: error in regression band") {
    if (!testsupport::have_mnist()) {
        MESSAGE("mnist not found under ", testsupport::data_dir(), "; skipping");
        return;
    }
    MnistData d = load_mnist_dir(testsupport::data_dir() + "/mnist");
    Model m = build_lenet300(0);
    EvalResult r = evaluate(m, d.test.images, d.test.labels);
    CHECK(r.top1_error >= 0.80);
    CHECK(r.top1_error <= 0.95);
}

TEST_CASE("mask transparency: pruning equals zeroing, bitwise") {
    Model a = build_lenet300(9);
    Model b = a;
    // a: prune a stripe of fc1 via the mask; b: zero the same weights, mask alive
    for (std::size_t i = 0; i < a.params[0].value.size(); i += 3) {
        a.params[0].mask.prune(i);
        b.params[0].value.data[i] = 0.0;
    }
    Tensor x = Tensor::full({2, 784}, 0.125);
    Tensor la = a.forward(x);
    Tensor lb = b.forward(x);
    for (std::size_t i = 0; i < la.size(); ++i) CHECK(la.data[i] == lb.data[i]);
}

TEST_CASE("per-layer sparsity sums to the global count") {
    Model m = build_lenet5(2);
    for (std::size_t pi = 0; pi < m.params.size(); ++pi)
        for (std::size_t i = 0; i < m.params[pi].value.size(); i += 7) m.params[pi].mask.prune(i);
    m.repin();
    SparsityReport rep = sparsity(m);
    CHECK(rep.total == m.param_count());
    CHECK(rep.pruned == m.param_count() - m.alive_count());
    // recombine layer percentages into the global count
    std::size_t pi = 0, li = 0;
    double pruned_from_layers = 0.0;
    for (const LayerSpec& l : m.layers) {
        if (l.kind != LayerKind::Dense && l.kind != LayerKind::Conv) continue;
        CHECK(rep.layer_names[li] == l.name);
        const std::size_t layer_total =
            m.params[pi].value.size() + m.params[pi + 1].value.size();
        pruned_from_layers += rep.layer_pct[li] / 100.0 * static_cast<double>(layer_total);
        pi += 2;
        ++li;
    }
    CHECK(pruned_from_layers == doctest::Approx(static_cast<double>(rep.pruned)));
}
