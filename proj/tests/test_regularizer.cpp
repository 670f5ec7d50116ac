#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

#include "lobster/regularizer.hpp"

using namespace lobster;

namespace {

RegularizerConfig cfg_with(double eta, double lambda, RegVariant v = RegVariant::Lobster) {
    RegularizerConfig c;
    c.variant = v;
    c.eta = eta;
    c.lambda = lambda;
    return c;
}

}  // namespace

TEST_CASE("sensitivity is |g|; non-finite gradients are rejected") {
    Tensor g({3}, {0.0, -0.3, 2.0});
    Tensor s = sensitivity(g);
    CHECK(s.data[0] == 0.0);
    CHECK(s.data[1] == doctest::Approx(0.3));
    CHECK(s.data[2] == 2.0);

    Tensor bad({1}, {std::nan("")});
    try {
        sensitivity(bad, "fc1");
        FAIL("expected error naming the layer");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("fc1") != std::string::npos);
    }
}

TEST_CASE("gate: P = 1 below 1, 0 at and above 1") {
    CHECK(gate_scalar(0.5) == 1.0);
    CHECK(gate_scalar(1.0) == 0.0);
    CHECK(gate_scalar(2.0) == 0.0);
    Tensor s({3}, {0.5, 1.0, 2.0});
    Tensor p = gate(s);
    CHECK(p.data[0] == 1.0);
    CHECK(p.data[1] == 0.0);
    CHECK(p.data[2] == 0.0);
}

TEST_CASE("lobster_step worked examples") {
    Mask all(1);
    SUBCASE("zero gradient: pure gated decay") {
        Tensor w({1}, {0.5});
        lobster_step(w, Tensor({1}, {0.0}), cfg_with(0.1, 1e-4), all);
        CHECK(w.data[0] == doctest::Approx(0.49995).epsilon(1e-12));
    }
    SUBCASE("high sensitivity: plain gradient step") {
        Tensor w({1}, {0.5});
        lobster_step(w, Tensor({1}, {2.0}), cfg_with(0.1, 1e-4), all);
        CHECK(w.data[0] == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("mid sensitivity: both terms") {
        Tensor w({1}, {-0.2});
        lobster_step(w, Tensor({1}, {0.5}), cfg_with(0.1, 0.01), all);
        CHECK(w.data[0] == doctest::Approx(-0.249).epsilon(1e-12));
    }
}

TEST_CASE("l2_step worked examples") {
    Mask all(1);
    SUBCASE("pure decay") {
        Tensor w({1}, {1.0});
        l2_step(w, Tensor({1}, {0.0}), cfg_with(0.1, 0.1, RegVariant::L2), all);
        CHECK(w.data[0] == doctest::Approx(0.9).epsilon(1e-12));
    }
    SUBCASE("lambda=0 equals the plain step") {
        Tensor w({1}, {0.5});
        l2_step(w, Tensor({1}, {2.0}), cfg_with(0.1, 0.0, RegVariant::L2), all);
        CHECK(w.data[0] == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("ungated decay differs from the gated rule at |g| >= 1") {
        Tensor w({1}, {0.5});
        l2_step(w, Tensor({1}, {2.0}), cfg_with(0.1, 0.01, RegVariant::L2), all);
        CHECK(w.data[0] == doctest::Approx(0.295).epsilon(1e-12));
    }
}

TEST_CASE("equivalent_lr worked examples") {
    CHECK(equivalent_lr_scalar(1.0, 0.5, cfg_with(0.1, 0.01)) == doctest::Approx(0.09));
    CHECK(equivalent_lr_scalar(-1.0, 0.5, cfg_with(0.1, 0.01)) == doctest::Approx(0.11));
    CHECK(equivalent_lr_scalar(3.0, 1.5, cfg_with(0.1, 0.01)) == 0.1);
    CHECK(equivalent_lr_scalar(-7.0, 1.5, cfg_with(0.1, 0.01)) == 0.1);
    // sign(0) = 0: eta~ = eta when g = 0
    CHECK(equivalent_lr_scalar(5.0, 0.0, cfg_with(0.1, 0.01)) == 0.1);
}

TEST_CASE("gate consistency: |g| >= 1 is a plain gradient step, bitwise") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> wd(-2, 2), gd(1.0, 5.0);
    const std::size_t n = 256;
    Tensor w = Tensor::zeros({n}), g = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
        w.data[i] = wd(rng);
        g.data[i] = (i % 2 ? 1 : -1) * gd(rng);
    }
    Mask all(n);
    Tensor w1 = w, w2 = w;
    lobster_step(w1, g, cfg_with(0.1, 0.01), all);
    sgd_step(w2, g, cfg_with(0.1, 0.01), all);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::memcmp(&w1.data[i], &w2.data[i], 8) == 0);
}

TEST_CASE("lambda = 0 collapses all variants to the same step, bitwise") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> wd(-2, 2), gd(-2, 2);
    const std::size_t n = 256;
    Tensor w = Tensor::zeros({n}), g = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
        w.data[i] = wd(rng);
        g.data[i] = gd(rng);
    }
    Mask all(n);
    Tensor w1 = w, w2 = w, w3 = w;
    lobster_step(w1, g, cfg_with(0.1, 0.0), all);
    l2_step(w2, g, cfg_with(0.1, 0.0, RegVariant::L2), all);
    sgd_step(w3, g, cfg_with(0.1, 0.0, RegVariant::None), all);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::memcmp(&w1.data[i], &w2.data[i], 8) == 0);
        CHECK(std::memcmp(&w1.data[i], &w3.data[i], 8) == 0);
    }
}

TEST_CASE("decay displacement bound and sign preservation") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> wd(-3, 3), gd(-2, 2);
    auto cfg = cfg_with(0.0001, 0.5);  // tiny eta isolates the decay term
    for (int k = 0; k < 2000; ++k) {
        const double w0 = wd(rng), g0 = gd(rng);
        Tensor w({1}, {w0});
        Mask all(1);
        lobster_step(w, Tensor({1}, {0.0}), cfg, all);  // g=0: decay only
        const double displacement = w.data[0] - w0;
        CHECK(std::fabs(displacement) <= cfg.lambda * std::fabs(w0) + 1e-15);
        // decay alone never flips the sign (lambda < 1)
        if (w0 != 0.0) CHECK(w.data[0] * w0 >= 0.0);
        (void)g0;
    }
}

TEST_CASE("pinned coordinates stay exactly zero under every variant") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> gd(-2, 2);
    const std::size_t n = 64;
    Mask mask(n);
    for (std::size_t i = 0; i < n; i += 2) mask.prune(i);
    for (auto variant : {RegVariant::Lobster, RegVariant::L2, RegVariant::None}) {
        Tensor w = Tensor::zeros({n});
        for (std::size_t i = 0; i < n; ++i) w.data[i] = mask.alive(i) ? 0.5 : 0.0;
        for (int step = 0; step < 50; ++step) {
            Tensor g = Tensor::zeros({n});
            for (double& v : g.data) v = gd(rng);
            auto c = cfg_with(0.05, 0.01, variant);
            switch (variant) {
                case RegVariant::Lobster: lobster_step(w, g, c, mask); break;
                case RegVariant::L2: l2_step(w, g, c, mask); break;
                case RegVariant::None: sgd_step(w, g, c, mask); break;
            }
        }
        for (std::size_t i = 0; i < n; i += 2) CHECK(w.data[i] == 0.0);
    }
}

TEST_CASE("Table-1 property: eta~ vs eta over random tuples") {
    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> wd(-5, 5), gd(-3, 3), etad(0.01, 1.0), lamd(0.0, 0.9);
    for (int k = 0; k < 20000; ++k) {
        const double w = wd(rng), g = gd(rng);
        auto cfg = cfg_with(etad(rng), lamd(rng));
        const double et = equivalent_lr_scalar(w, g, cfg);
        if (std::fabs(g) >= 1.0) {
            CHECK(et == cfg.eta);
        } else if (g != 0.0 && w != 0.0) {
            if ((g > 0) == (w > 0))
                CHECK(et <= cfg.eta);
            else
                CHECK(et >= cfg.eta);
        }
    }
}

TEST_CASE("config validation") {
    RegularizerConfig c;
    c.lambda = -1;
    CHECK_THROWS(c.validate());
    c = RegularizerConfig{};
    c.eta = 0;
    CHECK_THROWS(c.validate());
    c = RegularizerConfig{};
    c.beta = 1.0;
    CHECK_THROWS(c.validate());
    c = RegularizerConfig{};
    c.lambda = 1.5;
    CHECK_THROWS(c.validate());
}
