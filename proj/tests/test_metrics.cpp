#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "lobster/metrics.hpp"
#include "lobster/trainer.hpp"

using namespace lobster;

namespace {

Model dense_4_2() {
    Model m;
    m.input_shape = {4};
    m.layers.push_back({LayerKind::Dense, "fc", 4, 2});
    m.params.push_back({"fc.w", Tensor::full({4, 2}, 0.5), Mask(8)});
    m.params.push_back({"fc.b", Tensor::full({2}, 0.1), Mask(2)});
    return m;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("sparsity: 9 of 10 pruned is 90%") {
    Model m = dense_4_2();
    for (std::size_t i = 0; i < 8; ++i) m.params[0].mask.prune(i);
    m.params[1].mask.prune(0);
    SparsityReport rep = sparsity(m);
    CHECK(rep.total == 10);
    CHECK(rep.pruned == 9);
    CHECK(rep.overall_pct == doctest::Approx(90.0));
    REQUIRE(rep.layer_names.size() == 1);
    CHECK(rep.layer_names[0] == "fc");
    CHECK(rep.layer_pct[0] == doctest::Approx(90.0));
}

TEST_CASE("flops: dense 4->2 alive = 18, fully weight-pruned = 2") {
    Model m = dense_4_2();
    CHECK(flops_estimate(m) == 18.0);
    for (std::size_t i = 0; i < 8; ++i) m.params[0].mask.prune(i);
    CHECK(flops_estimate(m) == 2.0);
}

TEST_CASE("flops: unpruned LeNet-300 under the documented convention") {
    Model m = build_lenet300(0);
    CHECK(flops_estimate(m) == 2.0 * 266200.0 + 410.0);  // 532810
}

TEST_CASE("flops: pruning a conv filter removes its contribution") {
    Model m = build_lenet5(0);
    const double full = flops_estimate(m);
    CHECK(full > 0.0);
    // prune every weight and bias of conv1 -> drop by 2*500*576 + 20*576
    for (std::size_t pi = 0; pi < 2; ++pi)
        for (std::size_t i = 0; i < m.params[pi].mask.size(); ++i) m.params[pi].mask.prune(i);
    const double cut = flops_estimate(m);
    CHECK(full - cut == 2.0 * 500.0 * 576.0 + 20.0 * 576.0);
}

TEST_CASE("metrics writer: header, row contents, JSON mirror, reread") {
    const std::string csv = "/tmp/lobster_test_metrics.csv";
    const std::string jsl = "/tmp/lobster_test_metrics.jsonl";
    const std::vector<std::string> layers = {"fc1", "fc2"};
    {
        MetricsWriter w(csv, jsl, layers);
        MetricsRow r;
        r.epoch = 1;
        r.stage = "learn";
        r.train_loss = 0.5;
        r.val_loss = 0.25;
        r.sparsity_pct = 12.5;
        r.layer_sparsity_pct = {10.0, 15.0};
        r.flops = 1000.0;
        w.write(r);

        MetricsRow p;
        p.epoch = 0;
        p.stage = "prune";
        p.val_loss = 0.3;
        p.sparsity_pct = 40.0;
        p.layer_sparsity_pct = {35.0, 45.0};
        p.threshold = 0.01;
        p.flops = 800.0;
        w.write(p);
    }

    ParsedMetrics pm = read_metrics_csv(csv);
    CHECK(pm.header == MetricsWriter::csv_header(layers));
    CHECK(pm.header[0] == "epoch");
    CHECK(pm.header[1] == "stage");
    REQUIRE(pm.rows.size() == 2);
    CHECK(pm.rows[0][0] == "1");
    CHECK(pm.rows[0][1] == "learn");
    CHECK(std::stod(pm.rows[0][3]) == 0.25);
    CHECK(pm.rows[1][1] == "prune");
    CHECK(std::stod(pm.rows[1][6]) == 0.01);  // threshold column

    // round-trippable doubles: 1/3 survives the format exactly
    {
        MetricsWriter w(csv, jsl, layers);
        MetricsRow r;
        r.stage = "learn";
        r.val_loss = 1.0 / 3.0;
        r.layer_sparsity_pct = {0.0, 0.0};
        w.write(r);
    }
    ParsedMetrics pm2 = read_metrics_csv(csv);
    CHECK(std::stod(pm2.rows[0][3]) == 1.0 / 3.0);

    const std::string j = slurp(jsl);
    CHECK(j.find("\"stage\"") != std::string::npos);
    CHECK(j.find("flops_convention") != std::string::npos);
    CHECK(j.find("wall") == std::string::npos);  // timings never serialized

    std::remove(csv.c_str());
    std::remove(jsl.c_str());
}

TEST_CASE("identical logs serialize to byte-identical files") {
    auto emit = [](const std::string& csv, const std::string& jsl) {
        MetricsWriter w(csv, jsl, {"fc1"});
        for (int i = 1; i <= 5; ++i) {
            MetricsRow r;
            r.epoch = static_cast<std::size_t>(i);
            r.stage = "learn";
            r.train_loss = 1.0 / i;
            r.val_loss = 2.0 / i;
            r.sparsity_pct = 0.5 * i;
            r.layer_sparsity_pct = {0.5 * i};
            r.flops = 100.0 * i;
            r.wall_seconds = 0.123 * i;  // varies run to run; must not appear
            w.write(r);
        }
    };
    emit("/tmp/lt_a.csv", "/tmp/lt_a.jsonl");
    emit("/tmp/lt_b.csv", "/tmp/lt_b.jsonl");
    CHECK(slurp("/tmp/lt_a.csv") == slurp("/tmp/lt_b.csv"));
    CHECK(slurp("/tmp/lt_a.jsonl") == slurp("/tmp/lt_b.jsonl"));
    for (const char* p : {"/tmp/lt_a.csv", "/tmp/lt_a.jsonl", "/tmp/lt_b.csv", "/tmp/lt_b.jsonl"})
        std::remove(p);
}

TEST_CASE("flops convention string is present and mentions alive counts") {
    std::string conv = kFlopsConvention;
    CHECK(!conv.empty());
    CHECK(conv.find("alive") != std::string::npos);
}
