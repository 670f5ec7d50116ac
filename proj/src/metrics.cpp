#include "lobster/metrics.hpp"

#include <cinttypes>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lobster/trainer.hpp"

namespace lobster {

const char* kFlopsConvention =
    "dense: 2*alive(W) + alive(b); conv: 2*alive(K)*out_positions + alive(b)*out_positions; "
    "pool/activation excluded; alive = unmasked coordinates";

SparsityReport sparsity(const Model& model) {
    SparsityReport rep{};
    std::size_t pi = 0;
    for (const LayerSpec& l : model.layers) {
        if (l.kind != LayerKind::Dense && l.kind != LayerKind::Conv) continue;
        const Param& w = model.params[pi];
        const Param& b = model.params[pi + 1];
        pi += 2;
        const std::size_t total = w.value.size() + b.value.size();
        const std::size_t pruned = w.mask.pruned_count() + b.mask.pruned_count();
        rep.layer_names.push_back(l.name);
        rep.layer_pct.push_back(100.0 * static_cast<double>(pruned) / static_cast<double>(total));
        rep.pruned += pruned;
        rep.total += total;
    }
    rep.overall_pct = rep.total ? 100.0 * static_cast<double>(rep.pruned) / static_cast<double>(rep.total)
                                : 0.0;
    return rep;
}

double flops_estimate(const Model& model) {
    double total = 0.0;
    std::vector<std::size_t> shape = model.input_shape;  // per-sample
    std::size_t pi = 0;
    for (const LayerSpec& l : model.layers) {
        switch (l.kind) {
            case LayerKind::Dense: {
                const Param& w = model.params[pi];
                const Param& b = model.params[pi + 1];
                pi += 2;
                total += 2.0 * static_cast<double>(w.mask.alive_count()) +
                         static_cast<double>(b.mask.alive_count());
                shape = {l.out};
                break;
            }
            case LayerKind::Conv: {
                const Param& w = model.params[pi];
                const Param& b = model.params[pi + 1];
                pi += 2;
                const std::size_t oh = shape[1] - l.ksize + 1, ow = shape[2] - l.ksize + 1;
                const double positions = static_cast<double>(oh * ow);
                total += 2.0 * static_cast<double>(w.mask.alive_count()) * positions +
                         static_cast<double>(b.mask.alive_count()) * positions;
                shape = {l.filters, oh, ow};
                break;
            }
            case LayerKind::Pool:
                shape[1] /= 2;
                shape[2] /= 2;
                break;
            case LayerKind::Flatten:
                shape = {shape_numel(shape)};
                break;
            case LayerKind::Relu:
                break;
        }
    }
    return total;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::string> MetricsWriter::csv_header(const std::vector<std::string>& layer_names) {
    std::vector<std::string> h = {"epoch",    "stage",     "train_loss", "val_loss",
                                  "test_top1", "sparsity_pct", "threshold", "flops"};
    for (const std::string& n : layer_names) h.push_back("sparsity_" + n);
    return h;
}

MetricsWriter::MetricsWriter(const std::string& csv_path, const std::string& json_path,
                             std::vector<std::string> layer_names)
    : layer_names_(std::move(layer_names)) {
    csv_ = std::fopen(csv_path.c_str(), "wb");
    if (!csv_) throw std::runtime_error("MetricsWriter: cannot open " + csv_path);
    json_ = std::fopen(json_path.c_str(), "wb");
    if (!json_) {
        std::fclose(csv_);
        throw std::runtime_error("MetricsWriter: cannot open " + json_path);
    }
    auto header = csv_header(layer_names_);
    for (std::size_t i = 0; i < header.size(); ++i)
        std::fprintf(csv_, "%s%s", i ? "," : "", header[i].c_str());
    std::fprintf(csv_, "\n");
    std::fflush(csv_);
}

MetricsWriter::~MetricsWriter() {
    if (csv_) std::fclose(csv_);
    if (json_) std::fclose(json_);
}

void MetricsWriter::write(const MetricsRow& row) {
    std::fprintf(csv_, "%zu,%s,%s,%s,%s,%s,%s,%s", row.epoch, row.stage.c_str(),
                 fmt_double(row.train_loss).c_str(), fmt_double(row.val_loss).c_str(),
                 fmt_double(row.test_top1).c_str(), fmt_double(row.sparsity_pct).c_str(),
                 fmt_double(row.threshold).c_str(), fmt_double(row.flops).c_str());
    for (double v : row.layer_sparsity_pct) std::fprintf(csv_, ",%s", fmt_double(v).c_str());
    std::fprintf(csv_, "\n");
    std::fflush(csv_);

    std::fprintf(json_,
                 "{\"epoch\":%zu,\"stage\":\"%s\",\"train_loss\":%s,\"val_loss\":%s,"
                 "\"test_top1\":%s,\"sparsity_pct\":%s,\"threshold\":%s,\"flops\":%s",
                 row.epoch, row.stage.c_str(), fmt_double(row.train_loss).c_str(),
                 fmt_double(row.val_loss).c_str(), fmt_double(row.test_top1).c_str(),
                 fmt_double(row.sparsity_pct).c_str(), fmt_double(row.threshold).c_str(),
                 fmt_double(row.flops).c_str());
    std::fprintf(json_, ",\"layer_sparsity_pct\":{");
    for (std::size_t i = 0; i < row.layer_sparsity_pct.size(); ++i)
        std::fprintf(json_, "%s\"%s\":%s", i ? "," : "", layer_names_[i].c_str(),
                     fmt_double(row.layer_sparsity_pct[i]).c_str());
    std::fprintf(json_, "},\"flops_convention\":\"%s\"}\n", kFlopsConvention);
    std::fflush(json_);
}

ParsedMetrics read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_metrics_csv: cannot open " + path);
    ParsedMetrics pm;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (first) {
            pm.header = std::move(fields);
            first = false;
        } else {
            pm.rows.push_back(std::move(fields));
        }
    }
    if (first) throw std::runtime_error("read_metrics_csv: empty file " + path);
    return pm;
}

}  // namespace lobster
