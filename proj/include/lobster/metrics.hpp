#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "lobster/model.hpp"

namespace lobster {

struct MetricsRow;  // trainer.hpp

struct SparsityReport {
    double overall_pct;
    std::vector<std::string> layer_names;   // parametric layers, model order
    std::vector<double> layer_pct;          // weight + bias combined per layer
    std::size_t pruned;
    std::size_t total;
};

SparsityReport sparsity(const Model& model);

/// Inference cost convention (embedded in every report):
///   dense layer: 2*alive(W) + alive(b); conv layer: 2*alive(K)*output
///   positions + alive(b)*output positions; pooling and activations
///   excluded. alive = unmasked coordinates.
extern const char* kFlopsConvention;

double flops_estimate(const Model& model);

/// Per-row CSV + JSON-lines metrics sink. Both files are flushed after
/// every row, so a killed run leaves a parsable prefix.
class MetricsWriter {
public:
    MetricsWriter(const std::string& csv_path, const std::string& json_path,
                  std::vector<std::string> layer_names);
    ~MetricsWriter();
    MetricsWriter(const MetricsWriter&) = delete;
    MetricsWriter& operator=(const MetricsWriter&) = delete;

    void write(const MetricsRow& row);

    static std::vector<std::string> csv_header(const std::vector<std::string>& layer_names);

private:
    std::FILE* csv_ = nullptr;
    std::FILE* json_ = nullptr;
    std::vector<std::string> layer_names_;
};

struct ParsedMetrics {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

ParsedMetrics read_metrics_csv(const std::string& path);

}  // namespace lobster
