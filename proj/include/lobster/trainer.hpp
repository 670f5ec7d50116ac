#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lobster/model.hpp"
#include "lobster/pruning.hpp"
#include "lobster/regularizer.hpp"

namespace lobster {

struct TrainConfig {
    RegularizerConfig reg;
    std::size_t pwe = 20;          // consecutive non-improving epochs ending a learning stage
    double twt = 0.05;             // relative validation-loss slack for pruning
    std::size_t batch_size = 100;
    std::size_t max_epochs = 3000; // global budget over all learning stages
    std::uint64_t seed = 0;
    // Momentum buffer holds only the loss gradient by default; set to fold
    // the decay displacement into the buffer as well.
    bool couple_decay_with_momentum = false;
    ThresholdSearchOptions search;

    void validate() const;
};

struct MetricsRow {
    std::size_t epoch = 0;         // global epoch index, 1-based; 0 for prune rows
    std::string stage;             // "learn" | "prune" | "final"
    double train_loss = 0.0;
    double val_loss = 0.0;
    double test_top1 = -1.0;       // set on the final row only
    double sparsity_pct = 0.0;
    std::vector<double> layer_sparsity_pct;
    double threshold = -1.0;       // prune rows only
    double flops = 0.0;
    double wall_seconds = 0.0;     // in-memory only, never serialized
};

struct StageTraceEntry {
    double threshold;
    std::size_t pruned_count;
    bool budget_exceeded;
};

struct RunResult {
    Model model;
    std::vector<MetricsRow> log;
    std::vector<StageTraceEntry> stage_trace;
    double test_loss = -1.0;
    double test_top1 = -1.0;
    std::size_t epochs_run = 0;
    bool epoch_budget_hit = false;
};

/// Learning-stage bookkeeping.
struct StageState {
    std::size_t epoch = 0;      // epochs taken within the stage
    double best_loss = 0.0;     // L_hat
    Model best_model;           // N_hat
    std::size_t plateau = 0;    // consecutive non-improving epochs
};

struct DataSplit {
    Tensor train_images;
    std::vector<int> train_labels;
    Tensor val_images;
    std::vector<int> val_labels;
    Tensor test_images;
    std::vector<int> test_labels;
};

using EpochObserver = std::function<void(const Model&, const MetricsRow&)>;
using RowSink = std::function<void(const MetricsRow&)>;

/// One learning stage: epochs of minibatch updates until the validation
/// loss fails to improve for cfg.pwe epochs in a row, or the shared epoch
/// budget runs out. `val_loss` is evaluated once per epoch. Returns the
/// best snapshot; `state` carries L_hat out for the pruning stage.
/// `epochs_left` is decremented as epochs are consumed.
Model learning_stage(Model model, const Tensor& train_images,
                     const std::vector<int>& train_labels,
                     const std::function<double(const Model&)>& val_loss,
                     const TrainConfig& cfg, StageState& state, std::size_t& epochs_left,
                     std::mt19937_64& shuffle_rng, RunResult* result = nullptr,
                     const RowSink& sink = nullptr, const EpochObserver& observer = nullptr);

struct PruneOutcome {
    Model model;
    std::size_t pruned_count;
    double threshold;
    bool budget_exceeded;
};

/// Loss boundary from L_hat and TWT, threshold search, permanent pruning.
PruneOutcome pruning_stage(const Model& best, double best_loss,
                           const std::function<double(const Model&)>& val_loss,
                           const TrainConfig& cfg);

/// Alternates learning and pruning stages until a pruning stage removes
/// nothing (or the epoch budget runs out), then evaluates the test split.
RunResult train(Model model, const DataSplit& data, const TrainConfig& cfg,
                const RowSink& sink = nullptr, const EpochObserver& observer = nullptr);

}  // namespace lobster
