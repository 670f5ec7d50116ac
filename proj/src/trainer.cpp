#include "lobster/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lobster/metrics.hpp"

namespace lobster {

void TrainConfig::validate() const {
    reg.validate();
    if (pwe < 1) throw std::invalid_argument("TrainConfig: PWE must be >= 1");
    if (twt < 0.0) throw std::invalid_argument("TrainConfig: TWT must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
}

namespace {

// Per-stage optimizer state. The momentum buffer accumulates only the loss
// gradient unless couple_decay_with_momentum is set.
struct Optimizer {
    const TrainConfig& cfg;
    std::vector<Tensor> velocity;

    explicit Optimizer(const TrainConfig& cfg_, const Model& model) : cfg(cfg_) {
        if (cfg.reg.beta != 0.0)
            for (const Param& p : model.params) velocity.push_back(Tensor::zeros(p.value.shape));
    }

    void apply(Param& p, Tensor& g, std::size_t param_idx) {
        // pruned coordinates receive no update
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!p.mask.alive(i)) g.data[i] = 0.0;

        const RegularizerConfig& r = cfg.reg;
        if (r.beta == 0.0) {
            switch (r.variant) {
                case RegVariant::Lobster: lobster_step(p.value, g, r, p.mask); break;
                case RegVariant::L2: l2_step(p.value, g, r, p.mask); break;
                case RegVariant::None: sgd_step(p.value, g, r, p.mask); break;
            }
            return;
        }

        Tensor& v = velocity[param_idx];
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!p.mask.alive(i)) { v.data[i] = 0.0; p.value.data[i] = 0.0; continue; }
            const double gi = g.data[i];
            const double wi = p.value.data[i];
            double decay = 0.0;
            if (r.variant == RegVariant::Lobster) {
                const double s = std::fabs(gi);
                if (s < 1.0) decay = r.lambda * wi * (1.0 - s);
            } else if (r.variant == RegVariant::L2) {
                decay = r.lambda * wi;
            }
            double vel = r.beta * v.data[i] + gi;
            if (cfg.couple_decay_with_momentum) vel += decay / r.eta;
            v.data[i] = vel;
            double next = wi - r.eta * vel;
            if (!cfg.couple_decay_with_momentum) next -= decay;
            if (!std::isfinite(next)) throw std::runtime_error("optimizer: non-finite update");
            p.value.data[i] = next;
        }
    }
};

double run_epoch(Model& model, Optimizer& opt, const Tensor& images,
                 const std::vector<int>& labels, std::size_t batch_size,
                 std::mt19937_64& shuffle_rng) {
    const std::size_t n = images.shape[0];
    const std::size_t per = images.size() / n;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t m = std::min(batch_size, n - start);
        Batch batch;
        batch.images = Tensor::zeros({m, per});
        batch.labels.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t src = order[start + i];
            std::copy_n(images.data.begin() + src * per, per,
                        batch.images.data.begin() + i * per);
            batch.labels[i] = labels[src];
        }
        Tape tape;
        std::vector<Tape::Id> param_ids;
        Tape::Id loss = model.forward_loss(tape, batch, param_ids);
        tape.backward(loss);
        loss_sum += tape.value(loss).data[0] * static_cast<double>(m);
        for (std::size_t pi = 0; pi < model.params.size(); ++pi) {
            Tensor g = tape.grad(param_ids[pi]);
            opt.apply(model.params[pi], g, pi);
        }
        model.repin();
    }
    return loss_sum / static_cast<double>(n);
}

MetricsRow make_learn_row(const Model& model, std::size_t epoch, double train_loss,
                          double val_loss, double wall_seconds) {
    SparsityReport rep = sparsity(model);
    MetricsRow row;
    row.epoch = epoch;
    row.stage = "learn";
    row.train_loss = train_loss;
    row.val_loss = val_loss;
    row.sparsity_pct = rep.overall_pct;
    row.layer_sparsity_pct = rep.layer_pct;
    row.flops = flops_estimate(model);
    row.wall_seconds = wall_seconds;
    return row;
}

void emit(RunResult* result, const RowSink& sink, const MetricsRow& row) {
    if (result) result->log.push_back(row);
    if (sink) sink(row);
}

}  // namespace

Model learning_stage(Model model, const Tensor& train_images,
                     const std::vector<int>& train_labels,
                     const std::function<double(const Model&)>& val_loss,
                     const TrainConfig& cfg, StageState& state, std::size_t& epochs_left,
                     std::mt19937_64& shuffle_rng, RunResult* result, const RowSink& sink,
                     const EpochObserver& observer) {
    state.epoch = 0;
    state.plateau = 0;
    state.best_model = model;
    state.best_loss = val_loss(model);

    Optimizer opt(cfg, model);
    const std::size_t epoch_base = result ? result->epochs_run : 0;
    while (epochs_left > 0) {
        const auto t0 = std::chrono::steady_clock::now();
        const double train_loss =
            run_epoch(model, opt, train_images, train_labels, cfg.batch_size, shuffle_rng);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        --epochs_left;
        ++state.epoch;
        if (result) ++result->epochs_run;

        const double l_e = val_loss(model);
        MetricsRow row = make_learn_row(model, epoch_base + state.epoch, train_loss, l_e, wall);
        emit(result, sink, row);
        if (observer) observer(model, row);

        if (l_e < state.best_loss) {
            state.best_loss = l_e;
            state.best_model = model;
            state.plateau = 0;
        } else {
            ++state.plateau;
        }
        if (state.plateau >= cfg.pwe) return state.best_model;
    }
    if (result) result->epoch_budget_hit = true;
    return state.best_model;
}

PruneOutcome pruning_stage(const Model& best, double best_loss,
                           const std::function<double(const Model&)>& val_loss,
                           const TrainConfig& cfg) {
    const double l_b = loss_boundary(best_loss, cfg.twt);
    ThresholdSearchResult search = search_threshold(best, val_loss, l_b, cfg.search);
    PruneOutcome out{best, 0, search.threshold, search.budget_exceeded};
    out.pruned_count = apply_threshold(out.model, search.threshold);
    return out;
}

RunResult train(Model model, const DataSplit& data, const TrainConfig& cfg, const RowSink& sink,
                const EpochObserver& observer) {
    cfg.validate();
    if (data.train_images.shape[0] == 0 || data.val_images.shape[0] == 0)
        throw std::invalid_argument("train: train and validation splits must be nonempty");

    RunResult result;
    std::mt19937_64 shuffle_rng(cfg.seed);
    auto val_loss = [&](const Model& m) {
        return evaluate(m, data.val_images, data.val_labels).loss;
    };

    std::size_t epochs_left = cfg.max_epochs;
    while (true) {
        StageState state;
        model = learning_stage(std::move(model), data.train_images, data.train_labels, val_loss,
                               cfg, state, epochs_left, shuffle_rng, &result, sink, observer);

        PruneOutcome pruned = pruning_stage(model, state.best_loss, val_loss, cfg);
        model = std::move(pruned.model);
        result.stage_trace.push_back({pruned.threshold, pruned.pruned_count,
                                      pruned.budget_exceeded});

        SparsityReport rep = sparsity(model);
        MetricsRow row;
        row.epoch = result.epochs_run;
        row.stage = "prune";
        row.val_loss = val_loss(model);
        row.sparsity_pct = rep.overall_pct;
        row.layer_sparsity_pct = rep.layer_pct;
        row.threshold = pruned.threshold;
        row.flops = flops_estimate(model);
        emit(&result, sink, row);
        if (observer) observer(model, row);

        if (pruned.pruned_count == 0 || epochs_left == 0) break;
    }

    EvalResult test = evaluate(model, data.test_images, data.test_labels);
    result.test_loss = test.loss;
    result.test_top1 = test.top1_error;
    SparsityReport rep = sparsity(model);
    MetricsRow final_row;
    final_row.epoch = result.epochs_run;
    final_row.stage = "final";
    final_row.val_loss = val_loss(model);
    final_row.test_top1 = test.top1_error;
    final_row.sparsity_pct = rep.overall_pct;
    final_row.layer_sparsity_pct = rep.layer_pct;
    final_row.flops = flops_estimate(model);
    emit(&result, sink, final_row);

    result.model = std::move(model);
    return result;
}

}  // namespace lobster
