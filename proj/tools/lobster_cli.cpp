// Command-line entry points: train / eval / report.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "lobster/checkpoint.hpp"
#include "lobster/data.hpp"
#include "lobster/metrics.hpp"
#include "lobster/model.hpp"
#include "lobster/trainer.hpp"

namespace fs = std::filesystem;
using namespace lobster;

namespace {

struct TrainOptions {
    std::string config_path;
    std::string data_dir;
    std::string arch = "lenet300";
    std::string dataset = "mnist";
    std::string regularizer = "lobster";
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    double eta = 0.1;
    double lambda = 1e-4;
    double beta = 0.0;
    std::size_t pwe = 20;
    double twt = 0.05;
    std::size_t batch_size = 100;
    std::size_t max_epochs = 3000;
    std::size_t val_size = 5000;
    std::size_t synthetic_n = 200;
    std::size_t synthetic_classes = 10;
    bool sparse_checkpoint = false;
};

RegVariant parse_variant(const std::string& s) {
    if (s == "lobster") return RegVariant::Lobster;
    if (s == "l2") return RegVariant::L2;
    if (s == "none") return RegVariant::None;
    throw CLI::ValidationError("--regularizer", "unknown regularizer '" + s + "'");
}

std::string config_text(const TrainOptions& o) {
    std::ostringstream os;
    os << "arch=" << o.arch << "\n"
       << "dataset=" << o.dataset << "\n"
       << "regularizer=" << o.regularizer << "\n"
       << "seed=" << o.seed << "\n"
       << "eta=" << o.eta << "\n"
       << "lambda=" << o.lambda << "\n"
       << "beta=" << o.beta << "\n"
       << "pwe=" << o.pwe << "\n"
       << "twt=" << o.twt << "\n"
       << "batch_size=" << o.batch_size << "\n"
       << "max_epochs=" << o.max_epochs << "\n"
       << "val_size=" << o.val_size << "\n"
       << "synthetic_n=" << o.synthetic_n << "\n"
       << "synthetic_classes=" << o.synthetic_classes << "\n"
       << "normalization=div255\n";
    return os.str();
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

DataSplit load_split(const TrainOptions& o) {
    if (o.dataset == "synthetic") {
        // one generated dataset, carved into test then train/val, so all
        // three splits share the same cluster means
        Dataset all = synthetic_blobs(o.synthetic_n, o.synthetic_classes, 784, o.seed);
        auto [rest, test] = split_train_val(all, all.size() / 5, o.seed + 1);
        auto [tr, val] = split_train_val(rest, rest.size() / 5, o.seed);
        return make_split(tr, val, test);
    }
    if (o.dataset != "mnist" && o.dataset != "fashion-mnist")
        throw CLI::ValidationError("--dataset", "unknown dataset '" + o.dataset + "'");
    if (o.data_dir.empty())
        throw CLI::ValidationError("--data-dir", "required for dataset '" + o.dataset + "'");
    MnistData d = load_mnist_dir(o.data_dir + "/" + o.dataset);
    auto [tr, val] = split_train_val(d.train, o.val_size, o.seed);
    return make_split(tr, val, d.test);
}

/// Applies a key=value config file to `o`. Keys use the flag spelling
/// without the leading dashes; a flag given on the command line wins over
/// the file. Unknown keys are a usage error.
void apply_config_file(const CLI::App* tr, TrainOptions& o) {
    std::ifstream f(o.config_path);
    if (!f.good())
        throw CLI::ValidationError("--config", "cannot open '" + o.config_path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    for (const auto& [key, value] : parse_kv(ss.str())) {
        if (tr->count("--" + key) > 0) continue;  // command line overrides the file
        if (key == "arch") o.arch = value;
        else if (key == "dataset") o.dataset = value;
        else if (key == "regularizer") o.regularizer = value;
        else if (key == "data-dir") o.data_dir = value;
        else if (key == "out") o.out_dir = value;
        else if (key == "seed") o.seed = std::stoull(value);
        else if (key == "eta") o.eta = std::stod(value);
        else if (key == "lambda") o.lambda = std::stod(value);
        else if (key == "beta") o.beta = std::stod(value);
        else if (key == "pwe") o.pwe = std::stoull(value);
        else if (key == "twt") o.twt = std::stod(value);
        else if (key == "batch-size") o.batch_size = std::stoull(value);
        else if (key == "max-epochs") o.max_epochs = std::stoull(value);
        else if (key == "val-size") o.val_size = std::stoull(value);
        else if (key == "synthetic-n") o.synthetic_n = std::stoull(value);
        else if (key == "synthetic-classes") o.synthetic_classes = std::stoull(value);
        else if (key == "sparse-checkpoint") o.sparse_checkpoint = value != "0" && value != "false";
        else
            throw CLI::ValidationError("--config", "unknown key '" + key + "'");
    }
}

Model build_model(const std::string& arch, std::uint64_t seed) {
    if (arch == "lenet300") return build_lenet300(seed);
    if (arch == "lenet5") return build_lenet5(seed);
    throw CLI::ValidationError("--arch", "unknown architecture '" + arch + "'");
}

int run_train(const TrainOptions& o) {
    TrainConfig cfg;
    cfg.reg.variant = parse_variant(o.regularizer);
    cfg.reg.eta = o.eta;
    cfg.reg.lambda = o.lambda;
    cfg.reg.beta = o.beta;
    cfg.pwe = o.pwe;
    cfg.twt = o.twt;
    cfg.batch_size = o.batch_size;
    cfg.max_epochs = o.max_epochs;
    cfg.seed = o.seed;
    cfg.validate();

    DataSplit data = load_split(o);
    Model model = build_model(o.arch, o.seed);

    fs::create_directories(o.out_dir);
    SparsityReport rep = sparsity(model);
    MetricsWriter writer(o.out_dir + "/metrics.csv", o.out_dir + "/metrics.jsonl",
                         rep.layer_names);

    RunResult result = train(std::move(model), data, cfg,
                             [&](const MetricsRow& row) { writer.write(row); });

    save_checkpoint(result.model, o.out_dir + "/model.ckpt", config_text(o), o.sparse_checkpoint);

    SparsityReport final_rep = sparsity(result.model);
    std::printf("epochs=%zu test_top1=%.4f test_loss=%.6f sparsity=%.2f%% flops=%.0f\n",
                result.epochs_run, result.test_top1, result.test_loss, final_rep.overall_pct,
                flops_estimate(result.model));
    std::printf("checkpoint: %s/model.ckpt\nmetrics: %s/metrics.csv\n", o.out_dir.c_str(),
                o.out_dir.c_str());
    return 0;
}

int run_eval(const std::string& ckpt_path, std::string data_dir, std::string dataset,
             std::uint64_t seed_override, bool seed_given) {
    LoadedCheckpoint ck = load_checkpoint(ckpt_path);
    auto kv = parse_kv(ck.config_text);
    if (dataset.empty() && kv.count("dataset")) dataset = kv["dataset"];
    std::uint64_t seed = seed_given ? seed_override
                                    : (kv.count("seed") ? std::stoull(kv["seed"]) : 0);
    std::size_t val_size = kv.count("val_size") ? std::stoull(kv["val_size"]) : 5000;

    TrainOptions o;
    o.dataset = dataset;
    o.data_dir = std::move(data_dir);
    o.seed = seed;
    o.val_size = val_size;
    if (kv.count("synthetic_n")) o.synthetic_n = std::stoull(kv["synthetic_n"]);
    if (kv.count("synthetic_classes")) o.synthetic_classes = std::stoull(kv["synthetic_classes"]);
    DataSplit data = load_split(o);

    EvalResult val = evaluate(ck.model, data.val_images, data.val_labels);
    EvalResult test = evaluate(ck.model, data.test_images, data.test_labels);
    SparsityReport rep = sparsity(ck.model);
    std::printf("val_loss=%.17g val_top1=%.6f\n", val.loss, val.top1_error);
    std::printf("test_loss=%.17g test_top1=%.6f\n", test.loss, test.top1_error);
    std::printf("sparsity=%.4f%% pruned=%zu total=%zu\n", rep.overall_pct, rep.pruned, rep.total);
    std::printf("flops=%.0f (%s)\n", flops_estimate(ck.model), kFlopsConvention);
    return 0;
}

int run_report(const std::string& metrics_path, const std::string& ckpt_path) {
    ParsedMetrics pm = read_metrics_csv(metrics_path);
    if (pm.rows.empty()) {
        std::fprintf(stderr, "report: no data rows in %s\n", metrics_path.c_str());
        return 1;
    }
    const auto& final_row = pm.rows.back();
    auto col = [&](const std::string& name) -> std::string {
        for (std::size_t i = 0; i < pm.header.size(); ++i)
            if (pm.header[i] == name) return i < final_row.size() ? final_row[i] : "";
        return "";
    };
    std::printf("rows=%zu final_stage=%s final_sparsity=%s%% final_val_loss=%s test_top1=%s\n",
                pm.rows.size(), col("stage").c_str(), col("sparsity_pct").c_str(),
                col("val_loss").c_str(), col("test_top1").c_str());
    std::printf("per-layer sparsity (final row):\n");
    for (std::size_t i = 0; i < pm.header.size(); ++i)
        if (pm.header[i].rfind("sparsity_", 0) == 0 && pm.header[i] != "sparsity_pct")
            std::printf("  %-20s %s%%\n", pm.header[i].c_str() + 9,
                        i < final_row.size() ? final_row[i].c_str() : "");

    // Totals are recomputed from the checkpoint masks when one is given,
    // never trusted from the log.
    if (!ckpt_path.empty()) {
        LoadedCheckpoint ck = load_checkpoint(ckpt_path);
        SparsityReport rep = sparsity(ck.model);
        std::printf("checkpoint mask sparsity: %.6f%% (pruned %zu / %zu)\n", rep.overall_pct,
                    rep.pruned, rep.total);
        const double logged = std::stod(col("sparsity_pct"));
        if (std::abs(logged - rep.overall_pct) > 1e-9) {
            std::fprintf(stderr, "report: logged sparsity %.6f%% disagrees with checkpoint %.6f%%\n",
                         logged, rep.overall_pct);
            return 1;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparsity-regularized training toolkit"};
    app.require_subcommand(1);

    TrainOptions o;
    CLI::App* tr = app.add_subcommand("train", "train a model and write checkpoint + metrics");
    tr->add_option("--config", o.config_path, "key=value config file; flags override it");
    tr->add_option("--data-dir", o.data_dir, "directory containing mnist/ and fashion-mnist/ IDX files");
    tr->add_option("--arch", o.arch, "lenet300 | lenet5");
    tr->add_option("--dataset", o.dataset, "mnist | fashion-mnist | synthetic");
    tr->add_option("--regularizer", o.regularizer, "lobster | l2 | none");
    tr->add_option("--out", o.out_dir, "output directory");
    tr->add_option("--seed", o.seed, "run seed");
    tr->add_option("--eta", o.eta, "learning rate");
    tr->add_option("--lambda", o.lambda, "regularization strength");
    tr->add_option("--beta", o.beta, "momentum coefficient");
    tr->add_option("--pwe", o.pwe, "plateau waiting epochs");
    tr->add_option("--twt", o.twt, "thresholding worsening tolerance");
    tr->add_option("--batch-size", o.batch_size, "minibatch size");
    tr->add_option("--max-epochs", o.max_epochs, "global epoch budget");
    tr->add_option("--val-size", o.val_size, "validation split size");
    tr->add_option("--synthetic-n", o.synthetic_n, "synthetic samples per class");
    tr->add_option("--synthetic-classes", o.synthetic_classes, "synthetic class count");
    tr->add_flag("--sparse-checkpoint", o.sparse_checkpoint, "store only nonzero parameters");

    std::string ckpt, ev_data_dir, ev_dataset;
    std::uint64_t ev_seed = 0;
    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    ev->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    ev->add_option("--data-dir", ev_data_dir, "dataset directory");
    ev->add_option("--dataset", ev_dataset, "dataset (default: from checkpoint config)");
    CLI::Option* seed_opt = ev->add_option("--seed", ev_seed, "split seed override");

    std::string metrics_path, report_ckpt;
    CLI::App* rp = app.add_subcommand("report", "summarize a metrics file");
    rp->add_option("--metrics", metrics_path, "metrics.csv path")->required();
    rp->add_option("--checkpoint", report_ckpt, "cross-check totals against this checkpoint");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tr->parsed()) {
            if (!o.config_path.empty()) apply_config_file(tr, o);
            return run_train(o);
        }
        if (ev->parsed()) return run_eval(ckpt, ev_data_dir, ev_dataset, ev_seed, seed_opt->count() > 0);
        if (rp->parsed()) return run_report(metrics_path, report_ckpt);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
