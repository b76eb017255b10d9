// decamp: deep embedded clustering aided by measure propagation.
//
// Subcommands cover the full pipeline: tf-idf feature extraction, affinity
// graph construction, autoencoder pretraining, clustering runs, evaluation,
// and multi-seed experiments.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "decamp/corpus.hpp"
#include "decamp/errors.hpp"
#include "decamp/harness.hpp"

namespace {

using namespace decamp;

// Shared flags mapped straight onto RunConfig keys; config file first, then
// explicit flags override.
struct CliOptions {
    std::string config_file;
    std::vector<std::string> overrides;  // key=value pairs
    RunConfig cfg;
};

void add_common(CLI::App* cmd, CliOptions& opts) {
    cmd->add_option("--config", opts.config_file, "flat key = value config file");
    cmd->add_option("--set", opts.overrides, "extra key=value overrides")->take_all();
    cmd->add_option("--profile", opts.cfg.profile,
                    "dataset preset: searchsnippets|stackoverflow|biomedical|blobs");
    cmd->add_option("--dataset", opts.cfg.dataset, "corpus text file or feature matrix (.dcm)");
    cmd->add_option("--labels", opts.cfg.labels, "ground-truth labels, one integer per line");
    cmd->add_option("--stopwords", opts.cfg.stopwords, "stopword list, one word per line");
    cmd->add_option("--algorithm", opts.cfg.algorithm, "dec|dece2e|decamp|kmeans");
    cmd->add_option("--graph-cache", opts.cfg.graph_cache, "graph file to reuse or create");
    cmd->add_option("--checkpoint", opts.cfg.checkpoint, "pretrained autoencoder checkpoint");
    cmd->add_option("--out", opts.cfg.out_dir, "output directory");
    cmd->add_option("--seed", opts.cfg.seeds, "seed list")->take_all();
}

RunConfig finalize(CliOptions& opts) {
    RunConfig cfg;
    if (!opts.cfg.profile.empty()) apply_profile(cfg, opts.cfg.profile);
    if (!opts.config_file.empty()) load_config_file(cfg, opts.config_file);
    // Flag values win over profile and file.
    RunConfig defaults;
    if (opts.cfg.dataset != defaults.dataset) cfg.dataset = opts.cfg.dataset;
    if (opts.cfg.labels != defaults.labels) cfg.labels = opts.cfg.labels;
    if (opts.cfg.stopwords != defaults.stopwords) cfg.stopwords = opts.cfg.stopwords;
    if (opts.cfg.algorithm != defaults.algorithm) cfg.algorithm = opts.cfg.algorithm;
    if (opts.cfg.graph_cache != defaults.graph_cache) cfg.graph_cache = opts.cfg.graph_cache;
    if (opts.cfg.checkpoint != defaults.checkpoint) cfg.checkpoint = opts.cfg.checkpoint;
    if (opts.cfg.out_dir != defaults.out_dir) cfg.out_dir = opts.cfg.out_dir;
    if (opts.cfg.seeds != defaults.seeds) cfg.seeds = opts.cfg.seeds;
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw FormatError("--set expects key=value, got: " + kv);
        apply_key_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

int cmd_features(const RunConfig& cfg, const std::string& out_path) {
    if (cfg.dataset.empty()) throw FormatError("features: --dataset is required");
    const StopwordSet stop = cfg.stopwords.empty() ? StopwordSet{} : load_stopwords(cfg.stopwords);
    const auto docs = load_corpus(cfg.dataset, stop);
    const auto vocab = build_vocabulary(docs, cfg.max_terms);
    const FeatureMatrix features = tfidf_features(docs, vocab);
    save_matrix(out_path, features, features_config_hash(cfg));
    std::cout << "wrote " << features.rows() << " x " << features.cols() << " features to "
              << out_path << "\n";
    return kExitOk;
}

int cmd_graph(const RunConfig& cfg, const std::string& out_path) {
    const ExperimentData data = load_experiment_data(cfg);
    const SparseAffinity graph = build_affinity(data.features, cfg.m, cfg.alpha);
    save_graph(out_path, graph, cfg.m, cfg.alpha, graph_config_hash(cfg));
    std::cout << "wrote graph with " << graph.nnz() << " edges to " << out_path << "\n";
    return kExitOk;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& out_path) {
    const ExperimentData data = load_experiment_data(cfg);
    const AutoencoderResult result =
        pretrain_autoencoder(data.features, cfg.autoencoder_config(cfg.seeds.front()));
    save_checkpoint(out_path, result.encoder, result.decoder, checkpoint_config_hash(cfg));
    std::cout << "pretrained autoencoder: mse " << result.initial_mse << " -> "
              << result.final_mse << ", checkpoint " << out_path << "\n";
    return kExitOk;
}

int cmd_cluster(RunConfig cfg) {
    cfg.seeds.resize(1);
    const RunReport report = run_experiment(cfg);
    std::cout << "ACC " << format_percent(report.acc) << "  NMI " << format_percent(report.nmi)
              << "  ARI " << format_percent(report.ari) << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& truth_path, const std::string& pred_path) {
    const LabelVector truth = load_labels(truth_path);
    const LabelVector pred = load_labels(pred_path);
    std::cout << "ACC " << accuracy(truth, pred) << "\n";
    std::cout << "NMI " << nmi(truth, pred) << "\n";
    std::cout << "ARI " << ari(truth, pred) << "\n";
    return kExitOk;
}

int cmd_experiment(const RunConfig& cfg) {
    const RunReport report = run_experiment(cfg);
    std::cout << "runs: " << report.per_seed.size() << "\n";
    std::cout << "ACC (mean +/- std): " << format_percent(report.acc) << "\n";
    std::cout << "NMI (mean +/- std): " << format_percent(report.nmi) << "\n";
    std::cout << "ARI (mean +/- std): " << format_percent(report.ari) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep embedded clustering aided by measure propagation"};
    app.require_subcommand(1);

    CliOptions opts;
    std::string out_path;
    std::string truth_path, pred_path;

    auto* features = app.add_subcommand("features", "extract tf-idf features from a corpus");
    add_common(features, opts);
    features->add_option("--features-out", out_path, "output feature matrix file")->required();

    auto* graph = app.add_subcommand("graph", "build the nearest-neighbor affinity graph");
    add_common(graph, opts);
    graph->add_option("--graph-out", out_path, "output graph file")->required();

    auto* pretrain = app.add_subcommand("pretrain", "pretrain the autoencoder");
    add_common(pretrain, opts);
    pretrain->add_option("--checkpoint-out", out_path, "output checkpoint file")->required();

    auto* cluster = app.add_subcommand("cluster", "run one clustering algorithm (single seed)");
    add_common(cluster, opts);

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("--truth", truth_path, "ground-truth labels file")->required();
    eval->add_option("--pred", pred_path, "predicted labels file")->required();

    auto* experiment = app.add_subcommand("experiment", "multi-seed run with aggregate report");
    add_common(experiment, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (eval->parsed()) return cmd_eval(truth_path, pred_path);
        decamp::RunConfig cfg = finalize(opts);
        if (features->parsed()) return cmd_features(cfg, out_path);
        if (graph->parsed()) return cmd_graph(cfg, out_path);
        if (pretrain->parsed()) return cmd_pretrain(cfg, out_path);
        if (cluster->parsed()) return cmd_cluster(cfg);
        if (experiment->parsed()) return cmd_experiment(cfg);
    } catch (const decamp::FileMissingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return decamp::kExitMissingFile;
    } catch (const decamp::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return decamp::kExitBadFormat;
    } catch (const decamp::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return decamp::kExitDimensionMismatch;
    } catch (const decamp::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return decamp::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return decamp::kExitUsage;
    }
    return decamp::kExitUsage;
}
