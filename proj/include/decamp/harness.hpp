#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "decamp/corpus.hpp"
#include "decamp/deep_cluster.hpp"

namespace decamp {

// Flat experiment configuration. Every field maps to a `key = value` line in
// the config file and to a CLI flag; the canonical key/value dump is hashed
// into every artifact this config produces.
struct RunConfig {
    std::string algorithm = "decamp";  // dec | dece2e | decamp | kmeans
    std::string profile;               // searchsnippets | stackoverflow | biomedical | blobs
    std::string dataset;               // corpus text (one doc per line) or .dcm matrix file
    std::string labels;
    std::string stopwords;
    std::string graph_cache;
    std::string checkpoint;
    std::string out_dir = "decamp_out";

    std::size_t max_terms = 2000;

    std::vector<std::size_t> hidden_dims = {500, 500, 2000};
    std::size_t d_z = 10;
    std::size_t pretrain_epochs = 100;
    std::size_t pretrain_batch_size = 256;

    std::size_t k = 20;
    double xi = 1.0;
    double lambda = 0.5;
    double nu = 0.5;
    double alpha = 1.0;
    std::size_t m = 50;
    std::size_t mp_max_iters = 100;
    double mp_tol = 1e-4;
    std::size_t epochs = 50;
    std::size_t max_outer_iters = 100;
    std::size_t batch_size = 256;
    std::size_t update_interval = 0;
    double tol_label_change = 0.001;
    double learning_rate = 0.1;
    double momentum = 0.9;

    std::vector<std::uint64_t> seeds = {0};
    bool share_pretrain = false;

    // synthetic data knobs (blobs profile)
    std::size_t blobs_n = 200;
    std::size_t blobs_k = 4;
    std::size_t blobs_d = 50;
    double blobs_spread = 0.2;
    std::uint64_t blobs_seed = 42;

    ClusterConfig cluster_config(std::uint64_t seed) const;
    AutoencoderConfig autoencoder_config(std::uint64_t seed) const;
};

// Dataset presets: class counts and architecture choices for the three
// public short-text corpora, plus the synthetic blobs profile.
void apply_profile(RunConfig& cfg, const std::string& name);

// `key = value` lines, '#' comments. Unknown keys or unparsable values throw
// FormatError.
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);
void load_config_file(RunConfig& cfg, const std::string& path);

std::map<std::string, std::string> config_to_map(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

// Per-artifact hashes cover only the keys that determine that artifact, so a
// cached file reused under a config that would have rebuilt it differently is
// flagged, while unrelated setting changes stay quiet.
std::uint64_t features_config_hash(const RunConfig& cfg);    // preprocessing keys
std::uint64_t graph_config_hash(const RunConfig& cfg);       // m, alpha
std::uint64_t checkpoint_config_hash(const RunConfig& cfg);  // architecture + pretraining

struct SeedResult {
    std::uint64_t seed = 0;
    double acc = std::numeric_limits<double>::quiet_NaN();
    double nmi = std::numeric_limits<double>::quiet_NaN();
    double ari = std::numeric_limits<double>::quiet_NaN();
};

struct MetricAggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

struct RunReport {
    std::vector<SeedResult> per_seed;
    MetricAggregate acc;
    MetricAggregate nmi;
    MetricAggregate ari;
};

RunReport aggregate(const std::vector<SeedResult>& results);

// "79.7 +/- 2.1" (percent, one decimal), the usual benchmark-table format.
std::string format_percent(const MetricAggregate& m);

struct ExperimentData {
    FeatureMatrix features;
    std::optional<LabelVector> truth;
};
ExperimentData load_experiment_data(const RunConfig& cfg);

// Loads the cached graph when the file exists (warning on config-hash
// mismatch), otherwise builds it and saves it when a cache path is set.
SparseAffinity obtain_graph(const RunConfig& cfg, const FeatureMatrix& features);

// Multi-seed driver: per-seed (re)pretraining unless share_pretrain or a
// checkpoint is given, algorithm run, trajectory CSV + predictions per seed,
// then report.json and summary.txt in out_dir.
RunReport run_experiment(const RunConfig& cfg);

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows,
                          std::uint64_t config_hash);
void write_report_files(const RunConfig& cfg, const RunReport& report);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace decamp
