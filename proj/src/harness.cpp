#include "decamp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "decamp/corpus.hpp"
#include "decamp/errors.hpp"

namespace decamp {

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(static_cast<T>(std::stoull(item)));
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace

ClusterConfig RunConfig::cluster_config(std::uint64_t seed) const {
    ClusterConfig c;
    c.k = k;
    c.xi = xi;
    c.mp.nu = nu;
    c.mp.lambda = lambda;
    c.mp.alpha = alpha;
    c.mp.max_iters = mp_max_iters;
    c.mp.tol = mp_tol;
    c.epochs = epochs;
    c.max_outer_iters = max_outer_iters;
    c.batch_size = batch_size;
    c.update_interval = update_interval;
    c.tol_label_change = tol_label_change;
    c.learning_rate = learning_rate;
    c.momentum = momentum;
    c.seed = seed;
    return c;
}

AutoencoderConfig RunConfig::autoencoder_config(std::uint64_t seed) const {
    AutoencoderConfig a;
    a.hidden_dims = hidden_dims;
    a.latent_dim = d_z;
    a.epochs = pretrain_epochs;
    a.batch_size = pretrain_batch_size;
    a.learning_rate = learning_rate;
    a.momentum = momentum;
    a.seed = seed;
    return a;
}

void apply_profile(RunConfig& cfg, const std::string& name) {
    cfg.profile = name;
    if (name == "searchsnippets") {
        cfg.k = 8;
        cfg.d_z = 100;
        cfg.pretrain_epochs = 1000;
        cfg.hidden_dims = {500, 500, 2000};
    } else if (name == "stackoverflow" || name == "biomedical") {
        cfg.k = 20;
        cfg.d_z = 10;
        cfg.pretrain_epochs = 100;
        cfg.hidden_dims = {500, 500, 2000};
    } else if (name == "blobs") {
        cfg.k = 4;
        cfg.d_z = 5;
        cfg.hidden_dims = {64, 32};
        cfg.pretrain_epochs = 60;
        cfg.pretrain_batch_size = 64;
        cfg.batch_size = 64;
        cfg.m = 10;
        cfg.max_outer_iters = 20;
        cfg.epochs = 20;
    } else {
        throw FormatError("unknown profile: " + name);
    }
}

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "algorithm") cfg.algorithm = value;
        else if (key == "profile") apply_profile(cfg, value);
        else if (key == "dataset") cfg.dataset = value;
        else if (key == "labels") cfg.labels = value;
        else if (key == "stopwords") cfg.stopwords = value;
        else if (key == "graph_cache") cfg.graph_cache = value;
        else if (key == "checkpoint") cfg.checkpoint = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "max_terms") cfg.max_terms = std::stoull(value);
        else if (key == "hidden_dims") cfg.hidden_dims = parse_list<std::size_t>(value);
        else if (key == "d_z") cfg.d_z = std::stoull(value);
        else if (key == "pretrain_epochs") cfg.pretrain_epochs = std::stoull(value);
        else if (key == "pretrain_batch_size") cfg.pretrain_batch_size = std::stoull(value);
        else if (key == "k") cfg.k = std::stoull(value);
        else if (key == "xi") cfg.xi = std::stod(value);
        else if (key == "lambda") cfg.lambda = std::stod(value);
        else if (key == "nu") cfg.nu = std::stod(value);
        else if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "m") cfg.m = std::stoull(value);
        else if (key == "mp_max_iters") cfg.mp_max_iters = std::stoull(value);
        else if (key == "mp_tol") cfg.mp_tol = std::stod(value);
        else if (key == "epochs") cfg.epochs = std::stoull(value);
        else if (key == "max_outer_iters") cfg.max_outer_iters = std::stoull(value);
        else if (key == "batch_size") cfg.batch_size = std::stoull(value);
        else if (key == "update_interval") cfg.update_interval = std::stoull(value);
        else if (key == "tol_label_change") cfg.tol_label_change = std::stod(value);
        else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
        else if (key == "momentum") cfg.momentum = std::stod(value);
        else if (key == "seeds") cfg.seeds = parse_list<std::uint64_t>(value);
        else if (key == "share_pretrain") cfg.share_pretrain = (value == "1" || value == "true");
        else if (key == "blobs_n") cfg.blobs_n = std::stoull(value);
        else if (key == "blobs_k") cfg.blobs_k = std::stoull(value);
        else if (key == "blobs_d") cfg.blobs_d = std::stoull(value);
        else if (key == "blobs_spread") cfg.blobs_spread = std::stod(value);
        else if (key == "blobs_seed") cfg.blobs_seed = std::stoull(value);
        else throw FormatError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw FormatError("bad value for config key " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw FormatError("bad value for config key " + key + ": " + value);
    }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileMissingError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.resize(hash_pos);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw FormatError(path + ":" + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        apply_key_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::map<std::string, std::string> config_to_map(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["algorithm"] = cfg.algorithm;
    kv["profile"] = cfg.profile;
    kv["dataset"] = cfg.dataset;
    kv["labels"] = cfg.labels;
    kv["stopwords"] = cfg.stopwords;
    kv["graph_cache"] = cfg.graph_cache;
    kv["checkpoint"] = cfg.checkpoint;
    kv["max_terms"] = std::to_string(cfg.max_terms);
    kv["hidden_dims"] = join_sizes(cfg.hidden_dims);
    kv["d_z"] = std::to_string(cfg.d_z);
    kv["pretrain_epochs"] = std::to_string(cfg.pretrain_epochs);
    kv["pretrain_batch_size"] = std::to_string(cfg.pretrain_batch_size);
    kv["k"] = std::to_string(cfg.k);
    kv["xi"] = format_double(cfg.xi);
    kv["lambda"] = format_double(cfg.lambda);
    kv["nu"] = format_double(cfg.nu);
    kv["alpha"] = format_double(cfg.alpha);
    kv["m"] = std::to_string(cfg.m);
    kv["mp_max_iters"] = std::to_string(cfg.mp_max_iters);
    kv["mp_tol"] = format_double(cfg.mp_tol);
    kv["epochs"] = std::to_string(cfg.epochs);
    kv["max_outer_iters"] = std::to_string(cfg.max_outer_iters);
    kv["batch_size"] = std::to_string(cfg.batch_size);
    kv["update_interval"] = std::to_string(cfg.update_interval);
    kv["tol_label_change"] = format_double(cfg.tol_label_change);
    kv["learning_rate"] = format_double(cfg.learning_rate);
    kv["momentum"] = format_double(cfg.momentum);
    kv["seeds"] = join_seeds(cfg.seeds);
    kv["share_pretrain"] = cfg.share_pretrain ? "1" : "0";
    kv["blobs_n"] = std::to_string(cfg.blobs_n);
    kv["blobs_k"] = std::to_string(cfg.blobs_k);
    kv["blobs_d"] = std::to_string(cfg.blobs_d);
    kv["blobs_spread"] = format_double(cfg.blobs_spread);
    kv["blobs_seed"] = std::to_string(cfg.blobs_seed);
    return kv;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    std::string canon;
    for (const auto& [key, value] : config_to_map(cfg)) {
        canon += key;
        canon += '=';
        canon += value;
        canon += '\n';
    }
    return fnv1a64(canon);
}

namespace {

std::uint64_t subset_hash(const RunConfig& cfg, std::initializer_list<const char*> keys) {
    const auto kv = config_to_map(cfg);
    std::string canon;
    for (const char* key : keys) {
        canon += key;
        canon += '=';
        canon += kv.at(key);
        canon += '\n';
    }
    return fnv1a64(canon);
}

}  // namespace

std::uint64_t features_config_hash(const RunConfig& cfg) {
    return subset_hash(cfg, {"stopwords", "max_terms"});
}

std::uint64_t graph_config_hash(const RunConfig& cfg) { return subset_hash(cfg, {"m", "alpha"}); }

std::uint64_t checkpoint_config_hash(const RunConfig& cfg) {
    return subset_hash(cfg, {"hidden_dims", "d_z", "pretrain_epochs", "pretrain_batch_size",
                             "learning_rate", "momentum"});
}

RunReport aggregate(const std::vector<SeedResult>& results) {
    if (results.empty()) throw std::invalid_argument("aggregate: no seed results");
    RunReport report;
    report.per_seed = results;
    auto agg = [&](auto metric) {
        MetricAggregate a;
        for (const auto& r : results) a.mean += metric(r);
        a.mean /= static_cast<double>(results.size());
        if (results.size() > 1) {
            double ss = 0.0;
            for (const auto& r : results) {
                const double d = metric(r) - a.mean;
                ss += d * d;
            }
            a.stddev = std::sqrt(ss / static_cast<double>(results.size() - 1));
        }
        return a;
    };
    report.acc = agg([](const SeedResult& r) { return r.acc; });
    report.nmi = agg([](const SeedResult& r) { return r.nmi; });
    report.ari = agg([](const SeedResult& r) { return r.ari; });
    return report;
}

std::string format_percent(const MetricAggregate& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f +/- %.1f", m.mean * 100.0, m.stddev * 100.0);
    return buf;
}

ExperimentData load_experiment_data(const RunConfig& cfg) {
    ExperimentData data;
    if (cfg.dataset.empty()) {
        if (cfg.profile != "blobs")
            throw FormatError("no dataset configured (set dataset= or profile=blobs)");
        BlobData blobs = make_blobs(cfg.blobs_n, cfg.blobs_k, cfg.blobs_d, cfg.blobs_spread,
                                    cfg.blobs_seed);
        data.features = std::move(blobs.features);
        data.truth = std::move(blobs.labels);
        return data;
    }
    if (cfg.dataset.ends_with(".dcm") || cfg.dataset.ends_with(".bin")) {
        // The stored hash documents provenance (preprocessing keys); the file
        // itself is the dataset, so there is nothing to cross-check here.
        data.features = load_matrix(cfg.dataset);
    } else {
        const StopwordSet stop =
            cfg.stopwords.empty() ? StopwordSet{} : load_stopwords(cfg.stopwords);
        const auto docs = load_corpus(cfg.dataset, stop);
        const auto vocab = build_vocabulary(docs, cfg.max_terms);
        data.features = tfidf_features(docs, vocab);
    }
    if (!cfg.labels.empty()) {
        data.truth = load_labels(cfg.labels);
        if (data.truth->size() != data.features.rows())
            throw DimensionError("labels file length does not match dataset size");
    }
    return data;
}

SparseAffinity obtain_graph(const RunConfig& cfg, const FeatureMatrix& features) {
    if (!cfg.graph_cache.empty() && std::filesystem::exists(cfg.graph_cache)) {
        GraphFile file = load_graph(cfg.graph_cache);
        std::cerr << "reusing cached graph " << cfg.graph_cache << "\n";
        if (file.config_hash != graph_config_hash(cfg))
            std::cerr << "warning: cached graph " << cfg.graph_cache
                      << " was built with different graph settings (m=" << file.m
                      << ", alpha=" << file.alpha << ")\n";
        if (file.graph.n != features.rows())
            throw DimensionError("cached graph size does not match dataset");
        return std::move(file.graph);
    }
    std::cerr << "building affinity graph (m=" << cfg.m << ", alpha=" << cfg.alpha << ")\n";
    SparseAffinity graph = build_affinity(features, cfg.m, cfg.alpha);
    if (!cfg.graph_cache.empty())
        save_graph(cfg.graph_cache, graph, cfg.m, cfg.alpha, graph_config_hash(cfg));
    return graph;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows,
                          std::uint64_t config_hash) {
    std::ofstream out(path);
    if (!out) throw FileMissingError("cannot write file: " + path);
    char header[64];
    std::snprintf(header, sizeof header, "# decamp-trajectory 1 hash %016llx\n",
                  static_cast<unsigned long long>(config_hash));
    out << header;
    out << "outer_iter,kl_term,balance_term,acc,nmi,ari\n";
    out.precision(10);
    for (const auto& row : rows)
        out << row.outer_iter << ',' << row.kl_term << ',' << row.balance_term << ',' << row.acc
            << ',' << row.nmi << ',' << row.ari << '\n';
}

namespace {

nlohmann::json metric_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace

void write_report_files(const RunConfig& cfg, const RunReport& report) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["config"] = config_to_map(cfg);
    {
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(config_hash(cfg)));
        doc["config_hash"] = hex;
    }
    doc["runs"] = nlohmann::json::array();
    for (const auto& r : report.per_seed) {
        doc["runs"].push_back({{"seed", r.seed},
                               {"acc", metric_or_null(r.acc)},
                               {"nmi", metric_or_null(r.nmi)},
                               {"ari", metric_or_null(r.ari)}});
    }
    doc["aggregate"] = {
        {"acc", {{"mean", metric_or_null(report.acc.mean)}, {"std", metric_or_null(report.acc.stddev)}}},
        {"nmi", {{"mean", metric_or_null(report.nmi.mean)}, {"std", metric_or_null(report.nmi.stddev)}}},
        {"ari", {{"mean", metric_or_null(report.ari.mean)}, {"std", metric_or_null(report.ari.stddev)}}},
    };
    std::ofstream json_out(cfg.out_dir + "/report.json");
    if (!json_out) throw FileMissingError("cannot write report.json in " + cfg.out_dir);
    json_out << doc.dump(2) << "\n";

    std::ofstream txt(cfg.out_dir + "/summary.txt");
    if (!txt) throw FileMissingError("cannot write summary.txt in " + cfg.out_dir);
    txt << "algorithm: " << cfg.algorithm << "  runs: " << report.per_seed.size() << "\n";
    txt << "ACC (mean +/- std): " << format_percent(report.acc) << "\n";
    txt << "NMI (mean +/- std): " << format_percent(report.nmi) << "\n";
    txt << "ARI (mean +/- std): " << format_percent(report.ari) << "\n";
}

RunReport run_experiment(const RunConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("run_experiment: seed list is empty");
    if (cfg.algorithm != "dec" && cfg.algorithm != "dece2e" && cfg.algorithm != "decamp" &&
        cfg.algorithm != "kmeans")
        throw FormatError("unknown algorithm: " + cfg.algorithm);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    const ExperimentData data = load_experiment_data(cfg);
    const LabelVector* truth = data.truth ? &*data.truth : nullptr;

    SparseAffinity graph;
    if (cfg.algorithm == "decamp") graph = obtain_graph(cfg, data.features);

    std::optional<DenseNet> shared_encoder;
    if (!cfg.checkpoint.empty()) {
        Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
        if (ckpt.config_hash != checkpoint_config_hash(cfg))
            std::cerr << "warning: checkpoint " << cfg.checkpoint
                      << " was pretrained under different settings\n";
        shared_encoder = std::move(ckpt.encoder);
    } else if (cfg.share_pretrain) {
        shared_encoder =
            pretrain_autoencoder(data.features, cfg.autoencoder_config(cfg.seeds.front())).encoder;
    }

    std::vector<SeedResult> results;
    for (const std::uint64_t seed : cfg.seeds) {
        DenseNet encoder;
        if (cfg.algorithm != "kmeans") {
            encoder = shared_encoder
                          ? *shared_encoder
                          : pretrain_autoencoder(data.features, cfg.autoencoder_config(seed)).encoder;
        }

        TrainResult run;
        if (cfg.algorithm == "dec") {
            run = run_dec(data.features, std::move(encoder), cfg.cluster_config(seed), truth);
        } else if (cfg.algorithm == "dece2e") {
            run = run_dece2e(data.features, std::move(encoder), cfg.cluster_config(seed), truth);
        } else if (cfg.algorithm == "decamp") {
            run = run_decamp(data.features, graph, std::move(encoder), cfg.cluster_config(seed),
                             truth);
        } else {  // kmeans, validated above
            const ClusterHead head = kmeans_init(data.features, cfg.k, seed);
            run.labels = kmeans_assign(data.features, head);
        }

        SeedResult sr;
        sr.seed = seed;
        if (truth) {
            sr.acc = accuracy(*truth, run.labels);
            sr.nmi = nmi(*truth, run.labels);
            sr.ari = ari(*truth, run.labels);
        }
        results.push_back(sr);

        save_labels(cfg.out_dir + "/predictions_" + std::to_string(seed) + ".txt", run.labels);
        if (!run.trajectory.empty())
            write_trajectory_csv(cfg.out_dir + "/trajectory_" + std::to_string(seed) + ".csv",
                                 run.trajectory, config_hash(cfg));
        std::cerr << "seed " << seed << " done";
        if (truth) std::cerr << " acc=" << sr.acc;
        std::cerr << "\n";
    }

    RunReport report = aggregate(results);
    write_report_files(cfg, report);
    return report;
}

}  // namespace decamp
