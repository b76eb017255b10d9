#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "decamp/errors.hpp"
#include "decamp/harness.hpp"

using namespace decamp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny_blobs_config(const std::string& out_dir) {
    RunConfig cfg;
    apply_profile(cfg, "blobs");
    cfg.blobs_n = 80;
    cfg.blobs_d = 12;
    cfg.blobs_spread = 0.25;
    cfg.hidden_dims = {16};
    cfg.d_z = 4;
    cfg.pretrain_epochs = 10;
    cfg.max_outer_iters = 3;
    cfg.epochs = 3;
    cfg.m = 6;
    cfg.out_dir = out_dir;
    cfg.seeds = {1, 2};
    return cfg;
}

}  // namespace

TEST_CASE("aggregate computes mean and sample std") {
    std::vector<SeedResult> results(2);
    results[0] = {0, 0.78, 0.5, 0.4};
    results[1] = {1, 0.80, 0.6, 0.5};
    const RunReport report = aggregate(results);
    CHECK(report.acc.mean == doctest::Approx(0.79));
    CHECK(report.acc.stddev == doctest::Approx(std::sqrt(2.0) / 100.0).epsilon(1e-9));
    CHECK(format_percent(report.acc) == "79.0 +/- 1.4");
}

TEST_CASE("aggregate of a single seed reports zero std") {
    const RunReport report = aggregate({{7, 0.5, 0.5, 0.5}});
    CHECK(report.acc.stddev == 0.0);
    CHECK(format_percent(report.acc) == "50.0 +/- 0.0");
}

TEST_CASE("aggregate is order invariant") {
    std::vector<SeedResult> a{{0, 0.7, 0.1, 0.1}, {1, 0.8, 0.2, 0.2}, {2, 0.9, 0.3, 0.3}};
    std::vector<SeedResult> b{a[2], a[0], a[1]};
    CHECK(aggregate(a).acc.mean == doctest::Approx(aggregate(b).acc.mean).epsilon(1e-14));
    CHECK(aggregate(a).acc.stddev == doctest::Approx(aggregate(b).acc.stddev).epsilon(1e-14));
}

TEST_CASE("aggregate rejects empty input") {
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("config file parsing with overrides and hashing") {
    TempDir dir("decamp_cfg_test");
    const std::string path = (dir.path / "run.cfg").string();
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "algorithm = dec\n";
        out << "k = 7\n";
        out << "lambda = 0.25\n";
        out << "seeds = 3,4,5\n";
    }
    RunConfig cfg;
    load_config_file(cfg, path);
    CHECK(cfg.algorithm == "dec");
    CHECK(cfg.k == 7);
    CHECK(cfg.lambda == 0.25);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});

    const std::uint64_t h1 = config_hash(cfg);
    apply_key_value(cfg, "k", "8");
    CHECK(config_hash(cfg) != h1);
    apply_key_value(cfg, "k", "7");
    CHECK(config_hash(cfg) == h1);
}

TEST_CASE("unknown config keys and bad values are rejected") {
    RunConfig cfg;
    CHECK_THROWS_AS(apply_key_value(cfg, "nope", "1"), FormatError);
    CHECK_THROWS_AS(apply_key_value(cfg, "k", "banana"), FormatError);
    TempDir dir("decamp_cfg_bad");
    const std::string path = (dir.path / "bad.cfg").string();
    {
        std::ofstream out(path);
        out << "this is not a key value line\n";
    }
    CHECK_THROWS_AS(load_config_file(cfg, path), FormatError);
    CHECK_THROWS_AS(load_config_file(cfg, (dir.path / "missing.cfg").string()), FileMissingError);
}

TEST_CASE("profiles encode the dataset presets") {
    RunConfig cfg;
    apply_profile(cfg, "stackoverflow");
    CHECK(cfg.k == 20);
    CHECK(cfg.d_z == 10);
    CHECK(cfg.pretrain_epochs == 100);
    apply_profile(cfg, "searchsnippets");
    CHECK(cfg.k == 8);
    CHECK(cfg.d_z == 100);
    CHECK(cfg.pretrain_epochs == 1000);
    CHECK_THROWS_AS(apply_profile(cfg, "unknown"), FormatError);

    RunConfig defaults;  // stock defaults hold without a profile
    CHECK(defaults.xi == 1.0);
    CHECK(defaults.lambda == 0.5);
    CHECK(defaults.nu == 0.5);
    CHECK(defaults.m == 50);
    CHECK(defaults.learning_rate == 0.1);
    CHECK(defaults.momentum == 0.9);
}

TEST_CASE("experiment on blobs writes a full report and is byte-stable") {
    TempDir dir("decamp_experiment_test");
    RunConfig cfg = tiny_blobs_config((dir.path / "out").string());
    const RunReport report = run_experiment(cfg);
    CHECK(report.per_seed.size() == 2);
    for (const auto& r : report.per_seed) CHECK(r.acc > 0.5);

    const std::string report_path = (dir.path / "out" / "report.json").string();
    const std::string summary_path = (dir.path / "out" / "summary.txt").string();
    CHECK(fs::exists(report_path));
    CHECK(fs::exists(summary_path));
    CHECK(fs::exists(dir.path / "out" / "trajectory_1.csv"));
    CHECK(fs::exists(dir.path / "out" / "trajectory_2.csv"));
    CHECK(fs::exists(dir.path / "out" / "predictions_1.txt"));

    const std::string report_1 = slurp(report_path);
    const std::string summary_1 = slurp(summary_path);
    run_experiment(cfg);
    CHECK(slurp(report_path) == report_1);
    CHECK(slurp(summary_path) == summary_1);

    // Trajectory CSV carries the version/hash line and the documented columns.
    const std::string csv = slurp((dir.path / "out" / "trajectory_1.csv").string());
    CHECK(csv.rfind("# decamp-trajectory 1 hash ", 0) == 0);
    CHECK(csv.find("outer_iter,kl_term,balance_term,acc,nmi,ari\n") != std::string::npos);
}

TEST_CASE("experiment reuses a cached graph") {
    TempDir dir("decamp_graph_cache_test");
    RunConfig cfg = tiny_blobs_config((dir.path / "out").string());
    cfg.seeds = {1};
    cfg.graph_cache = (dir.path / "graph.txt").string();
    run_experiment(cfg);
    REQUIRE(fs::exists(cfg.graph_cache));
    const auto stamp = fs::last_write_time(cfg.graph_cache);
    run_experiment(cfg);  // second run must load, not rebuild
    CHECK(fs::last_write_time(cfg.graph_cache) == stamp);
}

TEST_CASE("kmeans algorithm path produces a report without a network") {
    TempDir dir("decamp_kmeans_test");
    RunConfig cfg = tiny_blobs_config((dir.path / "out").string());
    cfg.algorithm = "kmeans";
    cfg.seeds = {1};
    const RunReport report = run_experiment(cfg);
    CHECK(report.per_seed[0].acc > 0.5);
}

TEST_CASE("experiment rejects an unknown algorithm") {
    TempDir dir("decamp_alg_test");
    RunConfig cfg = tiny_blobs_config((dir.path / "out").string());
    cfg.algorithm = "mystery";
    CHECK_THROWS_AS(run_experiment(cfg), FormatError);
}

TEST_CASE("fnv1a64 matches the reference constants") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("artifact hashes react only to their determining keys") {
    RunConfig cfg;
    const auto g0 = graph_config_hash(cfg);
    const auto c0 = checkpoint_config_hash(cfg);
    const auto f0 = features_config_hash(cfg);
    apply_key_value(cfg, "lambda", "0.9");  // affects none of the artifacts
    CHECK(graph_config_hash(cfg) == g0);
    CHECK(checkpoint_config_hash(cfg) == c0);
    CHECK(features_config_hash(cfg) == f0);
    apply_key_value(cfg, "m", "17");
    CHECK(graph_config_hash(cfg) != g0);
    CHECK(checkpoint_config_hash(cfg) == c0);
    apply_key_value(cfg, "d_z", "33");
    CHECK(checkpoint_config_hash(cfg) != c0);
    CHECK(features_config_hash(cfg) == f0);
    apply_key_value(cfg, "max_terms", "123");
    CHECK(features_config_hash(cfg) != f0);
}
