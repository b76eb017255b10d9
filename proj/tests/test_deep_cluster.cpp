#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "decamp/corpus.hpp"
#include "decamp/deep_cluster.hpp"
#include "decamp/errors.hpp"
#include "oracles.hpp"

using namespace decamp;

namespace {

SoftLabels random_soft_labels(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    SoftLabels q(n, k);
    for (auto& v : q.storage()) v = dist(rng);
    row_normalize(q);
    return q;
}

Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Matrix m(rows, cols);
    for (auto& v : m.storage()) v = dist(rng);
    return m;
}

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

ClusterConfig blob_config(std::uint64_t seed) {
    ClusterConfig cfg;
    cfg.k = 4;
    cfg.xi = 1.0;
    cfg.batch_size = 64;
    cfg.max_outer_iters = 15;
    cfg.epochs = 15;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    cfg.seed = seed;
    return cfg;
}

DenseNet blob_encoder(const Matrix& data, std::uint64_t seed) {
    AutoencoderConfig cfg;
    cfg.hidden_dims = {64, 32};
    cfg.latent_dim = 5;
    cfg.epochs = 40;
    cfg.batch_size = 64;
    cfg.seed = seed;
    return pretrain_autoencoder(data, cfg).encoder;
}

}  // namespace

TEST_CASE("soft_assign is uniform at equidistant points") {
    ClusterHead head;
    head.centers = Matrix(2, 2);
    head.centers(0, 0) = 1.0;
    head.centers(1, 0) = -1.0;
    Matrix z(1, 2);  // origin, equidistant from both centers
    const SoftLabels q = soft_assign(z, head);
    CHECK(q(0, 0) == doctest::Approx(0.5));
    CHECK(q(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("soft_assign at a center with unit-distance alternative") {
    ClusterHead head;
    head.centers = Matrix(2, 1);
    head.centers(0, 0) = 0.0;
    head.centers(1, 0) = 1.0;
    Matrix z(1, 1);  // exactly at center 0
    const SoftLabels q = soft_assign(z, head);
    CHECK(q(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(q(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("soft_assign is invariant under joint rigid transforms") {
    const Matrix z = random_batch(6, 3, 1);
    ClusterHead head;
    head.centers = random_batch(4, 3, 2);
    const SoftLabels base = soft_assign(z, head);
    // Joint translation plus axis permutation.
    Matrix z2 = z;
    ClusterHead head2 = head;
    for (std::size_t i = 0; i < z2.rows(); ++i) {
        std::swap(z2(i, 0), z2(i, 2));
        for (std::size_t j = 0; j < 3; ++j) z2(i, j) += 5.0;
    }
    for (std::size_t c = 0; c < 4; ++c) {
        std::swap(head2.centers(c, 0), head2.centers(c, 2));
        for (std::size_t j = 0; j < 3; ++j) head2.centers(c, j) += 5.0;
    }
    const SoftLabels moved = soft_assign(z2, head2);
    for (std::size_t idx = 0; idx < base.size(); ++idx)
        CHECK(moved.storage()[idx] == doctest::Approx(base.storage()[idx]).epsilon(1e-12));
}

TEST_CASE("soft_assign rows are stochastic") {
    const SoftLabels q = soft_assign(random_batch(20, 4, 3), ClusterHead{random_batch(5, 4, 4)});
    CHECK(is_row_stochastic(q));
}

TEST_CASE("dec_target single row is self-normalizing") {
    SoftLabels q(1, 2, 0.5);
    const SoftLabels p = dec_target(q);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("dec_target hand-computed example") {
    SoftLabels q(2, 2);
    q(0, 0) = 0.9; q(0, 1) = 0.1;
    q(1, 0) = 0.5; q(1, 1) = 0.5;
    const SoftLabels p = dec_target(q);
    // f = (0.7, 0.3); row0 ~ (0.81/0.7, 0.01/0.3); row1 ~ (0.25/0.7, 0.25/0.3)
    CHECK(p(0, 0) == doctest::Approx(0.971998).epsilon(1e-5));
    CHECK(p(0, 1) == doctest::Approx(0.028002).epsilon(1e-4));
    CHECK(p(1, 0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(p(1, 1) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("dec_target sharpens rows when frequencies are uniform") {
    // Columns of q are permutations of each other -> uniform f.
    SoftLabels q(2, 2);
    q(0, 0) = 0.8; q(0, 1) = 0.2;
    q(1, 0) = 0.2; q(1, 1) = 0.8;
    const SoftLabels p = dec_target(q);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(shannon_entropy(p.row_span(i)) <= shannon_entropy(q.row_span(i)));
}

TEST_CASE("dec_target with uniform frequencies equals the squared sharpening") {
    // Cyclic shifts keep every column mean at 1/K.
    const std::size_t k = 3, n = 9;
    SoftLabels q(n, k);
    const double base[3] = {0.6, 0.3, 0.1};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) q(i, c) = base[(c + i) % k];
    const SoftLabels p = dec_target(q);
    SoftLabels sharp = q;
    for (auto& v : sharp.storage()) v *= v;
    row_normalize(sharp);
    for (std::size_t idx = 0; idx < p.size(); ++idx)
        CHECK(std::abs(p.storage()[idx] - sharp.storage()[idx]) <= 1e-12);
}

TEST_CASE("kl_balance_loss at the balanced optimum is -xi log K") {
    // p = q with uniform batch mean.
    SoftLabels q(2, 2);
    q(0, 0) = 0.7; q(0, 1) = 0.3;
    q(1, 0) = 0.3; q(1, 1) = 0.7;
    const LossResult loss = kl_balance_loss(q, q, 1.5);
    CHECK(loss.value == doctest::Approx(-1.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("kl_balance_loss with xi=0 and one-hot targets is cross-entropy") {
    const SoftLabels q = random_soft_labels(5, 3, 9);
    SoftLabels p(5, 3);
    double expected = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto arg = static_cast<std::size_t>(argmax_labels(q)[i]);
        p(i, arg) = 1.0;
        expected -= std::log(q(i, arg)) / 5.0;
    }
    CHECK(kl_balance_loss(q, p, 0.0).value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("balance term is bounded by -xi log K") {
    const double xi = 2.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SoftLabels q = random_soft_labels(8, 4, 100 + seed);
        const double bal = kl_balance_loss(q, q, xi).value;  // KL part vanishes at p=q
        CHECK(bal >= -xi * std::log(4.0) - 1e-12);
        CHECK(bal <= 0.0 + 1e-12);
    }
}

TEST_CASE("balanced batch composition minimizes the loss") {
    // Pool of near-one-hot rows; a batch whose mean is uniform beats skewed picks.
    SoftLabels confident(2, 2);
    confident(0, 0) = 0.95; confident(0, 1) = 0.05;
    confident(1, 0) = 0.05; confident(1, 1) = 0.95;
    SoftLabels balanced(4, 2), skewed(4, 2);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 2; ++c) {
            balanced(i, c) = confident(i % 2, c);
            skewed(i, c) = confident(i == 3 ? 1 : 0, c);
        }
    CHECK(kl_balance_loss(balanced, balanced, 1.0).value <
          kl_balance_loss(skewed, skewed, 1.0).value);
}

TEST_CASE("dece2e_loss of uniform rows is lambda log K minus xi log K") {
    const std::size_t k = 5;
    const SoftLabels q = uniform_labels(6, k);
    const LossResult loss = dece2e_loss(q, 0.5, 0.0);
    CHECK(loss.value == doctest::Approx(0.5 * std::log(double(k))).epsilon(1e-12));
    const LossResult with_balance = dece2e_loss(q, 0.5, 1.0);
    CHECK(with_balance.value ==
          doctest::Approx(0.5 * std::log(double(k)) - std::log(double(k))).epsilon(1e-12));
}

TEST_CASE("dece2e_loss of one-hot rows has zero Renyi term") {
    SoftLabels q(3, 4);
    q(0, 0) = q(1, 2) = q(2, 3) = 1.0;
    CHECK(dece2e_loss(q, 0.5, 0.0).value == doctest::Approx(0.0));
}

TEST_CASE("dece2e_loss rejects lambda outside (0,1)") {
    const SoftLabels q = random_soft_labels(2, 2, 11);
    CHECK_THROWS_AS(dece2e_loss(q, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(dece2e_loss(q, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("dece2e equals the nu=0 objective with analytic pseudo-labels substituted") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const double lambda = 0.2 + 0.15 * static_cast<double>(seed % 5);
        const SoftLabels q = random_soft_labels(7, 4, 700 + seed);
        // p from the closed form, then KL + lambda H evaluated directly.
        SoftLabels p = q;
        for (auto& v : p.storage()) v = std::pow(v, 1.0 / (1.0 - lambda));
        row_normalize(p);
        double expected = 0.0;
        for (std::size_t i = 0; i < q.rows(); ++i) {
            for (std::size_t c = 0; c < q.cols(); ++c) {
                const double pv = p(i, c);
                if (pv > 0.0) expected += pv * (std::log(pv) - std::log(q(i, c)));
            }
            expected += lambda * shannon_entropy(p.row_span(i));
        }
        expected /= static_cast<double>(q.rows());
        const double actual = dece2e_loss(q, lambda, 0.0).value;
        CHECK(std::abs(actual - expected) / std::max(1e-30, std::abs(expected)) <= 1e-8);
    }
}

TEST_CASE("loss gradients through encoder and soft_assign match finite differences") {
    const Matrix x = random_batch(6, 4, 21);
    DenseNet encoder = DenseNet::make_mlp(std::vector<std::size_t>{4, 8, 3}, 22);
    ClusterHead head;
    head.centers = random_batch(3, 3, 23);
    Matrix center_grads(3, 3);
    const SoftLabels p = random_soft_labels(6, 3, 24);

    auto params = encoder.parameters();
    params.push_back({{head.centers.data(), head.centers.size()},
                      {center_grads.data(), center_grads.size()}});

    SUBCASE("kl balance loss") {
        auto loss_value = [&] {
            return kl_balance_loss(soft_assign(encoder.forward(x), head), p, 1.0).value;
        };
        const Matrix z = encoder.forward_train(x);
        const SoftLabels q = soft_assign(z, head);
        const LossResult loss = kl_balance_loss(q, p, 1.0);
        const SoftAssignGrads grads = soft_assign_backward(z, head, q, loss.dq);
        encoder.backward(grads.dz);
        std::copy(grads.dcenters.storage().begin(), grads.dcenters.storage().end(),
                  center_grads.storage().begin());
        const auto fd = oracle::finite_difference(params, loss_value);
        CHECK(oracle::max_relative_error(params, fd) <= 1e-4);
    }

    SUBCASE("dece2e loss") {
        auto loss_value = [&] {
            return dece2e_loss(soft_assign(encoder.forward(x), head), 0.5, 1.0).value;
        };
        const Matrix z = encoder.forward_train(x);
        const SoftLabels q = soft_assign(z, head);
        const LossResult loss = dece2e_loss(q, 0.5, 1.0);
        const SoftAssignGrads grads = soft_assign_backward(z, head, q, loss.dq);
        encoder.backward(grads.dz);
        std::copy(grads.dcenters.storage().begin(), grads.dcenters.storage().end(),
                  center_grads.storage().begin());
        const auto fd = oracle::finite_difference(params, loss_value);
        CHECK(oracle::max_relative_error(params, fd) <= 1e-4);
    }
}

TEST_CASE("dece2e gradient through the network vanishes as lambda shrinks") {
    // With xi=0 the only non-constant part of dL/dq is O(lambda); after the
    // simplex-respecting chain rule the latent gradient goes to zero with it.
    const Matrix z = random_batch(6, 3, 77);
    ClusterHead head;
    head.centers = random_batch(3, 3, 78);
    const SoftLabels q = soft_assign(z, head);
    auto dz_norm = [&](double lambda) {
        const LossResult loss = dece2e_loss(q, lambda, 0.0);
        const SoftAssignGrads grads = soft_assign_backward(z, head, q, loss.dq);
        double norm = 0.0;
        for (double v : grads.dz.storage()) norm = std::max(norm, std::abs(v));
        return norm;
    };
    const double at_01 = dz_norm(0.1);
    CHECK(dz_norm(1e-4) <= 2e-3 * at_01 / 0.1);
    CHECK(dz_norm(1e-8) <= 1e-6);
}

TEST_CASE("reseed_empty_clusters moves abandoned centers onto data") {
    // Three tight groups plus one center stranded far away.
    const BlobData blobs = make_blobs(60, 3, 6, 0.2, 79);
    ClusterHead head = kmeans_init(blobs.features, 3, 2);
    ClusterHead padded;
    padded.centers = Matrix(4, 6);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < 6; ++j) padded.centers(c, j) = head.centers(c, j);
    for (std::size_t j = 0; j < 6; ++j) padded.centers(3, j) = 100.0;  // nobody's argmax
    SoftLabels q = soft_assign(blobs.features, padded);
    const std::size_t reseeded = reseed_empty_clusters(blobs.features, padded, q);
    CHECK(reseeded >= 1);
    const LabelVector labels = argmax_labels(q);
    std::vector<int> counts(4, 0);
    for (int c : labels) ++counts[c];
    for (int c = 0; c < 4; ++c) CHECK(counts[c] > 0);
    CHECK(is_row_stochastic(q));
}

TEST_CASE("kmeans_init recovers well-separated blob centers") {
    const BlobData blobs = make_blobs(120, 4, 8, 0.2, 31);
    const ClusterHead head = kmeans_init(blobs.features, 4, 7);
    const LabelVector assign = kmeans_assign(blobs.features, head);
    CHECK(oracle::brute_force_accuracy(blobs.labels, assign) >= 0.95);
}

TEST_CASE("kmeans with one cluster returns the mean") {
    const Matrix x = random_batch(10, 3, 33);
    const ClusterHead head = kmeans_init(x, 1, 0);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 10; ++i) mean += x(i, j);
        mean /= 10.0;
        CHECK(head.centers(0, j) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("kmeans centers are invariant to duplicating every point") {
    const BlobData blobs = make_blobs(60, 3, 6, 0.2, 35);
    Matrix doubled(120, 6);
    for (std::size_t i = 0; i < 120; ++i)
        for (std::size_t j = 0; j < 6; ++j) doubled(i, j) = blobs.features(i % 60, j);
    const ClusterHead a = kmeans_init(blobs.features, 3, 1);
    const ClusterHead b = kmeans_init(doubled, 3, 1);
    // Same center set up to ordering.
    for (std::size_t c = 0; c < 3; ++c) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c2 = 0; c2 < 3; ++c2)
            best = std::min(best, squared_distance(a.centers.row_span(c), b.centers.row_span(c2)));
        CHECK(best <= 1e-12);
    }
}

TEST_CASE("run_dec clusters blobs and stops on stable labels") {
    const BlobData blobs = make_blobs(200, 4, 50, 0.2, 41);
    const DenseNet encoder = blob_encoder(blobs.features, 41);
    const TrainResult res = run_dec(blobs.features, encoder, blob_config(41), &blobs.labels);
    CHECK(accuracy(blobs.labels, res.labels) >= 0.9);
    CHECK(is_row_stochastic(res.q));
    CHECK(!res.trajectory.empty());
}

TEST_CASE("tol_label_change of one stops after the first refresh") {
    const BlobData blobs = make_blobs(80, 4, 20, 0.2, 43);
    const DenseNet encoder = blob_encoder(blobs.features, 43);
    ClusterConfig cfg = blob_config(43);
    cfg.tol_label_change = 1.0;
    const TrainResult res = run_dec(blobs.features, encoder, cfg, nullptr);
    CHECK(res.outer_iters == 1);
    CHECK(res.trajectory.size() == 1);
}

TEST_CASE("run_decamp with nu=0 matches the sharpened-target variant exactly") {
    const BlobData blobs = make_blobs(100, 4, 16, 0.25, 47);
    const DenseNet encoder = blob_encoder(blobs.features, 47);
    const SparseAffinity graph = build_affinity(blobs.features, 8, 1.0);

    ClusterConfig cfg = blob_config(47);
    cfg.mp.nu = 0.0;
    cfg.max_outer_iters = 2;  // one refresh + one training block, then stop check
    const TrainResult decamp_run = run_decamp(blobs.features, graph, encoder, cfg, nullptr);

    // Same loop with the analytic nu=0 target.
    const TrainResult variant = run_self_training(
        blobs.features, encoder, cfg, cfg.xi,
        [&](const SoftLabels& q) {
            SoftLabels p = q;
            for (auto& v : p.storage()) v = std::pow(v, 1.0 / (1.0 - cfg.mp.lambda));
            row_normalize(p);
            return p;
        },
        nullptr);
    CHECK(decamp_run.labels == variant.labels);
}

TEST_CASE("run_decamp is deterministic including the trajectory") {
    const BlobData blobs = make_blobs(90, 4, 12, 0.25, 53);
    const DenseNet encoder = blob_encoder(blobs.features, 53);
    const SparseAffinity graph = build_affinity(blobs.features, 8, 1.0);
    ClusterConfig cfg = blob_config(53);
    cfg.max_outer_iters = 4;
    const TrainResult a = run_decamp(blobs.features, graph, encoder, cfg, &blobs.labels);
    const TrainResult b = run_decamp(blobs.features, graph, encoder, cfg, &blobs.labels);
    CHECK(a.q == b.q);
    CHECK(a.labels == b.labels);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t t = 0; t < a.trajectory.size(); ++t) {
        CHECK(a.trajectory[t].kl_term == b.trajectory[t].kl_term);
        CHECK(a.trajectory[t].balance_term == b.trajectory[t].balance_term);
        CHECK(a.trajectory[t].acc == b.trajectory[t].acc);
    }
}

TEST_CASE("duplicated components stay in lockstep through run_decamp") {
    // Two identical copies of the data with a block-diagonal graph; every
    // duplicate pair must keep identical assignments throughout training.
    const BlobData blobs = make_blobs(40, 4, 8, 0.25, 59);
    const std::size_t n = 40;
    Matrix doubled(2 * n, 8);
    for (std::size_t i = 0; i < 2 * n; ++i)
        for (std::size_t j = 0; j < 8; ++j) doubled(i, j) = blobs.features(i % n, j);
    const SparseAffinity block = build_affinity(blobs.features, 6, 1.0);
    SparseAffinity two_blocks;
    two_blocks.n = 2 * n;
    two_blocks.rows.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        two_blocks.rows[i] = block.rows[i];
        for (const auto& e : block.rows[i]) two_blocks.rows[n + i].push_back({n + e.col, e.weight});
    }
    AutoencoderConfig ae;
    ae.hidden_dims = {16};
    ae.latent_dim = 4;
    ae.epochs = 15;
    ae.batch_size = 32;
    ae.seed = 59;
    const DenseNet encoder = pretrain_autoencoder(doubled, ae).encoder;
    ClusterConfig cfg = blob_config(59);
    cfg.max_outer_iters = 3;
    const TrainResult res = run_decamp(doubled, two_blocks, encoder, cfg, nullptr);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 4; ++c) CHECK(res.q(i, c) == res.q(n + i, c));
}

TEST_CASE("run_decamp keeps pace with run_dec seed by seed") {
    const BlobData blobs = make_blobs(200, 4, 50, 0.2, 71);
    const SparseAffinity graph = build_affinity(blobs.features, 10, 1.0);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const DenseNet encoder = blob_encoder(blobs.features, 71 + seed);
        ClusterConfig cfg = blob_config(71 + seed);
        const double acc_decamp =
            accuracy(blobs.labels, run_decamp(blobs.features, graph, encoder, cfg).labels);
        const double acc_dec = accuracy(blobs.labels, run_dec(blobs.features, encoder, cfg).labels);
        CHECK(acc_decamp >= acc_dec - 0.02);
        CHECK(acc_decamp >= 0.95);
    }
}

TEST_CASE("run_dece2e performs comparably to run_dec on blobs") {
    const BlobData blobs = make_blobs(200, 4, 50, 0.2, 61);
    double dec_sum = 0.0, e2e_sum = 0.0;
    const int runs = 3;
    for (int s = 0; s < runs; ++s) {
        const DenseNet encoder = blob_encoder(blobs.features, 61 + s);
        ClusterConfig cfg = blob_config(61 + s);
        dec_sum += accuracy(blobs.labels, run_dec(blobs.features, encoder, cfg, nullptr).labels);
        e2e_sum +=
            accuracy(blobs.labels, run_dece2e(blobs.features, encoder, cfg, nullptr).labels);
    }
    CHECK(std::abs(dec_sum / runs - e2e_sum / runs) <= 0.05);
}

TEST_CASE("run_dece2e training stays finite") {
    const BlobData blobs = make_blobs(80, 4, 12, 0.3, 67);
    const DenseNet encoder = blob_encoder(blobs.features, 67);
    ClusterConfig cfg = blob_config(67);
    cfg.epochs = 8;
    const TrainResult res = run_dece2e(blobs.features, encoder, cfg, &blobs.labels);
    for (const auto& row : res.trajectory) {
        CHECK(std::isfinite(row.kl_term));
        CHECK(std::isfinite(row.balance_term));
    }
    CHECK(is_row_stochastic(res.q));
}

TEST_CASE("cluster config validation") {
    ClusterConfig cfg;
    cfg.k = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ClusterConfig{};
    cfg.batch_size = 1;
    cfg.xi = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ClusterConfig{};
    cfg.tol_label_change = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
