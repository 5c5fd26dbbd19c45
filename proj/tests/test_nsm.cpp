#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "shadowmap/dynsys.hpp"
#include "shadowmap/nsm.hpp"

using namespace shadowmap;

namespace {

nsm::TrainConfig tiny_config() {
    nsm::TrainConfig cfg;
    cfg.batch_size = 6;
    cfg.iterations = 10;
    cfg.embed_dim = 3;
    cfg.p = 4;
    cfg.k = 3;
    cfg.theiler = 4;
    cfg.generations_per_run = 2;
    cfg.encoder_hidden = {8, 6};
    cfg.decoder_hidden = {6, 8};
    return cfg;
}

std::vector<shadow::ShadowManifold> manifolds_for(const Eigen::MatrixXd& series,
                                                  const nsm::TrainConfig& cfg) {
    std::vector<shadow::ShadowManifold> out;
    for (Eigen::Index v = 0; v < series.cols(); ++v)
        out.push_back(shadow::build_shadow(series.col(v), cfg.p, cfg.tau,
                                           static_cast<int>(v)));
    return out;
}

Eigen::MatrixXd bivariate_series(int length, std::uint64_t seed,
                                 const std::string& preset = "table1-bidir") {
    Rng rng(seed);
    return dynsys::simulate(dynsys::preset(preset), length, 100, rng).values;
}

// total loss recomputed from public ops only
double loss_oracle(const nsm::NsmModel& model, const shadow::NeighborhoodBatch& batch) {
    nsm::Embeddings emb = nsm::encode_batch(model, batch);
    std::vector<Eigen::MatrixXd> predicted = nsm::cross_predict(model, emb);
    double total = 0.0;
    const int n = model.n_vars;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const Eigen::MatrixXd& e_hat =
                predicted[static_cast<std::size_t>(i) * n + j];
            total += neural::l2_loss(e_hat, emb.at(i, j)).first;
            Eigen::MatrixXd rec =
                neural::forward(model.decoders[static_cast<std::size_t>(i)], e_hat);
            total += neural::l2_loss(rec, batch.pooled(i, j)).first;
        }
    return total;
}

} // namespace

TEST_CASE("encode_batch: k=1 embedding equals the single neighbor's encoding") {
    nsm::TrainConfig cfg = tiny_config();
    cfg.k = 1;
    Eigen::MatrixXd series = bivariate_series(80, 3);
    auto manifolds = manifolds_for(series, cfg);
    Rng rng(7);
    auto batch = shadow::sample_batch(manifolds, 1, cfg.effective_theiler(),
                                      cfg.batch_size, rng);
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 99);
    nsm::Embeddings emb = nsm::encode_batch(model, batch);
    for (int b = 0; b < cfg.batch_size; ++b) {
        Eigen::MatrixXd row = batch.tensor(0, 1).row(b);
        Eigen::MatrixXd want = neural::forward(model.encoder(0, 1), row);
        CHECK((emb.at(0, 1).row(b) - want.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("encode_batch: identical input tensors give identical embeddings") {
    nsm::TrainConfig cfg = tiny_config();
    Eigen::MatrixXd series(120, 2);
    Eigen::MatrixXd one = bivariate_series(120, 5).col(0);
    series.col(0) = one;
    series.col(1) = one;  // identical variables
    auto manifolds = manifolds_for(series, cfg);
    Rng rng(11);
    auto batch =
        shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(), cfg.batch_size, rng);
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 42);
    nsm::Embeddings emb = nsm::encode_batch(model, batch);
    CHECK(emb.at(0, 0) == emb.at(0, 1));
}

TEST_CASE("encode_batch matches the per-neighbor mean-pool oracle") {
    nsm::TrainConfig cfg = tiny_config();
    Eigen::MatrixXd series = bivariate_series(100, 13);
    auto manifolds = manifolds_for(series, cfg);
    Rng rng(17);
    auto batch =
        shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(), cfg.batch_size, rng);
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 23);
    nsm::Embeddings emb = nsm::encode_batch(model, batch);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int b = 0; b < cfg.batch_size; ++b) {
                Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(cfg.embed_dim);
                for (int r = 0; r < cfg.k; ++r) {
                    Eigen::MatrixXd row = batch.tensor(i, j).row(b * cfg.k + r);
                    mean += neural::forward(model.encoder(i, j), row).row(0);
                }
                mean /= cfg.k;
                CHECK((emb.at(i, j).row(b) - mean).cwiseAbs().maxCoeff() < 1e-12);
            }
}

TEST_CASE("cross_predict: identity, zero, and hand-multiplied diagonal") {
    nsm::TrainConfig cfg = tiny_config();
    cfg.embed_dim = 2;
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 7);
    nsm::Embeddings emb;
    emb.n_vars = 2;
    emb.e.resize(4);
    Eigen::MatrixXd own(1, 2);
    own << 0.5, 3.0;
    emb.e[0] = own;                         // E_0^{I_0}
    emb.e[3] = Eigen::MatrixXd::Zero(1, 2); // E_1^{I_1}

    model.a(0, 1).row(0) << 1.0, 1.0;
    auto identity = nsm::cross_predict(model, emb);
    CHECK(identity[1] == own);

    model.a(0, 1).row(0) << 0.0, 0.0;
    CHECK(nsm::cross_predict(model, emb)[1].cwiseAbs().maxCoeff() == 0.0);

    model.a(0, 1).row(0) << 2.0, -1.0;
    Eigen::MatrixXd want(1, 2);
    want << 1.0, -3.0;
    CHECK(nsm::cross_predict(model, emb)[1] == want);
}

TEST_CASE("training_step decreases the loss on a held batch for most inits") {
    nsm::TrainConfig cfg = tiny_config();
    cfg.lr = 3e-4;
    Eigen::MatrixXd series = bivariate_series(150, 29);
    auto manifolds = manifolds_for(series, cfg);
    int improved = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(1000 + static_cast<std::uint64_t>(trial));
        auto batch = shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(),
                                          cfg.batch_size, rng);
        nsm::NsmModel model =
            nsm::NsmModel::init(cfg, 2, 5000 + static_cast<std::uint64_t>(trial));
        const double before = loss_oracle(model, batch);
        neural::AdamState adam;
        adam.lr = cfg.lr;
        nsm::training_step(model, batch, adam);
        nsm::training_step(model, batch, adam);
        if (loss_oracle(model, batch) < before)
            ++improved;
    }
    CHECK(improved >= 95);
}

TEST_CASE("training_step with zero learning rate changes nothing") {
    nsm::TrainConfig cfg = tiny_config();
    Eigen::MatrixXd series = bivariate_series(100, 31);
    auto manifolds = manifolds_for(series, cfg);
    Rng rng(37);
    auto batch =
        shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(), cfg.batch_size, rng);
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 41);
    const double before = loss_oracle(model, batch);
    neural::AdamState adam;
    adam.lr = 0.0;
    nsm::StepLosses losses = nsm::training_step(model, batch, adam);
    CHECK(losses.total == doctest::Approx(before).epsilon(1e-12));
    CHECK(loss_oracle(model, batch) == before);
}

TEST_CASE("reported step loss matches recomputation from a checkpoint to 1e-10") {
    nsm::TrainConfig cfg = tiny_config();
    Eigen::MatrixXd series = bivariate_series(100, 43);
    auto manifolds = manifolds_for(series, cfg);
    Rng rng(47);
    auto batch =
        shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(), cfg.batch_size, rng);
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 53);
    // a few steps so the checkpoint is not the init
    neural::AdamState adam;
    adam.lr = cfg.lr;
    for (int s = 0; s < 3; ++s)
        nsm::training_step(model, batch, adam);

    const std::string path = "test_nsm_checkpoint.bin";
    model.save(path);
    nsm::StepLosses losses = nsm::training_step(model, batch, adam);  // mutates model
    nsm::NsmModel loaded = nsm::NsmModel::load(path);
    CHECK(std::abs(loss_oracle(loaded, batch) - losses.total) < 1e-10);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint round-trip preserves every parameter bitwise") {
    nsm::TrainConfig cfg = tiny_config();
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 3, 61);
    const std::string path = "test_nsm_roundtrip.bin";
    model.save(path);
    nsm::NsmModel loaded = nsm::NsmModel::load(path);
    auto a = model.named_parameters();
    auto b = loaded.named_parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(*a[i].second == *b[i].second);
    }
    std::filesystem::remove(path);
}

TEST_CASE("one step with real data moves every encoder, decoder and A block") {
    nsm::TrainConfig cfg = tiny_config();
    Eigen::MatrixXd series = bivariate_series(100, 67);
    auto manifolds = manifolds_for(series, cfg);
    Rng rng(71);
    auto batch =
        shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(), cfg.batch_size, rng);
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 73);
    nsm::NsmModel before = model;
    neural::AdamState adam;
    adam.lr = cfg.lr;
    nsm::training_step(model, batch, adam);

    for (std::size_t e = 0; e < model.encoders.size(); ++e) {
        bool changed = false;
        for (std::size_t l = 0; l < model.encoders[e].layers.size(); ++l)
            if (model.encoders[e].layers[l].w != before.encoders[e].layers[l].w)
                changed = true;
        CHECK(changed);
    }
    for (std::size_t d = 0; d < model.decoders.size(); ++d) {
        bool changed = false;
        for (std::size_t l = 0; l < model.decoders[d].layers.size(); ++l)
            if (model.decoders[d].layers[l].w != before.decoders[d].layers[l].w)
                changed = true;
        CHECK(changed);
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            if (i != j)
                CHECK(model.a(i, j) != before.a(i, j));
}

TEST_CASE("extract_betas: identity, graded diagonal, zero") {
    nsm::TrainConfig cfg = tiny_config();
    cfg.embed_dim = 6;
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 79);
    model.a(0, 1) = Eigen::MatrixXd::Ones(1, 6);
    model.a(1, 0).row(0) << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    Eigen::MatrixXd beta = nsm::extract_betas(model);
    CHECK(beta(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(beta(1, 0) == doctest::Approx(0.35).epsilon(1e-15));
    model.a(0, 1).setZero();
    CHECK(nsm::extract_betas(model)(0, 1) == 0.0);
    // negative entries count through the absolute value
    model.a(0, 1).row(0) << -1, -1, -1, -1, -1, -1;
    CHECK(nsm::extract_betas(model)(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("train_run: zero iterations returns the initialization statistic") {
    nsm::TrainConfig cfg = tiny_config();
    cfg.iterations = 0;
    auto source = [](int, Rng& rng) {
        return dynsys::simulate(dynsys::preset("table1-indep"), 60, 50, rng).values;
    };
    nsm::RunResult rr = nsm::train_run(cfg, 2, source, 83);
    CHECK(rr.beta(0, 1) == 0.5);
    CHECK(rr.beta(1, 0) == 0.5);
    CHECK(rr.beta(0, 0) == 0.0);
}

TEST_CASE("train_run is deterministic in the run seed") {
    nsm::TrainConfig cfg = tiny_config();
    cfg.iterations = 25;
    auto source = [](int, Rng& rng) {
        return dynsys::simulate(dynsys::preset("table1-bidir"), 80, 50, rng).values;
    };
    nsm::RunResult a = nsm::train_run(cfg, 2, source, 89);
    nsm::RunResult b = nsm::train_run(cfg, 2, source, 89);
    CHECK(a.beta == b.beta);
    nsm::RunResult c = nsm::train_run(cfg, 2, source, 90);
    CHECK(a.beta != c.beta);
}

TEST_CASE("relabeling the two variables relabels the betas bitwise") {
    nsm::TrainConfig cfg = tiny_config();
    Eigen::MatrixXd series = bivariate_series(120, 97);
    Eigen::MatrixXd swapped(series.rows(), 2);
    swapped.col(0) = series.col(1);
    swapped.col(1) = series.col(0);

    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 101);
    nsm::NsmModel perm = model;
    std::swap(perm.encoders[0], perm.encoders[1]);
    std::swap(perm.decoders[0], perm.decoders[1]);
    std::swap(perm.a(0, 1), perm.a(1, 0));

    auto manifolds = manifolds_for(series, cfg);
    auto manifolds_perm = manifolds_for(swapped, cfg);
    neural::AdamState adam_a, adam_b;
    adam_a.lr = adam_b.lr = cfg.lr;
    Rng rng_a(103), rng_b(103);
    for (int step = 0; step < 5; ++step) {
        auto batch_a = shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(),
                                            cfg.batch_size, rng_a);
        auto batch_b = shadow::sample_batch(manifolds_perm, cfg.k,
                                            cfg.effective_theiler(), cfg.batch_size,
                                            rng_b);
        nsm::training_step(model, batch_a, adam_a);
        nsm::training_step(perm, batch_b, adam_b);
    }
    Eigen::MatrixXd beta = nsm::extract_betas(model);
    Eigen::MatrixXd beta_perm = nsm::extract_betas(perm);
    CHECK(beta(0, 1) == beta_perm(1, 0));
    CHECK(beta(1, 0) == beta_perm(0, 1));
}

TEST_CASE("per-pair encoder variant trains and keeps its own networks") {
    nsm::TrainConfig cfg = tiny_config();
    cfg.encoders_per_pair = true;
    Eigen::MatrixXd series = bivariate_series(100, 107);
    auto manifolds = manifolds_for(series, cfg);
    Rng rng(109);
    auto batch =
        shadow::sample_batch(manifolds, cfg.k, cfg.effective_theiler(), cfg.batch_size, rng);
    nsm::NsmModel model = nsm::NsmModel::init(cfg, 2, 113);
    REQUIRE(model.encoders.size() == 4);
    neural::AdamState adam;
    adam.lr = cfg.lr;
    nsm::StepLosses losses = nsm::training_step(model, batch, adam);
    CHECK(std::isfinite(losses.total));
    CHECK(nsm::extract_betas(model).allFinite());
}
