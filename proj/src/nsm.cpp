#include "shadowmap/nsm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace shadowmap::nsm {

void TrainConfig::validate() const {
    if (batch_size < 1 || iterations < 0 || !(lr >= 0.0) || embed_dim < 1 ||
        p < 1 || tau < 1 || k < 1 || generations_per_run < 1)
        throw std::invalid_argument("TrainConfig: all sizes must be positive");
}

NsmModel NsmModel::init(const TrainConfig& cfg, int n_vars, std::uint64_t seed) {
    cfg.validate();
    if (n_vars < 2)
        throw std::invalid_argument("NsmModel: need at least two variables");
    NsmModel model;
    model.n_vars = n_vars;
    model.p = cfg.p;
    model.embed_dim = cfg.embed_dim;
    model.encoders_per_pair = cfg.encoders_per_pair;

    std::vector<int> enc_dims{cfg.p};
    enc_dims.insert(enc_dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    enc_dims.push_back(cfg.embed_dim);
    std::vector<int> dec_dims{cfg.embed_dim};
    dec_dims.insert(dec_dims.end(), cfg.decoder_hidden.begin(), cfg.decoder_hidden.end());
    dec_dims.push_back(cfg.p);

    const int n_enc = cfg.encoders_per_pair ? n_vars * n_vars : n_vars;
    for (int e = 0; e < n_enc; ++e) {
        Rng r(derive_seed(seed, 0x100 + static_cast<std::uint64_t>(e)));
        model.encoders.push_back(neural::DenseNet::he_uniform(enc_dims, r));
    }
    for (int d = 0; d < n_vars; ++d) {
        Rng r(derive_seed(seed, 0x200 + static_cast<std::uint64_t>(d)));
        model.decoders.push_back(neural::DenseNet::he_uniform(dec_dims, r));
    }
    // 0.5 leaves room for both growth and shrinkage of the coefficients
    model.a_diag.assign(static_cast<std::size_t>(n_vars) * n_vars,
                        Eigen::MatrixXd::Constant(1, cfg.embed_dim, 0.5));
    return model;
}

neural::DenseNet& NsmModel::encoder(int var, int index_source) {
    return encoders_per_pair
               ? encoders[static_cast<std::size_t>(var) * n_vars + index_source]
               : encoders[static_cast<std::size_t>(var)];
}

const neural::DenseNet& NsmModel::encoder(int var, int index_source) const {
    return encoders_per_pair
               ? encoders[static_cast<std::size_t>(var) * n_vars + index_source]
               : encoders[static_cast<std::size_t>(var)];
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> NsmModel::named_parameters() {
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> out;
    for (std::size_t e = 0; e < encoders.size(); ++e)
        for (std::size_t l = 0; l < encoders[e].layers.size(); ++l) {
            out.emplace_back("enc" + std::to_string(e) + "/w" + std::to_string(l),
                             &encoders[e].layers[l].w);
            out.emplace_back("enc" + std::to_string(e) + "/b" + std::to_string(l),
                             &encoders[e].layers[l].b);
        }
    for (std::size_t d = 0; d < decoders.size(); ++d)
        for (std::size_t l = 0; l < decoders[d].layers.size(); ++l) {
            out.emplace_back("dec" + std::to_string(d) + "/w" + std::to_string(l),
                             &decoders[d].layers[l].w);
            out.emplace_back("dec" + std::to_string(d) + "/b" + std::to_string(l),
                             &decoders[d].layers[l].b);
        }
    for (int i = 0; i < n_vars; ++i)
        for (int j = 0; j < n_vars; ++j)
            if (i != j)
                out.emplace_back("a/" + std::to_string(i) + "_" + std::to_string(j),
                                 &a(i, j));
    return out;
}

void NsmModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("NsmModel::save: cannot open " + path);
    Eigen::MatrixXd meta(1, 4);
    meta << n_vars, p, embed_dim, (encoders_per_pair ? 1.0 : 0.0);
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors;
    tensors.emplace_back("meta", &meta);
    auto named = const_cast<NsmModel*>(this)->named_parameters();
    for (auto& [name, mat] : named)
        tensors.emplace_back(name, mat);
    neural::write_tensors(out, tensors);
}

NsmModel NsmModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("NsmModel::load: cannot open " + path);
    auto tensors = neural::read_tensors(in);
    auto meta_it = tensors.find("meta");
    if (meta_it == tensors.end() || meta_it->second.size() != 4)
        throw std::runtime_error("NsmModel::load: missing meta tensor");
    const Eigen::MatrixXd& meta = meta_it->second;

    NsmModel model;
    model.n_vars = static_cast<int>(meta(0, 0));
    model.p = static_cast<int>(meta(0, 1));
    model.embed_dim = static_cast<int>(meta(0, 2));
    model.encoders_per_pair = meta(0, 3) != 0.0;

    auto fetch = [&](const std::string& name) -> const Eigen::MatrixXd& {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw std::runtime_error("NsmModel::load: missing tensor " + name);
        return it->second;
    };
    auto load_net = [&](const std::string& prefix) {
        neural::DenseNet net;
        for (int l = 0;; ++l) {
            auto wit = tensors.find(prefix + "/w" + std::to_string(l));
            if (wit == tensors.end())
                break;
            neural::DenseLayer layer;
            layer.w = wit->second;
            layer.b = fetch(prefix + "/b" + std::to_string(l));
            net.layers.push_back(std::move(layer));
        }
        if (net.layers.empty())
            throw std::runtime_error("NsmModel::load: missing network " + prefix);
        return net;
    };

    const int n_enc =
        model.encoders_per_pair ? model.n_vars * model.n_vars : model.n_vars;
    for (int e = 0; e < n_enc; ++e)
        model.encoders.push_back(load_net("enc" + std::to_string(e)));
    for (int d = 0; d < model.n_vars; ++d)
        model.decoders.push_back(load_net("dec" + std::to_string(d)));
    model.a_diag.assign(static_cast<std::size_t>(model.n_vars) * model.n_vars,
                        Eigen::MatrixXd::Zero(1, model.embed_dim));
    for (int i = 0; i < model.n_vars; ++i)
        for (int j = 0; j < model.n_vars; ++j)
            if (i != j)
                model.a(i, j) = fetch("a/" + std::to_string(i) + "_" + std::to_string(j));
    return model;
}

namespace {

// Encoder pass for one batch. Only the own-index embeddings E_i^{I_i} need
// activations for backprop (the prediction loss trains A alone, and the
// reconstruction path reaches the encoders only through E_i^{I_i}), so the
// caches cover just the diagonal pairs. Off-diagonal inputs are stacked into
// one forward per variable to keep the GEMMs large.
struct EncodePass {
    Embeddings emb;
    std::vector<neural::ForwardCache> diag_caches;  // per variable
};

EncodePass encode_with_caches(const NsmModel& model,
                              const shadow::NeighborhoodBatch& batch) {
    if (batch.n_vars != model.n_vars)
        throw std::invalid_argument("encode_batch: variable count mismatch");
    if (batch.p != model.p)
        throw std::invalid_argument("encode_batch: lag count mismatch");
    const int n = model.n_vars;
    const int rows_per_pair = batch.batch * batch.k;

    EncodePass pass;
    pass.emb.n_vars = n;
    pass.emb.e.resize(static_cast<std::size_t>(n) * n);
    pass.diag_caches.resize(static_cast<std::size_t>(n));

    auto pool = [&](const Eigen::MatrixXd& flat_out) {
        Eigen::MatrixXd pooled(batch.batch, model.embed_dim);
        for (int b = 0; b < batch.batch; ++b)
            pooled.row(b) =
                flat_out.middleRows(static_cast<Eigen::Index>(b) * batch.k, batch.k)
                    .colwise()
                    .mean();
        return pooled;
    };

    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd diag_out =
            neural::forward(model.encoder(i, i), batch.tensor(i, i),
                            &pass.diag_caches[static_cast<std::size_t>(i)]);
        pass.emb.e[static_cast<std::size_t>(i) * n + i] = pool(diag_out);

        if (model.encoders_per_pair) {
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                pass.emb.e[static_cast<std::size_t>(i) * n + j] =
                    pool(neural::forward(model.encoder(i, j), batch.tensor(i, j)));
            }
        } else if (n > 1) {
            Eigen::MatrixXd stacked(
                static_cast<Eigen::Index>(n - 1) * rows_per_pair, batch.p);
            int slot = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                stacked.middleRows(static_cast<Eigen::Index>(slot) * rows_per_pair,
                                   rows_per_pair) = batch.tensor(i, j);
                ++slot;
            }
            Eigen::MatrixXd out = neural::forward(model.encoder(i, 0), stacked);
            slot = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                pass.emb.e[static_cast<std::size_t>(i) * n + j] = pool(
                    out.middleRows(static_cast<Eigen::Index>(slot) * rows_per_pair,
                                   rows_per_pair));
                ++slot;
            }
        }
    }
    return pass;
}

} // namespace

Embeddings encode_batch(const NsmModel& model, const shadow::NeighborhoodBatch& batch) {
    return encode_with_caches(model, batch).emb;
}

std::vector<Eigen::MatrixXd> cross_predict(const NsmModel& model,
                                           const Embeddings& embeddings) {
    const int n = model.n_vars;
    if (embeddings.n_vars != n)
        throw std::invalid_argument("cross_predict: variable count mismatch");
    std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const Eigen::MatrixXd& own = embeddings.at(i, i);
            if (own.cols() != model.embed_dim)
                throw std::invalid_argument("cross_predict: embedding width mismatch");
            out[static_cast<std::size_t>(i) * n + j] =
                own.array().rowwise() * model.a(i, j).row(0).array();
        }
    return out;
}

StepLosses training_step(NsmModel& model, const shadow::NeighborhoodBatch& batch,
                         neural::AdamState& adam) {
    const int n = model.n_vars;
    EncodePass pass = encode_with_caches(model, batch);

    // gradient accumulators
    std::vector<neural::NetGrads> enc_grads;
    for (const auto& enc : model.encoders)
        enc_grads.push_back(neural::NetGrads::zeros_like(enc));
    std::vector<neural::NetGrads> dec_grads;
    for (const auto& dec : model.decoders)
        dec_grads.push_back(neural::NetGrads::zeros_like(dec));
    std::vector<Eigen::MatrixXd> a_grads(static_cast<std::size_t>(n) * n);
    // gradient w.r.t. the own-index embeddings (reconstruction path only;
    // the prediction loss optimizes the A blocks alone)
    std::vector<Eigen::MatrixXd> d_own(
        static_cast<std::size_t>(n),
        Eigen::MatrixXd::Zero(batch.batch, model.embed_dim));

    StepLosses losses;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const std::size_t ij = static_cast<std::size_t>(i) * n + j;
            const Eigen::MatrixXd& e_own =
                pass.emb.e[static_cast<std::size_t>(i) * n + i];
            const Eigen::MatrixXd& e_cross = pass.emb.e[ij];
            Eigen::MatrixXd e_hat =
                e_own.array().rowwise() * model.a(i, j).row(0).array();

            auto [pred_loss, d_pred] = neural::l2_loss(e_hat, e_cross);
            losses.prediction += pred_loss;

            // reconstruction of the mean-pooled indexed neighborhood
            neural::ForwardCache dec_cache;
            Eigen::MatrixXd rec = neural::forward(model.decoders[static_cast<std::size_t>(i)],
                                                  e_hat, &dec_cache);
            auto [rec_loss, d_rec] = neural::l2_loss(rec, batch.pooled(i, j));
            losses.reconstruction += rec_loss;
            Eigen::MatrixXd d_hat_rec =
                neural::backward(model.decoders[static_cast<std::size_t>(i)], dec_cache,
                                 d_rec, dec_grads[static_cast<std::size_t>(i)], true);

            a_grads[ij] = ((d_pred + d_hat_rec).cwiseProduct(e_own)).colwise().sum();
            d_own[static_cast<std::size_t>(i)] +=
                (d_hat_rec.array().rowwise() * model.a(i, j).row(0).array()).matrix();
        }
    }
    losses.total = losses.prediction + losses.reconstruction;
    if (!std::isfinite(losses.total))
        throw std::runtime_error("training_step: non-finite loss");

    // backprop the pooled own-index gradients through each variable's encoder
    const double inv_k = 1.0 / batch.k;
    Eigen::MatrixXd flat(static_cast<Eigen::Index>(batch.batch) * batch.k,
                         model.embed_dim);
    for (int i = 0; i < n; ++i) {
        for (int b = 0; b < batch.batch; ++b)
            flat.middleRows(static_cast<Eigen::Index>(b) * batch.k, batch.k) =
                (d_own[static_cast<std::size_t>(i)].row(b) * inv_k)
                    .replicate(batch.k, 1);
        const std::size_t enc_idx =
            model.encoders_per_pair ? static_cast<std::size_t>(i) * n + i
                                    : static_cast<std::size_t>(i);
        neural::backward(model.encoder(i, i),
                         pass.diag_caches[static_cast<std::size_t>(i)], flat,
                         enc_grads[enc_idx], false);
    }

    // one Adam step over everything
    std::vector<Eigen::MatrixXd*> params;
    std::vector<const Eigen::MatrixXd*> grads;
    for (std::size_t e = 0; e < model.encoders.size(); ++e)
        for (std::size_t l = 0; l < model.encoders[e].layers.size(); ++l) {
            params.push_back(&model.encoders[e].layers[l].w);
            grads.push_back(&enc_grads[e].layers[l].w);
            params.push_back(&model.encoders[e].layers[l].b);
            grads.push_back(&enc_grads[e].layers[l].b);
        }
    for (std::size_t d = 0; d < model.decoders.size(); ++d)
        for (std::size_t l = 0; l < model.decoders[d].layers.size(); ++l) {
            params.push_back(&model.decoders[d].layers[l].w);
            grads.push_back(&dec_grads[d].layers[l].w);
            params.push_back(&model.decoders[d].layers[l].b);
            grads.push_back(&dec_grads[d].layers[l].b);
        }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) {
                params.push_back(&model.a(i, j));
                grads.push_back(&a_grads[static_cast<std::size_t>(i) * n + j]);
            }
    neural::adam_step(params, grads, adam);
    return losses;
}

Eigen::MatrixXd extract_betas(const NsmModel& model) {
    const int n = model.n_vars;
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j)
                beta(i, j) = model.a(i, j).cwiseAbs().mean();
    return beta;
}

RunResult train_run(const TrainConfig& cfg, int n_vars, const DataSource& source,
                    std::uint64_t run_seed) {
    cfg.validate();
    Rng data_rng(derive_seed(run_seed, 1));
    Rng train_rng(derive_seed(run_seed, 2));

    std::vector<std::vector<shadow::ShadowManifold>> manifolds;
    std::vector<std::vector<shadow::KnnCache>> caches;
    manifolds.reserve(cfg.generations_per_run);
    for (int g = 0; g < cfg.generations_per_run; ++g) {
        Eigen::MatrixXd series = source(g, data_rng);
        if (series.cols() != n_vars)
            throw std::invalid_argument("train_run: data source width mismatch");
        std::vector<shadow::ShadowManifold> ms;
        for (int v = 0; v < n_vars; ++v)
            ms.push_back(shadow::build_shadow(series.col(v), cfg.p, cfg.tau, v));
        manifolds.push_back(std::move(ms));
    }
    caches.reserve(manifolds.size());
    for (auto& gen : manifolds) {
        std::vector<shadow::KnnCache> cs;
        cs.reserve(gen.size());
        for (auto& m : gen)
            cs.emplace_back(&m, cfg.k, cfg.effective_theiler());
        caches.push_back(std::move(cs));
    }

    RunResult result;
    result.seed = run_seed;
    result.model = NsmModel::init(cfg, n_vars, derive_seed(run_seed, 3));
    neural::AdamState adam;
    adam.lr = cfg.lr;

    for (long it = 0; it < cfg.iterations; ++it) {
        const auto g = train_rng.uniform_index(manifolds.size());
        shadow::NeighborhoodBatch batch = shadow::sample_batch_cached(
            manifolds[g], caches[g], cfg.k, cfg.batch_size, train_rng);
        result.last_losses = training_step(result.model, batch, adam);
    }
    result.beta = extract_betas(result.model);
    return result;
}

} // namespace shadowmap::nsm
