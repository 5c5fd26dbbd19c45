#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shadowmap/neural.hpp"
#include "shadowmap/rng.hpp"
#include "shadowmap/shadow.hpp"

namespace shadowmap::nsm {

struct TrainConfig {
    int batch_size = 20;
    long iterations = 300000;
    double lr = 3e-4;
    int embed_dim = 6;
    int p = 10;
    int tau = 1;
    int k = 10;
    int theiler = -1;                 // -1: default to p
    int generations_per_run = 10;
    bool encoders_per_pair = false;   // one encoder per (variable, index source)
    std::vector<int> encoder_hidden = {32, 16};
    std::vector<int> decoder_hidden = {16, 32};

    int effective_theiler() const { return theiler < 0 ? p : theiler; }
    void validate() const;
};

// Per-variable encoders/decoders plus the diagonal cross-prediction blocks.
// a(i,j) (1 x embed_dim) scales E_i^{I_i} elementwise to predict E_i^{I_j};
// a large learned block means variable j's neighbor times organize variable
// i's manifold, which is the cross-mapping signature of an edge i -> j.
struct NsmModel {
    int n_vars = 0;
    int p = 0;
    int embed_dim = 0;
    bool encoders_per_pair = false;
    std::vector<neural::DenseNet> encoders;  // n_vars, or n_vars^2 when per-pair
    std::vector<neural::DenseNet> decoders;  // n_vars
    std::vector<Eigen::MatrixXd> a_diag;     // n_vars^2, entry (i,j) used iff i != j

    static NsmModel init(const TrainConfig& cfg, int n_vars, std::uint64_t seed);

    neural::DenseNet& encoder(int var, int index_source);
    const neural::DenseNet& encoder(int var, int index_source) const;
    Eigen::MatrixXd& a(int i, int j) {
        return a_diag[static_cast<std::size_t>(i) * n_vars + j];
    }
    const Eigen::MatrixXd& a(int i, int j) const {
        return a_diag[static_cast<std::size_t>(i) * n_vars + j];
    }

    // Stable parameter ordering shared by training and checkpoints.
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> named_parameters();
    void save(const std::string& path) const;
    static NsmModel load(const std::string& path);
};

// Embeddings E_i^{I_j} (batch x embed_dim) for every ordered pair, obtained
// by encoding each of the k neighbor delay-vectors and averaging.
struct Embeddings {
    int n_vars = 0;
    std::vector<Eigen::MatrixXd> e;  // per (i,j)

    const Eigen::MatrixXd& at(int i, int j) const {
        return e[static_cast<std::size_t>(i) * n_vars + j];
    }
};

Embeddings encode_batch(const NsmModel& model, const shadow::NeighborhoodBatch& batch);

// Ehat_i^{I_j} = a(i,j) .* E_i^{I_i} for all i != j; diagonal slots stay empty.
std::vector<Eigen::MatrixXd> cross_predict(const NsmModel& model,
                                           const Embeddings& embeddings);

struct StepLosses {
    double total = 0.0;
    double prediction = 0.0;
    double reconstruction = 0.0;
};

// One optimization step on all encoder, decoder and A parameters:
// total loss = sum_{i!=j} mse(a_ij .* E_i^{I_i}, E_i^{I_j})
//            + sum_{i!=j} mse(dec_i(a_ij .* E_i^{I_i}), meanpool_k M_i^{I_j}).
StepLosses training_step(NsmModel& model, const shadow::NeighborhoodBatch& batch,
                         neural::AdamState& adam);

// beta(i,j) = mean |a(i,j)| for i != j: the path coefficient for edge i -> j.
Eigen::MatrixXd extract_betas(const NsmModel& model);

// Yields the series set (T x n_vars) for one generation.
using DataSource = std::function<Eigen::MatrixXd(int generation, Rng& rng)>;

struct RunResult {
    Eigen::MatrixXd beta;     // n_vars x n_vars
    NsmModel model;
    std::uint64_t seed = 0;
    StepLosses last_losses;
};

// Full training run: generations_per_run fresh series sets, shadow manifolds
// for each, batches drawn from a random generation per iteration, A amortized
// across all of them.
RunResult train_run(const TrainConfig& cfg, int n_vars, const DataSource& source,
                    std::uint64_t run_seed);

} // namespace shadowmap::nsm
