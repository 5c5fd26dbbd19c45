#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "shadowmap/rng.hpp"

namespace shadowmap::shadow {

// Delay-coordinate embedding of one scalar series. Row t of `points` is
// (x_t, x_{t+tau}, ..., x_{t+(p-1)tau}); rows() == T - (p-1)*tau.
struct ShadowManifold {
    int var_id = 0;
    int p = 1;
    int tau = 1;
    Eigen::MatrixXd points;            // N x p
    std::vector<int> origin_times;     // row -> source time index (row t -> t)
};

struct NeighborSet {
    std::vector<int> anchors;
    Eigen::MatrixXi indices;           // anchors x k
    int k = 0;
    int theiler = 0;
};

// Indexed neighborhood tensors for every ordered variable pair (i,j):
// manifold i's points gathered at the neighbor indices computed on manifold
// j, around shared anchors. tensor(i,j) is stored flattened as a
// (batch*k) x p matrix, neighbor-major within each anchor.
struct NeighborhoodBatch {
    int n_vars = 0;
    int batch = 0;
    int k = 0;
    int p = 0;
    std::vector<int> anchors;                  // batch
    std::vector<Eigen::MatrixXi> indices;      // per j: batch x k
    std::vector<Eigen::MatrixXd> tensors;      // per (i,j): (batch*k) x p

    const Eigen::MatrixXd& tensor(int i, int j) const {
        return tensors[static_cast<std::size_t>(i) * n_vars + j];
    }
    // mean over the k neighbors: batch x p
    Eigen::MatrixXd pooled(int i, int j) const;
};

ShadowManifold build_shadow(const Eigen::VectorXd& series, int p, int tau,
                            int var_id = 0);

// k nearest rows to `anchor` by Euclidean distance, excluding every row with
// |row - anchor| <= theiler; ties broken by smaller time index. Result is
// sorted by (distance, index).
std::vector<int> knn(const ShadowManifold& manifold, int anchor, int k,
                     int theiler);

// Memoizes knn per anchor; the training loop revisits anchors many times.
class KnnCache {
public:
    KnnCache(const ShadowManifold* manifold, int k, int theiler)
        : manifold_(manifold), k_(k), theiler_(theiler),
          cache_(static_cast<std::size_t>(manifold->points.rows())) {}

    const std::vector<int>& get(int anchor);

private:
    const ShadowManifold* manifold_;
    int k_;
    int theiler_;
    std::vector<std::vector<int>> cache_;
};

NeighborhoodBatch sample_batch(const std::vector<ShadowManifold>& manifolds,
                               int k, int theiler, int batch_size, Rng& rng);

// Same sampling, but with per-variable knn caches (used by training runs).
NeighborhoodBatch sample_batch_cached(
    const std::vector<ShadowManifold>& manifolds, std::vector<KnnCache>& caches,
    int k, int batch_size, Rng& rng);

void write_manifold_csv(const std::string& path, const ShadowManifold& manifold);

} // namespace shadowmap::shadow
