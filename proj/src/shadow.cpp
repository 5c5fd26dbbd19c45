#include "shadowmap/shadow.hpp"

#include <algorithm>
#include <stdexcept>

#include "shadowmap/csv.hpp"

namespace shadowmap::shadow {

Eigen::MatrixXd NeighborhoodBatch::pooled(int i, int j) const {
    const Eigen::MatrixXd& flat = tensor(i, j);
    Eigen::MatrixXd out(batch, p);
    for (int b = 0; b < batch; ++b)
        out.row(b) = flat.middleRows(static_cast<Eigen::Index>(b) * k, k).colwise().mean();
    return out;
}

ShadowManifold build_shadow(const Eigen::VectorXd& series, int p, int tau,
                            int var_id) {
    if (p < 1)
        throw std::invalid_argument("build_shadow: p must be >= 1");
    if (tau < 1)
        throw std::invalid_argument("build_shadow: tau must be >= 1");
    const auto T = static_cast<int>(series.size());
    const int min_len = (p - 1) * tau + 1;
    if (T < min_len)
        throw std::invalid_argument("build_shadow: series too short, need at least " +
                                    std::to_string(min_len) + " samples");
    const int N = T - (p - 1) * tau;
    ShadowManifold m;
    m.var_id = var_id;
    m.p = p;
    m.tau = tau;
    m.points.resize(N, p);
    for (int lag = 0; lag < p; ++lag)
        m.points.col(lag) = series.segment(static_cast<Eigen::Index>(lag) * tau, N);
    m.origin_times.resize(N);
    for (int t = 0; t < N; ++t)
        m.origin_times[t] = t;
    return m;
}

std::vector<int> knn(const ShadowManifold& manifold, int anchor, int k,
                     int theiler) {
    const int N = static_cast<int>(manifold.points.rows());
    if (anchor < 0 || anchor >= N)
        throw std::invalid_argument("knn: anchor out of range");
    if (k < 1)
        throw std::invalid_argument("knn: k must be >= 1");
    if (theiler < 0)
        throw std::invalid_argument("knn: theiler must be >= 0");

    // squared distances, ordering is the same as Euclidean
    Eigen::VectorXd d2 =
        (manifold.points.rowwise() - manifold.points.row(anchor)).rowwise().squaredNorm();

    std::vector<std::pair<double, int>> eligible;
    eligible.reserve(N);
    for (int t = 0; t < N; ++t)
        if (std::abs(t - anchor) > theiler)
            eligible.emplace_back(d2[t], t);
    if (static_cast<int>(eligible.size()) < k)
        throw std::runtime_error("knn: only " + std::to_string(eligible.size()) +
                                 " eligible rows outside the exclusion zone, need " +
                                 std::to_string(k));
    std::partial_sort(eligible.begin(), eligible.begin() + k, eligible.end());
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i)
        out[i] = eligible[i].second;
    return out;
}

const std::vector<int>& KnnCache::get(int anchor) {
    auto& slot = cache_[static_cast<std::size_t>(anchor)];
    if (slot.empty())
        slot = knn(*manifold_, anchor, k_, theiler_);
    return slot;
}

namespace {

NeighborhoodBatch assemble(const std::vector<ShadowManifold>& manifolds,
                           const std::vector<int>& anchors, int k,
                           const std::vector<Eigen::MatrixXi>& indices) {
    const int n = static_cast<int>(manifolds.size());
    const int batch = static_cast<int>(anchors.size());
    const int p = manifolds[0].p;

    NeighborhoodBatch out;
    out.n_vars = n;
    out.batch = batch;
    out.k = k;
    out.p = p;
    out.anchors = anchors;
    out.indices = indices;
    out.tensors.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            Eigen::MatrixXd flat(static_cast<Eigen::Index>(batch) * k, p);
            for (int b = 0; b < batch; ++b)
                for (int r = 0; r < k; ++r)
                    flat.row(static_cast<Eigen::Index>(b) * k + r) =
                        manifolds[i].points.row(indices[j](b, r));
            out.tensors[static_cast<std::size_t>(i) * n + j] = std::move(flat);
        }
    }
    return out;
}

void check_manifolds(const std::vector<ShadowManifold>& manifolds) {
    if (manifolds.empty())
        throw std::invalid_argument("sample_batch: no manifolds");
    for (const auto& m : manifolds) {
        if (m.points.rows() != manifolds[0].points.rows() ||
            m.p != manifolds[0].p || m.tau != manifolds[0].tau)
            throw std::invalid_argument(
                "sample_batch: manifolds must share length, p and tau");
    }
}

} // namespace

NeighborhoodBatch sample_batch(const std::vector<ShadowManifold>& manifolds,
                               int k, int theiler, int batch_size, Rng& rng) {
    check_manifolds(manifolds);
    if (batch_size < 1)
        throw std::invalid_argument("sample_batch: batch_size must be >= 1");
    const int n = static_cast<int>(manifolds.size());
    const int N = static_cast<int>(manifolds[0].points.rows());

    std::vector<int> anchors(batch_size);
    for (int b = 0; b < batch_size; ++b)
        anchors[b] = static_cast<int>(rng.uniform_index(N));

    std::vector<Eigen::MatrixXi> indices(n, Eigen::MatrixXi(batch_size, k));
    for (int j = 0; j < n; ++j)
        for (int b = 0; b < batch_size; ++b) {
            std::vector<int> nb = knn(manifolds[j], anchors[b], k, theiler);
            for (int r = 0; r < k; ++r)
                indices[j](b, r) = nb[r];
        }
    return assemble(manifolds, anchors, k, indices);
}

NeighborhoodBatch sample_batch_cached(
    const std::vector<ShadowManifold>& manifolds, std::vector<KnnCache>& caches,
    int k, int batch_size, Rng& rng) {
    check_manifolds(manifolds);
    if (caches.size() != manifolds.size())
        throw std::invalid_argument("sample_batch_cached: cache count mismatch");
    const int n = static_cast<int>(manifolds.size());
    const int N = static_cast<int>(manifolds[0].points.rows());

    std::vector<int> anchors(batch_size);
    for (int b = 0; b < batch_size; ++b)
        anchors[b] = static_cast<int>(rng.uniform_index(N));

    std::vector<Eigen::MatrixXi> indices(n, Eigen::MatrixXi(batch_size, k));
    for (int j = 0; j < n; ++j)
        for (int b = 0; b < batch_size; ++b) {
            const std::vector<int>& nb = caches[j].get(anchors[b]);
            for (int r = 0; r < k; ++r)
                indices[j](b, r) = nb[r];
        }
    return assemble(manifolds, anchors, k, indices);
}

void write_manifold_csv(const std::string& path, const ShadowManifold& m) {
    std::vector<std::string> header{"time"};
    for (int lag = 0; lag < m.p; ++lag)
        header.push_back("lag" + std::to_string(lag));
    Eigen::MatrixXd with_time(m.points.rows(), m.p + 1);
    for (Eigen::Index r = 0; r < m.points.rows(); ++r)
        with_time(r, 0) = m.origin_times[static_cast<std::size_t>(r)];
    with_time.rightCols(m.p) = m.points;
    csv::write(path, header, with_time);
}

} // namespace shadowmap::shadow
