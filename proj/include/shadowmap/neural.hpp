#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shadowmap/rng.hpp"

namespace shadowmap::neural {

// Fully-connected net: affine + ReLU for all but the last layer, last layer
// affine only. Weights are in x out, biases 1 x out; inputs are row-major
// batches (batch x d).
struct DenseLayer {
    Eigen::MatrixXd w;
    Eigen::MatrixXd b;
};

struct DenseNet {
    std::vector<DenseLayer> layers;

    static DenseNet he_uniform(const std::vector<int>& dims, Rng& rng);

    int input_dim() const { return static_cast<int>(layers.front().w.rows()); }
    int output_dim() const { return static_cast<int>(layers.back().w.cols()); }
};

// acts[0] is the input, acts[i] the post-activation output of layer i-1
// (post-ReLU for hidden layers, raw affine for the last).
struct ForwardCache {
    std::vector<Eigen::MatrixXd> acts;
};

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);

struct NetGrads {
    std::vector<DenseLayer> layers;
    static NetGrads zeros_like(const DenseNet& net);
};

// Accumulates parameter gradients into `grads` and returns the gradient with
// respect to the input (skipped when need_input_grad is false).
Eigen::MatrixXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& dout, NetGrads& grads,
                         bool need_input_grad = true);

// Mean squared error over all elements and its gradient w.r.t. prediction.
std::pair<double, Eigen::MatrixXd> l2_loss(const Eigen::MatrixXd& prediction,
                                           const Eigen::MatrixXd& target);

struct AdamState {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<Eigen::MatrixXd> m;  // sized on first step
    std::vector<Eigen::MatrixXd> v;
};

// Standard Adam with bias correction. Throws on non-finite gradients.
void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<const Eigen::MatrixXd*>& grads,
               AdamState& state);

// Flat binary tensor container: magic "NSM1", then per tensor
// (u32 name length, name bytes, u32 rank, u64 dims..., row-major f64 data),
// little-endian throughout.
void write_tensors(std::ostream& out,
                   const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& tensors);
std::map<std::string, Eigen::MatrixXd> read_tensors(std::istream& in);

} // namespace shadowmap::neural
