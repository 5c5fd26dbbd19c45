#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "shadowmap/neural.hpp"

using namespace shadowmap;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = rng.uniform(-scale, scale);
    return m;
}

// independent loop-based forward pass, no Eigen products
Eigen::MatrixXd forward_oracle(const neural::DenseNet& net,
                               const Eigen::MatrixXd& input) {
    Eigen::MatrixXd x = input;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto& layer = net.layers[li];
        Eigen::MatrixXd y(x.rows(), layer.w.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
                double acc = layer.b(0, c);
                for (Eigen::Index k = 0; k < x.cols(); ++k)
                    acc += x(r, k) * layer.w(k, c);
                y(r, c) = (li + 1 < net.layers.size() && acc < 0.0) ? 0.0 : acc;
            }
        x = y;
    }
    return x;
}

double loss_of(const neural::DenseNet& net, const Eigen::MatrixXd& input,
               const Eigen::MatrixXd& target) {
    return neural::l2_loss(neural::forward(net, input), target).first;
}

std::vector<Eigen::MatrixXd*> net_params(neural::DenseNet& net) {
    std::vector<Eigen::MatrixXd*> out;
    for (auto& layer : net.layers) {
        out.push_back(&layer.w);
        out.push_back(&layer.b);
    }
    return out;
}

} // namespace

TEST_CASE("forward: identity layer with zero bias is the identity") {
    neural::DenseNet net;
    net.layers.push_back({Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Zero(1, 4)});
    Rng rng(2);
    Eigen::MatrixXd x = random_matrix(6, 4, rng);
    CHECK(neural::forward(net, x) == x);
}

TEST_CASE("forward: zero weights give constant rows equal to the bias") {
    neural::DenseNet net;
    Eigen::MatrixXd b(1, 3);
    b << 0.5, -1.5, 2.0;
    net.layers.push_back({Eigen::MatrixXd::Zero(4, 3), b});
    Rng rng(3);
    Eigen::MatrixXd y = neural::forward(net, random_matrix(5, 4, rng));
    for (int r = 0; r < 5; ++r)
        CHECK(y.row(r) == b.row(0));
}

TEST_CASE("forward matches the loop oracle on a random 2-layer net") {
    Rng rng(11);
    neural::DenseNet net = neural::DenseNet::he_uniform({5, 7, 3}, rng);
    Eigen::MatrixXd x = random_matrix(9, 5, rng);
    Eigen::MatrixXd got = neural::forward(net, x);
    Eigen::MatrixXd want = forward_oracle(net, x);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward: width mismatch throws") {
    Rng rng(4);
    neural::DenseNet net = neural::DenseNet::he_uniform({5, 3}, rng);
    CHECK_THROWS_AS(neural::forward(net, random_matrix(2, 4, rng)),
                    std::invalid_argument);
}

TEST_CASE("backward matches central finite differences on a random 3-layer net") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        neural::DenseNet net = neural::DenseNet::he_uniform({6, 8, 5, 4}, rng);
        Eigen::MatrixXd x = random_matrix(7, 6, rng);
        Eigen::MatrixXd target = random_matrix(7, 4, rng);

        neural::ForwardCache cache;
        Eigen::MatrixXd out = neural::forward(net, x, &cache);
        auto [loss, dout] = neural::l2_loss(out, target);
        neural::NetGrads grads = neural::NetGrads::zeros_like(net);
        neural::backward(net, cache, dout, grads);

        const double h = 1e-5;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            auto check_block = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& grad) {
                for (Eigen::Index r = 0; r < param.rows(); ++r)
                    for (Eigen::Index c = 0; c < param.cols(); ++c) {
                        const double keep = param(r, c);
                        param(r, c) = keep + h;
                        const double up = loss_of(net, x, target);
                        param(r, c) = keep - h;
                        const double down = loss_of(net, x, target);
                        param(r, c) = keep;
                        const double fd = (up - down) / (2.0 * h);
                        const double denom = std::max(std::abs(fd), 1e-8);
                        CHECK(std::abs(grad(r, c) - fd) / denom < 1e-4);
                    }
            };
            check_block(net.layers[li].w, grads.layers[li].w);
            check_block(net.layers[li].b, grads.layers[li].b);
        }
    }
}

TEST_CASE("backward: zero output gradient yields zero everywhere") {
    Rng rng(8);
    neural::DenseNet net = neural::DenseNet::he_uniform({4, 6, 2}, rng);
    Eigen::MatrixXd x = random_matrix(5, 4, rng);
    neural::ForwardCache cache;
    neural::forward(net, x, &cache);
    neural::NetGrads grads = neural::NetGrads::zeros_like(net);
    Eigen::MatrixXd din =
        neural::backward(net, cache, Eigen::MatrixXd::Zero(5, 2), grads);
    CHECK(din.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& layer : grads.layers) {
        CHECK(layer.w.cwiseAbs().maxCoeff() == 0.0);
        CHECK(layer.b.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("backward: closed-form gradient of a linear layer under L2") {
    // loss = mean((XW+b-T)^2) over batch*d_out elements
    // dW = 2 X^T (XW+b-T) / count
    Rng rng(13);
    neural::DenseNet net;
    net.layers.push_back({random_matrix(4, 3, rng), random_matrix(1, 3, rng)});
    Eigen::MatrixXd x = random_matrix(6, 4, rng);
    Eigen::MatrixXd target = random_matrix(6, 3, rng);
    neural::ForwardCache cache;
    Eigen::MatrixXd out = neural::forward(net, x, &cache);
    auto [loss, dout] = neural::l2_loss(out, target);
    neural::NetGrads grads = neural::NetGrads::zeros_like(net);
    neural::backward(net, cache, dout, grads);
    Eigen::MatrixXd want = 2.0 * x.transpose() * (out - target) / (6.0 * 3.0);
    CHECK((grads.layers[0].w - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: stale cache is rejected") {
    Rng rng(5);
    neural::DenseNet net = neural::DenseNet::he_uniform({4, 3}, rng);
    neural::ForwardCache cache;
    neural::forward(net, random_matrix(5, 4, rng), &cache);
    neural::NetGrads grads = neural::NetGrads::zeros_like(net);
    CHECK_THROWS_AS(neural::backward(net, cache, Eigen::MatrixXd::Zero(4, 3), grads),
                    std::invalid_argument);
}

TEST_CASE("l2_loss: spec examples") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, 2, 0.7);
    CHECK(neural::l2_loss(a, a).first == 0.0);
    Eigen::MatrixXd b = a.array() - 1.0;
    CHECK(neural::l2_loss(a, b).first == doctest::Approx(1.0).epsilon(1e-15));

    // independent recomputation on random data
    Rng rng(17);
    Eigen::MatrixXd p = random_matrix(4, 5, rng), t = random_matrix(4, 5, rng);
    auto [loss, grad] = neural::l2_loss(p, t);
    double want = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 5; ++c)
            want += (p(r, c) - t(r, c)) * (p(r, c) - t(r, c));
    want /= 20.0;
    CHECK(std::abs(loss - want) < 1e-12);
    CHECK((grad - 2.0 * (p - t) / 20.0).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(neural::l2_loss(p, random_matrix(4, 4, rng)),
                    std::invalid_argument);
}

TEST_CASE("adam: first step is -lr * g / (|g| + eps)") {
    Rng rng(19);
    Eigen::MatrixXd param = random_matrix(3, 3, rng);
    const Eigen::MatrixXd before = param;
    Eigen::MatrixXd grad = random_matrix(3, 3, rng);
    neural::AdamState state;
    state.lr = 0.01;
    neural::adam_step({&param}, {&grad}, state);
    Eigen::MatrixXd want =
        before.array() - state.lr * grad.array() / (grad.array().abs() + state.eps);
    CHECK((param - want).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(state.t == 1);
}

TEST_CASE("adam: zero gradients leave parameters untouched forever") {
    Rng rng(23);
    Eigen::MatrixXd param = random_matrix(2, 4, rng);
    const Eigen::MatrixXd before = param;
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 4);
    neural::AdamState state;
    for (int i = 0; i < 10; ++i)
        neural::adam_step({&param}, {&zero}, state);
    CHECK(param == before);
}

TEST_CASE("adam: identical states and gradients give identical results") {
    Rng rng(29);
    Eigen::MatrixXd grad = random_matrix(2, 2, rng);
    Eigen::MatrixXd p1 = random_matrix(2, 2, rng);
    Eigen::MatrixXd p2 = p1;
    neural::AdamState s1, s2;
    for (int i = 0; i < 5; ++i) {
        neural::adam_step({&p1}, {&grad}, s1);
        neural::adam_step({&p2}, {&grad}, s2);
    }
    CHECK(p1 == p2);
}

TEST_CASE("adam: lr=0 leaves parameters bit-identical") {
    Rng rng(31);
    Eigen::MatrixXd param = random_matrix(3, 2, rng);
    const Eigen::MatrixXd before = param;
    Eigen::MatrixXd grad = random_matrix(3, 2, rng);
    neural::AdamState state;
    state.lr = 0.0;
    for (int i = 0; i < 3; ++i)
        neural::adam_step({&param}, {&grad}, state);
    CHECK(param == before);
}

TEST_CASE("adam: non-finite gradient is a training-divergence error") {
    Eigen::MatrixXd param = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(2, 2);
    grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    neural::AdamState state;
    CHECK_THROWS_AS(neural::adam_step({&param}, {&grad}, state), std::runtime_error);
}

TEST_CASE("tensor container round-trips through NSM1 format") {
    Rng rng(37);
    Eigen::MatrixXd a = random_matrix(3, 4, rng);
    Eigen::MatrixXd b = random_matrix(1, 6, rng);
    std::stringstream buf;
    neural::write_tensors(buf, {{"layer/w", &a}, {"layer/b", &b}});
    auto loaded = neural::read_tensors(buf);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.at("layer/w") == a);
    CHECK(loaded.at("layer/b") == b);

    std::stringstream bad("XXXX");
    CHECK_THROWS_AS(neural::read_tensors(bad), std::runtime_error);
}
