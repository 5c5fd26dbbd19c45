#include "shadowmap/neural.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace shadowmap::neural {

DenseNet DenseNet::he_uniform(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2)
        throw std::invalid_argument("DenseNet: need at least input and output dims");
    DenseNet net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer layer;
        const int fan_in = dims[i];
        const int fan_out = dims[i + 1];
        const double limit = std::sqrt(6.0 / fan_in);
        layer.w.resize(fan_in, fan_out);
        for (int r = 0; r < fan_in; ++r)
            for (int c = 0; c < fan_out; ++c)
                layer.w(r, c) = rng.uniform(-limit, limit);
        layer.b = Eigen::MatrixXd::Zero(1, fan_out);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache) {
    if (net.layers.empty())
        throw std::invalid_argument("forward: empty network");
    if (input.cols() != net.layers.front().w.rows())
        throw std::invalid_argument("forward: input width mismatch");
    if (cache) {
        cache->acts.clear();
        cache->acts.reserve(net.layers.size() + 1);
        cache->acts.push_back(input);
    }
    Eigen::MatrixXd x = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const DenseLayer& layer = net.layers[i];
        Eigen::MatrixXd z(x.rows(), layer.w.cols());
        z.noalias() = x * layer.w;
        z.rowwise() += layer.b.row(0);
        if (i + 1 < net.layers.size())
            z = z.array().max(0.0);
        if (cache)
            cache->acts.push_back(z);
        x = std::move(z);
    }
    return x;
}

NetGrads NetGrads::zeros_like(const DenseNet& net) {
    NetGrads g;
    g.layers.reserve(net.layers.size());
    for (const auto& layer : net.layers)
        g.layers.push_back({Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()),
                            Eigen::MatrixXd::Zero(1, layer.b.cols())});
    return g;
}

Eigen::MatrixXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& dout, NetGrads& grads,
                         bool need_input_grad) {
    const std::size_t L = net.layers.size();
    if (cache.acts.size() != L + 1)
        throw std::invalid_argument("backward: cache does not match network");
    if (dout.rows() != cache.acts.back().rows() ||
        dout.cols() != cache.acts.back().cols())
        throw std::invalid_argument("backward: output gradient shape mismatch");
    if (grads.layers.size() != L)
        throw std::invalid_argument("backward: grads shape mismatch");

    Eigen::MatrixXd dz = dout;
    Eigen::MatrixXd din;
    for (std::size_t idx = L; idx-- > 0;) {
        const DenseLayer& layer = net.layers[idx];
        grads.layers[idx].w.noalias() += cache.acts[idx].transpose() * dz;
        grads.layers[idx].b.row(0) += dz.colwise().sum();
        if (idx > 0) {
            din.noalias() = dz * layer.w.transpose();
            // ReLU mask from the post-activation values
            dz = din.cwiseProduct(
                (cache.acts[idx].array() > 0.0).cast<double>().matrix());
        } else if (need_input_grad) {
            din.noalias() = dz * layer.w.transpose();
        } else {
            din.resize(0, 0);
        }
    }
    return din;
}

std::pair<double, Eigen::MatrixXd> l2_loss(const Eigen::MatrixXd& prediction,
                                           const Eigen::MatrixXd& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
        throw std::invalid_argument("l2_loss: shape mismatch");
    const double count = static_cast<double>(prediction.size());
    Eigen::MatrixXd diff = prediction - target;
    const double loss = diff.squaredNorm() / count;
    diff *= 2.0 / count;
    return {loss, std::move(diff)};
}

void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<const Eigen::MatrixXd*>& grads,
               AdamState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: params/grads count mismatch");
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const auto* p : params) {
            state.m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
            state.v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state does not match params");

    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i]->rows() != params[i]->rows() ||
            grads[i]->cols() != params[i]->cols())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        if (!grads[i]->allFinite())
            throw std::runtime_error("adam_step: non-finite gradient (training diverged)");
    }

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Eigen::MatrixXd& g = *grads[i];
        Eigen::MatrixXd& m = state.m[i];
        Eigen::MatrixXd& v = state.v[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        params[i]->array() -=
            state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
    }
}

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_raw(std::istream& in, T& value) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return static_cast<bool>(in);
}

} // namespace

void write_tensors(
    std::ostream& out,
    const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& tensors) {
    out.write("NSM1", 4);
    for (const auto& [name, mat] : tensors) {
        write_raw(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw(out, static_cast<std::uint32_t>(2));
        write_raw(out, static_cast<std::uint64_t>(mat->rows()));
        write_raw(out, static_cast<std::uint64_t>(mat->cols()));
        for (Eigen::Index r = 0; r < mat->rows(); ++r)
            for (Eigen::Index c = 0; c < mat->cols(); ++c)
                write_raw(out, (*mat)(r, c));
    }
    if (!out)
        throw std::runtime_error("write_tensors: stream failure");
}

std::map<std::string, Eigen::MatrixXd> read_tensors(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "NSM1")
        throw std::runtime_error("read_tensors: bad magic, not an NSM1 container");
    std::map<std::string, Eigen::MatrixXd> out;
    std::uint32_t name_len;
    while (read_raw(in, name_len)) {
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint32_t rank;
        if (!read_raw(in, rank) || rank != 2)
            throw std::runtime_error("read_tensors: unsupported rank");
        std::uint64_t rows, cols;
        read_raw(in, rows);
        if (!read_raw(in, cols))
            throw std::runtime_error("read_tensors: truncated header");
        Eigen::MatrixXd mat(rows, cols);
        for (std::uint64_t r = 0; r < rows; ++r)
            for (std::uint64_t c = 0; c < cols; ++c) {
                double v;
                if (!read_raw(in, v))
                    throw std::runtime_error("read_tensors: truncated data");
                mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
            }
        out[name] = std::move(mat);
    }
    return out;
}

} // namespace shadowmap::neural
