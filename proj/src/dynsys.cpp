#include "shadowmap/dynsys.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "shadowmap/csv.hpp"

namespace shadowmap::dynsys {

void SystemSpec::validate() const {
    const int n = n_vars();
    if (n < 1)
        throw std::invalid_argument("SystemSpec: need at least one variable");
    if (coupling.rows() != n || coupling.cols() != n)
        throw std::invalid_argument("SystemSpec: coupling must be n x n");
    for (int i = 0; i < n; ++i) {
        if (!(r[i] > 0.0 && r[i] <= 4.0))
            throw std::invalid_argument("SystemSpec: r entries must be in (0,4]");
        if (coupling(i, i) != 0.0)
            throw std::invalid_argument("SystemSpec: coupling diagonal must be zero");
        for (int j = 0; j < n; ++j)
            if (!(coupling(i, j) >= 0.0 && coupling(i, j) < 1.0))
                throw std::invalid_argument("SystemSpec: coupling entries must be in [0,1)");
    }
}

Eigen::VectorXd step_coupled_logistic(const Eigen::VectorXd& state,
                                      const SystemSpec& spec) {
    if (state.size() != spec.r.size())
        throw std::invalid_argument("step_coupled_logistic: state dimension mismatch");
    // out_i = s_i * (r_i - r_i*s_i - sum_j B(i,j)*s_j); diagonal of B is zero.
    Eigen::VectorXd drive = spec.r - spec.r.cwiseProduct(state) - spec.coupling * state;
    return state.cwiseProduct(drive);
}

Eigen::MatrixXd iterate(const SystemSpec& spec, const Eigen::VectorXd& init,
                        int length, int burn_in) {
    if (length <= 0)
        throw std::invalid_argument("iterate: length must be positive");
    if (burn_in < 0)
        throw std::invalid_argument("iterate: burn_in must be non-negative");
    const int n = spec.n_vars();
    Eigen::MatrixXd out(length, n);
    Eigen::VectorXd s = init;
    for (int t = 0; t < burn_in + length; ++t) {
        s = step_coupled_logistic(s, spec);
        if ((s.array() < 0.0).any() || (s.array() > 1.0).any())
            return Eigen::MatrixXd(0, n);
        if (t >= burn_in)
            out.row(t - burn_in) = s.transpose();
    }
    return out;
}

Trajectory simulate(const SystemSpec& spec, int length, int burn_in, Rng& rng) {
    spec.validate();
    if (length <= 0)
        throw std::invalid_argument("simulate: length must be positive");
    const int n = spec.n_vars();
    constexpr int kMaxTries = 1000;
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
        Eigen::VectorXd init(n);
        for (int i = 0; i < n; ++i)
            init[i] = rng.uniform();
        Eigen::MatrixXd values = iterate(spec, init, length, burn_in);
        if (values.rows() > 0) {
            Trajectory traj;
            traj.values = std::move(values);
            traj.spec = spec;
            traj.burn_in = burn_in;
            return traj;
        }
    }
    throw std::runtime_error(
        "simulate: 1000 initial conditions rejected; system spec diverges from [0,1]");
}

namespace {

Eigen::Vector3d lorenz_rhs(const LorenzParams& p, const Eigen::Vector3d& s) {
    return {p.sigma * (s[1] - s[0]),
            s[0] * (p.rho - s[2]) - s[1],
            s[0] * s[1] - p.beta * s[2]};
}

} // namespace

Trajectory lorenz(const LorenzParams& params, const Eigen::Vector3d& ic) {
    if (!(params.dt > 0.0))
        throw std::invalid_argument("lorenz: dt must be positive");
    if (params.length <= 0)
        throw std::invalid_argument("lorenz: length must be positive");
    Trajectory traj;
    traj.values.resize(params.length, 3);
    Eigen::Vector3d s = ic;
    const double h = params.dt;
    for (int t = 0; t < params.length; ++t) {
        Eigen::Vector3d k1 = lorenz_rhs(params, s);
        Eigen::Vector3d k2 = lorenz_rhs(params, s + 0.5 * h * k1);
        Eigen::Vector3d k3 = lorenz_rhs(params, s + 0.5 * h * k2);
        Eigen::Vector3d k4 = lorenz_rhs(params, s + h * k3);
        s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!s.allFinite())
            throw std::runtime_error("lorenz: state diverged (step too large?)");
        traj.values.row(t) = s.transpose();
    }
    return traj;
}

void write_trajectory_csv(const std::string& path, const Eigen::MatrixXd& values) {
    std::vector<std::string> header{"t"};
    for (Eigen::Index c = 0; c < values.cols(); ++c)
        header.push_back("x" + std::to_string(c));
    Eigen::MatrixXd with_time(values.rows(), values.cols() + 1);
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        with_time(r, 0) = static_cast<double>(r);
    with_time.rightCols(values.cols()) = values;
    csv::write(path, header, with_time);
}

namespace {

SystemSpec make_spec(std::vector<double> r,
                     std::vector<std::tuple<int, int, double>> edges) {
    // edges are (source, target, strength); B(target, source) = strength
    SystemSpec spec;
    const int n = static_cast<int>(r.size());
    spec.r = Eigen::Map<Eigen::VectorXd>(r.data(), n);
    spec.coupling = Eigen::MatrixXd::Zero(n, n);
    for (auto [src, dst, b] : edges)
        spec.coupling(dst, src) = b;
    return spec;
}

const std::map<std::string, SystemSpec>& preset_table() {
    static const std::map<std::string, SystemSpec> table = [] {
        std::map<std::string, SystemSpec> t;
        // bivariate; X=0, Y=1
        t["fig1"] = make_spec({3.8, 3.8}, {{1, 0, 0.02}, {0, 1, 0.1}});
        t["table1-indep"] = make_spec({3.8, 3.8}, {});
        t["table1-xy"] = make_spec({3.8, 3.8}, {{0, 1, 0.32}});
        t["table1-yx"] = make_spec({3.8, 3.8}, {{1, 0, 0.32}});
        t["table1-bidir"] = make_spec({3.8, 3.8}, {{0, 1, 0.32}, {1, 0, 0.25}});
        // trivariate, all r=3.9, all couplings 0.25; X=0, Y=1, Z=2
        const double b = 0.25;
        auto tri = [&](std::vector<std::tuple<int, int, double>> e) {
            return make_spec({3.9, 3.9, 3.9}, std::move(e));
        };
        const int X = 0, Y = 1, Z = 2;
        t["table1-tri-uni"] = tri({{X, Y, b}});
        t["table1-tri-bidir"] = tri({{X, Y, b}, {Y, X, b}});
        t["table1-tri-cycle"] = tri({{X, Z, b}, {Z, Y, b}, {Y, X, b}});
        t["table1-tri-cycle-bidir"] =
            tri({{X, Z, b}, {Z, X, b}, {Z, Y, b}, {Y, X, b}});
        t["table1-tri-fork"] = tri({{X, Y, b}, {X, Z, b}});
        t["table1-tri-collider"] = tri({{X, Z, b}, {Y, Z, b}});
        t["table1-tri-collider-bidir"] = tri({{X, Z, b}, {Z, X, b}, {Y, Z, b}});
        t["table1-tri-chain-bidir"] = tri({{X, Z, b}, {Z, X, b}, {Z, Y, b}});
        t["table1-tri-full-bidir"] =
            tri({{X, Z, b}, {Z, X, b}, {Z, Y, b}, {Y, Z, b}});
        return t;
    }();
    return table;
}

} // namespace

SystemSpec preset(const std::string& name) {
    const auto& table = preset_table();
    auto it = table.find(name);
    if (it == table.end())
        throw std::invalid_argument("unknown preset: " + name);
    return it->second;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, spec] : preset_table())
        names.push_back(name);
    return names;
}

} // namespace shadowmap::dynsys
