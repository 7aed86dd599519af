#pragma once

// Fourier-feature MLP surrogates with forward jet propagation (values plus
// first and second time derivatives) and the matching reverse pass. Autodiff
// is hand-rolled: the network is tiny and fixed-shape, and carrying exact
// jets through tanh layers is a few lines per layer.
//
// Two model heads share the machinery:
//  * SymPinnModel: hard-constraint ansatz in reduced coordinates
//        z(t)  = z0 + t zdot0 + rho t^2 y(t),          y = net(gamma(t))
//        z'(t) = zdot0 + 2 rho t y(t)                   (y' term dropped)
//        z''(t)= 2 rho y(t) + 2 rho t y'(t)             (derivative of z')
//    so z(0), z'(0) match the ICs identically and only first-order jets of
//    the network are ever needed.
//  * PinnModel: the network output is the trajectory itself, ICs are soft,
//    and the physics residual consumes exact second-order jets.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsg/constants.hpp"
#include "tsg/errors.hpp"
#include "tsg/rng.hpp"

namespace tsg {

// ---------------------------------------------------------------------------
// Fourier features

struct FourierFeatureMap {
    Eigen::VectorXd freqs;  // omega_k in Hz-like units; feature uses 2 pi omega_k t

    // K frequencies |N(0, sigma)|, drawn in order from a seeded stream.
    static FourierFeatureMap gaussian(int K, double sigma, std::uint64_t seed) {
        if (K < 1) throw InputError("fourier map needs at least one frequency");
        FourierFeatureMap m;
        m.freqs.resize(K);
        Rng rng(seed);
        for (int k = 0; k < K; ++k) m.freqs(k) = std::abs(rng.normal(0.0, sigma));
        return m;
    }

    int k() const { return static_cast<int>(freqs.size()); }
    int dim() const { return 2 * k(); }
};

// gamma(t) = [sin(2 pi w1 t), cos(2 pi w1 t), sin(2 pi w2 t), ...]
inline Eigen::VectorXd fourier_features(const FourierFeatureMap& m, double t) {
    Eigen::VectorXd g(m.dim());
    for (int k = 0; k < m.k(); ++k) {
        const double a = kTwoPi * m.freqs(k) * t;
        g(2 * k) = std::sin(a);
        g(2 * k + 1) = std::cos(a);
    }
    return g;
}

struct FeatureJet {
    Eigen::VectorXd g, g1, g2;  // gamma, dgamma/dt, d2gamma/dt2
};

inline FeatureJet fourier_jet(const FourierFeatureMap& m, double t) {
    FeatureJet j;
    j.g.resize(m.dim());
    j.g1.resize(m.dim());
    j.g2.resize(m.dim());
    for (int k = 0; k < m.k(); ++k) {
        const double w = kTwoPi * m.freqs(k);
        const double s = std::sin(w * t), c = std::cos(w * t);
        j.g(2 * k) = s;
        j.g(2 * k + 1) = c;
        j.g1(2 * k) = w * c;
        j.g1(2 * k + 1) = -w * s;
        j.g2(2 * k) = -w * w * s;
        j.g2(2 * k + 1) = -w * w * c;
    }
    return j;
}

// ---------------------------------------------------------------------------
// MLP with jet propagation

struct Mlp {
    std::vector<int> widths;          // [in, hidden..., out]
    std::vector<Eigen::MatrixXd> W;   // W[l]: widths[l+1] x widths[l]
    std::vector<Eigen::VectorXd> b;

    int n_layers() const { return static_cast<int>(W.size()); }
    int in_dim() const { return widths.front(); }
    int out_dim() const { return widths.back(); }

    // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases, filled
    // in a fixed order from a seeded stream.
    static Mlp create(const std::vector<int>& widths, std::uint64_t seed) {
        if (widths.size() < 2) throw InputError("mlp needs at least input and output widths");
        for (int w : widths)
            if (w < 1) throw InputError("mlp widths must be positive");
        Mlp m;
        m.widths = widths;
        Rng rng(seed);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            const double s = 1.0 / std::sqrt(static_cast<double>(widths[l]));
            Eigen::MatrixXd Wl(widths[l + 1], widths[l]);
            for (Eigen::Index c = 0; c < Wl.cols(); ++c)
                for (Eigen::Index r = 0; r < Wl.rows(); ++r) Wl(r, c) = rng.uniform(-s, s);
            m.W.push_back(std::move(Wl));
            m.b.push_back(Eigen::VectorXd::Zero(widths[l + 1]));
        }
        return m;
    }

    int n_params() const {
        int n = 0;
        for (int l = 0; l < n_layers(); ++l) n += static_cast<int>(W[static_cast<std::size_t>(l)].size() + b[static_cast<std::size_t>(l)].size());
        return n;
    }

    // Flat layout: [vec(W0) column-major, b0, vec(W1), b1, ...].
    Eigen::VectorXd get_params() const {
        Eigen::VectorXd p(n_params());
        Eigen::Index at = 0;
        for (int l = 0; l < n_layers(); ++l) {
            const auto& Wl = W[static_cast<std::size_t>(l)];
            p.segment(at, Wl.size()) = Eigen::Map<const Eigen::VectorXd>(Wl.data(), Wl.size());
            at += Wl.size();
            p.segment(at, b[static_cast<std::size_t>(l)].size()) = b[static_cast<std::size_t>(l)];
            at += b[static_cast<std::size_t>(l)].size();
        }
        return p;
    }

    void set_params(const Eigen::VectorXd& p) {
        if (p.size() != n_params()) throw InputError("parameter vector has wrong length");
        Eigen::Index at = 0;
        for (int l = 0; l < n_layers(); ++l) {
            auto& Wl = W[static_cast<std::size_t>(l)];
            Eigen::Map<Eigen::VectorXd>(Wl.data(), Wl.size()) = p.segment(at, Wl.size());
            at += Wl.size();
            b[static_cast<std::size_t>(l)] = p.segment(at, b[static_cast<std::size_t>(l)].size());
            at += b[static_cast<std::size_t>(l)].size();
        }
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        Eigen::VectorXd h = x;
        for (int l = 0; l < n_layers(); ++l) {
            h = (W[static_cast<std::size_t>(l)] * h + b[static_cast<std::size_t>(l)]).eval();
            if (l + 1 < n_layers()) h = h.array().tanh().matrix();
        }
        return h;
    }
};

// Per-layer caches of a jet forward pass; kept around for the reverse pass.
// h[l], d1[l], d2[l] are the jets entering layer l (h[0] is the input feature
// jet); t1[l], t2[l] are the pre-activation tangents W d1, W d2.
struct JetCache {
    std::vector<Eigen::VectorXd> h, d1, d2;
    std::vector<Eigen::VectorXd> t1, t2;
    int order = 1;
};

// Forward pass carrying jets of the requested order (1 or 2).
inline void forward_jet(const Mlp& m, const Eigen::VectorXd& x, const Eigen::VectorXd& xd,
                        const Eigen::VectorXd* xdd, JetCache& c) {
    const int L = m.n_layers();
    c.order = xdd ? 2 : 1;
    c.h.assign(static_cast<std::size_t>(L + 1), {});
    c.d1.assign(static_cast<std::size_t>(L + 1), {});
    c.d2.assign(static_cast<std::size_t>(L + 1), {});
    c.t1.assign(static_cast<std::size_t>(L), {});
    c.t2.assign(static_cast<std::size_t>(L), {});
    c.h[0] = x;
    c.d1[0] = xd;
    if (xdd) c.d2[0] = *xdd;

    for (int l = 0; l < L; ++l) {
        const auto& W = m.W[static_cast<std::size_t>(l)];
        const Eigen::VectorXd a = W * c.h[static_cast<std::size_t>(l)] + m.b[static_cast<std::size_t>(l)];
        c.t1[static_cast<std::size_t>(l)] = W * c.d1[static_cast<std::size_t>(l)];
        if (c.order == 2) c.t2[static_cast<std::size_t>(l)] = W * c.d2[static_cast<std::size_t>(l)];
        if (l + 1 < L) {
            const Eigen::ArrayXd y = a.array().tanh();
            const Eigen::ArrayXd s1 = 1.0 - y.square();                          // sigma'
            c.h[static_cast<std::size_t>(l + 1)] = y.matrix();
            c.d1[static_cast<std::size_t>(l + 1)] = (s1 * c.t1[static_cast<std::size_t>(l)].array()).matrix();
            if (c.order == 2) {
                const Eigen::ArrayXd s2 = -2.0 * y * s1;                          // sigma''
                c.d2[static_cast<std::size_t>(l + 1)] =
                    (s2 * c.t1[static_cast<std::size_t>(l)].array().square() + s1 * c.t2[static_cast<std::size_t>(l)].array()).matrix();
            }
        } else {
            c.h[static_cast<std::size_t>(l + 1)] = a;
            c.d1[static_cast<std::size_t>(l + 1)] = c.t1[static_cast<std::size_t>(l)];
            if (c.order == 2) c.d2[static_cast<std::size_t>(l + 1)] = c.t2[static_cast<std::size_t>(l)];
        }
    }
}

struct Grad {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;

    static Grad zeros_like(const Mlp& m) {
        Grad g;
        for (int l = 0; l < m.n_layers(); ++l) {
            g.W.push_back(Eigen::MatrixXd::Zero(m.W[static_cast<std::size_t>(l)].rows(), m.W[static_cast<std::size_t>(l)].cols()));
            g.b.push_back(Eigen::VectorXd::Zero(m.b[static_cast<std::size_t>(l)].size()));
        }
        return g;
    }

    Eigen::VectorXd flatten() const {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
        Eigen::VectorXd p(n);
        Eigen::Index at = 0;
        for (std::size_t l = 0; l < W.size(); ++l) {
            p.segment(at, W[l].size()) = Eigen::Map<const Eigen::VectorXd>(W[l].data(), W[l].size());
            at += W[l].size();
            p.segment(at, b[l].size()) = b[l];
            at += b[l].size();
        }
        return p;
    }
};

// Reverse pass over a cached jet forward. gh, gd1, gd2 are the loss adjoints
// of the output jets (gd2 only for order-2 caches); parameter gradients are
// accumulated into g.
inline void backward_jet(const Mlp& m, const JetCache& c, Eigen::VectorXd gh, Eigen::VectorXd gd1,
                         const Eigen::VectorXd* gd2_in, Grad& g) {
    const int L = m.n_layers();
    Eigen::VectorXd gd2;
    if (c.order == 2) gd2 = gd2_in ? *gd2_in : Eigen::VectorXd::Zero(m.out_dim());
    else if (gd2_in) throw InputError("backward_jet: second-order adjoint on a first-order cache");

    for (int l = L - 1; l >= 0; --l) {
        const auto& W = m.W[static_cast<std::size_t>(l)];
        Eigen::VectorXd ga, gt1, gt2;
        if (l + 1 < L) {
            const Eigen::ArrayXd y = c.h[static_cast<std::size_t>(l + 1)].array();
            const Eigen::ArrayXd s1 = 1.0 - y.square();
            const Eigen::ArrayXd s2 = -2.0 * y * s1;
            const Eigen::ArrayXd t1 = c.t1[static_cast<std::size_t>(l)].array();
            if (c.order == 2) {
                const Eigen::ArrayXd s3 = -2.0 * s1 * (1.0 - 3.0 * y.square());
                const Eigen::ArrayXd t2 = c.t2[static_cast<std::size_t>(l)].array();
                ga = (gh.array() * s1 + gd1.array() * s2 * t1 + gd2.array() * (s3 * t1.square() + s2 * t2)).matrix();
                gt1 = (gd1.array() * s1 + 2.0 * gd2.array() * s2 * t1).matrix();
                gt2 = (gd2.array() * s1).matrix();
            } else {
                ga = (gh.array() * s1 + gd1.array() * s2 * t1).matrix();
                gt1 = (gd1.array() * s1).matrix();
            }
        } else {
            ga = gh;
            gt1 = gd1;
            if (c.order == 2) gt2 = gd2;
        }

        g.W[static_cast<std::size_t>(l)].noalias() += ga * c.h[static_cast<std::size_t>(l)].transpose();
        g.W[static_cast<std::size_t>(l)].noalias() += gt1 * c.d1[static_cast<std::size_t>(l)].transpose();
        g.b[static_cast<std::size_t>(l)] += ga;
        if (c.order == 2) g.W[static_cast<std::size_t>(l)].noalias() += gt2 * c.d2[static_cast<std::size_t>(l)].transpose();

        if (l > 0) {
            gh = W.transpose() * ga;
            gd1 = W.transpose() * gt1;
            if (c.order == 2) gd2 = W.transpose() * gt2;
        }
    }
}

// ---------------------------------------------------------------------------
// Model heads

struct HardConstraintAnsatz {
    Eigen::VectorXd z0, zdot0;
    double rho = 20.0;
};

struct SymPinnModel {
    Mlp net;
    FourierFeatureMap map;
    HardConstraintAnsatz hc;
};

struct StateJet {
    Eigen::VectorXd z, zdot, zddot;
};

// Ansatz evaluation; needs only first-order network jets.
inline StateJet eval_sympinn(const SymPinnModel& m, double t, JetCache* cache = nullptr) {
    JetCache local;
    JetCache& c = cache ? *cache : local;
    const FeatureJet f = fourier_jet(m.map, t);
    forward_jet(m.net, f.g, f.g1, nullptr, c);
    const Eigen::VectorXd& y = c.h.back();
    const Eigen::VectorXd& yd = c.d1.back();
    StateJet s;
    const double rho = m.hc.rho;
    s.z = m.hc.z0 + t * m.hc.zdot0 + rho * t * t * y;
    s.zdot = m.hc.zdot0 + 2.0 * rho * t * y;
    s.zddot = 2.0 * rho * y + 2.0 * rho * t * yd;
    return s;
}

struct PinnModel {
    Mlp net;
    FourierFeatureMap map;
    Eigen::VectorXd phi, psi;  // soft IC targets in free coordinates
};

// Direct trajectory head with exact first/second time derivatives.
inline StateJet eval_pinn(const PinnModel& m, double t, JetCache* cache = nullptr) {
    JetCache local;
    JetCache& c = cache ? *cache : local;
    const FeatureJet f = fourier_jet(m.map, t);
    forward_jet(m.net, f.g, f.g1, &f.g2, c);
    return {c.h.back(), c.d1.back(), c.d2.back()};
}

// ---------------------------------------------------------------------------
// Losses
//
// The physics residual is linear in the state jet with frozen matrices:
//   r(t) = M s.zddot + D s.zdot + K_t s.z - w(t),
// normalized by |K|_F (with a small-norm guard). K_t is the frozen initial
// stiffness by default, or a per-collocation-point matrix.

struct ResidualOperator {
    Eigen::MatrixXd M, D, K;
    std::vector<Eigen::MatrixXd> K_per_point;  // when non-empty, indexed like the collocation times
    double normalizer = 1.0;

    const Eigen::MatrixXd& K_at(std::size_t i) const {
        return K_per_point.empty() ? K : K_per_point[i];
    }
};

inline double guarded_normalizer(double kfro) { return kfro > 1e-12 ? kfro : 1.0; }

struct LossWeights {
    double lambda_g = 1.0;
    double lambda_d = 10.0;
};

template <typename Model>
inline double physics_loss(const Model& model, const ResidualOperator& op, const Eigen::VectorXd& times,
                           const std::vector<Eigen::VectorXd>& w_samples) {
    if (times.size() == 0) return 0.0;
    if (static_cast<std::size_t>(times.size()) != w_samples.size())
        throw InputError("physics_loss: loads and times disagree");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        StateJet s;
        if constexpr (std::is_same_v<Model, SymPinnModel>)
            s = eval_sympinn(model, times(i));
        else
            s = eval_pinn(model, times(i));
        const Eigen::VectorXd r =
            op.M * s.zddot + op.D * s.zdot + op.K_at(static_cast<std::size_t>(i)) * s.z - w_samples[static_cast<std::size_t>(i)];
        acc += r.squaredNorm();
    }
    return acc / (static_cast<double>(times.size()) * op.normalizer);
}

template <typename Model>
inline double data_loss(const Model& model, const Eigen::VectorXd& times, const Eigen::MatrixXd& targets) {
    if (times.size() != targets.rows()) throw InputError("data_loss: targets and times disagree");
    if (times.size() == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        StateJet s;
        if constexpr (std::is_same_v<Model, SymPinnModel>)
            s = eval_sympinn(model, times(i));
        else
            s = eval_pinn(model, times(i));
        acc += (s.z - targets.row(i).transpose()).squaredNorm();
    }
    return acc / static_cast<double>(times.size());
}

inline double total_loss(const LossWeights& w, double lg, double ld) { return w.lambda_g * lg + w.lambda_d * ld; }

// ---------------------------------------------------------------------------
// Checkpoint I/O

struct Checkpoint {
    std::string mode;  // "sympinn" or "pinn"
    std::vector<int> widths;
    Eigen::VectorXd params;
    Eigen::VectorXd freqs;
    int fourier_k = 0;
    double fourier_sigma = 5.0;
    std::uint64_t fourier_seed = 0;
    double rho = 20.0;
    Eigen::VectorXd z0, zdot0;  // reduced ICs (sympinn) or free ICs (pinn)
    Eigen::MatrixXd U;          // reconstruction basis; identity for pinn
    double lambda_g = 1.0, lambda_d = 10.0;
    double normalizer = 1.0;
    double rate = 0.5;
    std::uint64_t seed = 0;
    double t_end = 1.0;
    std::vector<int> free_ids;  // map from free slots to node ids in the trajectory
    bool centered = true;       // trajectory centroid was removed before training
};

namespace detail {

inline nlohmann::json mat_to_json(const Eigen::MatrixXd& A) {
    nlohmann::json j;
    j["rows"] = A.rows();
    j["cols"] = A.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(A.size()));
    for (Eigen::Index r = 0; r < A.rows(); ++r)
        for (Eigen::Index c = 0; c < A.cols(); ++c) data.push_back(A(r, c));
    j["data"] = data;
    return j;
}

inline Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw InputError("matrix data length mismatch");
    Eigen::MatrixXd A(rows, cols);
    std::size_t at = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) A(r, c) = data[at++];
    return A;
}

inline std::vector<double> vec_to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd vec_from_std(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    nlohmann::json j;
    j["format"] = "tsg-checkpoint";
    j["version"] = kVersion;
    j["mode"] = c.mode;
    j["widths"] = c.widths;
    j["params"] = detail::vec_to_std(c.params);
    j["fourier"] = {{"k", c.fourier_k}, {"sigma", c.fourier_sigma}, {"seed", c.fourier_seed},
                    {"freqs", detail::vec_to_std(c.freqs)}};
    j["rho"] = c.rho;
    j["z0"] = detail::vec_to_std(c.z0);
    j["zdot0"] = detail::vec_to_std(c.zdot0);
    j["U"] = detail::mat_to_json(c.U);
    j["lambda_g"] = c.lambda_g;
    j["lambda_d"] = c.lambda_d;
    j["normalizer"] = c.normalizer;
    j["rate"] = c.rate;
    j["seed"] = c.seed;
    j["t_end"] = c.t_end;
    j["free_ids"] = c.free_ids;
    j["centered"] = c.centered;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
        if (j.value("format", "") != "tsg-checkpoint") throw InputError("not a checkpoint file: " + path);
        Checkpoint c;
        c.mode = j.at("mode").get<std::string>();
        if (c.mode != "sympinn" && c.mode != "pinn") throw InputError("checkpoint has unknown mode: " + c.mode);
        c.widths = j.at("widths").get<std::vector<int>>();
        c.params = detail::vec_from_std(j.at("params").get<std::vector<double>>());
        c.fourier_k = j.at("fourier").at("k").get<int>();
        c.fourier_sigma = j.at("fourier").at("sigma").get<double>();
        c.fourier_seed = j.at("fourier").at("seed").get<std::uint64_t>();
        c.freqs = detail::vec_from_std(j.at("fourier").at("freqs").get<std::vector<double>>());
        c.rho = j.at("rho").get<double>();
        c.z0 = detail::vec_from_std(j.at("z0").get<std::vector<double>>());
        c.zdot0 = detail::vec_from_std(j.at("zdot0").get<std::vector<double>>());
        c.U = detail::mat_from_json(j.at("U"));
        c.lambda_g = j.at("lambda_g").get<double>();
        c.lambda_d = j.at("lambda_d").get<double>();
        c.normalizer = j.at("normalizer").get<double>();
        c.rate = j.at("rate").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.t_end = j.value("t_end", 1.0);
        c.free_ids = j.at("free_ids").get<std::vector<int>>();
        c.centered = j.value("centered", true);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed checkpoint: ") + e.what());
    }
}

// Rebuild a model from a checkpoint (the caller picks by mode).
inline SymPinnModel sympinn_from_checkpoint(const Checkpoint& c) {
    SymPinnModel m;
    m.net = Mlp::create(c.widths, 0);
    m.net.set_params(c.params);
    m.map.freqs = c.freqs;
    m.hc = {c.z0, c.zdot0, c.rho};
    return m;
}

inline PinnModel pinn_from_checkpoint(const Checkpoint& c) {
    PinnModel m;
    m.net = Mlp::create(c.widths, 0);
    m.net.set_params(c.params);
    m.map.freqs = c.freqs;
    m.phi = c.z0;
    m.psi = c.zdot0;
    return m;
}

}  // namespace tsg
