#pragma once

// Objectives, gradients and optimizers for the two trajectory surrogates.
//
// Gradients are exact: each collocation point runs one jet forward pass and
// one reverse pass that accumulates every lambda-weighted loss adjoint at
// once. Everything is full-batch and seeded, so a (config, seed) pair yields
// a bit-identical loss history.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tsg/dynamics.hpp"
#include "tsg/errors.hpp"
#include "tsg/net.hpp"
#include "tsg/rng.hpp"

namespace tsg {

struct LossParts {
    double total = 0, physics = 0, data = 0;
};

using ObjectiveFn = std::function<LossParts(const Eigen::VectorXd&, Eigen::VectorXd*)>;

// ---------------------------------------------------------------------------
// Residual operators and training data

enum class StiffnessMode { frozen, per_point };

// Frozen-matrix residual operator for the reduced system. per_point keeps one
// stiffness per collocation time, evaluated once from the training data.
inline ResidualOperator make_residual_operator(const ReducedSystem& r, StiffnessMode mode,
                                               const Eigen::VectorXd& times, const Eigen::MatrixXd& z_data) {
    ResidualOperator op;
    op.M = r.Mr;
    op.D = r.Dr;
    op.K = r.Kr(r.z0, 0.0);
    op.normalizer = guarded_normalizer(op.K.norm());
    if (mode == StiffnessMode::per_point) {
        if (times.size() != z_data.rows()) throw InputError("per-point stiffness needs data at every collocation time");
        for (Eigen::Index i = 0; i < times.size(); ++i)
            op.K_per_point.push_back(r.Kr(z_data.row(i).transpose(), times(i)));
    }
    return op;
}

inline ResidualOperator make_residual_operator(const FreeSystem& f, StiffnessMode mode,
                                               const Eigen::VectorXd& times, const Eigen::MatrixXd& na_data) {
    ResidualOperator op;
    op.M = f.M;
    op.D = f.D;
    op.K = f.K(f.phi, 0.0);
    // The full-coordinate baseline keeps the standard unnormalized physics
    // loss; the Frobenius normalization is part of the reduced formulation.
    op.normalizer = 1.0;
    if (mode == StiffnessMode::per_point) {
        if (times.size() != na_data.rows()) throw InputError("per-point stiffness needs data at every collocation time");
        for (Eigen::Index i = 0; i < times.size(); ++i)
            op.K_per_point.push_back(f.K(na_data.row(i).transpose(), times(i)));
    }
    return op;
}

// Shared collocation/supervision set: the physics and data losses sample the
// same times.
struct TrainingData {
    Eigen::VectorXd times;                // N
    Eigen::MatrixXd targets;              // N x dim
    std::vector<Eigen::VectorXd> w;       // load samples w(t_i)
    std::vector<FeatureJet> feats;        // cached feature jets at t_i

    void cache_features(const FourierFeatureMap& map) {
        feats.clear();
        feats.reserve(static_cast<std::size_t>(times.size()));
        for (Eigen::Index i = 0; i < times.size(); ++i) feats.push_back(fourier_jet(map, times(i)));
    }
};

inline TrainingData make_training_data(const ReducedSystem& r, const Trajectory& z_traj,
                                       const std::vector<int>& indices) {
    TrainingData d;
    d.times.resize(static_cast<Eigen::Index>(indices.size()));
    d.targets.resize(static_cast<Eigen::Index>(indices.size()), z_traj.states.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        d.times(static_cast<Eigen::Index>(k)) = z_traj.times(indices[k]);
        d.targets.row(static_cast<Eigen::Index>(k)) = z_traj.states.row(indices[k]);
    }
    for (Eigen::Index i = 0; i < d.times.size(); ++i)
        d.w.push_back(r.wr(d.times(i), d.targets.row(i).transpose()));
    return d;
}

inline TrainingData make_training_data(const FreeSystem& f, const Trajectory& na_traj,
                                       const std::vector<int>& indices) {
    TrainingData d;
    d.times.resize(static_cast<Eigen::Index>(indices.size()));
    d.targets.resize(static_cast<Eigen::Index>(indices.size()), na_traj.states.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        d.times(static_cast<Eigen::Index>(k)) = na_traj.times(indices[k]);
        d.targets.row(static_cast<Eigen::Index>(k)) = na_traj.states.row(indices[k]);
    }
    for (Eigen::Index i = 0; i < d.times.size(); ++i)
        d.w.push_back(f.w(d.times(i), d.targets.row(i).transpose()));
    return d;
}

// ---------------------------------------------------------------------------
// Objectives

// Hard-constraint objective in reduced coordinates; first-order jets only.
class SymPinnObjective {
  public:
    SymPinnObjective(SymPinnModel model, ResidualOperator op, TrainingData data, LossWeights weights)
        : model_(std::move(model)), op_(std::move(op)), data_(std::move(data)), w_(weights) {
        data_.cache_features(model_.map);
        if (data_.targets.cols() != model_.hc.z0.size()) throw InputError("sympinn: target dim does not match z0");
    }

    int n_params() const { return model_.net.n_params(); }
    Eigen::VectorXd init_params() const { return model_.net.get_params(); }
    const SymPinnModel& model() const { return model_; }

    LossParts eval(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
        model_.net.set_params(theta);
        const Eigen::Index N = data_.times.size();
        Grad acc = grad ? Grad::zeros_like(model_.net) : Grad{};
        const double rho = model_.hc.rho;
        double lg = 0, ld = 0;
        JetCache c;
        for (Eigen::Index i = 0; i < N; ++i) {
            const double t = data_.times(i);
            const FeatureJet& f = data_.feats[static_cast<std::size_t>(i)];
            forward_jet(model_.net, f.g, f.g1, nullptr, c);
            const Eigen::VectorXd& y = c.h.back();
            const Eigen::VectorXd& yd = c.d1.back();
            const Eigen::VectorXd z = model_.hc.z0 + t * model_.hc.zdot0 + rho * t * t * y;
            const Eigen::VectorXd zd = model_.hc.zdot0 + 2.0 * rho * t * y;
            const Eigen::VectorXd zdd = 2.0 * rho * y + 2.0 * rho * t * yd;
            const Eigen::VectorXd r =
                op_.M * zdd + op_.D * zd + op_.K_at(static_cast<std::size_t>(i)) * z - data_.w[static_cast<std::size_t>(i)];
            const Eigen::VectorXd e = z - data_.targets.row(i).transpose();
            lg += r.squaredNorm();
            ld += e.squaredNorm();
            if (grad) {
                const double cg = 2.0 * w_.lambda_g / (static_cast<double>(N) * op_.normalizer);
                const double cd = 2.0 * w_.lambda_d / static_cast<double>(N);
                // adjoints of (z, zd, zdd), then mapped onto (y, yd)
                const Eigen::VectorXd gr = cg * r;
                const Eigen::VectorXd gz = op_.K_at(static_cast<std::size_t>(i)).transpose() * gr + cd * e;
                const Eigen::VectorXd gzd = op_.D.transpose() * gr;
                const Eigen::VectorXd gzdd = op_.M.transpose() * gr;
                const Eigen::VectorXd gh = rho * t * t * gz + 2.0 * rho * t * gzd + 2.0 * rho * gzdd;
                const Eigen::VectorXd gd1 = 2.0 * rho * t * gzdd;
                backward_jet(model_.net, c, gh, gd1, nullptr, acc);
            }
        }
        LossParts parts;
        parts.physics = lg / (static_cast<double>(N) * op_.normalizer);
        parts.data = ld / static_cast<double>(N);
        parts.total = total_loss(w_, parts.physics, parts.data);
        if (grad) *grad = acc.flatten();
        return parts;
    }

  private:
    SymPinnModel model_;
    ResidualOperator op_;
    TrainingData data_;
    LossWeights w_;
};

// Direct-output baseline in free coordinates: exact second-order jets and a
// soft initial-condition penalty on the data side.
class PinnObjective {
  public:
    PinnObjective(PinnModel model, ResidualOperator op, TrainingData data, LossWeights weights)
        : model_(std::move(model)), op_(std::move(op)), data_(std::move(data)), w_(weights),
          f0_(fourier_jet(model_.map, 0.0)) {
        data_.cache_features(model_.map);
        if (data_.targets.cols() != model_.phi.size()) throw InputError("pinn: target dim does not match phi");
    }

    int n_params() const { return model_.net.n_params(); }
    Eigen::VectorXd init_params() const { return model_.net.get_params(); }
    const PinnModel& model() const { return model_; }

    LossParts eval(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
        model_.net.set_params(theta);
        const Eigen::Index N = data_.times.size();
        Grad acc = grad ? Grad::zeros_like(model_.net) : Grad{};
        double lg = 0, ld = 0;
        JetCache c;
        for (Eigen::Index i = 0; i < N; ++i) {
            const FeatureJet& f = data_.feats[static_cast<std::size_t>(i)];
            forward_jet(model_.net, f.g, f.g1, &f.g2, c);
            const Eigen::VectorXd& y = c.h.back();
            const Eigen::VectorXd& y1 = c.d1.back();
            const Eigen::VectorXd& y2 = c.d2.back();
            const Eigen::VectorXd r =
                op_.M * y2 + op_.D * y1 + op_.K_at(static_cast<std::size_t>(i)) * y - data_.w[static_cast<std::size_t>(i)];
            const Eigen::VectorXd e = y - data_.targets.row(i).transpose();
            lg += r.squaredNorm();
            ld += e.squaredNorm();
            if (grad) {
                const double cg = 2.0 * w_.lambda_g / (static_cast<double>(N) * op_.normalizer);
                const double cd = 2.0 * w_.lambda_d / static_cast<double>(N);
                const Eigen::VectorXd gr = cg * r;
                const Eigen::VectorXd gh = op_.K_at(static_cast<std::size_t>(i)).transpose() * gr + cd * e;
                const Eigen::VectorXd gd1 = op_.D.transpose() * gr;
                const Eigen::VectorXd gd2 = op_.M.transpose() * gr;
                backward_jet(model_.net, c, gh, gd1, &gd2, acc);
            }
        }
        // Soft ICs: both the value and the velocity at t = 0.
        double lic = 0;
        {
            forward_jet(model_.net, f0_.g, f0_.g1, &f0_.g2, c);
            const Eigen::VectorXd e0 = c.h.back() - model_.phi;
            const Eigen::VectorXd e1 = c.d1.back() - model_.psi;
            lic = e0.squaredNorm() + e1.squaredNorm();
            if (grad) {
                const Eigen::VectorXd gh = 2.0 * w_.lambda_d * e0;
                const Eigen::VectorXd gd1 = 2.0 * w_.lambda_d * e1;
                const Eigen::VectorXd gd2 = Eigen::VectorXd::Zero(model_.net.out_dim());
                backward_jet(model_.net, c, gh, gd1, &gd2, acc);
            }
        }
        LossParts parts;
        parts.physics = lg / (static_cast<double>(N) * op_.normalizer);
        parts.data = ld / static_cast<double>(N) + lic;
        parts.total = total_loss(w_, parts.physics, parts.data);
        if (grad) *grad = acc.flatten();
        return parts;
    }

  private:
    PinnModel model_;
    ResidualOperator op_;
    TrainingData data_;
    LossWeights w_;
    FeatureJet f0_;
};

// ---------------------------------------------------------------------------
// Optimizers

struct AdamConfig {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int max_epochs = 1000;
};

struct AdamState {
    Eigen::VectorXd m, v;
    long t = 0;
};

// One bias-corrected Adam update in place.
inline void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& g, AdamState& st, const AdamConfig& cfg) {
    if (st.m.size() != theta.size()) {
        st.m = Eigen::VectorXd::Zero(theta.size());
        st.v = Eigen::VectorXd::Zero(theta.size());
        st.t = 0;
    }
    ++st.t;
    st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * g;
    st.v = cfg.beta2 * st.v.array().matrix() + (1.0 - cfg.beta2) * g.array().square().matrix();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    theta.array() -= cfg.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + cfg.eps);
}

struct LbfgsConfig {
    int max_iters = 10;
    int history = 10;
    int max_fn_evals = 50;  // per iteration (line search budget)
    double c1 = 1e-4, c2 = 0.9;
    double tol = 1e-5;  // relative total-loss change
};

struct LbfgsResult {
    int iters = 0;
    long evals = 0;
    bool converged = false;
    int line_search_failures = 0;
};

namespace detail {

inline Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g, const std::deque<Eigen::VectorXd>& S,
                                       const std::deque<Eigen::VectorXd>& Y) {
    Eigen::VectorXd q = g;
    const int m = static_cast<int>(S.size());
    std::vector<double> alpha(static_cast<std::size_t>(m)), rho(static_cast<std::size_t>(m));
    for (int i = m - 1; i >= 0; --i) {
        rho[static_cast<std::size_t>(i)] = 1.0 / Y[static_cast<std::size_t>(i)].dot(S[static_cast<std::size_t>(i)]);
        alpha[static_cast<std::size_t>(i)] = rho[static_cast<std::size_t>(i)] * S[static_cast<std::size_t>(i)].dot(q);
        q -= alpha[static_cast<std::size_t>(i)] * Y[static_cast<std::size_t>(i)];
    }
    if (m > 0) {
        const double gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
        q *= gamma;
    }
    for (int i = 0; i < m; ++i) {
        const double beta = rho[static_cast<std::size_t>(i)] * Y[static_cast<std::size_t>(i)].dot(q);
        q += (alpha[static_cast<std::size_t>(i)] - beta) * S[static_cast<std::size_t>(i)];
    }
    return -q;
}

struct LinePoint {
    double alpha = 0, f = 0, df = 0;  // df = g(x+alpha d) . d
    LossParts parts;
    Eigen::VectorXd g;
};

// Cubic minimizer of the Hermite interpolant through two (alpha, f, df)
// samples; falls back to bisection when degenerate or outside the bracket.
inline double cubic_step(const LinePoint& a, const LinePoint& b) {
    const double d1 = a.df + b.df - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.df * b.df;
    if (disc >= 0.0) {
        const double d2 = std::sqrt(disc) * (b.alpha > a.alpha ? 1.0 : -1.0);
        const double denom = b.df - a.df + 2.0 * d2;
        if (denom != 0.0) {
            const double alpha = b.alpha - (b.alpha - a.alpha) * (b.df + d2 - d1) / denom;
            const double lo = std::min(a.alpha, b.alpha), hi = std::max(a.alpha, b.alpha);
            const double margin = 0.1 * (hi - lo);
            if (alpha > lo + margin && alpha < hi - margin) return alpha;
        }
    }
    return 0.5 * (a.alpha + b.alpha);
}

}  // namespace detail

// L-BFGS with a strong-Wolfe bracket/zoom line search. On line-search failure
// the iterate rolls back to the best point seen and the stage stops. The
// callback fires once per accepted iterate with its loss parts.
inline LbfgsResult lbfgs_run(const ObjectiveFn& f, Eigen::VectorXd& theta, const LbfgsConfig& cfg,
                             const std::function<void(int, const LossParts&)>& on_iterate = nullptr) {
    LbfgsResult res;
    Eigen::VectorXd g(theta.size());
    LossParts parts = f(theta, &g);
    ++res.evals;
    if (!std::isfinite(parts.total)) throw NumericalError("lbfgs: objective is not finite at the start point");

    Eigen::VectorXd best_theta = theta;
    double best_f = parts.total;

    if (g.cwiseAbs().maxCoeff() < 1e-12) {  // already stationary
        res.converged = true;
        return res;
    }

    std::deque<Eigen::VectorXd> S, Y;
    double f_prev = parts.total;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        Eigen::VectorXd d = detail::lbfgs_direction(g, S, Y);
        double d0 = g.dot(d);
        if (!(d0 < 0)) {  // not a descent direction: reset memory
            S.clear();
            Y.clear();
            d = -g;
            d0 = g.dot(d);
        }

        const double f0 = parts.total;
        double alpha = (iter == 1) ? std::min(1.0, 1.0 / std::max(1.0, g.norm())) : 1.0;
        int evals_here = 0;

        auto probe = [&](double a, detail::LinePoint& p) {
            p.alpha = a;
            const Eigen::VectorXd x = theta + a * d;
            p.g.resize(theta.size());
            p.parts = f(x, &p.g);
            p.f = p.parts.total;
            p.df = p.g.dot(d);
            ++res.evals;
            ++evals_here;
            if (std::isfinite(p.f) && p.f < best_f) {
                best_f = p.f;
                best_theta = x;
            }
        };

        const double armijo_slope = cfg.c1 * d0;
        const double curve_bound = -cfg.c2 * d0;
        detail::LinePoint lo;  // last point satisfying "low" bracket role
        lo.alpha = 0;
        lo.f = f0;
        lo.df = d0;
        detail::LinePoint cur, accepted;
        bool have_accept = false, bracket = false;
        detail::LinePoint bhi;

        // Bracketing phase.
        detail::LinePoint prev = lo;
        while (evals_here < cfg.max_fn_evals) {
            probe(alpha, cur);
            if (!std::isfinite(cur.f) || cur.f > f0 + alpha * armijo_slope || (prev.alpha > 0 && cur.f >= prev.f)) {
                lo = prev;
                bhi = cur;
                bracket = true;
                break;
            }
            if (std::abs(cur.df) <= curve_bound) {
                accepted = cur;
                have_accept = true;
                break;
            }
            if (cur.df >= 0) {
                lo = cur;
                bhi = prev;
                bracket = true;
                break;
            }
            prev = cur;
            alpha = std::min(2.0 * alpha, 1e8);
        }

        // Zoom phase.
        while (!have_accept && bracket && evals_here < cfg.max_fn_evals) {
            const double a = detail::cubic_step(lo, bhi);
            probe(a, cur);
            if (!std::isfinite(cur.f) || cur.f > f0 + a * armijo_slope || cur.f >= lo.f) {
                bhi = cur;
            } else {
                if (std::abs(cur.df) <= curve_bound) {
                    accepted = cur;
                    have_accept = true;
                    break;
                }
                if (cur.df * (bhi.alpha - lo.alpha) >= 0) bhi = lo;
                lo = cur;
            }
            if (std::abs(bhi.alpha - lo.alpha) < 1e-16) break;
        }

        if (!have_accept && lo.alpha > 0 && std::isfinite(lo.f) && lo.f <= f0 + lo.alpha * armijo_slope && lo.f < f0) {
            accepted = lo;  // sufficient decrease without the curvature bound: still usable
            have_accept = true;
        }

        if (!have_accept) {
            ++res.line_search_failures;
            theta = best_theta;
            parts = f(theta, &g);
            ++res.evals;
            break;
        }

        const Eigen::VectorXd s = accepted.alpha * d;
        const Eigen::VectorXd y = accepted.g - g;
        theta += s;
        g = accepted.g;
        parts = accepted.parts;
        ++res.iters;
        if (on_iterate) on_iterate(res.iters, parts);

        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            S.push_back(s);
            Y.push_back(y);
            if (static_cast<int>(S.size()) > cfg.history) {
                S.pop_front();
                Y.pop_front();
            }
        }

        const double rel = std::abs(f_prev - parts.total) / std::max(std::abs(f_prev), 1e-12);
        f_prev = parts.total;
        if (rel < cfg.tol || g.cwiseAbs().maxCoeff() < 1e-12) {
            res.converged = true;
            break;
        }
    }

    if (parts.total > best_f) theta = best_theta;
    return res;
}

// ---------------------------------------------------------------------------
// Two-stage training loop

struct TrainConfig {
    AdamConfig adam;
    LbfgsConfig lbfgs;
    double tol = 1e-5;  // relative total-loss change, both stages
};

struct TrainRecord {
    int epoch = 0;          // 1-based within its stage
    std::string stage;      // "adam" or "lbfgs"
    double L = 0, L_G = 0, L_D = 0;
    double wall_ms = 0;     // cumulative since training start
};

struct TrainState {
    Eigen::VectorXd theta;  // best parameters seen (by total loss)
    double best_loss = 0;
    LossParts final_parts;
    std::vector<TrainRecord> history;
    double adam_seconds = 0, lbfgs_seconds = 0;
    bool lbfgs_line_search_failed = false;
    bool adam_converged = false;
    bool lbfgs_converged = false;
};

// Adam stage with early stop on relative total-loss change, then an L-BFGS
// polish. Returns the best iterate seen across both stages.
inline TrainState train(const ObjectiveFn& f, Eigen::VectorXd theta, const TrainConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    auto ms_since_start = [&] { return std::chrono::duration<double, std::milli>(clock::now() - t_start).count(); };

    TrainState st;
    st.theta = theta;
    st.best_loss = std::numeric_limits<double>::infinity();

    AdamState adam;
    LbfgsConfig lb = cfg.lbfgs;
    lb.tol = cfg.tol;

    Eigen::VectorXd g(theta.size());
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int epoch = 1; epoch <= cfg.adam.max_epochs; ++epoch) {
        const LossParts parts = f(theta, &g);
        if (!std::isfinite(parts.total)) throw NumericalError("train: loss diverged during the adam stage");
        st.history.push_back({epoch, "adam", parts.total, parts.physics, parts.data, ms_since_start()});
        if (parts.total < st.best_loss) {
            st.best_loss = parts.total;
            st.theta = theta;
            st.final_parts = parts;
        }
        if (epoch > 1) {
            const double rel = std::abs(prev - parts.total) / std::max(std::abs(prev), 1e-12);
            if (rel < cfg.tol) {
                st.adam_converged = true;
                break;
            }
        }
        prev = parts.total;
        adam_step(theta, g, adam, cfg.adam);
    }
    st.adam_seconds = ms_since_start() / 1000.0;

    theta = st.theta;  // polish from the best adam iterate
    int lbfgs_epoch = 0;
    const LbfgsResult lr = lbfgs_run(
        f, theta, lb,
        [&](int, const LossParts& parts) {
            ++lbfgs_epoch;
            st.history.push_back({lbfgs_epoch, "lbfgs", parts.total, parts.physics, parts.data, ms_since_start()});
            if (!std::isfinite(parts.total)) throw NumericalError("train: loss diverged during the lbfgs stage");
            if (parts.total < st.best_loss) {
                st.best_loss = parts.total;
                st.final_parts = parts;
            }
        });
    st.lbfgs_converged = lr.converged;
    st.lbfgs_line_search_failed = lr.line_search_failures > 0;
    st.lbfgs_seconds = ms_since_start() / 1000.0 - st.adam_seconds;

    // lbfgs_run leaves theta at (or rolled back to) its best iterate.
    const LossParts parts = f(theta, nullptr);
    if (parts.total <= st.best_loss) {
        st.best_loss = parts.total;
        st.theta = theta;
        st.final_parts = parts;
    }
    return st;
}

// ---------------------------------------------------------------------------
// Train/test split

struct SplitIndices {
    std::vector<int> train, test;
};

// Seeded shuffle of {1..n-1}; index 0 (the initial condition) is always in
// the training set. round(rate*n) samples train, the rest test.
inline SplitIndices sample_split(int n_times, double rate, std::uint64_t seed) {
    if (n_times < 2) throw InputError("sample_split: need at least two samples");
    if (!(rate > 0.0) || !(rate < 1.0)) throw InputError("sample_split: rate must be inside (0, 1)");
    long long n_train = std::llround(rate * n_times);
    if (n_train < 1) n_train = 1;
    if (n_train >= n_times) throw InputError("sample_split: split leaves an empty test set");

    std::vector<int> rest(static_cast<std::size_t>(n_times - 1));
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = static_cast<int>(i + 1);
    Rng rng(seed);
    rng.shuffle(rest);

    SplitIndices s;
    s.train.push_back(0);
    for (long long i = 0; i + 1 < n_train; ++i) s.train.push_back(rest[static_cast<std::size_t>(i)]);
    for (std::size_t i = static_cast<std::size_t>(n_train - 1); i < rest.size(); ++i) s.test.push_back(rest[i]);
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// First-order time derivative of the raw network head at t (jet-1 wrapper).
inline Eigen::VectorXd t_derivative(const Mlp& net, const FourierFeatureMap& map, double t) {
    JetCache c;
    const FeatureJet f = fourier_jet(map, t);
    forward_jet(net, f.g, f.g1, nullptr, c);
    return c.d1.back();
}

// ---------------------------------------------------------------------------
// Training log I/O

inline void save_training_log(const std::string& path, const std::vector<TrainRecord>& history) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write training log: " + path);
    out << "epoch,stage,L,L_G,L_D,wall_ms\n";
    char buf[32];
    for (const auto& r : history) {
        out << r.epoch << ',' << r.stage;
        for (double v : {r.L, r.L_G, r.L_D, r.wall_ms}) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
}

}  // namespace tsg
