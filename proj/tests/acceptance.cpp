// Acceptance gate: ten numbered checks, one PASS/FAIL line each. Exit code is
// the number of failed criteria. Heavy training sweeps print per-run progress
// so a slow or failing run can be traced.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "tsg/dynamics.hpp"
#include "tsg/metrics.hpp"
#include "tsg/net.hpp"
#include "tsg/rng.hpp"
#include "tsg/structure.hpp"
#include "tsg/symmetry.hpp"
#include "tsg/train.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fixture_path(const std::string& name) { return std::string(TSG_FIXTURE_DIR) + "/" + name; }

std::string g3(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

struct Gate {
    int failures = 0;

    void report(int id, bool pass, const std::string& what) {
        std::printf("criterion %d: %s - %s\n", id, pass ? "PASS" : "FAIL", what.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }

    template <typename Fn>
    void run(int id, const std::string& what, Fn body) {
        bool pass = false;
        std::string detail;
        try {
            pass = body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        report(id, pass, detail.empty() ? what : what + " (" + detail + ")");
    }
};

const std::vector<int> kTbarPerm{2, 3, 0, 1};

Eigen::Matrix3d tbar_R() {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    R(0, 0) = -1.0;
    R(1, 1) = -1.0;
    return R;
}

Eigen::MatrixXd tbar_closed_form_U() {
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(12, 6);
    const double s = 1.0 / std::sqrt(2.0);
    U.topRows(6) = s * Eigen::MatrixXd::Identity(6, 6);
    U.block(6, 0, 3, 3) = s * tbar_R();
    U.block(9, 3, 3, 3) = s * tbar_R();
    return U;
}

// listed half-turn of the lander frame
const std::vector<int> kLanderPerm{2, 3, 0, 1, 5, 4, 7, 6, 11, 10, 9, 8};

Eigen::Matrix3d lander_R() {
    Eigen::Matrix3d R;
    R << -1.0, 0.0, 0.0, 0.0, -0.6, 0.8, 0.0, 0.8, 0.6;
    return R;
}

// Same primary-action choice the CLI makes: geometrically verified candidates,
// proper rotations first, then fewest orbits, then lexicographic order.
tsg::SymmetryAction pick_primary(const tsg::TensegrityStructure& s, double tol = 1e-8) {
    auto perms = tsg::detect_permutations(s.bars, s.strings, s.n_nodes());
    const Eigen::MatrixXd N = tsg::node_matrix(s);
    const Eigen::RowVector3d c = N.colwise().mean();
    const Eigen::MatrixXd Nc = N.rowwise() - c;

    struct Candidate {
        tsg::SymmetryAction act;
        bool proper;
        std::size_t n_orbits;
    };
    std::vector<Candidate> ok;
    for (const auto& p : perms) {
        if (tsg::is_identity(p)) continue;
        tsg::RotationFit fit;
        try {
            fit = tsg::fit_rotation(Nc, p);
        } catch (const tsg::NumericalError&) {
            continue;
        }
        const auto check = tsg::verify_symmetry(N, p, fit.R, tol);
        if (!check.pass) continue;
        tsg::SymmetryAction act;
        act.perm = p;
        act.R = fit.R;
        act.center = c.transpose();
        act.order = tsg::action_order(p, fit.R, tol);
        act.residual = check.residual;
        ok.push_back({act, fit.R.determinant() > 0.0, tsg::orbits(p).size()});
    }
    if (ok.empty()) throw tsg::SymmetryError("no geometrically verified symmetry");
    std::sort(ok.begin(), ok.end(), [](const Candidate& a, const Candidate& b) {
        if (a.proper != b.proper) return a.proper;
        if (a.n_orbits != b.n_orbits) return a.n_orbits < b.n_orbits;
        return a.act.perm < b.act.perm;
    });
    return ok.front().act;
}

// Ground-truth trajectory in full nodal coordinates (both fixtures have every
// node free, so free and full coordinates coincide).
tsg::Trajectory simulate(const tsg::TensegrityStructure& s, double t_end, int points) {
    auto sys = tsg::assemble(s);
    auto ics = tsg::initial_conditions(s);
    auto motion = tsg::ConstrainedMotion::fixed(sys.Eb.transpose() * ics.phi);
    auto f = tsg::reduce_free(sys, ics, motion);
    return tsg::integrate_full(f, tsg::linspace(0.0, t_end, points)).traj;
}

struct RunStats {
    double re = 0;
    double seconds = 0;
};

// One training run, mirroring the CLI pipeline: center the trajectory (all
// nodes free), drop gravity, split, train, score RE on the held-out samples.
RunStats train_once(const tsg::TensegrityStructure& s, const tsg::Trajectory& traj,
                    const tsg::SymmetryAction& act, const std::string& mode, double rate,
                    std::uint64_t seed, int epochs, int lbfgs_iters, double tol,
                    const std::vector<int>& hidden) {
    const bool centered = s.constrained_ids.empty();
    tsg::Trajectory traj_c = centered ? tsg::centralize(traj) : traj;
    tsg::Trajectory na = tsg::restrict_to_free(traj_c, s);

    tsg::TensegrityStructure s2 = s;
    if (centered) s2.gravity = 0.0;
    auto sys2 = tsg::assemble(s2);
    tsg::InitialConditions ics{traj_c.states.row(0).transpose(), traj_c.velocities.row(0).transpose()};
    auto motion = tsg::ConstrainedMotion::fixed(sys2.Eb.transpose() * ics.phi);
    tsg::FreeSystem f = tsg::reduce_free(sys2, ics, motion);

    auto split = tsg::sample_split(traj.n_times(), rate, seed);
    auto map = tsg::FourierFeatureMap::gaussian(8, 5.0, seed + 1000003ULL);
    const tsg::LossWeights weights{1.0, 10.0};
    tsg::TrainConfig cfg;
    cfg.adam.max_epochs = epochs;
    cfg.lbfgs.max_iters = lbfgs_iters;
    cfg.tol = tol;

    tsg::TrainState state;
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(split.test.size()), na.states.cols());
    Eigen::MatrixXd Yhat(Y.rows(), Y.cols());

    if (mode == "sympinn") {
        auto p_free = tsg::restrict_permutation(act.perm, s.free_ids);
        auto basis = tsg::basis_svd(tsg::build_S(p_free, act.R));
        const Eigen::MatrixXd& U = basis.U;
        auto reduced = tsg::reduce_sym(f, U);
        tsg::Trajectory ztraj;
        ztraj.times = na.times;
        ztraj.states = na.states * U;
        auto data = tsg::make_training_data(reduced, ztraj, split.train);
        auto op = tsg::make_residual_operator(reduced, tsg::StiffnessMode::frozen, data.times, data.targets);
        std::vector<int> widths{map.dim()};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(reduced.dim());
        tsg::SymPinnModel model{tsg::Mlp::create(widths, seed), map, {reduced.z0, reduced.zdot0, 20.0}};
        tsg::SymPinnObjective obj(model, op, data, weights);
        auto fn = [&obj](const Eigen::VectorXd& th, Eigen::VectorXd* g) { return obj.eval(th, g); };
        state = tsg::train(fn, model.net.get_params(), cfg);
        model.net.set_params(state.theta);
        for (std::size_t k = 0; k < split.test.size(); ++k) {
            const int idx = split.test[k];
            Y.row(static_cast<Eigen::Index>(k)) = na.states.row(idx);
            Yhat.row(static_cast<Eigen::Index>(k)) = (U * tsg::eval_sympinn(model, na.times(idx)).z).transpose();
        }
    } else {
        auto data = tsg::make_training_data(f, na, split.train);
        auto op = tsg::make_residual_operator(f, tsg::StiffnessMode::frozen, data.times, data.targets);
        std::vector<int> widths{map.dim()};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(f.dim());
        tsg::PinnModel model{tsg::Mlp::create(widths, seed), map, f.phi, f.psi};
        tsg::PinnObjective obj(model, op, data, weights);
        auto fn = [&obj](const Eigen::VectorXd& th, Eigen::VectorXd* g) { return obj.eval(th, g); };
        state = tsg::train(fn, model.net.get_params(), cfg);
        model.net.set_params(state.theta);
        for (std::size_t k = 0; k < split.test.size(); ++k) {
            const int idx = split.test[k];
            Y.row(static_cast<Eigen::Index>(k)) = na.states.row(idx);
            Yhat.row(static_cast<Eigen::Index>(k)) = tsg::eval_pinn(model, na.times(idx)).z.transpose();
        }
    }
    const auto m = tsg::compute_metrics(Y, Yhat);
    return {m.re, state.adam_seconds + state.lbfgs_seconds};
}

// Relative sup-norm gap between an analytic gradient and central differences.
double fd_gap(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
              const Eigen::VectorXd& grad, double h = 1e-5) {
    Eigen::VectorXd fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp(i) += h;
        tm(i) -= h;
        fd(i) = (f(tp) - f(tm)) / (2.0 * h);
    }
    return (grad - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff());
}

}  // namespace

int main() {
    Gate gate;
    const auto tbar = tsg::load_structure(fixture_path("tbar.json"));
    const auto lander = tsg::load_structure(fixture_path("lander.json"));

    // 1: T-bar symmetry detection and basis span
    gate.run(1, "T-bar half-turn detected; both bases span the closed form", [&](std::string& d) {
        const auto t0 = clock_type::now();
        const auto act = pick_primary(tbar);
        if (act.perm != kTbarPerm) {
            d = "unexpected permutation";
            return false;
        }
        if ((act.R - tbar_R()).cwiseAbs().maxCoeff() > 1e-9) {
            d = "unexpected rotation";
            return false;
        }
        const Eigen::MatrixXd S = tsg::build_S(act.perm, act.R);
        const auto svd = tsg::basis_svd(S);
        const auto eig = tsg::basis_eigen(act.perm, act.R);
        const Eigen::MatrixXd Uc = tbar_closed_form_U();
        for (const auto* b : {&svd, &eig}) {
            if (b->n_r != 6) {
                d = "n_r = " + std::to_string(b->n_r);
                return false;
            }
            const Eigen::MatrixXd& U = b->U;
            const double ortho =
                (U.transpose() * U - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff();
            const double in_null = (S * U).cwiseAbs().maxCoeff();
            const double angle = tsg::max_principal_angle(U, Uc);
            if (ortho > 1e-12 || in_null > 1e-8 || angle > 1e-8) {
                d = "ortho " + g3(ortho) + ", SU " + g3(in_null) + ", angle " + g3(angle);
                return false;
            }
        }
        const double secs = seconds_since(t0);
        if (secs >= 1.0) {
            d = "took " + g3(secs) + " s";
            return false;
        }
        d = "angle to closed form within 1e-8, " + g3(secs) + " s";
        return true;
    });

    // 2: lander basis dimension
    gate.run(2, "lander SVD basis has n_r = 18", [&](std::string& d) {
        const auto t0 = clock_type::now();
        const Eigen::MatrixXd N = tsg::node_matrix(lander);
        if (!tsg::verify_symmetry(N, kLanderPerm, lander_R(), 1e-8).pass) {
            d = "listed action does not verify";
            return false;
        }
        auto p_free = tsg::restrict_permutation(kLanderPerm, lander.free_ids);
        const auto basis = tsg::basis_svd(tsg::build_S(p_free, lander_R()), 1e-6);
        const double secs = seconds_since(t0);
        d = "n_r = " + std::to_string(basis.n_r) + ", " + g3(secs) + " s";
        return basis.n_r == 18 && secs < 1.0;
    });

    // shared T-bar reduction pieces; fall back to the known action so later
    // criteria still report individually if detection itself is broken
    tsg::SymmetryAction tbar_act;
    try {
        tbar_act = pick_primary(tbar);
    } catch (const std::exception&) {
        tbar_act.perm = kTbarPerm;
        tbar_act.R = tbar_R();
        tbar_act.order = 2;
    }
    const Eigen::MatrixXd tbar_U =
        tsg::basis_svd(tsg::build_S(tsg::restrict_permutation(tbar_act.perm, tbar.free_ids), tbar_act.R)).U;

    // 3: full vs reduced integration
    double tbar_energy_drift = 0.0;
    gate.run(3, "full and reduced T-bar integrations agree to 1e-5", [&](std::string& d) {
        const auto t0 = clock_type::now();
        auto sys = tsg::assemble(tbar);
        auto ics = tsg::initial_conditions(tbar);
        auto motion = tsg::ConstrainedMotion::fixed(sys.Eb.transpose() * ics.phi);
        auto f = tsg::reduce_free(sys, ics, motion);
        const Eigen::VectorXd grid = tsg::linspace(0.0, 1.0, 1001);
        const auto full = tsg::integrate_full(f, grid);
        tbar_energy_drift = full.energy_drift;
        auto reduced = tsg::reduce_sym(f, tbar_U);
        const auto zres = tsg::integrate_reduced(reduced, grid);
        const auto recon = tsg::reconstruct(tbar_U, zres.traj);
        const double gap_q = (full.traj.states - recon.states).cwiseAbs().maxCoeff();
        const double gap_v = (full.traj.velocities - recon.velocities).cwiseAbs().maxCoeff();
        const double secs = seconds_since(t0);
        d = "sup gap " + g3(std::max(gap_q, gap_v)) + ", " + g3(secs) + " s";
        return gap_q <= 1e-5 && gap_v <= 1e-5 && secs < 10.0;
    });

    // 4: reconstructions stay symmetric for random parameters
    gate.run(4, "100 random reconstructions satisfy the symmetry relation", [&](std::string& d) {
        const Eigen::MatrixXd S = tsg::build_S(kTbarPerm, tbar_R());
        double worst = 0.0;
        tsg::Rng rng(2024);
        for (int k = 0; k < 100; ++k) {
            tsg::SymPinnModel m;
            m.map = tsg::FourierFeatureMap::gaussian(8, 5.0, 7000 + static_cast<std::uint64_t>(k));
            m.net = tsg::Mlp::create({m.map.dim(), 8, 6}, static_cast<std::uint64_t>(k));
            m.hc.z0.resize(6);
            m.hc.zdot0.resize(6);
            for (int i = 0; i < 6; ++i) {
                m.hc.z0(i) = rng.normal();
                m.hc.zdot0(i) = rng.normal();
            }
            const Eigen::VectorXd z = tsg::eval_sympinn(m, 0.01 * k).z;
            const Eigen::VectorXd n = tbar_U * z;
            const auto check = tsg::verify_symmetry(tsg::coords_to_rows(n), kTbarPerm, tbar_R(), 1e-10);
            worst = std::max(worst, std::max(check.residual, (S * n).cwiseAbs().maxCoeff()));
            if (!check.pass) break;
        }
        d = "worst residual " + g3(worst);
        return worst <= 1e-10;
    });

    // 5: hard constraint at t = 0, no tolerance
    gate.run(5, "pinned initial conditions hold exactly for 100 random networks", [&](std::string& d) {
        tsg::Rng rng(99);
        for (int k = 0; k < 100; ++k) {
            tsg::SymPinnModel m;
            m.map = tsg::FourierFeatureMap::gaussian(8, 5.0, 500 + static_cast<std::uint64_t>(k));
            m.net = tsg::Mlp::create({m.map.dim(), 8, 6}, static_cast<std::uint64_t>(k));
            m.hc.z0.resize(6);
            m.hc.zdot0.resize(6);
            for (int i = 0; i < 6; ++i) {
                m.hc.z0(i) = rng.normal();
                m.hc.zdot0(i) = rng.normal();
            }
            const auto s = tsg::eval_sympinn(m, 0.0);
            if (!(s.z.array() == m.hc.z0.array()).all() || !(s.zdot.array() == m.hc.zdot0.array()).all()) {
                d = "draw " + std::to_string(k) + " broke the constraint";
                return false;
            }
        }
        return true;
    });

    // 6: gradient and t-derivative correctness on width-8 networks
    gate.run(6, "gradients match finite differences on both fixtures", [&](std::string& d) {
        double worst = 0.0;
        for (const auto* s : {&tbar, &lander}) {
            const auto act = pick_primary(*s);
            const auto traj = simulate(*s, 0.2, 21);
            tsg::Trajectory traj_c = tsg::centralize(traj);
            tsg::Trajectory na = tsg::restrict_to_free(traj_c, *s);
            tsg::TensegrityStructure s2 = *s;
            s2.gravity = 0.0;
            auto sys2 = tsg::assemble(s2);
            tsg::InitialConditions ics{traj_c.states.row(0).transpose(), traj_c.velocities.row(0).transpose()};
            auto motion = tsg::ConstrainedMotion::fixed(sys2.Eb.transpose() * ics.phi);
            tsg::FreeSystem f = tsg::reduce_free(sys2, ics, motion);
            const auto split = tsg::sample_split(traj.n_times(), 0.5, 0);
            const auto map = tsg::FourierFeatureMap::gaussian(8, 5.0, 1000003ULL);

            {  // reduced-coordinate objective
                auto p_free = tsg::restrict_permutation(act.perm, s->free_ids);
                auto basis = tsg::basis_svd(tsg::build_S(p_free, act.R));
                auto reduced = tsg::reduce_sym(f, basis.U);
                tsg::Trajectory ztraj;
                ztraj.times = na.times;
                ztraj.states = na.states * basis.U;
                auto data = tsg::make_training_data(reduced, ztraj, split.train);
                auto op = tsg::make_residual_operator(reduced, tsg::StiffnessMode::frozen, data.times, data.targets);
                tsg::SymPinnModel model{tsg::Mlp::create({map.dim(), 8, reduced.dim()}, 0), map,
                                        {reduced.z0, reduced.zdot0, 20.0}};
                tsg::SymPinnObjective obj(model, op, data, tsg::LossWeights{});
                const Eigen::VectorXd theta = obj.init_params();
                Eigen::VectorXd g(theta.size());
                obj.eval(theta, &g);
                worst = std::max(worst, fd_gap([&](const Eigen::VectorXd& th) { return obj.eval(th, nullptr).total; },
                                               theta, g));
                const Eigen::VectorXd dt_net = tsg::t_derivative(model.net, map, 0.13);
                const Eigen::VectorXd fd1 = (model.net.forward(tsg::fourier_features(map, 0.13 + 1e-6)) -
                                             model.net.forward(tsg::fourier_features(map, 0.13 - 1e-6))) /
                                            2e-6;
                worst = std::max(worst, (dt_net - fd1).cwiseAbs().maxCoeff() / std::max(1.0, fd1.cwiseAbs().maxCoeff()));
            }
            {  // full-coordinate objective
                auto data = tsg::make_training_data(f, na, split.train);
                auto op = tsg::make_residual_operator(f, tsg::StiffnessMode::frozen, data.times, data.targets);
                tsg::PinnModel model{tsg::Mlp::create({map.dim(), 8, f.dim()}, 0), map, f.phi, f.psi};
                tsg::PinnObjective obj(model, op, data, tsg::LossWeights{});
                const Eigen::VectorXd theta = obj.init_params();
                Eigen::VectorXd g(theta.size());
                obj.eval(theta, &g);
                worst = std::max(worst, fd_gap([&](const Eigen::VectorXd& th) { return obj.eval(th, nullptr).total; },
                                               theta, g));
            }
        }
        d = "worst relative gap " + g3(worst);
        return worst <= 1e-5;
    });

    // 7 and 9 share one sweep: 5 rates x 5 seeds on the T-bar.
    const std::vector<double> rates{0.1, 0.2, 0.3, 0.4, 0.5};
    std::map<double, double> mean_re;
    bool sweep_ok = false, runtime_ok = true;
    double worst_run_seconds = 0.0;
    std::string sweep_err;
    try {
        const auto traj = simulate(tbar, 1.0, 301);
        for (double rate : rates) {
            double acc = 0.0;
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                const auto r = train_once(tbar, traj, tbar_act, "sympinn", rate, seed, 20000, 200, 1e-7, {32, 32});
                std::printf("  [sweep] rate %.1f seed %llu: re %.3e, %.1f s\n", rate,
                            static_cast<unsigned long long>(seed), r.re, r.seconds);
                std::fflush(stdout);
                acc += r.re;
                worst_run_seconds = std::max(worst_run_seconds, r.seconds);
                if (r.seconds > 300.0) runtime_ok = false;
            }
            mean_re[rate] = acc / 5.0;
        }
        sweep_ok = true;
    } catch (const std::exception& e) {
        sweep_err = e.what();
    }

    gate.run(7, "T-bar accuracy targets met across sample rates", [&](std::string& d) {
        if (!sweep_ok) {
            d = "sweep failed: " + sweep_err;
            return false;
        }
        bool pass = runtime_ok;
        std::string vals;
        for (double rate : rates) {
            const double m = mean_re.at(rate);
            vals += (vals.empty() ? "" : ", ") + std::string("re(") + g3(rate) + ") " + g3(m);
            const double bound = rate < 0.15 ? 1e-1 : 1e-2;
            if (!(m <= bound)) pass = false;
        }
        d = vals + "; slowest run " + g3(worst_run_seconds) + " s";
        return pass;
    });

    // 8: ordering against the full-coordinate baseline at the stock budget
    gate.run(8, "reduced model beats the baseline in error and time everywhere", [&](std::string& d) {
        struct Case {
            const tsg::TensegrityStructure* s;
            std::string name;
        };
        bool pass = true;
        std::string note;
        for (const Case& c : {Case{&tbar, "tbar"}, Case{&lander, "lander"}}) {
            const auto act = pick_primary(*c.s);
            const auto traj = simulate(*c.s, 1.0, 301);
            for (double rate : rates) {
                double re_s = 0, re_p = 0, sec_s = 0, sec_p = 0;
                for (std::uint64_t seed = 0; seed < 2; ++seed) {
                    const auto a = train_once(*c.s, traj, act, "sympinn", rate, seed, 1000, 10, 1e-5, {32, 32});
                    const auto b = train_once(*c.s, traj, act, "pinn", rate, seed, 1000, 10, 1e-5, {32, 32});
                    re_s += a.re / 2.0;
                    re_p += b.re / 2.0;
                    sec_s += a.seconds / 2.0;
                    sec_p += b.seconds / 2.0;
                }
                std::printf("  [order] %s rate %.1f: re %.3e vs %.3e, %.2f s vs %.2f s\n", c.name.c_str(),
                            rate, re_s, re_p, sec_s, sec_p);
                std::fflush(stdout);
                if (!(re_s < re_p && sec_s < sec_p)) {
                    pass = false;
                    note = c.name + " rate " + g3(rate);
                }
            }
        }
        if (!pass) d = "ordering broken at " + note;
        return pass;
    });

    // 9: error drops steeply from rate 0.1 to 0.2
    gate.run(9, "mean error at rate 0.1 is at least 3x the error at 0.2", [&](std::string& d) {
        if (!sweep_ok) {
            d = "sweep failed: " + sweep_err;
            return false;
        }
        const double ratio = mean_re.at(0.1) / mean_re.at(0.2);
        d = "ratio " + g3(ratio);
        return ratio >= 3.0;
    });

    // 10: integrator order and energy conservation
    gate.run(10, "fourth-order convergence and bounded energy drift", [&](std::string& d) {
        auto sup_err = [](double dt) {
            const double w0 = tsg::kTwoPi;
            tsg::FreeSystem f;
            f.M = Eigen::MatrixXd::Identity(1, 1);
            f.D = Eigen::MatrixXd::Zero(1, 1);
            f.K = [w0](const Eigen::VectorXd&, double) {
                return Eigen::MatrixXd::Constant(1, 1, w0 * w0);
            };
            f.w = [](double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
            f.phi = Eigen::VectorXd::Ones(1);
            f.psi = Eigen::VectorXd::Zero(1);
            tsg::IntegrateOptions opts;
            opts.dt = dt;
            const auto res = tsg::integrate_full(f, tsg::linspace(0.0, 1.0, 11), opts);
            double err = 0.0;
            for (int i = 0; i < 11; ++i)
                err = std::max(err, std::abs(res.traj.states(i, 0) - std::cos(w0 * res.traj.times(i))));
            return err;
        };
        const double ratio = sup_err(4e-3) / sup_err(2e-3);
        d = "halving ratio " + g3(ratio) + ", energy drift " + g3(tbar_energy_drift);
        return ratio >= 8.0 && ratio <= 32.0 && tbar_energy_drift <= 1e-4;
    });

    std::printf("%d of 10 criteria passed\n", 10 - gate.failures);
    return gate.failures;
}
