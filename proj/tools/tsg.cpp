// tsg: tensegrity dynamics, symmetry reduction, and SymPINN training.
//
// Subcommands: detect, basis, simulate, train, eval, compare.
// Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 symmetry failure.

#include <tsg/dynamics.hpp>
#include <tsg/metrics.hpp>
#include <tsg/net.hpp>
#include <tsg/structure.hpp>
#include <tsg/symmetry.hpp>
#include <tsg/train.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            int v = std::stoi(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw tsg::InputError("bad integer list entry: '" + item + "'");
        }
    }
    if (out.empty()) throw tsg::InputError("empty integer list: '" + text + "'");
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            double v = std::stod(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw tsg::InputError("bad number list entry: '" + item + "'");
        }
    }
    if (out.empty()) throw tsg::InputError("empty number list: '" + text + "'");
    return out;
}

int thread_budget() {
    if (const char* env = std::getenv("TSG_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (const std::exception&) {
        }
        throw tsg::InputError("TSG_THREADS must be a positive integer");
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string perm_to_string(const tsg::Permutation& p) {
    std::string s = "(";
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) s += " ";
        s += std::to_string(p[i]);
    }
    return s + ")";
}

// ---------------------------------------------------------------------------
// Symmetry detection policy shared by detect/simulate/train: enumerate the
// connectivity automorphisms, keep the ones a fitted rotation verifies
// geometrically, and pick a primary action (proper rotations first, then
// fewest orbits, then lexicographically smallest permutation).

struct DetectOutcome {
    tsg::SymmetryAction primary;
    int n_perms = 0;     // connectivity automorphisms, identity included
    int n_verified = 0;  // non-identity actions that verify geometrically
};

DetectOutcome detect_primary(const tsg::TensegrityStructure& s, double tol) {
    DetectOutcome out;
    auto perms = tsg::detect_permutations(s.bars, s.strings, s.n_nodes());
    out.n_perms = static_cast<int>(perms.size());

    Eigen::MatrixXd N = tsg::node_matrix(s);
    Eigen::RowVector3d c = N.colwise().mean();
    Eigen::MatrixXd Nc = N.rowwise() - c;

    struct Candidate {
        tsg::SymmetryAction act;
        bool proper;
        std::size_t n_orbits;
    };
    std::vector<Candidate> verified;
    for (const auto& p : perms) {
        if (tsg::is_identity(p)) continue;
        tsg::RotationFit fit;
        try {
            fit = tsg::fit_rotation(Nc, p);
        } catch (const tsg::NumericalError&) {
            continue;  // degenerate geometry for this permutation
        }
        auto check = tsg::verify_symmetry(N, p, fit.R, tol);
        if (!check.pass) continue;
        tsg::SymmetryAction act;
        act.perm = p;
        act.R = fit.R;
        act.center = c.transpose();
        act.order = tsg::action_order(p, fit.R, tol);
        act.residual = check.residual;
        verified.push_back({act, fit.R.determinant() > 0.0, tsg::orbits(p).size()});
    }
    out.n_verified = static_cast<int>(verified.size());
    if (verified.empty())
        throw tsg::SymmetryError("no geometrically verified non-trivial symmetry found");

    std::sort(verified.begin(), verified.end(), [](const Candidate& a, const Candidate& b) {
        if (a.proper != b.proper) return a.proper;  // proper rotations first
        if (a.n_orbits != b.n_orbits) return a.n_orbits < b.n_orbits;
        return a.act.perm < b.act.perm;
    });
    out.primary = verified.front().act;
    return out;
}

int reduced_dim(const tsg::TensegrityStructure& s, const tsg::SymmetryAction& act) {
    auto p_free = tsg::restrict_permutation(act.perm, s.free_ids);
    return tsg::basis_svd(tsg::build_S(p_free, act.R)).n_r;
}

// Load the symmetry for a run: explicit file wins, otherwise detect.
tsg::SymmetryAction resolve_action(const tsg::TensegrityStructure& s, const std::string& path,
                                   double tol) {
    if (!path.empty()) return tsg::load_symmetry(path).action;
    return detect_primary(s, tol).primary;
}

Eigen::MatrixXd restrict_cols(const Eigen::MatrixXd& full, const std::vector<int>& ids) {
    Eigen::MatrixXd out(full.rows(), 3 * static_cast<Eigen::Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k)
        out.middleCols(3 * static_cast<Eigen::Index>(k), 3) = full.middleCols(3 * ids[k], 3);
    return out;
}

// Embed a free-coordinate trajectory back into full nodal coordinates,
// holding constrained nodes at their prescribed (fixed) positions.
tsg::Trajectory embed_full(const tsg::Trajectory& free_traj, const tsg::TensegrityStructure& s,
                           const Eigen::VectorXd& nb0) {
    auto sel = tsg::partition_selectors(s);
    tsg::Trajectory out;
    out.times = free_traj.times;
    out.states = free_traj.states * sel.Ea.transpose();
    if (sel.Eb.cols() > 0) out.states.rowwise() += (sel.Eb * nb0).transpose();
    if (free_traj.has_velocities()) out.velocities = free_traj.velocities * sel.Ea.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Training pipeline shared by cmd_train and cmd_compare.

struct TrainOptions {
    std::string mode = "sympinn";
    double rate = 0.5;
    std::uint64_t seed = 0;
    double rho = 20.0;
    std::vector<int> hidden = {32, 32};
    int fourier_k = 8;
    double fourier_sigma = 5.0;
    double lambda_g = 1.0;
    double lambda_d = 10.0;
    int epochs = 1000;
    int lbfgs_iters = 10;
    double tol = 1e-5;
    std::string stiffness = "frozen";
    std::string symmetry_path;
    double sym_tol = 1e-8;
    bool force = false;
    bool quiet = false;
};

struct TrainOutcome {
    tsg::Checkpoint ckpt;
    tsg::TrainState state;
    tsg::Metrics metrics;
    int n_params = 0;
    int n_train = 0, n_test = 0;
    double train_seconds = 0;
};

tsg::StiffnessMode stiffness_mode(const std::string& name) {
    if (name == "frozen") return tsg::StiffnessMode::frozen;
    if (name == "per-point") return tsg::StiffnessMode::per_point;
    throw tsg::InputError("unknown stiffness mode: " + name + " (expected frozen|per-point)");
}

TrainOutcome run_training(const tsg::TensegrityStructure& s, const tsg::Trajectory& traj,
                          const TrainOptions& opt) {
    if (opt.mode != "sympinn" && opt.mode != "pinn")
        throw tsg::InputError("unknown mode: " + opt.mode + " (expected sympinn|pinn)");
    if (!traj.has_velocities())
        throw tsg::InputError("training requires a trajectory with velocity columns");
    if (traj.states.cols() != 3 * s.n_nodes())
        throw tsg::InputError("trajectory column count does not match the structure");
    traj.validate();
    const double t_end = traj.times(traj.times.size() - 1);

    // Symmetry: required for sympinn; used for assumption validation otherwise.
    tsg::SymmetryAction act;
    bool have_action = true;
    try {
        act = resolve_action(s, opt.symmetry_path, opt.sym_tol);
    } catch (const tsg::SymmetryError&) {
        if (opt.mode == "sympinn") throw;
        have_action = false;
    }

    if (have_action) {
        auto sys = tsg::assemble(s);
        tsg::InitialConditions ics{traj.states.row(0).transpose(), traj.velocities.row(0).transpose()};
        auto report = tsg::validate_assumptions(s, act, sys.f_ex, ics, opt.sym_tol, t_end);
        if (!report.all()) {
            std::cerr << report.summary();
            if (!opt.force)
                throw tsg::SymmetryError("symmetry assumptions not satisfied (rerun with --force to override)");
            std::cerr << "continuing despite failed assumption checks (--force)\n";
        }
    }

    // With every node free the centroid decouples (uniform free fall), so the
    // centered trajectory obeys the gravity-free equations exactly; train on
    // it and drop gravity from the model. Anchored structures keep both.
    const bool centered = s.constrained_ids.empty();
    tsg::Trajectory traj_c = centered ? tsg::centralize(traj) : traj;
    tsg::Trajectory na = tsg::restrict_to_free(traj_c, s);

    tsg::TensegrityStructure s2 = s;
    if (centered) s2.gravity = 0.0;
    auto sys2 = tsg::assemble(s2);
    tsg::InitialConditions ics_c{traj_c.states.row(0).transpose(), traj_c.velocities.row(0).transpose()};
    auto motion = tsg::ConstrainedMotion::fixed(sys2.Eb.transpose() * ics_c.phi);
    tsg::FreeSystem f = tsg::reduce_free(sys2, ics_c, motion);

    auto split = tsg::sample_split(traj.n_times(), opt.rate, opt.seed);

    TrainOutcome out;
    out.n_train = static_cast<int>(split.train.size());
    out.n_test = static_cast<int>(split.test.size());

    const std::uint64_t net_seed = opt.seed;
    const std::uint64_t fourier_seed = opt.seed + 1000003ULL;
    auto map = tsg::FourierFeatureMap::gaussian(opt.fourier_k, opt.fourier_sigma, fourier_seed);
    tsg::LossWeights weights{opt.lambda_g, opt.lambda_d};
    tsg::TrainConfig cfg;
    cfg.adam.max_epochs = opt.epochs;
    cfg.lbfgs.max_iters = opt.lbfgs_iters;
    cfg.tol = opt.tol;
    cfg.lbfgs.tol = opt.tol;

    tsg::Checkpoint ckpt;
    ckpt.mode = opt.mode;
    ckpt.fourier_k = opt.fourier_k;
    ckpt.fourier_sigma = opt.fourier_sigma;
    ckpt.fourier_seed = fourier_seed;
    ckpt.freqs = map.freqs;
    ckpt.rho = opt.rho;
    ckpt.lambda_g = opt.lambda_g;
    ckpt.lambda_d = opt.lambda_d;
    ckpt.rate = opt.rate;
    ckpt.seed = opt.seed;
    ckpt.t_end = t_end;
    ckpt.free_ids = s.free_ids;
    ckpt.centered = centered;

    if (opt.mode == "sympinn") {
        auto p_free = tsg::restrict_permutation(act.perm, s.free_ids);
        auto basis = tsg::basis_svd(tsg::build_S(p_free, act.R));
        const Eigen::MatrixXd& U = basis.U;
        if (basis.n_r == 0) throw tsg::SymmetryError("symmetric subspace is trivial; nothing to learn");

        double scale = na.states.cwiseAbs().maxCoeff();
        double proj_res = (na.states - na.states * U * U.transpose()).cwiseAbs().maxCoeff();
        if (proj_res > 1e-6 * std::max(scale, 1.0) && !opt.quiet)
            std::cerr << "warning: trajectory leaves the symmetric subspace (max residual "
                      << fmt(proj_res) << ")\n";

        tsg::ReducedSystem reduced = tsg::reduce_sym(f, U);
        tsg::Trajectory ztraj;
        ztraj.times = na.times;
        ztraj.states = na.states * U;

        auto data = tsg::make_training_data(reduced, ztraj, split.train);
        Eigen::MatrixXd z_train = data.targets;
        auto op = tsg::make_residual_operator(reduced, stiffness_mode(opt.stiffness), data.times, z_train);

        std::vector<int> widths;
        widths.push_back(map.dim());
        widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
        widths.push_back(reduced.dim());
        tsg::SymPinnModel model{tsg::Mlp::create(widths, net_seed), map,
                                {reduced.z0, reduced.zdot0, opt.rho}};
        tsg::SymPinnObjective obj(model, op, data, weights);
        auto fn = [&obj](const Eigen::VectorXd& th, Eigen::VectorXd* g) { return obj.eval(th, g); };
        out.state = tsg::train(fn, model.net.get_params(), cfg);

        model.net.set_params(out.state.theta);
        Eigen::MatrixXd Y(out.n_test, na.states.cols());
        Eigen::MatrixXd Yhat(out.n_test, na.states.cols());
        for (int k = 0; k < out.n_test; ++k) {
            int idx = split.test[static_cast<std::size_t>(k)];
            Y.row(k) = na.states.row(idx);
            Yhat.row(k) = (U * tsg::eval_sympinn(model, na.times(idx)).z).transpose();
        }
        out.metrics = tsg::compute_metrics(Y, Yhat);
        out.n_params = model.net.n_params();

        ckpt.widths = widths;
        ckpt.params = out.state.theta;
        ckpt.z0 = reduced.z0;
        ckpt.zdot0 = reduced.zdot0;
        ckpt.U = U;
        ckpt.normalizer = op.normalizer;
    } else {
        auto data = tsg::make_training_data(f, na, split.train);
        Eigen::MatrixXd na_train = data.targets;
        auto op = tsg::make_residual_operator(f, stiffness_mode(opt.stiffness), data.times, na_train);

        std::vector<int> widths;
        widths.push_back(map.dim());
        widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
        widths.push_back(f.dim());
        tsg::PinnModel model{tsg::Mlp::create(widths, net_seed), map, f.phi, f.psi};
        tsg::PinnObjective obj(model, op, data, weights);
        auto fn = [&obj](const Eigen::VectorXd& th, Eigen::VectorXd* g) { return obj.eval(th, g); };
        out.state = tsg::train(fn, model.net.get_params(), cfg);

        model.net.set_params(out.state.theta);
        Eigen::MatrixXd Y(out.n_test, na.states.cols());
        Eigen::MatrixXd Yhat(out.n_test, na.states.cols());
        for (int k = 0; k < out.n_test; ++k) {
            int idx = split.test[static_cast<std::size_t>(k)];
            Y.row(k) = na.states.row(idx);
            Yhat.row(k) = tsg::eval_pinn(model, na.times(idx)).z.transpose();
        }
        out.metrics = tsg::compute_metrics(Y, Yhat);
        out.n_params = model.net.n_params();

        ckpt.widths = widths;
        ckpt.params = out.state.theta;
        ckpt.z0 = f.phi;
        ckpt.zdot0 = f.psi;
        ckpt.U = Eigen::MatrixXd::Identity(f.dim(), f.dim());
        ckpt.normalizer = op.normalizer;
    }

    out.train_seconds = out.state.adam_seconds + out.state.lbfgs_seconds;
    out.ckpt = ckpt;
    return out;
}

nlohmann::json train_config_json(const TrainOptions& o) {
    return {{"mode", o.mode},          {"rate", o.rate},
            {"seed", o.seed},          {"rho", o.rho},
            {"hidden", o.hidden},      {"fourier_k", o.fourier_k},
            {"fourier_sigma", o.fourier_sigma}, {"lambda_g", o.lambda_g},
            {"lambda_d", o.lambda_d},  {"epochs", o.epochs},
            {"lbfgs_iters", o.lbfgs_iters},     {"tol", o.tol},
            {"stiffness", o.stiffness},         {"symmetry", o.symmetry_path},
            {"sym_tol", o.sym_tol},    {"force", o.force}};
}

// ---------------------------------------------------------------------------
// Subcommands

struct DetectArgs {
    std::string structure;
    std::string out = "symmetry.json";
    double tol = 1e-8;
};

void cmd_detect(const DetectArgs& a) {
    auto s = tsg::load_structure(a.structure);
    auto res = detect_primary(s, a.tol);
    int n_r = reduced_dim(s, res.primary);
    tsg::save_symmetry(a.out, res.primary, n_r);

    tsg::RunManifest man;
    man.command = "detect";
    man.inputs = {a.structure};
    man.outputs = {a.out};
    man.config = {{"tol", a.tol}};
    tsg::save_manifest(a.out + ".manifest.json", man);

    auto orbs = tsg::orbits(res.primary.perm);
    std::cout << "structure: " << s.name << " (" << s.n_nodes() << " nodes, " << s.n_bars()
              << " bars, " << s.n_strings() << " strings)\n";
    std::cout << "automorphisms: " << res.n_perms << " (" << res.n_verified
              << " verified geometrically)\n";
    std::cout << "permutation: " << perm_to_string(res.primary.perm) << "\n";
    std::cout << "R:\n" << res.primary.R << "\n";
    std::cout << "det(R) = " << fmt(res.primary.R.determinant()) << ", order = "
              << res.primary.order << ", orbits = " << orbs.size() << ", residual = "
              << fmt(res.primary.residual) << "\n";
    std::cout << "reduced dimension n_r = " << n_r << " (of " << 3 * s.n_free() << ")\n";
    std::cout << "wrote " << a.out << "\n";
}

struct BasisArgs {
    std::string structure;
    std::string symmetry;
    std::string method = "svd";
    double tol = 1e-6;
    std::string out = "basis.json";
};

void cmd_basis(const BasisArgs& a) {
    auto s = tsg::load_structure(a.structure);
    auto sym = tsg::load_symmetry(a.symmetry);
    if (static_cast<int>(sym.action.perm.size()) != s.n_nodes())
        throw tsg::InputError("symmetry file does not match the structure's node count");
    auto p_free = tsg::restrict_permutation(sym.action.perm, s.free_ids);
    Eigen::MatrixXd S = tsg::build_S(p_free, sym.action.R);

    tsg::SymmetryBasis basis;
    if (a.method == "svd")
        basis = tsg::basis_svd(S, a.tol);
    else if (a.method == "eig")
        basis = tsg::basis_eigen(p_free, sym.action.R);
    else
        throw tsg::InputError("unknown method: " + a.method + " (expected eig|svd)");

    double ortho = basis.n_r
        ? (basis.U.transpose() * basis.U - Eigen::MatrixXd::Identity(basis.n_r, basis.n_r)).cwiseAbs().maxCoeff()
        : 0.0;
    double null_res = basis.n_r ? (S * basis.U).cwiseAbs().maxCoeff() : 0.0;
    if (ortho > 1e-12) throw tsg::NumericalError("basis failed orthonormality check: " + fmt(ortho));
    if (null_res > 1e-8) throw tsg::NumericalError("basis failed nullspace check: " + fmt(null_res));

    nlohmann::json j;
    j["format"] = "tsg-basis";
    j["version"] = tsg::kVersion;
    j["method"] = basis.method;
    j["tol"] = basis.tol;
    j["n_r"] = basis.n_r;
    j["gap_warning"] = basis.gap_warning;
    j["gap_ratio"] = basis.gap_ratio;
    j["orthogonality_residual"] = ortho;
    j["nullspace_residual"] = null_res;
    j["U"] = tsg::detail::mat_to_json(basis.U);
    std::ofstream outf(a.out);
    if (!outf) throw tsg::InputError("cannot write basis file: " + a.out);
    outf << j.dump(2) << "\n";

    tsg::RunManifest man;
    man.command = "basis";
    man.inputs = {a.structure, a.symmetry};
    man.outputs = {a.out};
    man.config = {{"method", a.method}, {"tol", a.tol}};
    tsg::save_manifest(a.out + ".manifest.json", man);

    std::cout << "n_r = " << basis.n_r << " (of " << S.cols() << "), method " << basis.method
              << ", |U^T U - I| = " << fmt(ortho) << ", |S U| = " << fmt(null_res) << "\n";
    if (basis.gap_warning)
        std::cout << "warning: weak spectral separation (gap ratio " << fmt(basis.gap_ratio) << ")\n";
    std::cout << "wrote " << a.out << "\n";
}

struct SimulateArgs {
    std::string structure;
    double t_end = 1.0;
    int points = 1001;
    double dt = 1e-3;
    std::string space = "full";
    std::string symmetry;
    double sym_tol = 1e-8;
    std::string out = "trajectory.csv";
};

void cmd_simulate(const SimulateArgs& a) {
    if (a.points < 1) throw tsg::InputError("--points must be at least 1");
    if (!(a.t_end > 0)) throw tsg::InputError("--t-end must be positive");
    auto s = tsg::load_structure(a.structure);
    auto sys = tsg::assemble(s);
    auto ics = tsg::initial_conditions(s);
    auto motion = tsg::ConstrainedMotion::fixed(sys.Eb.transpose() * ics.phi);
    tsg::FreeSystem f = tsg::reduce_free(sys, ics, motion);
    Eigen::VectorXd grid = tsg::linspace(0.0, a.t_end, a.points);
    tsg::IntegrateOptions opts;
    opts.dt = a.dt;

    tsg::IntegrationResult res;
    if (a.space == "full") {
        res = tsg::integrate_full(f, grid, opts);
    } else if (a.space == "reduced") {
        auto act = resolve_action(s, a.symmetry, a.sym_tol);
        auto p_free = tsg::restrict_permutation(act.perm, s.free_ids);
        auto basis = tsg::basis_svd(tsg::build_S(p_free, act.R));
        auto reduced = tsg::reduce_sym(f, basis.U);
        res = tsg::integrate_reduced(reduced, grid, opts);
        res.traj = tsg::reconstruct(basis.U, res.traj);
    } else {
        throw tsg::InputError("unknown space: " + a.space + " (expected full|reduced)");
    }

    tsg::Trajectory full = embed_full(res.traj, s, sys.Eb.transpose() * ics.phi);
    tsg::save_trajectory_csv(a.out, full);

    tsg::RunManifest man;
    man.command = "simulate";
    man.inputs = {a.structure};
    if (!a.symmetry.empty()) man.inputs.push_back(a.symmetry);
    man.outputs = {a.out};
    man.config = {{"t_end", a.t_end}, {"points", a.points}, {"dt", a.dt}, {"space", a.space}};
    tsg::save_manifest(a.out + ".manifest.json", man);

    std::cout << "integrated " << a.points << " samples over [0, " << fmt(a.t_end) << "] s (dt "
              << fmt(a.dt) << ", space " << a.space << ")\n";
    if (f.energy && a.space == "full")
        std::cout << "relative energy drift: " << fmt(res.energy_drift) << "\n";
    std::cout << "wrote " << a.out << "\n";
}

struct TrainArgs {
    std::string structure;
    std::string traj;
    TrainOptions opt;
    std::string out = "checkpoint.json";
    std::string log = "training_log.csv";
    std::string metrics = "metrics.json";
};

void cmd_train(const TrainArgs& a) {
    auto s = tsg::load_structure(a.structure);
    auto traj = tsg::load_trajectory_csv(a.traj);
    auto res = run_training(s, traj, a.opt);

    tsg::save_checkpoint(a.out, res.ckpt);
    tsg::save_training_log(a.log, res.state.history);
    tsg::save_metrics(a.metrics, res.metrics, res.train_seconds, res.n_params, a.opt.mode,
                      a.opt.rate, a.opt.seed);

    tsg::RunManifest man;
    man.command = "train";
    man.inputs = {a.structure, a.traj};
    man.outputs = {a.out, a.log, a.metrics};
    man.config = train_config_json(a.opt);
    man.seed = a.opt.seed;
    tsg::save_manifest(a.out + ".manifest.json", man);

    int adam_epochs = 0, lbfgs_iters = 0;
    for (const auto& r : res.state.history) (r.stage == "adam" ? adam_epochs : lbfgs_iters) = r.epoch;
    std::cout << "mode " << a.opt.mode << ", " << res.n_params << " parameters, dim "
              << res.ckpt.z0.size() << "\n";
    std::cout << "split: " << res.n_train << " train / " << res.n_test << " test (rate "
              << fmt(a.opt.rate) << ", seed " << a.opt.seed << ")\n";
    std::cout << "adam: " << adam_epochs << " epochs in " << fmt(res.state.adam_seconds) << " s"
              << (res.state.adam_converged ? " (converged)" : "") << "\n";
    std::cout << "lbfgs: " << lbfgs_iters << " iterations in " << fmt(res.state.lbfgs_seconds)
              << " s" << (res.state.lbfgs_line_search_failed ? " (line search stalled)" : "")
              << "\n";
    std::cout << "loss: L = " << fmt(res.state.final_parts.total) << " (L_G "
              << fmt(res.state.final_parts.physics) << ", L_D " << fmt(res.state.final_parts.data)
              << ")\n";
    std::cout << "test: RE = " << (res.metrics.re_defined ? fmt(res.metrics.re) : "undefined")
              << ", MSE = " << fmt(res.metrics.mse) << "\n";
    std::cout << "wrote " << a.out << ", " << a.log << ", " << a.metrics << "\n";
}

struct EvalArgs {
    std::string checkpoint;
    std::string traj;
    std::string out = "metrics.json";
};

void cmd_eval(const EvalArgs& a) {
    auto ckpt = tsg::load_checkpoint(a.checkpoint);
    auto traj = tsg::load_trajectory_csv(a.traj);
    if (ckpt.free_ids.empty()) throw tsg::InputError("checkpoint has no free node ids");
    for (int id : ckpt.free_ids)
        if (3 * id + 2 >= traj.states.cols())
            throw tsg::InputError("trajectory is too narrow for the checkpoint's node ids");

    tsg::Trajectory traj_c = ckpt.centered ? tsg::centralize(traj) : traj;
    Eigen::MatrixXd na = restrict_cols(traj_c.states, ckpt.free_ids);
    if (na.cols() != ckpt.U.rows())
        throw tsg::InputError("trajectory free-coordinate width does not match the checkpoint basis");

    auto split = tsg::sample_split(traj.n_times(), ckpt.rate, ckpt.seed);
    const int n_test = static_cast<int>(split.test.size());
    Eigen::MatrixXd Y(n_test, na.cols());
    Eigen::MatrixXd Yhat(n_test, na.cols());
    if (ckpt.mode == "sympinn") {
        auto model = tsg::sympinn_from_checkpoint(ckpt);
        for (int k = 0; k < n_test; ++k) {
            int idx = split.test[static_cast<std::size_t>(k)];
            Y.row(k) = na.row(idx);
            Yhat.row(k) = (ckpt.U * tsg::eval_sympinn(model, traj.times(idx)).z).transpose();
        }
    } else {
        auto model = tsg::pinn_from_checkpoint(ckpt);
        for (int k = 0; k < n_test; ++k) {
            int idx = split.test[static_cast<std::size_t>(k)];
            Y.row(k) = na.row(idx);
            Yhat.row(k) = tsg::eval_pinn(model, traj.times(idx)).z.transpose();
        }
    }
    auto m = tsg::compute_metrics(Y, Yhat);
    tsg::save_metrics(a.out, m, 0.0, static_cast<int>(ckpt.params.size()), ckpt.mode, ckpt.rate,
                      ckpt.seed);

    tsg::RunManifest man;
    man.command = "eval";
    man.inputs = {a.checkpoint, a.traj};
    man.outputs = {a.out};
    man.config = {{"mode", ckpt.mode}, {"rate", ckpt.rate}, {"seed", ckpt.seed}};
    man.seed = ckpt.seed;
    tsg::save_manifest(a.out + ".manifest.json", man);

    std::cout << "mode " << ckpt.mode << ", " << n_test << " test samples (rate " << fmt(ckpt.rate)
              << ", seed " << ckpt.seed << ")\n";
    std::cout << "RE = " << (m.re_defined ? fmt(m.re) : "undefined") << ", MSE = " << fmt(m.mse)
              << "\n";
    std::cout << "wrote " << a.out << "\n";
}

struct CompareArgs {
    std::string structure;
    std::string traj;
    std::string rates = "0.1,0.2,0.3,0.4,0.5";
    int seeds = 5;
    TrainOptions opt;  // shared hyperparameters; mode/rate/seed set per run
    std::string out = "compare.csv";
};

void cmd_compare(const CompareArgs& a) {
    if (a.seeds < 1) throw tsg::InputError("--seeds must be at least 1");
    auto rates = parse_double_list(a.rates);
    auto s = tsg::load_structure(a.structure);
    auto traj = tsg::load_trajectory_csv(a.traj);

    struct Job {
        std::string mode;
        double rate;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double rate : rates)
        for (int seed = 0; seed < a.seeds; ++seed)
            for (const char* mode : {"sympinn", "pinn"})
                jobs.push_back({mode, rate, static_cast<std::uint64_t>(seed)});

    struct Row {
        bool ok = false;
        std::string error;
        int exit_code = 0;
        double re = 0, mse = 0, seconds = 0;
        bool re_defined = false;
    };
    std::vector<Row> rows(jobs.size());

    const int n_threads = std::min<int>(thread_budget(), static_cast<int>(jobs.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            TrainOptions opt = a.opt;
            opt.mode = jobs[k].mode;
            opt.rate = jobs[k].rate;
            opt.seed = jobs[k].seed;
            opt.quiet = true;
            Row& row = rows[k];
            try {
                auto res = run_training(s, traj, opt);
                row.ok = true;
                row.re = res.metrics.re;
                row.re_defined = res.metrics.re_defined;
                row.mse = res.metrics.mse;
                row.seconds = res.train_seconds;
            } catch (const tsg::InputError& e) {
                row.error = e.what(); row.exit_code = 2;
            } catch (const tsg::SymmetryError& e) {
                row.error = e.what(); row.exit_code = 4;
            } catch (const tsg::NumericalError& e) {
                row.error = e.what(); row.exit_code = 3;
            } catch (const std::exception& e) {
                row.error = e.what(); row.exit_code = 3;
            }
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t k = 0; k < jobs.size(); ++k)
        if (!rows[k].ok) {
            std::string msg = jobs[k].mode + " rate " + fmt(jobs[k].rate) + " seed " +
                              std::to_string(jobs[k].seed) + ": " + rows[k].error;
            if (rows[k].exit_code == 4) throw tsg::SymmetryError(msg);
            if (rows[k].exit_code == 2) throw tsg::InputError(msg);
            throw tsg::NumericalError(msg);
        }

    std::ofstream outf(a.out);
    if (!outf) throw tsg::InputError("cannot write comparison table: " + a.out);
    outf << "mode,rate,seed,re,mse,train_seconds\n";
    char buf[256];
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%llu,%.17g,%.17g,%.17g\n", jobs[k].mode.c_str(),
                      jobs[k].rate, static_cast<unsigned long long>(jobs[k].seed), rows[k].re,
                      rows[k].mse, rows[k].seconds);
        outf << buf;
    }
    outf.close();

    tsg::RunManifest man;
    man.command = "compare";
    man.inputs = {a.structure, a.traj};
    man.outputs = {a.out};
    man.config = train_config_json(a.opt);
    man.config["rates"] = rates;
    man.config["seeds"] = a.seeds;
    tsg::save_manifest(a.out + ".manifest.json", man);

    // Per (mode, rate) summary: mean RE with min/max spread, mean seconds.
    std::cout << "mode      rate   mean RE      [min, max]                mean s\n";
    for (const char* mode : {"sympinn", "pinn"}) {
        for (double rate : rates) {
            double sum_re = 0, lo = 0, hi = 0, sum_s = 0;
            int n = 0;
            for (std::size_t k = 0; k < jobs.size(); ++k) {
                if (jobs[k].mode != mode || jobs[k].rate != rate) continue;
                double re = rows[k].re;
                if (n == 0) { lo = re; hi = re; }
                lo = std::min(lo, re);
                hi = std::max(hi, re);
                sum_re += re;
                sum_s += rows[k].seconds;
                ++n;
            }
            if (!n) continue;
            std::snprintf(buf, sizeof buf, "%-9s %-6.3g %-12.4g [%.4g, %.4g]%*s %.3g\n", mode, rate,
                          sum_re / n, lo, hi, 8, "", sum_s / n);
            std::cout << buf;
        }
    }
    std::cout << "wrote " << a.out << " (" << jobs.size() << " runs, " << n_threads
              << " thread" << (n_threads == 1 ? "" : "s") << ")\n";
}

void add_train_options(CLI::App* cmd, TrainOptions& opt, std::string& hidden_text) {
    cmd->add_option("--seed", opt.seed, "RNG seed for split and initialization");
    cmd->add_option("--rho", opt.rho, "hard-constraint quadratic scale");
    cmd->add_option("--hidden", hidden_text, "hidden layer widths, comma separated");
    cmd->add_option("--fourier-k", opt.fourier_k, "number of Fourier feature frequencies");
    cmd->add_option("--fourier-sigma", opt.fourier_sigma, "Fourier frequency scale (Hz)");
    cmd->add_option("--lambda-g", opt.lambda_g, "physics loss weight");
    cmd->add_option("--lambda-d", opt.lambda_d, "data loss weight");
    cmd->add_option("--epochs", opt.epochs, "Adam epoch budget");
    cmd->add_option("--lbfgs-iters", opt.lbfgs_iters, "L-BFGS iteration budget");
    cmd->add_option("--tol", opt.tol, "relative loss-change stopping tolerance");
    cmd->add_option("--stiffness", opt.stiffness, "residual stiffness: frozen|per-point");
    cmd->add_option("--symmetry", opt.symmetry_path, "symmetry JSON (skips detection)");
    cmd->add_option("--sym-tol", opt.sym_tol, "symmetry verification tolerance");
    cmd->add_flag("--force", opt.force, "train even if assumption checks fail");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensegrity dynamics, symmetry reduction, and SymPINN training"};
    app.require_subcommand(1);

    DetectArgs da;
    auto* cd = app.add_subcommand("detect", "detect the structure's primary symmetry");
    cd->add_option("structure", da.structure, "structure JSON")->required();
    cd->add_option("-o,--out", da.out, "output symmetry JSON");
    cd->add_option("--tol", da.tol, "geometric verification tolerance");

    BasisArgs ba;
    auto* cb = app.add_subcommand("basis", "compute the symmetric-subspace basis U");
    cb->add_option("structure", ba.structure, "structure JSON")->required();
    cb->add_option("symmetry", ba.symmetry, "symmetry JSON from detect")->required();
    cb->add_option("--method", ba.method, "eig|svd");
    cb->add_option("--tol", ba.tol, "SVD nullspace tolerance");
    cb->add_option("-o,--out", ba.out, "output basis JSON");

    SimulateArgs sa;
    auto* cs = app.add_subcommand("simulate", "integrate the dynamics (ground truth)");
    cs->add_option("structure", sa.structure, "structure JSON")->required();
    cs->add_option("--t-end", sa.t_end, "end time (s)");
    cs->add_option("--points", sa.points, "number of output samples");
    cs->add_option("--dt", sa.dt, "integrator step (s)");
    cs->add_option("--space", sa.space, "full|reduced");
    cs->add_option("--symmetry", sa.symmetry, "symmetry JSON (reduced space)");
    cs->add_option("--sym-tol", sa.sym_tol, "symmetry verification tolerance");
    cs->add_option("-o,--out", sa.out, "output trajectory CSV");

    TrainArgs ta;
    std::string ta_hidden = "32,32";
    auto* ct = app.add_subcommand("train", "fit a SymPINN or vanilla-PINN model");
    ct->add_option("structure", ta.structure, "structure JSON")->required();
    ct->add_option("trajectory", ta.traj, "trajectory CSV with velocities")->required();
    ct->add_option("--mode", ta.opt.mode, "sympinn|pinn");
    ct->add_option("--rate", ta.opt.rate, "training sample rate in (0,1)");
    add_train_options(ct, ta.opt, ta_hidden);
    ct->add_option("-o,--out", ta.out, "output checkpoint JSON");
    ct->add_option("--log", ta.log, "output loss history CSV");
    ct->add_option("--metrics", ta.metrics, "output test metrics JSON");

    EvalArgs ea;
    auto* ce = app.add_subcommand("eval", "evaluate a checkpoint on a trajectory's test split");
    ce->add_option("checkpoint", ea.checkpoint, "checkpoint JSON from train")->required();
    ce->add_option("trajectory", ea.traj, "trajectory CSV")->required();
    ce->add_option("-o,--out", ea.out, "output metrics JSON");

    CompareArgs ca;
    std::string ca_hidden = "32,32";
    auto* cc = app.add_subcommand("compare", "sweep rates x seeds for both modes");
    cc->add_option("structure", ca.structure, "structure JSON")->required();
    cc->add_option("trajectory", ca.traj, "trajectory CSV with velocities")->required();
    cc->add_option("--rates", ca.rates, "training rates, comma separated");
    cc->add_option("--seeds", ca.seeds, "seeds per rate (0..n-1)");
    add_train_options(cc, ca.opt, ca_hidden);
    cc->add_option("-o,--out", ca.out, "output comparison CSV");

    try {
        app.parse(argc, argv);
        if (*cd) cmd_detect(da);
        if (*cb) cmd_basis(ba);
        if (*cs) cmd_simulate(sa);
        if (*ct) {
            ta.opt.hidden = parse_int_list(ta_hidden);
            cmd_train(ta);
        }
        if (*ce) cmd_eval(ea);
        if (*cc) {
            ca.opt.hidden = parse_int_list(ca_hidden);
            cmd_compare(ca);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const tsg::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tsg::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const tsg::SymmetryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
