#pragma once

// Free-node reduction, symmetry reduction, and time integration.
//
// Full system:     M n'' + D n' + K(n,t) n + g = f_ex(t)
// Free coords:     M_a n_a'' + D_a n_a' + K_a(n_a,t) n_a = w(t, n_a)
// Reduced coords:  M_r z''  + D_r z'  + K_r(z,t) z = w_r(t, z),  n_a = U z
//
// The load closure takes the current free configuration because the coupling
// term K(n,t) E_b n_b depends on it; for structures with no constrained nodes
// it is a function of t alone.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tsg/errors.hpp"
#include "tsg/structure.hpp"

namespace tsg {

// Prescribed motion of the constrained nodes; position, velocity and
// acceleration as functions of time, each of size 3*n_b.
struct ConstrainedMotion {
    std::function<Eigen::VectorXd(double)> nb, nb_dot, nb_ddot;

    static ConstrainedMotion fixed(const Eigen::VectorXd& nb0) {
        ConstrainedMotion m;
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(nb0.size());
        m.nb = [nb0](double) { return nb0; };
        m.nb_dot = [zero](double) { return zero; };
        m.nb_ddot = [zero](double) { return zero; };
        return m;
    }
};

struct FreeSystem {
    Eigen::MatrixXd M, D;  // 3 n_a x 3 n_a
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> K;   // K_a(n_a, t)
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> w;   // load w(t, n_a)
    Eigen::VectorXd phi, psi;                                           // ICs in free coords
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> energy;  // optional
    int dim() const { return static_cast<int>(phi.size()); }
};

struct ReducedSystem {
    Eigen::MatrixXd Mr, Dr;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> Kr;  // K_r(z, t)
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> wr;  // w_r(t, z)
    Eigen::VectorXd z0, zdot0;
    Eigen::MatrixXd U;     // 3 n_a x n_r, orthonormal
    double Kr_fro = 0;     // |K_r(z0, 0)|_F, physics-loss normalizer
    int dim() const { return static_cast<int>(z0.size()); }
};

// Restrict the assembled full system to the free coordinates. Constrained
// nodes follow `motion`; their inertia, damping and stiffness coupling enter
// the load. ICs are restricted with the same selectors.
inline FreeSystem reduce_free(const AssembledSystem& sys, const InitialConditions& ics,
                              const ConstrainedMotion& motion) {
    FreeSystem f;
    const Eigen::MatrixXd& Ea = sys.Ea;
    const Eigen::MatrixXd& Eb = sys.Eb;
    f.M = Ea.transpose() * sys.M * Ea;
    f.D = Ea.transpose() * sys.D * Ea;

    const bool has_constrained = Eb.cols() > 0;
    auto K_full = sys.K;
    f.K = [K_full, Ea, Eb, motion, has_constrained](const Eigen::VectorXd& na, double t) {
        Eigen::VectorXd n = Ea * na;
        if (has_constrained) n += Eb * motion.nb(t);
        return Eigen::MatrixXd(Ea.transpose() * K_full(n, t) * Ea);
    };

    const Eigen::MatrixXd M_full = sys.M, D_full = sys.D;
    const Eigen::VectorXd g_vec = sys.g_vec;
    auto f_ex = sys.f_ex;
    f.w = [K_full, M_full, D_full, g_vec, f_ex, Ea, Eb, motion, has_constrained](double t, const Eigen::VectorXd& na) {
        Eigen::VectorXd rhs = f_ex(t) - g_vec;
        if (has_constrained) {
            const Eigen::VectorXd nb = motion.nb(t);
            const Eigen::VectorXd n = Ea * na + Eb * nb;
            rhs -= M_full * (Eb * motion.nb_ddot(t));
            rhs -= D_full * (Eb * motion.nb_dot(t));
            rhs -= K_full(n, t) * (Eb * nb);
        }
        return Eigen::VectorXd(Ea.transpose() * rhs);
    };

    f.phi = Ea.transpose() * (ics.phi - (has_constrained ? Eigen::VectorXd(Eb * motion.nb(0.0)) : Eigen::VectorXd::Zero(ics.phi.size())));
    f.psi = Ea.transpose() * ics.psi;

    if (sys.energy && !has_constrained) {
        auto e_full = sys.energy;
        f.energy = [e_full, Ea](const Eigen::VectorXd& na, const Eigen::VectorXd& va) {
            return e_full(Ea * na, Ea * va);
        };
    }
    return f;
}

// Galerkin restriction onto the symmetric subspace spanned by U.
inline ReducedSystem reduce_sym(const FreeSystem& f, const Eigen::MatrixXd& U) {
    if (U.rows() != f.dim()) throw InputError("reduce_sym: basis row count does not match free dim");
    if ((U.transpose() * U - Eigen::MatrixXd::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff() > 1e-10)
        throw InputError("reduce_sym: basis columns are not orthonormal");
    ReducedSystem r;
    r.U = U;
    r.Mr = U.transpose() * f.M * U;
    r.Dr = U.transpose() * f.D * U;
    auto Ka = f.K;
    r.Kr = [Ka, U](const Eigen::VectorXd& z, double t) {
        return Eigen::MatrixXd(U.transpose() * Ka(U * z, t) * U);
    };
    auto wa = f.w;
    r.wr = [wa, U](double t, const Eigen::VectorXd& z) { return Eigen::VectorXd(U.transpose() * wa(t, U * z)); };
    r.z0 = U.transpose() * f.phi;
    r.zdot0 = U.transpose() * f.psi;
    r.Kr_fro = r.Kr(r.z0, 0.0).norm();
    return r;
}

// ---------------------------------------------------------------------------
// Trajectories

struct Trajectory {
    Eigen::VectorXd times;       // T
    Eigen::MatrixXd states;      // T x dim, one row per time
    Eigen::MatrixXd velocities;  // T x dim or 0 x 0 when absent

    int n_times() const { return static_cast<int>(times.size()); }
    bool has_velocities() const { return velocities.rows() == states.rows() && velocities.rows() > 0; }

    void validate() const {
        if (times.size() != states.rows()) throw InputError("trajectory: times/states length mismatch");
        if (velocities.size() != 0 && velocities.rows() != states.rows())
            throw InputError("trajectory: velocity rows do not match states");
        for (Eigen::Index i = 1; i < times.size(); ++i)
            if (!(times(i) > times(i - 1))) throw InputError("trajectory: times must be strictly increasing");
        if (!states.allFinite() || (velocities.size() && !velocities.allFinite()))
            throw NumericalError("trajectory contains non-finite values");
    }
};

struct IntegrateOptions {
    double dt = 1e-3;  // internal substep cap; grid intervals are subdivided to respect it
};

struct IntegrationResult {
    Trajectory traj;
    double energy_drift = 0;  // max |E(t)-E(0)| / max(|E(0)|, 1) when an energy closure exists
};

namespace detail {

// Classic RK4 on q' = v, v' = M^{-1}(w(t,q) - D v - K(q,t) q). The mass matrix
// is factorized once; a non-SPD M is rejected.
inline IntegrationResult rk4(const Eigen::MatrixXd& M, const Eigen::MatrixXd& D,
                             const std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)>& K,
                             const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& w,
                             const Eigen::VectorXd& q0, const Eigen::VectorXd& v0,
                             const Eigen::VectorXd& t_grid, const IntegrateOptions& opts,
                             const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>& energy) {
    const Eigen::Index dim = q0.size();
    if (t_grid.size() < 1) throw InputError("integrate: empty time grid");
    if (!(opts.dt > 0)) throw InputError("integrate: dt must be positive");
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) throw NumericalError("integrate: mass matrix is not positive definite");

    auto accel = [&](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
        return Eigen::VectorXd(llt.solve(w(t, q) - D * v - K(q, t) * q));
    };

    IntegrationResult out;
    out.traj.times = t_grid;
    out.traj.states.resize(t_grid.size(), dim);
    out.traj.velocities.resize(t_grid.size(), dim);

    Eigen::VectorXd q = q0, v = v0;
    out.traj.states.row(0) = q.transpose();
    out.traj.velocities.row(0) = v.transpose();
    const double E0 = energy ? energy(q, v) : 0.0;
    double drift = 0.0;

    for (Eigen::Index k = 1; k < t_grid.size(); ++k) {
        const double t0 = t_grid(k - 1), t1 = t_grid(k);
        if (!(t1 > t0)) throw InputError("integrate: time grid must be strictly increasing");
        const int substeps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / opts.dt - 1e-12)));
        const double h = (t1 - t0) / substeps;
        for (int s = 0; s < substeps; ++s) {
            const double t = t0 + s * h;
            const Eigen::VectorXd k1q = v, k1v = accel(t, q, v);
            const Eigen::VectorXd k2q = v + 0.5 * h * k1v, k2v = accel(t + 0.5 * h, q + 0.5 * h * k1q, v + 0.5 * h * k1v);
            const Eigen::VectorXd k3q = v + 0.5 * h * k2v, k3v = accel(t + 0.5 * h, q + 0.5 * h * k2q, v + 0.5 * h * k2v);
            const Eigen::VectorXd k4q = v + h * k3v, k4v = accel(t + h, q + h * k3q, v + h * k3v);
            q += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        if (!q.allFinite() || !v.allFinite())
            throw NumericalError("integrate: state became non-finite at t = " + std::to_string(t1));
        out.traj.states.row(k) = q.transpose();
        out.traj.velocities.row(k) = v.transpose();
        if (energy) drift = std::max(drift, std::abs(energy(q, v) - E0));
    }
    out.energy_drift = energy ? drift / std::max(std::abs(E0), 1.0) : 0.0;
    return out;
}

}  // namespace detail

inline IntegrationResult integrate_full(const FreeSystem& f, const Eigen::VectorXd& t_grid,
                                        const IntegrateOptions& opts = {}) {
    return detail::rk4(f.M, f.D, f.K, f.w, f.phi, f.psi, t_grid, opts, f.energy);
}

inline IntegrationResult integrate_reduced(const ReducedSystem& r, const Eigen::VectorXd& t_grid,
                                           const IntegrateOptions& opts = {}) {
    return detail::rk4(r.Mr, r.Dr, r.Kr, r.wr, r.z0, r.zdot0, t_grid, opts, nullptr);
}

// Lift a reduced trajectory back to free coordinates: n_a = U z (rows).
inline Trajectory reconstruct(const Eigen::MatrixXd& U, const Trajectory& z_traj) {
    if (z_traj.states.cols() != U.cols()) throw InputError("reconstruct: basis column count does not match z dim");
    Trajectory out;
    out.times = z_traj.times;
    out.states = z_traj.states * U.transpose();
    if (z_traj.has_velocities()) out.velocities = z_traj.velocities * U.transpose();
    return out;
}

// Remove the instantaneous coordinate centroid from every sample (and the
// velocity centroid from velocity rows). The uniform translation mode carries
// no elastic information and this is what makes trajectories with free fall
// trainable; see the README.
inline Trajectory centralize(const Trajectory& traj) {
    if (traj.states.cols() % 3 != 0) throw InputError("centralize: state dim is not a multiple of 3");
    const Eigen::Index nn = traj.states.cols() / 3;
    Trajectory out = traj;
    auto center_rows = [nn](Eigen::MatrixXd& X) {
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (Eigen::Index i = 0; i < nn; ++i) c += X.row(r).segment<3>(3 * i).transpose();
            c /= static_cast<double>(nn);
            for (Eigen::Index i = 0; i < nn; ++i) X.row(r).segment<3>(3 * i) -= c.transpose();
        }
    };
    center_rows(out.states);
    if (out.has_velocities()) center_rows(out.velocities);
    return out;
}

inline InitialConditions centralize(const InitialConditions& ics) {
    auto center_vec = [](const Eigen::VectorXd& x) {
        const Eigen::Index nn = x.size() / 3;
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        for (Eigen::Index i = 0; i < nn; ++i) c += x.segment<3>(3 * i);
        c /= static_cast<double>(nn);
        Eigen::VectorXd y = x;
        for (Eigen::Index i = 0; i < nn; ++i) y.segment<3>(3 * i) -= c;
        return y;
    };
    return {center_vec(ics.phi), center_vec(ics.psi)};
}

// ---------------------------------------------------------------------------
// CSV I/O
//
// Layout: t,n1x,n1y,n1z,...  followed by v1x,v1y,v1z,... when velocities are
// present. Values are written with 17 significant digits so read-back is
// bit-exact.

inline void save_trajectory_csv(const std::string& path, const Trajectory& traj) {
    traj.validate();
    std::ofstream out(path);
    if (!out) throw InputError("cannot write trajectory file: " + path);
    const Eigen::Index nn = traj.states.cols() / 3;
    out << "t";
    for (Eigen::Index i = 0; i < nn; ++i)
        out << ",n" << (i + 1) << "x,n" << (i + 1) << "y,n" << (i + 1) << "z";
    if (traj.has_velocities())
        for (Eigen::Index i = 0; i < nn; ++i)
            out << ",v" << (i + 1) << "x,v" << (i + 1) << "y,v" << (i + 1) << "z";
    out << "\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
    };
    for (Eigen::Index r = 0; r < traj.times.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.times(r));
        out << buf;
        for (Eigen::Index c = 0; c < traj.states.cols(); ++c) put(traj.states(r, c));
        if (traj.has_velocities())
            for (Eigen::Index c = 0; c < traj.velocities.cols(); ++c) put(traj.velocities(r, c));
        out << "\n";
    }
}

inline Trajectory load_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open trajectory file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("trajectory file is empty: " + path);
    // Header: count coordinate and velocity columns.
    int n_cols = 0, n_vel = 0;
    {
        std::stringstream ss(line);
        std::string tok;
        bool first = true;
        while (std::getline(ss, tok, ',')) {
            if (first) {
                if (tok != "t") throw InputError("trajectory header must start with t");
                first = false;
                continue;
            }
            if (!tok.empty() && tok[0] == 'n')
                ++n_cols;
            else if (!tok.empty() && tok[0] == 'v')
                ++n_vel;
            else
                throw InputError("unrecognized trajectory column: " + tok);
        }
    }
    if (n_cols == 0 || n_cols % 3 != 0) throw InputError("trajectory file has no coordinate columns");
    if (n_vel != 0 && n_vel != n_cols) throw InputError("trajectory velocity columns do not match coordinates");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        vals.reserve(static_cast<std::size_t>(1 + n_cols + n_vel));
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                vals.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw InputError("trajectory file has a non-numeric field: " + tok);
            }
        }
        if (static_cast<int>(vals.size()) != 1 + n_cols + n_vel)
            throw InputError("trajectory row has wrong column count");
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw InputError("trajectory file has no samples");

    Trajectory traj;
    traj.times.resize(static_cast<Eigen::Index>(rows.size()));
    traj.states.resize(static_cast<Eigen::Index>(rows.size()), n_cols);
    if (n_vel) traj.velocities.resize(static_cast<Eigen::Index>(rows.size()), n_vel);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        traj.times(static_cast<Eigen::Index>(r)) = rows[r][0];
        for (int c = 0; c < n_cols; ++c) traj.states(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(1 + c)];
        for (int c = 0; c < n_vel; ++c) traj.velocities(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(1 + n_cols + c)];
    }
    traj.validate();
    return traj;
}

// Restrict full-coordinate trajectory rows to the free coordinates.
inline Trajectory restrict_to_free(const Trajectory& traj, const TensegrityStructure& s) {
    if (traj.states.cols() != 3 * s.n_nodes()) throw InputError("trajectory width does not match structure");
    Trajectory out;
    out.times = traj.times;
    out.states.resize(traj.states.rows(), 3 * s.n_free());
    if (traj.has_velocities()) out.velocities.resize(traj.states.rows(), 3 * s.n_free());
    for (int a = 0; a < s.n_free(); ++a) {
        const int i = s.free_ids[static_cast<std::size_t>(a)];
        out.states.middleCols<3>(3 * a) = traj.states.middleCols<3>(3 * i);
        if (traj.has_velocities()) out.velocities.middleCols<3>(3 * a) = traj.velocities.middleCols<3>(3 * i);
    }
    return out;
}

inline Eigen::VectorXd linspace(double a, double b, int n) {
    if (n < 1) throw InputError("linspace: need at least one point");
    Eigen::VectorXd t(n);
    if (n == 1) {
        t(0) = a;
        return t;
    }
    for (int i = 0; i < n; ++i) t(i) = a + (b - a) * i / (n - 1);
    return t;
}

}  // namespace tsg
