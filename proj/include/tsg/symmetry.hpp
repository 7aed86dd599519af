#pragma once

// Point-symmetry detection and symmetry-adapted bases.
//
// A symmetry action is a pair (p, R): a node permutation p and an orthogonal
// matrix R with  R (q_i - c) = q_{p[i]} - c  for every node i, where c is the
// coordinate centroid. With N the n x 3 matrix of node rows and P the
// permutation matrix P = sum_j e_{p[j]} e_j^T, that condition is
//
//   (N - 1 c^T) R = P (N - 1 c^T).
//
// Vector fields over the nodes (velocities, forces) are equivariant under the
// action exactly when F R = P F with no centering for forces and centroid
// removal for point sets. The symmetric subspace of free-node coordinates is
// null(S) with S = I (x) R^T - P (x) I_3.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsg/constants.hpp"
#include "tsg/errors.hpp"
#include "tsg/structure.hpp"

namespace tsg {

using Permutation = std::vector<int>;

inline bool is_identity(const Permutation& p) {
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] != static_cast<int>(i)) return false;
    return true;
}

inline Eigen::MatrixXd perm_matrix(const Permutation& p) {
    const int n = static_cast<int>(p.size());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) P(p[static_cast<std::size_t>(j)], j) = 1.0;
    return P;
}

inline Permutation compose(const Permutation& a, const Permutation& b) {
    // (a o b)(i) = a(b(i))
    Permutation c(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) c[i] = a[static_cast<std::size_t>(b[i])];
    return c;
}

inline Permutation invert(const Permutation& p) {
    Permutation inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<int>(i);
    return inv;
}

// Cycle decomposition; each orbit ascending, orbits ordered by smallest element.
inline std::vector<std::vector<int>> orbits(const Permutation& p) {
    std::vector<std::vector<int>> out;
    std::vector<bool> seen(p.size(), false);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (seen[i]) continue;
        std::vector<int> orb;
        int j = static_cast<int>(i);
        while (!seen[static_cast<std::size_t>(j)]) {
            seen[static_cast<std::size_t>(j)] = true;
            orb.push_back(j);
            j = p[static_cast<std::size_t>(j)];
        }
        std::sort(orb.begin(), orb.end());
        out.push_back(std::move(orb));
    }
    return out;
}

struct SymmetryAction {
    Permutation perm;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    int order = 1;        // smallest k >= 1 with perm^k = id and R^k = I; 0 if R^k never closes
    double residual = 0;  // sup-norm geometric verification residual
};

inline SymmetryAction identity_action(int n_nodes) {
    SymmetryAction a;
    a.perm.resize(static_cast<std::size_t>(n_nodes));
    std::iota(a.perm.begin(), a.perm.end(), 0);
    return a;
}

inline int action_order(const Permutation& perm, const Eigen::Matrix3d& R, double tol = 1e-8) {
    Permutation p = perm;
    Eigen::Matrix3d Rk = R;
    for (int k = 1; k <= 256; ++k) {
        if (is_identity(p)) {
            return ((Rk - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol) ? k : 0;
        }
        p = compose(perm, p);
        Rk = R * Rk;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Graph automorphisms

struct DetectOptions {
    int max_nodes = 64;
    std::size_t max_results = 4096;
};

namespace detail {

struct AdjCounts {
    // cnt[i][j]: number of parallel members of one type between i and j
    std::vector<std::map<int, int>> bar, str;
    explicit AdjCounts(int n) : bar(static_cast<std::size_t>(n)), str(static_cast<std::size_t>(n)) {}
    static void add(std::vector<std::map<int, int>>& c, int i, int j) {
        c[static_cast<std::size_t>(i)][j]++;
        c[static_cast<std::size_t>(j)][i]++;
    }
    static int get(const std::vector<std::map<int, int>>& c, int i, int j) {
        auto it = c[static_cast<std::size_t>(i)].find(j);
        return it == c[static_cast<std::size_t>(i)].end() ? 0 : it->second;
    }
};

}  // namespace detail

// All node permutations preserving the typed multigraph (bars map to bars,
// strings to strings, multiplicities kept). Output is lexicographically sorted
// and always contains the identity. Search is plain backtracking with
// degree-signature pruning; structures above max_nodes are rejected.
inline std::vector<Permutation> detect_permutations(const std::vector<std::pair<int, int>>& bars,
                                                    const std::vector<std::pair<int, int>>& strings,
                                                    int n_nodes, const DetectOptions& opts = {}) {
    if (n_nodes <= 0) throw InputError("detect_permutations: empty structure");
    if (n_nodes > opts.max_nodes)
        throw InputError("detect_permutations: node count " + std::to_string(n_nodes) +
                         " exceeds search bound " + std::to_string(opts.max_nodes));
    detail::AdjCounts adj(n_nodes);
    for (auto [i, j] : bars) detail::AdjCounts::add(adj.bar, i, j);
    for (auto [i, j] : strings) detail::AdjCounts::add(adj.str, i, j);

    // Iterated neighborhood colouring, a few refinement rounds for pruning.
    std::vector<long long> color(static_cast<std::size_t>(n_nodes));
    for (int i = 0; i < n_nodes; ++i) {
        long long bd = 0, sd = 0;
        for (auto& [_, c] : adj.bar[static_cast<std::size_t>(i)]) bd += c;
        for (auto& [_, c] : adj.str[static_cast<std::size_t>(i)]) sd += c;
        color[static_cast<std::size_t>(i)] = bd * 1000 + sd;
    }
    for (int round = 0; round < 3; ++round) {
        std::vector<std::vector<long long>> sig(static_cast<std::size_t>(n_nodes));
        for (int i = 0; i < n_nodes; ++i) {
            auto& s = sig[static_cast<std::size_t>(i)];
            s.push_back(color[static_cast<std::size_t>(i)]);
            std::vector<long long> nb;
            for (auto& [j, c] : adj.bar[static_cast<std::size_t>(i)]) nb.push_back(2 * color[static_cast<std::size_t>(j)] * 8 + c);
            for (auto& [j, c] : adj.str[static_cast<std::size_t>(i)]) nb.push_back(2 * color[static_cast<std::size_t>(j)] * 8 + c + 1);
            std::sort(nb.begin(), nb.end());
            s.insert(s.end(), nb.begin(), nb.end());
        }
        std::map<std::vector<long long>, long long> relabel;
        for (auto& s : sig)
            if (!relabel.count(s)) relabel.emplace(s, static_cast<long long>(relabel.size()));
        for (int i = 0; i < n_nodes; ++i) color[static_cast<std::size_t>(i)] = relabel[sig[static_cast<std::size_t>(i)]];
    }

    std::vector<Permutation> results;
    Permutation img(static_cast<std::size_t>(n_nodes), -1);
    std::vector<bool> used(static_cast<std::size_t>(n_nodes), false);

    std::function<void(int)> dfs = [&](int v) {
        if (v == n_nodes) {
            if (results.size() >= opts.max_results)
                throw InputError("detect_permutations: automorphism count exceeds cap");
            results.push_back(img);
            return;
        }
        for (int u = 0; u < n_nodes; ++u) {
            if (used[static_cast<std::size_t>(u)]) continue;
            if (color[static_cast<std::size_t>(u)] != color[static_cast<std::size_t>(v)]) continue;
            bool ok = true;
            for (int w = 0; w < v && ok; ++w) {
                ok = detail::AdjCounts::get(adj.bar, v, w) == detail::AdjCounts::get(adj.bar, u, img[static_cast<std::size_t>(w)]) &&
                     detail::AdjCounts::get(adj.str, v, w) == detail::AdjCounts::get(adj.str, u, img[static_cast<std::size_t>(w)]);
            }
            if (!ok) continue;
            img[static_cast<std::size_t>(v)] = u;
            used[static_cast<std::size_t>(u)] = true;
            dfs(v + 1);
            used[static_cast<std::size_t>(u)] = false;
            img[static_cast<std::size_t>(v)] = -1;
        }
    };
    dfs(0);
    return results;  // lexicographic by construction
}

// ---------------------------------------------------------------------------
// Rotation fitting and verification

// Node coordinate rows, n x 3.
inline Eigen::MatrixXd node_matrix(const TensegrityStructure& s) {
    Eigen::MatrixXd N(s.n_nodes(), 3);
    for (int i = 0; i < s.n_nodes(); ++i) N.row(i) = s.nodes[static_cast<std::size_t>(i)].transpose();
    return N;
}

inline Eigen::MatrixXd coords_to_rows(const Eigen::VectorXd& n) {
    if (n.size() % 3 != 0) throw InputError("coordinate vector length is not a multiple of 3");
    Eigen::MatrixXd N(n.size() / 3, 3);
    for (Eigen::Index i = 0; i < N.rows(); ++i) N.row(i) = n.segment<3>(3 * i).transpose();
    return N;
}

inline Eigen::VectorXd rows_to_coords(const Eigen::MatrixXd& N) {
    Eigen::VectorXd n(3 * N.rows());
    for (Eigen::Index i = 0; i < N.rows(); ++i) n.segment<3>(3 * i) = N.row(i).transpose();
    return n;
}

inline Eigen::MatrixXd apply_perm_rows(const Permutation& p, const Eigen::MatrixXd& N) {
    Eigen::MatrixXd B(N.rows(), N.cols());
    for (Eigen::Index j = 0; j < N.rows(); ++j) B.row(p[static_cast<std::size_t>(j)]) = N.row(j);
    return B;
}

struct RotationFit {
    Eigen::Matrix3d R;
    double residual = 0;     // sup norm of N R - P N
    bool completed = false;  // true when rank-deficient directions were filled in
    int rank = 3;            // rank of the cross-covariance N^T P N
};

// Orthogonal Procrustes fit of R in N R ~ P N for centered N. Full-rank
// cross-covariance gives the unconstrained optimum U V^T (reflections are
// legitimate symmetries and are not projected out). With rank 2 the free
// direction is completed canonically so that det R = +1; rank below 2 leaves
// R underdetermined and raises NumericalError.
inline RotationFit fit_rotation(const Eigen::MatrixXd& N, const Permutation& p) {
    if (N.cols() != 3) throw InputError("fit_rotation: N must be n x 3");
    if (static_cast<std::size_t>(N.rows()) != p.size()) throw InputError("fit_rotation: permutation length mismatch");
    const double scale = N.cwiseAbs().maxCoeff();
    if (N.colwise().mean().norm() > 1e-6 * std::max(scale, 1.0))
        throw InputError("fit_rotation: N must be centered");

    const Eigen::MatrixXd B = apply_perm_rows(p, N);
    const Eigen::Matrix3d X = N.transpose() * B;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sig = svd.singularValues();
    const double smax = sig(0);
    int rank = 0;
    for (int i = 0; i < 3; ++i)
        if (sig(i) > std::max(1e-9 * smax, 1e-14)) ++rank;

    RotationFit fit;
    fit.rank = rank;
    if (rank <= 1) throw NumericalError("fit_rotation: node set is degenerate, rotation is not unique");
    if (rank == 3) {
        fit.R = svd.matrixU() * svd.matrixV().transpose();
    } else {
        // Unique det=+1 completion of the plane-determined part.
        const double s = svd.matrixU().determinant() * svd.matrixV().determinant();
        fit.R = svd.matrixU() * Eigen::Vector3d(1, 1, s).asDiagonal() * svd.matrixV().transpose();
        fit.completed = true;
    }
    fit.residual = (N * fit.R - B).cwiseAbs().maxCoeff();
    return fit;
}

struct VerifyResult {
    double residual = 0;
    bool pass = false;
};

// Residual of the defining relation on centered coordinates; centering (mean
// node position) is applied here, so N is the raw coordinate matrix.
inline VerifyResult verify_symmetry(const Eigen::MatrixXd& N, const Permutation& p, const Eigen::Matrix3d& R,
                                    double tol = 1e-8) {
    const Eigen::RowVector3d c = N.colwise().mean();
    const Eigen::MatrixXd Nc = N.rowwise() - c;
    VerifyResult r;
    r.residual = (Nc * R - apply_perm_rows(p, Nc)).cwiseAbs().maxCoeff();
    r.pass = r.residual <= tol;
    return r;
}

// Vector-field equivariance (forces, velocities): F R = P F, no centering.
inline VerifyResult verify_field(const Eigen::MatrixXd& F, const Permutation& p, const Eigen::Matrix3d& R,
                                 double tol = 1e-8) {
    VerifyResult r;
    r.residual = (F * R - apply_perm_rows(p, F)).cwiseAbs().maxCoeff();
    r.pass = r.residual <= tol;
    return r;
}

// Check each element of a candidate group against the same coordinates.
// An empty list passes vacuously.
inline std::vector<VerifyResult> verify_group(const Eigen::MatrixXd& N, const std::vector<SymmetryAction>& g,
                                              double tol = 1e-8) {
    std::vector<VerifyResult> out;
    out.reserve(g.size());
    for (const auto& a : g) out.push_back(verify_symmetry(N, a.perm, a.R, tol));
    return out;
}

// ---------------------------------------------------------------------------
// Symmetric subspace

// Restriction of a node permutation to the free nodes, renumbered by position
// in free_ids. Throws SymmetryError when the action mixes free and constrained
// nodes (the reduction is undefined in that case).
inline Permutation restrict_permutation(const Permutation& p, const std::vector<int>& free_ids) {
    std::map<int, int> pos;
    for (std::size_t a = 0; a < free_ids.size(); ++a) pos[free_ids[a]] = static_cast<int>(a);
    Permutation out(free_ids.size());
    for (std::size_t a = 0; a < free_ids.size(); ++a) {
        const int img = p[static_cast<std::size_t>(free_ids[a])];
        auto it = pos.find(img);
        if (it == pos.end())
            throw SymmetryError("symmetry action maps free node " + std::to_string(free_ids[a]) +
                                " to constrained node " + std::to_string(img));
        out[a] = it->second;
    }
    return out;
}

// S = I (x) R^T - P (x) I_3 over the free coordinates; symmetric
// configurations are exactly null(S).
inline Eigen::MatrixXd build_S(const Permutation& p_free, const Eigen::Matrix3d& R) {
    const int n = static_cast<int>(p_free.size());
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int i = 0; i < n; ++i) S.block<3, 3>(3 * i, 3 * i) += R.transpose();
    for (int j = 0; j < n; ++j) S.block<3, 3>(3 * p_free[static_cast<std::size_t>(j)], 3 * j) -= Eigen::Matrix3d::Identity();
    return S;
}

struct SymmetryBasis {
    Eigen::MatrixXd U;  // 3 n_a x n_r, orthonormal columns
    int n_r = 0;
    std::string method;  // "svd" or "eig"
    double tol = 1e-6;
    bool gap_warning = false;  // no clear spectral gap at the rank cut
    double gap_ratio = 0;      // sigma_last_kept / sigma_first_dropped
};

// Nullspace basis from the SVD of S: right singular vectors whose singular
// values fall at or below tol. A spectral gap below 10x at the cut sets
// gap_warning instead of failing.
inline SymmetryBasis basis_svd(const Eigen::MatrixXd& S, double tol = 1e-6) {
    if (S.rows() != S.cols()) throw InputError("basis_svd: S must be square");
    SymmetryBasis b;
    b.method = "svd";
    b.tol = tol;
    const Eigen::Index n = S.cols();
    if (S.cwiseAbs().maxCoeff() == 0.0) {  // identity action: everything is symmetric
        b.U = Eigen::MatrixXd::Identity(n, n);
        b.n_r = static_cast<int>(n);
        b.gap_ratio = std::numeric_limits<double>::infinity();
        return b;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeFullV);
    const Eigen::VectorXd sig = svd.singularValues();  // descending
    Eigen::Index r = 0;
    while (r < n && sig(r) > tol) ++r;
    b.n_r = static_cast<int>(n - r);
    if (b.n_r == 0) throw SymmetryError("basis_svd: S has no nullspace (no symmetric subspace)");
    b.U = svd.matrixV().rightCols(n - r);
    if (r > 0) {
        const double smallest_nonnull = sig(r - 1);
        const double largest_null = sig(r);  // r < n since n_r > 0
        b.gap_ratio = smallest_nonnull / std::max(largest_null, 1e-300);
        b.gap_warning = b.gap_ratio < 10.0;
    } else {
        b.gap_ratio = std::numeric_limits<double>::infinity();
    }
    return b;
}

// Eigenstructure route: permutation eigenvectors are written per cycle with
// the roots-of-unity formula (exact and orthonormal), R^T goes through a dense
// eigensolver, and candidates v (x) w are kept for matching eigenvalues.
// Conjugate pairs are realified as sqrt(2)(Re, Im); the stacked candidates are
// orthonormalized by SVD and checked against S U = 0.
inline SymmetryBasis basis_eigen(const Permutation& p_free, const Eigen::Matrix3d& R, double match_tol = 1e-8) {
    using C = std::complex<double>;
    const int n = static_cast<int>(p_free.size());

    Eigen::ComplexEigenSolver<Eigen::Matrix3d> es(R.transpose());
    if (es.info() != Eigen::Success) throw NumericalError("basis_eigen: eigensolver failed on R");
    const auto mu = es.eigenvalues();
    const auto W = es.eigenvectors();

    std::vector<Eigen::VectorXd> cols;
    for (const auto& orb : orbits(p_free)) {
        // Rebuild the cycle in traversal order starting from its smallest node.
        std::vector<int> cyc;
        int j = orb.front();
        do {
            cyc.push_back(j);
            j = p_free[static_cast<std::size_t>(j)];
        } while (j != orb.front());
        const int k = static_cast<int>(cyc.size());
        for (int m = 0; m < k; ++m) {
            const C lam = std::polar(1.0, kTwoPi * m / k);
            Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
            for (int s = 0; s < k; ++s)
                v(cyc[static_cast<std::size_t>(s)]) = std::polar(1.0 / std::sqrt(double(k)), -kTwoPi * m * s / k);
            for (int w = 0; w < 3; ++w) {
                if (std::abs(lam - mu(w)) > match_tol) continue;
                Eigen::VectorXcd u(3 * n);
                for (int i = 0; i < n; ++i) u.segment<3>(3 * i) = v(i) * W.col(w);
                if (std::abs(lam.imag()) <= match_tol) {
                    cols.emplace_back(u.real());
                    if (u.imag().cwiseAbs().maxCoeff() > 1e-12) cols.emplace_back(u.imag());
                } else if (lam.imag() > 0.0) {  // keep one of each conjugate pair
                    cols.emplace_back(std::sqrt(2.0) * u.real());
                    cols.emplace_back(std::sqrt(2.0) * u.imag());
                }
            }
        }
    }
    if (cols.empty())
        throw SymmetryError("basis_eigen: no common eigenvalues between P and R (degenerate pairing)");

    Eigen::MatrixXd Ucand(3 * n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) Ucand.col(static_cast<Eigen::Index>(c)) = cols[c];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ucand, Eigen::ComputeThinU);
    const Eigen::VectorXd sig = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sig.size() && sig(rank) > 1e-7 * sig(0)) ++rank;

    SymmetryBasis b;
    b.method = "eig";
    b.U = svd.matrixU().leftCols(rank);
    b.n_r = static_cast<int>(rank);

    const Eigen::MatrixXd S = build_S(p_free, R);
    const double resid = b.n_r ? (S * b.U).cwiseAbs().maxCoeff() : 0.0;
    if (resid > 1e-8)
        throw NumericalError("basis_eigen: candidate basis fails S U = 0 (residual " + std::to_string(resid) + ")");
    return b;
}

// ---------------------------------------------------------------------------
// Group symmetrization

// Powers g^0 .. g^(order-1) of a cyclic generator, identity first.
inline std::vector<SymmetryAction> cyclic_group(const SymmetryAction& g) {
    if (g.order <= 0) throw InputError("cyclic_group: action has no finite order");
    std::vector<SymmetryAction> out;
    SymmetryAction e = identity_action(static_cast<int>(g.perm.size()));
    e.center = g.center;
    out.push_back(e);
    for (int k = 1; k < g.order; ++k) {
        SymmetryAction a = out.back();
        a.perm = compose(g.perm, a.perm);
        a.R = g.R * a.R;
        out.push_back(a);
    }
    return out;
}

// Group-average projector for nodal force fields:
//   F = (1/|G|) sum_g P_g F0 R_g^T.
// The element list must be the complete group (use cyclic_group for a single
// generator); averaging over a partial set is not a projector. For an
// involution this is the familiar (F0 + P F0 R)/2 since R = R^T there.
inline Eigen::MatrixXd symmetrize_force(const Eigen::MatrixXd& F0, const std::vector<SymmetryAction>& group) {
    if (group.empty()) throw InputError("symmetrize_force: empty group");
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(F0.rows(), F0.cols());
    for (const auto& g : group) {
        if (static_cast<Eigen::Index>(g.perm.size()) != F0.rows())
            throw InputError("symmetrize_force: permutation length does not match force rows");
        F += apply_perm_rows(g.perm, F0) * g.R.transpose();
    }
    return F / static_cast<double>(group.size());
}

// ---------------------------------------------------------------------------
// Model assumption checks

struct AssumptionCheck {
    std::string name;
    bool pass = true;
    std::string message;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    bool all() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    std::string summary() const {
        std::string s;
        for (const auto& c : checks) {
            s += (c.pass ? "[ok]   " : "[FAIL] ") + c.name;
            if (!c.message.empty()) s += ": " + c.message;
            s += "\n";
        }
        return s;
    }
};

// Validates the model assumptions the reduction relies on:
//   (a) class-1 structure (at most one bar per node) and connected graph
//   (b) the action maps free nodes to free nodes and constrained to constrained
//   (c) gravity is either off or aligned with the action's fixed axis
//   (d) the applied load field is equivariant at sampled times
//   (e) initial coordinates and velocities are equivariant after centering
//   (f) member properties are uniform along member orbits
inline AssumptionReport validate_assumptions(const TensegrityStructure& s, const SymmetryAction& act,
                                             const std::function<Eigen::VectorXd(double)>& f_ex,
                                             const InitialConditions& ics, double tol = 1e-8,
                                             double t_end = 1.0) {
    AssumptionReport rep;
    auto add = [&](const std::string& name, bool pass, const std::string& msg) {
        rep.checks.push_back({name, pass, pass ? "" : msg});
    };

    // (a) class-1 + connectivity
    {
        std::vector<int> bar_count(static_cast<std::size_t>(s.n_nodes()), 0);
        for (auto [i, j] : s.bars) {
            bar_count[static_cast<std::size_t>(i)]++;
            bar_count[static_cast<std::size_t>(j)]++;
        }
        const bool class1 = std::all_of(bar_count.begin(), bar_count.end(), [](int c) { return c <= 1; });
        std::vector<int> comp(static_cast<std::size_t>(s.n_nodes()), -1);
        std::vector<int> stack{0};
        comp[0] = 0;
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(s.n_nodes()));
        for (int e = 0; e < s.n_members(); ++e) {
            auto [i, j] = s.member(e);
            adj[static_cast<std::size_t>(i)].push_back(j);
            adj[static_cast<std::size_t>(j)].push_back(i);
        }
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int u : adj[static_cast<std::size_t>(v)])
                if (comp[static_cast<std::size_t>(u)] < 0) {
                    comp[static_cast<std::size_t>(u)] = 0;
                    stack.push_back(u);
                }
        }
        const bool connected = std::none_of(comp.begin(), comp.end(), [](int c) { return c < 0; });
        add("class-1 connected structure", class1 && connected,
            class1 ? "member graph is disconnected" : "a node carries more than one bar");
    }

    // (b) partition invariance
    {
        bool ok = true;
        std::vector<bool> is_free(static_cast<std::size_t>(s.n_nodes()), false);
        for (int i : s.free_ids) is_free[static_cast<std::size_t>(i)] = true;
        for (int i = 0; i < s.n_nodes(); ++i)
            if (is_free[static_cast<std::size_t>(i)] != is_free[static_cast<std::size_t>(act.perm[static_cast<std::size_t>(i)])]) ok = false;
        add("free/constrained partition invariant", ok, "action mixes free and constrained nodes");
    }

    // (c) gravity compatibility
    {
        const bool ok = s.gravity == 0.0 ||
                        (act.R * Eigen::Vector3d::UnitZ() - Eigen::Vector3d::UnitZ()).cwiseAbs().maxCoeff() <= tol;
        add("gravity compatible with action", ok, "gravity is on but the action does not fix the z axis");
    }

    // (d) applied load equivariance at sampled times
    {
        bool ok = true;
        double worst = 0;
        if (f_ex) {
            for (double frac : {0.0, 0.137, 0.5, 0.733, 1.0}) {
                const Eigen::MatrixXd F = coords_to_rows(f_ex(frac * t_end));
                const double scale = std::max(1.0, F.cwiseAbs().maxCoeff());
                const auto v = verify_field(F, act.perm, act.R, tol * scale);
                worst = std::max(worst, v.residual / scale);
                ok = ok && v.pass;
            }
        }
        add("applied load equivariant", ok, "external force field breaks the symmetry (residual " + std::to_string(worst) + ")");
    }

    // (e) initial conditions equivariant (after removing the centroid)
    {
        const auto vphi = verify_symmetry(coords_to_rows(ics.phi), act.perm, act.R, tol);
        const auto vpsi = verify_symmetry(coords_to_rows(ics.psi), act.perm, act.R, tol);
        add("initial conditions equivariant", vphi.pass && vpsi.pass,
            "phi residual " + std::to_string(vphi.residual) + ", psi residual " + std::to_string(vpsi.residual));
    }

    // (f) member properties uniform along orbits
    {
        std::map<std::pair<int, int>, std::vector<int>> index;  // member endpoints -> member ids
        auto key = [](int i, int j) { return std::make_pair(std::min(i, j), std::max(i, j)); };
        for (int e = 0; e < s.n_members(); ++e) {
            auto [i, j] = s.member(e);
            index[key(i, j)].push_back(e);
        }
        bool ok = true;
        std::string msg;
        for (int e = 0; e < s.n_members() && ok; ++e) {
            auto [i, j] = s.member(e);
            const int gi = act.perm[static_cast<std::size_t>(i)], gj = act.perm[static_cast<std::size_t>(j)];
            auto it = index.find(key(gi, gj));
            int match = -1;
            if (it != index.end())
                for (int f : it->second)
                    if (s.is_bar(f) == s.is_bar(e)) match = f;
            if (match < 0) {
                ok = false;
                msg = "member " + std::to_string(e) + " has no image member";
                break;
            }
            const auto& a = s.members[static_cast<std::size_t>(e)];
            const auto& b = s.members[static_cast<std::size_t>(match)];
            auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max({std::abs(x), std::abs(y), 1.0}); };
            if (!(close(a.youngs_modulus, b.youngs_modulus) && close(a.area, b.area) &&
                  close(a.rest_length, b.rest_length) && close(a.mass, b.mass))) {
                ok = false;
                msg = "member " + std::to_string(e) + " and its image differ in properties";
            }
        }
        add("member properties orbit-uniform", ok, msg);
    }

    return rep;
}

// ---------------------------------------------------------------------------
// Subspace comparison

// Largest principal angle between the column spans of two orthonormal bases,
// computed through the sine (stable near zero angles).
inline double max_principal_angle(const Eigen::MatrixXd& U1, const Eigen::MatrixXd& U2) {
    if (U1.rows() != U2.rows()) throw InputError("max_principal_angle: row mismatch");
    if (U1.cols() == 0 || U2.cols() == 0) return U1.cols() == U2.cols() ? 0.0 : kPi / 2;
    const Eigen::MatrixXd residual = U2 - U1 * (U1.transpose() * U2);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
    const double s = std::min(1.0, svd.singularValues()(0));
    double angle = std::asin(s);
    if (U1.cols() != U2.cols()) angle = std::max(angle, kPi / 2);  // spans cannot match
    return angle;
}

// ---------------------------------------------------------------------------
// Symmetry file I/O

struct SymmetryFile {
    SymmetryAction action;
    int n_r = 0;
};

inline nlohmann::json symmetry_to_json(const SymmetryAction& a, int n_r) {
    nlohmann::json j;
    j["permutation"] = a.perm;
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(3 * i + k)] = a.R(i, k);
    j["R"] = r;
    j["center"] = {a.center.x(), a.center.y(), a.center.z()};
    j["orbits"] = orbits(a.perm);
    j["residual"] = a.residual;
    j["order"] = a.order;
    j["det"] = a.R.determinant();
    j["n_r"] = n_r;
    return j;
}

inline void save_symmetry(const std::string& path, const SymmetryAction& a, int n_r) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write symmetry file: " + path);
    out << symmetry_to_json(a, n_r).dump(2) << "\n";
}

inline SymmetryFile load_symmetry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open symmetry file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        SymmetryFile f;
        f.action.perm = j.at("permutation").get<Permutation>();
        const auto r = j.at("R").get<std::vector<double>>();
        if (r.size() != 9) throw InputError("symmetry file: R must have 9 entries (row-major)");
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) f.action.R(i, k) = r[static_cast<std::size_t>(3 * i + k)];
        const auto c = j.at("center").get<std::vector<double>>();
        if (c.size() != 3) throw InputError("symmetry file: center must have 3 entries");
        f.action.center = Eigen::Vector3d(c[0], c[1], c[2]);
        f.action.residual = j.value("residual", 0.0);
        f.action.order = j.value("order", action_order(f.action.perm, f.action.R));
        f.n_r = j.value("n_r", 0);
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed symmetry file: ") + e.what());
    }
}

}  // namespace tsg
