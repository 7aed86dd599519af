#pragma once

// Structure definition, file I/O and matrix assembly for class-1 tensegrity
// dynamics in the force-density form
//
//   M n'' + D n' + K(n, t) n + g = f_ex(t),
//
// with n the stacked xyz coordinates of all nodes, K(n,t) = K_s(n,t) (x) I_3
// built from per-member force densities, M a consistent lumped mass, and g the
// gravity load. Member ordering everywhere is bars first, then strings, in
// file order.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsg/constants.hpp"
#include "tsg/errors.hpp"

namespace tsg {

struct MemberProps {
    double youngs_modulus = 0.0;  // Pa
    double area = 0.0;            // m^2
    double rest_length = 0.0;     // m
    double mass = 0.0;            // kg, lumped for the whole member
};

// Optional analytic applied load. radial_pulse applies
//   f_i(t) = amplitude * sin(2*pi*frequency*t) * exp(-t/decay) * (q_i(0) - c0)
// at every free node, with c0 the initial centroid; it is exactly equivariant
// under any symmetry of the initial configuration and has zero net force.
struct ExternalForceSpec {
    enum class Type { none, radial_pulse };
    Type type = Type::none;
    double amplitude = 0.0;  // N per metre of initial radius
    double frequency = 0.0;  // Hz
    double decay = 1.0;      // s, exponential envelope
};

struct TensegrityStructure {
    std::string name;
    std::vector<Eigen::Vector3d> nodes;
    std::vector<std::pair<int, int>> bars;
    std::vector<std::pair<int, int>> strings;
    std::vector<MemberProps> members;  // bars first, then strings
    std::vector<int> free_ids;
    std::vector<int> constrained_ids;
    double gravity = 9.81;
    ExternalForceSpec force;
    Eigen::VectorXd initial_velocity;  // 3*n_nodes, zero when absent from file

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_bars() const { return static_cast<int>(bars.size()); }
    int n_strings() const { return static_cast<int>(strings.size()); }
    int n_members() const { return n_bars() + n_strings(); }
    int n_free() const { return static_cast<int>(free_ids.size()); }

    bool is_bar(int e) const { return e < n_bars(); }

    std::pair<int, int> member(int e) const {
        return is_bar(e) ? bars[static_cast<std::size_t>(e)]
                         : strings[static_cast<std::size_t>(e - n_bars())];
    }

    Eigen::VectorXd member_masses() const {
        Eigen::VectorXd m(n_members());
        for (int e = 0; e < n_members(); ++e) m(e) = members[static_cast<std::size_t>(e)].mass;
        return m;
    }

    Eigen::VectorXd coords() const {
        Eigen::VectorXd n(3 * n_nodes());
        for (int i = 0; i < n_nodes(); ++i) n.segment<3>(3 * i) = nodes[static_cast<std::size_t>(i)];
        return n;
    }

    void validate() const {
        if (nodes.empty()) throw InputError("structure has no nodes");
        if (bars.empty() && strings.empty()) throw InputError("structure has no members");
        auto check_edge = [&](std::pair<int, int> e, const char* kind) {
            if (e.first < 0 || e.second < 0 || e.first >= n_nodes() || e.second >= n_nodes())
                throw InputError(std::string(kind) + " references a node out of range");
            if (e.first == e.second) throw InputError(std::string(kind) + " connects a node to itself");
        };
        for (auto& b : bars) check_edge(b, "bar");
        for (auto& s : strings) check_edge(s, "string");
        if (static_cast<int>(members.size()) != n_members())
            throw InputError("materials list length does not match member count");
        for (auto& p : members) {
            if (!(p.youngs_modulus > 0) || !(p.area > 0) || !(p.rest_length > 0) || !(p.mass > 0))
                throw InputError("material properties must be positive");
        }
        std::set<int> seen;
        for (int i : free_ids) {
            if (i < 0 || i >= n_nodes()) throw InputError("free node id out of range");
            if (!seen.insert(i).second) throw InputError("node listed twice in partition");
        }
        for (int i : constrained_ids) {
            if (i < 0 || i >= n_nodes()) throw InputError("constrained node id out of range");
            if (!seen.insert(i).second) throw InputError("node listed twice in partition");
        }
        if (static_cast<int>(seen.size()) != n_nodes())
            throw InputError("free/constrained partition must cover every node exactly once");
        if (free_ids.empty()) throw InputError("structure has no free nodes");
        if (gravity < 0) throw InputError("gravity constant must be non-negative");
        if (initial_velocity.size() != 0 && initial_velocity.size() != 3 * n_nodes())
            throw InputError("initial_velocity must list one xyz triple per node");
    }
};

// ---------------------------------------------------------------------------
// JSON I/O

namespace detail {

inline Eigen::Vector3d to_vec3(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw InputError(std::string(what) + " must be an [x,y,z] triple");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline std::vector<std::pair<int, int>> to_edges(const nlohmann::json& j, const char* what) {
    std::vector<std::pair<int, int>> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw InputError(std::string(what) + " must be an array of [i,j] pairs");
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2) throw InputError(std::string(what) + " entries must be [i,j] pairs");
        out.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return out;
}

}  // namespace detail

inline TensegrityStructure parse_structure(const nlohmann::json& j) {
    TensegrityStructure s;
    try {
        s.name = j.value("name", std::string{});
        if (!j.contains("nodes")) throw InputError("structure file missing \"nodes\"");
        for (const auto& q : j.at("nodes")) s.nodes.push_back(detail::to_vec3(q, "node"));
        s.bars = detail::to_edges(j.value("bars", nlohmann::json::array()), "bars");
        s.strings = detail::to_edges(j.value("strings", nlohmann::json::array()), "strings");

        if (!j.contains("materials")) throw InputError("structure file missing \"materials\"");
        for (const auto& m : j.at("materials")) {
            MemberProps p;
            p.youngs_modulus = m.at("E").get<double>();
            p.area = m.at("A").get<double>();
            p.rest_length = m.at("rest_length").get<double>();
            if (m.contains("mass"))
                p.mass = m.at("mass").get<double>();
            else if (m.contains("density"))  // mass per unit length
                p.mass = m.at("density").get<double>() * p.rest_length;
            else
                throw InputError("material entry needs \"mass\" or \"density\"");
            s.members.push_back(p);
        }

        if (j.contains("free")) s.free_ids = j.at("free").get<std::vector<int>>();
        if (j.contains("constrained")) s.constrained_ids = j.at("constrained").get<std::vector<int>>();
        if (!j.contains("free") && !j.contains("constrained")) {
            s.free_ids.resize(s.nodes.size());
            for (std::size_t i = 0; i < s.nodes.size(); ++i) s.free_ids[i] = static_cast<int>(i);
        }
        s.gravity = j.value("gravity", 9.81);

        if (j.contains("initial_velocity")) {
            const auto& v = j.at("initial_velocity");
            s.initial_velocity = Eigen::VectorXd::Zero(3 * s.n_nodes());
            if (v.is_array()) {
                if (static_cast<int>(v.size()) != s.n_nodes())
                    throw InputError("initial_velocity must list one xyz triple per node");
                for (int i = 0; i < s.n_nodes(); ++i)
                    s.initial_velocity.segment<3>(3 * i) = detail::to_vec3(v[static_cast<std::size_t>(i)], "velocity");
            } else if (v.is_object()) {
                // Symmetric velocity field: radial breathing plus rigid angular
                // rate about the centroid. Both commute with any point symmetry
                // whose axis matches "angular".
                Eigen::Vector3d c = Eigen::Vector3d::Zero();
                for (const auto& q : s.nodes) c += q;
                c /= static_cast<double>(s.nodes.size());
                const double radial = v.value("radial", 0.0);
                Eigen::Vector3d w = Eigen::Vector3d::Zero();
                if (v.contains("angular")) w = detail::to_vec3(v.at("angular"), "angular rate");
                for (int i = 0; i < s.n_nodes(); ++i) {
                    const Eigen::Vector3d r = s.nodes[static_cast<std::size_t>(i)] - c;
                    s.initial_velocity.segment<3>(3 * i) = radial * r + w.cross(r);
                }
            } else {
                throw InputError("initial_velocity must be an array or an object");
            }
        }

        if (j.contains("external_force")) {
            const auto& f = j.at("external_force");
            const std::string type = f.value("type", "none");
            if (type == "none") {
                s.force.type = ExternalForceSpec::Type::none;
            } else if (type == "radial_pulse") {
                s.force.type = ExternalForceSpec::Type::radial_pulse;
                s.force.amplitude = f.at("amplitude").get<double>();
                s.force.frequency = f.at("frequency").get<double>();
                s.force.decay = f.value("decay", 1.0);
                if (!(s.force.decay > 0)) throw InputError("external_force decay must be positive");
            } else {
                throw InputError("unknown external_force type: " + type);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed structure file: ") + e.what());
    }
    s.validate();
    return s;
}

// Guard against nlohmann's implicit string-to-json conversion: a file path
// passed here would parse as a JSON string. Use load_structure for paths.
TensegrityStructure parse_structure(const std::string&) = delete;
TensegrityStructure parse_structure(const char*) = delete;

inline TensegrityStructure load_structure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open structure file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("cannot parse ") + path + ": " + e.what());
    }
    return parse_structure(j);
}

// ---------------------------------------------------------------------------
// Assembly

// Signed incidence matrix, one row per member: +1 at the first node, -1 at the
// second, bars before strings.
inline Eigen::MatrixXd build_connectivity(const TensegrityStructure& s) {
    s.validate();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(s.n_members(), s.n_nodes());
    for (int e = 0; e < s.n_members(); ++e) {
        const auto [i, j] = s.member(e);
        C(e, i) = 1.0;
        C(e, j) = -1.0;
    }
    return C;
}

// Kronecker product with I_3: expands an n x n nodal matrix to 3n x 3n.
inline Eigen::MatrixXd expand_xyz(const Eigen::MatrixXd& A) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3 * A.rows(), 3 * A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            if (A(i, j) != 0.0) B.block<3, 3>(3 * i, 3 * j) = A(i, j) * Eigen::Matrix3d::Identity();
    return B;
}

// Consistent member mass: M_s = (1/6)(|C|^T diag(m) |C| + floor(|C|^T diag(m) |C|))
// where floor(.) keeps the diagonal only. Each member contributes
// [m/3, m/6; m/6, m/3] to its two nodes.
inline Eigen::MatrixXd assemble_mass(const Eigen::MatrixXd& C, const Eigen::VectorXd& m) {
    if (C.rows() != m.size()) throw InputError("mass vector length does not match member count");
    const Eigen::MatrixXd A = C.cwiseAbs();
    const Eigen::MatrixXd G = A.transpose() * m.asDiagonal() * A;
    Eigen::MatrixXd Ms = G;
    Ms += Eigen::MatrixXd(G.diagonal().asDiagonal());
    Ms /= 6.0;
    return Ms;
}

// Gravity load vector: g = (g0/2) (|C|^T m) (x) [0,0,1]^T, i.e. half of each
// member's weight lumped at each of its endpoints, acting along -z on the
// equation's left-hand side.
inline Eigen::VectorXd assemble_gravity(const Eigen::MatrixXd& C, const Eigen::VectorXd& m, double g0) {
    if (C.rows() != m.size()) throw InputError("mass vector length does not match member count");
    const Eigen::VectorXd w = 0.5 * g0 * (C.cwiseAbs().transpose() * m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * C.cols());
    for (Eigen::Index i = 0; i < C.cols(); ++i) g(3 * i + 2) = w(i);
    return g;
}

inline Eigen::VectorXd member_lengths(const TensegrityStructure& s, const Eigen::VectorXd& n) {
    if (n.size() != 3 * s.n_nodes()) throw InputError("coordinate vector has wrong length");
    Eigen::VectorXd len(s.n_members());
    for (int e = 0; e < s.n_members(); ++e) {
        const auto [i, j] = s.member(e);
        len(e) = (n.segment<3>(3 * i) - n.segment<3>(3 * j)).norm();
    }
    return len;
}

// Force densities x_e = E_e A_e (1/l0_e - 1/l_e); member axial force is then
// x_e * l_e, a linear spring in the length. Strings cannot push: x is clamped
// at zero from below for string members (slack string).
inline Eigen::VectorXd force_density(const TensegrityStructure& s, const Eigen::VectorXd& n, double /*t*/) {
    const Eigen::VectorXd len = member_lengths(s, n);
    Eigen::VectorXd x(s.n_members());
    for (int e = 0; e < s.n_members(); ++e) {
        if (len(e) < 1e-12) throw NumericalError("member " + std::to_string(e) + " has zero length (coincident nodes)");
        const MemberProps& p = s.members[static_cast<std::size_t>(e)];
        x(e) = p.youngs_modulus * p.area * (1.0 / p.rest_length - 1.0 / len(e));
        if (!s.is_bar(e) && x(e) < 0.0) x(e) = 0.0;
    }
    return x;
}

// Nodal stiffness in force-density form: K_s = C^T diag(x) C.
inline Eigen::MatrixXd assemble_stiffness(const Eigen::MatrixXd& C, const Eigen::VectorXd& x) {
    if (C.rows() != x.size()) throw InputError("force density vector length does not match member count");
    return C.transpose() * x.asDiagonal() * C;
}

// Boolean selectors E_a (free) and E_b (constrained): n = E_a n_a + E_b n_b.
struct Selectors {
    Eigen::MatrixXd Ea;
    Eigen::MatrixXd Eb;
};

inline Selectors partition_selectors(const TensegrityStructure& s) {
    Selectors sel;
    sel.Ea = Eigen::MatrixXd::Zero(3 * s.n_nodes(), 3 * s.n_free());
    sel.Eb = Eigen::MatrixXd::Zero(3 * s.n_nodes(), 3 * static_cast<int>(s.constrained_ids.size()));
    for (int a = 0; a < s.n_free(); ++a)
        for (int k = 0; k < 3; ++k) sel.Ea(3 * s.free_ids[static_cast<std::size_t>(a)] + k, 3 * a + k) = 1.0;
    for (std::size_t b = 0; b < s.constrained_ids.size(); ++b)
        for (int k = 0; k < 3; ++k) sel.Eb(3 * s.constrained_ids[b] + k, 3 * static_cast<int>(b) + k) = 1.0;
    return sel;
}

struct InitialConditions {
    Eigen::VectorXd phi;  // coordinates, full 3n
    Eigen::VectorXd psi;  // velocities, full 3n
};

inline InitialConditions initial_conditions(const TensegrityStructure& s) {
    InitialConditions ic;
    ic.phi = s.coords();
    ic.psi = s.initial_velocity.size() ? s.initial_velocity : Eigen::VectorXd::Zero(3 * s.n_nodes());
    return ic;
}

// Elastic strain energy; slack strings store nothing.
inline double elastic_energy(const TensegrityStructure& s, const Eigen::VectorXd& n) {
    const Eigen::VectorXd len = member_lengths(s, n);
    double U = 0.0;
    for (int e = 0; e < s.n_members(); ++e) {
        const MemberProps& p = s.members[static_cast<std::size_t>(e)];
        const double dl = len(e) - p.rest_length;
        if (!s.is_bar(e) && dl <= 0.0) continue;
        U += 0.5 * p.youngs_modulus * p.area / p.rest_length * dl * dl;
    }
    return U;
}

// Fully assembled full-coordinate system. K and f_ex are closures; damping is
// Rayleigh, D = alpha M + beta K(n(0), 0).
struct AssembledSystem {
    Eigen::MatrixXd Ms;     // nodal mass, n x n
    Eigen::MatrixXd M;      // 3n x 3n
    Eigen::MatrixXd D;      // 3n x 3n
    Eigen::VectorXd g_vec;  // 3n
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> K;  // full stiffness at (n, t)
    std::function<Eigen::VectorXd(double)> f_ex;                       // applied load at t
    Eigen::MatrixXd Ea, Eb;
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> energy;  // (n, v) -> J
};

inline AssembledSystem assemble(const TensegrityStructure& s, double alpha = 0.0, double beta = 0.0) {
    s.validate();
    AssembledSystem sys;
    const Eigen::MatrixXd C = build_connectivity(s);
    const Eigen::VectorXd m = s.member_masses();
    sys.Ms = assemble_mass(C, m);
    sys.M = expand_xyz(sys.Ms);
    sys.g_vec = assemble_gravity(C, m, s.gravity);
    sys.K = [s, C](const Eigen::VectorXd& n, double t) {
        return expand_xyz(assemble_stiffness(C, force_density(s, n, t)));
    };
    const Eigen::VectorXd n0 = s.coords();
    sys.D = alpha * sys.M + beta * sys.K(n0, 0.0);

    if (s.force.type == ExternalForceSpec::Type::radial_pulse) {
        Eigen::Vector3d c0 = Eigen::Vector3d::Zero();
        for (const auto& q : s.nodes) c0 += q;
        c0 /= static_cast<double>(s.nodes.size());
        Eigen::VectorXd dir(3 * s.n_nodes());
        for (int i = 0; i < s.n_nodes(); ++i) dir.segment<3>(3 * i) = s.nodes[static_cast<std::size_t>(i)] - c0;
        const ExternalForceSpec f = s.force;
        sys.f_ex = [f, dir](double t) {
            const double a = f.amplitude * std::sin(kTwoPi * f.frequency * t) * std::exp(-t / f.decay);
            return Eigen::VectorXd(a * dir);
        };
    } else {
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3 * s.n_nodes());
        sys.f_ex = [zero](double) { return zero; };
    }

    const Eigen::MatrixXd M = sys.M;
    const Eigen::VectorXd g = sys.g_vec;
    sys.energy = [s, M, g](const Eigen::VectorXd& n, const Eigen::VectorXd& v) {
        return 0.5 * v.dot(M * v) + elastic_energy(s, n) + g.dot(n);
    };

    const Selectors sel = partition_selectors(s);
    sys.Ea = sel.Ea;
    sys.Eb = sel.Eb;
    return sys;
}

}  // namespace tsg
