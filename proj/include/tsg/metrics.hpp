#pragma once

// Trajectory error metrics and run manifests.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsg/constants.hpp"
#include "tsg/errors.hpp"

namespace tsg {

struct Metrics {
    double mse = 0;  // mean over samples of the l2 NORM of the error (not squared; kept as displayed)
    double re = 0;   // |Y_hat - Y|_F / |Y|_F
    bool re_defined = true;     // false when |Y|_F is below the guard
    Eigen::VectorXd per_node;   // time-mean l2 error per node (rows assumed xyz-packed)
};

// Rows are time samples, columns coordinates. The reference matrix Y carries
// the denominator of re; a Frobenius norm under 1e-12 leaves re undefined.
inline Metrics compute_metrics(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Yhat) {
    if (Y.rows() != Yhat.rows() || Y.cols() != Yhat.cols()) throw InputError("metrics: shape mismatch");
    if (Y.rows() == 0) throw InputError("metrics: empty sample set");
    Metrics m;
    const Eigen::MatrixXd E = Yhat - Y;
    double acc = 0;
    for (Eigen::Index r = 0; r < E.rows(); ++r) acc += E.row(r).norm();
    m.mse = acc / static_cast<double>(E.rows());
    const double denom = Y.norm();
    if (denom < 1e-12) {
        m.re_defined = false;
        m.re = std::numeric_limits<double>::quiet_NaN();
    } else {
        m.re = E.norm() / denom;
    }
    if (Y.cols() % 3 == 0) {
        const Eigen::Index nn = Y.cols() / 3;
        m.per_node.resize(nn);
        for (Eigen::Index i = 0; i < nn; ++i) {
            double a = 0;
            for (Eigen::Index r = 0; r < E.rows(); ++r) a += E.row(r).segment<3>(3 * i).norm();
            m.per_node(i) = a / static_cast<double>(E.rows());
        }
    }
    return m;
}

inline void save_metrics(const std::string& path, const Metrics& m, double train_seconds, int n_params,
                         const std::string& mode, double rate, std::uint64_t seed) {
    nlohmann::json j;
    j["re"] = m.re_defined ? nlohmann::json(m.re) : nlohmann::json();
    j["re_defined"] = m.re_defined;
    j["mse"] = m.mse;
    j["train_seconds"] = train_seconds;
    j["n_params"] = n_params;
    j["mode"] = mode;
    j["rate"] = rate;
    j["seed"] = seed;
    if (m.per_node.size()) {
        std::vector<double> pn(m.per_node.data(), m.per_node.data() + m.per_node.size());
        j["per_node_error"] = pn;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write metrics file: " + path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Run manifest: enough to reproduce a command invocation bit for bit.

struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    nlohmann::json config;  // resolved option values
    std::uint64_t seed = 0;
};

// FNV-1a over the canonical (sorted-key) dump of the config object.
inline std::string config_hash(const nlohmann::json& config) {
    const std::string s = config.dump();  // nlohmann::json objects iterate in sorted key order
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline void save_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["config"] = m.config;
    j["config_hash"] = config_hash(m.config);
    j["seed"] = m.seed;
    j["version"] = kVersion;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace tsg
