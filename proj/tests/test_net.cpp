#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "tsg/net.hpp"
#include "tsg/rng.hpp"

namespace {

// Central finite difference of a vector-valued function of scalar t.
template <typename F>
Eigen::VectorXd fd_t(F f, double t, double h = 1e-6) {
    return ((f(t + h) - f(t - h)) / (2.0 * h)).eval();
}

bool vectors_close(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rtol) {
    return (a - b).cwiseAbs().maxCoeff() <= rtol * std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("fourier features interleave sin and cos") {
    tsg::FourierFeatureMap m;
    m.freqs.resize(2);
    m.freqs << 1.0, 3.0;
    REQUIRE(m.dim() == 4);

    const Eigen::VectorXd g0 = tsg::fourier_features(m, 0.0);
    CHECK(g0(0) == 0.0);
    CHECK(g0(1) == 1.0);
    CHECK(g0(2) == 0.0);
    CHECK(g0(3) == 1.0);

    const double t = 0.31;
    const Eigen::VectorXd g = tsg::fourier_features(m, t);
    CHECK(g(0) == std::sin(tsg::kTwoPi * 1.0 * t));
    CHECK(g(1) == std::cos(tsg::kTwoPi * 1.0 * t));
    CHECK(g(2) == std::sin(tsg::kTwoPi * 3.0 * t));
    CHECK(g(3) == std::cos(tsg::kTwoPi * 3.0 * t));
    CHECK(g.cwiseAbs().maxCoeff() <= 1.0);

    // integer frequencies are 1-periodic
    CHECK((tsg::fourier_features(m, 1.0) - g0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("fourier jet carries exact derivatives") {
    tsg::FourierFeatureMap m;
    m.freqs.resize(2);
    m.freqs << 0.7, 2.3;
    const double t = 0.42;
    const auto j = tsg::fourier_jet(m, t);
    CHECK((j.g - tsg::fourier_features(m, t)).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k < 2; ++k) {
        const double w = tsg::kTwoPi * m.freqs(k);
        CHECK(j.g1(2 * k) == Catch::Approx(w * std::cos(w * t)).epsilon(1e-14));
        CHECK(j.g1(2 * k + 1) == Catch::Approx(-w * std::sin(w * t)).epsilon(1e-14));
        CHECK(j.g2(2 * k) == Catch::Approx(-w * w * std::sin(w * t)).epsilon(1e-14));
        CHECK(j.g2(2 * k + 1) == Catch::Approx(-w * w * std::cos(w * t)).epsilon(1e-14));
    }
}

TEST_CASE("gaussian frequency draws are seeded and folded positive") {
    const auto a = tsg::FourierFeatureMap::gaussian(8, 5.0, 42);
    const auto b = tsg::FourierFeatureMap::gaussian(8, 5.0, 42);
    const auto c = tsg::FourierFeatureMap::gaussian(8, 5.0, 43);
    REQUIRE(a.k() == 8);
    CHECK((a.freqs.array() == b.freqs.array()).all());
    CHECK_FALSE((a.freqs.array() == c.freqs.array()).all());
    CHECK(a.freqs.minCoeff() >= 0.0);
    CHECK_THROWS_AS(tsg::FourierFeatureMap::gaussian(0, 5.0, 1), tsg::InputError);
}

TEST_CASE("mlp construction, parameter round-trip, forward") {
    const auto m = tsg::Mlp::create({4, 8, 3}, 7);
    CHECK(m.n_layers() == 2);
    CHECK(m.n_params() == (8 * 4 + 8) + (3 * 8 + 3));
    CHECK(m.W[0].rows() == 8);
    CHECK(m.W[0].cols() == 4);
    CHECK(m.b[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.W[0].cwiseAbs().maxCoeff() <= 1.0 / 2.0);  // fan-in 4

    SECTION("params round-trip bitwise") {
        auto m2 = tsg::Mlp::create({4, 8, 3}, 99);
        m2.set_params(m.get_params());
        const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
        CHECK((m2.forward(x).array() == m.forward(x).array()).all());
        CHECK_THROWS_AS(m2.set_params(Eigen::VectorXd::Zero(3)), tsg::InputError);
    }
    SECTION("same seed, same network") {
        const auto m2 = tsg::Mlp::create({4, 8, 3}, 7);
        CHECK((m2.get_params().array() == m.get_params().array()).all());
    }
    SECTION("zero parameters produce zero output") {
        auto m2 = m;
        m2.set_params(Eigen::VectorXd::Zero(m.n_params()));
        CHECK(m2.forward(Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("single linear layer is the affine map") {
        auto lin = tsg::Mlp::create({2, 3}, 5);
        const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(2, 0.5, -0.25);
        CHECK(((lin.W[0] * x + lin.b[0]) - lin.forward(x)).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("bad widths") {
        CHECK_THROWS_AS(tsg::Mlp::create({4}, 0), tsg::InputError);
        CHECK_THROWS_AS(tsg::Mlp::create({4, 0, 3}, 0), tsg::InputError);
    }
}

TEST_CASE("jet forward matches finite differences through the network") {
    const auto net = tsg::Mlp::create({4, 8, 8, 3}, 11);
    tsg::FourierFeatureMap map;
    map.freqs.resize(2);
    map.freqs << 1.3, 4.1;

    auto value = [&](double t) { return net.forward(tsg::fourier_features(map, t)); };
    auto jet1 = [&](double t) {
        tsg::JetCache c;
        const auto f = tsg::fourier_jet(map, t);
        tsg::forward_jet(net, f.g, f.g1, nullptr, c);
        return std::pair{c.h.back(), c.d1.back()};
    };
    auto jet2 = [&](double t) {
        tsg::JetCache c;
        const auto f = tsg::fourier_jet(map, t);
        tsg::forward_jet(net, f.g, f.g1, &f.g2, c);
        return std::tuple{c.h.back(), c.d1.back(), c.d2.back()};
    };

    for (double t : {0.07, 0.5, 0.93}) {
        const auto [h1, d1] = jet1(t);
        CHECK((h1 - value(t)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(vectors_close(d1, fd_t(value, t), 1e-6));

        const auto [h2, d1b, d2] = jet2(t);
        CHECK((h2 - value(t)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((d1b - d1).cwiseAbs().maxCoeff() == 0.0);
        auto d1_of = [&](double tt) { return jet1(tt).second; };
        CHECK(vectors_close(d2, fd_t(d1_of, t), 1e-5));
    }
}

TEST_CASE("reverse pass reproduces finite-difference parameter gradients") {
    tsg::FourierFeatureMap map;
    map.freqs.resize(3);
    map.freqs << 0.9, 2.2, 3.7;
    const double t = 0.61;
    const auto f = tsg::fourier_jet(map, t);

    tsg::Rng rng(123);
    auto rand_vec = [&](int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = rng.normal();
        return v;
    };

    SECTION("first-order cache") {
        auto net = tsg::Mlp::create({6, 8, 5}, 3);
        const Eigen::VectorXd gh = rand_vec(5), gd1 = rand_vec(5);
        auto phi = [&](const Eigen::VectorXd& theta) {
            net.set_params(theta);
            tsg::JetCache c;
            tsg::forward_jet(net, f.g, f.g1, nullptr, c);
            return gh.dot(c.h.back()) + gd1.dot(c.d1.back());
        };
        const Eigen::VectorXd theta = net.get_params();
        tsg::JetCache c;
        tsg::forward_jet(net, f.g, f.g1, nullptr, c);
        tsg::Grad g = tsg::Grad::zeros_like(net);
        tsg::backward_jet(net, c, gh, gd1, nullptr, g);
        const Eigen::VectorXd grad = g.flatten();

        Eigen::VectorXd fd(theta.size());
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp(i) += h;
            tm(i) -= h;
            fd(i) = (phi(tp) - phi(tm)) / (2.0 * h);
        }
        CHECK((grad - fd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));

        // a second-order adjoint against this cache is a contract violation
        const Eigen::VectorXd gd2 = rand_vec(5);
        tsg::forward_jet(net, f.g, f.g1, nullptr, c);
        CHECK_THROWS_AS(tsg::backward_jet(net, c, gh, gd1, &gd2, g), tsg::InputError);
    }
    SECTION("second-order cache") {
        auto net = tsg::Mlp::create({6, 8, 8, 4}, 17);
        const Eigen::VectorXd gh = rand_vec(4), gd1 = rand_vec(4), gd2 = rand_vec(4);
        auto phi = [&](const Eigen::VectorXd& theta) {
            net.set_params(theta);
            tsg::JetCache c;
            tsg::forward_jet(net, f.g, f.g1, &f.g2, c);
            return gh.dot(c.h.back()) + gd1.dot(c.d1.back()) + gd2.dot(c.d2.back());
        };
        const Eigen::VectorXd theta = net.get_params();
        tsg::JetCache c;
        tsg::forward_jet(net, f.g, f.g1, &f.g2, c);
        tsg::Grad g = tsg::Grad::zeros_like(net);
        tsg::backward_jet(net, c, gh, gd1, &gd2, g);
        const Eigen::VectorXd grad = g.flatten();

        Eigen::VectorXd fd(theta.size());
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp(i) += h;
            tm(i) -= h;
            fd(i) = (phi(tp) - phi(tm)) / (2.0 * h);
        }
        CHECK((grad - fd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("hard-constraint ansatz") {
    const int n_r = 6;
    tsg::SymPinnModel m;
    m.map = tsg::FourierFeatureMap::gaussian(8, 5.0, 2);
    m.net = tsg::Mlp::create({m.map.dim(), 8, n_r}, 21);
    tsg::Rng rng(5);
    m.hc.z0.resize(n_r);
    m.hc.zdot0.resize(n_r);
    for (int i = 0; i < n_r; ++i) {
        m.hc.z0(i) = rng.normal();
        m.hc.zdot0(i) = rng.normal();
    }
    m.hc.rho = 20.0;

    SECTION("initial conditions hold exactly for any parameters") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto mm = m;
            mm.net = tsg::Mlp::create({m.map.dim(), 8, n_r}, seed);
            const auto s = tsg::eval_sympinn(mm, 0.0);
            CHECK((s.z.array() == mm.hc.z0.array()).all());
            CHECK((s.zdot.array() == mm.hc.zdot0.array()).all());
        }
    }
    SECTION("evaluation matches the displayed formulas") {
        const double t = 0.37;
        const Eigen::VectorXd y = m.net.forward(tsg::fourier_features(m.map, t));
        const auto s = tsg::eval_sympinn(m, t);
        const double rho = m.hc.rho;
        CHECK((s.z - (m.hc.z0 + t * m.hc.zdot0 + rho * t * t * y)).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((s.zdot - (m.hc.zdot0 + 2.0 * rho * t * y)).cwiseAbs().maxCoeff() <= 1e-15);
        // zddot is the exact derivative of the approximated zdot
        auto zdot_of = [&](double tt) { return tsg::eval_sympinn(m, tt).zdot; };
        CHECK(vectors_close(s.zddot, fd_t(zdot_of, t), 1e-6));
        // constant head: zddot = 2 rho c
        auto flat = m;
        Eigen::VectorXd p = Eigen::VectorXd::Zero(flat.net.n_params());
        // bias of the output layer = c, all weights zero
        p.tail(n_r).setConstant(0.25);
        flat.net.set_params(p);
        const auto sc = tsg::eval_sympinn(flat, 0.8);
        CHECK((sc.zddot - Eigen::VectorXd::Constant(n_r, 2.0 * rho * 0.25)).cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("pinn head carries exact jets") {
    tsg::PinnModel m;
    m.map = tsg::FourierFeatureMap::gaussian(4, 5.0, 9);
    m.net = tsg::Mlp::create({m.map.dim(), 8, 3}, 31);
    m.phi = Eigen::VectorXd::Zero(3);
    m.psi = Eigen::VectorXd::Zero(3);

    const double t = 0.29;
    const auto s = tsg::eval_pinn(m, t);
    auto z_of = [&](double tt) { return tsg::eval_pinn(m, tt).z; };
    auto zd_of = [&](double tt) { return tsg::eval_pinn(m, tt).zdot; };
    CHECK(vectors_close(s.zdot, fd_t(z_of, t), 1e-6));
    CHECK(vectors_close(s.zddot, fd_t(zd_of, t), 1e-5));
    CHECK((s.z - m.net.forward(tsg::fourier_features(m.map, t))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("losses: values, positivity, invariances") {
    const int n_r = 2;
    tsg::SymPinnModel m;
    m.map = tsg::FourierFeatureMap::gaussian(2, 5.0, 3);
    m.net = tsg::Mlp::create({m.map.dim(), 4, n_r}, 8);
    m.hc.z0 = Eigen::VectorXd::Zero(n_r);
    m.hc.zdot0 = Eigen::VectorXd::Zero(n_r);

    SECTION("data loss of a perfect prediction is zero") {
        Eigen::VectorXd times(3);
        times << 0.1, 0.5, 0.9;
        Eigen::MatrixXd targets(3, n_r);
        for (int i = 0; i < 3; ++i) targets.row(i) = tsg::eval_sympinn(m, times(i)).z.transpose();
        CHECK(tsg::data_loss(m, times, targets) <= 1e-30);
        // single sample with unit error in one coordinate
        targets.row(1) = tsg::eval_sympinn(m, times(1)).z.transpose() + Eigen::RowVector2d(1.0, 0.0);
        CHECK(tsg::data_loss(m, times, targets) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SECTION("physics loss normalization and scaling") {
        tsg::ResidualOperator op;
        op.M = Eigen::MatrixXd::Identity(n_r, n_r);
        op.D = Eigen::MatrixXd::Zero(n_r, n_r);
        op.K = Eigen::MatrixXd::Zero(n_r, n_r);
        op.normalizer = 1.0;
        Eigen::VectorXd times(2);
        times << 0.2, 0.7;
        std::vector<Eigen::VectorXd> w(2, Eigen::VectorXd::Zero(n_r));

        const double lg = tsg::physics_loss(m, op, times, w);
        CHECK(lg >= 0.0);
        // zero network: residual M zddot = 0, loss 0
        auto zero = m;
        zero.net.set_params(Eigen::VectorXd::Zero(m.net.n_params()));
        CHECK(tsg::physics_loss(zero, op, times, w) == 0.0);
        // doubling every residual quadruples the unnormalized loss: use w = -r
        std::vector<Eigen::VectorXd> w2;
        for (Eigen::Index i = 0; i < times.size(); ++i) {
            const auto s = tsg::eval_sympinn(m, times(i));
            w2.push_back(-(op.M * s.zddot));  // residual becomes 2 M zddot
        }
        CHECK(tsg::physics_loss(m, op, times, w2) == Catch::Approx(4.0 * lg).epsilon(1e-12));
        // normalizer divides through
        op.normalizer = 8.0;
        CHECK(tsg::physics_loss(m, op, times, w) == Catch::Approx(lg / 8.0).epsilon(1e-12));
        CHECK(tsg::guarded_normalizer(0.0) == 1.0);
        CHECK(tsg::guarded_normalizer(3.5) == 3.5);
    }
    SECTION("total loss weights") {
        CHECK(tsg::total_loss({1.0, 0.0}, 3.0, 5.0) == 3.0);
        CHECK(tsg::total_loss({0.0, 1.0}, 3.0, 5.0) == 5.0);
        CHECK(tsg::total_loss({1.0, 10.0}, 3.0, 5.0) == 53.0);
    }
}

TEST_CASE("checkpoint round-trip reproduces the model bitwise") {
    tsg::Checkpoint c;
    c.mode = "sympinn";
    c.widths = {16, 32, 32, 6};
    auto net = tsg::Mlp::create(c.widths, 77);
    c.params = net.get_params();
    const auto map = tsg::FourierFeatureMap::gaussian(8, 5.0, 1000003);
    c.freqs = map.freqs;
    c.fourier_k = 8;
    c.fourier_sigma = 5.0;
    c.fourier_seed = 1000003;
    c.rho = 20.0;
    c.z0 = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
    c.zdot0 = Eigen::VectorXd::LinSpaced(6, 0.5, -0.5);
    c.U = Eigen::MatrixXd::Random(12, 6);
    c.lambda_g = 1.0;
    c.lambda_d = 10.0;
    c.normalizer = 123.456;
    c.rate = 0.3;
    c.seed = 4;
    c.t_end = 1.0;
    c.free_ids = {0, 1, 2, 3};
    c.centered = true;

    const std::string path = "ckpt_roundtrip.json";
    tsg::save_checkpoint(path, c);
    const auto back = tsg::load_checkpoint(path);

    CHECK(back.mode == c.mode);
    CHECK(back.widths == c.widths);
    CHECK((back.params.array() == c.params.array()).all());
    CHECK((back.freqs.array() == c.freqs.array()).all());
    CHECK((back.U.array() == c.U.array()).all());
    CHECK(back.fourier_seed == c.fourier_seed);
    CHECK(back.rho == c.rho);
    CHECK(back.normalizer == c.normalizer);
    CHECK(back.rate == c.rate);
    CHECK(back.free_ids == c.free_ids);
    CHECK(back.centered == c.centered);

    const auto m1 = tsg::sympinn_from_checkpoint(c);
    const auto m2 = tsg::sympinn_from_checkpoint(back);
    for (double t : {0.0, 0.33, 0.91}) {
        const auto a = tsg::eval_sympinn(m1, t);
        const auto b = tsg::eval_sympinn(m2, t);
        CHECK((a.z.array() == b.z.array()).all());
        CHECK((a.zddot.array() == b.zddot.array()).all());
    }

    SECTION("mode is validated") {
        tsg::Checkpoint bad = c;
        bad.mode = "mystery";
        tsg::save_checkpoint(path, bad);
        CHECK_THROWS_AS(tsg::load_checkpoint(path), tsg::InputError);
    }
    SECTION("non-checkpoint files are rejected") {
        std::ofstream out(path);
        out << "{\"format\": \"something-else\"}\n";
        out.close();
        CHECK_THROWS_AS(tsg::load_checkpoint(path), tsg::InputError);
    }
}
