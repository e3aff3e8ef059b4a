#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "safesynth/models.hpp"

using namespace safesynth;

TEST_CASE("benchmark tracker drift matches hand arithmetic") {
    auto p = loadBenchmark();
    Point pt{{"x", Eigen::Vector4d(0.1, 0.0, 0.1, 0.0)}};
    // 21.520*0.1 - 5.000*0.1 + (-3.447 + 2.350 + 1.303 + 3.939)*0.001
    CHECK(p.f[1].eval(pt) == doctest::Approx(1.656145).epsilon(1e-12));
    CHECK(p.f[0].eval(pt) == doctest::Approx(0.0));
    CHECK(p.f[2].eval(pt) == doctest::Approx(0.0));

    Eigen::MatrixXd G = p.g.eval(pt);
    CHECK(G(1, 0) == doctest::Approx(8.0));
    CHECK(G(1, 1) == doctest::Approx(-31.2));
    CHECK(G(3, 0) == doctest::Approx(-31.2));
    CHECK(G(3, 1) == doctest::Approx(391.2));
    CHECK(G(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("planner rests at the origin and embeds into tracker space") {
    auto p = loadBenchmark();
    Point origin{{"xhat", Eigen::Vector2d(0.0, 0.0)}};
    CHECK(p.fhat.eval(origin).norm() == doctest::Approx(0.0));
    CHECK(p.ghat.eval(origin)(1, 0) == doctest::Approx(9.1));

    Point pt{{"xhat", Eigen::Vector2d(0.4, -0.7)}};
    Eigen::VectorXd emb = p.pi.eval(pt);
    REQUIRE(emb.size() == 4);
    CHECK(emb[0] == doctest::Approx(0.4));
    CHECK(emb[1] == doctest::Approx(-0.7));
    CHECK(emb[2] == doctest::Approx(0.0));
    CHECK(emb[3] == doctest::Approx(0.0));
}

TEST_CASE("benchmark constraint sets") {
    auto p = loadBenchmark();

    CHECK(p.stateSet.contains({{"x", Eigen::Vector4d(0, 0, 0, 0)}}));
    CHECK(!p.stateSet.contains({{"x", Eigen::Vector4d(0.7, 0, 0, 0)}}));
    CHECK(!p.stateSet.contains({{"x", Eigen::Vector4d(0, -1.4, 0, 0)}}));
    // x3, x4 are unconstrained by X
    CHECK(p.stateSet.contains({{"x", Eigen::Vector4d(0, 0, 9.0, -9.0)}}));

    CHECK(p.omega.contains({{"e", Eigen::Vector4d(0, 0, 0, 0.02)}}));
    CHECK(!p.omega.contains({{"e", Eigen::Vector4d(0, 0, 0, 0.04)}}));
    CHECK(!p.omega.contains({{"e", Eigen::Vector4d(0.01, 0, 0, 0.0)}}));

    // planner set at theta = (1,1) is {|xh1| <= 0.6, |xh2| <= 1.3}
    auto full = p.plannerStateSet.instantiate(Eigen::Vector2d(1, 1), p.thetaBox);
    CHECK(full.contains({{"xhat", Eigen::Vector2d(0.59, -1.29)}}));
    CHECK(!full.contains({{"xhat", Eigen::Vector2d(0.61, 0.0)}}));

    // at the published optimum the box shrinks to (0.5724, 1.2220)
    auto opt =
        p.plannerStateSet.instantiate(Eigen::Vector2d(0.954, 0.940), p.thetaBox);
    CHECK(opt.contains({{"xhat", Eigen::Vector2d(0.572, 0.0)}}));
    CHECK(!opt.contains({{"xhat", Eigen::Vector2d(0.573, 0.0)}}));
    CHECK(opt.contains({{"xhat", Eigen::Vector2d(0.0, 1.221)}}));
    CHECK(!opt.contains({{"xhat", Eigen::Vector2d(0.0, 1.223)}}));

    // planner input set is theta-independent: |uhat| <= 5
    auto uh = p.plannerInputSet.instantiate(Eigen::Vector2d(0.1, 0.1), p.thetaBox);
    CHECK(uh.contains({{"uhat", Eigen::VectorXd::Constant(1, 4.99)}}));
    CHECK(!uh.contains({{"uhat", Eigen::VectorXd::Constant(1, -5.01)}}));

    CHECK(p.plannerStateSet.rhsMonotoneOnBox(p.thetaBox));
    CHECK(p.plannerInputSet.rhsMonotoneOnBox(p.thetaBox));
}

TEST_CASE("initial conditions are mutually consistent") {
    auto p = loadBenchmark();
    // e(0) = x(0) - pi(xhat(0)) = (0, 0, 0, 0.02), inside Omega
    Point pt{{"xhat", p.xhat0}};
    Eigen::VectorXd e0 = p.x0 - p.pi.eval(pt);
    CHECK(p.omega.contains({{"e", e0}}));
    CHECK(e0[3] == doctest::Approx(0.02));
}

TEST_CASE("bundled problem file matches the built-in benchmark") {
    std::ifstream f(SAFESYNTH_SOURCE_DIR "/data/benchmark.json");
    REQUIRE(f.good());
    nlohmann::json j;
    f >> j;
    CHECK(j.dump() == loadBenchmark().toJson().dump());
}

TEST_CASE("problem definition round-trips through JSON") {
    auto p = loadBenchmark();
    nlohmann::json j1 = p.toJson();
    auto q = ProblemDefinition::fromJson(j1);
    nlohmann::json j2 = q.toJson();
    CHECK(j1.dump() == j2.dump());

    // spot-check a reparsed polynomial
    Point pt{{"x", Eigen::Vector4d(0.1, 0.0, 0.1, 0.0)}};
    CHECK(q.f[1].eval(pt) == doctest::Approx(1.656145).epsilon(1e-12));
    CHECK(q.signSymmetry == p.signSymmetry);
}
