#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "safesynth/thetaselect.hpp"

#include "toys.hpp"

using namespace safesynth;

using namespace safesynth::toys;

namespace {

ThetaOptions ipmOptions() {
    ThetaOptions o;
    o.backend = "ipm";
    o.solve.eps = 1e-9;
    return o;
}

}  // namespace

TEST_CASE("containment pieces: one face per state row, composed level gap") {
    auto t = makeDiskToy(0.04);
    auto c = containmentPieces(t.p, t.cert);

    REQUIRE(c.faces.size() == 1);
    REQUIRE(c.plannerRows.size() == 1);
    CHECK(c.U.varCount() == 5);  // x in R^2, xhat in R^2, theta in R

    // identity embedding: the level gap is |x - xhat|^2 - gamma
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        Eigen::VectorXd x(2), xh(2);
        x << dist(rng), dist(rng);
        xh << dist(rng), dist(rng);
        Point pt{{"x", x}, {"xhat", xh},
                 {"theta", Eigen::VectorXd::Constant(1, 0.5 * (1 + dist(rng)))}};
        CHECK(c.levelGap.eval(pt) ==
              doctest::Approx((x - xh).squaredNorm() - 0.04).epsilon(1e-10));
        CHECK(c.faces[0].eval(pt) == doctest::Approx(1.0 - x.squaredNorm()));
        CHECK(c.plannerRows[0].eval(pt) ==
              doctest::Approx(xh.squaredNorm() -
                              pt["theta"][0] * pt["theta"][0]));
    }
}

TEST_CASE("benchmark pieces: four faces in (x, xhat, theta)") {
    auto p = loadBenchmark();
    Certificate cert;
    Universe U = p.synthesisUniverse();
    Universe uve({U.block("e"), U.block("theta")});
    cert.V = Polynomial::zero(uve);
    for (int i = 0; i < p.n; ++i) {
        Polynomial ei = Polynomial::variable(uve, "e", i);
        cert.V += ei * ei;
    }
    cert.gamma = 1.0;

    auto c = containmentPieces(p, cert);
    CHECK(c.faces.size() == 4);  // two states, two signs
    CHECK(c.U.varCount() == 8);  // x in R^4, xhat in R^2, theta in R^2

    // pi = [I2; 0]: the level gap only couples (x1 - xh1, x2 - xh2, x3, x4)
    Eigen::VectorXd x(4), xh(2);
    x << 0.1, -0.2, 0.3, 0.05;
    xh << -0.4, 0.25;
    Point pt{{"x", x}, {"xhat", xh}, {"theta", Eigen::VectorXd::Constant(2, 0.5)}};
    double expected = (x[0] - xh[0]) * (x[0] - xh[0]) +
                      (x[1] - xh[1]) * (x[1] - xh[1]) + x[2] * x[2] + x[3] * x[3] -
                      1.0;
    CHECK(c.levelGap.eval(pt) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("bound step with the closed-form multiplier reaches the budget") {
    // Lagrangian analysis of the disk toy: with level multiplier mu and
    // planner multiplier lambda = mu/(mu - 1), the box multiplier 2*lambda
    // at mu = 1/sqrt(gamma) certifies exactly bound <= 1 - sqrt(gamma).
    const double gamma = 0.04;
    auto t = makeDiskToy(gamma);
    auto c = containmentPieces(t.p, t.cert);

    const double mu = 1.0 / std::sqrt(gamma);
    const double lambda = mu / (mu - 1.0);
    SStepResult fixed;
    fixed.feasible = true;
    fixed.sf = {{Polynomial::constant(c.U, 2.0 * lambda)}};

    // the fixed constant multiplier leaves no strictly-interior Gram, which
    // the embedded barrier method rejects; the splitting solver handles it
    ThetaOptions opt;
    opt.backend = "scs";
    auto tb = thetaBarStep(t.p, t.cert, fixed, opt);
    REQUIRE(tb.feasible);
    CHECK(tb.thetaBar[0] == doctest::Approx(1.0 - std::sqrt(gamma)).epsilon(1e-3));
}

TEST_CASE("multiplier refresh is feasible at the zero bound") {
    auto t = makeDiskToy(0.04);
    auto ss = sStep(t.p, t.cert, Eigen::VectorXd::Zero(1), ipmOptions());
    REQUIRE(ss.feasible);
    CHECK(ss.margin > 1e-7);
    REQUIRE(ss.sf.size() == 1);
    REQUIRE(ss.sf[0].size() == 1);
}

TEST_CASE("alternation is monotone and approaches the analytic budget") {
    const double gamma = 0.04;
    auto t = makeDiskToy(gamma);
    auto opt = ipmOptions();

    auto sel = selectTheta(t.p, t.cert, opt);
    REQUIRE(!sel.objectiveHistory.empty());
    for (size_t i = 1; i < sel.objectiveHistory.size(); ++i)
        CHECK(sel.objectiveHistory[i] >= sel.objectiveHistory[i - 1] - 1e-12);

    const double analytic = 1.0 - std::sqrt(gamma);
    CHECK(sel.thetaBar[0] <= analytic + 1e-3);  // certified, so never beyond
    CHECK(sel.thetaBar[0] >= analytic - 1e-3);

    CHECK(sel.problemHash == problemHash(t.p));
    auto j = sel.toJson();
    auto back = ThetaSelection::fromJson(j);
    CHECK(back.toJson().dump() == j.dump());
}

TEST_CASE("zero iterations return the feasible start") {
    auto t = makeDiskToy(0.04);
    auto opt = ipmOptions();
    opt.iters = 0;
    auto sel = selectTheta(t.p, t.cert, opt);
    CHECK(sel.objectiveHistory.size() == 1);
    CHECK(sel.thetaBar[0] == doctest::Approx(0.5));
}
