#include <doctest.h>

#include "safesynth/semialg.hpp"

using namespace safesynth;

namespace {

// Parametric box {|x1| <= 0.6 th1, |x2| <= 1.3 th2} in squared form:
// x_i^2 <= c_i^2 th_i^2, keeping both sides polynomial in theta.
SemialgebraicSet parametricBox() {
    Universe ux({makeBlock("xhat", 2)});
    Universe uth({makeBlock("theta", 2)});
    Polynomial x1 = Polynomial::variable(ux, "xhat", 0);
    Polynomial x2 = Polynomial::variable(ux, "xhat", 1);
    Polynomial t1 = Polynomial::variable(uth, "theta", 0);
    Polynomial t2 = Polynomial::variable(uth, "theta", 1);

    SemialgebraicSet s;
    s.universe = ux;
    s.inequalities.push_back({x1 * x1, 0.36 * (t1 * t1)});
    s.inequalities.push_back({x2 * x2, 1.69 * (t2 * t2)});
    return s;
}

}  // namespace

TEST_CASE("constraint margins and membership") {
    auto s = parametricBox();
    ThetaBox box{Eigen::Vector2d(1.0, 1.0)};
    auto inst = s.instantiate(Eigen::Vector2d(0.5, 1.0), box);

    Point inside{{"xhat", Eigen::Vector2d(0.25, 1.0)}};
    Point outside{{"xhat", Eigen::Vector2d(0.35, 0.0)}};
    CHECK(inst.contains(inside));
    CHECK(!inst.contains(outside));

    // margin of row 0 at x1 = 0.25, theta1 = 0.5: 0.36*0.25 - 0.0625
    CHECK(inst.inequalities[0].margin(inside) ==
          doctest::Approx(0.36 * 0.25 - 0.0625).epsilon(1e-12));
    CHECK(inst.worstMargin(outside) < 0.0);
}

TEST_CASE("boundary membership honors the tolerance") {
    auto s = parametricBox();
    ThetaBox box{Eigen::Vector2d(1.0, 1.0)};
    auto inst = s.instantiate(Eigen::Vector2d(1.0, 1.0), box);

    Point boundary{{"xhat", Eigen::Vector2d(0.6, 1.3)}};
    CHECK(inst.contains(boundary));
    Point justOut{{"xhat", Eigen::Vector2d(0.6 + 1e-3, 1.3)}};
    CHECK(!inst.contains(justOut));
}

TEST_CASE("instantiate rejects theta outside the box") {
    auto s = parametricBox();
    ThetaBox box{Eigen::Vector2d(1.0, 1.0)};
    CHECK_THROWS(s.instantiate(Eigen::Vector2d(1.2, 0.5), box));
    CHECK_THROWS(s.instantiate(Eigen::Vector2d(-0.1, 0.5), box));
    CHECK_NOTHROW(s.instantiate(Eigen::Vector2d(0.0, 1.0), box));
}

TEST_CASE("theta box membership and boundary polynomial") {
    ThetaBox box{Eigen::Vector2d(1.0, 2.0)};
    CHECK(box.contains(Eigen::Vector2d(0.5, 1.5)));
    CHECK(!box.contains(Eigen::Vector2d(0.5, 2.1)));

    Universe u({makeBlock("theta", 2)});
    Polynomial p0 = box.boxPolynomial(u, 1);  // th2 (th2 - 2)
    Point mid{{"theta", Eigen::Vector2d(0.0, 1.0)}};
    CHECK(p0.eval(mid) == doctest::Approx(-1.0));  // 1*(1-2)
    Point corner{{"theta", Eigen::Vector2d(0.0, 2.0)}};
    CHECK(p0.eval(corner) == doctest::Approx(0.0));
}

TEST_CASE("rhs growth in theta is detected") {
    auto good = parametricBox();
    ThetaBox box{Eigen::Vector2d(1.0, 1.0)};
    CHECK(good.rhsMonotoneOnBox(box));

    // a shrinking rhs (0.36 (th1 - 1)^2) violates monotone growth
    Universe ux({makeBlock("xhat", 1)});
    Universe uth({makeBlock("theta", 1)});
    Polynomial x1 = Polynomial::variable(ux, "xhat", 0);
    Polynomial t1 = Polynomial::variable(uth, "theta", 0);
    SemialgebraicSet bad;
    bad.universe = ux;
    bad.inequalities.push_back({x1 * x1, (t1 - 1.0) * (t1 - 1.0) * 0.36});
    CHECK(!bad.rhsMonotoneOnBox(ThetaBox{Eigen::VectorXd::Ones(1)}));
}
