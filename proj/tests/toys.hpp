#pragma once

// Small closed-form problem instances shared across test binaries.

#include "safesynth/certsynth.hpp"
#include "safesynth/models.hpp"

namespace safesynth::toys {

// Scalar toy: tracker x' = drift*x + u tracked against a static planner
// through the identity embedding. The planner "moves" within |xh| <= 0.1*th.
inline ProblemDefinition makeScalarToy(double drift, double inputBound) {
    ProblemDefinition p;
    p.name = "scalar-toy";
    p.n = 1;
    p.m = 1;
    p.nhat = 1;
    p.mhat = 1;
    p.ntheta = 1;

    Universe ux = p.trackerUniverse();
    Universe uxh = p.plannerUniverse();
    Universe ue = p.errorUniverse();
    Universe uth({makeBlock("theta", 1)});
    Universe uuh({makeBlock("uhat", 1)});

    Polynomial x = Polynomial::variable(ux, "x", 0);
    Polynomial xh = Polynomial::variable(uxh, "xhat", 0);
    Polynomial e = Polynomial::variable(ue, "e", 0);
    Polynomial th = Polynomial::variable(uth, "theta", 0);
    Polynomial uh = Polynomial::variable(uuh, "uhat", 0);

    p.f.entries = {drift * x};
    p.g = {1, 1, {Polynomial::constant(ux, 1.0)}};
    p.fhat.entries = {Polynomial::zero(uxh)};
    p.ghat = {1, 1, {Polynomial::zero(uxh)}};
    p.pi.entries = {xh};

    p.stateSet.universe = ux;
    p.stateSet.inequalities = {{x, Polynomial::constant(ux, 1.0)},
                               {-x, Polynomial::constant(ux, 1.0)}};

    p.inputH.resize(2, 1);
    p.inputH << 1, -1;
    p.inputh.resize(2);
    p.inputh << inputBound, inputBound;

    p.plannerStateSet.universe = uxh;
    p.plannerStateSet.inequalities = {{xh * xh, 0.01 * (th * th)}};
    p.plannerInputSet.universe = uuh;
    p.plannerInputSet.inequalities = {{uh * uh, Polynomial::constant(uuh, 0.01)}};

    p.omega.universe = ue;
    p.omega.inequalities = {{e, Polynomial::constant(ue, 0.1)},
                            {-e, Polynomial::constant(ue, 0.1)}};

    p.thetaBox.upper = Eigen::VectorXd::Ones(1);
    p.x0 = Eigen::VectorXd::Zero(1);
    p.xhat0 = Eigen::VectorXd::Zero(1);
    p.target = Eigen::VectorXd::Zero(1);
    p.signSymmetry = {"e", "xhat", "uhat", "x"};
    return p;
}

// Disk toy with a closed-form containment budget: X is the unit disk, the
// planner roams a theta-scaled disk, and the error bound is the disk of
// radius sqrt(gamma) (V = |e|^2, identity embedding). The largest parameter
// bound with scaled-planner-disk (+) error-disk inside X is 1 - sqrt(gamma).
struct DiskToy {
    ProblemDefinition p;
    Certificate cert;
};

inline DiskToy makeDiskToy(double gamma) {
    DiskToy t;
    ProblemDefinition& p = t.p;
    p.name = "disk-toy";
    p.n = 2;
    p.m = 1;
    p.nhat = 2;
    p.mhat = 1;
    p.ntheta = 1;

    Universe ux = p.trackerUniverse();
    Universe uxh = p.plannerUniverse();
    Universe uuh({makeBlock("uhat", 1)});
    Universe uth({makeBlock("theta", 1)});

    Polynomial x1 = Polynomial::variable(ux, "x", 0);
    Polynomial x2 = Polynomial::variable(ux, "x", 1);
    Polynomial xh1 = Polynomial::variable(uxh, "xhat", 0);
    Polynomial xh2 = Polynomial::variable(uxh, "xhat", 1);
    Polynomial th = Polynomial::variable(uth, "theta", 0);

    p.f.entries = {Polynomial::zero(ux), Polynomial::zero(ux)};
    p.g = {2, 1, {Polynomial::constant(ux, 1.0), Polynomial::constant(ux, 1.0)}};
    p.fhat.entries = {Polynomial::zero(uxh), Polynomial::zero(uxh)};
    p.ghat = {2, 1, {Polynomial::zero(uxh), Polynomial::zero(uxh)}};
    p.pi.entries = {xh1, xh2};

    p.stateSet.universe = ux;
    p.stateSet.inequalities = {{x1 * x1 + x2 * x2, Polynomial::constant(ux, 1.0)}};

    p.inputH.resize(2, 1);
    p.inputH << 1, -1;
    p.inputh.resize(2);
    p.inputh << 1, 1;

    p.plannerStateSet.universe = uxh;
    p.plannerStateSet.inequalities = {{xh1 * xh1 + xh2 * xh2, th * th}};
    p.plannerInputSet.universe = uuh;
    p.plannerInputSet.inequalities = {
        {Polynomial::variable(uuh, "uhat", 0), Polynomial::constant(uuh, 1.0)},
        {-Polynomial::variable(uuh, "uhat", 0), Polynomial::constant(uuh, 1.0)}};

    Universe ue = p.errorUniverse();
    p.omega.universe = ue;
    p.omega.inequalities = {
        {Polynomial::variable(ue, "e", 0), Polynomial::constant(ue, 0.01)},
        {-Polynomial::variable(ue, "e", 0), Polynomial::constant(ue, 0.01)}};

    p.thetaBox.upper = Eigen::VectorXd::Ones(1);
    p.x0 = Eigen::VectorXd::Zero(2);
    p.xhat0 = Eigen::VectorXd::Zero(2);
    p.target = Eigen::VectorXd::Zero(2);

    Universe U = p.synthesisUniverse();
    Universe uve({U.block("e"), U.block("theta")});
    Polynomial e1 = Polynomial::variable(uve, "e", 0);
    Polynomial e2 = Polynomial::variable(uve, "e", 1);
    t.cert.V = e1 * e1 + e2 * e2;
    t.cert.gamma = gamma;
    t.cert.problemHash = problemHash(p);
    return t;
}

}  // namespace safesynth::toys
