#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "safesynth/simulator.hpp"

using namespace safesynth;

namespace {

// Tracker and planner are both double integrators with the identity
// embedding, so the tracking law u = uhat + feedback(e) gives exactly
// solvable error dynamics to test against.
ProblemDefinition makeTwinIntegrator() {
    ProblemDefinition p;
    p.name = "twin-integrator";
    p.n = 2;
    p.m = 1;
    p.nhat = 2;
    p.mhat = 1;
    p.ntheta = 1;

    Universe ux = p.trackerUniverse();
    Universe uxh = p.plannerUniverse();
    Universe uuh({makeBlock("uhat", 1)});

    Polynomial x1 = Polynomial::variable(ux, "x", 0);
    Polynomial x2 = Polynomial::variable(ux, "x", 1);
    Polynomial xh1 = Polynomial::variable(uxh, "xhat", 0);
    Polynomial xh2 = Polynomial::variable(uxh, "xhat", 1);
    Polynomial uh = Polynomial::variable(uuh, "uhat", 0);

    p.f.entries = {x2, Polynomial::zero(ux)};
    p.g = {2, 1, {Polynomial::zero(ux), Polynomial::constant(ux, 1.0)}};
    p.fhat.entries = {xh2, Polynomial::zero(uxh)};
    p.ghat = {2, 1, {Polynomial::zero(uxh), Polynomial::constant(uxh, 1.0)}};
    p.pi.entries = {xh1, xh2};

    p.stateSet.universe = ux;
    p.stateSet.inequalities = {
        {x1, Polynomial::constant(ux, 2.0)},
        {-x1, Polynomial::constant(ux, 2.0)},
        {x2, Polynomial::constant(ux, 2.0)},
        {-x2, Polynomial::constant(ux, 2.0)}};
    p.inputH.resize(2, 1);
    p.inputH << 1, -1;
    p.inputh.resize(2);
    p.inputh << 5, 5;

    p.plannerStateSet.universe = uxh;
    p.plannerStateSet.inequalities = {
        {xh1, Polynomial::constant(uxh, 1.0)},
        {-xh1, Polynomial::constant(uxh, 1.0)},
        {xh2, Polynomial::constant(uxh, 1.0)},
        {-xh2, Polynomial::constant(uxh, 1.0)}};
    p.plannerInputSet.universe = uuh;
    p.plannerInputSet.inequalities = {
        {uh, Polynomial::constant(uuh, 1.0)},
        {-uh, Polynomial::constant(uuh, 1.0)}};

    p.omega.universe = p.errorUniverse();
    p.thetaBox.upper = Eigen::VectorXd::Ones(1);
    p.x0.resize(2);
    p.x0 << 0.8, -0.5;
    p.xhat0 = p.x0;
    p.target = Eigen::VectorXd::Zero(2);
    return p;
}

// Hand-built certificate: V = |e|^2, u = uhat - k1 e1 - k2 e2.
Certificate feedthroughCertificate(const ProblemDefinition& p, double k1,
                                   double k2, double gamma) {
    Universe us = p.synthesisUniverse();
    Polynomial e1 = Polynomial::variable(us, "e", 0);
    Polynomial e2 = Polynomial::variable(us, "e", 1);
    Polynomial uh = Polynomial::variable(us, "uhat", 0);
    Certificate cert;
    Universe ue2 = Universe({makeBlock("e", 2), makeBlock("theta", 1)});
    Polynomial ee1 = Polynomial::variable(ue2, "e", 0);
    Polynomial ee2 = Polynomial::variable(ue2, "e", 1);
    cert.V = ee1 * ee1 + ee2 * ee2;
    cert.kappa.entries = {uh - k1 * e1 - k2 * e2};
    cert.gamma = gamma;
    return cert;
}

}  // namespace

TEST_CASE("zero initial error stays zero under input feedthrough") {
    auto p = makeTwinIntegrator();
    auto cert = feedthroughCertificate(p, 0.0, 0.0, 0.01);

    SimConfig cfg;
    cfg.duration = 10.0;
    auto trace = simulate(p, cert, Eigen::VectorXd::Ones(1), cfg);

    REQUIRE(trace.status == "completed");
    REQUIRE(trace.samples.size() >= 200);
    for (const auto& s : trace.samples) {
        CHECK(s.e.norm() <= 1e-9);
        CHECK(s.v <= 1e-12);
    }
    CHECK(checkContainment(trace, cert, Eigen::VectorXd::Ones(1)) ==
          doctest::Approx(-0.01).epsilon(1e-6));
    // the planner regulates both copies to the target
    CHECK(trace.samples.back().x.norm() <= 0.05);
    CHECK(trace.samples.back().t == doctest::Approx(10.0));
}

TEST_CASE("feedback keeps a perturbed run inside the certified level") {
    auto p = makeTwinIntegrator();
    p.x0[1] += 0.05;  // initial velocity error
    auto cert = feedthroughCertificate(p, 1.0, 2.0, 0.01);

    auto trace = simulate(p, cert, Eigen::VectorXd::Ones(1), {});
    REQUIRE(trace.status == "completed");
    CHECK(checkContainment(trace, cert, Eigen::VectorXd::Ones(1)) < 0.0);
    // stable error dynamics: the error has decayed by the end
    CHECK(trace.samples.back().e.norm() <= 1e-3);
    CHECK(trace.samples.back().x.norm() <= 0.05);
}

TEST_CASE("removing the feedback breaks containment") {
    auto p = makeTwinIntegrator();
    p.x0[1] += 0.05;  // error grows linearly without feedback
    auto cert = feedthroughCertificate(p, 0.0, 0.0, 0.01);

    auto trace = simulate(p, cert, Eigen::VectorXd::Ones(1), {});
    REQUIRE(trace.status == "completed");
    CHECK(checkContainment(trace, cert, Eigen::VectorXd::Ones(1)) > 0.05);
}

TEST_CASE("halving the inner step leaves the terminal state unchanged") {
    auto p = makeTwinIntegrator();
    p.x0[0] += 0.02;
    p.x0[1] += 0.05;
    auto cert = feedthroughCertificate(p, 1.0, 2.0, 0.01);

    SimConfig coarse, fine;
    coarse.duration = fine.duration = 4.0;
    coarse.innerSteps = 20;
    fine.innerSteps = 40;
    auto a = simulate(p, cert, Eigen::VectorXd::Ones(1), coarse);
    auto b = simulate(p, cert, Eigen::VectorXd::Ones(1), fine);
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK((a.samples.back().x - b.samples.back().x).norm() <= 1e-6);
    CHECK((a.samples.back().xhat - b.samples.back().xhat).norm() <= 1e-6);
}

TEST_CASE("planner infeasibility truncates the run with a status") {
    auto p = makeTwinIntegrator();
    p.xhat0 << 1.5, 0.0;  // outside the planner state set
    p.x0 = p.xhat0;
    auto cert = feedthroughCertificate(p, 1.0, 2.0, 0.01);

    auto trace = simulate(p, cert, Eigen::VectorXd::Ones(1), {});
    CHECK(trace.status == "planner-infeasible");
    CHECK(trace.plannerFailStage == 0);
    CHECK(trace.samples.empty());
    auto j = trace.summaryJson();
    CHECK(j["status"] == "planner-infeasible");
    CHECK(j["planner_fail_stage"] == 0);
}

TEST_CASE("trace export round-trips through CSV and summary JSON") {
    auto p = makeTwinIntegrator();
    p.x0[1] += 0.05;
    auto cert = feedthroughCertificate(p, 1.0, 2.0, 0.01);

    SimConfig cfg;
    cfg.duration = 1.0;
    auto trace = simulate(p, cert, Eigen::VectorXd::Ones(1), cfg);
    REQUIRE(trace.status == "completed");

    const std::string path = "sim_trace_test.csv";
    trace.writeCsv(path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "t,x1,x2,xhat1,xhat2,e1,e2,u1,uhat1,V,margin_state,margin_input,"
          "margin_planner_state,margin_planner_input");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == static_cast<int>(trace.samples.size()));
    std::remove(path.c_str());

    auto j = trace.summaryJson();
    CHECK(j["status"] == "completed");
    CHECK(j["duration"].get<double>() == doctest::Approx(1.0));
    CHECK(j["containment_excess"].get<double>() < 0.0);
    CHECK(j["worst_margins"]["state"].get<double>() > 0.0);
    CHECK(j["final_state"].size() == 2);
}
