#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "safesynth/semialg.hpp"

namespace safesynth {

/// Full problem definition for the planner-tracker synthesis pipeline:
/// tracker and planner dynamics, the state-space embedding of planner
/// states, every constraint set, and the synthesis hyperparameters.
struct ProblemDefinition {
    std::string name = "problem";
    int version = 1;

    // dimensions: tracker state/input, planner state/input, parameters
    int n = 0, m = 0, nhat = 0, mhat = 0, ntheta = 0, ndelta = 0;

    // tracker dx = f(x, delta) + g(x, delta) u, over block "x" (+ "delta")
    PolynomialVector f;
    PolynomialMatrix g;

    // planner dxhat = fhat(xhat) + ghat(xhat) uhat, over block "xhat"
    PolynomialVector fhat;
    PolynomialMatrix ghat;

    // embedding of planner states into the tracker state space (length n,
    // polynomials in "xhat")
    PolynomialVector pi;

    // tracker state constraints X (rows lhs(x) <= rhs)
    SemialgebraicSet stateSet;
    // tracker input polytope H u <= h
    Eigen::MatrixXd inputH;
    Eigen::VectorXd inputh;

    // parametric planner sets (rows may reference "theta" in the rhs)
    SemialgebraicSet plannerStateSet;
    SemialgebraicSet plannerInputSet;

    // initial-error set over block "e"
    SemialgebraicSet omega;

    ThetaBox thetaBox;

    Eigen::VectorXd x0;      // tracker initial state
    Eigen::VectorXd xhat0;   // planner initial state
    Eigen::VectorXd target;  // planner regulation target (dim nhat)

    // polynomial degrees
    int degV = 2;
    int degKappa = 4;
    int degMultiplier = 2;

    // blocks whose simultaneous sign flip leaves the dynamics and sets
    // invariant (enables Gram-basis parity reduction); empty disables
    std::vector<std::string> signSymmetry;

    // alternation hyperparameters
    int synthesisIters = 10;
    int thetaIters = 15;
    double relStopTol = 1e-4;

    /// Universe of the certificate synthesis program: (e, xhat, uhat,
    /// theta) plus "delta" when ndelta > 0.
    Universe synthesisUniverse() const;
    Universe errorUniverse() const;    // e (+ delta)
    Universe trackerUniverse() const;  // x (+ delta)
    Universe plannerUniverse() const;  // xhat

    nlohmann::json toJson() const;
    static ProblemDefinition fromJson(const nlohmann::json& j);
};

/// The bundled benchmark: a fully-actuated double-pendulum tracker paired
/// with a single-pendulum planner, projection onto the first two tracker
/// states, and box constraint sets sized by the parameter vector theta.
ProblemDefinition loadBenchmark();

}  // namespace safesynth
