#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "safesynth/certsynth.hpp"

namespace safesynth {

/// Fixed material of the planner-set containment program, over the
/// indeterminates (x, xhat, theta). One constraint instance exists per face
/// of the tracker state set; the planner set enters through its rows and the
/// error bound through V(x - pi(xhat), theta) - gamma.
struct ContainmentPieces {
    Universe U;  // (x, xhat, theta)

    /// Face polynomials p_i = rhs - lhs, nonnegative on the state set.
    std::vector<Polynomial> faces;
    /// Planner state rows as lhs - rhs, nonpositive on the planner set.
    std::vector<Polynomial> plannerRows;
    /// V(x - pi(xhat), theta) - gamma: nonpositive exactly on the Minkowski
    /// sum of the embedded planner set and the error bound.
    Polynomial levelGap;
};

ContainmentPieces containmentPieces(const ProblemDefinition& p,
                                    const Certificate& cert);

struct ThetaOptions {
    std::string backend = "scs";
    SolveOptions solve{.eps = 1e-6, .maxIters = 100000};

    int iters = -1;          // alternation count; -1 uses the problem default
    double relStopTol = -1;  // stop threshold on the bound sum; -1 default

    /// A feasibility-margin optimum above this counts as feasible when
    /// probing a candidate initial bound.
    double marginThreshold = 1e-7;
    /// Within the alternation the multiplier refresh re-solves a bound the
    /// previous step already certified, so a margin down to this (negative)
    /// tolerance is accepted.
    double acceptTol = 1e-6;
    /// Initial bound 0.5 * (upper corner) is halved at most this many times
    /// while searching for a feasible start.
    int initHalvings = 10;

    bool verbose = false;
};

/// Multiplier-refresh step: with the bound fixed, maximizes the shared
/// feasibility margin of all face constraints and recovers the parameter-box
/// multipliers the bound step holds fixed.
struct SStepResult {
    bool feasible = false;
    double margin = 0.0;
    /// Parameter-box multipliers, [face][parameter coordinate].
    std::vector<std::vector<Polynomial>> sf;
    std::string failure;
};

SStepResult sStep(const ProblemDefinition& p, const Certificate& cert,
                  const Eigen::VectorXd& thetaBar, const ThetaOptions& opt);

/// Bound step: with the parameter-box multipliers fixed, maximizes the sum
/// of the bound coordinates subject to every face constraint and the
/// parameter box.
struct ThetaBarStepResult {
    bool feasible = false;
    Eigen::VectorXd thetaBar;
    std::string failure;
};

ThetaBarStepResult thetaBarStep(const ProblemDefinition& p, const Certificate& cert,
                                const SStepResult& fixed, const ThetaOptions& opt);

/// Result of the full alternation: the largest certified parameter bound,
/// valid for every theta in [0, thetaBar] componentwise.
struct ThetaSelection {
    Eigen::VectorXd thetaBar;
    /// Sum of the bound coordinates per accepted iteration; nondecreasing.
    std::vector<double> objectiveHistory;
    std::string problemHash;

    nlohmann::json toJson() const;
    static ThetaSelection fromJson(const nlohmann::json& j);
};

/// Full alternation from a halved-corner start: multiplier refresh / bound
/// maximization until the iteration budget or a relative-improvement stop.
/// Throws std::runtime_error when no feasible initial bound is found.
ThetaSelection selectTheta(const ProblemDefinition& p, const Certificate& cert,
                           const ThetaOptions& opt = {});

}  // namespace safesynth
