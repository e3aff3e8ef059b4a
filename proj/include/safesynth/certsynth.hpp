#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "safesynth/dynamics.hpp"
#include "safesynth/sosprog.hpp"

namespace safesynth {

/// Output of certificate synthesis: a parametric storage function V(e,theta),
/// a tracking law kappa(e, xhat, uhat[, delta], theta), and a level gamma.
/// The parametric error bound is the sub-level set {e : V(e,theta) <= gamma};
/// the tracking input u = kappa(...) keeps the error inside it and inside the
/// tracker input polytope.
struct Certificate {
    Polynomial V;            // over (e, theta)
    PolynomialVector kappa;  // m entries over the synthesis universe
    double gamma = 0.0;

    int degV = 2;
    int degKappa = 4;
    int degMultiplier = 2;

    std::vector<double> gammaHistory;  // one entry per accepted gamma-step
    std::string problemHash;

    nlohmann::json toJson() const;
    static Certificate fromJson(const ProblemDefinition& p, const nlohmann::json& j);
};

/// FNV-1a hash of the canonical problem serialization, hex-encoded. Ties
/// certificates to the exact problem they were synthesized for.
std::string problemHash(const ProblemDefinition& p);

struct SynthesisOptions {
    std::string backend = "scs";
    /// Feasibility probes only need the sign of a margin; the default conic
    /// tolerance is relaxed accordingly (first-order backends stall long
    /// before 1e-8 on benchmark-scale programs).
    SolveOptions solve{.eps = 1e-6, .maxIters = 100000};

    int iters = -1;          // alternation count; -1 uses the problem default
    double relStopTol = -1;  // stop when gamma improves less than this; -1 default

    /// Bisection on gamma stops when the bracket is below this relative width.
    double gammaRelTol = 1e-2;
    /// A feasibility-margin optimum above this counts as feasible.
    double marginThreshold = 1e-7;
    /// The V-step is an improvement step, not a feasibility decision: its
    /// constraints are inherently tight at the bisected level, so a margin
    /// down to this (negative) tolerance is accepted. The following
    /// gamma-step re-certifies against the returned V.
    double vStepMarginTol = 1e-6;
    /// Initial gamma bracket upper bound (doubled until feasible).
    double gammaInit = 1.0;
    int gammaMaxDoublings = 10;
    /// Geometric descent probes bracketing the infeasible side when the very
    /// first level is already feasible (0 accepts it without descending).
    int gammaDescentProbes = 40;

    /// Coefficient of the radial lower bound V >= eps*|e|^2 imposed on Theta
    /// during the V-step; keeps sub-level sets bounded.
    double radialEps = 1e-4;

    bool verbose = false;
};

/// Quadratic storage-function seed V0(e) = e' S e with S from the Riccati
/// equation on the error-dynamics linearization at e = 0 (unit state and
/// input weights). Theta-independent, hence trivially theta-monotone.
/// Throws when the linearization is not stabilizable.
Polynomial initializeV(const ProblemDefinition& p, const ErrorDynamics& dyn);

struct GammaStepResult {
    bool feasible = false;
    double gamma = 0.0;
    PolynomialVector kappa;
    Polynomial s2;                // sign-free level-surface multiplier
    std::vector<Polynomial> s8;   // per input row, multiplies (V - gamma)
    double margin = 0.0;          // feasibility margin at the accepted gamma
    std::string failure;          // candidate failing constraints when infeasible
};

/// Minimizes gamma for fixed V (bisection over feasibility-margin programs),
/// producing kappa and the multipliers that the V-step must hold fixed.
GammaStepResult gammaStep(const ProblemDefinition& p, const ErrorDynamics& dyn,
                          const Polynomial& V, const SynthesisOptions& opt);

struct VStepResult {
    bool feasible = false;
    Polynomial V;  // over (e, theta)
    double margin = 0.0;
    std::string failure;  // candidate failing constraints when infeasible
};

/// Re-optimizes V for fixed (kappa, gamma, s2, s8), maximizing the shared
/// feasibility margin, subject to the descent condition that keeps the new
/// gamma-sub-level set inside the previous one for every theta.
VStepResult vStep(const ProblemDefinition& p, const ErrorDynamics& dyn,
                  const Polynomial& Vprev, const GammaStepResult& fixed,
                  const SynthesisOptions& opt);

/// Full alternation: gamma-step / V-step until the iteration budget or a
/// relative-improvement stop. Throws std::runtime_error when the seed V0 is
/// infeasible. The gamma history is nonincreasing.
Certificate synthesize(const ProblemDefinition& p, const SynthesisOptions& opt = {});

}  // namespace safesynth
