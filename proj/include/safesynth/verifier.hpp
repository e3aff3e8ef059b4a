#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "safesynth/certsynth.hpp"

namespace safesynth {

/// Seeded sampling configuration shared by all certificate checks. Every
/// verdict is deterministic given the seed.
struct SamplingPlan {
    std::uint64_t seed = 2026;
    int samples = 100000;

    /// Largest admissible Lie derivative on the level surface.
    double decreaseTol = 1e-4;
    /// Largest admissible tracker input-polytope violation on the bound.
    double inputTol = 1e-6;
    /// Largest admissible state-set violation of embedded-planner + error.
    double containTol = 1e-6;
    /// Largest admissible increase of V along growing parameters.
    double monotoneTol = 1e-9;
    /// Largest admissible excess of V over gamma on the initial set.
    double initialSetTol = 1e-9;

    /// Rejection-sampling attempts per accepted point before giving up.
    int maxRejects = 10000;
};

/// Outcome of one sampling check: the worst violation seen (negative values
/// mean slack everywhere) and the pass verdict against the check tolerance.
struct CheckResult {
    std::string check;
    bool pass = false;
    double worst = 0.0;
    double tolerance = 0.0;
    int samples = 0;

    nlohmann::json toJson() const;
};

/// Lie derivative of V along the closed error dynamics, sampled on the level
/// surface {V(e,theta) = gamma} against planner states/inputs drawn from
/// their parametric sets. Negative worst case means the bound is invariant.
CheckResult verifyDecrease(const ProblemDefinition& p, const Certificate& cert,
                           const SamplingPlan& plan);

/// Tracker input polytope H kappa <= h sampled over the error bound and the
/// parametric planner sets.
CheckResult verifyInputBound(const ProblemDefinition& p, const Certificate& cert,
                             const SamplingPlan& plan);

/// Embedded planner-set (+) error-bound containment in the tracker state
/// set, sampled over theta in [0, thetaBar].
CheckResult verifyContainment(const ProblemDefinition& p, const Certificate& cert,
                              const Eigen::VectorXd& thetaBar,
                              const SamplingPlan& plan);

/// Parameter monotonicity of the storage function: V(e, a) >= V(e, b)
/// whenever a <= b componentwise, sampled over the parameter box.
CheckResult verifyMonotonicity(const ProblemDefinition& p, const Certificate& cert,
                               const SamplingPlan& plan);

/// Initial-set containment: V(e, theta) <= gamma on Omega for every theta.
CheckResult verifyInitialSet(const ProblemDefinition& p, const Certificate& cert,
                             const SamplingPlan& plan);

}  // namespace safesynth
