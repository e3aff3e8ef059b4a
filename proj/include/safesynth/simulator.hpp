#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "safesynth/certsynth.hpp"
#include "safesynth/planner.hpp"

namespace safesynth {

struct SimConfig {
    double duration = 10.0;
    /// Tracker/planner integration substeps per planner period; the inner
    /// RK4 step is planner.ts / innerSteps.
    int innerSteps = 20;
    PlannerConfig planner;
};

/// One closed-loop sample, taken at every planner update instant.
struct SimSample {
    double t = 0.0;
    Eigen::VectorXd x;     // tracker state
    Eigen::VectorXd xhat;  // planner state
    Eigen::VectorXd e;     // tracking error x - pi(xhat)
    Eigen::VectorXd u;     // tracker input kappa(e, xhat, uhat, theta)
    Eigen::VectorXd uhat;  // planner input held over the period
    double v = 0.0;        // storage function V(e, theta)

    // worst (smallest) constraint margin per set; negative means violated
    double stateMargin = 0.0;
    double inputMargin = 0.0;
    double plannerStateMargin = 0.0;
    double plannerInputMargin = 0.0;
};

struct SimTrace {
    std::vector<SimSample> samples;
    Eigen::VectorXd theta;     // parameter bound the run was executed at
    double gamma = 0.0;        // certified level, for the summary
    std::string status;        // "completed" or "planner-infeasible"
    int plannerFailStage = -1; // first infeasible stage when truncated

    /// Worst margins over the whole run plus final-state data.
    nlohmann::json summaryJson() const;
    /// One row per sample: time, states, error, inputs, V, margins.
    void writeCsv(const std::string& path) const;
};

/// Closed-loop run of the planner-tracker architecture: the receding-horizon
/// planner updates uhat every period (zero-order hold), the planner state
/// follows its own dynamics under that input, and the tracker integrates
/// dx = f(x) + g(x) kappa(e, xhat, uhat, theta) with RK4 substeps. Planner
/// infeasibility truncates the trace and sets the status.
SimTrace simulate(const ProblemDefinition& p, const Certificate& cert,
                  const Eigen::VectorXd& theta, const SimConfig& cfg = {});

/// Largest excursion of the storage function above the certified level at
/// the given parameter value: max_t V(e(t), theta) - gamma. Non-positive
/// means the error stayed inside the certified bound.
double checkContainment(const SimTrace& trace, const Certificate& cert,
                        const Eigen::VectorXd& theta);

}  // namespace safesynth
