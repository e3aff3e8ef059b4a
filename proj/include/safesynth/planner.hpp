#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "safesynth/models.hpp"

namespace safesynth {

/// One-step discretization of the planner dynamics
/// dxhat = fhat(xhat) + ghat(xhat) uhat by a single fixed-step RK4 stage.
class DiscreteMap {
  public:
    DiscreteMap(PolynomialVector fhat, PolynomialMatrix ghat, double ts);

    Eigen::VectorXd step(const Eigen::VectorXd& xhat,
                         const Eigen::VectorXd& uhat) const;
    double ts() const { return ts_; }

    /// Continuous-time field fhat(x) + ghat(x) u.
    Eigen::VectorXd field(const Eigen::VectorXd& xhat,
                          const Eigen::VectorXd& uhat) const;

  private:
    PolynomialVector fhat_;
    PolynomialMatrix ghat_;
    double ts_;
};

DiscreteMap discretize(const PolynomialVector& fhat, const PolynomialMatrix& ghat,
                       double ts);

/// Receding-horizon tuning. Empty matrices/vectors select the defaults:
/// terminal weight from the discrete Riccati equation at the target, input
/// reference from the least-squares equilibrium input, target from the
/// problem definition, and a 0.05-halfwidth terminal box around the target.
struct PlannerConfig {
    int horizon = 30;
    double ts = 0.05;

    Eigen::MatrixXd Q;   // state weight; empty -> diag(10, 1, ...)
    Eigen::MatrixXd R;   // input weight; empty -> identity
    Eigen::MatrixXd PN;  // terminal weight; empty -> Riccati solution

    Eigen::VectorXd target;             // empty -> problem target
    Eigen::VectorXd uRef;               // empty -> equilibrium input at target
    Eigen::VectorXd terminalHalfWidth;  // empty -> 0.05 per coordinate

    /// Re-linearization passes along the predicted trajectory; 0 keeps the
    /// time-invariant model linearized at the target.
    int sqpIters = 0;

    nlohmann::json toJson() const;
    static PlannerConfig fromJson(const nlohmann::json& j);
};

/// Infeasibility of the finite-horizon problem, carrying the first stage
/// whose constraints cannot be met.
class PlannerInfeasible : public std::runtime_error {
  public:
    PlannerInfeasible(int stage, const std::string& what)
        : std::runtime_error(what), stage_(stage) {}
    int stage() const { return stage_; }

  private:
    int stage_;
};

struct MpcSolution {
    Eigen::VectorXd u0;      // first optimal input, the applied one
    Eigen::MatrixXd states;  // (horizon+1) x nhat predicted states
    Eigen::MatrixXd inputs;  // horizon x mhat optimal inputs
    double objective = 0.0;
};

/// Quadratic-cost receding-horizon planner over the instantiated parametric
/// planner sets. The prediction model is the RK4 one-step map linearized at
/// the target (optionally re-linearized along the prediction); every stage
/// is constrained to the interval bounds derived from the planner sets.
class MpcPlanner {
  public:
    MpcPlanner(const ProblemDefinition& p, const Eigen::VectorXd& thetaBar,
               PlannerConfig cfg = {});

    MpcSolution solve(const Eigen::VectorXd& xhat) const;

    const DiscreteMap& map() const { return map_; }
    const PlannerConfig& config() const { return cfg_; }
    const Eigen::VectorXd& stateLower() const { return xLo_; }
    const Eigen::VectorXd& stateUpper() const { return xHi_; }
    const Eigen::VectorXd& inputLower() const { return uLo_; }
    const Eigen::VectorXd& inputUpper() const { return uHi_; }

  private:
    int nhat_, mhat_;
    DiscreteMap map_;
    PlannerConfig cfg_;
    Eigen::VectorXd xLo_, xHi_, uLo_, uHi_;  // stage bounds at thetaBar
    Eigen::VectorXd tLo_, tHi_;              // terminal box
    Eigen::MatrixXd Ad_, Bd_;                // one-step map linearized at target
    Eigen::VectorXd cd_;
};

}  // namespace safesynth
