#pragma once

#include <vector>

#include "safesynth/polynomial.hpp"

namespace safesynth {

/// Membership tolerance for semialgebraic sets.
inline constexpr double kSetTol = 1e-9;

/// One constraint row: lhs(vars) <= rhs. The rhs may depend on the theta
/// block (parametric planner sets); for concrete sets it is a constant.
struct ConstraintRow {
    Polynomial lhs;
    Polynomial rhs;

    /// Margin rhs - lhs at a point; nonnegative inside.
    double margin(const Point& p) const;
};

/// Box bound for the parameter set Theta = [0, upper].
struct ThetaBox {
    Eigen::VectorXd upper;

    int dim() const { return static_cast<int>(upper.size()); }
    bool contains(const Eigen::VectorXd& theta, double tol = kSetTol) const;
    /// p_theta(theta) = max_i (theta_i)(theta_i - upper_i); <= 0 on the box.
    /// Per-coordinate polynomial (theta)_i ((theta)_i - upper_i).
    Polynomial boxPolynomial(const Universe& u, int i) const;
};

/// Conjunction of polynomial inequalities lhs <= rhs and equalities p = 0.
struct SemialgebraicSet {
    std::vector<ConstraintRow> inequalities;
    std::vector<Polynomial> equalities;
    Universe universe;  // blocks of the member space (not theta)

    bool contains(const Point& p, double tol = kSetTol) const;
    /// Smallest inequality margin (most violated row); +inf when empty.
    double worstMargin(const Point& p) const;

    /// Substitutes a concrete theta into all parametric right-hand sides.
    /// Throws when theta lies outside the given box.
    SemialgebraicSet instantiate(const Eigen::VectorXd& theta,
                                 const ThetaBox& box) const;

    /// Checks the monotone-growth condition: d(rhs)/d(theta_i) >= 0 for
    /// every row on a sample grid over the box. Returns false on the first
    /// violation.
    bool rhsMonotoneOnBox(const ThetaBox& box, int gridPerAxis = 7,
                          double tol = 1e-9) const;
};

/// Per-variable interval bounds for one block of a set, derived from two
/// sound row patterns: a single-variable linear row c*v <= rhs, and a row
/// whose left side is a sum of positive-coefficient even powers of single
/// variables (boxes, disks, squared parametric rows). Parametric right-hand
/// sides are evaluated at `point` (which must carry their blocks). Throws
/// when some variable stays unbounded on either side.
std::pair<Eigen::VectorXd, Eigen::VectorXd> deriveBoxBounds(
    const SemialgebraicSet& set, const std::string& block, const Point& point);

}  // namespace safesynth
