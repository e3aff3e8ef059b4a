#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "safesynth/conic.hpp"
#include "safesynth/polynomial.hpp"

namespace safesynth {

/// Polynomial whose coefficients are affine expressions in scalar decision
/// variables; the currency of SOS program construction.
struct DecPoly {
    Universe universe;
    std::map<Monomial, AffExpr, GrlexLess> terms;

    static DecPoly fromPoly(const Polynomial& p);
    static DecPoly zero(const Universe& u) { return DecPoly{u, {}}; }

    DecPoly inUniverse(const Universe& u) const;
    DecPoly& operator+=(const DecPoly& o);
    DecPoly& operator-=(const DecPoly& o);
    DecPoly& operator*=(double s);
    friend DecPoly operator*(const Polynomial& known, const DecPoly& d);
    friend DecPoly operator*(const DecPoly& d, const Polynomial& known) {
        return known * d;
    }

    /// Concrete polynomial after substituting decision-variable values.
    Polynomial atSolution(const Eigen::VectorXd& x) const;

    int maxDegree() const;
};

/// All monomials of the universe with total degree <= maxDeg, in grlex order.
std::vector<Monomial> monomialsUpTo(const Universe& u, int maxDeg);

/// Total exponent of `m` over the flagged variables (sign-symmetry parity).
int flipDegree(const Monomial& m, const std::vector<bool>& flipped);

enum class Parity { Any, Even, Odd };

/// Declarative SOS feasibility/optimization program. Decision polynomials
/// are either coefficient-free or Gram-backed (SOS constrained); explicit
/// constraints are "expression is SOS" / "expression is identically zero" /
/// scalar linear rows. Compiles deterministically into a ConicProblem.
class SosProgram {
  public:
    explicit SosProgram(Universe u) : universe_(std::move(u)) {}

    /// Declares blocks whose simultaneous sign flip leaves every constraint
    /// invariant; used to split Gram bases into parity blocks.
    void setSignSymmetry(const std::vector<std::string>& blocks);

    int newScalar(const std::string& name);

    /// Decision polynomial with free coefficients over the monomials of
    /// degree <= maxDeg (optionally restricted to one parity class).
    DecPoly newFreePoly(const Universe& u, int maxDeg, Parity parity,
                        const std::string& name);
    /// Gram-backed polynomial, SOS by construction.
    DecPoly newSosPoly(const Universe& u, int maxDeg, Parity parity,
                       const std::string& name);

    /// Constrains `expr` to be a sum of squares. When margin mode is on the
    /// compiled constraint is expr - t*sum(z_i^2) SOS over the same basis.
    void addSos(DecPoly expr, const std::string& label);
    /// Coefficient-wise zero.
    void addEqZero(const DecPoly& expr);
    void addLinear(const AffExpr& e, double lo, double hi);

    void setObjectiveMin(const AffExpr& c);
    /// Switches the objective to feasibility-margin maximization: a shared
    /// slack t (capped at marginCap) is subtracted from every addSos
    /// expression and maximized.
    void maximizeFeasibilityMargin(double marginCap = 1.0);
    int marginVar() const { return marginVar_; }

    struct Compiled {
        ConicProblem conic;
        /// Gram basis per addSos constraint, for diagnostics.
        std::vector<std::vector<Monomial>> constraintBases;
    };
    Compiled compile() const;

    /// Recovers a concrete polynomial from a solution.
    Polynomial recover(const ConicSolution& sol, const DecPoly& d) const;

    const Universe& universe() const { return universe_; }

  private:
    struct SosConstraint {
        DecPoly expr;
        std::string label;
    };
    struct GramPoly {  // Gram-backed decision polynomial
        std::vector<Monomial> basis;
        int firstVar = 0;  // contiguous Gram vars handed out at creation
        std::string name;
    };

    std::vector<Monomial> basisFor(const DecPoly& expr,
                                   std::vector<std::vector<Monomial>>* split) const;
    std::vector<bool> flipMask(const Universe& u) const;

    Universe universe_;
    std::vector<std::string> symmetryBlocks_;
    int numVars_ = 0;
    std::vector<std::string> varNames_;
    std::vector<GramPoly> gramPolys_;
    std::vector<SosConstraint> sosConstraints_;
    std::vector<DecPoly> zeroConstraints_;
    std::vector<ConicProblem::LinRow> linearRows_;
    AffExpr objective_;
    bool marginMode_ = false;
    double marginCap_ = 1.0;
    int marginVar_ = -1;
};

}  // namespace safesynth
