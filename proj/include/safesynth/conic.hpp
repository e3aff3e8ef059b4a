#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace safesynth {

/// Affine expression c0 + sum_i a_i x_i over decision variables.
struct AffExpr {
    std::map<int, double> coeffs;
    double constant = 0.0;

    static AffExpr var(int idx, double scale = 1.0) {
        AffExpr e;
        e.coeffs[idx] = scale;
        return e;
    }
    static AffExpr c(double value) {
        AffExpr e;
        e.constant = value;
        return e;
    }

    AffExpr& add(int idx, double a) {
        if (a != 0.0) {
            auto [it, inserted] = coeffs.try_emplace(idx, a);
            if (!inserted) it->second += a;
        }
        return *this;
    }
    AffExpr& operator+=(const AffExpr& o) {
        for (auto [i, a] : o.coeffs) add(i, a);
        constant += o.constant;
        return *this;
    }
    AffExpr& operator*=(double s) {
        for (auto& [i, a] : coeffs) a *= s;
        constant *= s;
        return *this;
    }
    bool isConstant() const { return coeffs.empty(); }
    double eval(const Eigen::VectorXd& x) const {
        double v = constant;
        for (auto [i, a] : coeffs) v += a * x[i];
        return v;
    }
};

/// Conic feasibility/optimization problem in the toolkit's canonical form:
///   minimize    c'x
///   subject to  Aeq x = beq
///               mat(x[block_j]) is positive semidefinite for each block
///               lo_r <= a_r'x <= hi_r
/// Every PSD block owns a disjoint group of decision variables holding the
/// upper triangle of the Gram matrix in row-major order.
struct ConicProblem {
    int numVars = 0;

    std::vector<std::pair<int, double>> objective;  // sparse c
    double objectiveConstant = 0.0;

    struct EqRow {
        std::vector<std::pair<int, double>> coeffs;
        double rhs = 0.0;
    };
    std::vector<EqRow> equalities;

    struct PsdBlock {
        int dim = 0;
        std::vector<int> varIdx;  // dim*(dim+1)/2 entries, upper triangle row-major
        std::string label;

        int entryVar(int i, int j) const;  // i <= j
    };
    std::vector<PsdBlock> blocks;

    struct LinRow {
        std::vector<std::pair<int, double>> coeffs;
        double lo = -1e30;
        double hi = 1e30;
    };
    std::vector<LinRow> linears;

    int newVar() { return numVars++; }
    PsdBlock& newPsdBlock(int dim, const std::string& label);

    /// Assembles the Gram matrix of block `b` from a solution vector.
    Eigen::MatrixXd blockMatrix(int b, const Eigen::VectorXd& x) const;
    /// Smallest eigenvalue over all PSD blocks at x.
    double minBlockEigenvalue(const Eigen::VectorXd& x) const;

    nlohmann::json toJson() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

std::string to_string(SolveStatus s);

struct ConicSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd x;
    double objective = 0.0;
    double maxPsdResidual = 0.0;  // max(0, -lambda_min) over blocks
    std::string solverInfo;
};

struct SolveOptions {
    double eps = 1e-8;
    int maxIters = 200000;
    double timeLimitSec = 1800.0;
    bool verbose = false;
};

/// Abstract conic solve entry point; implementations wrap a native solver
/// or embed an interior-point method.
class ConicBackend {
  public:
    virtual ~ConicBackend() = default;
    virtual ConicSolution solve(const ConicProblem& p, const SolveOptions& opt) = 0;
    virtual std::string name() const = 0;
};

/// Creates a backend by name: "ipm" (embedded barrier interior point) or
/// "scs" (subprocess wrapper around the SCS conic solver).
std::unique_ptr<ConicBackend> makeBackend(const std::string& name);

}  // namespace safesynth
