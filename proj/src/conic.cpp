#include "safesynth/conic.hpp"

#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace safesynth {

int ConicProblem::PsdBlock::entryVar(int i, int j) const {
    if (i > j) std::swap(i, j);
    // row-major upper triangle offset
    int off = i * dim - i * (i - 1) / 2 + (j - i);
    return varIdx[off];
}

ConicProblem::PsdBlock& ConicProblem::newPsdBlock(int dim, const std::string& label) {
    PsdBlock b;
    b.dim = dim;
    b.label = label;
    b.varIdx.resize(dim * (dim + 1) / 2);
    for (auto& v : b.varIdx) v = newVar();
    blocks.push_back(std::move(b));
    return blocks.back();
}

Eigen::MatrixXd ConicProblem::blockMatrix(int b, const Eigen::VectorXd& x) const {
    const PsdBlock& blk = blocks[b];
    Eigen::MatrixXd M(blk.dim, blk.dim);
    for (int i = 0; i < blk.dim; ++i)
        for (int j = i; j < blk.dim; ++j)
            M(i, j) = M(j, i) = x[blk.entryVar(i, j)];
    return M;
}

double ConicProblem::minBlockEigenvalue(const Eigen::VectorXd& x) const {
    double lo = 0.0;
    bool any = false;
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blockMatrix(b, x),
                                                          Eigen::EigenvaluesOnly);
        double l = es.eigenvalues().minCoeff();
        lo = any ? std::min(lo, l) : l;
        any = true;
    }
    return any ? lo : 0.0;
}

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "unknown";
}

nlohmann::json ConicProblem::toJson() const {
    nlohmann::json j;
    j["num_vars"] = numVars;
    j["objective"] = {{"constant", objectiveConstant}};
    nlohmann::json obj = nlohmann::json::array();
    for (auto [i, c] : objective) obj.push_back({i, c});
    j["objective"]["linear"] = obj;

    nlohmann::json eqs = nlohmann::json::array();
    for (const auto& row : equalities) {
        nlohmann::json cols = nlohmann::json::array(), vals = nlohmann::json::array();
        for (auto [i, a] : row.coeffs) {
            cols.push_back(i);
            vals.push_back(a);
        }
        eqs.push_back({{"cols", cols}, {"vals", vals}, {"rhs", row.rhs}});
    }
    j["equalities"] = eqs;

    nlohmann::json blks = nlohmann::json::array();
    for (const auto& b : blocks)
        blks.push_back({{"dim", b.dim}, {"vars", b.varIdx}, {"label", b.label}});
    j["psd_blocks"] = blks;

    nlohmann::json lins = nlohmann::json::array();
    for (const auto& row : linears) {
        nlohmann::json cols = nlohmann::json::array(), vals = nlohmann::json::array();
        for (auto [i, a] : row.coeffs) {
            cols.push_back(i);
            vals.push_back(a);
        }
        lins.push_back({{"cols", cols}, {"vals", vals}, {"lo", row.lo}, {"hi", row.hi}});
    }
    j["linear_rows"] = lins;
    return j;
}

std::unique_ptr<ConicBackend> makeIpmBackend();
std::unique_ptr<ConicBackend> makeScsBackend();

std::unique_ptr<ConicBackend> makeBackend(const std::string& name) {
    if (name == "ipm") return makeIpmBackend();
    if (name == "scs") return makeScsBackend();
    throw std::invalid_argument("unknown conic backend: " + name);
}

}  // namespace safesynth
