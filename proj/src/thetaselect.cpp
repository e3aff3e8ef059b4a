#include "safesynth/thetaselect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace safesynth {

namespace {

/// Labels of explicit SOS-constraint blocks on the PSD boundary at the
/// solution — the candidates blocking feasibility.
std::string bindingConstraints(const ConicProblem& conic, const Eigen::VectorXd& x) {
    std::ostringstream out;
    bool first = true;
    for (size_t b = 0; b < conic.blocks.size(); ++b) {
        const auto& blk = conic.blocks[b];
        if (blk.label.find("s") == 0) continue;  // multiplier Gram blocks
        Eigen::MatrixXd G = conic.blockMatrix(static_cast<int>(b), x);
        double mineig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G)
                            .eigenvalues()
                            .minCoeff();
        if (mineig < 1e-7) {
            if (!first) out << ", ";
            out << blk.label;
            first = false;
        }
    }
    return out.str();
}

double boundSum(const Eigen::VectorXd& v) { return v.sum(); }

}  // namespace

ContainmentPieces containmentPieces(const ProblemDefinition& p,
                                    const Certificate& cert) {
    if (p.ndelta > 0)
        throw std::runtime_error(
            "disturbance blocks are not supported by parameter selection");

    ContainmentPieces c;
    c.U = Universe({p.stateSet.universe.block("x"), makeBlock("xhat", p.nhat),
                    makeBlock("theta", p.ntheta)});

    for (const auto& row : p.stateSet.inequalities)
        c.faces.push_back(row.rhs.inUniverse(c.U) - row.lhs.inUniverse(c.U));
    for (const auto& row : p.plannerStateSet.inequalities)
        c.plannerRows.push_back(row.lhs.inUniverse(c.U) - row.rhs.inUniverse(c.U));

    // e := x - pi(xhat), composed into the storage function
    std::vector<Polynomial> eSub;
    for (int i = 0; i < p.n; ++i)
        eSub.push_back(Polynomial::variable(c.U, "x", i) - p.pi[i].inUniverse(c.U));
    c.levelGap = cert.V.substitute("e", eSub).inUniverse(c.U) - cert.gamma;
    return c;
}

SStepResult sStep(const ProblemDefinition& p, const Certificate& cert,
                  const Eigen::VectorXd& thetaBar, const ThetaOptions& opt) {
    ContainmentPieces c = containmentPieces(p, cert);
    auto backend = makeBackend(opt.backend);

    SosProgram prog(c.U);
    std::vector<std::vector<DecPoly>> sfHandles(c.faces.size());
    for (size_t i = 0; i < c.faces.size(); ++i) {
        DecPoly expr = DecPoly::fromPoly(c.faces[i]);
        for (size_t r = 0; r < c.plannerRows.size(); ++r) {
            DecPoly sd = prog.newSosPoly(c.U, p.degMultiplier, Parity::Any,
                                         "sd_" + std::to_string(i) + "_" +
                                             std::to_string(r));
            expr += c.plannerRows[r] * sd;
        }
        DecPoly se = prog.newSosPoly(c.U, p.degMultiplier, Parity::Any,
                                     "se_" + std::to_string(i));
        expr += c.levelGap * se;
        for (int j = 0; j < p.ntheta; ++j) {
            Polynomial thj = Polynomial::variable(c.U, "theta", j);
            DecPoly sf = prog.newSosPoly(c.U, p.degMultiplier, Parity::Any,
                                         "sf_" + std::to_string(i) + "_" +
                                             std::to_string(j));
            // theta_j (theta_j - bound_j) <= 0 on [0, bound]
            expr += (thj * (thj - thetaBar[j])) * sf;
            sfHandles[i].push_back(sf);
        }
        prog.addSos(std::move(expr), "containment-face-" + std::to_string(i));
    }

    prog.maximizeFeasibilityMargin(1.0);
    auto compiled = prog.compile();
    auto sol = backend->solve(compiled.conic, opt.solve);

    SStepResult out;
    if (sol.status != SolveStatus::Optimal) {
        out.failure = "solver status " + to_string(sol.status);
        return out;
    }
    out.margin = sol.x[prog.marginVar()];
    out.feasible = out.margin > -opt.acceptTol;
    if (!out.feasible) {
        out.failure = bindingConstraints(compiled.conic, sol.x);
        return out;
    }
    out.sf.resize(c.faces.size());
    for (size_t i = 0; i < c.faces.size(); ++i)
        for (const auto& sf : sfHandles[i])
            out.sf[i].push_back(prog.recover(sol, sf));
    return out;
}

ThetaBarStepResult thetaBarStep(const ProblemDefinition& p, const Certificate& cert,
                                const SStepResult& fixed, const ThetaOptions& opt) {
    ContainmentPieces c = containmentPieces(p, cert);
    auto backend = makeBackend(opt.backend);

    SosProgram prog(c.U);
    std::vector<int> tb;
    AffExpr objective;
    for (int j = 0; j < p.ntheta; ++j) {
        tb.push_back(prog.newScalar("bound" + std::to_string(j)));
        prog.addLinear(AffExpr::var(tb[j]), 0.0, p.thetaBox.upper[j]);
        objective += AffExpr::var(tb[j], -1.0);  // maximize the sum
    }

    for (size_t i = 0; i < c.faces.size(); ++i) {
        DecPoly expr = DecPoly::fromPoly(c.faces[i]);
        for (size_t r = 0; r < c.plannerRows.size(); ++r) {
            DecPoly sd = prog.newSosPoly(c.U, p.degMultiplier, Parity::Any,
                                         "sd_" + std::to_string(i) + "_" +
                                             std::to_string(r));
            expr += c.plannerRows[r] * sd;
        }
        DecPoly se = prog.newSosPoly(c.U, p.degMultiplier, Parity::Any,
                                     "se_" + std::to_string(i));
        expr += c.levelGap * se;
        for (int j = 0; j < p.ntheta; ++j) {
            // sf_ij theta_j (theta_j - bound_j): linear in the bound decision
            Polynomial thj = Polynomial::variable(c.U, "theta", j);
            Polynomial qt = fixed.sf[i][j].inUniverse(c.U) * thj;
            expr += DecPoly::fromPoly(qt * thj);
            DecPoly lin = DecPoly::zero(c.U);
            for (const auto& [m, coeff] : qt.terms())
                lin.terms[m] = AffExpr::var(tb[j], -coeff);
            expr += lin;
        }
        prog.addSos(std::move(expr), "containment-face-" + std::to_string(i));
    }
    prog.setObjectiveMin(objective);

    auto compiled = prog.compile();
    auto sol = backend->solve(compiled.conic, opt.solve);

    ThetaBarStepResult out;
    if (sol.status != SolveStatus::Optimal) {
        out.failure = "solver status " + to_string(sol.status);
        return out;
    }
    out.feasible = true;
    out.thetaBar.resize(p.ntheta);
    for (int j = 0; j < p.ntheta; ++j)
        out.thetaBar[j] =
            std::clamp(sol.x[tb[j]], 0.0, p.thetaBox.upper[j]);
    return out;
}

ThetaSelection selectTheta(const ProblemDefinition& p, const Certificate& cert,
                           const ThetaOptions& opt) {
    ThetaOptions o = opt;
    if (o.iters < 0) o.iters = p.thetaIters;
    if (o.relStopTol < 0) o.relStopTol = p.relStopTol;

    Eigen::VectorXd bound = 0.5 * p.thetaBox.upper;
    SStepResult ss;
    bool started = false;
    for (int h = 0; h <= o.initHalvings; ++h) {
        ss = sStep(p, cert, bound, o);
        if (o.verbose)
            std::fprintf(stderr, "[select-theta] init bound sum=%.6g margin=%.3g\n",
                         boundSum(bound), ss.margin);
        if (ss.feasible && ss.margin > o.marginThreshold) {
            started = true;
            break;
        }
        bound *= 0.5;
    }
    if (!started)
        throw std::runtime_error(
            "no feasible initial parameter bound (" +
            (ss.failure.empty() ? std::string("tight at every candidate") : ss.failure) +
            ")");

    ThetaSelection sel;
    sel.problemHash = problemHash(p);
    sel.thetaBar = bound;
    sel.objectiveHistory = {boundSum(bound)};

    for (int j = 0; j < o.iters; ++j) {
        ThetaBarStepResult tb = thetaBarStep(p, cert, ss, o);
        if (!tb.feasible) break;
        double prev = sel.objectiveHistory.back();
        double next = boundSum(tb.thetaBar);
        if (o.verbose)
            std::fprintf(stderr, "[select-theta] iter %d bound sum=%.6g\n", j, next);
        if (next < prev) break;  // numerically stalled
        sel.thetaBar = tb.thetaBar;
        sel.objectiveHistory.push_back(next);
        if (next - prev <= o.relStopTol * std::max(prev, 1e-12)) break;

        SStepResult refreshed = sStep(p, cert, sel.thetaBar, o);
        if (!refreshed.feasible) break;  // keep the bound the last step certified
        ss = refreshed;
    }
    return sel;
}

nlohmann::json ThetaSelection::toJson() const {
    nlohmann::json j;
    j["format"] = "safesynth-theta";
    j["version"] = 1;
    j["problem_hash"] = problemHash;
    j["theta_bar"] = std::vector<double>(thetaBar.begin(), thetaBar.end());
    j["objective_history"] = objectiveHistory;
    return j;
}

ThetaSelection ThetaSelection::fromJson(const nlohmann::json& j) {
    if (j.value("format", "") != "safesynth-theta")
        throw std::runtime_error("not a parameter-selection file");
    ThetaSelection s;
    s.problemHash = j.at("problem_hash").get<std::string>();
    auto v = j.at("theta_bar").get<std::vector<double>>();
    s.thetaBar = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
    s.objectiveHistory = j.at("objective_history").get<std::vector<double>>();
    return s;
}

}  // namespace safesynth
