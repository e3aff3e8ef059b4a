#include "safesynth/certsynth.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "safesynth/riccati.hpp"
#include "safesynth/semialg.hpp"

namespace safesynth {

namespace {

/// Formal partial derivative of a decision polynomial.
DecPoly decPartial(const DecPoly& d, const std::string& block, int idx) {
    int f = d.universe.flatIndex(block, idx);
    DecPoly out = DecPoly::zero(d.universe);
    for (const auto& [m, e] : d.terms) {
        int exp = m.exponent(f);
        if (exp == 0) continue;
        Monomial dm;
        for (auto [v, k] : m.factors()) {
            int kk = (v == f) ? k - 1 : k;
            if (kk > 0) dm = dm.times(Monomial::variable(v, kk));
        }
        AffExpr scaled = e;
        scaled *= static_cast<double>(exp);
        auto [it, inserted] = out.terms.try_emplace(dm, scaled);
        if (!inserted) it->second += scaled;
    }
    return out;
}

/// Shared constraint material: set rows rewritten as lhs - rhs <= 0 over the
/// synthesis universe, plus the parameter-box polynomials.
struct Ctx {
    Universe U;   // (e, xhat, uhat, theta [, delta])
    Universe Ue;  // (e, theta)

    std::vector<Polynomial> plannerRows;  // planner state + input rows, in U
    std::vector<Polynomial> thetaRowsU;   // theta_i (theta_i - ub_i), in U
    std::vector<Polynomial> thetaRowsE;   // same, in Ue
    std::vector<Polynomial> omegaRows;    // initial-set inequality rows, in Ue
    std::vector<Polynomial> omegaEqs;     // initial-set equalities, in Ue

    bool symmetric = false;  // sign symmetry declared on the problem
    Parity evenPar() const { return symmetric ? Parity::Even : Parity::Any; }
    Parity oddPar() const { return symmetric ? Parity::Odd : Parity::Any; }
};

Ctx makeCtx(const ProblemDefinition& p) {
    if (p.ndelta > 0)
        throw std::runtime_error("disturbance blocks are not supported by certificate synthesis");
    Ctx c;
    c.U = p.synthesisUniverse();
    c.Ue = Universe({c.U.block("e"), c.U.block("theta")});
    c.symmetric = !p.signSymmetry.empty();

    auto pushRows = [&c](const SemialgebraicSet& s) {
        for (const auto& row : s.inequalities)
            c.plannerRows.push_back(row.lhs.inUniverse(c.U) - row.rhs.inUniverse(c.U));
    };
    pushRows(p.plannerStateSet);
    pushRows(p.plannerInputSet);

    for (int i = 0; i < p.ntheta; ++i) {
        c.thetaRowsU.push_back(p.thetaBox.boxPolynomial(c.U, i));
        c.thetaRowsE.push_back(p.thetaBox.boxPolynomial(c.Ue, i));
    }
    for (const auto& row : p.omega.inequalities)
        c.omegaRows.push_back(row.lhs.inUniverse(c.Ue) - row.rhs.inUniverse(c.Ue));
    for (const auto& q : p.omega.equalities) c.omegaEqs.push_back(q.inUniverse(c.Ue));
    return c;
}

/// Adds one SOS multiplier per row and accumulates s_i * row_i into expr.
void addSetMultipliers(SosProgram& prog, DecPoly& expr,
                       const std::vector<Polynomial>& rows, int deg, Parity par,
                       const std::string& prefix) {
    for (size_t i = 0; i < rows.size(); ++i) {
        DecPoly s = prog.newSosPoly(rows[i].universe(), deg, par,
                                    prefix + "_" + std::to_string(i));
        expr += rows[i] * s;
    }
}

/// The initial-set containment constraint gamma - V >= 0 on Omega x Theta.
/// `V` enters as a decision polynomial; for the gamma-step it is constant.
void addInitialSetConstraint(SosProgram& prog, const Ctx& c,
                             const ProblemDefinition& p, const DecPoly& V,
                             double gamma) {
    DecPoly expr = DecPoly::fromPoly(Polynomial::constant(c.Ue, gamma));
    expr -= V;
    addSetMultipliers(prog, expr, c.omegaRows, p.degMultiplier, Parity::Any, "s13");
    for (size_t i = 0; i < c.omegaEqs.size(); ++i) {
        DecPoly lam = prog.newFreePoly(c.Ue, p.degMultiplier, Parity::Any,
                                       "lam" + std::to_string(i));
        expr += c.omegaEqs[i] * lam;
    }
    addSetMultipliers(prog, expr, c.thetaRowsE, p.degMultiplier, Parity::Any, "s14");
    prog.addSos(std::move(expr), "initial-set");
}

/// Labels of explicit SOS-constraint blocks whose Gram matrix is on the PSD
/// boundary at the solution — the candidates blocking feasibility.
std::string bindingConstraints(const ConicProblem& conic, const Eigen::VectorXd& x) {
    std::ostringstream out;
    bool first = true;
    for (size_t b = 0; b < conic.blocks.size(); ++b) {
        const auto& blk = conic.blocks[b];
        // multiplier Gram blocks carry a ".G"-style name; explicit SOS
        // constraints are labeled by constraint id
        if (blk.label.find("s") == 0 || blk.label.find("lam") == 0 ||
            blk.label.find("kappa") == 0)
            continue;
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

struct MarginSolve {
    ConicSolution sol;
    double margin = -1.0;
    bool feasible = false;
    std::string binding;
};

MarginSolve solveMargin(SosProgram& prog, ConicBackend& backend,
                        const SynthesisOptions& opt, double threshold) {
    prog.maximizeFeasibilityMargin(1.0);
    auto compiled = prog.compile();
    MarginSolve ms;
    ms.sol = backend.solve(compiled.conic, opt.solve);
    if (ms.sol.status == SolveStatus::Optimal) {
        ms.margin = ms.sol.x[prog.marginVar()];
        ms.feasible = ms.margin > threshold;
        if (!ms.feasible) ms.binding = bindingConstraints(compiled.conic, ms.sol.x);
    } else {
        ms.binding = "solver status " + to_string(ms.sol.status);
    }
    return ms;
}

}  // namespace

std::string problemHash(const ProblemDefinition& p) {
    std::string s = p.toJson().dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Polynomial initializeV(const ProblemDefinition& p, const ErrorDynamics& dyn) {
    // linearize the error field in e at the origin of every block
    Point z;
    for (const auto& b : dyn.universe.blocks())
        z[b.name] = Eigen::VectorXd::Zero(b.dim);

    Eigen::MatrixXd A(p.n, p.n);
    for (int i = 0; i < p.n; ++i)
        for (int j = 0; j < p.n; ++j) A(i, j) = dyn.fe[i].partial("e", j).eval(z);
    Eigen::MatrixXd B = dyn.ge.eval(z);

    Eigen::MatrixXd S;
    try {
        S = solveCare(A, B, Eigen::MatrixXd::Identity(p.n, p.n),
                      Eigen::MatrixXd::Identity(p.m, p.m));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("initialization failure: error-dynamics "
                                             "linearization is not stabilizable: ") +
                                 e.what());
    }

    // the Riccati scale is kept as-is: its entries are O(1) for sensibly
    // scaled dynamics, which keeps the conic data well conditioned (the
    // feasibility margin is an absolute quantity and becomes meaningless
    // when the storage coefficients are rescaled by orders of magnitude)
    Universe U = p.synthesisUniverse();
    Universe Ue({U.block("e"), U.block("theta")});
    Polynomial V0 = Polynomial::zero(Ue);
    for (int i = 0; i < p.n; ++i) {
        Polynomial ei = Polynomial::variable(Ue, "e", i);
        for (int j = 0; j < p.n; ++j)
            V0 += S(i, j) * ei * Polynomial::variable(Ue, "e", j);
    }
    return V0;
}

namespace {

/// Exact lower bound on any admissible level: V evaluated at the vertices of
/// the initial-error box (every vertex lies in the initial set), at the
/// parameter-box origin where a parameter-monotone storage function is
/// largest. Zero when no box is derivable from the initial set.
double levelLowerBound(const ProblemDefinition& p, const Polynomial& V) {
    try {
        auto [lo, hi] = deriveBoxBounds(p.omega, "e", {});
        Point pt;
        pt["theta"] = Eigen::VectorXd::Zero(p.ntheta);
        const int k = static_cast<int>(lo.size());
        double vmax = 0.0;
        for (unsigned mask = 0; mask < (1u << k); ++mask) {
            Eigen::VectorXd v(k);
            for (int i = 0; i < k; ++i) v[i] = (mask >> i) & 1 ? hi[i] : lo[i];
            pt["e"] = v;
            vmax = std::max(vmax, V.eval(pt));
        }
        return vmax;
    } catch (const std::exception&) {
        return 0.0;
    }
}

/// One gamma-step feasibility probe at a fixed level.
MarginSolve probeGamma(const ProblemDefinition& p, const ErrorDynamics& dyn,
                       const Ctx& c, const Polynomial& V, double gamma,
                       ConicBackend& backend, const SynthesisOptions& opt,
                       GammaStepResult* out) {
    SosProgram prog(c.U);
    prog.setSignSymmetry(p.signSymmetry);

    Polynomial VU = V.inUniverse(c.U);
    Polynomial Vlevel = VU - gamma;
    std::vector<Polynomial> dVde;
    for (int i = 0; i < p.n; ++i) dVde.push_back(V.partial("e", i).inUniverse(c.U));

    std::vector<DecPoly> kappa;
    for (int j = 0; j < p.m; ++j)
        kappa.push_back(prog.newFreePoly(c.U, p.degKappa, c.oddPar(),
                                         "kappa" + std::to_string(j)));

    // level-surface decrease: -dV/de . (f_e + g_e kappa) with S-procedure
    // terms for the level surface, the planner sets, and the parameter box
    DecPoly dec = DecPoly::zero(c.U);
    Polynomial knownDrift = Polynomial::zero(c.U);
    for (int i = 0; i < p.n; ++i) knownDrift += dVde[i] * dyn.fe[i];
    dec -= DecPoly::fromPoly(knownDrift);
    for (int j = 0; j < p.m; ++j) {
        Polynomial qj = Polynomial::zero(c.U);
        for (int i = 0; i < p.n; ++i) qj += dVde[i] * dyn.ge(i, j);
        dec -= qj * kappa[j];
    }
    DecPoly s2 = prog.newFreePoly(c.U, p.degMultiplier, c.evenPar(), "s2");
    dec -= Vlevel * s2;
    addSetMultipliers(prog, dec, c.plannerRows, p.degMultiplier, c.evenPar(), "s3");
    addSetMultipliers(prog, dec, c.thetaRowsU, p.degMultiplier, c.evenPar(), "s5");
    prog.addSos(std::move(dec), "decrease");

    // tracker input rows: H kappa <= h on the sub-level set
    std::vector<DecPoly> s8;
    const int n0 = static_cast<int>(p.inputh.size());
    for (int k = 0; k < n0; ++k) {
        DecPoly row = DecPoly::fromPoly(Polynomial::constant(c.U, p.inputh[k]));
        for (int j = 0; j < p.m; ++j) {
            DecPoly t = kappa[j];
            t *= p.inputH(k, j);
            row -= t;
        }
        DecPoly sk = prog.newSosPoly(c.U, p.degMultiplier, Parity::Any,
                                     "s8_" + std::to_string(k));
        row += Vlevel * sk;
        s8.push_back(sk);
        addSetMultipliers(prog, row, c.plannerRows, p.degMultiplier, Parity::Any,
                          "s9_" + std::to_string(k));
        addSetMultipliers(prog, row, c.thetaRowsU, p.degMultiplier, Parity::Any,
                          "s11_" + std::to_string(k));
        prog.addSos(std::move(row), "input-row-" + std::to_string(k));
    }

    addInitialSetConstraint(prog, c, p, DecPoly::fromPoly(V), gamma);

    MarginSolve ms = solveMargin(prog, backend, opt, opt.marginThreshold);
    if (ms.feasible && out) {
        out->feasible = true;
        out->gamma = gamma;
        out->margin = ms.margin;
        out->kappa.entries.clear();
        for (const auto& kj : kappa)
            out->kappa.entries.push_back(prog.recover(ms.sol, kj));
        out->s2 = prog.recover(ms.sol, s2);
        out->s8.clear();
        for (const auto& sk : s8) out->s8.push_back(prog.recover(ms.sol, sk));
    }
    return ms;
}

}  // namespace

GammaStepResult gammaStep(const ProblemDefinition& p, const ErrorDynamics& dyn,
                          const Polynomial& V, const SynthesisOptions& opt) {
    Ctx c = makeCtx(p);
    auto backend = makeBackend(opt.backend);

    GammaStepResult best;
    // exact lower bound from the initial set: no level below it is feasible,
    // so the search starts just above it instead of at an arbitrary scale
    const double glb = levelLowerBound(p, V);
    double hi = opt.gammaInit;
    if (glb > 0 && (hi <= glb || hi > 16.0 * glb)) hi = 2.0 * glb;
    if (opt.verbose && glb > 0)
        std::fprintf(stderr, "[gamma-step] level lower bound %.6g, start %.6g\n", glb, hi);
    std::string lastBinding;
    int doublings = 0;
    for (;;) {
        MarginSolve ms = probeGamma(p, dyn, c, V, hi, *backend, opt, &best);
        if (opt.verbose)
            std::fprintf(stderr, "[gamma-step] probe gamma=%.6g margin=%.3g status=%s%s%s\n",
                         hi, ms.margin, to_string(ms.sol.status).c_str(),
                         ms.binding.empty() ? "" : " binding: ", ms.binding.c_str());
        if (ms.feasible) break;
        lastBinding = ms.binding;
        if (++doublings > opt.gammaMaxDoublings) {
            GammaStepResult fail;
            fail.feasible = false;
            fail.failure = lastBinding.empty() ? "no feasible level found"
                                               : lastBinding;
            return fail;
        }
        hi *= 2.0;
    }

    // bracket the infeasible side geometrically: the optimal level can sit
    // orders of magnitude below the first feasible probe, where a linear
    // bisection from zero would waste a probe per halving
    double lo = doublings > 0 ? hi / 2.0 : 0.0;
    for (int d = 0; lo == 0.0 && d < opt.gammaDescentProbes && hi > 1e-12; ++d) {
        double cand = hi / 8.0;
        GammaStepResult next;
        MarginSolve ms = probeGamma(p, dyn, c, V, cand, *backend, opt, &next);
        if (opt.verbose)
            std::fprintf(stderr, "[gamma-step] probe gamma=%.6g margin=%.3g status=%s\n",
                         cand, ms.margin, to_string(ms.sol.status).c_str());
        if (ms.feasible) {
            hi = cand;
            best = next;
        } else {
            lo = cand;
        }
    }

    while (hi - lo > opt.gammaRelTol * hi + 1e-9) {
        double mid = 0.5 * (lo + hi);
        GammaStepResult cand;
        MarginSolve ms = probeGamma(p, dyn, c, V, mid, *backend, opt, &cand);
        if (opt.verbose)
            std::fprintf(stderr, "[gamma-step] probe gamma=%.6g margin=%.3g status=%s\n",
                         mid, ms.margin, to_string(ms.sol.status).c_str());
        if (ms.feasible) {
            hi = mid;
            best = cand;
        } else {
            lo = mid;
        }
    }
    best.feasible = true;
    return best;
}

VStepResult vStep(const ProblemDefinition& p, const ErrorDynamics& dyn,
                  const Polynomial& Vprev, const GammaStepResult& fixed,
                  const SynthesisOptions& opt) {
    Ctx c = makeCtx(p);
    auto backend = makeBackend(opt.backend);
    const double gamma = fixed.gamma;

    SosProgram prog(c.U);
    prog.setSignSymmetry(p.signSymmetry);

    DecPoly V = prog.newFreePoly(c.Ue, p.degV, c.symmetric ? Parity::Even : Parity::Any, "V");
    DecPoly VU = V.inUniverse(c.U);
    DecPoly VlevelU = VU;
    VlevelU -= DecPoly::fromPoly(Polynomial::constant(c.U, gamma));

    // decrease with (kappa, s2) held fixed
    DecPoly dec = DecPoly::zero(c.U);
    for (int i = 0; i < p.n; ++i) {
        Polynomial rate = dyn.fe[i];
        for (int j = 0; j < p.m; ++j)
            rate += dyn.ge(i, j) * fixed.kappa[j].inUniverse(c.U);
        DecPoly dVi = decPartial(V, "e", i).inUniverse(c.U);
        dec -= rate * dVi;
    }
    {
        DecPoly t = fixed.s2.inUniverse(c.U) * VlevelU;
        dec -= t;
    }
    addSetMultipliers(prog, dec, c.plannerRows, p.degMultiplier, c.evenPar(), "s3");
    addSetMultipliers(prog, dec, c.thetaRowsU, p.degMultiplier, c.evenPar(), "s5");
    prog.addSos(std::move(dec), "decrease");

    // input rows with (kappa, s8) held fixed
    const int n0 = static_cast<int>(p.inputh.size());
    for (int k = 0; k < n0; ++k) {
        Polynomial slack = Polynomial::constant(c.U, p.inputh[k]);
        for (int j = 0; j < p.m; ++j)
            slack -= p.inputH(k, j) * fixed.kappa[j].inUniverse(c.U);
        DecPoly row = DecPoly::fromPoly(slack);
        row += fixed.s8[k].inUniverse(c.U) * VlevelU;
        addSetMultipliers(prog, row, c.plannerRows, p.degMultiplier, Parity::Any,
                          "s9_" + std::to_string(k));
        addSetMultipliers(prog, row, c.thetaRowsU, p.degMultiplier, Parity::Any,
                          "s11_" + std::to_string(k));
        prog.addSos(std::move(row), "input-row-" + std::to_string(k));
    }

    addInitialSetConstraint(prog, c, p, V, gamma);

    // parameter monotonicity: dV/dtheta_i <= 0 on R^n x Theta
    for (int i = 0; i < p.ntheta; ++i) {
        DecPoly mono = DecPoly::zero(c.Ue);
        mono -= decPartial(V, "theta", i);
        addSetMultipliers(prog, mono, c.thetaRowsE, p.degMultiplier, c.evenPar(),
                          "s7_" + std::to_string(i));
        prog.addSos(std::move(mono), "theta-monotone-" + std::to_string(i));
    }

    // descent: the new gamma-sub-level set stays inside the previous one
    {
        DecPoly desc = V;
        desc -= DecPoly::fromPoly(Polynomial::constant(c.Ue, gamma));
        DecPoly s0 = prog.newSosPoly(c.Ue, p.degMultiplier, c.evenPar(), "s0");
        desc -= (Vprev - gamma) * s0;
        addSetMultipliers(prog, desc, c.thetaRowsE, p.degMultiplier, c.evenPar(), "s1");
        prog.addSos(std::move(desc), "descent");
    }

    // radial lower bound keeps sub-level sets bounded on Theta
    if (opt.radialEps > 0) {
        DecPoly rad = V;
        Polynomial normSq = Polynomial::zero(c.Ue);
        for (int i = 0; i < p.n; ++i) {
            Polynomial ei = Polynomial::variable(c.Ue, "e", i);
            normSq += ei * ei;
        }
        rad -= DecPoly::fromPoly(opt.radialEps * normSq);
        addSetMultipliers(prog, rad, c.thetaRowsE, p.degMultiplier, c.evenPar(), "sB");
        prog.addSos(std::move(rad), "radial-bound");
    }

    MarginSolve ms = solveMargin(prog, *backend, opt, -opt.vStepMarginTol);
    VStepResult out;
    out.feasible = ms.feasible;
    out.margin = ms.margin;
    out.failure = ms.binding;
    if (ms.feasible) out.V = prog.recover(ms.sol, V);
    return out;
}

Certificate synthesize(const ProblemDefinition& p, const SynthesisOptions& opt) {
    SynthesisOptions o = opt;
    if (o.iters < 0) o.iters = p.synthesisIters;
    if (o.relStopTol < 0) o.relStopTol = p.relStopTol;

    ErrorDynamics dyn = buildErrorDynamics(p);
    Polynomial V = initializeV(p, dyn);

    GammaStepResult gs = gammaStep(p, dyn, V, o);
    if (!gs.feasible) {
        throw std::runtime_error(
            "initialization failure: seed storage function admits no feasible level (" +
            gs.failure + ")");
    }

    Certificate cert;
    cert.degV = p.degV;
    cert.degKappa = p.degKappa;
    cert.degMultiplier = p.degMultiplier;
    cert.problemHash = problemHash(p);
    cert.V = V;
    cert.kappa = gs.kappa;
    cert.gamma = gs.gamma;
    cert.gammaHistory = {gs.gamma};

    for (int j = 0; j < o.iters; ++j) {
        VStepResult vs = vStep(p, dyn, V, gs, o);
        if (!vs.feasible) break;
        o.gammaInit = gs.gamma;  // warm-start the level search at the incumbent
        GammaStepResult next = gammaStep(p, dyn, vs.V, o);
        if (!next.feasible) break;
        double prevGamma = cert.gamma;
        // bisection tolerance can report a hair above the previous level;
        // the descent constraint still guarantees containment, so clamp
        if (next.gamma > prevGamma) next.gamma = prevGamma;
        V = vs.V;
        gs = next;
        cert.V = V;
        cert.kappa = gs.kappa;
        cert.gamma = gs.gamma;
        cert.gammaHistory.push_back(gs.gamma);
        if (prevGamma - gs.gamma <= o.relStopTol * std::max(prevGamma, 1e-12)) break;
    }
    return cert;
}

nlohmann::json Certificate::toJson() const {
    nlohmann::json j;
    j["format"] = "safesynth-certificate";
    j["version"] = 1;
    j["problem_hash"] = problemHash;
    j["gamma"] = gamma;
    j["gamma_history"] = gammaHistory;
    j["degrees"] = {{"V", degV}, {"kappa", degKappa}, {"multiplier", degMultiplier}};
    j["V"] = V.toJson();
    j["kappa"] = nlohmann::json::array();
    for (const auto& k : kappa.entries) j["kappa"].push_back(k.toJson());
    return j;
}

Certificate Certificate::fromJson(const ProblemDefinition& p, const nlohmann::json& j) {
    if (j.value("format", "") != "safesynth-certificate")
        throw std::runtime_error("not a certificate file");
    Universe U = p.synthesisUniverse();
    Universe Ue({U.block("e"), U.block("theta")});
    Certificate c;
    c.problemHash = j.at("problem_hash").get<std::string>();
    c.gamma = j.at("gamma").get<double>();
    c.gammaHistory = j.at("gamma_history").get<std::vector<double>>();
    c.degV = j.at("degrees").at("V").get<int>();
    c.degKappa = j.at("degrees").at("kappa").get<int>();
    c.degMultiplier = j.at("degrees").at("multiplier").get<int>();
    c.V = Polynomial::fromJson(Ue, j.at("V"));
    for (const auto& jk : j.at("kappa")) c.kappa.entries.push_back(Polynomial::fromJson(U, jk));
    return c;
}

}  // namespace safesynth
