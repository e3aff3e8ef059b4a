#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "safesynth/sosprog.hpp"

using namespace safesynth;

namespace {

Universe uniX(int dim = 1) { return Universe({makeBlock("x", dim)}); }

Polynomial var(const Universe& u, int i) { return Polynomial::variable(u, "x", i); }

// Re-expands sum_blocks z' G z from a solution and compares coefficients
// against the concrete expression.
double reExpansionError(const SosProgram::Compiled& cp, const ConicSolution& sol,
                        const Polynomial& expr, size_t firstBlock) {
    Polynomial acc = Polynomial::zero(expr.universe());
    size_t b = firstBlock;
    size_t basisIdx = 0;
    // constraintBases holds the full (possibly parity-merged) basis; walk
    // the conic blocks in order and match monomials by re-multiplying.
    for (; b < cp.conic.blocks.size(); ++b) {
        const auto& blk = cp.conic.blocks[b];
        Eigen::MatrixXd G = cp.conic.blockMatrix(static_cast<int>(b), sol.x);
        // recover the basis monomials of this block from the full list
        std::vector<Monomial> basis;
        for (int k = 0; k < blk.dim; ++k)
            basis.push_back(cp.constraintBases[0][basisIdx + k]);
        basisIdx += blk.dim;
        for (int i = 0; i < blk.dim; ++i)
            for (int j = 0; j < blk.dim; ++j) {
                std::map<Monomial, double, GrlexLess> t;
                t[basis[i].times(basis[j])] = G(i, j);
                acc += Polynomial::fromTerms(expr.universe(), std::move(t));
            }
    }
    Polynomial diff = acc - expr;
    double err = 0.0;
    for (const auto& [m, c] : diff.terms()) err = std::max(err, std::abs(c));
    return err;
}

}  // namespace

TEST_CASE("x^2 + 2x + 2 admits an SOS certificate") {
    Universe u = uniX();
    Polynomial p = var(u, 0) * var(u, 0) + 2.0 * var(u, 0) + 2.0;

    SosProgram prog(u);
    prog.addSos(DecPoly::fromPoly(p), "p");
    auto cp = prog.compile();

    for (const std::string backend : {"ipm", "scs"}) {
        auto sol = makeBackend(backend)->solve(cp.conic, SolveOptions{});
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(sol.maxPsdResidual <= 1e-7);
        CHECK(reExpansionError(cp, sol, p, 0) <= 1e-6);
    }
}

TEST_CASE("the Motzkin polynomial is rejected") {
    Universe u = uniX(2);
    Polynomial x = var(u, 0), y = var(u, 1);
    Polynomial motzkin =
        x * x * x * x * y * y + x * x * y * y * y * y - 3.0 * (x * x * y * y) + 1.0;

    SosProgram prog(u);
    prog.addSos(DecPoly::fromPoly(motzkin), "motzkin");
    auto cp = prog.compile();

    for (const std::string backend : {"ipm", "scs"}) {
        auto sol = makeBackend(backend)->solve(cp.conic, SolveOptions{});
        CHECK(sol.status == SolveStatus::Infeasible);
    }
}

TEST_CASE("scalar objective through an SOS constraint") {
    // min g subject to g - 1 SOS (a 1x1 Gram), optimum 1
    Universe u = uniX();
    SosProgram prog(u);
    int g = prog.newScalar("g");
    DecPoly expr = DecPoly::zero(u);
    expr.terms[Monomial::one()] = AffExpr::var(g);
    expr.terms[Monomial::one()] += AffExpr::c(-1.0);
    prog.addSos(expr, "bound");
    prog.setObjectiveMin(AffExpr::var(g));
    auto cp = prog.compile();

    auto sol = makeBackend("ipm")->solve(cp.conic, SolveOptions{});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("polynomial lower bound matches the closed-form minimum") {
    // max lambda s.t. x^4 - 3x^2 + 2 - lambda SOS; for univariate
    // polynomials SOS equals nonnegativity, so lambda* = min p = -1/4.
    Universe u = uniX();
    Polynomial x = var(u, 0);
    Polynomial p = x * x * x * x - 3.0 * (x * x) + 2.0;

    SosProgram prog(u);
    int lam = prog.newScalar("lambda");
    DecPoly expr = DecPoly::fromPoly(p);
    DecPoly shift = DecPoly::zero(u);
    shift.terms[Monomial::one()] = AffExpr::var(lam);
    expr -= shift;
    prog.addSos(expr, "p-lambda");
    prog.setObjectiveMin(AffExpr::var(lam, -1.0));
    auto cp = prog.compile();

    for (const std::string backend : {"ipm", "scs"}) {
        auto sol = makeBackend(backend)->solve(cp.conic, SolveOptions{});
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(-sol.objective == doctest::Approx(-0.25).epsilon(1e-5));
    }
}

TEST_CASE("certified expression is nonnegative on samples") {
    Universe u = uniX(2);
    Polynomial x = var(u, 0), y = var(u, 1);
    Polynomial p = x * x - 2.0 * (x * y) + 2.0 * (y * y) + 0.5;

    SosProgram prog(u);
    prog.addSos(DecPoly::fromPoly(p), "p");
    auto cp = prog.compile();
    auto sol = makeBackend("ipm")->solve(cp.conic, SolveOptions{});
    REQUIRE(sol.status == SolveStatus::Optimal);

    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (int k = 0; k < 1000; ++k) {
        Eigen::VectorXd pt(2);
        pt << dist(rng), dist(rng);
        CHECK(p.evalFlat(pt) >= -1e-9);
    }
}

TEST_CASE("sign symmetry splits the Gram basis into parity blocks") {
    Universe u = uniX();
    Polynomial x = var(u, 0);
    Polynomial p = x * x * x * x - 2.0 * (x * x) + 2.0;  // (x^2-1)^2 + 1

    SosProgram sym(u);
    sym.setSignSymmetry({"x"});
    sym.addSos(DecPoly::fromPoly(p), "p");
    auto cp = sym.compile();

    REQUIRE(cp.conic.blocks.size() == 2);  // even {1, x^2} and odd {x}
    CHECK(cp.conic.blocks[0].dim + cp.conic.blocks[1].dim == 3);
    CHECK(std::max(cp.conic.blocks[0].dim, cp.conic.blocks[1].dim) == 2);

    auto sol = makeBackend("ipm")->solve(cp.conic, SolveOptions{});
    REQUIRE(sol.status == SolveStatus::Optimal);

    // the unsplit program certifies the same polynomial
    SosProgram plain(u);
    plain.addSos(DecPoly::fromPoly(p), "p");
    auto cp2 = plain.compile();
    REQUIRE(cp2.conic.blocks.size() == 1);
    auto sol2 = makeBackend("ipm")->solve(cp2.conic, SolveOptions{});
    CHECK(sol2.status == SolveStatus::Optimal);
}

TEST_CASE("feasibility margin is positive iff the constraint is strictly SOS") {
    Universe u = uniX();
    Polynomial x = var(u, 0);

    SosProgram good(u);
    good.addSos(DecPoly::fromPoly(x * x + 1.0), "pos");
    good.maximizeFeasibilityMargin(1.0);
    auto sg = makeBackend("ipm")->solve(good.compile().conic, SolveOptions{});
    REQUIRE(sg.status == SolveStatus::Optimal);
    CHECK(-sg.objective == doctest::Approx(1.0).epsilon(1e-5));  // capped

    // x is not SOS; basis pruning leaves no Gram basis at all, so the
    // compiled constraint is structurally infeasible even with slack
    SosProgram bad(u);
    bad.addSos(DecPoly::fromPoly(x), "odd");
    bad.maximizeFeasibilityMargin(1.0);
    auto sb = makeBackend("ipm")->solve(bad.compile().conic, SolveOptions{});
    CHECK(sb.status == SolveStatus::Infeasible);

    // x^2 - 1 has a Gram basis but is not SOS: the margin goes negative
    SosProgram border(u);
    border.addSos(DecPoly::fromPoly(x * x - 1.0), "shifted");
    border.maximizeFeasibilityMargin(1.0);
    auto sc = makeBackend("ipm")->solve(border.compile().conic, SolveOptions{});
    REQUIRE(sc.status == SolveStatus::Optimal);
    CHECK(-sc.objective < -1e-3);  // strictly negative margin
}

TEST_CASE("Gram-backed decision polynomials are SOS-constrained") {
    Universe u = uniX();
    Polynomial x = var(u, 0);

    // s must equal x^2 + 1 (SOS): feasible
    SosProgram ok(u);
    DecPoly s1 = ok.newSosPoly(u, 2, Parity::Any, "s");
    DecPoly e1 = s1;
    e1 -= DecPoly::fromPoly(x * x + 1.0);
    ok.addEqZero(e1);
    CHECK(makeBackend("ipm")->solve(ok.compile().conic, SolveOptions{}).status ==
          SolveStatus::Optimal);

    // s must equal x^2 - 1 (not SOS): infeasible
    SosProgram no(u);
    DecPoly s2 = no.newSosPoly(u, 2, Parity::Any, "s");
    DecPoly e2 = s2;
    e2 -= DecPoly::fromPoly(x * x - 1.0);
    no.addEqZero(e2);
    CHECK(makeBackend("ipm")->solve(no.compile().conic, SolveOptions{}).status ==
          SolveStatus::Infeasible);
}

TEST_CASE("free decision polynomial closes a simple identity") {
    // find free k(x) of degree <= 1 with x^2 + k*x + 1 == (x+1)^2
    Universe u = uniX();
    Polynomial x = var(u, 0);
    SosProgram prog(u);
    DecPoly k = prog.newFreePoly(u, 0, Parity::Any, "k");
    DecPoly expr = x * k;
    expr += DecPoly::fromPoly(x * x + 1.0 - (x + 1.0) * (x + 1.0));
    prog.addEqZero(expr);
    auto cp = prog.compile();
    auto sol = makeBackend("ipm")->solve(cp.conic, SolveOptions{});
    REQUIRE(sol.status == SolveStatus::Optimal);
    Polynomial kSol = prog.recover(sol, k);
    CHECK(kSol.constantTerm() == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("compilation is deterministic") {
    auto build = [] {
        Universe u = uniX(2);
        Polynomial x = Polynomial::variable(u, "x", 0);
        Polynomial y = Polynomial::variable(u, "x", 1);
        SosProgram prog(u);
        prog.setSignSymmetry({"x"});
        DecPoly s = prog.newSosPoly(u, 2, Parity::Even, "s");
        DecPoly expr = DecPoly::fromPoly(x * x * y * y + 1.0);
        expr += (x * x) * s;
        prog.addSos(expr, "main");
        prog.maximizeFeasibilityMargin(1.0);
        return prog.compile().conic.toJson().dump();
    };
    CHECK(build() == build());
}
