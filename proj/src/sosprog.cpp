#include "safesynth/sosprog.hpp"

#include <algorithm>
#include <stdexcept>

namespace safesynth {

namespace {

// Flat-variable remap from `from` into the (subsuming) universe `to`.
std::vector<int> remapTable(const Universe& from, const Universe& to) {
    std::vector<int> map(from.varCount());
    for (int i = 0; i < from.varCount(); ++i) {
        auto [b, idx] = from.locate(i);
        map[i] = to.flatIndex(from.blocks()[b].name, idx);
    }
    return map;
}

bool negligible(const AffExpr& e) {
    return e.coeffs.empty() && std::abs(e.constant) <= kCoeffDropTol;
}

}  // namespace

DecPoly DecPoly::fromPoly(const Polynomial& p) {
    DecPoly d;
    d.universe = p.universe();
    for (const auto& [m, c] : p.terms()) d.terms.emplace(m, AffExpr::c(c));
    return d;
}

DecPoly DecPoly::inUniverse(const Universe& u) const {
    if (u == universe) return *this;
    if (!Universe::subsumes(u, universe))
        throw std::invalid_argument("DecPoly::inUniverse: target must subsume");
    auto map = remapTable(universe, u);
    DecPoly out;
    out.universe = u;
    for (const auto& [m, e] : terms) out.terms.emplace(m.remapped(map), e);
    return out;
}

DecPoly& DecPoly::operator+=(const DecPoly& o) {
    Universe merged = Universe::merged(universe, o.universe);
    if (!(merged == universe)) *this = inUniverse(merged);
    DecPoly rhs = o.inUniverse(universe);
    for (auto& [m, e] : rhs.terms) {
        auto [it, inserted] = terms.try_emplace(m, e);
        if (!inserted) {
            it->second += e;
            if (negligible(it->second)) terms.erase(it);
        }
    }
    return *this;
}

DecPoly& DecPoly::operator-=(const DecPoly& o) {
    DecPoly neg = o;
    neg *= -1.0;
    return *this += neg;
}

DecPoly& DecPoly::operator*=(double s) {
    if (s == 0.0) {
        terms.clear();
        return *this;
    }
    for (auto& [m, e] : terms) e *= s;
    return *this;
}

DecPoly operator*(const Polynomial& known, const DecPoly& d) {
    Universe merged = Universe::merged(known.universe(), d.universe);
    Polynomial k = known.inUniverse(merged);
    DecPoly rhs = d.inUniverse(merged);
    DecPoly out;
    out.universe = merged;
    for (const auto& [mk, ck] : k.terms()) {
        for (const auto& [md, ed] : rhs.terms) {
            AffExpr scaled = ed;
            scaled *= ck;
            Monomial m = mk.times(md);
            auto [it, inserted] = out.terms.try_emplace(m, scaled);
            if (!inserted) it->second += scaled;
        }
    }
    for (auto it = out.terms.begin(); it != out.terms.end();) {
        if (negligible(it->second))
            it = out.terms.erase(it);
        else
            ++it;
    }
    return out;
}

Polynomial DecPoly::atSolution(const Eigen::VectorXd& x) const {
    std::map<Monomial, double, GrlexLess> out;
    for (const auto& [m, e] : terms) out[m] = e.eval(x);
    return Polynomial::fromTerms(universe, std::move(out));
}

int DecPoly::maxDegree() const {
    int d = 0;
    for (const auto& [m, e] : terms) d = std::max(d, m.degree());
    return d;
}

std::vector<Monomial> monomialsUpTo(const Universe& u, int maxDeg) {
    std::vector<Monomial> out;
    std::vector<std::pair<int, int>> factors;  // (flat var, exponent)
    auto recurse = [&](auto&& self, int var, int remaining) -> void {
        if (var == u.varCount()) {
            Monomial m;
            for (auto [v, e] : factors) m = m.times(Monomial::variable(v, e));
            out.push_back(m);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            if (e > 0) factors.emplace_back(var, e);
            self(self, var + 1, remaining - e);
            if (e > 0) factors.pop_back();
        }
    };
    recurse(recurse, 0, maxDeg);
    std::sort(out.begin(), out.end(), GrlexLess{});
    return out;
}

int flipDegree(const Monomial& m, const std::vector<bool>& flipped) {
    int d = 0;
    for (auto [v, e] : m.factors())
        if (flipped[v]) d += e;
    return d;
}

void SosProgram::setSignSymmetry(const std::vector<std::string>& blocks) {
    symmetryBlocks_ = blocks;
}

int SosProgram::newScalar(const std::string& name) {
    varNames_.push_back(name);
    return numVars_++;
}

std::vector<bool> SosProgram::flipMask(const Universe& u) const {
    std::vector<bool> mask(u.varCount(), false);
    for (const auto& name : symmetryBlocks_) {
        if (!u.hasBlock(name)) continue;
        int b = u.blockIndex(name);
        int off = u.blockOffset(b);
        for (int i = 0; i < u.block(name).dim; ++i) mask[off + i] = true;
    }
    return mask;
}

DecPoly SosProgram::newFreePoly(const Universe& u, int maxDeg, Parity parity,
                                const std::string& name) {
    auto mask = flipMask(u);
    DecPoly d;
    d.universe = u;
    int k = 0;
    for (const auto& m : monomialsUpTo(u, maxDeg)) {
        int fd = flipDegree(m, mask);
        if (parity == Parity::Even && fd % 2 != 0) continue;
        if (parity == Parity::Odd && fd % 2 != 1) continue;
        int v = newScalar(name + "[" + std::to_string(k++) + "]");
        d.terms.emplace(m, AffExpr::var(v));
    }
    return d;
}

DecPoly SosProgram::newSosPoly(const Universe& u, int maxDeg, Parity parity,
                               const std::string& name) {
    if (parity == Parity::Odd)
        throw std::invalid_argument("an SOS polynomial cannot have odd parity");
    auto mask = flipMask(u);
    GramPoly g;
    g.name = name;
    for (const auto& m : monomialsUpTo(u, maxDeg / 2)) {
        // Basis elements of one parity class yield an even polynomial.
        if (parity == Parity::Even && flipDegree(m, mask) % 2 != 0) continue;
        g.basis.push_back(m);
    }
    int dim = static_cast<int>(g.basis.size());
    g.firstVar = numVars_;
    for (int k = 0; k < dim * (dim + 1) / 2; ++k)
        newScalar(name + ".G[" + std::to_string(k) + "]");

    DecPoly d;
    d.universe = u;
    for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
            int off = i * dim - i * (i - 1) / 2 + (j - i);
            Monomial m = g.basis[i].times(g.basis[j]);
            AffExpr e = AffExpr::var(g.firstVar + off, i == j ? 1.0 : 2.0);
            auto [it, inserted] = d.terms.try_emplace(m, e);
            if (!inserted) it->second += e;
        }
    }
    gramPolys_.push_back(std::move(g));
    return d;
}

void SosProgram::addSos(DecPoly expr, const std::string& label) {
    sosConstraints_.push_back({std::move(expr), label});
}

void SosProgram::addEqZero(const DecPoly& expr) { zeroConstraints_.push_back(expr); }

void SosProgram::addLinear(const AffExpr& e, double lo, double hi) {
    ConicProblem::LinRow row;
    for (auto [i, a] : e.coeffs) row.coeffs.emplace_back(i, a);
    if (lo > -1e29) row.lo = lo - e.constant;
    if (hi < 1e29) row.hi = hi - e.constant;
    linearRows_.push_back(std::move(row));
}

void SosProgram::setObjectiveMin(const AffExpr& c) {
    objective_ = c;
    marginMode_ = false;
}

void SosProgram::maximizeFeasibilityMargin(double marginCap) {
    if (marginVar_ < 0) marginVar_ = newScalar("feasibility_margin");
    marginMode_ = true;
    marginCap_ = marginCap;
}

std::vector<Monomial> SosProgram::basisFor(
    const DecPoly& expr, std::vector<std::vector<Monomial>>* split) const {
    const Universe& u = expr.universe;
    split->clear();

    std::vector<Monomial> support;
    for (const auto& [m, e] : expr.terms)
        if (!negligible(e)) support.push_back(m);
    if (support.empty()) support.push_back(Monomial::one());

    int maxDeg = 0, minDeg = support.front().degree();
    std::vector<int> varCap(u.varCount(), 0);
    for (const auto& m : support) {
        maxDeg = std::max(maxDeg, m.degree());
        minDeg = std::min(minDeg, m.degree());
        for (auto [v, e] : m.factors()) varCap[v] = std::max(varCap[v], e);
    }
    int dHi = (maxDeg + 1) / 2;
    int dLo = minDeg / 2;
    for (auto& c : varCap) c = (c + 1) / 2;

    std::vector<Monomial> basis;
    for (const auto& m : monomialsUpTo(u, dHi)) {
        if (m.degree() < dLo) continue;
        bool ok = true;
        for (auto [v, e] : m.factors())
            if (e > varCap[v]) ok = false;
        if (ok) basis.push_back(m);
    }

    // Diagonal-consistency pruning: when a basis monomial's square appears
    // neither in the expression support nor as a cross-pair product of the
    // remaining basis, its Gram diagonal — and with it the whole row — is
    // forced to zero, so the monomial can be dropped. Iterating to a
    // fixpoint is lossless and keeps the feasibility-margin slack from
    // being pinned at zero by unreachable squares.
    std::set<Monomial, GrlexLess> sup(support.begin(), support.end());
    bool changed = true;
    while (changed) {
        changed = false;
        std::set<Monomial, GrlexLess> cross;
        for (size_t i = 0; i < basis.size(); ++i)
            for (size_t j = i + 1; j < basis.size(); ++j)
                cross.insert(basis[i].times(basis[j]));
        std::vector<Monomial> kept;
        for (const auto& z : basis) {
            Monomial sq = z.times(z);
            if (sup.count(sq) || cross.count(sq))
                kept.push_back(z);
            else
                changed = true;
        }
        basis = std::move(kept);
    }

    // Parity split when the whole expression is even under the declared
    // sign symmetry: products within one parity class cover all even
    // monomials, so splitting the Gram basis is lossless.
    auto mask = flipMask(u);
    bool anyFlip = std::any_of(mask.begin(), mask.end(), [](bool b) { return b; });
    bool allEven = anyFlip;
    for (const auto& m : support)
        if (flipDegree(m, mask) % 2 != 0) allEven = false;
    if (allEven) {
        std::vector<Monomial> even, odd;
        for (const auto& m : basis)
            (flipDegree(m, mask) % 2 == 0 ? even : odd).push_back(m);
        if (!even.empty()) split->push_back(std::move(even));
        if (!odd.empty()) split->push_back(std::move(odd));
    } else {
        split->push_back(basis);
    }
    return basis;
}

SosProgram::Compiled SosProgram::compile() const {
    Compiled out;
    ConicProblem& conic = out.conic;
    conic.numVars = numVars_;

    if (marginMode_) {
        conic.objective = {{marginVar_, -1.0}};
        ConicProblem::LinRow cap;
        cap.coeffs = {{marginVar_, 1.0}};
        cap.hi = marginCap_;
        conic.linears.push_back(std::move(cap));
    } else {
        for (auto [i, a] : objective_.coeffs) conic.objective.emplace_back(i, a);
        conic.objectiveConstant = objective_.constant;
    }
    for (const auto& row : linearRows_) conic.linears.push_back(row);

    // Gram-backed decision polynomials: their preallocated variables form
    // PSD blocks directly.
    for (const auto& g : gramPolys_) {
        ConicProblem::PsdBlock blk;
        blk.dim = static_cast<int>(g.basis.size());
        blk.label = g.name;
        blk.varIdx.resize(blk.dim * (blk.dim + 1) / 2);
        for (size_t k = 0; k < blk.varIdx.size(); ++k)
            blk.varIdx[k] = g.firstVar + static_cast<int>(k);
        conic.blocks.push_back(std::move(blk));
    }

    for (const auto& z : zeroConstraints_) {
        for (const auto& [m, e] : z.terms) {
            if (negligible(e)) continue;
            ConicProblem::EqRow row;
            for (auto [i, a] : e.coeffs) row.coeffs.emplace_back(i, a);
            row.rhs = -e.constant;
            conic.equalities.push_back(std::move(row));
        }
    }

    for (const auto& con : sosConstraints_) {
        std::vector<std::vector<Monomial>> subBases;
        basisFor(con.expr, &subBases);
        // Record the basis in block order (parity classes concatenated) so
        // diagnostics can align monomials with the conic PSD blocks.
        std::vector<Monomial> recorded;
        for (const auto& sb : subBases)
            recorded.insert(recorded.end(), sb.begin(), sb.end());
        out.constraintBases.push_back(std::move(recorded));

        // Accumulate Gram contributions per monomial across sub-blocks.
        std::map<Monomial, std::vector<std::pair<int, double>>, GrlexLess> rows;
        std::map<Monomial, int, GrlexLess> squareCount;
        for (size_t s = 0; s < subBases.size(); ++s) {
            const auto& basis = subBases[s];
            int dim = static_cast<int>(basis.size());
            auto& blk = conic.newPsdBlock(
                dim, con.label + (subBases.size() > 1
                                      ? "#" + std::to_string(s)
                                      : std::string()));
            for (int i = 0; i < dim; ++i) {
                squareCount[basis[i].times(basis[i])] += 1;
                for (int j = i; j < dim; ++j) {
                    Monomial m = basis[i].times(basis[j]);
                    rows[m].emplace_back(blk.entryVar(i, j), i == j ? 1.0 : 2.0);
                }
            }
        }
        // Coefficient matching: sum of Gram contributions equals the
        // expression coefficient (minus the shared margin slack on basis
        // squares when margin mode is active).
        std::map<Monomial, AffExpr, GrlexLess> target = con.expr.terms;
        for (const auto& [m, gram] : rows) target.try_emplace(m, AffExpr{});
        for (const auto& [m, e] : target) {
            ConicProblem::EqRow row;
            // A monomial outside the Gram product span still produces a
            // row, forcing its expression coefficient to zero.
            auto it = rows.find(m);
            if (it != rows.end())
                for (auto [v, a] : it->second) row.coeffs.emplace_back(v, a);
            for (auto [i, a] : e.coeffs) row.coeffs.emplace_back(i, -a);
            if (marginMode_) {
                auto sq = squareCount.find(m);
                if (sq != squareCount.end())
                    row.coeffs.emplace_back(marginVar_, double(sq->second));
            }
            row.rhs = e.constant;
            if (row.coeffs.empty() && std::abs(row.rhs) <= kCoeffDropTol) continue;
            conic.equalities.push_back(std::move(row));
        }
    }
    return out;
}

Polynomial SosProgram::recover(const ConicSolution& sol, const DecPoly& d) const {
    return d.atSolution(sol.x);
}

}  // namespace safesynth
