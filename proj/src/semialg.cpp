#include "safesynth/semialg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace safesynth {

double ConstraintRow::margin(const Point& p) const {
    return rhs.eval(p) - lhs.eval(p);
}

bool ThetaBox::contains(const Eigen::VectorXd& theta, double tol) const {
    if (theta.size() != upper.size()) return false;
    for (int i = 0; i < theta.size(); ++i)
        if (theta[i] < -tol || theta[i] > upper[i] + tol) return false;
    return true;
}

Polynomial ThetaBox::boxPolynomial(const Universe& u, int i) const {
    Polynomial th = Polynomial::variable(u, "theta", i);
    return th * (th - upper[i]);
}

bool SemialgebraicSet::contains(const Point& p, double tol) const {
    for (const auto& row : inequalities)
        if (row.margin(p) < -tol) return false;
    for (const auto& eq : equalities)
        if (std::abs(eq.eval(p)) > tol) return false;
    return true;
}

double SemialgebraicSet::worstMargin(const Point& p) const {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& row : inequalities) worst = std::min(worst, row.margin(p));
    return worst;
}

SemialgebraicSet SemialgebraicSet::instantiate(const Eigen::VectorXd& theta,
                                               const ThetaBox& box) const {
    if (!box.contains(theta))
        throw std::invalid_argument("instantiate: theta outside Theta box");
    SemialgebraicSet out;
    out.universe = universe;
    out.equalities = equalities;
    out.inequalities.reserve(inequalities.size());
    for (const auto& row : inequalities) {
        ConstraintRow r;
        r.lhs = row.lhs;
        if (row.rhs.universe().hasBlock("theta")) {
            const int n = row.rhs.universe().block("theta").dim;
            std::vector<Polynomial> vals;
            Universe empty;
            for (int i = 0; i < n; ++i)
                vals.push_back(Polynomial::constant(empty, theta[i]));
            r.rhs = row.rhs.substitute("theta", vals);
        } else {
            r.rhs = row.rhs;
        }
        out.inequalities.push_back(std::move(r));
    }
    return out;
}

bool SemialgebraicSet::rhsMonotoneOnBox(const ThetaBox& box, int gridPerAxis,
                                        double tol) const {
    const int n = box.dim();
    for (const auto& row : inequalities) {
        if (!row.rhs.universe().hasBlock("theta")) continue;
        for (int i = 0; i < n; ++i) {
            Polynomial d = row.rhs.partial("theta", i);
            if (d.isZero()) continue;
            // walk a grid over the box
            std::vector<int> idx(n, 0);
            bool done = false;
            while (!done) {
                Eigen::VectorXd theta(n);
                for (int k = 0; k < n; ++k)
                    theta[k] = box.upper[k] * idx[k] / std::max(1, gridPerAxis - 1);
                Point p;
                p["theta"] = theta;
                // supply zeros for any other blocks the rhs mentions
                for (const auto& blk : d.universe().blocks())
                    if (blk.name != "theta")
                        p[blk.name] = Eigen::VectorXd::Zero(blk.dim);
                if (d.eval(p) < -tol) return false;
                int k = 0;
                for (; k < n; ++k) {
                    if (++idx[k] < gridPerAxis) break;
                    idx[k] = 0;
                }
                done = (k == n);
            }
        }
    }
    return true;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> deriveBoxBounds(
    const SemialgebraicSet& set, const std::string& block, const Point& point) {
    const int dim = set.universe.block(block).dim;
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -1e30);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, 1e30);

    // right-hand sides may carry this block in their universe (constants
    // do); supply zeros so they evaluate without depending on it
    Point pt = point;
    pt[block] = Eigen::VectorXd::Zero(dim);

    auto varIn = [&](const Monomial& m) {
        auto [bi, vi] = set.universe.locate(m.factors().at(0).first);
        return set.universe.blocks()[bi].name == block ? vi : -1;
    };

    // single-variable linear equalities pin a coordinate: c*v + d = 0
    for (const auto& eq : set.equalities) {
        double c = 0.0, d = 0.0;
        int v = -1;
        bool simple = !eq.terms().empty();
        for (const auto& [m, coeff] : eq.terms()) {
            if (m.degree() == 0) {
                d = coeff;
            } else if (m.degree() == 1 && v < 0 && varIn(m) >= 0) {
                v = varIn(m);
                c = coeff;
            } else {
                simple = false;
            }
        }
        if (simple && v >= 0) lo[v] = hi[v] = -d / c;
    }

    for (const auto& row : set.inequalities) {
        // pattern A: single linear term
        if (row.lhs.terms().size() == 1) {
            const auto& [m, c] = *row.lhs.terms().begin();
            if (m.degree() == 1) {
                int v = varIn(m);
                if (v < 0) continue;
                double b = row.rhs.eval(pt) / c;
                if (c > 0)
                    hi[v] = std::min(hi[v], b);
                else
                    lo[v] = std::max(lo[v], b);
                continue;
            }
        }
        // pattern B: sum of positive even powers of single variables
        bool pure = !row.lhs.terms().empty();
        for (const auto& [m, c] : row.lhs.terms())
            pure = pure && c > 0 && m.factors().size() == 1 &&
                   m.factors()[0].second % 2 == 0 && varIn(m) >= 0;
        if (!pure) continue;
        double rv = row.rhs.eval(pt);
        for (const auto& [m, c] : row.lhs.terms()) {
            int v = varIn(m);
            double b = rv / c <= 0 ? 0.0 : std::pow(rv / c, 1.0 / m.factors()[0].second);
            hi[v] = std::min(hi[v], b);
            lo[v] = std::max(lo[v], -b);
        }
    }
    for (int v = 0; v < dim; ++v)
        if (lo[v] < -1e29 || hi[v] > 1e29)
            throw std::runtime_error("cannot derive interval bounds for " + block +
                                     " variable " + std::to_string(v));
    return {lo, hi};
}

}  // namespace safesynth
