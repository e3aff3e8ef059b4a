#include "safesynth/verifier.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace safesynth {

namespace {

using Rng = std::mt19937_64;

Eigen::VectorXd uniformIn(Rng& rng, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd v(lo.size());
    for (int i = 0; i < lo.size(); ++i) v[i] = lo[i] + u(rng) * (hi[i] - lo[i]);
    return v;
}

/// Rejection sampler for one semialgebraic set, parametric in theta.
/// Per-variable bounds are derived from two sound row patterns: a linear
/// single-variable row c*v <= rhs, and a row whose left side is a sum of
/// positive-coefficient even powers of single variables (boxes, disks, and
/// the squared parametric planner rows all match). Single-variable linear
/// equalities pin their variable to zero.
class SetSampler {
  public:
    SetSampler(const SemialgebraicSet& set, const std::string& block)
        : set_(&set), block_(block), dim_(set.universe.block(block).dim) {
        pinned_.assign(dim_, false);
        for (const auto& q : set.equalities) {
            if (q.terms().size() != 1)
                throw std::runtime_error("unsupported equality in sampling set");
            const auto& [m, c] = *q.terms().begin();
            auto [bi, vi] = set.universe.locate(m.factors().at(0).first);
            if (m.degree() != 1 || set.universe.blocks()[bi].name != block_)
                throw std::runtime_error("unsupported equality in sampling set");
            (void)c;
            pinned_[vi] = true;
        }

        std::vector<bool> hasLo(dim_, false), hasHi(dim_, false);
        for (const auto& row : set.inequalities) {
            // pattern A: single linear term
            if (row.lhs.terms().size() == 1) {
                const auto& [m, c] = *row.lhs.terms().begin();
                if (m.degree() == 1) {
                    int v = varIndex(m);
                    rules_.push_back({v, 1, c, &row.rhs});
                    (c > 0 ? hasHi : hasLo)[v] = true;
                    continue;
                }
            }
            // pattern B: sum of positive even powers of single variables
            bool pure = !row.lhs.terms().empty();
            for (const auto& [m, c] : row.lhs.terms())
                pure = pure && c > 0 && m.factors().size() == 1 &&
                       m.factors()[0].second % 2 == 0;
            if (!pure) continue;
            for (const auto& [m, c] : row.lhs.terms()) {
                int v = varIndex(m);
                rules_.push_back({v, m.factors()[0].second, c, &row.rhs});
                hasLo[v] = hasHi[v] = true;
            }
        }
        for (int v = 0; v < dim_; ++v)
            if (!pinned_[v] && !(hasLo[v] && hasHi[v]))
                throw std::runtime_error("cannot derive sampling bounds for " +
                                         block + " variable " + std::to_string(v));
    }

    /// One accepted sample; `point` must already carry the theta block (and
    /// is extended with the sampled block in place).
    Eigen::VectorXd draw(Rng& rng, Point& point, int maxRejects) const {
        // bound rows may carry this block in their universe (constants do);
        // their values must not actually depend on it
        point[block_] = Eigen::VectorXd::Zero(dim_);
        Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim_, -1e30);
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim_, 1e30);
        for (const auto& r : rules_) {
            double rv = evalRhs(*r.rhs, point);
            if (r.exp == 1) {
                double b = rv / r.coeff;
                if (r.coeff > 0)
                    hi[r.var] = std::min(hi[r.var], b);
                else
                    lo[r.var] = std::max(lo[r.var], b);
            } else {
                double b = rv / r.coeff <= 0
                               ? 0.0
                               : std::pow(rv / r.coeff, 1.0 / r.exp);
                hi[r.var] = std::min(hi[r.var], b);
                lo[r.var] = std::max(lo[r.var], -b);
            }
        }
        for (int v = 0; v < dim_; ++v)
            if (pinned_[v]) lo[v] = hi[v] = 0.0;

        for (int attempt = 0; attempt < maxRejects; ++attempt) {
            Eigen::VectorXd cand = uniformIn(rng, lo, hi);
            point[block_] = cand;
            if (accepted(point)) return cand;
        }
        throw std::runtime_error("rejection sampling stalled for block " + block_);
    }

  private:
    struct Rule {
        int var;
        int exp;       // 1 for linear rows, the even power otherwise
        double coeff;  // positive except for lower-bound linear rows
        const Polynomial* rhs;
    };

    int varIndex(const Monomial& m) const {
        auto [bi, vi] = set_->universe.locate(m.factors().at(0).first);
        if (set_->universe.blocks()[bi].name != block_)
            throw std::runtime_error("sampling set row mixes blocks");
        return vi;
    }

    static double evalRhs(const Polynomial& rhs, const Point& point) {
        return rhs.eval(point);
    }

    bool accepted(const Point& point) const {
        for (const auto& row : set_->inequalities)
            if (row.margin(point) < -kSetTol) return false;
        return true;
    }

    const SemialgebraicSet* set_;
    std::string block_;
    int dim_;
    std::vector<bool> pinned_;
    std::vector<Rule> rules_;
};

/// Sampler for the error bound {e : V(e, theta) <= gamma}: rejection from a
/// box sized by the eigenvalues of V's quadratic part, with bisection along
/// random directions for level-surface points.
class LevelSetSampler {
  public:
    LevelSetSampler(const Polynomial& V, double gamma, int n)
        : V_(&V), gamma_(gamma), n_(n) {
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                hess_.push_back(V.partial("e", i).partial("e", j));
    }

    double radius(Point& point) const {
        Eigen::MatrixXd H(n_, n_);
        point["e"] = Eigen::VectorXd::Zero(n_);
        int k = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j) {
                H(i, j) = H(j, i) = hess_[k].eval(point);
                ++k;
            }
        double lmin =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff();
        if (lmin <= 0)
            throw std::runtime_error(
                "storage function is not positive definite near the origin");
        return 1.5 * std::sqrt(2.0 * gamma_ / lmin);
    }

    Eigen::VectorXd interior(Rng& rng, Point& point, int maxRejects) const {
        const double r = radius(point);
        Eigen::VectorXd lo = Eigen::VectorXd::Constant(n_, -r);
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(n_, r);
        for (int attempt = 0; attempt < maxRejects; ++attempt) {
            Eigen::VectorXd e = uniformIn(rng, lo, hi);
            point["e"] = e;
            if (V_->eval(point) <= gamma_) return e;
        }
        throw std::runtime_error("rejection sampling stalled for the error bound");
    }

    /// A point on {V = gamma}, or nullopt when the sampled ray never crosses
    /// the level (possible for directions leaving the bounding box first).
    std::optional<Eigen::VectorXd> boundary(Rng& rng, Point& point) const {
        const double r = radius(point);
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::VectorXd d(n_);
        for (int i = 0; i < n_; ++i) d[i] = g(rng);
        double nrm = d.norm();
        if (nrm < 1e-12) return std::nullopt;
        d /= nrm;

        auto value = [&](double s) {
            point["e"] = s * d;
            return V_->eval(point) - gamma_;
        };
        if (value(0.0) >= 0) return std::nullopt;
        double hi = r / 8.0;
        int doublings = 0;
        while (value(hi) < 0) {
            hi *= 2.0;
            if (++doublings > 12) return std::nullopt;
        }
        double lo = 0.0;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            (value(mid) < 0 ? lo : hi) = mid;
        }
        point["e"] = hi * d;
        return hi * d;
    }

  private:
    const Polynomial* V_;
    double gamma_;
    int n_;
    std::vector<Polynomial> hess_;
};

Eigen::VectorXd sampleTheta(Rng& rng, const Eigen::VectorXd& upper) {
    return uniformIn(rng, Eigen::VectorXd::Zero(upper.size()), upper);
}

void requireSupported(const ProblemDefinition& p) {
    if (p.ndelta > 0)
        throw std::runtime_error("disturbance blocks are not supported by the verifier");
}

CheckResult finish(std::string name, double worst, double tol, int samples) {
    CheckResult r;
    r.check = std::move(name);
    r.worst = worst;
    r.tolerance = tol;
    r.samples = samples;
    r.pass = worst <= tol;
    return r;
}

}  // namespace

CheckResult verifyDecrease(const ProblemDefinition& p, const Certificate& cert,
                           const SamplingPlan& plan) {
    requireSupported(p);
    ErrorDynamics dyn = buildErrorDynamics(p);
    Universe U = p.synthesisUniverse();

    Polynomial lie = Polynomial::zero(U);
    for (int i = 0; i < p.n; ++i) {
        Polynomial rate = dyn.fe[i];
        for (int j = 0; j < p.m; ++j) rate += dyn.ge(i, j) * cert.kappa[j];
        lie += cert.V.partial("e", i).inUniverse(U) * rate;
    }

    SetSampler xhat(p.plannerStateSet, "xhat");
    SetSampler uhat(p.plannerInputSet, "uhat");
    LevelSetSampler level(cert.V, cert.gamma, p.n);

    Rng rng(plan.seed);
    double worst = -std::numeric_limits<double>::infinity();
    int used = 0;
    for (int k = 0; k < plan.samples; ++k) {
        Point pt;
        pt["theta"] = sampleTheta(rng, p.thetaBox.upper);
        auto e = level.boundary(rng, pt);
        if (!e) continue;
        xhat.draw(rng, pt, plan.maxRejects);
        uhat.draw(rng, pt, plan.maxRejects);
        pt["e"] = *e;
        worst = std::max(worst, lie.eval(pt));
        ++used;
    }
    return finish("decrease", worst, plan.decreaseTol, used);
}

CheckResult verifyInputBound(const ProblemDefinition& p, const Certificate& cert,
                             const SamplingPlan& plan) {
    requireSupported(p);
    SetSampler xhat(p.plannerStateSet, "xhat");
    SetSampler uhat(p.plannerInputSet, "uhat");
    LevelSetSampler level(cert.V, cert.gamma, p.n);

    Rng rng(plan.seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < plan.samples; ++k) {
        Point pt;
        pt["theta"] = sampleTheta(rng, p.thetaBox.upper);
        level.interior(rng, pt, plan.maxRejects);
        xhat.draw(rng, pt, plan.maxRejects);
        uhat.draw(rng, pt, plan.maxRejects);
        Eigen::VectorXd u(p.m);
        for (int j = 0; j < p.m; ++j) u[j] = cert.kappa[j].eval(pt);
        worst = std::max(worst, (p.inputH * u - p.inputh).maxCoeff());
    }
    return finish("input-bound", worst, plan.inputTol, plan.samples);
}

CheckResult verifyContainment(const ProblemDefinition& p, const Certificate& cert,
                              const Eigen::VectorXd& thetaBar,
                              const SamplingPlan& plan) {
    requireSupported(p);
    // a bound slightly beyond the parameter box is allowed: probing whether
    // containment breaks just past a certified bound is a useful diagnostic
    if ((thetaBar.array() < 0).any())
        throw std::runtime_error("parameter bound has negative entries");
    SetSampler xhat(p.plannerStateSet, "xhat");
    LevelSetSampler level(cert.V, cert.gamma, p.n);

    Rng rng(plan.seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < plan.samples; ++k) {
        Point pt;
        pt["theta"] = sampleTheta(rng, thetaBar);
        Eigen::VectorXd xh = xhat.draw(rng, pt, plan.maxRejects);
        Eigen::VectorXd e = level.interior(rng, pt, plan.maxRejects);

        Point embed{{"xhat", xh}};
        Eigen::VectorXd x(p.n);
        for (int i = 0; i < p.n; ++i) x[i] = p.pi[i].eval(embed) + e[i];
        Point xpt{{"x", x}};
        for (const auto& row : p.stateSet.inequalities)
            worst = std::max(worst, -row.margin(xpt));
    }
    return finish("containment", worst, plan.containTol, plan.samples);
}

CheckResult verifyMonotonicity(const ProblemDefinition& p, const Certificate& cert,
                               const SamplingPlan& plan) {
    requireSupported(p);
    LevelSetSampler level(cert.V, cert.gamma, p.n);

    Rng rng(plan.seed);
    // box the error samples by the sub-level extent at both box corners
    Point corner{{"theta", Eigen::VectorXd::Zero(p.ntheta)}};
    double r = level.radius(corner);
    corner["theta"] = p.thetaBox.upper;
    r = std::max(r, level.radius(corner));

    double worst = -std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < plan.samples; ++k) {
        Eigen::VectorXd e =
            uniformIn(rng, Eigen::VectorXd::Constant(p.n, -r),
                      Eigen::VectorXd::Constant(p.n, r));
        Eigen::VectorXd a = sampleTheta(rng, p.thetaBox.upper);
        Eigen::VectorXd b(a.size());
        for (int i = 0; i < a.size(); ++i)
            b[i] = a[i] + u(rng) * (p.thetaBox.upper[i] - a[i]);
        Point pa{{"e", e}, {"theta", a}};
        Point pb{{"e", e}, {"theta", b}};
        worst = std::max(worst, cert.V.eval(pb) - cert.V.eval(pa));
    }
    return finish("monotonicity", worst, plan.monotoneTol, plan.samples);
}

CheckResult verifyInitialSet(const ProblemDefinition& p, const Certificate& cert,
                             const SamplingPlan& plan) {
    requireSupported(p);
    SetSampler omega(p.omega, "e");

    Rng rng(plan.seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < plan.samples; ++k) {
        Point pt;
        pt["theta"] = sampleTheta(rng, p.thetaBox.upper);
        omega.draw(rng, pt, plan.maxRejects);
        worst = std::max(worst, cert.V.eval(pt) - cert.gamma);
    }
    return finish("initial-set", worst, plan.initialSetTol, plan.samples);
}

nlohmann::json CheckResult::toJson() const {
    return {{"check", check},
            {"pass", pass},
            {"worst", worst},
            {"tolerance", tolerance},
            {"samples", samples}};
}

}  // namespace safesynth
