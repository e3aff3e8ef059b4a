#include <cmath>
#include <iostream>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "safesynth/conic.hpp"

namespace safesynth {

namespace {

// Barrier interior-point method on the canonical problem form. Intended for
// small and medium instances; large SOS programs go through the scs backend.
//
// Internally solves  min c'y  s.t.  A y = b,  S_j(y) >= 0,
// where each cone is either a PSD block of variables (optionally shifted by
// a margin variable t during phase one) or a one-dimensional affine margin
// from a linear row.
class IpmBackend : public ConicBackend {
  public:
    std::string name() const override { return "ipm"; }

    ConicSolution solve(const ConicProblem& p, const SolveOptions& opt) override {
        build(p);

        ConicSolution sol;

        // ---- phase one: maximize the cone margin t (capped at 1) ----
        // start from the min-norm solution of the equalities; every later
        // iterate stays exactly feasible (null-space parameterization)
        Eigen::VectorXd y;
        if (A_.rows() > 0) {
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A_);
            y = cod.solve(b_);
            double res = (A_ * y - b_).lpNorm<Eigen::Infinity>();
            if (res > 1e-8 * (1.0 + b_.lpNorm<Eigen::Infinity>())) {
                sol.status = SolveStatus::Infeasible;
                sol.solverInfo = "ipm: inconsistent equalities, residual " +
                                 std::to_string(res);
                return sol;
            }
        } else {
            y = Eigen::VectorXd::Zero(ny_);
        }
        y[tVar_] = 0.0;
        double m0 = minMargin(y);
        y[tVar_] = std::isfinite(m0) ? std::min(m0 - 1.0, 0.5) : 0.5;

        Eigen::VectorXd cPhase1 = Eigen::VectorXd::Zero(ny_);
        cPhase1[tVar_] = -1.0;
        PathResult r1 = followPath(y, cPhase1, /*phase1=*/true, opt);
        if (!r1.ok) {
            sol.status = SolveStatus::NumericalFailure;
            sol.solverInfo = "ipm: phase one failed";
            return sol;
        }
        double tStar = r1.y[tVar_];
        if (tStar <= 1e-9) {
            sol.status = SolveStatus::Infeasible;
            sol.solverInfo = "ipm: max cone margin " + std::to_string(tStar);
            return sol;
        }

        // ---- phase two: original objective from the interior point ----
        Eigen::VectorXd c2 = Eigen::VectorXd::Zero(ny_);
        for (auto [i, a] : p.objective) c2[i] += a;
        bool pureFeasibility = p.objective.empty();

        Eigen::VectorXd y2 = r1.y;
        y2[tVar_] = 0.0;  // t pinned to zero by an extra equality in phase two
        PathResult r2;
        if (pureFeasibility) {
            r2.ok = true;
            r2.y = y2;  // margin-maximized point is a fine witness
        } else {
            r2 = followPath(y2, c2, /*phase1=*/false, opt);
        }
        if (!r2.ok) {
            if (r2.unbounded) {
                sol.status = SolveStatus::Unbounded;
                sol.solverInfo = "ipm: objective unbounded below";
            } else {
                sol.status = SolveStatus::NumericalFailure;
                sol.solverInfo = "ipm: phase two failed";
            }
            return sol;
        }

        if (b_.size() > 0) {
            double eqRes = (A_ * r2.y - b_).lpNorm<Eigen::Infinity>();
            if (eqRes > 1e-6 * (1.0 + b_.lpNorm<Eigen::Infinity>())) {
                sol.status = SolveStatus::NumericalFailure;
                sol.solverInfo = "ipm: equality residual " + std::to_string(eqRes);
                return sol;
            }
        }
        sol.status = SolveStatus::Optimal;
        sol.x = r2.y.head(p.numVars);
        sol.objective = c2.head(p.numVars).dot(sol.x) + p.objectiveConstant;
        sol.maxPsdResidual = std::max(0.0, -p.minBlockEigenvalue(sol.x));
        sol.solverInfo = "ipm: converged, margin " + std::to_string(tStar);
        return sol;
    }

  private:
    struct Cone {
        int dim = 0;
        // matrix entries: upper-triangle row-major list of variable indices,
        // or for linear margins a single affine expression
        std::vector<int> varIdx;                      // PSD block cones
        std::vector<std::pair<int, double>> coeffs;   // 1x1 affine cones
        double offset = 0.0;                          // 1x1 affine cones
        bool shiftByT = false;
    };

    int ny_ = 0;
    int tVar_ = 0;
    std::vector<Cone> cones_;
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;

    void build(const ConicProblem& p) {
        ny_ = p.numVars + 1;
        tVar_ = p.numVars;
        cones_.clear();

        for (const auto& blk : p.blocks) {
            Cone c;
            c.dim = blk.dim;
            c.varIdx = blk.varIdx;
            c.shiftByT = true;
            cones_.push_back(std::move(c));
        }
        for (const auto& lin : p.linears) {
            if (lin.lo > -1e29) {
                Cone c;
                c.dim = 1;
                c.coeffs = lin.coeffs;
                c.offset = -lin.lo;
                c.shiftByT = true;
                cones_.push_back(std::move(c));
                // S = a'x - lo  >= 0  -> coeffs keep sign
            }
            if (lin.hi < 1e29) {
                Cone c;
                c.dim = 1;
                for (auto [i, a] : lin.coeffs) c.coeffs.push_back({i, -a});
                c.offset = lin.hi;
                c.shiftByT = true;
                cones_.push_back(std::move(c));
            }
        }
        // cap on the phase-one margin: 1 - t >= 0 (never shifted)
        {
            Cone c;
            c.dim = 1;
            c.coeffs.push_back({tVar_, -1.0});
            c.offset = 1.0;
            cones_.push_back(std::move(c));
        }

        A_.setZero(static_cast<int>(p.equalities.size()), ny_);
        b_.resize(static_cast<int>(p.equalities.size()));
        for (int r = 0; r < static_cast<int>(p.equalities.size()); ++r) {
            for (auto [i, a] : p.equalities[r].coeffs) A_(r, i) += a;
            b_[r] = p.equalities[r].rhs;
        }
    }

    Eigen::MatrixXd coneMatrix(const Cone& c, const Eigen::VectorXd& y) const {
        if (c.varIdx.empty()) {
            double s = c.offset;
            for (auto [i, a] : c.coeffs) s += a * y[i];
            if (c.shiftByT) s -= y[tVar_];
            return Eigen::MatrixXd::Constant(1, 1, s);
        }
        Eigen::MatrixXd S(c.dim, c.dim);
        int off = 0;
        for (int i = 0; i < c.dim; ++i)
            for (int j = i; j < c.dim; ++j) {
                S(i, j) = S(j, i) = y[c.varIdx[off]];
                ++off;
            }
        if (c.shiftByT) S.diagonal().array() -= y[tVar_];
        return S;
    }

    double minMargin(const Eigen::VectorXd& y) const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : cones_) {
            if (c.shiftByT) {
                Eigen::MatrixXd S = coneMatrix(c, y);
                if (c.dim == 1) {
                    m = std::min(m, S(0, 0));
                } else {
                    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                        S, Eigen::EigenvaluesOnly);
                    m = std::min(m, es.eigenvalues().minCoeff());
                }
            }
        }
        return m;
    }

    bool interior(const Eigen::VectorXd& y) const {
        for (const auto& c : cones_) {
            Eigen::MatrixXd S = coneMatrix(c, y);
            if (c.dim == 1) {
                if (S(0, 0) <= 0.0) return false;
            } else {
                Eigen::LLT<Eigen::MatrixXd> llt(S);
                if (llt.info() != Eigen::Success) return false;
            }
        }
        return true;
    }

    double barrier(const Eigen::VectorXd& y) const {
        double f = 0.0;
        for (const auto& c : cones_) {
            Eigen::MatrixXd S = coneMatrix(c, y);
            if (c.dim == 1) {
                if (S(0, 0) <= 0.0) return std::numeric_limits<double>::infinity();
                f -= std::log(S(0, 0));
            } else {
                Eigen::LLT<Eigen::MatrixXd> llt(S);
                if (llt.info() != Eigen::Success)
                    return std::numeric_limits<double>::infinity();
                f -= 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
            }
        }
        return f;
    }

    // gradient and Hessian of the log-barrier at y
    void barrierDerivs(const Eigen::VectorXd& y, Eigen::VectorXd& g,
                       Eigen::MatrixXd& H) const {
        g.setZero(ny_);
        H.setZero(ny_, ny_);
        for (const auto& c : cones_) {
            Eigen::MatrixXd S = coneMatrix(c, y);
            if (c.varIdx.empty()) {  // affine 1x1 cone
                double s = S(0, 0);
                std::vector<std::pair<int, double>> a = c.coeffs;
                if (c.shiftByT) a.push_back({tVar_, -1.0});
                for (auto [i, ai] : a) {
                    g[i] -= ai / s;
                    for (auto [j, aj] : a) H(i, j) += ai * aj / (s * s);
                }
                continue;
            }
            Eigen::MatrixXd M = S.inverse();
            Eigen::MatrixXd M2 = M * M;
            const int d = c.dim;
            // entry list: (varIdx, i, j)
            struct E { int v, i, j; };
            std::vector<E> entries;
            entries.reserve(c.varIdx.size() + 1);
            int off = 0;
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j) entries.push_back({c.varIdx[off++], i, j});

            for (const auto& e : entries) {
                double gv = (e.i == e.j) ? M(e.i, e.i) : 2.0 * M(e.i, e.j);
                g[e.v] -= gv;
            }
            if (c.shiftByT) g[tVar_] += M.trace();

            for (size_t p = 0; p < entries.size(); ++p) {
                const auto& ep = entries[p];
                for (size_t q = p; q < entries.size(); ++q) {
                    const auto& eq = entries[q];
                    double h;
                    if (ep.i == ep.j && eq.i == eq.j) {
                        h = M(ep.i, eq.i) * M(ep.i, eq.i);
                    } else if (ep.i == ep.j) {
                        h = 2.0 * M(ep.i, eq.i) * M(ep.i, eq.j);
                    } else if (eq.i == eq.j) {
                        h = 2.0 * M(eq.i, ep.i) * M(eq.i, ep.j);
                    } else {
                        h = 2.0 * (M(ep.i, eq.i) * M(ep.j, eq.j) +
                                   M(ep.i, eq.j) * M(ep.j, eq.i));
                    }
                    H(ep.v, eq.v) += h;
                    if (ep.v != eq.v) H(eq.v, ep.v) += h;
                }
                if (c.shiftByT) {
                    double h = (ep.i == ep.j) ? -M2(ep.i, ep.i) : -2.0 * M2(ep.i, ep.j);
                    H(ep.v, tVar_) += h;
                    H(tVar_, ep.v) += h;
                }
            }
            if (c.shiftByT) H(tVar_, tVar_) += M2.trace();
        }
    }

    struct PathResult {
        bool ok = false;
        bool unbounded = false;
        Eigen::VectorXd y;
    };

    PathResult followPath(Eigen::VectorXd y, const Eigen::VectorXd& c, bool phase1,
                          const SolveOptions& opt) const {
        PathResult res;
        if (!interior(y)) return res;

        // null-space parameterization of the equalities: y = y + N w keeps
        // every iterate exactly feasible, and the reduced Hessian is PSD
        Eigen::MatrixXd A = A_;
        Eigen::VectorXd b = b_;
        if (!phase1) {
            // pin the margin variable at zero
            A.conservativeResize(A.rows() + 1, Eigen::NoChange);
            A.row(A.rows() - 1).setZero();
            A(A.rows() - 1, tVar_) = 1.0;
            b.conservativeResize(b.size() + 1);
            b[b.size() - 1] = 0.0;
        }
        Eigen::MatrixXd N;
        if (A.rows() > 0) {
            N = Eigen::FullPivLU<Eigen::MatrixXd>(A).kernel();
            if (N.cols() == 1 && N.isZero()) N.resize(ny_, 0);
        } else {
            N = Eigen::MatrixXd::Identity(ny_, ny_);
        }
        if (N.cols() == 0) {  // equalities determine the point completely
            res.ok = true;
            res.y = y;
            return res;
        }

        double mu = 10.0;
        const double muFinal = std::max(opt.eps * 1e-2, 1e-12);

        Eigen::VectorXd g;
        Eigen::MatrixXd H;

        for (int outer = 0; outer < 120 && mu > muFinal; ++outer, mu *= 0.2) {
            for (int it = 0; it < 80; ++it) {
                barrierDerivs(y, g, H);
                Eigen::VectorXd grad = c / mu + g;
                Eigen::VectorXd gw = N.transpose() * grad;
                Eigen::MatrixXd Hw = N.transpose() * H * N;
                Hw.diagonal().array() += 1e-12;

                Eigen::VectorXd dw = Hw.ldlt().solve(-gw);
                Eigen::VectorXd dy = N * dw;
                double lambda2 = -gw.dot(dw);

                double f0 = c.dot(y) / mu + barrier(y);
                double alpha = 1.0;
                bool stepped = false;
                for (int ls = 0; ls < 60; ++ls) {
                    Eigen::VectorXd yn = y + alpha * dy;
                    if (interior(yn)) {
                        double fn = c.dot(yn) / mu + barrier(yn);
                        if (fn < f0 - 1e-13 * std::abs(f0)) {
                            y = yn;
                            stepped = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if (opt.verbose)
                    std::cerr << "ipm mu=" << mu << " it=" << it << " t=" << y[tVar_]
                              << " obj=" << c.dot(y) << " l2=" << lambda2 << "\n";
                if (!stepped) break;
                if (std::abs(lambda2) < 1e-9) break;
            }
            if (c.dot(y) < -1e12) {
                res.unbounded = true;
                return res;
            }
            // phase one can stop once a comfortably interior point exists
            if (phase1 && y[tVar_] > 0.5) break;
        }
        res.ok = true;
        res.y = y;
        return res;
    }
};

}  // namespace

std::unique_ptr<ConicBackend> makeIpmBackend() {
    return std::make_unique<IpmBackend>();
}

}  // namespace safesynth
