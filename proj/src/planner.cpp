#include "safesynth/planner.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "safesynth/riccati.hpp"

namespace safesynth {

DiscreteMap::DiscreteMap(PolynomialVector fhat, PolynomialMatrix ghat, double ts)
    : fhat_(std::move(fhat)), ghat_(std::move(ghat)), ts_(ts) {
    if (ts <= 0) throw std::invalid_argument("sampling time must be positive");
}

Eigen::VectorXd DiscreteMap::field(const Eigen::VectorXd& xhat,
                                   const Eigen::VectorXd& uhat) const {
    Point pt{{"xhat", xhat}};
    return fhat_.eval(pt) + ghat_.eval(pt) * uhat;
}

Eigen::VectorXd DiscreteMap::step(const Eigen::VectorXd& xhat,
                                  const Eigen::VectorXd& uhat) const {
    Eigen::VectorXd k1 = field(xhat, uhat);
    Eigen::VectorXd k2 = field(xhat + 0.5 * ts_ * k1, uhat);
    Eigen::VectorXd k3 = field(xhat + 0.5 * ts_ * k2, uhat);
    Eigen::VectorXd k4 = field(xhat + ts_ * k3, uhat);
    return xhat + ts_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

DiscreteMap discretize(const PolynomialVector& fhat, const PolynomialMatrix& ghat,
                       double ts) {
    return DiscreteMap(fhat, ghat, ts);
}

namespace {

/// Dense inequality-constrained quadratic program
///   minimize 1/2 z'Hz + g'z  subject to  A z <= b,
/// solved by a log-barrier method with a slack phase for initialization.
struct QpResult {
    bool feasible = false;
    Eigen::VectorXd z;
    double objective = 0.0;
    int worstRow = -1;  // most violated row when infeasible
};

/// Newton descent of mu*(1/2 z'Hz + g'z) - sum log(b - Az) from a strictly
/// feasible start; returns the centered point.
Eigen::VectorXd center(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                       const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                       Eigen::VectorXd z, double mu) {
    const int maxNewton = 80;
    auto value = [&](const Eigen::VectorXd& zz) {
        Eigen::VectorXd s = b - A * zz;
        if (s.minCoeff() <= 0) return std::numeric_limits<double>::infinity();
        return mu * (0.5 * zz.dot(H * zz) + g.dot(zz)) - s.array().log().sum();
    };
    for (int it = 0; it < maxNewton; ++it) {
        Eigen::VectorXd s = b - A * z;
        Eigen::VectorXd sinv = s.cwiseInverse();
        Eigen::VectorXd grad = mu * (H * z + g) + A.transpose() * sinv;
        Eigen::MatrixXd hess =
            mu * H + A.transpose() * sinv.array().square().matrix().asDiagonal() * A;
        Eigen::LLT<Eigen::MatrixXd> llt(hess);
        if (llt.info() != Eigen::Success) break;
        Eigen::VectorXd dz = -llt.solve(grad);
        double decrement = -grad.dot(dz);
        if (decrement < 1e-12) break;
        double t = 1.0;
        double f0 = value(z);
        while (t > 1e-12 && value(z + t * dz) > f0 - 0.25 * t * decrement)
            t *= 0.5;
        if (t <= 1e-12) break;
        z += t * dz;
    }
    return z;
}

QpResult solveBoxQp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const int n = static_cast<int>(H.rows());
    const int m = static_cast<int>(A.rows());

    // slack phase: minimize t subject to Az - b <= t
    Eigen::MatrixXd A1(m, n + 1);
    A1.leftCols(n) = A;
    A1.col(n).setConstant(-1.0);
    Eigen::MatrixXd H1 = Eigen::MatrixXd::Zero(n + 1, n + 1);
    H1(n, n) = 1e-8;  // keeps the phase-1 Hessian well posed
    Eigen::VectorXd g1 = Eigen::VectorXd::Zero(n + 1);
    g1[n] = 1.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
    w[n] = (-b.minCoeff()) + 1.0;
    for (double mu = 1.0; mu < 1e7; mu *= 20.0) {
        w = center(H1, g1, A1, b, w, mu);
        if (w[n] < -1e-7) break;  // strictly feasible point found
    }
    Eigen::VectorXd z = w.head(n);
    Eigen::VectorXd resid = A * z - b;
    if (resid.maxCoeff() >= 0) {
        QpResult r;
        resid.maxCoeff(&r.worstRow);
        return r;
    }

    for (double mu = 1.0; m / mu > 1e-9; mu *= 20.0)
        z = center(H, g, A, b, z, mu);

    QpResult r;
    r.feasible = true;
    r.z = z;
    r.objective = 0.5 * z.dot(H * z) + g.dot(z);
    return r;
}

Eigen::MatrixXd matOrDefault(const Eigen::MatrixXd& m, const Eigen::MatrixXd& dflt) {
    return m.size() > 0 ? m : dflt;
}

nlohmann::json matToJson(const Eigen::MatrixXd& m) {
    nlohmann::json j = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

Eigen::MatrixXd matFromJson(const nlohmann::json& j) {
    const int rows = static_cast<int>(j.size());
    const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

}  // namespace

MpcPlanner::MpcPlanner(const ProblemDefinition& p, const Eigen::VectorXd& thetaBar,
                       PlannerConfig cfg)
    : nhat_(p.nhat),
      mhat_(p.mhat),
      map_(p.fhat, p.ghat, cfg.ts),
      cfg_(std::move(cfg)) {
    Point thetaPt{{"theta", thetaBar}};
    std::tie(xLo_, xHi_) = deriveBoxBounds(p.plannerStateSet, "xhat", thetaPt);
    std::tie(uLo_, uHi_) = deriveBoxBounds(p.plannerInputSet, "uhat", thetaPt);

    if (cfg_.target.size() == 0) cfg_.target = p.target;
    if (cfg_.target.size() != nhat_)
        throw std::invalid_argument("planner target has the wrong dimension");

    Eigen::MatrixXd qDflt = Eigen::MatrixXd::Identity(nhat_, nhat_);
    qDflt(0, 0) = 10.0;
    cfg_.Q = matOrDefault(cfg_.Q, qDflt);
    cfg_.R = matOrDefault(cfg_.R, Eigen::MatrixXd::Identity(mhat_, mhat_));

    if (cfg_.uRef.size() == 0) {
        // least-squares equilibrium input at the target
        Point pt{{"xhat", cfg_.target}};
        Eigen::MatrixXd B = p.ghat.eval(pt);
        Eigen::VectorXd f = p.fhat.eval(pt);
        cfg_.uRef = B.completeOrthogonalDecomposition().solve(-f);
    }

    // linearize the one-step map at (target, uRef) by central differences
    auto jacobian = [&](int wrtInput) {
        const int cols = wrtInput ? mhat_ : nhat_;
        Eigen::MatrixXd J(nhat_, cols);
        const double h = 1e-5;
        for (int c = 0; c < cols; ++c) {
            Eigen::VectorXd xp = cfg_.target, xm = cfg_.target;
            Eigen::VectorXd up = cfg_.uRef, um = cfg_.uRef;
            (wrtInput ? up[c] : xp[c]) += h;
            (wrtInput ? um[c] : xm[c]) -= h;
            J.col(c) = (map_.step(xp, up) - map_.step(xm, um)) / (2.0 * h);
        }
        return J;
    };
    Ad_ = jacobian(0);
    Bd_ = jacobian(1);
    cd_ = map_.step(cfg_.target, cfg_.uRef) - Ad_ * cfg_.target - Bd_ * cfg_.uRef;

    if (cfg_.PN.size() == 0) cfg_.PN = solveDare(Ad_, Bd_, cfg_.Q, cfg_.R);

    if (cfg_.terminalHalfWidth.size() == 0)
        cfg_.terminalHalfWidth = Eigen::VectorXd::Constant(nhat_, 0.05);
    tLo_ = (cfg_.target - cfg_.terminalHalfWidth).cwiseMax(xLo_);
    tHi_ = (cfg_.target + cfg_.terminalHalfWidth).cwiseMin(xHi_);
    if (((tHi_ - tLo_).array() < 0).any())
        throw std::invalid_argument(
            "terminal box around the target leaves the planner state set");
}

MpcSolution MpcPlanner::solve(const Eigen::VectorXd& xhat) const {
    const int N = cfg_.horizon;
    const int nu = N * mhat_;

    for (int i = 0; i < nhat_; ++i)
        if (xhat[i] < xLo_[i] - 1e-6 || xhat[i] > xHi_[i] + 1e-6)
            throw PlannerInfeasible(0, "initial planner state outside its set");

    // per-stage affine models; constant unless re-linearized below
    std::vector<Eigen::MatrixXd> A(N, Ad_), B(N, Bd_);
    std::vector<Eigen::VectorXd> c(N, cd_);

    MpcSolution sol;
    for (int pass = 0; pass <= cfg_.sqpIters; ++pass) {
        // condense: x_k = M_k U + m_k over the stacked inputs U
        std::vector<Eigen::MatrixXd> M(N + 1, Eigen::MatrixXd::Zero(nhat_, nu));
        std::vector<Eigen::VectorXd> m(N + 1);
        m[0] = xhat;
        for (int k = 0; k < N; ++k) {
            M[k + 1] = A[k] * M[k];
            M[k + 1].middleCols(k * mhat_, mhat_) += B[k];
            m[k + 1] = A[k] * m[k] + c[k];
        }

        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nu, nu);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(nu);
        double c0 = 0.0;
        auto addQuad = [&](const Eigen::MatrixXd& W, int k) {
            Eigen::VectorXd d = m[k] - cfg_.target;
            H += 2.0 * M[k].transpose() * W * M[k];
            g += 2.0 * M[k].transpose() * W * d;
            c0 += d.dot(W * d);
        };
        for (int k = 0; k < N; ++k) addQuad(cfg_.Q, k);
        addQuad(cfg_.PN, N);
        for (int k = 0; k < N; ++k) {
            H.block(k * mhat_, k * mhat_, mhat_, mhat_) += 2.0 * cfg_.R;
            g.segment(k * mhat_, mhat_) -= 2.0 * cfg_.R * cfg_.uRef;
            c0 += cfg_.uRef.dot(cfg_.R * cfg_.uRef);
        }

        // stage bounds: states k=1..N (terminal box at N), inputs k=0..N-1
        const int rows = 2 * N * nhat_ + 2 * nu;
        Eigen::MatrixXd Ain = Eigen::MatrixXd::Zero(rows, nu);
        Eigen::VectorXd bin(rows);
        std::vector<int> rowStage(rows, 0);
        int r = 0;
        for (int k = 1; k <= N; ++k) {
            const Eigen::VectorXd& lo = (k == N) ? tLo_ : xLo_;
            const Eigen::VectorXd& hi = (k == N) ? tHi_ : xHi_;
            for (int i = 0; i < nhat_; ++i) {
                Ain.row(r) = M[k].row(i);
                bin[r] = hi[i] - m[k][i];
                rowStage[r++] = k;
                Ain.row(r) = -M[k].row(i);
                bin[r] = m[k][i] - lo[i];
                rowStage[r++] = k;
            }
        }
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < mhat_; ++j) {
                Ain(r, k * mhat_ + j) = 1.0;
                bin[r] = uHi_[j];
                rowStage[r++] = k;
                Ain(r, k * mhat_ + j) = -1.0;
                bin[r] = -uLo_[j];
                rowStage[r++] = k;
            }

        QpResult qp = solveBoxQp(H, g, Ain, bin);
        if (!qp.feasible)
            throw PlannerInfeasible(
                qp.worstRow >= 0 ? rowStage[qp.worstRow] : -1,
                "planner horizon problem infeasible");

        sol.inputs.resize(N, mhat_);
        for (int k = 0; k < N; ++k)
            sol.inputs.row(k) = qp.z.segment(k * mhat_, mhat_).transpose();
        sol.states.resize(N + 1, nhat_);
        for (int k = 0; k <= N; ++k)
            sol.states.row(k) = (M[k] * qp.z + m[k]).transpose();
        sol.u0 = sol.inputs.row(0).transpose();
        sol.objective = qp.objective + c0;

        if (pass < cfg_.sqpIters) {
            // re-linearize the one-step map along the prediction
            const double h = 1e-5;
            for (int k = 0; k < N; ++k) {
                Eigen::VectorXd xk = sol.states.row(k).transpose();
                Eigen::VectorXd uk = sol.inputs.row(k).transpose();
                for (int ci = 0; ci < nhat_; ++ci) {
                    Eigen::VectorXd xp = xk, xm = xk;
                    xp[ci] += h;
                    xm[ci] -= h;
                    A[k].col(ci) = (map_.step(xp, uk) - map_.step(xm, uk)) / (2 * h);
                }
                for (int ci = 0; ci < mhat_; ++ci) {
                    Eigen::VectorXd up = uk, um = uk;
                    up[ci] += h;
                    um[ci] -= h;
                    B[k].col(ci) = (map_.step(xk, up) - map_.step(xk, um)) / (2 * h);
                }
                c[k] = map_.step(xk, uk) - A[k] * xk - B[k] * uk;
            }
        }
    }
    return sol;
}

nlohmann::json PlannerConfig::toJson() const {
    nlohmann::json j;
    j["horizon"] = horizon;
    j["ts"] = ts;
    j["sqp_iters"] = sqpIters;
    if (Q.size()) j["Q"] = matToJson(Q);
    if (R.size()) j["R"] = matToJson(R);
    if (PN.size()) j["PN"] = matToJson(PN);
    if (target.size())
        j["target"] = std::vector<double>(target.begin(), target.end());
    if (uRef.size()) j["u_ref"] = std::vector<double>(uRef.begin(), uRef.end());
    if (terminalHalfWidth.size())
        j["terminal_half_width"] =
            std::vector<double>(terminalHalfWidth.begin(), terminalHalfWidth.end());
    return j;
}

PlannerConfig PlannerConfig::fromJson(const nlohmann::json& j) {
    PlannerConfig c;
    c.horizon = j.value("horizon", c.horizon);
    c.ts = j.value("ts", c.ts);
    c.sqpIters = j.value("sqp_iters", c.sqpIters);
    auto vec = [](const nlohmann::json& v) {
        Eigen::VectorXd out(v.size());
        for (size_t i = 0; i < v.size(); ++i) out[i] = v[i].get<double>();
        return out;
    };
    if (j.contains("Q")) c.Q = matFromJson(j["Q"]);
    if (j.contains("R")) c.R = matFromJson(j["R"]);
    if (j.contains("PN")) c.PN = matFromJson(j["PN"]);
    if (j.contains("target")) c.target = vec(j["target"]);
    if (j.contains("u_ref")) c.uRef = vec(j["u_ref"]);
    if (j.contains("terminal_half_width"))
        c.terminalHalfWidth = vec(j["terminal_half_width"]);
    return c;
}

}  // namespace safesynth
