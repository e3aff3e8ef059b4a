#include "safesynth/riccati.hpp"

#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace safesynth {

Eigen::MatrixXd solveCare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd G = B * R.ldlt().solve(B.transpose());

    Eigen::MatrixXd H(2 * n, 2 * n);
    H << A, -G, -Q, -A.transpose();

    Eigen::EigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("care: eigendecomposition failed");

    // stack the eigenvectors of the n stable eigenvalues
    Eigen::MatrixXcd U(2 * n, n);
    int k = 0;
    for (int i = 0; i < 2 * n && k < n; ++i) {
        if (es.eigenvalues()[i].real() < 0.0) U.col(k++) = es.eigenvectors().col(i);
    }
    if (k != n) throw std::runtime_error("care: no stabilizing solution");

    Eigen::MatrixXcd U1 = U.topRows(n), U2 = U.bottomRows(n);
    Eigen::MatrixXcd Sc = U2 * U1.fullPivLu().solve(Eigen::MatrixXcd::Identity(n, n));
    if (Sc.imag().cwiseAbs().maxCoeff() > 1e-6)
        throw std::runtime_error("care: solution not real");
    Eigen::MatrixXd S = Sc.real();
    return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd careGain(const Eigen::MatrixXd& B, const Eigen::MatrixXd& R,
                         const Eigen::MatrixXd& S) {
    return R.ldlt().solve(B.transpose() * S);
}

Eigen::MatrixXd solveDare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd Ak = A;
    Eigen::MatrixXd Gk = B * R.ldlt().solve(B.transpose());
    Eigen::MatrixXd Hk = Q;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

    for (int it = 0; it < 100; ++it) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(I + Gk * Hk);
        Eigen::MatrixXd W = lu.solve(Ak);           // (I + G H)^{-1} A
        Eigen::MatrixXd V = lu.solve(Gk);           // (I + G H)^{-1} G
        Eigen::MatrixXd Hn = Hk + Ak.transpose() * Hk * W;
        Eigen::MatrixXd Gn = Gk + Ak * V * Ak.transpose();
        Eigen::MatrixXd An = Ak * W;
        double step = (Hn - Hk).cwiseAbs().maxCoeff();
        Ak = An;
        Gk = 0.5 * (Gn + Gn.transpose());
        Hk = 0.5 * (Hn + Hn.transpose());
        if (step <= 1e-14 * (1.0 + Hk.cwiseAbs().maxCoeff())) return Hk;
    }
    throw std::runtime_error("dare: doubling iteration did not converge");
}

Eigen::MatrixXd dareGain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& R, const Eigen::MatrixXd& S) {
    return (R + B.transpose() * S * B).ldlt().solve(B.transpose() * S * A);
}

}  // namespace safesynth
