#pragma once

#include <Eigen/Core>

namespace safesynth {

/// Stabilizing solution S of the continuous-time algebraic Riccati equation
///   A'S + SA - S B R^{-1} B' S + Q = 0,
/// computed from the stable invariant subspace of the Hamiltonian matrix.
/// Throws std::runtime_error when no stabilizing solution exists.
Eigen::MatrixXd solveCare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Continuous-time LQR gain K = R^{-1} B' S; u = -K x stabilizes.
Eigen::MatrixXd careGain(const Eigen::MatrixXd& B, const Eigen::MatrixXd& R,
                         const Eigen::MatrixXd& S);

/// Stabilizing solution S of the discrete-time algebraic Riccati equation
///   A'SA - S - A'SB (R + B'SB)^{-1} B'SA + Q = 0,
/// via the structure-preserving doubling algorithm.
Eigen::MatrixXd solveDare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                          const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Discrete-time LQR gain K = (R + B'SB)^{-1} B'SA; u = -K x stabilizes.
Eigen::MatrixXd dareGain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& R, const Eigen::MatrixXd& S);

}  // namespace safesynth
