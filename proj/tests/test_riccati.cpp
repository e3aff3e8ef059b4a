#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "safesynth/riccati.hpp"

using namespace safesynth;

TEST_CASE("scalar CARE matches the closed form") {
    // a = b = q = r = 1: 2s - s^2 + 1 = 0  ->  s = 1 + sqrt(2)
    Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << 1.0;
    B << 1.0;
    Q << 1.0;
    R << 1.0;
    Eigen::MatrixXd S = solveCare(A, B, Q, R);
    CHECK(S(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("scalar DARE matches the closed form") {
    // a = b = q = r = 1: s^2 - s - 1 = 0  ->  s = (1 + sqrt(5)) / 2
    Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << 1.0;
    B << 1.0;
    Q << 1.0;
    R << 1.0;
    Eigen::MatrixXd S = solveDare(A, B, Q, R);
    CHECK(S(0, 0) == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-10));
}

TEST_CASE("random CARE solutions satisfy the equation and stabilize") {
    std::mt19937 rng(31415);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 4, m = 1 + trial % 2;
        Eigen::MatrixXd A(n, n), B(n, m);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) A(i, j) = dist(rng);
            for (int j = 0; j < m; ++j) B(i, j) = dist(rng);
        }
        Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd R = Eigen::MatrixXd::Identity(m, m);

        Eigen::MatrixXd S = solveCare(A, B, Q, R);
        Eigen::MatrixXd res = A.transpose() * S + S * A -
                              S * B * R.ldlt().solve(B.transpose() * S) + Q;
        CHECK(res.cwiseAbs().maxCoeff() <= 1e-7);

        Eigen::MatrixXd K = careGain(B, R, S);
        Eigen::EigenSolver<Eigen::MatrixXd> es(A - B * K);
        CHECK(es.eigenvalues().real().maxCoeff() < 0.0);
    }
}

TEST_CASE("random DARE solutions satisfy the equation and stabilize") {
    std::mt19937 rng(27182);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 4, m = 1 + trial % 2;
        Eigen::MatrixXd A(n, n), B(n, m);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) A(i, j) = 0.7 * dist(rng);
            for (int j = 0; j < m; ++j) B(i, j) = dist(rng);
        }
        Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd R = Eigen::MatrixXd::Identity(m, m);

        Eigen::MatrixXd S = solveDare(A, B, Q, R);
        Eigen::MatrixXd K = dareGain(A, B, R, S);
        Eigen::MatrixXd res =
            A.transpose() * S * A - S - A.transpose() * S * B * K + Q;
        CHECK(res.cwiseAbs().maxCoeff() <= 1e-7);

        Eigen::EigenSolver<Eigen::MatrixXd> es(A - B * K);
        CHECK(es.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
    }
}
