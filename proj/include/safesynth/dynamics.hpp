#pragma once

#include "safesynth/models.hpp"

namespace safesynth {

/// Tracking-error dynamics  de/dt = f_e(e, xhat, uhat[, delta]) +
/// g_e(e, xhat[, delta]) u  obtained from the tracker, the planner, and the
/// embedding pi:
///   f_e = f(e + pi(xhat), delta) - (d pi / d xhat) (fhat + ghat uhat)
///   g_e = g(e + pi(xhat), delta)
/// All entries live in the problem's synthesis universe.
struct ErrorDynamics {
    Universe universe;
    PolynomialVector fe;  // length n
    PolynomialMatrix ge;  // n x m
};

ErrorDynamics buildErrorDynamics(const ProblemDefinition& p);

}  // namespace safesynth
