#include "safesynth/dynamics.hpp"

#include <stdexcept>

namespace safesynth {

ErrorDynamics buildErrorDynamics(const ProblemDefinition& p) {
    if (p.pi.size() != p.n) {
        throw std::invalid_argument("embedding pi must have one entry per tracker state");
    }

    const Universe U = p.synthesisUniverse();

    // x_i := e_i + pi_i(xhat)
    std::vector<Polynomial> xsub;
    xsub.reserve(p.n);
    for (int i = 0; i < p.n; ++i) {
        Polynomial xi = Polynomial::variable(U, "e", i) + p.pi[i].inUniverse(U);
        xsub.push_back(std::move(xi));
    }

    // closed-form planner vector field fhat(xhat) + ghat(xhat) uhat
    std::vector<Polynomial> plannerField;
    plannerField.reserve(p.nhat);
    for (int j = 0; j < p.nhat; ++j) {
        Polynomial fj = p.fhat[j].inUniverse(U);
        for (int k = 0; k < p.mhat; ++k) {
            fj += p.ghat(j, k).inUniverse(U) * Polynomial::variable(U, "uhat", k);
        }
        plannerField.push_back(std::move(fj));
    }

    ErrorDynamics dyn;
    dyn.universe = U;
    dyn.fe.entries.reserve(p.n);
    for (int i = 0; i < p.n; ++i) {
        Polynomial fi = p.f[i].substitute("x", xsub).inUniverse(U);
        for (int j = 0; j < p.nhat; ++j) {
            Polynomial dpi = p.pi[i].partial("xhat", j);
            if (dpi.isZero()) continue;
            fi -= dpi.inUniverse(U) * plannerField[j];
        }
        dyn.fe.entries.push_back(std::move(fi));
    }

    dyn.ge.rows = p.n;
    dyn.ge.cols = p.m;
    dyn.ge.entries.reserve(p.n * p.m);
    for (int i = 0; i < p.n; ++i) {
        for (int j = 0; j < p.m; ++j) {
            dyn.ge.entries.push_back(p.g(i, j).substitute("x", xsub).inUniverse(U));
        }
    }
    return dyn;
}

}  // namespace safesynth
