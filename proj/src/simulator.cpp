#include "safesynth/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace safesynth {

SimTrace simulate(const ProblemDefinition& p, const Certificate& cert,
                  const Eigen::VectorXd& theta, const SimConfig& cfg) {
    if (p.ndelta > 0)
        throw std::runtime_error("simulate: disturbance channels not supported");
    if (!p.thetaBox.contains(theta))
        throw std::invalid_argument("simulate: theta outside the parameter box");
    if (cfg.innerSteps < 1 || cfg.duration <= 0)
        throw std::invalid_argument("simulate: bad duration or substep count");

    MpcPlanner planner(p, theta, cfg.planner);
    const double ts = planner.config().ts;
    const int periods = static_cast<int>(std::ceil(cfg.duration / ts - 1e-9));
    const double h = ts / cfg.innerSteps;

    SemialgebraicSet plannerState = p.plannerStateSet.instantiate(theta, p.thetaBox);
    SemialgebraicSet plannerInput = p.plannerInputSet.instantiate(theta, p.thetaBox);

    Eigen::VectorXd x = p.x0, xhat = p.xhat0;

    // evaluation point shared by kappa, V and the vector fields
    Point pt;
    pt["theta"] = theta;

    auto err = [&](const Eigen::VectorXd& xv,
                   const Eigen::VectorXd& xh) -> Eigen::VectorXd {
        Point q;
        q["xhat"] = xh;
        return xv - p.pi.eval(q);
    };
    auto trackerInput = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& xh,
                            const Eigen::VectorXd& uh) {
        pt["e"] = err(xv, xh);
        pt["xhat"] = xh;
        pt["uhat"] = uh;
        return cert.kappa.eval(pt);
    };
    // joint field of (x, xhat) under the held planner input
    auto field = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& xh,
                     const Eigen::VectorXd& uh,
                     Eigen::VectorXd& dx, Eigen::VectorXd& dxh) {
        Eigen::VectorXd u = trackerInput(xv, xh, uh);
        Point qx;
        qx["x"] = xv;
        dx = p.f.eval(qx) + p.g.eval(qx) * u;
        Point qh;
        qh["xhat"] = xh;
        dxh = p.fhat.eval(qh) + p.ghat.eval(qh) * uh;
    };

    SimTrace trace;
    trace.theta = theta;
    trace.gamma = cert.gamma;
    trace.status = "completed";

    auto record = [&](double t, const Eigen::VectorXd& uh) {
        SimSample s;
        s.t = t;
        s.x = x;
        s.xhat = xhat;
        s.e = err(x, xhat);
        s.uhat = uh;
        s.u = trackerInput(x, xhat, uh);
        Point q;
        q["e"] = s.e;
        q["theta"] = theta;
        s.v = cert.V.eval(q);
        Point qx;
        qx["x"] = x;
        s.stateMargin = p.stateSet.worstMargin(qx);
        s.inputMargin = (p.inputh - p.inputH * s.u).minCoeff();
        Point qh;
        qh["xhat"] = xhat;
        s.plannerStateMargin = plannerState.worstMargin(qh);
        Point qu;
        qu["uhat"] = uh;
        s.plannerInputMargin = plannerInput.worstMargin(qu);
        trace.samples.push_back(std::move(s));
    };

    for (int k = 0; k < periods; ++k) {
        Eigen::VectorXd uhat;
        try {
            uhat = planner.solve(xhat).u0;
        } catch (const PlannerInfeasible& ex) {
            trace.status = "planner-infeasible";
            trace.plannerFailStage = ex.stage();
            return trace;
        }
        record(k * ts, uhat);

        for (int i = 0; i < cfg.innerSteps; ++i) {
            Eigen::VectorXd k1x, k1h, k2x, k2h, k3x, k3h, k4x, k4h;
            field(x, xhat, uhat, k1x, k1h);
            field(x + 0.5 * h * k1x, xhat + 0.5 * h * k1h, uhat, k2x, k2h);
            field(x + 0.5 * h * k2x, xhat + 0.5 * h * k2h, uhat, k3x, k3h);
            field(x + h * k3x, xhat + h * k3h, uhat, k4x, k4h);
            x += (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x);
            xhat += (h / 6.0) * (k1h + 2 * k2h + 2 * k3h + k4h);
        }
        if (k == periods - 1)
            record((k + 1) * ts, uhat);  // final sample under the last hold
    }
    return trace;
}

double checkContainment(const SimTrace& trace, const Certificate& cert,
                        const Eigen::VectorXd& theta) {
    double worst = -std::numeric_limits<double>::infinity();
    Point q;
    q["theta"] = theta;
    for (const auto& s : trace.samples) {
        q["e"] = s.e;
        worst = std::max(worst, cert.V.eval(q) - cert.gamma);
    }
    return worst;
}

nlohmann::json SimTrace::summaryJson() const {
    nlohmann::json j;
    j["status"] = status;
    j["samples"] = samples.size();
    j["theta"] = std::vector<double>(theta.begin(), theta.end());
    j["gamma"] = gamma;
    if (plannerFailStage >= 0) j["planner_fail_stage"] = plannerFailStage;
    if (samples.empty()) return j;

    double vMax = -std::numeric_limits<double>::infinity();
    double sMin = std::numeric_limits<double>::infinity(), iMin = sMin,
           psMin = sMin, piMin = sMin;
    for (const auto& s : samples) {
        vMax = std::max(vMax, s.v);
        sMin = std::min(sMin, s.stateMargin);
        iMin = std::min(iMin, s.inputMargin);
        psMin = std::min(psMin, s.plannerStateMargin);
        piMin = std::min(piMin, s.plannerInputMargin);
    }
    j["duration"] = samples.back().t;
    j["v_max"] = vMax;
    j["containment_excess"] = vMax - gamma;
    j["worst_margins"] = {{"state", sMin},
                          {"input", iMin},
                          {"planner_state", psMin},
                          {"planner_input", piMin}};
    const auto& last = samples.back();
    j["final_state"] = std::vector<double>(last.x.begin(), last.x.end());
    j["final_planner_state"] =
        std::vector<double>(last.xhat.begin(), last.xhat.end());
    return j;
}

void SimTrace::writeCsv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trace file " + path);
    out << "t";
    if (!samples.empty()) {
        const auto& s0 = samples.front();
        auto head = [&](const char* base, const Eigen::VectorXd& v) {
            for (int i = 0; i < v.size(); ++i) out << "," << base << i + 1;
        };
        head("x", s0.x);
        head("xhat", s0.xhat);
        head("e", s0.e);
        head("u", s0.u);
        head("uhat", s0.uhat);
        out << ",V,margin_state,margin_input,margin_planner_state,"
               "margin_planner_input";
    }
    out << "\n";
    out.precision(12);
    for (const auto& s : samples) {
        out << s.t;
        auto row = [&](const Eigen::VectorXd& v) {
            for (int i = 0; i < v.size(); ++i) out << "," << v[i];
        };
        row(s.x);
        row(s.xhat);
        row(s.e);
        row(s.u);
        row(s.uhat);
        out << "," << s.v << "," << s.stateMargin << "," << s.inputMargin << ","
            << s.plannerStateMargin << "," << s.plannerInputMargin << "\n";
    }
}

}  // namespace safesynth
