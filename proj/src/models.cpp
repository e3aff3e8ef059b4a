#include "safesynth/models.hpp"

#include <nlohmann/json.hpp>

namespace safesynth {

namespace {

nlohmann::json vecToJson(const Eigen::VectorXd& v) {
    nlohmann::json j = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

Eigen::VectorXd vecFromJson(const nlohmann::json& j) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
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

nlohmann::json polyVecToJson(const PolynomialVector& v) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : v.entries) j.push_back(p.toJson());
    return j;
}

PolynomialVector polyVecFromJson(const Universe& u, const nlohmann::json& j) {
    PolynomialVector v;
    for (const auto& pj : j) v.entries.push_back(Polynomial::fromJson(u, pj));
    return v;
}

nlohmann::json polyMatToJson(const PolynomialMatrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    nlohmann::json e = nlohmann::json::array();
    for (const auto& p : m.entries) e.push_back(p.toJson());
    j["entries"] = e;
    return j;
}

PolynomialMatrix polyMatFromJson(const Universe& u, const nlohmann::json& j) {
    PolynomialMatrix m;
    m.rows = j.at("rows").get<int>();
    m.cols = j.at("cols").get<int>();
    for (const auto& pj : j.at("entries"))
        m.entries.push_back(Polynomial::fromJson(u, pj));
    return m;
}

nlohmann::json setToJson(const SemialgebraicSet& s) {
    nlohmann::json j;
    nlohmann::json ineqs = nlohmann::json::array();
    for (const auto& row : s.inequalities)
        ineqs.push_back({{"lhs", row.lhs.toJson()}, {"rhs", row.rhs.toJson()}});
    j["inequalities"] = ineqs;
    nlohmann::json eqs = nlohmann::json::array();
    for (const auto& p : s.equalities) eqs.push_back(p.toJson());
    j["equalities"] = eqs;
    return j;
}

// `u` is the member-space universe; right-hand sides may also reference
// theta, so they are parsed against `uRhs`.
SemialgebraicSet setFromJson(const Universe& u, const Universe& uRhs,
                             const nlohmann::json& j) {
    SemialgebraicSet s;
    s.universe = u;
    for (const auto& rj : j.at("inequalities"))
        s.inequalities.push_back({Polynomial::fromJson(u, rj.at("lhs")),
                                  Polynomial::fromJson(uRhs, rj.at("rhs"))});
    for (const auto& pj : j.at("equalities"))
        s.equalities.push_back(Polynomial::fromJson(u, pj));
    return s;
}

}  // namespace

Universe ProblemDefinition::synthesisUniverse() const {
    std::vector<Block> blocks{makeBlock("e", n), makeBlock("xhat", nhat),
                              makeBlock("uhat", mhat), makeBlock("theta", ntheta)};
    if (ndelta > 0) blocks.push_back(makeBlock("delta", ndelta));
    return Universe(blocks);
}

Universe ProblemDefinition::errorUniverse() const {
    std::vector<Block> blocks{makeBlock("e", n)};
    if (ndelta > 0) blocks.push_back(makeBlock("delta", ndelta));
    return Universe(blocks);
}

Universe ProblemDefinition::trackerUniverse() const {
    std::vector<Block> blocks{makeBlock("x", n)};
    if (ndelta > 0) blocks.push_back(makeBlock("delta", ndelta));
    return Universe(blocks);
}

Universe ProblemDefinition::plannerUniverse() const {
    return Universe({makeBlock("xhat", nhat)});
}

nlohmann::json ProblemDefinition::toJson() const {
    nlohmann::json j;
    j["name"] = name;
    j["version"] = version;
    j["dims"] = {{"n", n},       {"m", m},           {"nhat", nhat},
                 {"mhat", mhat}, {"ntheta", ntheta}, {"ndelta", ndelta}};
    j["tracker"] = {{"f", polyVecToJson(f)}, {"g", polyMatToJson(g)}};
    j["planner"] = {{"f", polyVecToJson(fhat)}, {"g", polyMatToJson(ghat)}};
    j["pi"] = polyVecToJson(pi);
    j["state_set"] = setToJson(stateSet);
    j["input_polytope"] = {{"H", matToJson(inputH)}, {"h", vecToJson(inputh)}};
    j["planner_state_set"] = setToJson(plannerStateSet);
    j["planner_input_set"] = setToJson(plannerInputSet);
    j["omega"] = setToJson(omega);
    j["theta_upper"] = vecToJson(thetaBox.upper);
    j["x0"] = vecToJson(x0);
    j["xhat0"] = vecToJson(xhat0);
    j["target"] = vecToJson(target);
    j["degrees"] = {{"v", degV}, {"kappa", degKappa}, {"multiplier", degMultiplier}};
    j["sign_symmetry"] = signSymmetry;
    j["iterations"] = {{"synthesis", synthesisIters},
                       {"theta", thetaIters},
                       {"rel_stop", relStopTol}};
    return j;
}

ProblemDefinition ProblemDefinition::fromJson(const nlohmann::json& j) {
    ProblemDefinition p;
    p.name = j.at("name").get<std::string>();
    p.version = j.at("version").get<int>();
    const auto& d = j.at("dims");
    p.n = d.at("n").get<int>();
    p.m = d.at("m").get<int>();
    p.nhat = d.at("nhat").get<int>();
    p.mhat = d.at("mhat").get<int>();
    p.ntheta = d.at("ntheta").get<int>();
    p.ndelta = d.at("ndelta").get<int>();

    Universe ux = p.trackerUniverse();
    Universe uxh = p.plannerUniverse();
    Universe ue = p.errorUniverse();
    Universe uth({makeBlock("theta", p.ntheta)});
    Universe uuh({makeBlock("uhat", p.mhat)});

    p.f = polyVecFromJson(ux, j.at("tracker").at("f"));
    p.g = polyMatFromJson(ux, j.at("tracker").at("g"));
    p.fhat = polyVecFromJson(uxh, j.at("planner").at("f"));
    p.ghat = polyMatFromJson(uxh, j.at("planner").at("g"));
    p.pi = polyVecFromJson(uxh, j.at("pi"));
    p.stateSet = setFromJson(ux, ux, j.at("state_set"));
    p.inputH = matFromJson(j.at("input_polytope").at("H"));
    p.inputh = vecFromJson(j.at("input_polytope").at("h"));
    p.plannerStateSet = setFromJson(uxh, uth, j.at("planner_state_set"));
    p.plannerInputSet = setFromJson(uuh, uth, j.at("planner_input_set"));
    p.omega = setFromJson(ue, ue, j.at("omega"));
    p.thetaBox.upper = vecFromJson(j.at("theta_upper"));
    p.x0 = vecFromJson(j.at("x0"));
    p.xhat0 = vecFromJson(j.at("xhat0"));
    p.target = vecFromJson(j.at("target"));
    p.degV = j.at("degrees").at("v").get<int>();
    p.degKappa = j.at("degrees").at("kappa").get<int>();
    p.degMultiplier = j.at("degrees").at("multiplier").get<int>();
    p.signSymmetry = j.at("sign_symmetry").get<std::vector<std::string>>();
    p.synthesisIters = j.at("iterations").at("synthesis").get<int>();
    p.thetaIters = j.at("iterations").at("theta").get<int>();
    p.relStopTol = j.at("iterations").at("rel_stop").get<double>();
    return p;
}

ProblemDefinition loadBenchmark() {
    ProblemDefinition p;
    p.name = "double-pendulum-tracking";
    p.version = 1;
    p.n = 4;
    p.m = 2;
    p.nhat = 2;
    p.mhat = 1;
    p.ntheta = 2;
    p.ndelta = 0;

    Universe ux = p.trackerUniverse();
    Universe uxh = p.plannerUniverse();
    Universe ue = p.errorUniverse();
    Universe uth({makeBlock("theta", 2)});
    Universe uuh({makeBlock("uhat", 1)});

    auto x = [&](int i) { return Polynomial::variable(ux, "x", i); };
    auto xh = [&](int i) { return Polynomial::variable(uxh, "xhat", i); };

    // tracker: double-pendulum polynomial model, fully actuated in rows 2/4
    Polynomial f2 = -3.447 * (x(0) * x(0) * x(0)) +
                    2.350 * (x(0) * x(0) * x(2)) + 1.303 * (x(0) * x(2) * x(2)) +
                    3.939 * (x(2) * x(2) * x(2)) + 21.520 * x(0) - 5.000 * x(2);
    Polynomial f4 = 4.023 * (x(0) * x(0) * x(0)) -
                    36.551 * (x(0) * x(0) * x(2)) - 4.131 * (x(1) * x(1) * x(2)) -
                    27.060 * (x(2) * x(2) * x(2)) - 25.115 * x(0) + 77.700 * x(2);
    p.f.entries = {x(1), f2, x(3), f4};

    p.g.rows = 4;
    p.g.cols = 2;
    auto cx = [&](double v) { return Polynomial::constant(ux, v); };
    p.g.entries = {cx(0.0), cx(0.0),   cx(8.0),   cx(-31.2),
                   cx(0.0), cx(0.0),   cx(-31.2), cx(391.2)};

    // planner: single-pendulum model
    Polynomial fh2 = -5.131 * (xh(0) * xh(0) * xh(0)) + 32.1 * xh(0);
    p.fhat.entries = {xh(1), fh2};
    p.ghat.rows = 2;
    p.ghat.cols = 1;
    auto cxh = [&](double v) { return Polynomial::constant(uxh, v); };
    p.ghat.entries = {cxh(0.0), cxh(9.1)};

    // embedding: planner states are the first two tracker states
    p.pi.entries = {xh(0), xh(1), cxh(0.0), cxh(0.0)};

    // X = {|x1| <= 0.6, |x2| <= 1.3}, one row per face
    p.stateSet.universe = ux;
    p.stateSet.inequalities = {
        {x(0), Polynomial::constant(ux, 0.6)},
        {-x(0), Polynomial::constant(ux, 0.6)},
        {x(1), Polynomial::constant(ux, 1.3)},
        {-x(1), Polynomial::constant(ux, 1.3)},
    };

    // tracker input box (the benchmark leaves U unspecified; sized with
    // generous headroom over the drift-cancelation inputs on X)
    p.inputH.resize(4, 2);
    p.inputH << 1, 0, -1, 0, 0, 1, 0, -1;
    p.inputh.resize(4);
    p.inputh << 20.0, 20.0, 5.0, 5.0;

    // parametric planner sets, kept in squared (sign-symmetric) form:
    // |xh1| <= 0.6 th1  <->  xh1^2 <= 0.36 th1^2 on th1 >= 0
    Polynomial t1 = Polynomial::variable(uth, "theta", 0);
    Polynomial t2 = Polynomial::variable(uth, "theta", 1);
    p.plannerStateSet.universe = uxh;
    p.plannerStateSet.inequalities = {
        {xh(0) * xh(0), 0.36 * (t1 * t1)},
        {xh(1) * xh(1), 1.69 * (t2 * t2)},
    };
    Polynomial uh = Polynomial::variable(uuh, "uhat", 0);
    p.plannerInputSet.universe = uuh;
    p.plannerInputSet.inequalities = {{uh * uh, Polynomial::constant(uuh, 25.0)}};

    // Omega = {e1 = e2 = e3 = 0, |e4| <= 0.03}
    auto e = [&](int i) { return Polynomial::variable(ue, "e", i); };
    p.omega.universe = ue;
    p.omega.equalities = {e(0), e(1), e(2)};
    p.omega.inequalities = {
        {e(3), Polynomial::constant(ue, 0.03)},
        {-e(3), Polynomial::constant(ue, 0.03)},
    };

    p.thetaBox.upper = Eigen::Vector2d(1.0, 1.0);
    p.x0 = Eigen::Vector4d(-0.57, 0.52, 0.0, 0.02);
    p.xhat0 = Eigen::Vector2d(-0.57, 0.52);
    p.target = Eigen::Vector2d(0.3, 0.0);

    p.degV = 2;
    p.degKappa = 4;
    p.degMultiplier = 2;
    p.signSymmetry = {"e", "xhat", "uhat", "x"};
    p.synthesisIters = 10;
    p.thetaIters = 15;
    p.relStopTol = 1e-4;
    return p;
}

}  // namespace safesynth
