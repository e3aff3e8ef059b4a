// Command-line front end for the planner-tracker synthesis pipeline:
// certificate synthesis, parameter-bound selection, sampling-based
// verification, single planner solves, closed-loop simulation, and the
// bundled end-to-end benchmark study.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "safesynth/certsynth.hpp"
#include "safesynth/planner.hpp"
#include "safesynth/simulator.hpp"
#include "safesynth/thetaselect.hpp"
#include "safesynth/verifier.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace safesynth;

namespace {

constexpr const char* kVersion = "0.1.0";

json readJson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

void writeJson(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

ProblemDefinition loadProblem(const std::string& path) {
    return ProblemDefinition::fromJson(readJson(path));
}

Eigen::VectorXd parseVector(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

std::vector<double> toStd(const Eigen::VectorXd& v) {
    return {v.begin(), v.end()};
}

/// Records what every stage produced; written as manifest.json so a run can
/// be audited and replayed.
struct RunManifest {
    json j;

    RunManifest(const std::string& command, const ProblemDefinition& p,
                const std::string& configPath, std::uint64_t seed,
                const std::string& solver) {
        j["tool"] = {{"name", "safesynth"}, {"version", kVersion}};
        j["command"] = command;
        j["problem"] = {{"name", p.name}, {"hash", problemHash(p)}};
        j["config_path"] = configPath;
        j["config"] = p.toJson();
        j["seed"] = seed;
        j["solver"] = solver;
        j["stages"] = json::array();
    }

    void stage(const std::string& name, const std::string& status,
               const std::vector<std::string>& outputs = {}) {
        j["stages"].push_back(
            {{"name", name}, {"status", status}, {"outputs", outputs}});
    }

    void write(const fs::path& outDir) {
        writeJson((outDir / "manifest.json").string(), j);
    }
};

struct CommonArgs {
    std::string configPath;
    std::string outDir = ".";
    std::string solver = "scs";
    std::uint64_t seed = 2026;
};

void addCommon(CLI::App* cmd, CommonArgs& a, const std::string& defaultConfig) {
    a.configPath = defaultConfig;
    cmd->add_option("--config", a.configPath, "problem definition JSON")
        ->capture_default_str();
    cmd->add_option("--out-dir", a.outDir, "output directory")
        ->capture_default_str();
    cmd->add_option("--solver", a.solver, "conic backend (scs or ipm)")
        ->check(CLI::IsMember({"scs", "ipm"}))
        ->capture_default_str();
    cmd->add_option("--seed", a.seed, "sampling seed")->capture_default_str();
}

json verdictFor(const std::vector<CheckResult>& checks) {
    json out;
    out["checks"] = json::array();
    bool all = true;
    for (const auto& c : checks) {
        out["checks"].push_back(c.toJson());
        all = all && c.pass;
    }
    out["pass"] = all;
    return out;
}

std::vector<CheckResult> runChecks(const ProblemDefinition& p,
                                   const Certificate& cert,
                                   const Eigen::VectorXd& thetaBar,
                                   const SamplingPlan& plan) {
    return {verifyDecrease(p, cert, plan), verifyInputBound(p, cert, plan),
            verifyContainment(p, cert, thetaBar, plan),
            verifyMonotonicity(p, cert, plan), verifyInitialSet(p, cert, plan)};
}

json simSummaryWithVerdict(const ProblemDefinition& p, const Certificate& cert,
                           const SimTrace& trace, double marginTol) {
    json s = trace.summaryJson();
    bool ok = trace.status == "completed" && !trace.samples.empty() &&
              s["containment_excess"].get<double>() <= marginTol &&
              s["worst_margins"]["state"].get<double>() >= -marginTol;
    s["pass"] = ok;
    return s;
}

int cmdSynthesize(const CommonArgs& a, int iters, bool verbose) {
    auto p = loadProblem(a.configPath);
    RunManifest man("synthesize", p, a.configPath, a.seed, a.solver);
    fs::create_directories(a.outDir);
    SynthesisOptions opt;
    opt.backend = a.solver;
    opt.iters = iters;
    opt.verbose = verbose;
    try {
        Certificate cert = synthesize(p, opt);
        std::string path = (fs::path(a.outDir) / "certificate.json").string();
        writeJson(path, cert.toJson());
        man.stage("synthesize", "ok", {path});
        man.write(a.outDir);
        std::cout << "level gamma = " << cert.gamma << " after "
                  << cert.gammaHistory.size() << " accepted steps\n";
        return 0;
    } catch (const std::exception& ex) {
        man.stage("synthesize", std::string("failed: ") + ex.what());
        man.write(a.outDir);
        std::cerr << "synthesis failed: " << ex.what() << "\n";
        return 1;
    }
}

int cmdSelectTheta(const CommonArgs& a, const std::string& certPath,
                   bool verbose) {
    auto p = loadProblem(a.configPath);
    auto cert = Certificate::fromJson(p, readJson(certPath));
    RunManifest man("select-theta", p, a.configPath, a.seed, a.solver);
    fs::create_directories(a.outDir);
    ThetaOptions opt;
    opt.backend = a.solver;
    opt.verbose = verbose;
    try {
        ThetaSelection sel = selectTheta(p, cert, opt);
        std::string path = (fs::path(a.outDir) / "theta.json").string();
        writeJson(path, sel.toJson());
        man.stage("select-theta", "ok", {path});
        man.write(a.outDir);
        std::cout << "selected parameter bound = ["
                  << sel.thetaBar.transpose() << "]\n";
        return 0;
    } catch (const std::exception& ex) {
        man.stage("select-theta", std::string("failed: ") + ex.what());
        man.write(a.outDir);
        std::cerr << "selection failed: " << ex.what() << "\n";
        return 1;
    }
}

int cmdVerify(const CommonArgs& a, const std::string& certPath,
              const std::string& thetaPath, const std::string& thetaOverride,
              int samples) {
    auto p = loadProblem(a.configPath);
    auto cert = Certificate::fromJson(p, readJson(certPath));
    Eigen::VectorXd thetaBar;
    if (!thetaOverride.empty())
        thetaBar = parseVector(thetaOverride);
    else
        thetaBar = ThetaSelection::fromJson(readJson(thetaPath)).thetaBar;
    RunManifest man("verify", p, a.configPath, a.seed, a.solver);
    fs::create_directories(a.outDir);
    SamplingPlan plan;
    plan.seed = a.seed;
    plan.samples = samples;
    auto verdict = verdictFor(runChecks(p, cert, thetaBar, plan));
    verdict["theta_bar"] = toStd(thetaBar);
    std::string path = (fs::path(a.outDir) / "verify.json").string();
    writeJson(path, verdict);
    man.stage("verify", verdict["pass"].get<bool>() ? "ok" : "failed", {path});
    man.write(a.outDir);
    for (const auto& c : verdict["checks"])
        std::cout << c["check"].get<std::string>() << ": "
                  << (c["pass"].get<bool>() ? "pass" : "FAIL")
                  << " (worst " << c["worst"].get<double>() << ")\n";
    return verdict["pass"].get<bool>() ? 0 : 1;
}

int cmdPlan(const CommonArgs& a, const std::string& thetaPath,
            const std::string& thetaOverride, const std::string& xhatCsv) {
    auto p = loadProblem(a.configPath);
    Eigen::VectorXd thetaBar = !thetaOverride.empty()
        ? parseVector(thetaOverride)
        : ThetaSelection::fromJson(readJson(thetaPath)).thetaBar;
    Eigen::VectorXd xhat = xhatCsv.empty() ? p.xhat0 : parseVector(xhatCsv);
    RunManifest man("plan", p, a.configPath, a.seed, a.solver);
    fs::create_directories(a.outDir);
    MpcPlanner planner(p, thetaBar);
    std::string path = (fs::path(a.outDir) / "plan.json").string();
    try {
        MpcSolution sol = planner.solve(xhat);
        json out;
        out["objective"] = sol.objective;
        out["u0"] = toStd(sol.u0);
        out["states"] = json::array();
        for (int k = 0; k < sol.states.rows(); ++k)
            out["states"].push_back(toStd(sol.states.row(k)));
        out["inputs"] = json::array();
        for (int k = 0; k < sol.inputs.rows(); ++k)
            out["inputs"].push_back(toStd(sol.inputs.row(k)));
        writeJson(path, out);
        man.stage("plan", "ok", {path});
        man.write(a.outDir);
        std::cout << "objective = " << sol.objective << ", first input = ["
                  << sol.u0.transpose() << "]\n";
        return 0;
    } catch (const PlannerInfeasible& ex) {
        json out = {{"infeasible_stage", ex.stage()}, {"error", ex.what()}};
        writeJson(path, out);
        man.stage("plan", "infeasible", {path});
        man.write(a.outDir);
        std::cerr << "planner infeasible at stage " << ex.stage() << "\n";
        return 1;
    }
}

int cmdSimulate(const CommonArgs& a, const std::string& certPath,
                const std::string& thetaPath, const std::string& thetaOverride,
                double duration) {
    auto p = loadProblem(a.configPath);
    auto cert = Certificate::fromJson(p, readJson(certPath));
    Eigen::VectorXd thetaBar = !thetaOverride.empty()
        ? parseVector(thetaOverride)
        : ThetaSelection::fromJson(readJson(thetaPath)).thetaBar;
    RunManifest man("simulate", p, a.configPath, a.seed, a.solver);
    fs::create_directories(a.outDir);
    SimConfig cfg;
    cfg.duration = duration;
    SimTrace trace = simulate(p, cert, thetaBar, cfg);
    std::string csv = (fs::path(a.outDir) / "trace.csv").string();
    std::string summary = (fs::path(a.outDir) / "summary.json").string();
    trace.writeCsv(csv);
    json s = simSummaryWithVerdict(p, cert, trace, 1e-6);
    writeJson(summary, s);
    bool ok = s["pass"].get<bool>();
    man.stage("simulate", ok ? "ok" : "failed", {csv, summary});
    man.write(a.outDir);
    std::cout << "status " << trace.status << ", " << trace.samples.size()
              << " samples";
    if (!trace.samples.empty())
        std::cout << ", containment excess "
                  << s["containment_excess"].get<double>();
    std::cout << "\n";
    return ok ? 0 : 1;
}

int cmdReproduce(const CommonArgs& a, const std::string& certPath,
                 const std::string& thetaPath, int samples, double duration,
                 bool verbose) {
    auto p = loadProblem(a.configPath);
    RunManifest man("reproduce-paper", p, a.configPath, a.seed, a.solver);
    fs::path out(a.outDir);
    fs::create_directories(out);

    // stage 1: certificate (reused when provided)
    Certificate cert;
    if (!certPath.empty()) {
        cert = Certificate::fromJson(p, readJson(certPath));
        man.stage("synthesize", "reused", {certPath});
    } else {
        SynthesisOptions so;
        so.backend = a.solver;
        so.verbose = verbose;
        cert = synthesize(p, so);
        std::string path = (out / "certificate.json").string();
        writeJson(path, cert.toJson());
        man.stage("synthesize", "ok", {path});
    }
    std::cout << "certified level gamma = " << cert.gamma << "\n";

    // stage 2: parameter-bound selection
    Eigen::VectorXd thetaBar;
    if (!thetaPath.empty()) {
        thetaBar = ThetaSelection::fromJson(readJson(thetaPath)).thetaBar;
        man.stage("select-theta", "reused", {thetaPath});
    } else {
        ThetaOptions to;
        to.backend = a.solver;
        to.verbose = verbose;
        ThetaSelection sel = selectTheta(p, cert, to);
        thetaBar = sel.thetaBar;
        std::string path = (out / "theta.json").string();
        writeJson(path, sel.toJson());
        man.stage("select-theta", "ok", {path});
    }
    std::cout << "selected parameter bound = [" << thetaBar.transpose()
              << "]\n";

    // stage 3: sampling-based verification at the selected bound
    SamplingPlan plan;
    plan.seed = a.seed;
    plan.samples = samples;
    json verdict = verdictFor(runChecks(p, cert, thetaBar, plan));
    verdict["theta_bar"] = toStd(thetaBar);
    writeJson((out / "verify.json").string(), verdict);
    bool verified = verdict["pass"].get<bool>();
    man.stage("verify", verified ? "ok" : "failed",
              {(out / "verify.json").string()});

    // stage 4: closed-loop runs at the selected bound and at heuristic
    // parameter choices near the feasibility boundary
    struct Case {
        std::string label;
        Eigen::VectorXd theta;
        bool expectSafe;
    };
    std::vector<Case> cases{{"selected", thetaBar, true}};
    for (double v : {1.00, 0.99, 0.98})
        cases.push_back({"heuristic-" + std::to_string(v).substr(0, 4),
                         Eigen::VectorXd::Constant(p.ntheta, v), false});

    json table = json::array();
    bool allExpected = verified;
    for (const auto& c : cases) {
        json row;
        row["label"] = c.label;
        row["theta"] = toStd(c.theta);
        CheckResult contain = verifyContainment(p, cert, c.theta, plan);
        row["containment_check"] = contain.toJson();

        SimConfig cfg;
        cfg.duration = duration;
        SimTrace trace = simulate(p, cert, c.theta, cfg);
        std::string csv = (out / ("trace_" + c.label + ".csv")).string();
        trace.writeCsv(csv);
        json s = simSummaryWithVerdict(p, cert, trace, 1e-6);
        row["simulation"] = s;
        man.stage("simulate-" + c.label, trace.status, {csv});

        bool expected = c.expectSafe ? (contain.pass && s["pass"].get<bool>())
                                     : !contain.pass;
        row["as_expected"] = expected;
        allExpected = allExpected && expected;
        table.push_back(row);
    }
    writeJson((out / "comparison.json").string(), table);
    man.stage("compare", allExpected ? "ok" : "failed",
              {(out / "comparison.json").string()});
    man.write(a.outDir);

    std::cout << "\ncase            certified  sim-safe  worst-containment\n";
    for (const auto& row : table) {
        const auto& cc = row["containment_check"];
        std::printf("%-15s %-10s %-9s %.3e\n",
                    row["label"].get<std::string>().c_str(),
                    cc["pass"].get<bool>() ? "yes" : "no",
                    row["simulation"]["pass"].get<bool>() ? "yes" : "no",
                    cc["worst"].get<double>());
    }
    std::cout << (allExpected ? "\nall cases match the expected verdicts\n"
                              : "\nUNEXPECTED verdicts present\n");
    return allExpected ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sum-of-squares synthesis of safe planner-tracker control "
                 "architectures"};
    app.require_subcommand(1);
    std::string defaultConfig = "data/benchmark.json";

    CommonArgs synthA, selA, verA, planA, simA, repA;
    int synthIters = -1, verSamples = 100000, repSamples = 100000;
    bool synthVerbose = false, selVerbose = false, repVerbose = false;
    std::string selCert = "certificate.json";
    std::string verCert = "certificate.json", verTheta = "theta.json",
                verOverride;
    std::string planTheta = "theta.json", planOverride, planXhat;
    std::string simCert = "certificate.json", simTheta = "theta.json",
                simOverride;
    std::string repCert, repTheta;
    double simDuration = 10.0, repDuration = 10.0;

    auto* synth = app.add_subcommand(
        "synthesize", "synthesize the storage function, tracking law, level");
    addCommon(synth, synthA, defaultConfig);
    synth->add_option("--iters", synthIters, "alternation iterations");
    synth->add_flag("--verbose", synthVerbose);

    auto* sel = app.add_subcommand(
        "select-theta", "maximize the planner parameter bound");
    addCommon(sel, selA, defaultConfig);
    sel->add_option("--certificate", selCert)->capture_default_str();
    sel->add_flag("--verbose", selVerbose);

    auto* ver = app.add_subcommand(
        "verify", "sampling-based verification of a certificate");
    addCommon(ver, verA, defaultConfig);
    ver->add_option("--certificate", verCert)->capture_default_str();
    ver->add_option("--theta", verTheta)->capture_default_str();
    ver->add_option("--theta-override", verOverride,
                    "comma-separated parameter bound");
    ver->add_option("--samples", verSamples)->capture_default_str();

    auto* plan = app.add_subcommand("plan", "solve one planner instance");
    addCommon(plan, planA, defaultConfig);
    plan->add_option("--theta", planTheta)->capture_default_str();
    plan->add_option("--theta-override", planOverride);
    plan->add_option("--xhat", planXhat, "initial planner state (csv)");

    auto* sim = app.add_subcommand("simulate", "closed-loop run with trace");
    addCommon(sim, simA, defaultConfig);
    sim->add_option("--certificate", simCert)->capture_default_str();
    sim->add_option("--theta", simTheta)->capture_default_str();
    sim->add_option("--theta-override", simOverride);
    sim->add_option("--duration", simDuration)->capture_default_str();

    auto* rep = app.add_subcommand(
        "reproduce-paper", "full benchmark study: synthesis, selection, "
                           "verification, closed-loop comparison");
    addCommon(rep, repA, defaultConfig);
    rep->add_option("--certificate", repCert, "reuse an existing certificate");
    rep->add_option("--theta", repTheta, "reuse an existing selection");
    rep->add_option("--samples", repSamples)->capture_default_str();
    rep->add_option("--duration", repDuration)->capture_default_str();
    rep->add_flag("--verbose", repVerbose);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmdSynthesize(synthA, synthIters, synthVerbose);
        if (sel->parsed()) return cmdSelectTheta(selA, selCert, selVerbose);
        if (ver->parsed())
            return cmdVerify(verA, verCert, verTheta, verOverride, verSamples);
        if (plan->parsed())
            return cmdPlan(planA, planTheta, planOverride, planXhat);
        if (sim->parsed())
            return cmdSimulate(simA, simCert, simTheta, simOverride, simDuration);
        if (rep->parsed())
            return cmdReproduce(repA, repCert, repTheta, repSamples,
                                repDuration, repVerbose);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
