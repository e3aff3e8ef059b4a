#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "safesynth/conic.hpp"

namespace safesynth {

namespace {

// Driver for the SCS conic solver; materialized to a temp file and invoked
// through the configured python interpreter.
const char* kScsDriver = R"PY(
import json, sys
import numpy as np
import scipy.sparse as sp
import scs

with open(sys.argv[1]) as f:
    data = json.load(f)

n = data["n"]
m = data["m"]
A = sp.csc_matrix(
    (data["A"]["vals"], (data["A"]["rows"], data["A"]["cols"])), shape=(m, n)
)
b = np.array(data["b"], dtype=float)
c = np.array(data["c"], dtype=float)
cone = {}
if data["cone"]["z"]:
    cone["z"] = data["cone"]["z"]
if data["cone"]["l"]:
    cone["l"] = data["cone"]["l"]
if data["cone"]["s"]:
    cone["s"] = data["cone"]["s"]
s = data["settings"]
sol = scs.solve(
    dict(A=A, b=b, c=c),
    cone,
    verbose=s.get("verbose", False),
    eps_abs=s["eps"],
    eps_rel=s["eps"],
    eps_infeas=1e-9,
    max_iters=s["max_iters"],
    time_limit_secs=s["time_limit"],
)
import math

def clean(v):
    return v if math.isfinite(v) else 0.0

out = {
    "status": sol["info"]["status"],
    "status_val": sol["info"]["status_val"],
    "pobj": clean(float(sol["info"]["pobj"])),
    "iter": sol["info"]["iter"],
    "x": [clean(float(v)) for v in sol["x"]],
}
with open(sys.argv[2], "w") as f:
    json.dump(out, f)
)PY";

std::filesystem::path driverPath() {
    static std::filesystem::path path = [] {
        auto p = std::filesystem::temp_directory_path() /
                 ("safesynth_scs_" + std::to_string(::getpid()) + ".py");
        std::ofstream f(p);
        f << kScsDriver;
        return p;
    }();
    return path;
}

class ScsBackend : public ConicBackend {
  public:
    std::string name() const override { return "scs"; }

    ConicSolution solve(const ConicProblem& p, const SolveOptions& opt) override {
        nlohmann::json in = toScsJson(p, opt);

        static int counter = 0;
        auto base = std::filesystem::temp_directory_path() /
                    ("safesynth_scs_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter++));
        auto inPath = base.string() + "_in.json";
        auto outPath = base.string() + "_out.json";
        {
            std::ofstream f(inPath);
            f << in.dump();
        }

        const char* py = std::getenv("SAFESYNTH_PYTHON");
        std::string interpreter = py ? py : "python3";
        std::string cmd = interpreter + " " + driverPath().string() + " " + inPath +
                          " " + outPath + " 2>/dev/null";
        int rc = std::system(cmd.c_str());

        ConicSolution sol;
        if (rc != 0 || !std::filesystem::exists(outPath)) {
            sol.status = SolveStatus::NumericalFailure;
            sol.solverInfo = "scs driver failed (exit " + std::to_string(rc) + ")";
            std::filesystem::remove(inPath);
            return sol;
        }
        nlohmann::json out;
        {
            std::ifstream f(outPath);
            f >> out;
        }
        std::filesystem::remove(inPath);
        std::filesystem::remove(outPath);

        std::string status = out.at("status").get<std::string>();
        sol.solverInfo = "scs: " + status + ", iters " +
                         std::to_string(out.at("iter").get<int>());
        if (status.rfind("solved", 0) == 0) {
            sol.status = SolveStatus::Optimal;
        } else if (status.rfind("infeasible", 0) == 0) {
            sol.status = SolveStatus::Infeasible;
        } else if (status.rfind("unbounded", 0) == 0) {
            sol.status = SolveStatus::Unbounded;
        } else {
            sol.status = SolveStatus::NumericalFailure;
        }
        if (sol.status == SolveStatus::Optimal) {
            auto xs = out.at("x").get<std::vector<double>>();
            sol.x = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
            sol.objective = out.at("pobj").get<double>() + p.objectiveConstant;
            sol.maxPsdResidual = std::max(0.0, -p.minBlockEigenvalue(sol.x));
        }
        return sol;
    }

  private:
    static nlohmann::json toScsJson(const ConicProblem& p, const SolveOptions& opt) {
        std::vector<int> rows, cols;
        std::vector<double> vals, b;
        int row = 0;

        auto pushRow = [&](const std::vector<std::pair<int, double>>& coeffs,
                           double scale, double rhs) {
            for (auto [i, a] : coeffs) {
                rows.push_back(row);
                cols.push_back(i);
                vals.push_back(scale * a);
            }
            b.push_back(rhs);
            ++row;
        };

        for (const auto& eq : p.equalities) pushRow(eq.coeffs, 1.0, eq.rhs);
        int nz = row;

        for (const auto& lin : p.linears) {
            if (lin.lo > -1e29) pushRow(lin.coeffs, -1.0, -lin.lo);
            if (lin.hi < 1e29) pushRow(lin.coeffs, 1.0, lin.hi);
        }
        int nl = row - nz;

        const double sqrt2 = std::sqrt(2.0);
        std::vector<int> sdims;
        for (const auto& blk : p.blocks) {
            sdims.push_back(blk.dim);
            // column-major lower triangle, off-diagonals scaled by sqrt(2)
            for (int j = 0; j < blk.dim; ++j) {
                for (int i = j; i < blk.dim; ++i) {
                    double scale = (i == j) ? 1.0 : sqrt2;
                    rows.push_back(row);
                    cols.push_back(blk.entryVar(j, i));
                    vals.push_back(-scale);
                    b.push_back(0.0);
                    ++row;
                }
            }
        }

        std::vector<double> c(p.numVars, 0.0);
        for (auto [i, a] : p.objective) c[i] += a;

        nlohmann::json j;
        j["n"] = p.numVars;
        j["m"] = row;
        j["A"] = {{"rows", rows}, {"cols", cols}, {"vals", vals}};
        j["b"] = b;
        j["c"] = c;
        j["cone"] = {{"z", nz}, {"l", nl}, {"s", sdims}};
        j["settings"] = {{"eps", opt.eps},
                         {"max_iters", opt.maxIters},
                         {"time_limit", opt.timeLimitSec},
                         {"verbose", opt.verbose}};
        return j;
    }
};

}  // namespace

std::unique_ptr<ConicBackend> makeScsBackend() {
    return std::make_unique<ScsBackend>();
}

}  // namespace safesynth
