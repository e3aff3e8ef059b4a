"""Condensed dense-QP oracle for the receding-horizon planner tests.

Reads a JSON problem description (discrete affine model, weights, bounds,
horizon, list of initial states), eliminates the states by condensation, and
solves the resulting dense QP with cvxpy. Writes the optimal objectives (or
null for infeasible instances) as a JSON list.
"""

import json
import sys

import cvxpy as cp
import numpy as np


def solve_one(d, x0):
    A = np.array(d["A"])
    B = np.array(d["B"])
    c = np.array(d["c"])
    Q = np.array(d["Q"])
    R = np.array(d["R"])
    PN = np.array(d["PN"])
    target = np.array(d["target"])
    uref = np.array(d["u_ref"])
    xlo, xhi = np.array(d["x_lo"]), np.array(d["x_hi"])
    ulo, uhi = np.array(d["u_lo"]), np.array(d["u_hi"])
    tlo, thi = np.array(d["t_lo"]), np.array(d["t_hi"])
    N = d["N"]
    n, m = A.shape[0], B.shape[1]

    U = cp.Variable(N * m)
    # condense x_k = M_k @ U + m_k
    Mk = np.zeros((n, N * m))
    mk = np.array(x0, dtype=float)
    cost = cp.quad_form(mk - target, cp.psd_wrap(Q))
    cons = []
    for k in range(N):
        uk = U[k * m : (k + 1) * m]
        cost += cp.quad_form(uk - uref, cp.psd_wrap(R))
        Mk = A @ Mk
        Mk[:, k * m : (k + 1) * m] += B
        mk = A @ mk + c
        xk = Mk @ U + mk
        lo, hi = (tlo, thi) if k == N - 1 else (xlo, xhi)
        cons += [xk >= lo, xk <= hi, uk >= ulo, uk <= uhi]
        W = PN if k == N - 1 else Q
        cost += cp.quad_form(xk - target, cp.psd_wrap(W))
        Mk = Mk.copy()

    prob = cp.Problem(cp.Minimize(cost), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except (cp.SolverError, Exception):
        prob.solve(solver=cp.ECOS)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return None
    return float(prob.value)


def main():
    with open(sys.argv[1]) as f:
        d = json.load(f)
    out = [solve_one(d, x0) for x0 in d["x0_list"]]
    with open(sys.argv[2], "w") as f:
        json.dump(out, f)


if __name__ == "__main__":
    main()
