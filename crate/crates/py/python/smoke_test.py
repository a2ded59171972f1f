"""Smoke test for the sharedecomp extension module.

Build and install with ``maturin develop -m crates/py/Cargo.toml`` (or copy
``target/<profile>/libsharedecomp_py.so`` to ``sharedecomp.so`` somewhere on
``sys.path``), then run ``python crates/py/python/smoke_test.py``.
"""

import math
import sys

import sharedecomp as sd


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


value, g, active = sd.shor_eval([0, 0, 0, 0, 1])
check(value == 80.0 and active == 2 and g == [-20, -40, -20, -20, -20], "shor_eval at the start point")

u = sd.project_onto_u([0.3, -1.2, 2.5, 0.7, -0.4, 1.9], [1.0, 2.0])
check(abs(u[0] + u[2] + u[4] - 1.0) < 1e-12 and abs(u[1] + u[3] + u[5] - 2.0) < 1e-12, "projection onto U")

check(sd.step_size("sgmts", 0.1, 25) == 0.05, "two-speed anchor step")

lp = sd.solve_lp([-1.0, -1.0], [[1.0, 2.0], [3.0, 1.0]], ["<=", "<="], [4.0, 6.0])
check(lp["status"] == "optimal" and abs(lp["objective"] + 2.8) < 1e-12, "small LP")

p = sd.DecomposableLp.generate(2)
cal = p.calibrate()
u_star = p.optimal_shares(cal["x_star"])
ev = p.eval_master(u_star, cal["t"])
check(abs(ev["value"] - cal["f_star"]) < 1e-7, "exactness at the optimal shares")
check(max(ev["violation"]) <= 1e-6, "recovered point is feasible")
check(sd.DecomposableLp.from_json(p.to_json()).b == p.b, "instance JSON round trip")

report, csv = sd.run_shor("sgm", eps=[0.1], timing=False)
check(report["rows"][0]["hits"][0]["iteration"] == 59, "shor SGM reaches 0.1")
check(csv.startswith("k,theta,f,best,elapsed_s"), "trace CSV header")

report, _ = sd.run_declp(2, budget=500, timing=False)
check(report["declp"]["relative_gap"] < 0.05, "declp l=2 converges")

check(sd.run_verify([1, 2], samples=10)["passed"], "verify l=1,2")
check(not sd.run_verify([2], t=[3.5, 0.1], samples=5)["passed"], "verify flags a weak penalty")

try:
    sd.run_shor("newton")
except ValueError:
    check(True, "unknown method raises ValueError")
else:
    check(False, "unknown method raises ValueError")

check(math.isclose(sd.SHOR_OPTIMUM, 22.60016), "optimum constant")
print("smoke test passed")
