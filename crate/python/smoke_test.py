"""Smoke test for the pyhiercontrol extension.

Build and install it first:  pip install --no-build-isolation crates/py
Then run:                    python3 python/smoke_test.py
"""

import math
import pathlib
import sys

import pyhiercontrol as hc

ROOT = pathlib.Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


def main():
    sc = hc.Scenario.from_file(str(SCENARIOS / "lq_small.cfg"))
    check((sc.dim, sc.cells, sc.steps) == (1, 16, 32), "scenario loads")
    check(hc.Scenario.from_toml(sc.to_toml()).to_toml() == sc.to_toml(), "toml round trip")
    check(len(sc.coords()) == 17 and len(sc.times()) == 33, "grid accessors")

    try:
        sc.with_overrides(epsilon=-1.0)
        check(False, "negative epsilon rejected")
    except hc.ValidationError:
        check(True, "negative epsilon rejected")

    n = hc.nash(sc)
    check(n["residual_j1"] < 1e-6 and n["residual_j2"] < 1e-6, "nash first-order residuals")
    check(len(n["v1"]) == 33 and len(n["v1"][0]) == 17, "nash trajectory shape")

    header, rows = hc.weights(sc)
    check(header == ["t", "x", "beta", "nu", "rho_hat"], "weights header")
    check(all(r[3] < 0 for r in rows), "nu is negative")

    heat = hc.Scenario.from_file(str(SCENARIOS / "heat_1d.cfg"))
    norms = []
    for eps in (1e-2, 1e-3, 1e-4):
        lead = hc.leader(heat.with_overrides(epsilon=eps))
        norms.append(lead["terminal_norm"])
        check(lead["terminal_norm"] ** 2 <= 2 * eps * lead["j_eps"] * (1 + 1e-12), f"penalty bound at eps={eps:g}")
    check(norms[0] > norms[1] > norms[2], "terminal norm decreases with eps")

    mild = hc.Scenario.from_file(str(SCENARIOS / "mild_nonlinear_1d.cfg"))
    s = hc.solve(mild)
    check(s["converged"] and math.isfinite(s["terminal_norm"]), "hierarchic solve converges")

    report = hc.verify(sc, "duality")
    check(report["pass"] and report["suites"]["duality"]["worst_ratio"] <= 1e-10, "duality suite")

    print("smoke test passed")


if __name__ == "__main__":
    main()
