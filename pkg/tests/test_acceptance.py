"""Acceptance criteria 1-11.

Each test records one pass/fail line (printed in the terminal summary by
``conftest.py``) and then asserts.  Tolerances and budgets are the stated
ones; nothing is loosened.
"""

import csv
import io
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from qsopt import cli
from qsopt.grover import (
    average_failure,
    simulated_average_success,
    standard_grover_prob,
    std_lambda,
    success_probability_analytic,
    success_probability_exact,
)
from qsopt.optimizer import curvature_S, first_order_directions, build_system, optimize
from qsopt.states import normalize
from qsopt.twovalue import (
    TwoValueSpec,
    dlambda_third_order,
    first_order_direction_closed,
    higher_order_coeffs,
    minv_closed_form,
    optimize_two_value,
    ratio_limit,
    s_factor,
    valid_range,
)
from qsopt import verify as vf

RESULTS = {}


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def run_cli(argv):
    out = io.StringIO()
    import contextlib

    with contextlib.redirect_stdout(out):
        code = cli.main(argv)
    return code, out.getvalue()


def test_criterion_01_standard_grover():
    t0 = time.perf_counter()
    p4 = standard_grover_prob(4, 1)
    notes = [f"n=4 j=1 P={p4:.15f}"]
    ok = abs(p4 - 1) <= 1e-12
    for n in (16, 64, 1024):
        theta = math.asin(1 / math.sqrt(n))
        # first rotation only; later lobes are revivals of the same peak
        js = np.arange(0, int((math.pi / theta - 1) / 2) + 1)
        probs = [standard_grover_prob(n, int(j)) for j in js]
        best = int(js[int(np.argmax(probs))])
        predicted = math.ceil(math.pi / (4 * math.asin(1 / math.sqrt(n))) - 0.5)
        ok &= best == predicted and max(probs) > 1 - 1 / n
        notes.append(f"n={n} j*={best} (formula {predicted}) P={max(probs):.6f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1
    record(1, ok, "; ".join(notes) + f"; {elapsed:.2f}s")


def test_criterion_02_analytic_equals_exact():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 65))
        psi = normalize(rng.normal(size=n))
        phi = normalize(rng.normal(size=n))
        t = int(rng.integers(n))
        j = int(rng.integers(0, 51))
        worst = max(worst, abs(success_probability_analytic(psi, phi, t, j) - success_probability_exact(psi, phi, t, j)))
    elapsed = time.perf_counter() - t0
    record(2, worst <= 1e-10 and elapsed < 5, f"200 instances, max |analytic - exact| = {worst:.2e}; {elapsed:.2f}s")


def test_criterion_03_std_point_identities():
    t0 = time.perf_counter()
    rep = vf.std_identity_check(priors=20, sizes=(8, 32, 128), seed=3, tol=1e-10)
    elapsed = time.perf_counter() - t0
    record(3, rep.passed and elapsed < 5, f"60 priors, max error {rep.max_abs_error:.2e}; {elapsed:.2f}s")


def test_criterion_04_gradient_oracle():
    t0 = time.perf_counter()
    rep = vf.gradient_check(cases=100, sizes=(4, 8, 16, 32), seed=4, rel_tol=1e-6, abs_floor=1e-8)
    elapsed = time.perf_counter() - t0
    failed = sum(not d["passed"] for d in rep.details)
    record(
        4,
        rep.passed and elapsed < 30,
        f"100 configs, {failed} failing, max rel error {rep.max_rel_error:.2e}; {elapsed:.2f}s",
    )


def test_criterion_05_uniform_curvature():
    t0 = time.perf_counter()
    ok = True
    notes = []
    for n in (16, 256, 1024):
        probs = np.full(n, 1.0 / n)
        s_gen = curvature_S(probs, n)
        s_cf = s_factor(TwoValueSpec(n, 1, 1.0 / n))
        s_emp = vf.empirical_curvature(probs, n)
        ok &= abs(s_gen + 2) <= 1e-6 and abs(s_cf + 2) <= 1e-6 and abs(s_emp - s_gen) <= 0.01 * abs(s_gen)
        notes.append(f"n={n}: S={s_gen:.10f}, closed {s_cf:.12f}, fit {s_emp:.6f}")
    elapsed = time.perf_counter() - t0
    record(5, ok and elapsed < 60, "; ".join(notes) + f"; {elapsed:.1f}s")


GRID6 = [
    (20, 4, 0.1), (20, 4, 0.02), (20, 1, 0.5), (20, 10, 0.09),
    (50, 5, 0.1), (50, 5, 0.001), (50, 25, 0.03), (50, 1, 0.9),
    (100, 10, 0.05), (100, 10, 0.002), (100, 50, 0.015), (100, 3, 0.2),
    (150, 30, 0.02), (150, 15, 0.0005), (150, 75, 0.011), (150, 2, 0.4),
    (200, 50, 0.002), (200, 100, 0.003), (200, 20, 0.03), (200, 1, 0.25),
]


def test_criterion_06_two_value_vs_general():
    t0 = time.perf_counter()
    worst_s = worst_d = worst_m = 0.0
    for n, k, p in GRID6:
        spec = TwoValueSpec(n, k, p)
        probs = spec.probs()
        s_gen = curvature_S(probs, n)
        worst_s = max(worst_s, abs(s_gen - s_factor(spec)) / abs(s_factor(spec)))
        system = build_system(probs, n)
        d_psi, d_phi = first_order_directions(system)
        closed, _ = first_order_direction_closed(spec)
        worst_d = max(worst_d, np.abs(d_psi - closed).max(), np.abs(d_phi - closed).max())
        worst_m = max(worst_m, np.abs(minv_closed_form(spec).dense() - np.linalg.inv(system.M)).max())
    elapsed = time.perf_counter() - t0
    ok = worst_s <= 1e-4 and worst_d <= 1e-9 and worst_m <= 1e-8 and elapsed < 120
    record(
        6,
        ok,
        f"20 specs: S rel {worst_s:.1e}, direction {worst_d:.1e}, inverse {worst_m:.1e}; {elapsed:.1f}s",
    )


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_criterion_07_fig3(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "fig3.csv"
    code, _ = run_cli(["sweep-fig3", "--set", "n=10000", "--out", str(out)])
    rows = _csv_rows(out.read_text())
    elapsed = time.perf_counter() - t0
    ok = code == 0 and len(rows) > 0
    notes = []
    by_k = {}
    for r in rows:
        by_k.setdefault(int(r["k"]), []).append((float(r["p"]), float(r["s"])))
    for k, pts in sorted(by_k.items()):
        pts.sort()
        ps = np.array([a for a, _ in pts])
        ss = np.array([b for _, b in pts])
        at_uniform = ss[np.isclose(ps, 1e-4, rtol=0, atol=1e-18)]
        ok &= at_uniform.size == 1 and abs(at_uniform[0] + 2) <= 1e-12
        ok &= ps[0] == 0 and abs(ss[0]) <= 1e-12
        ok &= abs(ps[-1] - 1 / k) <= 1e-15 and abs(ss[-1]) <= 1e-9
        ok &= bool(np.all(ss >= -2 - 1e-12) and np.all(ss <= 1e-12))
        left, right = ss[ps <= 1e-4], ss[ps >= 1e-4]
        ok &= bool(np.all(np.diff(left) <= 1e-15) and np.all(np.diff(right) >= -1e-15))
        notes.append(f"K={k}: min {ss.min():.12f}")
    ok &= elapsed < 10
    record(7, ok, f"{len(rows)} rows; " + ", ".join(notes) + f"; {elapsed:.2f}s")


def test_criterion_08_fig4(tmp_path):
    t0 = time.perf_counter()
    ok = True
    notes = []
    for rule in ("near_max", "tiny"):
        out = tmp_path / f"fig4_{rule}.csv"
        code, _ = run_cli(["ratio-fig4", "--set", "n=10000", "--set", f"p_rule={rule}", "--out", str(out)])
        ok &= code == 0
        rows = _csv_rows(out.read_text())
        by_k = {}
        for r in rows:
            by_k.setdefault(int(r["k"]), []).append((float(r["dlambda"]), float(r["dpbar"]), float(r["ratio"])))
        worst = 0.0
        for k, pts in by_k.items():
            s = s_factor(TwoValueSpec(10000, k, cli.fig4_p(rule, k)))
            limit = ratio_limit(pts)
            worst = max(worst, abs(limit - s) / abs(s))
            pts.sort(key=lambda r: abs(r[1]))
            dev = np.array([abs(2 * r[2] - s) for r in pts])
            ok &= bool(np.all(np.diff(dev) > 0))
        ok &= worst <= 0.01
        notes.append(f"{rule}: {len(by_k)} curves, limit rel error {worst:.1e}")
    elapsed = time.perf_counter() - t0
    record(8, ok and elapsed < 30, "; ".join(notes) + f"; monotone deviation checked; {elapsed:.2f}s")


def test_criterion_09_optimization_payoff():
    t0 = time.perf_counter()
    spec = TwoValueSpec(10000, 100, 1e-6)
    out = optimize_two_value(spec, 1e-3)
    sim = simulated_average_success(out.psi_opt, out.phi_opt, spec.probs(), out.j_min)
    elapsed = time.perf_counter() - t0
    ok = out.j_min < out.j_standard and sim >= 1 - 1e-3 - 1e-4 and out.j_min / sim < out.j_standard and elapsed < 10
    record(
        9,
        ok,
        f"j_min={out.j_min} vs {out.j_standard}, success {sim:.6f}, queries/success {out.j_min / sim:.3f}; {elapsed:.2f}s",
    )


THIRD_ORDER_SPECS = [
    (100, 10, 0.05),
    (100, 10, 0.002),
    (400, 40, 0.001),
    (200, 50, 0.002),
    (100, 50, 0.015),
    (50, 5, 0.1),
    (1000, 100, 1e-4),
    (10000, 100, 1e-6),
    (10000, 10, 1e-6),
    (64, 1, 0.5),
]


def exact_dlambda(spec, target):
    """Invert the exact success drop along the first-order path."""
    n = spec.n
    d, _ = first_order_direction_closed(spec)
    psi0 = np.full(n, 1 / math.sqrt(n))
    probs = spec.probs()
    lam0 = std_lambda(n)

    def f(dl):
        psi = normalize(psi0 + d * dl)
        return average_failure(psi, psi, probs, lam0 + dl, n) - target

    inner, outer = 0.0, 1e-6
    while f(-outer) < 0:
        inner, outer = -outer, outer * 1.3
        if outer > lam0:
            return math.nan
    return brentq(f, -outer, inner, xtol=1e-15, rtol=1e-14)


def test_criterion_10_third_order():
    t0 = time.perf_counter()
    worst = 0.0
    worst_case = None
    for n, k, p in THIRD_ORDER_SPECS:
        spec = TwoValueSpec(n, k, p)
        cap = min(0.1 * valid_range(spec), 0.1)
        for frac in (1.0, 0.3, 0.1):
            dp = frac * cap
            exact = exact_dlambda(spec, dp)
            rel = abs(dlambda_third_order(spec, dp) - exact) / abs(exact)
            if not rel <= worst:
                worst, worst_case = rel, (n, k, p, dp)
    # B = 0 manifolds
    uniform = TwoValueSpec(100, 10, 0.01)
    reduce_uniform = dlambda_third_order(uniform, 1e-3) == -math.sqrt(2e-3 / abs(s_factor(uniform)))
    _, b_k1 = higher_order_coeffs(TwoValueSpec(64, 1, 0.5))
    elapsed = time.perf_counter() - t0
    ok = worst < 0.05 and reduce_uniform and b_k1 == 0 and elapsed < 60
    record(
        10,
        ok,
        f"max rel error {worst:.3f} at (N,K,p,dP)={worst_case}; p=1/N reduces exactly: {reduce_uniform}; "
        f"B at K=1 = {b_k1:.3e}; {elapsed:.1f}s",
    )


ASCENT_SPECS = [(50, 5, 0.1), (50, 10, 0.002), (30, 3, 0.2), (20, 4, 0.1), (40, 1, 0.4)]


def test_criterion_11_stationarity():
    t0 = time.perf_counter()
    ok = True
    worst_res = worst_ratio = 0.0
    for n, k, p in ASCENT_SPECS:
        probs = TwoValueSpec(n, k, p).probs()
        for delta_p in (1e-3, 1e-4):
            out = optimize(probs, n, delta_p)
            lam = out.lambda_opt
            results, _ = vf.multistart_ascent(probs, n, lam, seeds=5, tol=1e-9)
            radius = 2 * np.linalg.norm(out.dpsi_dlambda) * abs(out.lambda_opt - std_lambda(n))
            for r in results:
                res = vf.proportionality_residual(r.psi, r.phi, probs, lam, n)
                dist = min(np.linalg.norm(r.psi - out.psi_opt), np.linalg.norm(r.psi + out.psi_opt))
                worst_res = max(worst_res, res)
                worst_ratio = max(worst_ratio, dist / radius)
                ok &= r.converged and res < 1e-8 and dist <= radius
    elapsed = time.perf_counter() - t0
    record(
        11,
        ok and elapsed < 120,
        f"{len(ASCENT_SPECS) * 2 * 5} ascents: max residual {worst_res:.1e}, max distance/(2|dpsi|) {worst_ratio:.3f}; {elapsed:.1f}s",
    )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
