"""Brute-force oracles for the closed forms."""

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    InvalidGridError,
    InvalidInputError,
    NonquadraticRegimeError,
    QsoptError,
    SingularSystemError,
)
from .gradient import GradientBundle, _kernel, gradient_bundle, std_point
from .grover import average_failure, average_success, grover_angle, std_lambda
from .optimizer import _factor, build_system, curvature_S, first_order_directions
from .states import as_probs, as_vector, normalize, uniform_state
from .twovalue import TwoValueSpec, minv_closed_form

log = logging.getLogger(__name__)

# cube root of machine epsilon balances truncation and rounding in central differences
FD_STEP = float(np.finfo(float).eps ** (1 / 3))


@dataclass
class VerificationReport:
    check_name: str
    max_abs_error: float
    max_rel_error: float
    passed: bool
    tolerance: float
    details: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _report(name, details, tol, rel_key="rel_error", abs_key="abs_error", ok=None):
    max_abs = max((d[abs_key] for d in details), default=0.0)
    max_rel = max((d[rel_key] for d in details), default=0.0)
    passed = all(d.get("passed", True) for d in details) if ok is None else ok
    return VerificationReport(name, float(max_abs), float(max_rel), bool(passed), tol, details)


# finite differences -----------------------------------------------------------


def finite_diff_gradients(psi, phi, prior, lam, n=None, step=FD_STEP):
    """Central differences of ``average_success`` in every coordinate and in ``lam``."""
    if step < 1e-8:
        warnings.warn(f"step {step:g} is in the rounding-dominated regime", RuntimeWarning, stacklevel=2)
    elif step > 1e-3:
        warnings.warn(f"step {step:g} is in the truncation-dominated regime", RuntimeWarning, stacklevel=2)
    psi = np.array(as_vector(psi), dtype=float)
    phi = np.array(as_vector(phi), dtype=float)
    probs = as_probs(prior)
    n = psi.size if n is None else n
    f = lambda x, y, l: average_success(x, y, probs, l, n)
    ga = np.empty(psi.size)
    gb = np.empty(psi.size)
    for i in range(psi.size):
        e = np.zeros(psi.size)
        e[i] = step
        ga[i] = (f(psi + e, phi, lam) - f(psi - e, phi, lam)) / (2 * step)
        gb[i] = (f(psi, phi + e, lam) - f(psi, phi - e, lam)) / (2 * step)
    gl = (f(psi, phi, lam + step) - f(psi, phi, lam - step)) / (2 * step)
    return GradientBundle(ga, gb, float(gl))


def _compare(actual, expected, rel_tol, abs_floor):
    actual, expected = np.atleast_1d(actual), np.atleast_1d(expected)
    err = np.abs(actual - expected)
    rel = err / np.maximum(np.abs(expected), abs_floor / rel_tol)
    return float(err.max()), float(rel.max()), bool(np.all((err <= rel_tol * np.abs(expected)) | (err <= abs_floor)))


def random_configuration(rng, n):
    """Random unit psi, phi, random prior and lambda in [0, pi]."""
    psi = normalize(rng.normal(size=n))
    phi = normalize(rng.normal(size=n))
    probs = rng.random(n)
    return psi, phi, probs / probs.sum(), float(rng.uniform(0, math.pi))


def gradient_check(cases=100, sizes=(4, 8, 16, 32), seed=0, rel_tol=1e-6, abs_floor=1e-8, step=FD_STEP):
    rng = np.random.default_rng(seed)
    details = []
    for i in range(cases):
        n = int(sizes[i % len(sizes)])
        psi, phi, probs, lam = random_configuration(rng, n)
        exact = gradient_bundle(psi, phi, probs, lam, n)
        fd = finite_diff_gradients(psi, phi, probs, lam, n, step)
        worst = [
            _compare(exact.a_psi, fd.a_psi, rel_tol, abs_floor),
            _compare(exact.b_phi, fd.b_phi, rel_tol, abs_floor),
            _compare(exact.c_lambda, fd.c_lambda, rel_tol, abs_floor),
        ]
        details.append(
            {
                "n": n,
                "lambda": lam,
                "abs_error": max(w[0] for w in worst),
                "rel_error": max(w[1] for w in worst),
                "passed": all(w[2] for w in worst),
            }
        )
    return _report("gradients", details, rel_tol)


def std_identity_check(priors=20, sizes=(8, 32, 128), seed=0, tol=1e-10):
    """At the standard point the gradient collapses to (2 psi0, 2 psi0, 0) for any prior."""
    rng = np.random.default_rng(seed)
    details = []
    for n in sizes:
        psi0, _, lam = std_point(n)
        target = 2 * np.asarray(psi0)
        for _ in range(priors):
            probs = rng.random(n)
            probs /= probs.sum()
            g = gradient_bundle(psi0, psi0, probs, lam, n)
            err = max(np.abs(g.a_psi - target).max(), np.abs(g.b_phi - target).max(), abs(g.c_lambda))
            details.append({"n": n, "abs_error": float(err), "rel_error": float(err / 2), "passed": err <= tol})
    return _report("std_identities", details, tol)


# curvature ---------------------------------------------------------------------


def default_curvature_grid(max_step=0.01, points=6):
    half = np.geomspace(1e-3, max_step, points)
    return np.concatenate([-half[::-1], half])


def empirical_curvature(prior, n=None, dlambda_grid=None, residual_tol=1e-6):
    """Curvature factor fitted from exact success changes along the optimal path.

    The success change is modelled as ``(S/2) dl^2 + c3 dl^3``; the odd term
    absorbs the leading asymmetry of the exact curve and does not bias ``S``
    on a symmetric grid.  A root-mean-square fit residual above
    ``residual_tol`` means the grid has left the quadratic regime.
    """
    probs = np.array(as_probs(prior), dtype=float)
    n = probs.size if n is None else int(n)
    grid = default_curvature_grid() if dlambda_grid is None else np.asarray(dlambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.isfinite(grid)):
        raise InvalidGridError("curvature grid needs at least two finite values")
    if not np.allclose(np.sort(grid), np.sort(-grid), rtol=1e-12, atol=0):
        raise InvalidGridError("curvature grid must be symmetric about zero")
    if np.abs(grid).max() > 0.05:
        raise NonquadraticRegimeError("curvature grid exceeds |dlambda| = 0.05, outside the quadratic regime")
    grid = grid[np.abs(grid) >= 1e-4]
    if grid.size < 2:
        raise InvalidGridError("no grid points above the 1e-4 rounding floor")
    d_psi, d_phi = first_order_directions(build_system(probs, n))
    psi0 = np.full(n, 1.0 / math.sqrt(n))
    lam0 = std_lambda(n)
    dp = np.array(
        [
            -average_failure(normalize(psi0 + d_psi * dl), normalize(psi0 + d_phi * dl), probs, lam0 + dl, n)
            for dl in grid
        ]
    )
    design = np.column_stack([grid**2 / 2, grid**3])
    coef, *_ = np.linalg.lstsq(design, dp, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coef - dp) ** 2)))
    if residual > residual_tol:
        raise NonquadraticRegimeError(f"curvature fit residual {residual:.3e} exceeds {residual_tol:g}; grid too wide")
    return float(coef[0])


def curvature_check(priors, dlambda_grid=None, tol=0.01):
    details = []
    for probs in priors:
        probs = np.asarray(probs, dtype=float)
        n = probs.size
        rec = {"n": n}
        try:
            s = curvature_S(probs, n)
            fit = empirical_curvature(probs, n, dlambda_grid)
            rel = abs(fit - s) / abs(s)
            rec.update(expected=s, actual=fit, abs_error=abs(fit - s), rel_error=rel, passed=rel <= tol)
        except QsoptError as exc:
            rec.update(error=f"{type(exc).__name__}: {exc}", abs_error=math.inf, rel_error=math.inf, passed=False)
        details.append(rec)
    return _report("curvature", details, tol)


# constrained ascent -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AscentResult:
    psi: np.ndarray
    phi: np.ndarray
    pbar: float
    converged: bool
    iterations: int
    residual_psi: float
    residual_phi: float


def _tangent(v, g):
    return g - (v @ g) * v


def _residuals(psi, phi, probs, lam, n):
    g = gradient_bundle(psi, phi, probs, lam, n)
    return _tangent(psi, g.a_psi), _tangent(phi, g.b_phi)


def _stationarity_map(z, probs, lam, theta, n):
    """Tangential gradients at the normalized point; complex-safe."""
    psi, phi = z[:n], z[n:]
    psi = psi / np.sqrt(psi @ psi)
    phi = phi / np.sqrt(phi @ phi)
    a, b, _ = _kernel(psi, phi, probs, lam, theta)
    return np.concatenate([a - (psi @ a) * psi, b - (phi @ b) * phi])


def _newton_polish(psi, phi, probs, lam, n, tol, max_steps=8):
    """Newton steps on the tangential-gradient equations, complex-step Jacobian."""
    theta = grover_angle(n)
    h = 1e-30
    for _ in range(max_steps):
        z = np.concatenate([psi, phi])
        F = _stationarity_map(z, probs, lam, theta, n)
        if np.abs(F).max() < tol / 10:
            break
        J = np.empty((2 * n, 2 * n))
        for i in range(2 * n):
            zc = z.astype(complex)
            zc[i] += 1j * h
            J[:, i] = _stationarity_map(zc, probs, lam, theta, n).imag / h
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        new_psi = normalize(psi + step[:n])
        new_phi = normalize(phi + step[n:])
        ra, rb = _residuals(new_psi, new_phi, probs, lam, n)
        if max(np.linalg.norm(ra), np.linalg.norm(rb)) >= np.linalg.norm(F):
            break
        psi, phi = new_psi, new_phi
    return psi, phi


def constrained_ascent(prior, n=None, lam=None, max_iters=20000, tol=1e-9, psi_init=None, phi_init=None, polish=True,
                       handoff=1e-4):
    """Maximize the average success over unit ``psi`` and ``phi`` at fixed ``lam``.

    Projected gradient ascent: step along the tangential gradients, renormalize,
    backtrack by halving from 0.1.  Progress is measured on the failure
    probability, which keeps resolution where the success is within rounding
    of 1.  Once the tangential gradient drops below ``handoff`` (or the line
    search stalls), a few Newton steps on the tangential gradient equations
    finish the job; ``polish=False`` keeps the run purely first-order.
    """
    probs = np.array(as_probs(prior), dtype=float)
    n = probs.size if n is None else int(n)
    if lam is None or not lam > 0:
        raise InvalidInputError("lambda must be positive")
    psi0 = np.asarray(uniform_state(n))
    psi = normalize(psi0 if psi_init is None else psi_init)
    phi = normalize(psi0 if phi_init is None else phi_init)

    fail = average_failure(psi, phi, probs, lam, n)
    step_prev = 0.1
    it = 0
    for it in range(1, max_iters + 1):
        ra, rb = _residuals(psi, phi, probs, lam, n)
        res = max(np.linalg.norm(ra), np.linalg.norm(rb))
        if res < tol or (polish and res < handoff):
            break
        slope = ra @ ra + rb @ rb
        step = min(0.1, 2 * step_prev)
        while True:
            cand_psi = normalize(psi + step * ra)
            cand_phi = normalize(phi + step * rb)
            cand = average_failure(cand_psi, cand_phi, probs, lam, n)
            if cand <= fail - 1e-4 * step * slope:
                break
            step /= 2
            if step < 1e-14:
                break
        if step < 1e-14:
            break
        psi, phi, fail, step_prev = cand_psi, cand_phi, cand, step

    if polish:
        psi, phi = _newton_polish(psi, phi, probs, lam, n, tol)
    ra, rb = _residuals(psi, phi, probs, lam, n)
    res_a, res_b = float(np.linalg.norm(ra)), float(np.linalg.norm(rb))
    converged = max(res_a, res_b) < tol
    if not converged:
        log.warning("ascent stopped after %d iterations with residual %.3e", it, max(res_a, res_b))
    pbar = 1.0 - average_failure(psi, phi, probs, lam, n)
    return AscentResult(psi, phi, pbar, converged, it, res_a, res_b)


def proportionality_residual(psi, phi, prior, lam, n=None):
    """How far ``a_psi`` is from being parallel to ``psi`` (and ``b_phi`` to ``phi``)."""
    ra, rb = _residuals(as_vector(psi), as_vector(phi), as_probs(prior), lam, n or len(psi))
    return max(float(np.linalg.norm(ra)), float(np.linalg.norm(rb)))


def perturbation_gain(psi, phi, prior, lam, n=None, size=1e-4, directions=20, seed=0):
    """Largest success gain from random tangential moves of length ``size``.

    At a constrained maximum every such move costs about ``size^2``, so a
    positive return value flags a point that is not a local maximum.
    """
    psi, phi = np.asarray(psi, dtype=float), np.asarray(phi, dtype=float)
    probs = as_probs(prior)
    n = psi.size if n is None else n
    base = average_failure(psi, phi, probs, lam, n)
    rng = np.random.default_rng(seed)
    best = -math.inf
    for _ in range(directions):
        u, v = rng.normal(size=psi.size), rng.normal(size=psi.size)
        u -= psi * (psi @ u)
        v -= phi * (phi @ v)
        scale = size / math.sqrt(u @ u + v @ v)
        moved = average_failure(normalize(psi + scale * u), normalize(phi + scale * v), probs, lam, n)
        best = max(best, base - moved)
    return float(best)


def multistart_ascent(prior, n=None, lam=None, seeds=5, noise=1e-3, **kwargs):
    """Ascent from ``seeds`` perturbed copies of the uniform state.

    Returns the list of results and the largest pairwise distance between the
    optimized initial states (sign-insensitive), a measure of disagreement.
    """
    probs = np.array(as_probs(prior), dtype=float)
    n = probs.size if n is None else int(n)
    psi0 = np.asarray(uniform_state(n))
    results = []
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        start_psi = normalize(psi0 + noise * rng.normal(size=n))
        start_phi = normalize(psi0 + noise * rng.normal(size=n))
        results.append(constrained_ascent(probs, n, lam, psi_init=start_psi, phi_init=start_phi, **kwargs))
    spread = 0.0
    for i, r in enumerate(results):
        for s in results[i + 1 :]:
            d = min(np.linalg.norm(r.psi - s.psi), np.linalg.norm(r.psi + s.psi))
            spread = max(spread, float(d))
    return results, spread


# matrix inverse -----------------------------------------------------------------


def minv_numeric_check(spec, tol=1e-8):
    if spec.n > 400:
        raise InvalidInputError("dense inversion check is limited to n <= 400")
    M = build_system(spec.probs(), spec.n).M
    rec = {"n": spec.n, "k": spec.k, "p": spec.p}
    try:
        _, cond = _factor(M)
    except SingularSystemError as exc:
        rec.update(condition=exc.condition, abs_error=math.inf, rel_error=math.inf, passed=False, error=str(exc))
        return _report("minv", [rec], tol)
    dense = np.linalg.inv(M)
    closed = minv_closed_form(spec).dense()
    err = float(np.abs(closed - dense).max())
    rel = err / float(np.abs(dense).max())
    rec.update(condition=cond, abs_error=err, rel_error=rel, passed=err <= tol)
    return _report("minv", [rec], tol)


def minv_grid_check(specs, tol=1e-8):
    details = []
    for spec in specs:
        details.extend(minv_numeric_check(spec, tol).details)
    return _report("minv", details, tol)


def default_minv_specs():
    return [
        TwoValueSpec(20, 4, 0.1),
        TwoValueSpec(20, 4, 0.05),
        TwoValueSpec(100, 10, 0.05),
        TwoValueSpec(200, 50, 0.002),
        TwoValueSpec(200, 100, 0.003),
    ]
