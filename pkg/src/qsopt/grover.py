"""Generalized Grover iteration: exact simulation and analytic probabilities.

One iteration is ``G = D O``: the oracle flips the sign of the target
amplitude and the diffusion reflects about an arbitrary unit axis ``phi``.
Iterations are applied as rank-one updates, never as dense matrices.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSubspaceError, InvalidInputError, InvalidTargetError
from .states import SUBSPACE_TOL, as_probs, as_vector, target_geometry

# Slack used when taking ceil(lambda / (2 theta)) so that lambda_of_j round-trips.
_CEIL_SLACK = 1e-9


def grover_angle(n):
    """``arcsin(1/sqrt(n))``, the standard single-step half-angle."""
    if n < 2:
        raise InvalidInputError(f"n must be >= 2, got {n!r}")
    return math.asin(1.0 / math.sqrt(n))


def std_lambda(n):
    return math.pi / 2 - grover_angle(n)


@dataclass(frozen=True)
class GroverSchedule:
    n: int
    j: int
    lam: float

    def __post_init__(self):
        if self.j < 0:
            raise InvalidInputError("j must be non-negative")

    @classmethod
    def from_j(cls, n, j):
        return cls(int(n), int(j), lambda_of_j(n, j))

    @classmethod
    def from_lambda(cls, n, lam):
        return cls(int(n), j_of_lambda(n, lam), float(lam))


def apply_oracle(state, t):
    out = np.array(as_vector(state), dtype=float)
    if int(t) != t or not 0 <= t < out.size:
        raise InvalidTargetError(f"target index {t!r} outside [0, {out.size})")
    out[int(t)] = -out[int(t)]
    return out


def apply_diffusion(state, axis):
    state, axis = as_vector(state), as_vector(axis)
    return 2.0 * (axis @ state) * axis - state


def run_iterations(psi, phi, t, j):
    """Return ``G^j psi`` with ``G`` the oracle for ``t`` followed by reflection about ``phi``."""
    if j < 0:
        raise InvalidInputError("j must be non-negative")
    phi = as_vector(phi)
    state = np.array(as_vector(psi), dtype=float)
    if int(t) != t or not 0 <= t < state.size:
        raise InvalidTargetError(f"target index {t!r} outside [0, {state.size})")
    t = int(t)
    for _ in range(int(j)):
        state[t] = -state[t]
        state = 2.0 * (phi @ state) * phi - state
    return state


def success_probability_exact(psi, phi, t, j):
    amp = run_iterations(psi, phi, t, j)[int(t)]
    return float(amp * amp)


def success_probability_analytic(psi, phi, t, j):
    g = target_geometry(psi, phi, t)
    return g.parallel_weight * math.sin(2 * j * g.orientation * g.beta + g.phi0) ** 2


def simulated_average_success(psi, phi, prior, j):
    """Prior-weighted exact success after ``j`` iterations.

    Targets sharing the same ``(p_t, psi_t, phi_t)`` triple are related by a
    permutation fixing both vectors, so one simulation per distinct triple is
    enough.
    """
    psi, phi = as_vector(psi), as_vector(phi)
    probs = as_probs(prior)
    keys = np.stack([probs, psi, phi], axis=1)
    live = probs > 0
    uniq, first, inverse = np.unique(keys[live], axis=0, return_index=True, return_inverse=True)
    idx = np.flatnonzero(live)
    total = 0.0
    weights = np.bincount(inverse.ravel(), weights=probs[live], minlength=len(uniq))
    for w, k in zip(weights, first):
        total += w * success_probability_exact(psi, phi, idx[k], j)
    return float(total)


def _rotation_terms(psi, phi, probs, lam, n):
    """Per-target pieces shared by ``average_success`` and ``average_failure``."""
    live = probs > 0
    a, b, p = psi[live], phi[live], probs[live]
    if np.any(np.abs(np.abs(b) - 1.0) <= SUBSPACE_TOL):
        raise DegenerateSubspaceError("|<t|phi>| = 1 for a target with p_t > 0")
    c = phi @ psi
    s = np.sqrt(1.0 - b * b)
    x = lam * np.arcsin(b) / grover_angle(n)
    u = (c - b * a) / s
    return a, b, c, p, u, x, live


def average_success(psi, phi, prior, lam, n=None):
    """Prior-averaged success probability at renormalized count ``lam``.

    Evaluated as ``sum_t p_t (a_t cos x_t + u_t sin x_t)^2`` with
    ``x_t = lam * arcsin(b_t) / arcsin(1/sqrt(n))`` and ``u_t`` the signed
    component of ``psi`` along the in-plane partner of ``|t>``.  This equals
    ``w_t sin^2(x_t + phi0_t)`` when the orientation is positive and stays
    correct for either orientation.  Targets with ``p_t = 0`` are skipped.
    """
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")
    psi, phi = as_vector(psi), as_vector(phi)
    probs = as_probs(prior)
    n = psi.size if n is None else n
    a, b, c, p, u, x, _ = _rotation_terms(psi, phi, probs, lam, n)
    f = a * np.cos(x) + u * np.sin(x)
    return float(np.sum(p * f * f))


def average_failure(psi, phi, prior, lam, n=None):
    """``|psi|^2 - average_success`` computed without cancellation.

    For each target the missed probability splits into the in-plane part
    orthogonal to ``|t>`` after rotation and the part of ``psi`` outside the
    plane.  Both are formed directly, so failures far below machine epsilon
    relative to 1 keep full relative precision.  ``phi`` must be unit norm.
    """
    psi, phi = as_vector(psi), as_vector(phi)
    probs = as_probs(prior)
    n = psi.size if n is None else n
    a, b, c, p, u, x, live = _rotation_terms(psi, phi, probs, lam, n)
    g = u * np.cos(x) - a * np.sin(x)
    d = psi - c * phi
    out_of_plane = (d @ d) - d[live] ** 2 / (1.0 - b * b)
    return float(np.sum(p * (g * g + np.maximum(out_of_plane, 0.0))))


def standard_grover_prob(n, j):
    if j < 0:
        raise InvalidInputError("j must be non-negative")
    return math.sin((2 * j + 1) * grover_angle(n)) ** 2


def j_of_lambda(n, lam):
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")
    ratio = lam / (2 * grover_angle(n))
    return int(math.ceil(ratio - _CEIL_SLACK * max(1.0, ratio)))


def lambda_of_j(n, j):
    if j < 0:
        raise InvalidInputError("j must be non-negative")
    return 2 * j * grover_angle(n)


def standard_count(n):
    """Oracle calls used by standard Grover: ``ceil(lambda_std / (2 theta))``."""
    return j_of_lambda(n, std_lambda(n))
