"""First variation of the average success probability.

``gradient_bundle`` returns the unnormalized gradient vectors ``a_psi`` and
``b_phi`` (derivatives of the average success with respect to the raw
coordinates of ``psi`` and ``phi``) together with ``c_lambda``.  The closed
forms are written so that they also accept complex arguments, which lets the
Jacobian-vector products below use the complex-step method.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSubspaceError
from .grover import grover_angle, std_lambda
from .states import SUBSPACE_TOL, as_probs, as_vector, uniform_state

_CSTEP = 1e-30


@dataclass(frozen=True, eq=False)
class GradientBundle:
    a_psi: np.ndarray
    b_phi: np.ndarray
    c_lambda: float


@dataclass(frozen=True, eq=False)
class StdBlocks:
    A_psipsi: np.ndarray
    A_psiphi: np.ndarray
    B_phipsi: np.ndarray
    B_phiphi: np.ndarray
    a_psilambda: np.ndarray
    b_philambda: np.ndarray
    eta: np.ndarray


def _kernel(psi, phi, probs, lam, theta):
    """Closed-form gradient; works for real or complex inputs (no abs/conj)."""
    live = np.flatnonzero(probs > 0)
    a, b, p = psi[live], phi[live], probs[live]
    if np.any(np.abs(np.abs(np.real(b)) - 1.0) <= SUBSPACE_TOL):
        raise DegenerateSubspaceError("|<t|phi>| = 1 for a target with p_t > 0")
    c = phi @ psi
    s = np.sqrt(1 - b * b)
    asb = np.arcsin(b)
    X = 2 * lam * asb / theta
    S2, C2 = np.sin(X), np.cos(X)
    d = b * b - 1

    dtype = np.result_type(psi, phi, lam)
    a_t = p * (s * (2 * a * b - c) * S2 + (a * (2 * b * b - 1) - b * c) * C2 - a + b * c) / d
    w_phi = p * (-a * s * S2 + (c - a * b) * C2 + a * b - c) / d
    a_psi = np.sum(w_phi) * phi.astype(dtype)
    a_psi[live] += a_t

    b_t = p / d**2 * (
        lam * (s * (a * a * (2 * b * b - 1) - 2 * a * b * c + c * c) * S2 + 2 * a * d * (a * b - c) * C2) / theta
        - (a - b * c) * (a * s * S2 + (a * b - c) * C2 - a * b + c)
    )
    w_psi = p * (a * s * S2 + (a * b - c) * C2 - a * b + c) / (1 - b * b)
    b_phi = np.sum(w_psi) * psi.astype(dtype)
    b_phi[live] += b_t

    c_lam = np.sum(p * asb * ((a * a * (1 - 2 * b * b) + 2 * a * b * c - c * c) * S2 + 2 * a * s * (a * b - c) * C2) / (d * theta))
    return a_psi, b_phi, c_lam


def gradient_bundle(psi, phi, prior, lam, n=None):
    psi, phi = as_vector(psi), as_vector(phi)
    probs = as_probs(prior)
    n = psi.size if n is None else n
    a_psi, b_phi, c_lam = _kernel(psi, phi, probs, float(lam), grover_angle(n))
    return GradientBundle(a_psi, b_phi, float(c_lam))


def gradient_jvp(psi, phi, prior, lam, dpsi, dphi, dlam, n=None):
    """Directional derivative of ``(a_psi, b_phi, c_lambda)`` along ``(dpsi, dphi, dlam)``.

    Uses a complex step, so the result carries no truncation or cancellation error.
    """
    psi, phi = as_vector(psi), as_vector(phi)
    probs = as_probs(prior)
    n = psi.size if n is None else n
    h = _CSTEP
    a, b, c = _kernel(
        psi + 1j * h * np.asarray(dpsi, dtype=float),
        phi + 1j * h * np.asarray(dphi, dtype=float),
        probs,
        lam + 1j * h * dlam,
        grover_angle(n),
    )
    return a.imag / h, b.imag / h, float(np.imag(c) / h)


def gradient_jacobian(psi, phi, prior, lam, n=None):
    """Dense Jacobian blocks at a general point, column by column.

    Returns ``(A_psipsi, A_psiphi, a_psilambda, B_phipsi, B_phiphi, b_philambda)``.
    Costs O(N^2); intended for checks and moderate N.
    """
    psi, phi = as_vector(psi), as_vector(phi)
    size = psi.size
    zero = np.zeros(size)
    cols = {"app": [], "apf": [], "bfp": [], "bff": []}
    for i in range(size):
        e = np.zeros(size)
        e[i] = 1.0
        da, db, _ = gradient_jvp(psi, phi, prior, lam, e, zero, 0.0, n)
        cols["app"].append(da)
        cols["bfp"].append(db)
        da, db, _ = gradient_jvp(psi, phi, prior, lam, zero, e, 0.0, n)
        cols["apf"].append(da)
        cols["bff"].append(db)
    a_l, b_l, _ = gradient_jvp(psi, phi, prior, lam, zero, zero, 1.0, n)
    stack = lambda key: np.column_stack(cols[key])
    return stack("app"), stack("apf"), a_l, stack("bfp"), stack("bff"), b_l


def std_point(n):
    psi0 = uniform_state(n)
    return psi0, psi0, std_lambda(n)


def std_blocks(prior, n=None):
    """Jacobian blocks of the gradient at the standard-Grover point."""
    eta = np.array(as_probs(prior), dtype=float)
    n = eta.size if n is None else n
    theta = grover_angle(n)
    theta_c = math.pi / 2 - theta
    rn, rn1 = math.sqrt(n), math.sqrt(n - 1)
    psi0 = np.full(n, 1.0 / rn)
    ident = np.eye(n)
    proj = np.full((n, n), 1.0 / n)
    pe = np.outer(psi0, eta)
    diag = np.diag(eta)

    A_pp = np.full((n, n), 2.0 / n)
    A_pf = 2 * (ident + proj) + (math.pi * rn * pe - math.pi * n * diag) / ((n - 1) * theta)
    B_fp = A_pf.T.copy()
    B_ff = (
        math.pi * n * (math.pi - 4 * theta_c) * diag / (2 * (n - 1) * theta**2)
        + math.pi * rn * (pe + pe.T) / ((n - 1) * theta)
        + 2 * proj
    )
    # written through (p_t - 1/n) so a uniform prior gives an exactly zero vector
    excess = eta - 1.0 / n
    a_l = -2 * rn * excess / rn1
    b_l = (4 / rn + 2 * rn * excess) / rn1 - rn * math.pi * eta / (rn1 * theta)
    return StdBlocks(A_pp, A_pf, B_fp, B_ff, a_l, b_l, eta)


def dc_lambda_std(prior, dpsi, dphi, dlam=1.0, n=None):
    """Differential of ``c_lambda`` at the standard point along ``(dpsi, dphi, dlam)``.

    Valid for tangent directions (orthogonal to the uniform state), which is
    all the constrained problem ever needs.
    """
    eta = as_probs(prior)
    n = eta.size if n is None else n
    theta = grover_angle(n)
    rn, rn1 = math.sqrt(n), math.sqrt(n - 1)
    return -2 * (
        rn * (math.pi / 2 - theta) * (eta @ np.asarray(dphi)) / (rn1 * theta)
        + rn * (eta @ np.asarray(dpsi)) / rn1
        + dlam
    )
