"""Real state vectors, prior distributions and per-target rotation geometry."""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePriorError,
    DegenerateSubspaceError,
    InvalidDimensionError,
    InvalidInputError,
    InvalidTargetError,
    UndefinedAngleError,
)

NORM_TOL = 1e-12
SUM_TOL = 1e-12
SUBSPACE_TOL = 1e-12
WEIGHT_TOL = 1e-24


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriorDistribution:
    """Probabilities ``p_t`` that element ``t`` is the one searched for."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size < 2:
            raise InvalidDimensionError("a prior needs at least 2 entries")
        if not np.all(np.isfinite(probs)):
            raise InvalidInputError("prior contains non-finite entries")
        if np.any(probs < 0):
            raise InvalidInputError("prior contains negative entries")
        if abs(probs.sum() - 1.0) > SUM_TOL:
            raise InvalidInputError(f"prior sums to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def n(self):
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True, eq=False)
class UnitRealVector:
    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amps)
        if amps.ndim != 1 or amps.size < 1:
            raise InvalidDimensionError("amplitudes must form a non-empty 1-D vector")
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
            raise InvalidInputError(f"vector norm is {norm!r}, expected 1")
        object.__setattr__(self, "amps", amps)

    @property
    def n(self):
        return self.amps.size

    def __array__(self, dtype=None, copy=None):
        return self.amps if dtype is None else self.amps.astype(dtype)

    def __len__(self):
        return self.amps.size


@dataclass(frozen=True)
class IterationGeometry:
    """Scalars describing how one Grover iteration acts for target ``t``.

    ``orientation`` is the sign of ``<t_perp|psi>`` when ``t_perp`` is the
    Gram-Schmidt partner of ``|t>`` built from ``phi``.  The rotation angle
    that reproduces the exact dynamics is ``orientation * beta``.
    """

    a_t: float
    b_t: float
    c: float
    parallel_weight: float
    phi0: float
    beta: float
    orientation: int = 1


def as_vector(v):
    """Plain float array view of a vector-like input."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise InvalidDimensionError("expected a 1-D vector")
    return arr


def as_probs(prior):
    if isinstance(prior, PriorDistribution):
        return prior.probs
    return PriorDistribution(prior).probs


def normalize(v):
    v = as_vector(v)
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise InvalidInputError("cannot normalize a zero or non-finite vector")
    return v / norm


def uniform_state(n):
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {n!r}")
    n = int(n)
    return UnitRealVector(np.full(n, 1.0 / np.sqrt(n)))


def prior_from_weights(weights):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise InvalidInputError("weights must be a 1-D sequence")
    if w.size < 2:
        raise InvalidDimensionError("a prior needs at least 2 entries")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite")
    if np.any(w < 0):
        raise InvalidInputError("weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise DegeneratePriorError("all weights are zero")
    return PriorDistribution(w / total)


def _check_target(t, n):
    if int(t) != t or not 0 <= t < n:
        raise InvalidTargetError(f"target index {t!r} outside [0, {n})")
    return int(t)


def target_geometry(psi, phi, t):
    psi, phi = as_vector(psi), as_vector(phi)
    if psi.size != phi.size:
        raise InvalidDimensionError("psi and phi differ in length")
    t = _check_target(t, psi.size)
    a, b = psi[t], phi[t]
    c = float(phi @ psi)
    if abs(abs(b) - 1.0) <= SUBSPACE_TOL:
        raise DegenerateSubspaceError(f"|<t|phi>| = 1 for target {t}")
    u = (c - b * a) / np.sqrt(1.0 - b * b)
    weight = a * a + u * u
    if weight < WEIGHT_TOL:
        raise UndefinedAngleError(f"psi has no component in the plane of target {t}")
    phi0 = np.arcsin(np.clip(a / np.sqrt(weight), -1.0, 1.0))
    return IterationGeometry(
        a_t=float(a),
        b_t=float(b),
        c=c,
        parallel_weight=float(min(weight, 1.0)),
        phi0=float(phi0),
        beta=float(np.arcsin(b)),
        orientation=1 if u >= 0 else -1,
    )


def project_onto_plane(psi, phi, t):
    """``P_t psi``: projection of ``psi`` on span{|t>, |phi>}."""
    psi, phi = as_vector(psi), as_vector(phi)
    t = _check_target(t, psi.size)
    a, b, c = psi[t], phi[t], phi @ psi
    d = 1.0 - b * b
    if d <= 2 * SUBSPACE_TOL:
        raise DegenerateSubspaceError(f"|<t|phi>| = 1 for target {t}")
    out = ((c - b * a) / d) * phi
    out[t] += (a - b * c) / d
    return out
