"""Closed forms for the two-value prior.

``K`` elements carry probability ``p`` each and the other ``N - K`` carry
``q = (1 - K p) / (N - K)``.  Vectors of length ``2N`` are ordered as
``(psi_K, psi_L, phi_K, phi_L)`` where ``L`` denotes the ``N - K`` block.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModelError, InvalidGridError, InvalidInputError
from .grover import average_failure, grover_angle, std_lambda
from .optimizer import _outcome, check_budget
from .states import PriorDistribution

log = logging.getLogger(__name__)

_DEN_TOL = 1e-15
_Q_GUARD = 1e-15


@dataclass(frozen=True)
class TwoValueSpec:
    n: int
    k: int
    p: float
    # exact probability of the other block, set by ``swapped`` to avoid re-deriving it
    q_exact: float = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise InvalidInputError("n and k must be integers")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "p", float(self.p))
        if not 1 <= self.k < self.n:
            raise InvalidInputError(f"need 1 <= k < n, got k={self.k}, n={self.n}")
        if not (self.p >= 0 and math.isfinite(self.p)):
            raise InvalidInputError(f"p must be a non-negative probability, got {self.p!r}")
        if self.k * self.p > 1 + _Q_GUARD:
            raise InvalidInputError(f"k*p = {self.k * self.p!r} exceeds 1")
        if self.q_exact is not None:
            total = self.k * self.p + (self.n - self.k) * self.q_exact
            if not (self.q_exact >= 0 and abs(total - 1) <= 1e-12):
                raise InvalidInputError(f"q_exact={self.q_exact!r} is inconsistent with k, p")

    @property
    def q(self):
        if self.q_exact is not None:
            return self.q_exact
        rest = 1.0 - self.k * self.p
        if abs(rest) <= _Q_GUARD:
            return 0.0
        return rest / (self.n - self.k)

    @property
    def theta(self):
        return grover_angle(self.n)

    def probs(self):
        out = np.full(self.n, self.q)
        out[: self.k] = self.p
        return out

    def prior(self):
        return PriorDistribution(self.probs())

    def swapped(self):
        """The same model with the two blocks relabelled."""
        return TwoValueSpec(self.n, self.n - self.k, self.q, q_exact=self.p)


def _nonzero(value, name):
    if abs(value) < _DEN_TOL:
        raise DegenerateModelError(f"vanishing factor {name} in closed form")
    return value


def s_factor(spec):
    """``2Np(Kp - 1) / (-2Kp + K/N + Np)``.

    Evaluated as ``-2 N^2 p q / ((N - K) p + K q)``, the same quantity after
    using ``Kp + (N - K) q = 1``: symmetric in the two blocks and free of the
    cancellation in ``Kp - 1`` near ``Kp = 1``.
    """
    n, k, p, q = spec.n, spec.k, spec.p, spec.q
    den = _nonzero((n - k) * p + k * q, "(-2Kp + K/N + Np)")
    return -2.0 * n * n * p * q / den


def _d_prime(spec):
    n, k, p = spec.n, spec.k, spec.p
    return -2 * k * n * p + k + n * n * p


def delta_j(spec, delta_p):
    """Change of the oracle count, ``dlambda / (2 theta)``, for failure budget ``delta_p``."""
    if delta_p < 0:
        raise InvalidInputError("delta_p must be non-negative")
    if delta_p == 0:
        return 0.0
    s = s_factor(spec)
    if s == 0:
        raise DegenerateModelError("S = 0: the reduction is unbounded at this order")
    return -math.sqrt(2 * delta_p / abs(s)) / (2 * spec.theta)


def direction_coefficients(spec):
    """The two distinct entries of ``dpsi/dlambda = dphi/dlambda``."""
    n, k, p = spec.n, spec.k, spec.p
    den = _nonzero(_d_prime(spec), "(-2KNp + K + N^2 p)")
    c = 2 * math.sqrt((n - 1) / n) * (n * p - 1) * spec.theta / (math.pi * den)
    return c * (k - n), c * k


def first_order_direction_closed(spec):
    dk, dl = direction_coefficients(spec)
    d = np.full(spec.n, dl)
    d[: spec.k] = dk
    return d, d.copy()


def higher_order_coeffs(spec, variant="derived"):
    """Third-order coefficient ``G`` and first-order-in-dP coefficient ``B``.

    ``variant="derived"`` gives the coefficients that reproduce the exact
    success curve along the optimal path.  ``variant="legacy"`` keeps the
    older expressions with denominator ``(-2KNp + K + Np)``; they are
    retained for comparison only.
    """
    n, k, p = spec.n, spec.k, spec.p
    th = spec.theta
    if variant == "derived":
        dp = _nonzero(_d_prime(spec), "(-2KNp + K + N^2 p)")
        g = 12 * k * (n - k) * (n - 2) * n**2 * p * (1 - k * p) * (n * p - 1) ** 2 * th / (
            math.pi * math.sqrt(n - 1) * dp**3
        )
        _nonzero(p, "p")
        _nonzero(k * p - 1, "(Kp - 1)")
        b = k * th * (n - k) * (n - 2) * (n * p - 1) ** 2 / (
            math.pi * n**2 * p * math.sqrt(n - 1) * (k * p - 1) * dp
        )
        return g, b
    if variant == "legacy":
        den = _nonzero(-2 * k * n * p + k + n * p, "(-2KNp + K + Np)")
        g = -12 * (k - 1) * k * (n - 2) * n * p * (n * p - 1) ** 2 * (k * n * p - 1) * th / (
            math.pi * math.sqrt(n - 1) * den**3
        )
        _nonzero(n * p, "Np")
        _nonzero(k * n * p - 1, "(KNp - 1)")
        b = -(k - 1) * k * (n - 2) * (n * p - 1) ** 2 * th / (
            math.pi * math.sqrt(n - 1) * n * p * den * (k * n * p - 1)
        )
        return g, b
    raise InvalidInputError(f"unknown variant {variant!r}")


def dlambda_third_order(spec, dpbar, variant="derived"):
    """Count change for a success drop ``dpbar >= 0``, including the next order."""
    if dpbar < 0:
        raise InvalidInputError("dpbar must be non-negative")
    if dpbar == 0:
        return 0.0
    s = s_factor(spec)
    if s == 0:
        raise DegenerateModelError("S = 0: the expansion does not exist")
    _, b = higher_order_coeffs(spec, variant)
    return -math.sqrt(2 * dpbar / abs(s)) - b * dpbar


def valid_range(spec, variant="derived"):
    _, b = higher_order_coeffs(spec, variant)
    if b == 0:
        return math.inf
    return 2 / (abs(s_factor(spec)) * b * b)


def exact_ratio_scan(spec, dlambda_grid):
    """Exact success change along the first-order path.

    Returns rows ``(dlambda, dpbar, ratio)`` with ``dpbar`` the (negative)
    change of the average success and ``ratio = dpbar / dlambda^2``, so that
    ``2 * ratio`` tends to ``S`` as ``dlambda`` goes to 0.
    """
    grid = np.asarray(dlambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidGridError("dlambda grid is empty")
    if not np.all(np.isfinite(grid)) or np.any(grid == 0):
        raise InvalidGridError("dlambda grid must contain finite non-zero values")
    n = spec.n
    lam0 = std_lambda(n)
    if np.any(lam0 + grid < 0):
        raise InvalidGridError("dlambda grid reaches a negative oracle count")
    probs = spec.probs()
    direction, _ = first_order_direction_closed(spec)
    psi0 = np.full(n, 1.0 / math.sqrt(n))
    rows = []
    for dl in grid:
        psi = psi0 + direction * dl
        norm = np.linalg.norm(psi)
        if not (np.isfinite(norm) and norm > 0):
            raise InvalidGridError(f"state vanishes at dlambda={dl!r}")
        psi = psi / norm
        dp = -average_failure(psi, psi, probs, lam0 + dl, n)
        rows.append((float(dl), dp, dp / (dl * dl)))
    return rows


def ratio_limit(rows):
    """``2 * ratio`` extrapolated linearly to ``dlambda = 0`` from the two smallest points."""
    if len(rows) < 2:
        raise InvalidGridError("need at least two grid points")
    pts = sorted(rows, key=lambda r: abs(r[0]))[:2]
    (h1, _, r1), (h2, _, r2) = pts
    if h1 == h2:
        raise InvalidGridError("the two smallest grid points coincide")
    return 2 * (h2 * r1 - h1 * r2) / (h2 - h1)


class BlockMatrix:
    """2N x 2N matrix whose 16 blocks are ``alpha * I + beta * ones``.

    Groups are ``(psi_K, psi_L, phi_K, phi_L)`` with sizes ``(K, L, K, L)``.
    Identity parts only connect groups of the same kind (both K or both L).
    """

    def __init__(self, ident, ones, k, n):
        self.ident = np.asarray(ident, dtype=float).reshape(4, 4)
        self.ones = np.asarray(ones, dtype=float).reshape(4, 4)
        self.k, self.n = int(k), int(n)
        self.sizes = np.array([k, n - k, k, n - k])
        kind = np.arange(4) % 2
        if np.any(self.ident[kind[:, None] != kind[None, :]] != 0):
            raise InvalidInputError("identity parts may only link groups of the same kind")

    def _slices(self):
        edges = np.concatenate([[0], np.cumsum(self.sizes)])
        return [slice(edges[g], edges[g + 1]) for g in range(4)]

    def dense(self):
        out = np.zeros((2 * self.n, 2 * self.n))
        sl = self._slices()
        for g in range(4):
            for h in range(4):
                blk = out[sl[g], sl[h]]
                blk += self.ones[g, h]
                if self.ident[g, h]:
                    blk[np.diag_indices(self.sizes[g])] += self.ident[g, h]
        return out

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        sl = self._slices()
        sums = np.array([v[s].sum() for s in sl])
        out = np.empty_like(v)
        for g in range(4):
            part = self.ones[g] @ sums * np.ones(self.sizes[g])
            for h in range(4):
                if self.ident[g, h]:
                    part = part + self.ident[g, h] * v[sl[h]]
            out[sl[g]] = part
        return out

    def __matmul__(self, other):
        if not isinstance(other, BlockMatrix):
            return self.matvec(other)
        s = self.sizes
        ident = self.ident @ other.ident
        ones = self.ident @ other.ones + self.ones @ other.ident + self.ones @ (s[:, None] * other.ones)
        return BlockMatrix(ident, ones, self.k, self.n)

    def inverse(self):
        """Exact inverse, computed from a 2x2 problem per kind and one 4x4 problem."""
        ident_inv = np.zeros((4, 4))
        for kind in (0, 1):
            idx = np.ix_([kind, kind + 2], [kind, kind + 2])
            sub = self.ident[idx]
            if abs(np.linalg.det(sub)) < _DEN_TOL:
                raise DegenerateModelError("singular identity part")
            ident_inv[idx] = np.linalg.inv(sub)
        root = np.sqrt(self.sizes.astype(float))
        scale = np.outer(root, root)
        reduced = self.ident + self.ones * scale
        ones_inv = (np.linalg.inv(reduced) - ident_inv) / scale
        return BlockMatrix(ident_inv, ones_inv, self.k, self.n)


def system_blocks(spec):
    """The linear system matrix for a two-value prior in block form."""
    n, p, q, th = spec.n, spec.p, spec.q, spec.theta
    pi = math.pi
    c1 = pi / ((n - 1) * th)
    r = (pi - 4 * th) / (2 * th)
    ident = np.zeros((4, 4))
    ones = np.zeros((4, 4))
    x = (p, q)
    for g in (0, 1):
        o = 1 - g
        ident[g, g] = 2.0
        # psi rows, phi columns
        ident[g, g + 2] = c1 * n * x[g] - 2
        ones[g, g + 2] = 2 / n - c1 * x[g]
        ones[g, o + 2] = 2 / n - c1 * x[o]
        # phi rows, psi columns
        ident[g + 2, g] = c1 * n * x[g] - 2
        ones[g + 2, g] = c1 / n + 2 / n - 2 * c1 * x[g]
        ones[g + 2, o] = c1 / n + 2 / n - c1 * (p + q)
        # phi rows, phi columns
        ident[g + 2, g + 2] = 2 + c1 * n * x[g] * r
        ones[g + 2, g + 2] = c1 * (1 / n - x[g]) - c1 * x[g] * r
        ones[g + 2, o + 2] = c1 * (1 / n - x[g]) - c1 * x[o] * r
    return BlockMatrix(ident, ones, spec.k, n)


def minv_coefficients(spec):
    """Scalar functions alpha_i(x), beta_i(x, y), gamma_i of the inverse, at (p, q) and (q, p)."""
    n, p, q, th = spec.n, spec.p, spec.q, spec.theta
    pi = math.pi
    m = n - 1

    def fac(x):
        return _nonzero(x, "x") * _nonzero(n * (x - 1) + 1, "(N(x-1)+1)")

    s1 = _nonzero(p + q - 1, "(p+q-1)")
    s2 = _nonzero(n * (p + q) - 1, "(N(p+q)-1)")
    common = lambda x, y: n * x * x - n * p * q - x - n * y * y + n * y

    def a1(x):
        return -m * (pi**2 * n * x - 4 * pi * n * x * th + 4 * m * th**2) / (2 * pi**2 * n * fac(x))

    def a2(x):
        return m * th * (pi * n * x - 2 * m * th) / (pi**2 * n * fac(x))

    def a4(x):
        return -2 * m**2 * th**2 / (pi**2 * n * fac(x))

    def b1(x, y):
        return (
            -4 * m**2 * th**2 * common(x, y)
            - 4 * m * th * pi * x * (n * (y - 1) + 1) * s2
            + pi**2 * x * s2 * (n * (n * x * x + n * p * q - 2 * n * x + x + 1) - 1)
        ) / (2 * pi**2 * n**2 * fac(x) * s1 * s2)

    def b2(x, y):
        return (
            -2 * m * th * pi * x * (n * (2 * n * x * x + n * p * q - 3 * n * x + n * y * y - n * y + x + 3) - 3)
            - 4 * m**2 * th**2 * common(x, y)
            + pi**2 * x * (n * (x - 1) + 1) * (n * x - 1) * (n * (p + q + 1) - 2)
        ) / (2 * pi**2 * n**2 * fac(x) * s1 * s2)

    def b3(x, y):
        return (-m * th / (pi**2 * n**2 * fac(x) * s2 * s1)) * (
            pi * x * (n * (y - 1) + 1) * s2 + 2 * m * th * common(x, y)
        )

    def b4(x, y):
        return (
            -4 * m * th * (m * th * common(x, y) + pi * x * (n * (x - 1) + 1) * (n * x - 1))
        ) / (2 * pi**2 * n**2 * fac(x) * s2 * s1) + y / (2 * s2)

    g1 = (pi * s2 - 2 * m * th) ** 2 / (2 * pi**2 * n**2 * s1 * s2)
    g3 = m * th * (-pi * n * (p + q) + 2 * m * th + pi) / (pi**2 * n**2 * s1 * s2)

    def g2(x, y):
        return (pi**2 * (n * x - 1) * (n * (p + q + 1) - 2) + 2 * m * th * (3 * pi - pi * n * (3 * x + y) + 2 * m * th)) / (
            2 * pi**2 * n**2 * s1 * s2
        )

    def g4(x, y):
        return 4 * m * th * (-pi * n * x + m * th + pi) / (2 * pi**2 * n**2 * s1 * s2) + y / (2 * s2)

    out = {}
    for tag, (x, y) in (("p", (p, q)), ("q", (q, p))):
        out[f"alpha1({tag})"] = a1(x)
        out[f"alpha2({tag})"] = a2(x)
        out[f"alpha3({tag})"] = a2(x)
        out[f"alpha4({tag})"] = a4(x)
        out[f"beta1({tag})"] = b1(x, y)
        out[f"beta2({tag})"] = b2(x, y)
        out[f"beta3({tag})"] = b3(x, y)
        out[f"beta4({tag})"] = b4(x, y)
        out[f"gamma2({tag})"] = g2(x, y)
        out[f"gamma4({tag})"] = g4(x, y)
    out["gamma1"] = g1
    out["gamma3"] = g3
    return out


def minv_closed_form(spec):
    """Inverse of the system matrix, assembled from the closed-form coefficients."""
    c = minv_coefficients(spec)
    ident = np.zeros((4, 4))
    ones = np.zeros((4, 4))
    for g, tag in ((0, "p"), (1, "q")):
        o = 1 - g
        ident[g, g], ones[g, g] = c[f"alpha1({tag})"], c[f"beta1({tag})"]
        ident[g, g + 2], ones[g, g + 2] = c[f"alpha2({tag})"], c[f"beta2({tag})"]
        ident[g + 2, g], ones[g + 2, g] = c[f"alpha3({tag})"], c[f"beta3({tag})"]
        ident[g + 2, g + 2], ones[g + 2, g + 2] = c[f"alpha4({tag})"], c[f"beta4({tag})"]
        ones[g, o] = c["gamma1"]
        ones[g, o + 2] = c[f"gamma2({tag})"]
        ones[g + 2, o] = c["gamma3"]
        ones[g + 2, o + 2] = c[f"gamma4({tag})"]
    return BlockMatrix(ident, ones, spec.k, spec.n)


@dataclass(frozen=True)
class TwoValueClosedForm:
    s: float
    g: float
    b: float
    direction_k: float
    direction_rest: float
    minv_coeffs: dict


def closed_form(spec):
    s = s_factor(spec)
    try:
        g, b = higher_order_coeffs(spec)
    except DegenerateModelError:
        g, b = math.nan, math.nan
    dk, dl = direction_coefficients(spec)
    try:
        coeffs = minv_coefficients(spec)
    except DegenerateModelError:
        coeffs = {}
    return TwoValueClosedForm(s, g, b, dk, dl, coeffs)


def optimize_two_value(spec, delta_p, repair=True):
    """Closed-form counterpart of ``optimizer.optimize``; linear cost in N."""
    delta_p = check_budget(delta_p)
    try:
        limit = 0.1 * valid_range(spec)
    except DegenerateModelError:
        limit = math.inf
    if delta_p > limit:
        log.warning("failure budget %g exceeds 0.1 x effective range (%g); second order is unreliable", delta_p, limit)
    d, _ = first_order_direction_closed(spec)
    return _outcome(spec.probs(), spec.n, s_factor(spec), delta_p, d, d.copy(), math.nan, repair)
