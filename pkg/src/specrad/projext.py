"""Projective linear extension of a matrix cocycle.

The extension lives on ``X x P(C^d)``: a direction ``[v]`` over ``x`` moves to
``[a(x)^* v]`` over ``phi(x)`` and contributes ``ln ||a(x)^* v||`` to a scalar
Birkhoff sum.  Maximizing that average over sampled orbits gives the linear
extension variational principle; a one-point base gives the refined Gelfand
formula, and ``d = 2`` reduces the fiber map to a Moebius transformation.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np

from .cocycle import (
    NEG_INF,
    Weight,
    product_along,
    spectral_exponent,
)
from .dynsys import PartialSystem, default_max_len, essential_domain, periodic_orbits
from .estimate import EXACT, SAMPLED, ExponentEstimate

log = logging.getLogger(__name__)

# estimates are rounded to this many decimals so they do not depend on the
# phase of the starting fiber vectors (which only moves the last bits)
ROUND_DECIMALS = 11
# prefix of each sampled orbit on which the product identity is re-checked
IDENTITY_CHECK_STEPS = 64
ATTRACTING_TOL = 1e-9


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Unit representative of ``[v]`` whose largest entry is real and positive."""
    v = np.asarray(v, dtype=complex)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ValueError("zero vector has no projective class")
    k = int(np.argmax(np.abs(v)))
    return v * (np.conj(v[k]) / abs(v[k])) / nv


@dataclass(frozen=True)
class ProjectivePoint:
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", canonical_phase(self.vector))

    def dist(self, other: "ProjectivePoint") -> float:
        ip = abs(np.vdot(self.vector, other.vector))
        return math.sqrt(max(0.0, 1.0 - ip * ip))

    def same_class(self, other: "ProjectivePoint", tol: float = 1e-12) -> bool:
        return self.dist(other) <= math.sqrt(tol)


@dataclass(frozen=True)
class LinearExtension:
    """``(x, [v]) -> (phi(x), [a(x)^* v])`` with scalar cocycle ``||a(x)^* v||``."""

    base: PartialSystem
    weight: Weight

    def __post_init__(self):
        self.weight.check_system(self.base)
        object.__setattr__(self, "_adj", self.weight.adjoint().values)

    def a_tilde(self, x: int, v) -> float:
        v = np.asarray(v, dtype=complex)
        return float(np.linalg.norm(self._adj[x] @ (v / np.linalg.norm(v))))

    def in_domain(self, x: int, v) -> bool:
        return bool(self.base.successors[x]) and self.a_tilde(x, v) > 0.0

    def fiber_map(self, x: int, v) -> ProjectivePoint | None:
        """``[a(x)^* v]``, or ``None`` when ``a(x)^* v = 0``."""
        z = self._adj[x] @ np.asarray(v, dtype=complex)
        if not np.any(z):
            return None
        return ProjectivePoint(z)

    def step(self, x: int, v) -> list[tuple[int, ProjectivePoint]]:
        """Images of ``(x, [v])``; one per successor of ``x`` (SFTs branch)."""
        p = self.fiber_map(x, v)
        if p is None:
            return []
        return [(y, p) for y in self.base.successors[x]]


def extend(w: Weight, sys: PartialSystem) -> LinearExtension:
    return LinearExtension(sys, w)


def _random_unit_vectors(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    """``k`` complex Gaussian directions as the columns of a ``d x k`` array."""
    Z = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    return Z / np.linalg.norm(Z, axis=0)


def _fiber_runs(adj: np.ndarray, states, Z: np.ndarray):
    """Iterate ``z <- a^*(s) z`` along ``states`` for every column of ``Z``.

    Returns the cumulative log growth, shape ``(n, k)``; a column that hits
    zero is ``-inf`` from then on.
    """
    Z = Z / np.linalg.norm(Z, axis=0)
    n, k = len(states), Z.shape[1]
    cum = np.empty((n, k))
    acc = np.zeros(k)
    for i, s in enumerate(states):
        Z = adj[s] @ Z
        nz = np.linalg.norm(Z, axis=0)
        dead = nz == 0.0
        with np.errstate(divide="ignore"):
            acc = acc + np.log(nz)
        Z = Z / np.where(dead, 1.0, nz)
        cum[i] = acc
    return cum


def _tail_rate(cum: np.ndarray) -> np.ndarray:
    n = cum.shape[0]
    if n < 2:
        return cum[-1] / n
    m = n // 2
    with np.errstate(invalid="ignore"):
        out = (cum[-1] - cum[m - 1]) / (n - m)
    return np.where(np.isneginf(cum[-1]), NEG_INF, out)


def product_identity_error(w: Weight, states, v) -> float:
    """Relative gap between ``||C^b_{a^*}(x, n) v||`` and the product of ``a~`` along the fiber orbit."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    P = product_along(w.adjoint(), states, backward=True)
    adj = w.adjoint().values
    logs = 0.0
    z = v
    for s in states:
        z = adj[s] @ z
        nz = np.linalg.norm(z)
        if nz == 0.0:
            logs = NEG_INF
            break
        logs += math.log(nz)
        z = z / nz
    if P.log_norm == NEG_INF:
        direct = NEG_INF
    else:
        pv = np.linalg.norm(P.normalized @ v)
        direct = NEG_INF if pv == 0.0 else P.log_norm + math.log(pv)
    if direct == NEG_INF or logs == NEG_INF:
        return 0.0 if direct == logs else math.inf
    return abs(math.expm1(logs - direct))


def extension_vp(
    w: Weight,
    sys: PartialSystem,
    n_max: int,
    fiber_samples: int = 8,
    seed: int = 0,
    max_len: int | None = None,
    fibers=None,
    norm: str = "l2",
) -> ExponentEstimate:
    """Sampled linear-extension principle.

    Every periodic base orbit in the essential domain of ``{a != 0}`` is paired
    with ``fiber_samples`` seeded random directions (or the columns of
    ``fibers``); each pair is followed for ``n_max`` steps and the average of
    ``ln a~`` over the last half of the run is recorded.  ``lower`` is the best
    such average, ``upper`` the gelfand upper bound of the same exponent.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if fiber_samples < 1:
        raise ValueError("fiber_samples must be >= 1")
    w.check_system(sys)
    core = essential_domain(sys, w.support)
    if not core:
        return ExponentEstimate(NEG_INF, NEG_INF, "extension_vp", EXACT, n_used=0,
                                meta={"empty_domain": True})
    if max_len is None:
        max_len = default_max_len(sys)
    if fibers is None:
        Z0 = _random_unit_vectors(np.random.default_rng(seed), w.dim, fiber_samples)
    else:
        Z0 = np.asarray(fibers, dtype=complex).reshape(w.dim, -1)
    Z0 = np.stack([canonical_phase(Z0[:, j]) for j in range(Z0.shape[1])], axis=1)

    adj = w.adjoint().values
    best, witness = NEG_INF, None
    id_err = 0.0
    for orb in periodic_orbits(sys, max_len, restrict=core, allow_sampled=True):
        states = [orb[i % len(orb)] for i in range(n_max)]
        rates = np.round(_tail_rate(_fiber_runs(adj, states, Z0)), ROUND_DECIMALS)
        j = int(np.argmax(rates))
        if witness is None or rates[j] > best:
            best = float(rates[j])
            witness = {"base_orbit": [sys.labels[s] for s in orb],
                       "fiber": [[float(c.real), float(c.imag)] for c in Z0[:, j]]}
        prefix = states[: min(n_max, IDENTITY_CHECK_STEPS)]
        for k in range(Z0.shape[1]):
            id_err = max(id_err, product_identity_error(w, prefix, Z0[:, k]))
    if id_err > 1e-10:
        log.warning("product identity off by %g relative", id_err)

    gel = spectral_exponent(w, sys, n_max, norm=norm, max_len=max_len)
    upper = gel.upper
    lower = min(best, upper)
    return ExponentEstimate(
        lower,
        upper,
        "extension_vp",
        SAMPLED,
        n_used=n_max,
        witness=witness,
        estimate=lower,
        meta={
            "seed": seed,
            "fiber_samples": int(Z0.shape[1]),
            "tail_window": n_max - n_max // 2 if n_max >= 2 else n_max,
            "product_identity_max_rel": id_err,
            "max_len": max_len,
        },
    )


def refined_gelfand(A, n_max: int, starts=20, seed: int = 0) -> tuple[float, np.ndarray | None]:
    """``max_v lim (1/n) ln ||(A^*)^n v||`` over start directions.

    ``starts`` is a count of seeded random directions or an explicit array of
    start vectors (one per row).  The rate is averaged over the last half of
    ``n_max`` steps.  Returns the best rate and its start direction.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    d = A.shape[0]
    if isinstance(starts, (int, np.integer)):
        if starts < 1:
            raise ValueError("starts must be >= 1")
        Z0 = _random_unit_vectors(np.random.default_rng(seed), d, int(starts))
    else:
        Z0 = np.asarray(starts, dtype=complex).reshape(-1, d).T
        if not np.all(np.linalg.norm(Z0, axis=0) > 0):
            raise ValueError("start vectors must be nonzero")
    if not np.any(A):
        return NEG_INF, None
    adj = A.conj().T[None]
    rates = _tail_rate(_fiber_runs(adj, [0] * n_max, Z0))
    j = int(np.argmax(rates))
    v = Z0[:, j] / np.linalg.norm(Z0[:, j])
    return float(rates[j]), v


# ---------------------------------------------------------------------------
# 2 x 2: the fiber map is a Moebius transformation


def _f_value(a, b, c, d, z) -> float:
    if z is None:
        return abs(a) + abs(c)
    return (abs(a * z + b) + abs(c * z + d)) / (abs(z) + 1.0)


def eigen_radius_2x2(a, b, c, d) -> float:
    """Largest eigenvalue modulus of ``[[a, b], [c, d]]`` from the quadratic formula."""
    tr, det = a + d, a * d - b * c
    sq = cmath.sqrt(tr * tr - 4 * det)
    big = (tr + sq) / 2 if abs(tr + sq) >= abs(tr - sq) else (tr - sq) / 2
    if big == 0:
        return 0.0
    return max(abs(big), abs(det / big))


def _quadratic_roots(A, B, C):
    """Roots of ``A z^2 + B z + C`` with ``A != 0``, avoiding cancellation."""
    sq = cmath.sqrt(B * B - 4 * A * C)
    q = -(B + sq) / 2 if abs(B + sq) >= abs(B - sq) else -(B - sq) / 2
    if q == 0:
        return 0j, 0j
    return q / A, C / q


def mobius_spectral_radius(a, b, c, d) -> tuple[float, dict]:
    """Spectral radius of ``[[a, b], [c, d]]`` from the fixed points of ``z -> (az+b)/(cz+d)``.

    ``f(z) = (|az+b| + |cz+d|)/(|z|+1)`` is the growth of ``(z, 1)`` in the
    l1 norm and ``f(inf) = |a| + |c|``.  The radius is ``f`` at the attracting
    fixed point when there is one, otherwise the largest ``f`` over the fixed
    points.  The report lists each fixed point (``None`` for infinity) with
    its multiplier, class and ``f`` value, and the eigenvalue cross-check.
    """
    a, b, c, d = (complex(t) for t in (a, b, c, d))
    det = a * d - b * c
    if det == 0:
        raise ValueError("singular matrix: ad - bc = 0")
    identity = False
    if c != 0:
        z1, z2 = _quadratic_roots(c, d - a, -b)
        points = [z1] if z1 == z2 else [z1, z2]
    elif a != d:
        points = [None, b / (d - a)]
    elif b == 0:
        identity, points = True, [None, 0j]
    else:
        points = [None]

    scale = 1.0 + max(abs(a), abs(b), abs(c), abs(d))
    parabolic = len(points) == 1 or (
        len(points) == 2 and points[0] is not None and points[1] is not None
        and abs(points[0] - points[1]) <= 1e-7 * scale * (1.0 + abs(points[0]))
    )

    rows = []
    for z in points:
        if identity:
            m = 1.0 + 0j
        elif z is None:
            m = d / a
        else:
            m = det / (c * z + d) ** 2
        mod = abs(m)
        if mod < 1.0 - ATTRACTING_TOL:
            kind = "attracting"
        elif mod <= 1.0 + ATTRACTING_TOL:
            kind = "neutral"
        else:
            kind = "repelling"
        rows.append({"point": z, "multiplier": m, "modulus": mod, "class": kind,
                     "f": _f_value(a, b, c, d, z)})

    attracting = [r for r in rows if r["class"] == "attracting"]
    if attracting:
        r_val = attracting[0]["f"]
    else:
        r_val = max(r["f"] for r in rows)
    eigen_r = eigen_radius_2x2(a, b, c, d)
    report = {
        "fixed_points": [None if r["point"] is None else r["point"] for r in rows],
        "multipliers": [r["multiplier"] for r in rows],
        "classes": [r["class"] for r in rows],
        "f_values": [r["f"] for r in rows],
        "r": r_val,
        "eigen_r": eigen_r,
        "parabolic": parabolic,
        "identity": identity,
        "discrepancy": abs(r_val - eigen_r),
    }
    return r_val, report


def mobius_report_json(report: dict) -> dict:
    """JSON-ready copy of a Moebius report (complex as ``[re, im]``, infinity as ``"inf"``)."""
    def cx(z):
        if z is None:
            return "inf"
        return [float(z.real), float(z.imag)]

    return {
        "fixed_points": [cx(z) for z in report["fixed_points"]],
        "multipliers": [cx(m) for m in report["multipliers"]],
        "classes": report["classes"],
        "f_values": [float(f) for f in report["f_values"]],
        "r": float(report["r"]),
        "eigen_r": float(report["eigen_r"]),
        "parabolic": bool(report["parabolic"]),
        "identity": bool(report["identity"]),
    }
