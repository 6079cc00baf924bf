"""Matrix weights, log-renormalized cocycles and their growth exponents.

Products are kept as ``exp(log_norm) * normalized`` with ``normalized`` of unit
operator norm, so orbits of length 10^5 never overflow.  ``-inf`` marks an
exactly zero product.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .dynsys import DynamicsError, PartialSystem, default_max_len, essential_domain, periodic_orbits
from .estimate import BRACKET, EXACT, EXACT_WIDTH, SAMPLED, ExponentEstimate
from .measures import PERIODIC, InvariantMeasure, periodic_orbit_measure

log = logging.getLogger(__name__)

NEG_INF = -math.inf
NORMS = ("l1", "l2", "linf")


def op_norm(M: np.ndarray, norm: str = "l2") -> np.ndarray:
    """Induced operator norm of a matrix or a stack of matrices."""
    M = np.asarray(M)
    if norm == "l2":
        return np.linalg.norm(M, 2, axis=(-2, -1))
    if norm == "l1":
        return np.abs(M).sum(axis=-2).max(axis=-1)
    if norm == "linf":
        return np.abs(M).sum(axis=-1).max(axis=-1)
    raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


@dataclass(frozen=True)
class Weight:
    """A map ``state -> d x d`` complex matrix; ``values[x]`` is ``a(x)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 3 or v.shape[1] != v.shape[2] or v.shape[1] < 1:
            raise ValueError("weight values must have shape (n_states, d, d)")
        if not np.isfinite(v).all():
            raise ValueError("weight entries must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def scalar(cls, values: Sequence) -> "Weight":
        return cls(np.asarray(values, dtype=complex).reshape(-1, 1, 1))

    @classmethod
    def constant(cls, A, n_states: int) -> "Weight":
        A = np.asarray(A, dtype=complex)
        return cls(np.broadcast_to(A, (n_states,) + A.shape).copy())

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    def sup_norm(self, norm: str = "l2") -> float:
        return float(op_norm(self.values, norm).max())

    @property
    def support(self) -> frozenset:
        """``Delta^a``: states where ``a(x) != 0``."""
        return frozenset(np.flatnonzero(np.any(self.values != 0, axis=(1, 2))).tolist())

    def adjoint(self) -> "Weight":
        return Weight(np.conj(np.swapaxes(self.values, 1, 2)))

    def log_abs(self) -> np.ndarray:
        """``ln|a|`` for a scalar weight, ``-inf`` at zeros."""
        if self.dim != 1:
            raise ValueError("log_abs needs a scalar weight")
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.values[:, 0, 0]))

    def check_system(self, sys: PartialSystem) -> None:
        if self.n_states != sys.n_states:
            raise ValueError(f"weight has {self.n_states} states, system has {sys.n_states}")


@dataclass(frozen=True)
class CocycleProduct:
    log_norm: float
    normalized: np.ndarray
    steps: int

    @property
    def matrix(self) -> np.ndarray:
        if self.log_norm == NEG_INF:
            return np.zeros_like(self.normalized)
        return math.exp(self.log_norm) * self.normalized


def product_along(w: Weight, states: Sequence[int], norm: str = "l2", backward: bool = False) -> CocycleProduct:
    """``a(s_0) a(s_1) ... a(s_{n-1})`` (reversed order if ``backward``)."""
    d = w.dim
    P = np.eye(d, dtype=complex)
    acc = 0.0
    seq = reversed(states) if backward else states
    for s in seq:
        P = P @ w.values[s]
        nrm = float(op_norm(P, norm))
        if nrm == 0.0:
            return CocycleProduct(NEG_INF, np.zeros((d, d), dtype=complex), len(states))
        acc += math.log(nrm)
        P = P / nrm
    return CocycleProduct(acc, P, len(states))


def forward_product(w: Weight, sys: PartialSystem, x, n: int, norm: str = "l2") -> CocycleProduct:
    """``C^f(x, n) = a(x) a(phi x) ... a(phi^{n-1} x)``."""
    return product_along(w, sys.orbit(x, n), norm)


def backward_product(w: Weight, sys: PartialSystem, x, n: int, norm: str = "l2") -> CocycleProduct:
    """``C^b(x, n) = a(phi^{n-1} x) ... a(phi x) a(x)``."""
    return product_along(w, sys.orbit(x, n), norm, backward=True)


def adjoint_identity_check(w: Weight, sys: PartialSystem, x, n: int) -> float:
    """Relative error ``||C^f(x,n)^* - C^b_{a^*}(x,n)|| / ||C^f(x,n)||``."""
    f = forward_product(w, sys, x, n)
    b = backward_product(w.adjoint(), sys, x, n)
    if f.log_norm == NEG_INF or b.log_norm == NEG_INF:
        return 0.0 if f.log_norm == b.log_norm else math.inf
    diff = f.normalized.conj().T - math.exp(b.log_norm - f.log_norm) * b.normalized
    return float(op_norm(diff))


# ---------------------------------------------------------------------------
# sup over Delta_n of ||C^f(x, n)||


def sup_log_norms(
    w: Weight, sys: PartialSystem, n_max: int, norm: str = "l2", frontier_cap: int = 100_000
) -> tuple[np.ndarray, int]:
    """``u[n-1] = sup_{x in Delta_n} ln ||C^f(x, n)||`` for ``n`` up to ``n_max``.

    Paths are grown one factor at a time.  Two paths ending in the same state
    with the same normalized product are merged (the larger log norm
    dominates every extension), which makes scalar weights an exact dynamic
    program.  Returns ``(u, n_exact)``; if the path frontier outgrows
    ``frontier_cap`` the computation stops and ``u`` has length ``n_exact``.
    """
    w.check_system(sys)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    scalar = w.dim == 1
    vals = np.abs(w.values) if scalar else w.values
    deg = np.array([len(s) for s in sys.successors], dtype=int)
    has_succ = deg > 0
    offs = np.concatenate([[0], np.cumsum(deg)[:-1]])
    flat = np.array([y for s in sys.successors for y in s], dtype=int)

    last = np.arange(sys.n_states)
    mats = vals.copy()
    nrm = op_norm(mats, norm)
    alive = nrm > 0
    last, mats, nrm = last[alive], mats[alive], nrm[alive]
    logs = np.log(nrm)
    mats = mats / nrm[:, None, None]

    u = []
    for k in range(1, n_max + 1):
        ok = has_succ[last]
        u.append(float(logs[ok].max()) if ok.any() else NEG_INF)
        if k == n_max or not ok.any():
            break
        items = np.flatnonzero(ok)
        counts = deg[last[items]]
        total = int(counts.sum())
        if total > frontier_cap:
            log.info("path frontier %d exceeds cap at n=%d", total, k)
            break
        src = np.repeat(items, counts)
        first = np.repeat(offs[last[items]] - (np.cumsum(counts) - counts), counts)
        dst = flat[first + np.arange(total)]
        new = mats[src] @ vals[dst]
        nrm = op_norm(new, norm)
        alive = nrm > 0
        last, logs = dst[alive], logs[src][alive] + np.log(nrm[alive])
        mats = new[alive] / nrm[alive][:, None, None]
        if not sys.deterministic or scalar:
            last, logs, mats = _merge(last, logs, mats, scalar)
    u = np.array(u)
    return u, len(u)


def _merge(last, logs, mats, scalar):
    best: dict = {}
    for i in range(len(last)):
        key = int(last[i]) if scalar else (int(last[i]), mats[i].tobytes())
        j = best.get(key)
        if j is None or logs[i] > logs[j]:
            best[key] = i
    keep = np.array(sorted(best.values()), dtype=int)
    return last[keep], logs[keep], mats[keep]


# ---------------------------------------------------------------------------
# exponents


def measure_exponent(w: Weight, sys: PartialSystem, mu: InvariantMeasure, norm: str = "l2") -> float:
    """``(1/p) ln r(P)`` for the period product ``P`` of a periodic-orbit measure."""
    if mu.kind != PERIODIC:
        raise ValueError("measure_exponent needs a periodic-orbit measure")
    orbit = mu.orbit
    for u, v in zip(orbit, orbit[1:] + orbit[:1]):
        if v not in sys.successors[u]:
            raise DynamicsError("measure is not carried by a periodic orbit of this system")
    return _orbit_exponents(w, orbit, norm)[0]


def _orbit_exponents(w: Weight, orbit: Sequence[int], norm: str = "l2") -> tuple[float, float]:
    """(spectral-radius exponent, norm exponent) of the period product."""
    P = product_along(w, orbit, norm)
    p = len(orbit)
    if P.log_norm == NEG_INF:
        return NEG_INF, NEG_INF
    rho = spectral_radius(P.normalized)
    r_exp = NEG_INF if rho == 0.0 else (P.log_norm + math.log(rho)) / p
    return r_exp, P.log_norm / p


def periodic_lower_bound(
    w: Weight, sys: PartialSystem, max_len: int, norm: str = "l2"
) -> tuple[float, tuple | None, list]:
    """Best periodic-orbit measure exponent over ``Delta^a_inf``.

    Returns ``(value, witness_orbit, rows)`` with one row
    ``(orbit, r_exponent, norm_exponent)`` per orbit examined.
    """
    core = essential_domain(sys, w.support)
    rows = []
    best, witness = NEG_INF, None
    for orb in periodic_orbits(sys, max_len, restrict=core, allow_sampled=True):
        r_exp, n_exp = _orbit_exponents(w, orb, norm)
        rows.append((orb, r_exp, n_exp))
        if witness is None or r_exp > best:
            best, witness = r_exp, orb
    return best, witness, rows


def _tail_window(n: int, periods: Sequence[int]) -> int:
    L = reduce(math.lcm, periods, 1) if periods else 1
    if L <= n // 2:
        return (n // 2) // L * L
    return n // 2


def spectral_exponent(
    w: Weight,
    sys: PartialSystem,
    n_max: int,
    norm: str = "l2",
    max_len: int | None = None,
    frontier_cap: int = 100_000,
) -> ExponentEstimate:
    """Bracket for ``lambda(a, phi) = inf_n sup_{x in Delta_n} (1/n) ln ||C^f(x, n)||``.

    ``upper`` is the minimum of ``u_n / n`` over the computed ``n``; ``lower``
    is the best exact periodic-orbit exponent ``(1/p) ln r(P)``.  ``estimate``
    is the tail slope ``(u_n - u_m)/(n - m)`` clipped into the bracket, with
    ``n - m`` a multiple of the periods seen when that fits in the last half.
    """
    w.check_system(sys)
    if max_len is None:
        max_len = default_max_len(sys)
    kind = SAMPLED if sys.sampled else BRACKET
    if not essential_domain(sys, w.support):
        return ExponentEstimate(NEG_INF, NEG_INF, "gelfand", EXACT, n_used=0,
                                meta={"empty_essential_domain": True})

    u, n_exact = sup_log_norms(w, sys, n_max, norm, frontier_cap)
    n = np.arange(1, len(u) + 1)
    with np.errstate(invalid="ignore"):
        ratios = u / n
    k = int(np.argmin(ratios))
    upper = float(ratios[k])
    lower, witness, rows = periodic_lower_bound(w, sys, max_len, norm)
    if lower > upper:
        if lower - upper > 1e-9 * (1 + abs(upper)):
            log.warning("periodic exponent %r exceeds gelfand bound %r", lower, upper)
        lower = upper

    estimate = None
    tail = 0
    if len(u) >= 2 and np.isfinite(u[-1]):
        tail = _tail_window(len(u), sorted({len(r[0]) for r in rows}))
        m = len(u) - tail
        est = float((u[-1] - u[m - 1]) / tail) if m >= 1 else upper
        estimate = min(max(est, lower), upper)
    elif lower == upper:
        estimate = lower

    exactness = kind
    if kind == BRACKET and upper - lower <= EXACT_WIDTH:
        exactness = EXACT
    return ExponentEstimate(
        lower,
        upper,
        "gelfand",
        exactness,
        n_used=n_exact,
        witness=[sys.labels[s] for s in witness] if witness else None,
        estimate=estimate,
        meta={
            "norm": norm,
            "upper_at_n": k + 1,
            "n_requested": n_max,
            "max_len": max_len,
            "tail_window": tail,
        },
    )


def directional_lyapunov(
    w: Weight, sys: PartialSystem, x, v, n_max: int, tail: bool = True, norm: str = "l2"
) -> float:
    """Growth rate of ``||C^b_{a^*}(x, n) v||``.

    Iterates ``z <- a(phi^k x)^* z / ||.||`` and accumulates the logs.  With
    ``tail`` the rate is averaged over the last half of the run,
    ``(L_n - L_{n/2}) / (n - n/2)``; otherwise it is ``L_n / n``.
    """
    v = np.asarray(v, dtype=complex).ravel()
    if v.shape != (w.dim,) or not np.any(v):
        raise ValueError("v must be a nonzero vector of the weight's dimension")
    vec_norm = {"l2": 2, "l1": 1, "linf": np.inf}[norm]
    states = sys.orbit(x, n_max)
    adj = np.conj(np.swapaxes(w.values, 1, 2))
    z = v / np.linalg.norm(v, vec_norm)
    logs = np.empty(n_max)
    acc = 0.0
    for k, s in enumerate(states):
        z = adj[s] @ z
        nz = np.linalg.norm(z, vec_norm)
        if nz == 0.0:
            return NEG_INF
        acc += math.log(nz)
        z = z / nz
        logs[k] = acc
    if not tail or n_max < 2:
        return acc / n_max
    m = n_max // 2
    return float((logs[-1] - logs[m - 1]) / (n_max - m))
