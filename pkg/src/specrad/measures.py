"""Invariant measures, empirical averages and the lim-sup variational principle.

Observables are arrays indexed by state.  ``-inf`` is a legal value (it is
``ln|a|`` at a zero of the weight) and propagates through every sum.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynsys import (
    SFT,
    DynamicsError,
    PartialSystem,
    default_max_len,
    domain_chain,
    essential_domain,
    periodic_orbits,
)
from .estimate import BRACKET, EXACT, EXACT_WIDTH, SAMPLED, ExponentEstimate

PERIODIC = "periodic-orbit"
CYLINDER = "cylinder"
EMPIRICAL = "empirical"

NEG_INF = -math.inf


@dataclass(frozen=True)
class InvariantMeasure:
    """A probability measure on the states of a finite system.

    ``atoms`` maps state -> mass.  Orbit measures keep the orbit itself:
    ``PeriodicOrbit`` the cycle, ``Empirical`` the states ``x_0..x_n`` (the
    endpoint ``x_n`` carries no mass but is needed for the invariance defect).
    """

    kind: str
    atoms: dict
    orbit: tuple = ()
    base_point: object = None
    length: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def to_dict(self, sys: PartialSystem | None = None) -> dict:
        label = (lambda s: sys.labels[s]) if sys is not None else (lambda s: s)
        out = {
            "kind": self.kind,
            "atoms": [[label(s), m] for s, m in sorted(self.atoms.items())],
        }
        if self.orbit:
            out["orbit"] = [label(s) for s in self.orbit]
        if self.kind == EMPIRICAL:
            out["length"] = self.length
        return out


def _atoms_from_states(states: Sequence[int]) -> dict:
    n = len(states)
    return {s: c / n for s, c in sorted(Counter(states).items())}


def periodic_orbit_measure(orbit: Sequence[int]) -> InvariantMeasure:
    orbit = tuple(int(s) for s in orbit)
    if not orbit:
        raise ValueError("empty orbit")
    return InvariantMeasure(PERIODIC, _atoms_from_states(orbit), orbit=orbit, length=len(orbit))


def cylinder_measure(sys: PartialSystem, weights) -> InvariantMeasure:
    """Measure given by masses ``p_w`` on the depth-N words of an SFT."""
    if sys.kind != SFT:
        raise DynamicsError("cylinder measures live on SFT backends")
    if isinstance(weights, dict):
        p = np.zeros(sys.n_states)
        for k, v in weights.items():
            idx = k if isinstance(k, (int, np.integer)) else sys.labels.index(str(k))
            p[idx] = v
    else:
        p = np.asarray(weights, dtype=float)
    if p.shape != (sys.n_states,):
        raise ValueError("one weight per admissible word is required")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("cylinder weights must be nonnegative and sum to 1")
    return InvariantMeasure(CYLINDER, {s: float(m) for s, m in enumerate(p) if m > 0})


def krylov_bogolyubov(sys: PartialSystem, x, n: int) -> InvariantMeasure:
    """Empirical measure ``(1/n) sum_{i<n} delta_{phi^i x}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    states = sys.orbit(x, n, endpoint=True)
    return InvariantMeasure(
        EMPIRICAL, _atoms_from_states(states[:-1]), orbit=tuple(states), base_point=x, length=n
    )


def invariance_defect(mu: InvariantMeasure, sys: PartialSystem) -> float:
    """``max_w |mu(phi^{-1} w) - mu(w)|`` over single states ``w``.

    For orbit measures the preimage mass of a state is the mass carried by the
    orbit positions that step into it, which on an SFT is the measure of the
    depth-N cylinder pulled back by the shift.  A cylinder measure is checked
    through its depth N-1 marginals (prefix vs suffix sums).
    """
    if mu.kind == CYLINDER:
        return _cylinder_defect(mu, sys)
    if mu.kind == PERIODIC:
        cyc = mu.orbit
        steps = list(zip(cyc, cyc[1:] + cyc[:1]))
        n = len(cyc)
    else:
        steps = list(zip(mu.orbit[:-1], mu.orbit[1:]))
        n = mu.length
    for u, v in steps:
        if v not in sys.successors[u]:
            raise DynamicsError("orbit measure is not carried by an orbit of this system")
    into = Counter(v for _, v in steps)
    here = Counter(u for u, _ in steps)
    return max((abs(into[s] - here[s]) / n for s in set(into) | set(here)), default=0.0)


def _cylinder_defect(mu: InvariantMeasure, sys: PartialSystem) -> float:
    if sys.word_depth == 1:
        return abs(sum(mu.atoms.values()) - 1.0)
    prefix: Counter = Counter()
    suffix: Counter = Counter()
    for s, m in mu.atoms.items():
        w = sys.words[s]
        prefix[w[:-1]] += m
        suffix[w[1:]] += m
    return max(abs(prefix[k] - suffix[k]) for k in set(prefix) | set(suffix))


def integrate(mu: InvariantMeasure, f) -> float:
    f = np.asarray(f, dtype=float)
    total = 0.0
    for s, m in mu.atoms.items():
        if m <= 0:
            continue
        if f[s] == NEG_INF:
            return NEG_INF
        total += m * f[s]
    return total


def empirical_average(sys: PartialSystem, f, x, n: int) -> float:
    """``S_n(f)(x) = (f(x) + f(phi x) + ... + f(phi^{n-1} x)) / n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    f = np.asarray(f, dtype=float)
    vals = f[sys.orbit(x, n)]
    if (vals == NEG_INF).any():
        return NEG_INF
    return float(vals.sum() / n)


# ---------------------------------------------------------------------------
# sup over the domain of phi^n


def sup_birkhoff_sums(sys: PartialSystem, f, n_max: int) -> np.ndarray:
    """``u[n-1] = sup_{x in Delta_n} sum_{i<n} f(phi^i x)`` for ``n = 1..n_max``.

    Dynamic programming over the successor graph; ``-inf`` where ``Delta_n``
    is empty or every path hits a ``-inf`` value.
    """
    f = np.asarray(f, dtype=float)
    n_st = sys.n_states
    src = np.array([x for x in sys.states for _ in sys.successors[x]], dtype=int)
    dst = np.array([y for x in sys.states for y in sys.successors[x]], dtype=int)
    # value[x] = best sum over k states starting at x, for x in Delta_k
    in_dom = np.zeros(n_st, dtype=bool)
    in_dom[src] = True  # Delta_1
    value = np.where(in_dom, f, NEG_INF)
    u = np.empty(n_max)
    for k in range(1, n_max + 1):
        u[k - 1] = value[in_dom].max() if in_dom.any() else NEG_INF
        if k == n_max:
            break
        best = np.full(n_st, NEG_INF)
        ok = in_dom[dst]
        np.maximum.at(best, src[ok], value[dst[ok]])
        new_dom = np.zeros(n_st, dtype=bool)
        new_dom[src[ok]] = True
        with np.errstate(invalid="ignore"):
            value = np.where(new_dom, f + best, NEG_INF)
        in_dom = new_dom
    return u


def subaction(sys: PartialSystem, f, level: float):
    """Sub-action certificate that no orbit average of ``f`` exceeds ``level``.

    Returns ``(h, violation)`` with ``f(x) - level <= h(x) - h(y) + violation``
    on every edge ``x -> y``; then every ``S_n(f)(x) <= level + violation +
    (max h - min h)/n``.  ``h`` is the best walk sum of ``f - level`` from each
    state, found by Bellman-Ford; returns ``None`` if the edge inequalities
    fail beyond rounding (some cycle beats ``level``).
    """
    f = np.asarray(f, dtype=float)
    g = f - level
    h = np.zeros(sys.n_states)
    # n rounds suffice without a positive cycle; the certificate is checked directly below
    for _ in range(sys.n_states + 1):
        new = h.copy()
        for x in sys.states:
            if g[x] == NEG_INF:
                continue
            for y in sys.successors[x]:
                new[x] = max(new[x], g[x] + h[y])
        if np.array_equal(new, h):
            break
        h = new
    viol = 0.0
    for x in sys.states:
        if g[x] == NEG_INF:
            continue
        for y in sys.successors[x]:
            viol = max(viol, g[x] - h[x] + h[y])
    scale = 1.0 + float(np.max(np.abs(f[np.isfinite(f)]), initial=0.0))
    if viol > 1e-9 * scale:
        return None
    return h, viol


def best_periodic_average(sys: PartialSystem, f, max_len: int):
    """Best orbit average of ``f`` over periodic orbits of length ``<= max_len``."""
    best, witness = NEG_INF, None
    for orb in periodic_orbits(sys, max_len, allow_sampled=True):
        val = integrate(periodic_orbit_measure(orb), f)
        if val > best or witness is None:
            best, witness = val, orb
    return best, witness


def limsup_empirical(sys: PartialSystem, f, n_max: int, max_len: int | None = None) -> ExponentEstimate:
    """Bracket for ``lim_n sup_{x in Delta_n} S_n(f)(x)``.

    Upper bound: ``min_n u_n / n`` (``u_n`` is subadditive), tightened to the
    periodic value when a sub-action certificate exists.  Lower bound: the best
    periodic-orbit average found.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    f = np.asarray(f, dtype=float)
    if max_len is None:
        max_len = default_max_len(sys)
    kind = SAMPLED if sys.sampled else BRACKET

    if _domain_dies(sys, n_max):
        return ExponentEstimate(NEG_INF, NEG_INF, "limsup", EXACT, n_used=n_max,
                                meta={"empty_domain": True})
    finite_states = [x for x in sys.states if f[x] > NEG_INF]
    if not essential_domain(sys, finite_states):
        # every long path meets a -inf value
        return ExponentEstimate(NEG_INF, NEG_INF, "limsup", EXACT, n_used=n_max,
                                meta={"empty_domain": False, "all_cycles_neg_inf": True})

    u = sup_birkhoff_sums(sys, f, n_max)

    n = np.arange(1, n_max + 1)
    ratios = u / n
    k = int(np.argmin(ratios))
    upper = float(ratios[k])
    upper_source = f"min u_n/n at n={k + 1}"
    lower, witness = best_periodic_average(sys, f, max_len)
    lower = float(lower)
    if lower > NEG_INF:
        cert = subaction(sys, f, lower)
        if cert is not None and lower + cert[1] < upper:
            upper = lower + cert[1]
            upper_source = "sub-action certificate"
    lower = min(lower, upper)
    exactness = kind
    if kind == BRACKET and upper - lower <= EXACT_WIDTH:
        exactness = EXACT
    return ExponentEstimate(
        lower,
        upper,
        "limsup",
        exactness,
        n_used=n_max,
        witness=[sys.labels[s] for s in witness] if witness else None,
        estimate=lower if exactness == EXACT else None,
        meta={"upper_source": upper_source, "max_len": max_len},
    )


def _domain_dies(sys: PartialSystem, n_max: int) -> bool:
    chain = domain_chain(sys, n_max)
    return not chain.delta_n[-1] or not chain.delta_inf
