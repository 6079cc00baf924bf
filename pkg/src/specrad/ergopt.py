"""Exact variational principles on finite systems.

Scalar weights reduce to a maximum-mean-cycle problem on the word graph
(Karp's algorithm, checked against brute-force cycle enumeration).  Matrix
weights get the periodic-orbit bound, and weighted shifts on sequences the
classical geometric-mean formula.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .cocycle import (
    NEG_INF,
    Weight,
    periodic_lower_bound,
    spectral_exponent,
)
from .dynsys import PartialSystem, default_max_len, essential_domain
from .estimate import BRACKET, EXACT, EXACT_WIDTH, FP_SLACK, SAMPLED, ExponentEstimate

log = logging.getLogger(__name__)

TIGHT_TOL = 1e-9


@dataclass(frozen=True)
class WordGraph:
    """Directed graph with real edge weights; ``-inf`` edges are dropped.

    ``edges`` maps ``(u, v)`` to a weight.  Built from a system and a scalar
    weight, node ``u`` is a word and every edge out of it carries ``ln|a(u)|``.
    """

    n_nodes: int
    edges: dict
    labels: tuple = field(default=())

    def __post_init__(self):
        finite = {}
        for (u, v), wt in self.edges.items():
            u, v, wt = int(u), int(v), float(wt)
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"edge ({u}, {v}) outside {self.n_nodes} nodes")
            if math.isnan(wt) or wt == math.inf:
                raise ValueError("edge weights must be finite or -inf")
            if wt > NEG_INF:
                finite[(u, v)] = wt
        object.__setattr__(self, "edges", dict(sorted(finite.items())))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n_nodes)))

    @classmethod
    def from_system(cls, sys: PartialSystem, log_weight, restrict=None) -> "WordGraph":
        log_weight = np.asarray(log_weight, dtype=float)
        keep = set(sys.states) if restrict is None else set(restrict)
        edges = {
            (u, v): log_weight[u]
            for u in sorted(keep)
            for v in sys.successors[u]
            if v in keep
        }
        return cls(sys.n_states, edges, tuple(sys.labels))

    def successors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            out[u].append(v)
        return out

    def cycle_mean(self, cycle: Sequence[int]) -> float:
        cyc = list(cycle)
        return math.fsum(self.edges[(u, v)] for u, v in zip(cyc, cyc[1:] + cyc[:1])) / len(cyc)


def _karp_value(g: WordGraph) -> float:
    n = g.n_nodes
    if not g.edges:
        return NEG_INF
    src = np.array([u for u, _ in g.edges], dtype=int)
    dst = np.array([v for _, v in g.edges], dtype=int)
    wt = np.array(list(g.edges.values()))
    D = np.full((n + 1, n), NEG_INF)
    D[0] = 0.0
    for k in range(n):
        np.maximum.at(D[k + 1], dst, D[k][src] + wt)
    best = NEG_INF
    for v in range(n):
        if D[n, v] == NEG_INF:
            continue
        worst = math.inf
        for k in range(n):
            if D[k, v] > NEG_INF:
                worst = min(worst, (D[n, v] - D[k, v]) / (n - k))
        best = max(best, worst)
    return float(best)


def _potential(g: WordGraph, level: float) -> np.ndarray:
    """``h(u) = max_v (w(u,v) - level + h(v))``, relaxed to a fixed round count."""
    h = np.zeros(g.n_nodes)
    items = list(g.edges.items())
    for _ in range(g.n_nodes + 1):
        new = h.copy()
        for (u, v), wt in items:
            new[u] = max(new[u], wt - level + h[v])
        if np.array_equal(new, h):
            break
        h = new
    return h


def _lex_smallest_cycle(succ: list[list[int]]) -> tuple[int, ...] | None:
    """Lexicographically smallest simple cycle, written from its smallest node."""
    n = len(succ)
    for s in range(n):
        # nodes >= s that can reach s inside the subgraph on {>= s}
        back = {s}
        frontier = [s]
        pred: list[list[int]] = [[] for _ in range(n)]
        for u in range(s, n):
            for v in succ[u]:
                if v >= s:
                    pred[v].append(u)
        while frontier:
            v = frontier.pop()
            for u in pred[v]:
                if u not in back:
                    back.add(u)
                    frontier.append(u)

        def dfs(path, on_path):
            cur = path[-1]
            nxt = sorted(succ[cur])
            if s in nxt:
                return tuple(path)
            for v in nxt:
                if v > s and v in back and v not in on_path:
                    on_path.add(v)
                    found = dfs(path + [v], on_path)
                    if found:
                        return found
                    on_path.discard(v)
            return None

        found = dfs([s], {s})
        if found:
            return found
    return None


def karp_max_mean_cycle(g: WordGraph) -> tuple[float, tuple[int, ...] | None]:
    """Maximum mean edge weight over cycles, with a witness cycle.

    Karp's recurrence gives the optimum; the witness is the lexicographically
    smallest cycle (from its smallest node) among the edges that are tight for
    a potential at that level, and the returned value is its exact mean.
    ``(-inf, None)`` when no cycle has finite weight.
    """
    lam = _karp_value(g)
    if lam == NEG_INF:
        return NEG_INF, None
    h = _potential(g, lam)
    scale = 1.0 + max(abs(w) for w in g.edges.values())
    tight: list[list[int]] = [[] for _ in range(g.n_nodes)]
    for (u, v), wt in g.edges.items():
        if wt - lam + h[v] - h[u] >= -TIGHT_TOL * scale:
            tight[u].append(v)
    cyc = _lex_smallest_cycle(tight)
    if cyc is None:
        log.warning("no tight cycle at level %r; returning karp value without witness", lam)
        return lam, None
    value = g.cycle_mean(cyc)
    if abs(value - lam) > TIGHT_TOL * scale:
        log.warning("witness mean %r differs from karp value %r", value, lam)
    return value, cyc


def cycle_enumeration_oracle(g: WordGraph, max_len: int | None = None) -> float:
    """Brute force: best mean over every simple cycle of length ``<= max_len``."""
    if max_len is None:
        max_len = g.n_nodes
    if max_len < g.n_nodes:
        raise ValueError("max_len must be at least the number of nodes")
    G = nx.DiGraph()
    G.add_nodes_from(range(g.n_nodes))
    G.add_edges_from(g.edges)
    best = NEG_INF
    for cyc in nx.simple_cycles(G, length_bound=max_len):
        best = max(best, g.cycle_mean(cyc))
    return best


# ---------------------------------------------------------------------------
# variational principles


def commutative_vp(w: Weight, sys: PartialSystem, n_max: int = 200) -> ExponentEstimate:
    """``ln r`` for a scalar weight as the best cycle mean of ``ln|a|``.

    The graph is the system restricted to the essential domain of ``{a != 0}``.
    The gelfand bracket at ``n_max`` is attached as a cross-check.
    """
    if w.dim != 1:
        raise ValueError("commutative_vp needs a scalar weight")
    w.check_system(sys)
    core = essential_domain(sys, w.support)
    if not core:
        return ExponentEstimate(NEG_INF, NEG_INF, "karp", EXACT, meta={"empty_domain": True})
    g = WordGraph.from_system(sys, w.log_abs(), restrict=core)
    value, cyc = karp_max_mean_cycle(g)
    gel = spectral_exponent(w, sys, n_max)
    inside = gel.contains(value, tol=FP_SLACK * (1 + abs(value)))
    if not inside:
        log.warning("karp value %r outside gelfand bracket [%r, %r]", value, gel.lower, gel.upper)
    return ExponentEstimate(
        value,
        value,
        "karp",
        SAMPLED if sys.sampled else EXACT,
        n_used=n_max,
        witness=[sys.labels[s] for s in cyc] if cyc else None,
        estimate=value,
        meta={"gelfand_lower": gel.lower, "gelfand_upper": gel.upper, "inside_gelfand": inside},
    )


def periodic_orbit_vp(
    w: Weight, sys: PartialSystem, max_len: int | None = None, n_max: int = 200
) -> ExponentEstimate:
    """Periodic-orbit lower bound with the gelfand upper bound.

    ``lower`` is the best ``(1/p) ln r(P)`` over period products ``P``.  The
    norm variant ``(1/p) ln ||P||`` is reported in ``meta`` with the orbits
    where the two disagree; it is never used as a bound.
    """
    w.check_system(sys)
    if max_len is None:
        max_len = default_max_len(sys)
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    lower, witness, rows = periodic_lower_bound(w, sys, max_len)
    gel = spectral_exponent(w, sys, n_max, max_len=max_len)
    upper = gel.upper
    norm_best = max((r[2] for r in rows), default=NEG_INF)
    flagged = [
        [sys.labels[s] for s in orb]
        for orb, r_exp, n_exp in rows
        if not (r_exp == n_exp or abs(r_exp - n_exp) <= 1e-9 * (1 + abs(n_exp)))
    ]
    if lower > upper:
        if lower - upper > FP_SLACK * (1 + abs(upper)):
            log.warning("periodic bound %r exceeds gelfand bound %r", lower, upper)
        lower = upper
    if sys.sampled:
        exactness = SAMPLED
    elif upper - lower <= EXACT_WIDTH or lower == upper:
        exactness = EXACT
    else:
        exactness = BRACKET
    return ExponentEstimate(
        lower,
        upper,
        "periodic",
        exactness,
        n_used=gel.n_used,
        witness=[sys.labels[s] for s in witness] if witness else None,
        estimate=lower if lower > NEG_INF else None,
        meta={
            "max_len": max_len,
            "orbits": len(rows),
            "norm_variant": norm_best,
            "norm_variant_discrepancies": flagged,
        },
    )


# ---------------------------------------------------------------------------
# weighted shifts on sequences


@dataclass(frozen=True)
class ShiftSequence:
    """Weight sequence ``a(0), a(1), ...`` of a weighted shift.

    ``periodic``: ``period`` repeats from the start; ``eventually_periodic``:
    ``head`` then ``period`` forever; ``explicit``: the first terms are
    ``head`` and every later term has modulus at most ``bound``.
    """

    kind: str
    head: tuple = ()
    period: tuple = ()
    bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "period", tuple(self.period))
        if self.kind in ("periodic", "eventually_periodic"):
            if not self.period:
                raise ValueError("empty period")
        elif self.kind == "explicit":
            if not self.head:
                raise ValueError("explicit sequence needs at least one term")
            if self.bound is None or not self.bound >= 0:
                raise ValueError("explicit sequence needs a tail bound >= 0")
        else:
            raise ValueError(f"unknown sequence kind {self.kind!r}")

    def log_abs(self, k: int) -> np.ndarray:
        """``ln|a(i)|`` for ``i < k`` (``ln bound`` past the explicit terms)."""
        with np.errstate(divide="ignore"):
            if self.kind == "explicit":
                tail = math.log(self.bound) if self.bound > 0 else NEG_INF
                vals = np.log(np.abs(np.asarray(self.head, dtype=complex)))
                return np.concatenate([vals, np.full(max(0, k - len(vals)), tail)])[:k]
            head = np.log(np.abs(np.asarray(self.head, dtype=complex))) if self.head else np.empty(0)
            per = np.log(np.abs(np.asarray(self.period, dtype=complex)))
            reps = max(0, -(-(k - len(head)) // len(per)))
            return np.concatenate([head, np.tile(per, reps)])[:k]


def periodic(values) -> ShiftSequence:
    return ShiftSequence("periodic", period=values)


def eventually_periodic(head, period) -> ShiftSequence:
    return ShiftSequence("eventually_periodic", head=head, period=period)


def explicit(terms, bound: float) -> ShiftSequence:
    return ShiftSequence("explicit", head=terms, bound=float(bound))


def sup_product_rate(seq: ShiftSequence, n: int) -> float:
    """``sup_k (1/n) sum_{i<n} ln|a(k+i)|``; every window start is covered."""
    if n < 1:
        raise ValueError("n must be >= 1")
    n_starts = len(seq.head) + max(len(seq.period), 1)
    logs = seq.log_abs(n_starts + n)
    if np.isneginf(logs).any():
        finite = np.where(np.isneginf(logs), 0.0, logs)
        dead = np.concatenate([[0], np.cumsum(np.isneginf(logs))])
        csum = np.concatenate([[0.0], np.cumsum(finite)])
        sums = csum[n:n + n_starts] - csum[:n_starts]
        sums = np.where(dead[n:n + n_starts] - dead[:n_starts] > 0, NEG_INF, sums)
    else:
        csum = np.concatenate([[0.0], np.cumsum(logs)])
        sums = csum[n:n + n_starts] - csum[:n_starts]
    return float(sums.max() / n)


def classical_shift_radius(seq: ShiftSequence, n_max: int = 10_000) -> ExponentEstimate:
    """``ln r`` of a weighted shift ``(aT)e_k = a(k) e_{k+1}``-type operator.

    Periodic tails give the exact log geometric mean over one period (every
    rotation has the same mean; the head never matters).  An explicit prefix
    with a tail bound only gives an upper bound: ``min_n`` of the windowed
    sup with unknown terms replaced by the bound.
    """
    if seq.kind in ("periodic", "eventually_periodic"):
        per = seq.log_abs(len(seq.head) + len(seq.period))[len(seq.head):]
        value = NEG_INF if np.isneginf(per).any() else math.fsum(per) / len(per)
        return ExponentEstimate(value, value, "classical_shift", EXACT, n_used=len(per),
                                witness=[abs(complex(t)) for t in seq.period], estimate=value)
    upper = math.inf
    best_n = 0
    for n in range(1, n_max + 1):
        rate = sup_product_rate(seq, n)
        if rate < upper:
            upper, best_n = rate, n
    return ExponentEstimate(NEG_INF, upper, "classical_shift", BRACKET, n_used=n_max,
                            meta={"upper_at_n": best_n, "tail_bound": seq.bound})

