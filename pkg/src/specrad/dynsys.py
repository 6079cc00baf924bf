"""Partial dynamical systems on finite state spaces.

Three backends share one representation: a finite directed graph on states
``0..n_states-1`` where ``successors[x]`` lists the possible images of ``x``.

* ``FiniteMap``: a partial map, at most one successor per state.
* ``Sft``: a topological Markov chain refined to words of length ``N``; states
  are the admissible words that extend to an infinite admissible sequence and
  the left shift moves a word to every compatible next word.
* ``CircleGrid``: a circle map given by a lift ``gamma``; it is evaluated at
  grid points ``k/G`` and rounded to the nearest grid point, so every result on
  this backend is labelled as sampled.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

FINITE = "finite-map"
SFT = "sft"
CIRCLE = "circle"


class DynamicsError(ValueError):
    """Invalid system description or an operation the backend cannot do."""


@dataclass(frozen=True)
class CircleLift:
    """Lift ``gamma(t) = t + shift + sum_k amp_k sin(2 pi k t) / (2 pi k)``."""

    shift: float = 0.0
    harmonics: tuple[tuple[float, int], ...] = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = t + self.shift
        for amp, k in self.harmonics:
            out = out + amp * np.sin(2 * np.pi * k * t) / (2 * np.pi * k)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class EventuallyPeriodic:
    """Symbol sequence ``head + cycle + cycle + ...`` (a point of an SFT)."""

    head: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self):
        if not self.cycle:
            raise DynamicsError("empty cycle")

    def symbol(self, i: int) -> int:
        if i < len(self.head):
            return self.head[i]
        return self.cycle[(i - len(self.head)) % len(self.cycle)]

    def symbols(self, n: int) -> tuple[int, ...]:
        return tuple(self.symbol(i) for i in range(n))


@dataclass(frozen=True)
class PartialSystem:
    kind: str
    successors: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]
    # Sft
    transition_matrix: np.ndarray | None = field(default=None, compare=False)
    word_depth: int = 1
    words: tuple[tuple[int, ...], ...] = ()
    # CircleGrid
    lift: Callable | None = field(default=None, compare=False)
    grid_size: int = 0

    @property
    def n_states(self) -> int:
        return len(self.successors)

    @property
    def sampled(self) -> bool:
        return self.kind == CIRCLE

    @property
    def deterministic(self) -> bool:
        return all(len(s) <= 1 for s in self.successors)

    @property
    def states(self) -> range:
        return range(self.n_states)

    def phi(self, x: int) -> int | None:
        """Image of ``x`` for deterministic systems, ``None`` outside the domain."""
        succ = self.successors[x]
        if len(succ) > 1:
            raise DynamicsError("phi(x) is not single-valued on an SFT word graph")
        return succ[0] if succ else None

    def predecessors(self) -> list[list[int]]:
        pred: list[list[int]] = [[] for _ in self.states]
        for x, succ in enumerate(self.successors):
            for y in succ:
                pred[y].append(x)
        return pred

    def restricted(self, states: Iterable[int]) -> "PartialSystem":
        """The partial map with its domain cut down to ``states``."""
        keep = set(states)
        succ = tuple(s if x in keep else () for x, s in enumerate(self.successors))
        return PartialSystem(
            kind=self.kind,
            successors=succ,
            labels=self.labels,
            transition_matrix=self.transition_matrix,
            word_depth=self.word_depth,
            words=self.words,
            lift=self.lift,
            grid_size=self.grid_size,
        )

    def word_index(self, word: Sequence[int]) -> int:
        try:
            return self._word_lookup()[tuple(word)]
        except KeyError:
            raise DynamicsError(f"word {tuple(word)} is not a state of this SFT") from None

    def _word_lookup(self) -> dict:
        cache = self.__dict__.get("_lookup")
        if cache is None:
            cache = {w: i for i, w in enumerate(self.words)}
            object.__setattr__(self, "_lookup", cache)
        return cache

    def orbit(self, x, n: int, endpoint: bool = False) -> list[int]:
        """States ``x, phi(x), ..., phi^{n-1}(x)`` (plus ``phi^n(x)`` if ``endpoint``).

        ``x`` is a state index on deterministic backends; on an SFT it is a
        symbol sequence (tuple or :class:`EventuallyPeriodic`).  Raises if
        ``x`` is not in the domain of ``phi^n``.
        """
        if n < 0:
            raise DynamicsError("n must be >= 0")
        count = n + 1 if endpoint else n
        if self.kind == SFT:
            return self._sft_orbit(x, n, count)
        x = int(x)
        if not 0 <= x < self.n_states:
            raise DynamicsError(f"state {x} out of range")
        out = []
        cur: int | None = x
        for k in range(n + 1):
            if k < count:
                out.append(cur)
            if k == n:
                break
            cur = self.phi(cur)
            if cur is None:
                raise DynamicsError(f"state {x} is not in the domain of phi^{n}")
        return out

    def _sft_orbit(self, x, n: int, count: int) -> list[int]:
        N = self.word_depth
        if isinstance(x, EventuallyPeriodic):
            sym = x.symbols(count + N - 1)
        else:
            sym = tuple(int(s) for s in x)
            if len(sym) < count + N - 1:
                raise DynamicsError(f"need {count + N - 1} symbols to follow {count} words")
        out = [self.word_index(sym[i : i + N]) for i in range(count)]
        for u, v in zip(out, out[1:]):
            if v not in self.successors[u]:
                raise DynamicsError("symbol sequence is not admissible")
        return out


# ---------------------------------------------------------------------------
# constructors


def finite_map(phi: Sequence[int | None]) -> PartialSystem:
    n = len(phi)
    if n == 0:
        raise DynamicsError("state_count must be positive")
    succ = []
    for x, y in enumerate(phi):
        if y is None:
            succ.append(())
            continue
        if not (isinstance(y, (int, np.integer)) and 0 <= y < n):
            raise DynamicsError(f"phi({x}) = {y!r} is not a state in 0..{n - 1}")
        succ.append((int(y),))
    return PartialSystem(FINITE, tuple(succ), tuple(str(i) for i in range(n)))


def _prune_to_infinite(words: list[tuple[int, ...]], succ: list[list[int]]) -> list[int]:
    alive = set(range(len(words)))
    changed = True
    while changed:
        changed = False
        for i in list(alive):
            if not any(j in alive for j in succ[i]):
                alive.discard(i)
                changed = True
    return sorted(alive)


def sft(transition_matrix, word_depth: int = 1) -> PartialSystem:
    """Topological Markov chain on admissible words of length ``word_depth``."""
    A = np.asarray(transition_matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise DynamicsError("transition matrix must be square and nonempty")
    if not np.isin(A, (0, 1)).all():
        raise DynamicsError("transition matrix entries must be 0 or 1")
    if word_depth < 1:
        raise DynamicsError("word_depth must be >= 1")
    A = A.astype(int)
    n = A.shape[0]
    words = [
        w
        for w in itertools.product(range(n), repeat=word_depth)
        if all(A[w[i], w[i + 1]] for i in range(word_depth - 1))
    ]
    index = {w: i for i, w in enumerate(words)}
    succ = [[index[w[1:] + (s,)] for s in range(n) if A[w[-1], s] and (w[1:] + (s,)) in index] for w in words]
    alive = _prune_to_infinite(words, succ)
    renum = {old: new for new, old in enumerate(alive)}
    words = [words[i] for i in alive]
    succ = [tuple(sorted(renum[j] for j in succ[i] if j in renum)) for i in alive]
    return PartialSystem(
        SFT,
        tuple(succ),
        tuple(",".join(map(str, w)) for w in words),
        transition_matrix=A,
        word_depth=word_depth,
        words=tuple(words),
    )


def full_shift(n_symbols: int, word_depth: int = 1) -> PartialSystem:
    return sft(np.ones((n_symbols, n_symbols), dtype=int), word_depth)


def _full_lift(lift: Callable, t: float) -> float:
    k = math.floor(t)
    return float(lift(t - k)) + k


def check_lift(lift: Callable, samples: int = 4096) -> None:
    t = np.arange(samples + 1) / samples
    g = np.asarray(lift(t), dtype=float)
    if not np.all(np.diff(g) > 0):
        raise DynamicsError("lift is not strictly increasing on [0, 1)")
    if abs(float(lift(1.0)) - float(lift(0.0)) - 1.0) > 1e-9:
        raise DynamicsError("lift does not satisfy gamma(t+1) = gamma(t) + 1")


def circle_grid(grid_size: int, lift: Callable) -> PartialSystem:
    if grid_size < 1:
        raise DynamicsError("grid_size must be positive")
    check_lift(lift, max(grid_size, 4096))
    t = np.arange(grid_size) / grid_size
    img = np.asarray(lift(t), dtype=float) % 1.0
    phi = np.rint(img * grid_size).astype(int) % grid_size
    succ = tuple((int(y),) for y in phi)
    return PartialSystem(
        CIRCLE, succ, tuple(str(i) for i in range(grid_size)), lift=lift, grid_size=grid_size
    )


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DomainChain:
    delta_n: list[frozenset]
    delta_minus_n: list[frozenset]
    delta_inf: frozenset
    sampled: bool = False


def _step_domain(sys: PartialSystem, prev: frozenset) -> frozenset:
    return frozenset(x for x in sys.states if any(y in prev for y in sys.successors[x]))


def _step_range(sys: PartialSystem, prev: frozenset) -> frozenset:
    # range of phi^k = phi(range of phi^{k-1} restricted to the domain of phi)
    return frozenset(y for x in prev for y in sys.successors[x])


def domain_chain(sys: PartialSystem, n_max: int) -> DomainChain:
    """Domains ``Delta_n``, ranges ``Delta_{-n}`` for ``n <= n_max`` and ``Delta_inf``."""
    if n_max < 0:
        raise DynamicsError("n_max must be >= 0")
    X = frozenset(sys.states)
    dn, dmn = [X], [X]
    cap = 4 * max(sys.n_states, 1)
    fwd, bwd = X, X
    fwd_stable = bwd_stable = False
    k = 0
    while k < max(n_max, cap) and not (k >= n_max and fwd_stable and bwd_stable):
        k += 1
        nf, nb = _step_domain(sys, fwd), _step_range(sys, bwd)
        fwd_stable, bwd_stable = nf == fwd, nb == bwd
        fwd, bwd = nf, nb
        if k <= n_max:
            dn.append(fwd)
            dmn.append(bwd)
    return DomainChain(dn, dmn, fwd & bwd, sys.sampled)


def essential_domain(sys: PartialSystem, restrict: Iterable[int] | None = None) -> frozenset:
    """``Delta_inf`` of ``phi`` restricted to ``restrict`` (all of the domain if None)."""
    if restrict is not None:
        sys = sys.restricted(restrict)
    return domain_chain(sys, 0).delta_inf


def domain_n(sys: PartialSystem, n: int) -> frozenset:
    return domain_chain(sys, n).delta_n[n]


# ---------------------------------------------------------------------------
# periodic orbits


def _canonical(cycle: tuple[int, ...]) -> tuple[int, ...]:
    return min(cycle[i:] + cycle[:i] for i in range(len(cycle)))


def _primitive(cycle: tuple[int, ...]) -> bool:
    p = len(cycle)
    return all(cycle != cycle[d:] + cycle[:d] for d in range(1, p) if p % d == 0)


# closed walks explored by the default orbit search on branching systems
WALK_BUDGET = 200_000


def default_max_len(sys: PartialSystem) -> int:
    """Orbit length cap used when the caller gives none.

    Single-valued maps: ``n_states`` (every cycle).  Branching word graphs:
    ``min(n_states, 10)``, lowered until ``outdegree ** len`` fits the walk
    budget.
    """
    if sys.deterministic:
        return max(sys.n_states, 1)
    b = max(len(s) for s in sys.successors)
    L = min(sys.n_states, 10)
    while L > 1 and b**L > WALK_BUDGET:
        L -= 1
    return L


def periodic_orbits(
    sys: PartialSystem,
    max_len: int,
    restrict: Iterable[int] | None = None,
    allow_sampled: bool = False,
) -> list[tuple[int, ...]]:
    """All periodic orbits of minimal period ``<= max_len`` inside ``restrict``.

    Each orbit is a tuple of states rotated to its lexicographically smallest
    rotation.  On an SFT an orbit is a primitive closed walk in the word graph,
    so a state may repeat inside one orbit.  Sorted by (length, states).
    ``allow_sampled`` permits cycles of the rounded circle-grid map, whose
    results are approximate.
    """
    if sys.kind == CIRCLE and not allow_sampled:
        raise DynamicsError("periodic points of a sampled circle map are not exact")
    if max_len < 1:
        raise DynamicsError("max_len must be >= 1")
    allowed = set(sys.states) if restrict is None else set(restrict)
    found: set[tuple[int, ...]] = set()

    if sys.deterministic:
        for x in sorted(allowed):
            cyc = [x]
            cur = sys.phi(x)
            while cur is not None and cur != x and cur in allowed and len(cyc) < max_len:
                cyc.append(cur)
                cur = sys.phi(cur)
            if cur == x and min(cyc) == x:
                found.add(tuple(cyc))
        return sorted(found, key=lambda c: (len(c), c))

    for s in sorted(allowed):
        stack = [(s, (s,))]
        while stack:
            cur, walk = stack.pop()
            for y in sys.successors[cur]:
                if y == s and _primitive(walk) and _canonical(walk) == walk:
                    found.add(walk)
                # the walk may pass through s again; the canonical check dedupes
                if y >= s and y in allowed and len(walk) < max_len:
                    stack.append((y, walk + (y,)))
    return sorted(found, key=lambda c: (len(c), c))


# ---------------------------------------------------------------------------
# circle maps


def rotation_number(sys: PartialSystem, n_iter: int) -> float:
    """``frac(gamma^n(0) / n)`` at ``n = n_iter``; within ``1/n_iter`` of the true value."""
    if sys.kind != CIRCLE or sys.lift is None:
        raise DynamicsError("rotation_number needs a CircleGrid system")
    if n_iter < 1:
        raise DynamicsError("n_iter must be >= 1")
    check_lift(sys.lift)
    t = 0.0
    for _ in range(n_iter):
        t = _full_lift(sys.lift, t)
    return (t / n_iter) % 1.0
