"""Inner-field weighted endomorphisms on ``C(X, M_k)``.

An inner field is a unitary ``T_x`` per state, acting by
``alpha_x(b) = T_x b T_x^*``.  The weighted endomorphism
``b -> a * alpha(b)`` with ``alpha(b)(x) = T_x b(phi x) T_x^*`` has the same
growth as the cocycle of ``x -> a(x) T_x``; it can also be lifted to a cocycle
of ``k^2 x k^2`` matrices acting on ``vec(d)`` (column-major).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cocycle import NEG_INF, Weight, op_norm, spectral_exponent, sup_log_norms
from .dynsys import DynamicsError, PartialSystem
from .ergopt import periodic_orbit_vp
from .estimate import ExponentEstimate

UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class InnerField:
    """Unitaries ``T[x]``; ``S[x] = T[x]^{-1} = T[x]^*``."""

    T: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.T, dtype=complex)
        if T.ndim != 3 or T.shape[1] != T.shape[2]:
            raise ValueError("field matrices must have shape (n_states, k, k)")
        k = T.shape[1]
        gram = np.conj(np.swapaxes(T, 1, 2)) @ T
        err = float(np.abs(gram - np.eye(k)).max()) if len(T) else 0.0
        if err > UNITARY_TOL * 10:
            raise ValueError(f"field matrices are not unitary (max |T*T - I| = {err:.3g})")
        object.__setattr__(self, "T", T)

    @classmethod
    def identity(cls, n_states: int, k: int) -> "InnerField":
        return cls(np.broadcast_to(np.eye(k, dtype=complex), (n_states, k, k)).copy())

    @property
    def S(self) -> np.ndarray:
        return np.conj(np.swapaxes(self.T, 1, 2))

    @property
    def dim(self) -> int:
        return self.T.shape[1]

    def alpha(self, x: int, b: np.ndarray) -> np.ndarray:
        return self.T[x] @ b @ self.S[x]


def _check(a: Weight, field: InnerField, sys: PartialSystem) -> None:
    a.check_system(sys)
    if field.T.shape[0] != sys.n_states:
        raise ValueError("field must have one unitary per state")
    if field.dim != a.dim:
        raise ValueError(f"field dim {field.dim} does not match weight dim {a.dim}")


def effective_weight(a: Weight, field: InnerField, sys: PartialSystem) -> Weight:
    """``x -> a(x) T_x``."""
    _check(a, field, sys)
    return Weight(a.values @ field.T)


def weighted_endo_radius_inner(
    a: Weight,
    field: InnerField,
    sys: PartialSystem,
    n_max: int = 2000,
    max_len: int | None = None,
    norm: str = "l2",
) -> ExponentEstimate:
    """``ln r`` of ``b -> a * alpha(b)`` as the exponent of ``a(x) T_x``.

    The bracket is the gelfand bracket of the effective weight; the
    periodic-orbit bound and its norm variant are attached in ``meta``.
    """
    W = effective_weight(a, field, sys)
    gel = spectral_exponent(W, sys, n_max, norm=norm, max_len=max_len)
    per = periodic_orbit_vp(W, sys, max_len=max_len, n_max=min(n_max, 200))
    return replace(
        gel,
        method="inner_field",
        meta={**gel.meta, "periodic_lower": per.lower,
              "norm_variant": per.meta["norm_variant"]},
    )


def lift_to_BD(a: Weight, field: InnerField, sys: PartialSystem) -> Weight:
    """The ``k^2``-dimensional weight ``x -> [d -> T_x a(phi x) d S_x]``.

    With column-major ``vec``, ``vec(A d B) = (B^T kron A) vec(d)``.  States
    outside the domain of ``phi`` get the zero matrix.
    """
    _check(a, field, sys)
    if not sys.deterministic:
        raise DynamicsError("lift_to_BD needs a single-valued map (finite map or circle grid)")
    k = a.dim
    out = np.zeros((sys.n_states, k * k, k * k), dtype=complex)
    S = field.S
    for x in sys.states:
        y = sys.phi(x)
        if y is None:
            continue
        out[x] = np.kron(S[x].T, field.T[x] @ a.values[y])
    return Weight(out)


def vec(d: np.ndarray) -> np.ndarray:
    return np.asarray(d).reshape(-1, order="F")


def unvec(v: np.ndarray, k: int) -> np.ndarray:
    return np.asarray(v).reshape((k, k), order="F")


def pullback(a: Weight, sys: PartialSystem) -> Weight:
    """``a o phi`` on a single-valued map (zero where ``phi`` is undefined)."""
    if not sys.deterministic:
        raise DynamicsError("pullback needs a single-valued map")
    out = np.zeros_like(a.values)
    for x in sys.states:
        y = sys.phi(x)
        if y is not None:
            out[x] = a.values[y]
    return Weight(out)


def endomorphism_power_log_norm(a: Weight, field: InnerField, sys: PartialSystem, n: int) -> float:
    """``(1/n) ln sup_x ||(a alpha(a) ... alpha^{n-1}(a))(x)||`` in the algebra.

    The product is formed element by element in ``C(X, M_k)`` by iterating
    ``alpha`` on whole functions, with no renormalization, so keep ``n``
    small enough that entries stay finite.
    """
    _check(a, field, sys)
    if not sys.deterministic:
        raise DynamicsError("the algebra product needs a single-valued map")
    if n < 1:
        raise ValueError("n must be >= 1")
    T, S = field.T, field.S

    def alpha(b):
        out = np.zeros_like(b)
        for x in sys.states:
            y = sys.phi(x)
            if y is not None:
                out[x] = T[x] @ b[y] @ S[x]
        return out

    g = a.values.copy()
    term = a.values
    for _ in range(1, n):
        term = alpha(term)
        g = g @ term
    # only points where every factor is defined count
    dom = [x for x in sys.states if _defined(sys, x, n)]
    if not dom:
        return NEG_INF
    top = float(op_norm(g[dom]).max())
    return NEG_INF if top == 0.0 else math.log(top) / n


def _defined(sys: PartialSystem, x: int, n: int) -> bool:
    cur = x
    for _ in range(n):
        cur = sys.phi(cur)
        if cur is None:
            return False
    return True


def cocycle_power_log_norm(a: Weight, field: InnerField, sys: PartialSystem, n: int) -> float:
    """Same quantity through the cocycle of ``a(x) T_x``: ``(1/n) u_n``."""
    u, _ = sup_log_norms(effective_weight(a, field, sys), sys, n)
    return float(u[n - 1]) / n if len(u) >= n else NEG_INF
