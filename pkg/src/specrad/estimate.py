"""Bracketed exponent estimates and cross-method reconciliation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

log = logging.getLogger(__name__)

EXACT = "exact"
BRACKET = "bracket"
SAMPLED = "sampled"
EXACTNESS = (EXACT, BRACKET, SAMPLED)

EXACT_WIDTH = 1e-9
# slack for comparing certified bounds computed along different float paths
FP_SLACK = 1e-9


class ReconciliationError(ValueError):
    """Raised when two certified brackets do not intersect."""

    def __init__(self, method_a: str, method_b: str, detail: str = ""):
        self.methods = (method_a, method_b)
        msg = f"brackets of {method_a!r} and {method_b!r} do not intersect"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def exp_or_zero(x: float) -> float:
    """exp with exp(-inf) = 0."""
    if x == -math.inf:
        return 0.0
    return math.exp(x) if x < 709.0 else math.inf


def encode_float(x: float | None) -> Any:
    """JSON-safe float: non-finite values become the strings 'inf', '-inf', 'nan'."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def decode_float(x: Any) -> float | None:
    if x is None:
        return None
    if isinstance(x, str):
        return float(x)
    return float(x)


@dataclass(frozen=True)
class ExponentEstimate:
    """A bracket ``[lower, upper]`` for a logarithmic growth rate.

    ``estimate`` is an optional point value inside the bracket (for instance a
    tail average); it carries no certification of its own.  The r-value view is
    ``exp`` of everything, with ``exp(-inf) = 0``.
    """

    lower: float
    upper: float
    method: str
    exactness: str = BRACKET
    n_used: int = 0
    witness: Any = None
    estimate: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.exactness not in EXACTNESS:
            raise ValueError(f"unknown exactness {self.exactness!r}")
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("bracket endpoints must not be NaN")
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} > upper {self.upper} ({self.method})")
        if self.exactness == EXACT and not self.width <= EXACT_WIDTH:
            raise ValueError(f"exact estimate with width {self.width}")

    @property
    def width(self) -> float:
        if self.lower == self.upper:
            return 0.0
        return self.upper - self.lower

    @property
    def center(self) -> float:
        if self.estimate is not None:
            return self.estimate
        if self.lower == self.upper:
            return self.lower
        if math.isinf(self.lower) or math.isinf(self.upper):
            return self.lower if math.isfinite(self.lower) else self.upper
        return 0.5 * (self.lower + self.upper)

    @property
    def r_lower(self) -> float:
        return exp_or_zero(self.lower)

    @property
    def r_upper(self) -> float:
        return exp_or_zero(self.upper)

    @property
    def r(self) -> float:
        return exp_or_zero(self.center)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        if value == -math.inf:
            return self.lower == -math.inf
        return self.lower - tol <= value <= self.upper + tol

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lower": encode_float(self.lower),
            "upper": encode_float(self.upper),
            "r_lower": encode_float(self.r_lower),
            "r_upper": encode_float(self.r_upper),
            "estimate": encode_float(self.estimate),
            "n_used": int(self.n_used),
            "exactness": self.exactness,
            "witness": self.witness,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExponentEstimate":
        return cls(
            lower=decode_float(d["lower"]),
            upper=decode_float(d["upper"]),
            method=d["method"],
            exactness=d["exactness"],
            n_used=d.get("n_used", 0),
            witness=d.get("witness"),
            estimate=decode_float(d.get("estimate")),
            meta=d.get("meta") or {},
        )


def reconcile(estimates: Iterable[ExponentEstimate]) -> ExponentEstimate:
    """Intersect certified brackets; sampled brackets are only advisory.

    Sampled estimates are logged and listed in the result's ``meta`` but never
    narrow or veto the certified intersection.  If every input is sampled, the
    sampled brackets are intersected among themselves.
    """
    estimates = list(estimates)
    if not estimates:
        raise ValueError("nothing to reconcile")
    if len(estimates) == 1:
        return estimates[0]

    certified = [e for e in estimates if e.exactness != SAMPLED]
    advisory = [e for e in estimates if e.exactness == SAMPLED]
    pool = certified or advisory

    lo_src = max(pool, key=lambda e: e.lower)
    hi_src = min(pool, key=lambda e: e.upper)
    lower, upper = lo_src.lower, hi_src.upper
    if lower > upper:
        slack = FP_SLACK * (1.0 + abs(lower) + abs(upper))
        if math.isinf(lower) or math.isinf(upper) or lower - upper > slack:
            raise ReconciliationError(lo_src.method, hi_src.method, f"{lower!r} > {upper!r}")
        lower = upper

    for e in advisory if certified else []:
        if e.upper < lower - FP_SLACK or e.lower > upper + FP_SLACK:
            log.warning("sampled method %s disagrees with certified bracket [%g, %g]", e.method, lower, upper)

    if certified:
        exactness = EXACT if upper - lower <= EXACT_WIDTH or lower == upper else BRACKET
    else:
        exactness = SAMPLED
    point = [e.estimate for e in pool if e.estimate is not None and lower <= e.estimate <= upper]
    return ExponentEstimate(
        lower=lower,
        upper=upper,
        method="reconciled",
        exactness=exactness,
        n_used=max(e.n_used for e in estimates),
        witness=lo_src.witness,
        estimate=point[0] if point else None,
        meta={
            "lower_from": lo_src.method,
            "upper_from": hi_src.method,
            "certified": [e.method for e in certified],
            "advisory": [e.method for e in advisory],
        },
    )


def with_meta(e: ExponentEstimate, **kw) -> ExponentEstimate:
    return replace(e, meta={**e.meta, **kw})
