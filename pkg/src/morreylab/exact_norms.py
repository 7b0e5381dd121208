"""Closed-form Morrey norms of box and slab indicators.

For a box with sorted sides s_1 <= ... <= s_n only cubes anchored at the
box corner matter, so

    ||chi_B|| = sup_R  R^(n/p - n/q) * prod_i min(s_i, R)^(1/q).

In log R the objective is piecewise linear with slopes n/p - k/q, which
decrease in k, so the supremum sits at one of the breakpoints R = s_k (or
escapes to R -> infinity when the last slope is nonnegative, which can only
happen for slabs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

from morreylab.core import INF, AxisBox, MorreyError, MorreyParams, sorted_sides

EXACT = "exact"
LOWER_BOUND = "lower_bound"
APPROXIMATION = "approximation"
_KINDS = (EXACT, LOWER_BOUND, APPROXIMATION)


@dataclass(frozen=True)
class NormValue:
    """A (quasi-)norm value with its provenance.

    ``space`` is ``"strong"`` for M^p_q values and ``"weak"`` for WM^p_q.
    """

    value: float
    kind: str
    witness: Any = None
    space: str = "strong"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise MorreyError(f"unknown norm kind {self.kind!r}")
        if math.isnan(self.value) or self.value < 0:
            raise MorreyError(f"norm value must be nonnegative, got {self.value}")
        if self.kind == EXACT and self.witness is None:
            raise MorreyError("exact norm values must record a witness")

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self) -> float:
        return float(self.value)

    def to_json(self) -> dict:
        return {
            "value": "inf" if math.isinf(self.value) else self.value,
            "kind": self.kind,
            "space": self.space,
            "witness": self.witness,
        }


def _breakpoint_candidates(sides: Sequence[float], params: MorreyParams):
    """Yield (k, R, log value) for R = s_k, k = 1..len(finite sides).

    ``sides`` must be sorted ascending; infinite entries are skipped as
    breakpoints but still contribute R to the product through the exponent.
    """
    n, p, q = params.n, params.p, params.q
    log_prefix = 0.0
    for k, s in enumerate(sides, start=1):
        if math.isinf(s):
            break
        log_s = math.log(s)
        exponent = n / p - (k - 1) / q
        yield k, s, log_prefix + exponent * log_s
        log_prefix += log_s / q


def _best(candidates) -> tuple[int, float, float]:
    best = None
    for k, r, log_val in candidates:
        # strict '>' keeps the smallest maximizing k
        if best is None or log_val > best[2]:
            best = (k, r, log_val)
    return best


def box_indicator_norm(box: AxisBox | Sequence[float], params: MorreyParams) -> NormValue:
    """Exact Morrey norm of the indicator of a finite box.

    Accepts an :class:`AxisBox` or a bare sequence of side lengths.
    """
    if not isinstance(box, AxisBox):
        box = AxisBox.from_sides(box)
    if box.n != params.n:
        raise MorreyError(f"box dimension {box.n} does not match n={params.n}")
    if not box.is_finite:
        raise MorreyError("box_indicator_norm needs finite sides; use slab_indicator_norm")
    sides, _ = sorted_sides(box)
    k, r, log_val = _best(_breakpoint_candidates(sides, params))
    return NormValue(math.exp(log_val), EXACT, {"k": k, "R": r})


def slab_indicator_norm(finite_sides: Sequence[float], params: MorreyParams) -> NormValue:
    """Exact Morrey norm of a slab with ``k = len(finite_sides)`` bounded directions.

    The remaining n - k directions are infinite.  Returns an infinite value
    when n q > k p.  ``k = 0`` is the whole space, whose indicator has
    infinite norm for every admissible (p, q); the witness flags it.
    """
    k = len(finite_sides)
    n = params.n
    if k > n:
        raise MorreyError(f"{k} finite sides given for dimension n={n}")
    sides = tuple(sorted(float(s) for s in finite_sides))
    if any(not (math.isfinite(s) and s > 0) for s in sides):
        raise MorreyError(f"slab thicknesses must be finite and positive, got {finite_sides}")
    if k == 0:
        return NormValue(INF, EXACT, {"k": 0, "R": "inf", "flag": "full-space indicator"})
    if k == n:
        return box_indicator_norm(sides, params)

    # slope of log-objective beyond the last finite side
    tail = n / params.p - k / params.q
    scale = max(abs(n / params.p), abs(k / params.q))
    if tail > 1e-12 * scale:
        return NormValue(INF, EXACT, {"k": k, "R": "inf", "flag": "unbounded"})
    padded = sides + (INF,) * (n - k)
    best = _best(_breakpoint_candidates(padded, params))
    if abs(tail) <= 1e-12 * scale:
        limit = sum(math.log(s) for s in sides) / params.q
        if limit > best[2]:
            best = (k, "inf", limit)
    kk, r, log_val = best
    return NormValue(math.exp(log_val), EXACT, {"k": kk, "R": r})


PRECOMPOSE = "precompose"
SUPPORT_SCALE = "support_scale"


def dilation_norm_factor(t: float, params: MorreyParams, direction: str = PRECOMPOSE) -> float:
    """Norm multiplier of a dilation by t.

    ``precompose``: ||f(t .)|| = t^(-n/p) ||f||.
    ``support_scale``: ||chi_{tB}|| = t^(n/p) ||chi_B||.
    """
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise MorreyError(f"dilation factor must be positive, got {t}")
    exponent = params.n / params.p
    if direction == PRECOMPOSE:
        return t ** -exponent
    if direction == SUPPORT_SCALE:
        return t ** exponent
    raise MorreyError(f"unknown dilation direction {direction!r}")


def indicator_weak_norm(strong: NormValue | float) -> NormValue:
    """Weak-Morrey norm of an indicator from its strong norm (they coincide)."""
    if not isinstance(strong, NormValue):
        value = float(strong)
        return NormValue(value, EXACT, {"from": "strong indicator norm"}, space="weak")
    return replace(strong, space="weak")
