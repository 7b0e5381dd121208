"""Morrey and weak-Morrey norm estimates for grid-sampled functions.

A grid function is a step function, constant on each cell and zero outside
the grid.  The Morrey supremum is taken over grid-aligned cubes whose side
is an integer number of cells, so every value reported here is a genuine
lower bound for the norm of the step function.  Cube masses come from an
n-dimensional summed-area table in O(2^n) per cube.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from morreylab._parallel import ordered_map
from morreylab.core import GridFunction, GridSet, GridSpec, MorreyError, MorreyParams
from morreylab.exact_norms import LOWER_BOUND, NormValue


@dataclass(frozen=True)
class PrefixSumTable:
    """Inclusive n-dimensional prefix sums of |f|^q, padded with a zero layer.

    ``cumulative[i_1, ..., i_n]`` is the sum over cells with index < i in
    every axis, in units of cell values; ``query`` multiplies by the cell
    volume.  Float tables accumulate in extended precision; indicator
    tables hold exact integer counts.
    """

    grid: GridSpec
    q: float
    cumulative: np.ndarray = field(repr=False)

    @property
    def total(self) -> float:
        return float(self.cumulative[(-1,) * self.grid.n]) * self.grid.cell_volume

    def _raw(self, lo: Sequence[int], hi: Sequence[int]):
        n = self.grid.n
        acc = 0
        for corner in itertools.product((0, 1), repeat=n):
            idx = tuple(hi[a] if c else lo[a] for a, c in enumerate(corner))
            sign = -1 if (n - sum(corner)) % 2 else 1
            acc = acc + sign * self.cumulative[idx]
        return acc

    def query(self, lo: Sequence[int], hi: Sequence[int]) -> float:
        """Sum of |f|^q h^n over cells lo <= idx < hi (indices clipped to the grid)."""
        lo = [min(max(int(a), 0), s) for a, s in zip(lo, self.grid.shape)]
        hi = [min(max(int(b), a), s) for a, b, s in zip(lo, hi, self.grid.shape)]
        return float(self._raw(lo, hi)) * self.grid.cell_volume

    def block_sums(self, lows: Sequence[np.ndarray], highs: Sequence[np.ndarray]) -> np.ndarray:
        """Raw sums for the outer product of per-axis [low, high) index ranges."""
        n = self.grid.n
        acc = None
        for corner in itertools.product((0, 1), repeat=n):
            idx = np.ix_(*[highs[a] if c else lows[a] for a, c in enumerate(corner)])
            term = self.cumulative[idx]
            if (n - sum(corner)) % 2:
                acc = -term if acc is None else acc - term
            else:
                acc = term.copy() if acc is None else acc + term
        return acc


def _pad_cumsum(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.zeros(tuple(s + 1 for s in arr.shape), dtype=dtype)
    out[(slice(1, None),) * arr.ndim] = arr
    for axis in range(arr.ndim):
        np.cumsum(out, axis=axis, out=out)
    return out


def build_prefix_table(f: GridFunction, q: float) -> PrefixSumTable:
    q = float(q)
    if not q > 0:
        raise MorreyError(f"q must be positive, got {q}")
    with np.errstate(over="ignore", invalid="ignore"):
        powered = np.abs(f.values) ** q
    if not np.all(np.isfinite(powered)):
        raise MorreyError("overflow or NaN while forming |f|^q")
    return PrefixSumTable(f.grid, q, _pad_cumsum(powered.astype(np.longdouble), np.longdouble))


def build_indicator_table(s: GridSet) -> PrefixSumTable:
    """Exact integer-count table for an indicator; valid for every q."""
    return PrefixSumTable(s.grid, 1.0, _pad_cumsum(s.mask.astype(np.int64), np.int64))


ALL_CELLS = "all_cells"
STRIDED = "strided"
ALL_SIZES = "all"
DYADIC = "dyadic"


@dataclass(frozen=True)
class CubeSearchPolicy:
    """Which grid-aligned cubes enter the supremum.

    ``max_cube_cells=None`` means up to the longest grid axis.
    """

    anchors: str = ALL_CELLS
    stride: int = 1
    sizes: str = ALL_SIZES
    max_cube_cells: int | None = None

    def __post_init__(self):
        if self.anchors not in (ALL_CELLS, STRIDED):
            raise MorreyError(f"unknown anchor policy {self.anchors!r}")
        if self.sizes not in (ALL_SIZES, DYADIC):
            raise MorreyError(f"unknown size policy {self.sizes!r}")
        if int(self.stride) < 1:
            raise MorreyError("stride must be >= 1")
        if self.max_cube_cells is not None and int(self.max_cube_cells) < 1:
            raise MorreyError("empty cube family: max_cube_cells < 1")

    @classmethod
    def default(cls, n: int) -> "CubeSearchPolicy":
        return cls(sizes=ALL_SIZES if n <= 2 else DYADIC)

    def cube_sizes(self, grid: GridSpec) -> list[int]:
        top = self.max_cube_cells or max(grid.shape)
        if self.sizes == ALL_SIZES:
            return list(range(1, top + 1))
        out = [1 << k for k in range(top.bit_length()) if (1 << k) <= top]
        if out[-1] != top:
            out.append(top)
        return out

    def anchor_stride(self) -> int:
        return int(self.stride) if self.anchors == STRIDED else 1


def _axis_ranges(length: int, side: int, stride: int):
    if side >= length:
        # any cube this large covers the whole axis when placed over it
        return np.array([0]), np.array([length])
    lo = np.arange(0, length - side + 1, stride)
    if lo[-1] != length - side:
        lo = np.append(lo, length - side)
    return lo, lo + side


def _cube_search(table: PrefixSumTable, params: MorreyParams, policy: CubeSearchPolicy,
                 threads: int | None = None):
    """Return (value, witness) maximizing |Q|^(1/p-1/q) (mass in Q)^(1/q)."""
    grid = table.grid
    if grid.n != params.n:
        raise MorreyError(f"grid dimension {grid.n} does not match n={params.n}")
    sizes = policy.cube_sizes(grid)
    stride = policy.anchor_stride()
    vol_exp = params.volume_exponent
    cell_vol = grid.cell_volume

    def per_size(side: int):
        ranges = [_axis_ranges(length, side, stride) for length in grid.shape]
        sums = table.block_sums([r[0] for r in ranges], [r[1] for r in ranges])
        flat = int(np.argmax(sums))
        best = sums.flat[flat]
        pos = np.unravel_index(flat, sums.shape)
        anchor = tuple(int(ranges[a][0][pos[a]]) for a in range(grid.n))
        return side, float(best), anchor

    results = ordered_map(per_size, sizes, threads)
    best_val, best_wit = 0.0, None
    for side, mass, anchor in results:
        if mass <= 0:
            continue
        length = side * grid.h
        value = (length ** grid.n) ** vol_exp * (mass * cell_vol) ** (1.0 / params.q)
        if value > best_val:
            best_val = value
            best_wit = {
                "side_cells": side,
                "side": length,
                "anchor": list(anchor),
                "lower": [o + grid.h * a for o, a in zip(grid.origin, anchor)],
            }
    return best_val, best_wit


def morrey_norm_grid(f: GridFunction, params: MorreyParams,
                     policy: CubeSearchPolicy | None = None,
                     threads: int | None = None) -> NormValue:
    """Lower bound for ||f||_{M^p_q} over the policy's grid-aligned cubes."""
    policy = policy or CubeSearchPolicy.default(params.n)
    table = build_prefix_table(f, params.q)
    value, witness = _cube_search(table, params, policy, threads)
    return NormValue(value, LOWER_BOUND, witness)


def grid_set_norm(s: GridSet, params: MorreyParams,
                  policy: CubeSearchPolicy | None = None,
                  threads: int | None = None) -> NormValue:
    """Morrey norm estimate of an indicator using an exact count table."""
    policy = policy or CubeSearchPolicy.default(params.n)
    value, witness = _cube_search(build_indicator_table(s), params, policy, threads)
    return NormValue(value, LOWER_BOUND, witness)


@dataclass(frozen=True)
class LevelSweep:
    """Distinct positive magnitudes of a function, strictly decreasing."""

    lambdas: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        if any(a <= b for a, b in zip(lam, lam[1:])) or any(v <= 0 for v in lam):
            raise MorreyError("levels must be positive and strictly decreasing")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_values(cls, values: np.ndarray) -> "LevelSweep":
        mags = np.unique(np.abs(np.asarray(values, dtype=float)))
        return cls(tuple(float(v) for v in mags[::-1] if v > 0))


def weak_morrey_norm_grid(f: GridFunction, params: MorreyParams,
                          policy: CubeSearchPolicy | None = None,
                          threads: int | None = None) -> NormValue:
    """sup over levels v of v * ||chi_{|f| >= v}||, the weak norm of a step function.

    lambda * ||chi_{|f| > lambda}|| is increasing on each interval between
    consecutive magnitudes, so the supremum is approached as lambda rises
    to a magnitude v from below, where the level set is {|f| >= v}.
    """
    policy = policy or CubeSearchPolicy.default(params.n)
    sweep = LevelSweep.from_values(f.values)
    mags = np.abs(f.values)
    best_val, best_wit = 0.0, None
    for v in sweep.lambdas:
        norm = grid_set_norm(GridSet(f.grid, mags >= v), params, policy, threads)
        cand = v * norm.value
        if cand > best_val:
            best_val, best_wit = cand, {"level": v, "cube": norm.witness}
    return NormValue(best_val, LOWER_BOUND, best_wit, space="weak")


def _log_objective(log_r: np.ndarray, log_sides: np.ndarray, params: MorreyParams) -> np.ndarray:
    n = params.n
    out = (n / params.p - n / params.q) * log_r
    for ls in log_sides:
        out = out + np.minimum(ls, log_r) / params.q
    return out


def oracle_r_sweep(sides: Sequence[float], params: MorreyParams, num: int = 10**6,
                   refine: int = 2, span: float = 1e3) -> NormValue:
    """Brute-force sup over R of R^(n/p-n/q) prod_i min(s_i, R)^(1/q).

    A log-spaced sweep of ``num`` points over
    [min side / span, max finite side * span], followed by ``refine``
    zoom passes around the best sample.  Infinite sides contribute R.
    """
    sides = [float(s) for s in sides]
    if len(sides) != params.n:
        raise MorreyError(f"{len(sides)} sides given for dimension n={params.n}")
    finite = [s for s in sides if math.isfinite(s)]
    if not finite:
        raise MorreyError("oracle sweep needs at least one finite side")
    log_sides = np.array([math.log(s) if math.isfinite(s) else np.inf for s in sides])
    lo = math.log(min(finite) / span)
    hi = math.log(max(finite) * span)
    grid = np.linspace(lo, hi, int(num))
    vals = _log_objective(grid, log_sides, params)
    i = int(np.argmax(vals))
    best_log_r, best = grid[i], vals[i]
    for _ in range(refine):
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, grid.size - 1)]
        grid = np.linspace(a, b, 1001)
        vals = _log_objective(grid, log_sides, params)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best_log_r, best = grid[i], vals[i]
    return NormValue(math.exp(best), LOWER_BOUND, {"R": math.exp(best_log_r)})
