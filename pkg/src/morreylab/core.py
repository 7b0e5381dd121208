"""Domain types shared by every other module.

Boxes are half-open, ``[lower, lower + sides)``.  An infinite side is stored
as ``math.inf`` (exported here as ``INF``) and serialized to JSON as the
string ``"inf"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

INF = math.inf

# Slack used when deciding which side of a regime boundary n*q/p falls on.
_BOUNDARY_RTOL = 1e-12


class MorreyError(ValueError):
    """Raised on invalid parameters or geometry."""


@dataclass(frozen=True)
class MorreyParams:
    """Exponent triple of the space M^p_q(R^n)."""

    n: int
    p: float
    q: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise MorreyError(f"dimension n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        p, q = float(self.p), float(self.q)
        if not (math.isfinite(p) and math.isfinite(q)):
            raise MorreyError("p and q must be finite")
        if not 0 < q <= p:
            raise MorreyError(f"need 0 < q <= p < inf, got p={p}, q={q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def volume_exponent(self) -> float:
        """Exponent 1/p - 1/q applied to |Q| in the Morrey norm."""
        return 1.0 / self.p - 1.0 / self.q

    def to_json(self) -> dict:
        return {"n": self.n, "p": self.p, "q": self.q}

    @classmethod
    def from_json(cls, obj: dict) -> "MorreyParams":
        try:
            return cls(obj["n"], obj["p"], obj["q"])
        except KeyError as exc:
            raise MorreyError(f"MorreyParams JSON missing key {exc}") from None


def regime_index(params: MorreyParams) -> int:
    """Return the regime index m in [1, n].

    m is the integer with (n/m) q <= p <= (n/(m-1)) q; m = 1 is the slab
    regime n q <= p.  On a boundary p = n q / m the smaller index wins.
    """
    ratio = params.n * params.q / params.p
    m = math.ceil(ratio * (1.0 - _BOUNDARY_RTOL))
    return min(max(m, 1), params.n)


def _parse_extent(value: Any) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        value = float(value)
    return float(value)


def _dump_extent(value: float) -> float | str:
    return "inf" if math.isinf(value) else value


@dataclass(frozen=True)
class AxisBox:
    """Axis-parallel box, possibly with infinite extents (a slab)."""

    lower: tuple[float, ...]
    sides: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        sides = tuple(_parse_extent(v) for v in self.sides)
        if len(lower) != len(sides) or not sides:
            raise MorreyError("lower and sides must be nonempty and of equal length")
        for s in sides:
            if math.isnan(s) or s <= 0:
                raise MorreyError(f"box sides must be positive, got {sides}")
        if not all(math.isfinite(v) for v in lower):
            raise MorreyError("box anchor must be finite")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "sides", sides)

    @classmethod
    def from_sides(cls, sides: Sequence[float], lower: Sequence[float] | None = None):
        if lower is None:
            lower = (0.0,) * len(sides)
        return cls(tuple(lower), tuple(sides))

    @classmethod
    def cube(cls, n: int, side: float, lower: Sequence[float] | None = None):
        return cls.from_sides((side,) * n, lower)

    @property
    def n(self) -> int:
        return len(self.sides)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(a + s for a, s in zip(self.lower, self.sides))

    @property
    def volume(self) -> float:
        if any(math.isinf(s) for s in self.sides):
            return INF
        return math.prod(self.sides)

    @property
    def is_finite(self) -> bool:
        return all(math.isfinite(s) for s in self.sides)

    def scaled(self, t: float) -> "AxisBox":
        """Image of the box under x -> t x."""
        return AxisBox(tuple(t * a for a in self.lower), tuple(t * s for s in self.sides))

    def translated(self, shift: Sequence[float]) -> "AxisBox":
        return AxisBox(tuple(a + b for a, b in zip(self.lower, shift)), self.sides)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Half-open membership test for an array of points of shape (..., n)."""
        pts = np.asarray(points, dtype=float)
        lo = np.asarray(self.lower)
        hi = lo + np.asarray(self.sides)
        return np.all((pts >= lo) & (pts < hi), axis=-1)

    def to_json(self) -> dict:
        return {"lower": list(self.lower), "sides": [_dump_extent(s) for s in self.sides]}

    @classmethod
    def from_json(cls, obj: dict) -> "AxisBox":
        sides = obj["sides"]
        lower = obj.get("lower", [0.0] * len(sides))
        return cls(tuple(lower), tuple(sides))


def sorted_sides(box: AxisBox) -> tuple[tuple[float, ...], tuple[int, ...]]:
    """Sides in ascending order, infinite extents last, plus the permutation.

    ``perm[k]`` is the original axis of the k-th sorted side.  The sort is
    stable so equal sides keep their axis order.
    """
    perm = tuple(sorted(range(box.n), key=lambda i: box.sides[i]))
    return tuple(box.sides[i] for i in perm), perm


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of cubic cells with spacing ``h``.

    Cell ``idx`` covers ``[origin + h*idx, origin + h*(idx+1))``.
    """

    origin: tuple[float, ...]
    h: float
    shape: tuple[int, ...]

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        shape = tuple(int(s) for s in self.shape)
        h = float(self.h)
        if len(origin) != len(shape) or not shape:
            raise MorreyError("origin and shape must be nonempty and of equal length")
        if not (math.isfinite(h) and h > 0):
            raise MorreyError(f"grid spacing must be positive, got {h}")
        if any(s < 1 for s in shape):
            raise MorreyError(f"grid shape entries must be positive, got {shape}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "h", h)

    @classmethod
    def covering(cls, box: AxisBox, h: float, margin: int = 0) -> "GridSpec":
        """Smallest grid with spacing h anchored at the box corner that covers it."""
        if not box.is_finite:
            raise MorreyError("cannot cover an unbounded box with a finite grid")
        shape = tuple(int(math.ceil(s / h - 1e-9)) + 2 * margin for s in box.sides)
        origin = tuple(a - margin * h for a in box.lower)
        return cls(origin, h, shape)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def extent(self) -> AxisBox:
        return AxisBox(self.origin, tuple(self.h * s for s in self.shape))

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h * (np.arange(self.shape[axis]) + 0.5)

    def centers(self) -> np.ndarray:
        """Cell centers as an array of shape (*shape, n)."""
        axes = [self.axis_centers(i) for i in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def corners(self) -> np.ndarray:
        """Cell vertices as an array of shape (*(shape + 1), n)."""
        axes = [self.origin[i] + self.h * np.arange(self.shape[i] + 1) for i in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.origin, self.h / factor, tuple(s * factor for s in self.shape))

    def to_json(self) -> dict:
        return {"origin": list(self.origin), "h": self.h, "shape": list(self.shape)}

    @classmethod
    def from_json(cls, obj: dict) -> "GridSpec":
        return cls(tuple(obj["origin"]), obj["h"], tuple(obj["shape"]))


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-constant function sampled on a grid; zero outside it."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.size != self.grid.size:
            raise MorreyError(
                f"values have {values.size} entries, grid has {self.grid.size} cells"
            )
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise MorreyError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def box_indicator(cls, grid: GridSpec, box: AxisBox, value: float = 1.0) -> "GridFunction":
        """value * indicator of the box, sampled at cell centers."""
        return cls(grid, value * box.contains(grid.centers()))

    @classmethod
    def truncated_slab(cls, thickness: float, length: float, n: int, h: float) -> "GridFunction":
        """Indicator of [0, thickness] x [0, length]^(n-1)."""
        box = AxisBox.from_sides((thickness,) + (length,) * (n - 1))
        return cls.box_indicator(GridSpec.covering(box, h), box)

    @classmethod
    def simple(cls, grid: GridSpec, terms: Sequence[tuple[float, AxisBox]]) -> "GridFunction":
        """Simple function sum_i c_i * indicator(B_i)."""
        centers = grid.centers()
        values = np.zeros(grid.shape)
        for coeff, box in terms:
            values = values + coeff * box.contains(centers)
        return cls(grid, values)

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.values))

    def to_set(self, threshold: float = 0.0) -> "GridSet":
        """The level set {|f| > threshold}."""
        return GridSet(self.grid, np.abs(self.values) > threshold)


@dataclass(frozen=True)
class GridSet:
    """Union of grid cells, given by a boolean mask."""

    grid: GridSpec
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.size != self.grid.size:
            raise MorreyError(f"mask has {mask.size} entries, grid has {self.grid.size} cells")
        mask = mask.reshape(self.grid.shape)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def measure(self) -> float:
        return int(self.mask.sum()) * self.grid.cell_volume

    def indicator(self) -> GridFunction:
        return GridFunction(self.grid, self.mask.astype(float))
