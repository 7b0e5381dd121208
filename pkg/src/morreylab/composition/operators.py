"""Operator-norm bounds for composition operators on Lebesgue and Morrey spaces."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.spatial import ConvexHull

from morreylab.composition.maps import AffineMap, SmoothMap
from morreylab.core import AxisBox, GridFunction, GridSet, GridSpec, MorreyError, MorreyParams, regime_index
from morreylab.exact_norms import PRECOMPOSE, box_indicator_norm, dilation_norm_factor
from morreylab.grid_norms import CubeSearchPolicy, grid_set_norm, morrey_norm_grid

log = logging.getLogger(__name__)

LOWER = "lower"
UPPER = "upper"
EXACT = "exact"


@dataclass(frozen=True)
class OperatorBound:
    value: float
    direction: str
    source: str
    witness: Any = None

    def __post_init__(self):
        if self.direction not in (LOWER, UPPER, EXACT):
            raise MorreyError(f"unknown bound direction {self.direction!r}")
        if math.isnan(self.value) or self.value < 0:
            raise MorreyError(f"operator bound must be nonnegative, got {self.value}")

    def to_json(self) -> dict:
        return {
            "value": "inf" if math.isinf(self.value) else self.value,
            "direction": self.direction,
            "source": self.source,
            "witness": self.witness,
        }


def _require_affine(fmap) -> AffineMap:
    if not isinstance(fmap, AffineMap):
        raise MorreyError("this bound is only available for affine maps")
    return fmap


def lebesgue_opnorm_affine(fmap: AffineMap, p: float) -> OperatorBound:
    """||C_phi||_{L^p -> L^p} = |det A|^(-1/p), since |phi^{-1}(E)| = |E| / |det A|."""
    fmap = _require_affine(fmap)
    return OperatorBound(abs(fmap.det) ** (-1.0 / p), EXACT, "|det A|^(-1/p)")


def morrey_opnorm_upper_affine(fmap: AffineMap, params: MorreyParams) -> OperatorBound:
    """Lipschitz/volume upper bound with L = sigma_max(A) and volume ratio 1/|det A|."""
    fmap = _require_affine(fmap)
    if fmap.n != params.n:
        raise MorreyError("map dimension does not match params")
    n, p, q = params.n, params.p, params.q
    spread = max(1.0, math.sqrt(n) * fmap.lipschitz)
    value = spread ** (n / q - n / p) * (1.0 / abs(fmap.det)) ** (1.0 / q)
    return OperatorBound(value, UPPER, "max(1, sqrt(n) L)^(n/q - n/p) * sup(|phi^-1 E| / |E|)^(1/q)",
                         {"L": fmap.lipschitz, "volume_ratio": 1.0 / abs(fmap.det)})


def scalar_opnorm_exact(t: float, params: MorreyParams) -> OperatorBound:
    """Exact norm of f -> f(t x): the dilation law t^(-n/p)."""
    return OperatorBound(dilation_norm_factor(t, params, PRECOMPOSE), EXACT, "t^(-n/p)")


def default_diag_witnesses(entries: Sequence[float]) -> list[AxisBox]:
    """Boxes [0,1] x [0,R_1] x ... with each R_i drawn from {1, a_i, a_i^2, 2 a_i^2}."""
    a = [float(v) for v in entries]
    choices = [sorted({1.0, x, x * x, 2 * x * x}) for x in a[1:]]
    return [AxisBox.from_sides((1.0,) + tuple(rs)) for rs in itertools.product(*choices)]


def diag_closed_form_bound(entries: Sequence[float], params: MorreyParams) -> float:
    """a_1^(-1/q) ... a_{m-1}^(-1/q) a_{m-1}^(-n/p + m/q) for diag(1, a_1, ..., a_{n-1}).

    Valid for regime m >= 2 and 1 <= a_1 <= ... <= a_{n-1}.
    """
    a = [float(v) for v in entries]
    m = regime_index(params)
    if m < 2:
        raise MorreyError("the diagonal lower bound formula needs regime m >= 2")
    if len(a) != params.n or a[0] != 1.0 or any(x < y for x, y in zip(a[1:], a[:-1])):
        raise MorreyError("entries must have the form (1, a_1, ..., a_{n-1}) with 1 <= a_1 <= ...")
    n, p, q = params.n, params.p, params.q
    tail = a[1:m]
    return math.prod(x ** (-1.0 / q) for x in tail) * tail[-1] ** (-n / p + m / q)


def diag_opnorm_lower(entries: Sequence[float], params: MorreyParams,
                      witnesses: Sequence[AxisBox] | None = None) -> OperatorBound:
    """sup over witness boxes B of ||chi_{D^-1 B}|| / ||chi_B||, D = diag(entries)."""
    a = np.asarray(entries, dtype=float)
    if a.shape != (params.n,) or np.any(a <= 0):
        raise MorreyError("diagonal entries must be n positive numbers")
    witnesses = list(witnesses) if witnesses is not None else default_diag_witnesses(a)
    if not witnesses:
        raise MorreyError("empty witness family")
    best, best_box = -1.0, None
    for box in witnesses:
        if not box.is_finite:
            raise MorreyError("witness boxes must be finite")
        pre = AxisBox.from_sides(tuple(np.asarray(box.sides) / a))
        ratio = box_indicator_norm(pre, params).value / box_indicator_norm(box, params).value
        if ratio > best:
            best, best_box = ratio, box
    return OperatorBound(best, LOWER, "witness boxes, exact indicator norms",
                         {"box": best_box.to_json()})


def min_entry_lower_bound(opnorm: float, params: MorreyParams) -> float:
    """Smallest diagonal entry is at least M^(-p/n) when n q <= p and ||C_D|| <= M."""
    if regime_index(params) != 1:
        raise MorreyError("min_entry_lower_bound needs the slab regime n q <= p")
    if not opnorm > 0:
        raise MorreyError("operator norm must be positive")
    return opnorm ** (-params.p / params.n)


# ---------------------------------------------------------------------------
# preimage volumes


def _box_corners(box: AxisBox) -> np.ndarray:
    lo, hi = np.array(box.lower), np.array(box.upper)
    return np.array([np.where(c, hi, lo) for c in itertools.product((0, 1), repeat=box.n)])


def _boundary_samples(box: AxisBox, per_axis: int = 65) -> np.ndarray:
    """Points on every face of a box."""
    n = box.n
    lo, hi = np.array(box.lower), np.array(box.upper)
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    pts = []
    for i in range(n):
        for end in (lo[i], hi[i]):
            grids = [axes[j] if j != i else np.array([end]) for j in range(n)]
            pts.append(np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, n))
    return np.concatenate(pts)


def preimage_bounding_box(fmap, box: AxisBox, margin: float = 0.02) -> AxisBox:
    """Bounding box of phi^{-1}(box), slightly enlarged for non-affine maps.

    For affine maps the corners suffice; otherwise the inverse evaluator is
    sampled on the boundary (a homeomorphism maps boundary to boundary).
    """
    if isinstance(fmap, AffineMap):
        pts = fmap.inverse(_box_corners(box))
        margin = 0.0
    elif isinstance(fmap, SmoothMap) and fmap.has_inverse:
        pts = fmap.inverse(_boundary_samples(box))
    else:
        raise MorreyError(f"no inverse for map {getattr(fmap, 'name', fmap)!r}; pass a counting domain")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * (hi - lo)
    lo, hi = lo - pad, hi + pad
    return AxisBox(tuple(lo), tuple(np.maximum(hi - lo, 1e-300)))


def _count_preimage(fmap, target, grid: GridSpec) -> float:
    pts = grid.centers()
    img = fmap(pts.reshape(-1, grid.n)).reshape(pts.shape)
    if isinstance(target, AxisBox):
        inside = target.contains(img)
    else:
        idx = np.floor((img - np.asarray(target.grid.origin)) / target.grid.h).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.asarray(target.grid.shape)), axis=-1)
        inside = np.zeros(ok.shape, dtype=bool)
        sel = idx[ok]
        inside[ok] = target.mask[tuple(sel.T)]
    return int(inside.sum()) * grid.cell_volume


def counted_preimage_measure(fmap, target, domain: AxisBox, start_cells: int = 2**16,
                             max_cells: int = 2**23, rtol: float = 0.01):
    """Forward-count |phi^{-1}(E)|: cells of a grid on ``domain`` whose image center lies in E.

    The grid is refined 2x per axis until three successive estimates agree
    within ``rtol`` (a single agreeing pair can be a grid-alignment
    coincidence).  Returns ``(measure, converged)``.
    """
    n = domain.n
    h = (domain.volume / start_cells) ** (1.0 / n)
    h = min(h, min(domain.sides) / 4)
    grid = GridSpec.covering(domain, h)
    history = [_count_preimage(fmap, target, grid)]
    while True:
        grid = grid.refined(2)
        if grid.size > max_cells:
            return history[-1], False
        history.append(_count_preimage(fmap, target, grid))
        last = history[-3:]
        if len(last) == 3 and min(last) > 0 and max(last) - min(last) <= rtol * max(last):
            return history[-1], True


def preimage_measure(fmap, target, domain: AxisBox | None = None) -> tuple[float, str]:
    """|phi^{-1}(E)| and the method used ("hull", "interval" or "counted")."""
    if isinstance(fmap, AffineMap):
        if isinstance(target, AxisBox):
            pts = fmap.inverse(_box_corners(target))
            if fmap.n == 1:
                return float(np.ptp(pts)), "hull"
            return float(ConvexHull(pts).volume), "hull"
        if isinstance(target, GridSet):
            cell = AxisBox(target.grid.origin, (target.grid.h,) * target.grid.n)
            one, _ = preimage_measure(fmap, cell)
            return int(target.mask.sum()) * one, "hull"
    if (isinstance(fmap, SmoothMap) and fmap.n == 1 and fmap.monotone and fmap.has_inverse
            and isinstance(target, AxisBox)):
        ends = fmap.inverse(np.array([[target.lower[0]], [target.upper[0]]]))
        return float(abs(ends[1, 0] - ends[0, 0])), "interval"
    if domain is None:
        box = target if isinstance(target, AxisBox) else target.grid.extent
        domain = preimage_bounding_box(fmap, box)
    value, converged = counted_preimage_measure(fmap, target, domain)
    return value, "counted" if converged else "counted-unconverged"


def _set_measure(target) -> float:
    if isinstance(target, AxisBox):
        return target.volume
    return target.measure


def set_ratio_estimator(fmap, sets: Sequence, domain: AxisBox | None = None) -> OperatorBound:
    """sup over the family of |phi^{-1}(E)| / |E|; its p-th root lower-bounds ||C_phi||_{L^p}."""
    if not sets:
        raise MorreyError("empty set family")
    best, best_i, methods = -1.0, None, set()
    for i, target in enumerate(sets):
        meas = _set_measure(target)
        if not (meas > 0 and math.isfinite(meas)):
            raise MorreyError(f"set {i} has measure {meas}; need 0 < |E| < inf")
        pre, method = preimage_measure(fmap, target, domain)
        methods.add(method)
        ratio = pre / meas
        if ratio > best:
            best, best_i = ratio, i
    return OperatorBound(best, LOWER, "set ratio via " + "+".join(sorted(methods)),
                         {"set_index": best_i})


# ---------------------------------------------------------------------------
# pullbacks and the empirical Morrey operator norm


def _inner_cell_mask(fmap: AffineMap, box: AxisBox, grid: GridSpec) -> np.ndarray:
    """Cells whose every vertex maps into the closed box; such cells lie in phi^{-1}(box)."""
    corners = grid.corners()
    img = fmap(corners.reshape(-1, grid.n)).reshape(corners.shape)
    lo, hi = np.array(box.lower), np.array(box.upper)
    inside = np.all((img >= lo) & (img <= hi), axis=-1)
    mask = np.ones(grid.shape, dtype=bool)
    for offs in itertools.product((0, 1), repeat=grid.n):
        sl = tuple(slice(o, o + s) for o, s in zip(offs, grid.shape))
        mask &= inside[sl]
    return mask


def pullback_grid(f, fmap, target: GridSpec, inner: bool = False) -> GridFunction:
    """Sample f o phi on the target grid.

    A box ``f`` is pulled back geometrically: a cell gets 1 when phi of its
    center lies in the box (or, with ``inner`` and an affine map, when the
    whole cell maps inside).  A grid function is interpolated multilinearly
    between cell centers and is zero outside its grid.
    """
    if isinstance(f, AxisBox):
        if inner:
            if not isinstance(fmap, AffineMap):
                raise MorreyError("inner rasterization needs an affine map")
            return GridFunction(target, _inner_cell_mask(fmap, f, target).astype(float))
        pts = target.centers()
        img = fmap(pts.reshape(-1, target.n)).reshape(pts.shape)
        return GridFunction(target, f.contains(img).astype(float))
    src = f.grid
    pts = target.centers()
    img = fmap(pts.reshape(-1, target.n))
    u = (img - np.asarray(src.origin)) / src.h - 0.5
    shape = np.asarray(src.shape)
    inside = np.all((u >= -0.5) & (u < shape - 0.5), axis=-1)
    coords = np.clip(u, 0, shape - 1).T
    vals = map_coordinates(f.values, coords, order=1, mode="nearest")
    vals = np.where(inside, vals, 0.0)
    return GridFunction(target, vals.reshape(target.shape))


def _raster_grid(region: AxisBox, resolution: int, max_cells: int) -> GridSpec:
    h = min(region.sides) / resolution
    cells = math.prod(math.ceil(s / h) for s in region.sides)
    if cells > max_cells:
        h *= (cells / max_cells) ** (1.0 / region.n)
    return GridSpec.covering(region, h)


def _pullback_norm(fmap, box: AxisBox, params: MorreyParams, policy, resolution, max_cells, threads):
    """(||C_phi chi_box||, method) using exact geometry where the preimage is a box."""
    if isinstance(fmap, AffineMap) and fmap.is_diagonal:
        return box_indicator_norm(fmap.preimage_box(box), params).value, "exact"
    if isinstance(fmap, SmoothMap) and fmap.n == 1 and fmap.monotone and fmap.has_inverse:
        length, _ = preimage_measure(fmap, box)
        return box_indicator_norm((length,), params).value, "exact"
    region = preimage_bounding_box(fmap, box)
    grid = _raster_grid(region, resolution, max_cells)
    inner = isinstance(fmap, AffineMap)
    g = pullback_grid(box, fmap, grid, inner=inner)
    return grid_set_norm(GridSet(grid, g.values > 0), params, policy, threads).value, (
        "grid-inner" if inner else "grid-center")


def opnorm_lower_search(fmap, params: MorreyParams, family: Sequence, policy: CubeSearchPolicy | None = None,
                        resolution: int = 64, max_cells: int = 2**18, threads: int | None = None) -> OperatorBound:
    """max over the family of ||C_phi f|| / ||f||.

    Boxes use exact closed-form norms for ||f|| and, when the preimage is a
    box, for ||C_phi f|| too; otherwise the pullback is rasterized and its
    norm estimated on the grid.  Grid functions use grid norms on both sides
    and need an affine map (for the target-grid placement) or a target with
    the same grid.
    """
    if not family:
        raise MorreyError("empty test family")
    best, best_i, methods = -1.0, None, set()
    ratios = []
    for i, f in enumerate(family):
        if isinstance(f, AxisBox):
            denom = box_indicator_norm(f, params).value
            num, method = _pullback_norm(fmap, f, params, policy, resolution, max_cells, threads)
        else:
            denom = morrey_norm_grid(f, params, policy, threads).value
            region = preimage_bounding_box(fmap, f.grid.extent)
            grid = _raster_grid(region, resolution, max_cells)
            num = morrey_norm_grid(pullback_grid(f, fmap, grid), params, policy, threads).value
            method = "grid-interp"
        if denom <= 0:
            log.warning("skipping test function %d with zero norm", i)
            ratios.append(None)
            continue
        methods.add(method)
        ratio = num / denom
        ratios.append(ratio)
        if ratio > best:
            best, best_i = ratio, i
    if best_i is None:
        raise MorreyError("every test function had zero norm")
    return OperatorBound(best, LOWER, "max ratio over test family via " + "+".join(sorted(methods)),
                         {"index": best_i, "ratios": ratios})


# ---------------------------------------------------------------------------
# witness families for the worked examples


def shear_witness_box(t: float, delta: float = 0.25) -> AxisBox:
    """Box whose preimage under (x1^3 + x1, x2 / (3 x1^2 + 1)) starts at x1 = t.

    It is [phi1(t), phi1(t + delta)) x [0, delta / (3 t^2 + 1)): long in the
    compressed direction and thin in the stretched one, so the preimage is
    roughly a delta x delta square while the box's own short side is about
    delta / (3 t^2 + 1).
    """
    lam = 3 * t * t + 1
    a, b = t ** 3 + t, (t + delta) ** 3 + (t + delta)
    return AxisBox((a, 0.0), (b - a, delta / lam))


def exp_interval_family(translations: Sequence[float], widths: Sequence[float]) -> list[AxisBox]:
    """Intervals [phi(x), phi(x) + w) for phi(x) = e^x - 1, plus mirrored ones on x < 0."""
    out = []
    for x in translations:
        start = math.expm1(x) if x >= 0 else x
        for w in widths:
            out.append(AxisBox((start,), (w,)))
            out.append(AxisBox((-x - w,), (w,)))
    return out
