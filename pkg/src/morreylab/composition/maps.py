"""Maps that induce composition operators C_phi f = f o phi.

Every evaluator is vectorized over leading axes: points have shape
(..., n) and images have the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from morreylab.core import AxisBox, MorreyError

# Central-difference step is FD_STEP * (1 + |x_j|) along coordinate j.
FD_STEP = 1e-5


@dataclass(frozen=True)
class AffineMap:
    """phi(x) = A x + b with A invertible."""

    matrix: np.ndarray = field(repr=False)
    offset: np.ndarray = field(repr=False, default=None)
    name: str = "affine"

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise MorreyError(f"affine matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise MorreyError("affine matrix has non-finite entries")
        det = float(np.linalg.det(a))
        if det == 0 or not math.isfinite(det):
            raise MorreyError("affine matrix is singular")
        b = np.zeros(a.shape[0]) if self.offset is None else np.array(self.offset, dtype=float)
        if b.shape != (a.shape[0],):
            raise MorreyError("offset length does not match the matrix")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "offset", b)
        object.__setattr__(self, "_inv", np.linalg.inv(a))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.matrix == np.diag(np.diag(self.matrix))))

    @property
    def lipschitz(self) -> float:
        """Largest singular value of A."""
        return float(np.linalg.svd(self.matrix, compute_uv=False)[0])

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.matrix.T + self.offset

    def inverse(self, y):
        return (np.asarray(y, dtype=float) - self.offset) @ self._inv.T

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape)

    def preimage_box(self, box: AxisBox) -> AxisBox:
        """Exact preimage of a box under a diagonal map."""
        if not self.is_diagonal:
            raise MorreyError("preimage of a box is a box only for diagonal maps")
        d = np.diag(self.matrix)
        ends = np.stack([self.inverse(np.array(box.lower)), self.inverse(np.array(box.upper))])
        return AxisBox(tuple(ends.min(axis=0)), tuple(np.asarray(box.sides) / np.abs(d)))


@dataclass(frozen=True)
class SmoothMap:
    """A differentiable map given by evaluator, optional Jacobian and inverse.

    Without an analytic ``jacobian_fn`` the Jacobian falls back to central
    differences.  ``monotone`` marks a 1-D map that is increasing, so
    preimages of intervals are intervals between the inverse endpoints.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    n: int
    jacobian_fn: Callable[[np.ndarray], np.ndarray] | None = None
    inverse_fn: Callable[[np.ndarray], np.ndarray] | None = None
    domain: AxisBox | None = None
    name: str = "smooth"
    monotone: bool = False

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    @property
    def has_inverse(self) -> bool:
        return self.inverse_fn is not None

    def inverse(self, y):
        if self.inverse_fn is None:
            raise MorreyError(f"map {self.name!r} has no inverse evaluator")
        return self.inverse_fn(np.asarray(y, dtype=float))

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        if self.jacobian_fn is not None:
            return self.jacobian_fn(x)
        return finite_difference_jacobian(self.evaluator, x)


def finite_difference_jacobian(fn, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian, shape (..., n, n) with [i, j] = d fn_i / d x_j."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    for j in range(n):
        step = FD_STEP * (1.0 + np.abs(x[..., j]))
        e = np.zeros(n)
        e[j] = 1.0
        dx = step[..., None] * e
        cols.append((fn(x + dx) - fn(x - dx)) / (2.0 * step[..., None]))
    return np.stack(cols, axis=-1)


def identity_map(n: int) -> AffineMap:
    return AffineMap(np.eye(n), name="identity")


def diag_map(entries: Sequence[float], offset: Sequence[float] | None = None) -> AffineMap:
    return AffineMap(np.diag(np.asarray(entries, dtype=float)), offset, name="diag")


def _exp1d(x):
    with np.errstate(over="ignore"):
        return np.where(x >= 0, np.expm1(np.maximum(x, 0.0)), x)


def _exp1d_jac(x):
    with np.errstate(over="ignore"):
        d = np.where(x >= 0, np.exp(np.maximum(x, 0.0)), 1.0)
    return d[..., None]


def _exp1d_inv(y):
    return np.where(y >= 0, np.log1p(np.maximum(y, 0.0)), y)


def exp1d_map() -> SmoothMap:
    """phi(x) = e^x - 1 for x >= 0 and x for x < 0."""
    return SmoothMap(_exp1d, 1, _exp1d_jac, _exp1d_inv, name="exp1d", monotone=True)


def _cubic_root(y):
    """Real root t of t^3 + t = y."""
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    u = np.cbrt(a / 2 + np.sqrt(a * a / 4 + 1.0 / 27.0))
    t = u - 1.0 / (3.0 * u)
    for _ in range(3):
        t = t - (t ** 3 + t - a) / (3 * t * t + 1)
    return np.copysign(t, y)


def _shear_cubic(x):
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([x1 ** 3 + x1, x2 / (3 * x1 ** 2 + 1)], axis=-1)


def _shear_cubic_jac(x):
    x1, x2 = x[..., 0], x[..., 1]
    lam = 3 * x1 ** 2 + 1
    row0 = np.stack([lam, np.zeros_like(x1)], axis=-1)
    row1 = np.stack([-6 * x1 * x2 / lam ** 2, 1 / lam], axis=-1)
    return np.stack([row0, row1], axis=-2)


def _shear_cubic_inv(y):
    x1 = _cubic_root(y[..., 0])
    return np.stack([x1, y[..., 1] * (3 * x1 ** 2 + 1)], axis=-1)


def shear_cubic_map() -> SmoothMap:
    """phi(x1, x2) = (x1^3 + x1, x2 / (3 x1^2 + 1)); a determinant-one diffeomorphism."""
    return SmoothMap(_shear_cubic, 2, _shear_cubic_jac, _shear_cubic_inv, name="shear-cubic")


BUILTIN_MAPS = ("identity", "affine", "diag", "exp1d", "shear-cubic")


def builtin_map(name: str, *, n: int | None = None, matrix=None, offset=None, entries=None):
    """Construct one of the named maps exposed on the command line."""
    if name == "identity":
        return identity_map(n or 2)
    if name == "affine":
        if matrix is None:
            raise MorreyError("affine map needs a matrix")
        m = np.asarray(matrix, dtype=float)
        if m.ndim == 1:
            k = math.isqrt(m.size)
            if k * k != m.size:
                raise MorreyError(f"{m.size} matrix entries do not form a square matrix")
            m = m.reshape(k, k)
        return AffineMap(m, offset)
    if name == "diag":
        if entries is None:
            raise MorreyError("diag map needs entries")
        return diag_map(entries, offset)
    if name == "exp1d":
        return exp1d_map()
    if name == "shear-cubic":
        return shear_cubic_map()
    raise MorreyError(f"unknown map {name!r}; choose from {', '.join(BUILTIN_MAPS)}")
