"""Singular values of Jacobians and bi-Lipschitz certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from morreylab.core import AxisBox, MorreyError

CERTIFIED = "certified"
FAILED = "failed"
INCONCLUSIVE = "inconclusive"

DEFAULT_POINTS_PER_AXIS = 33
# Largest relative Jacobian change between sampling neighbours that still
# lets a sampled certificate stand for the whole domain.
DEFAULT_VARIATION_TOL = 0.10


def svd_ascending(matrix):
    """Factor M = U diag(alpha) V with alpha ascending and U, V orthogonal.

    Returns ``(alpha, U, V)``.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise MorreyError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MorreyError("matrix has non-finite entries")
    u, s, vt = np.linalg.svd(m)
    return s[::-1].copy(), u[:, ::-1].copy(), vt[::-1, :].copy()


@dataclass(frozen=True)
class SingularProfile:
    """Jacobian singular values sampled over a domain.

    ``alphas[k]`` is ascending; ``shape`` is the sampling lattice when the
    points came from a uniform grid (used for neighbour comparisons).
    """

    points: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    dets: np.ndarray = field(repr=False)
    jacobians: np.ndarray = field(repr=False)
    shape: tuple[int, ...] | None = None
    spacing: float | None = None
    singular_points: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.points.shape[-1]

    def summary(self) -> dict:
        return {
            "samples": int(self.points.shape[0]),
            "alpha_min": float(self.alphas[:, 0].min()),
            "alpha_max": float(self.alphas[:, -1].max()),
            "det_min": float(self.dets.min()),
            "det_max": float(self.dets.max()),
            "spacing": self.spacing,
            "singular_points": len(self.singular_points),
        }


def jacobian_profile(fmap, domain: AxisBox | None = None, points_per_axis: int = DEFAULT_POINTS_PER_AXIS,
                     points=None) -> SingularProfile:
    """Sample D phi on a uniform lattice over ``domain`` (or at given points)."""
    shape = spacing = None
    if points is None:
        domain = domain or getattr(fmap, "domain", None)
        if domain is None or not domain.is_finite:
            raise MorreyError("jacobian_profile needs a finite domain or explicit points")
        axes = [np.linspace(a, a + s, points_per_axis) for a, s in zip(domain.lower, domain.sides)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.n)
        shape = (points_per_axis,) * domain.n
        spacing = max(domain.sides) / (points_per_axis - 1) if points_per_axis > 1 else math.inf
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
    jac = np.asarray(fmap.jacobian(pts), dtype=float)
    if not np.all(np.isfinite(jac)):
        raise MorreyError("Jacobian is not finite at some sample")
    s = np.linalg.svd(jac, compute_uv=False)[..., ::-1]
    dets = np.linalg.det(jac)
    singular = tuple(int(i) for i in np.flatnonzero(s[:, 0] <= 0))
    return SingularProfile(pts, s, dets, jac, shape, spacing, singular)


def _max_neighbour_variation(profile: SingularProfile) -> float:
    if profile.shape is None:
        return 0.0
    jac = profile.jacobians.reshape(profile.shape + profile.jacobians.shape[-2:])
    norms = np.linalg.norm(jac, axis=(-2, -1))
    worst = 0.0
    for axis in range(len(profile.shape)):
        if profile.shape[axis] < 2:
            continue
        a = np.take(jac, range(1, profile.shape[axis]), axis=axis)
        b = np.take(jac, range(profile.shape[axis] - 1), axis=axis)
        scale = np.maximum(np.take(norms, range(1, profile.shape[axis]), axis=axis),
                           np.take(norms, range(profile.shape[axis] - 1), axis=axis))
        diff = np.linalg.norm(a - b, axis=(-2, -1)) / scale
        worst = max(worst, float(diff.max()))
    return worst


@dataclass(frozen=True)
class BiLipCertificate:
    L_upper: float
    c_lower: float
    inverse_lipschitz_bound: float
    threshold: float
    verdict: str
    spacing: float | None
    variation: float
    reason: str = ""

    def to_json(self) -> dict:
        def f(v):
            return "inf" if isinstance(v, float) and math.isinf(v) else v

        return {
            "L_upper": self.L_upper,
            "c_lower": self.c_lower,
            "inverse_lipschitz_bound": f(self.inverse_lipschitz_bound),
            "threshold": self.threshold,
            "verdict": self.verdict,
            "spacing": self.spacing,
            "variation": self.variation,
            "reason": self.reason,
        }


def bilip_certify(profile: SingularProfile, threshold: float, max_spacing: float | None = None,
                  variation_tol: float = DEFAULT_VARIATION_TOL) -> BiLipCertificate:
    """Certify that phi^{-1} is Lipschitz from sampled singular values.

    If every sampled alpha_1 >= C then ||D phi^{-1}||_F <= sqrt(n)/C, which
    bounds the Lipschitz constant of the inverse.  A sample below C fails
    outright; a sampling that is too coarse, or a Jacobian that moves more
    than ``variation_tol`` between neighbours, only gives ``inconclusive``.
    """
    if profile.points.shape[0] == 0:
        raise MorreyError("empty singular-value profile")
    if not threshold > 0:
        raise MorreyError("certification threshold must be positive")
    n = profile.n
    c_lower = float(profile.alphas[:, 0].min())
    l_upper = float(profile.alphas[:, -1].max())
    variation = _max_neighbour_variation(profile)
    if c_lower < threshold:
        return BiLipCertificate(l_upper, c_lower, math.inf, threshold, FAILED, profile.spacing,
                                variation, f"sampled alpha_1 = {c_lower:.6g} < C")
    if max_spacing is not None and (profile.spacing is None or profile.spacing > max_spacing):
        return BiLipCertificate(l_upper, c_lower, math.inf, threshold, INCONCLUSIVE,
                                profile.spacing, variation, "sampling coarser than max_spacing")
    if variation > variation_tol:
        return BiLipCertificate(l_upper, c_lower, math.inf, threshold, INCONCLUSIVE,
                                profile.spacing, variation,
                                f"Jacobian varies by {variation:.3g} between neighbours")
    return BiLipCertificate(l_upper, c_lower, math.sqrt(n) / threshold, threshold, CERTIFIED,
                            profile.spacing, variation)
