"""Exhaustive check of the weak-type composition identity on finite measure spaces.

On a space of N weighted cells every measurable set is a subset of cells,
so both sides of

    ||C_sigma||_{WB -> WB} = sup_E ||chi_{sigma^-1 E}||_B / ||chi_E||_B

can be computed exactly for small N: the right side by enumerating all
2^N - 1 nonempty subsets, the left side as a maximum over a test family
that contains every indicator.

Norm evaluators are batched: they take an array of shape (..., N) and
return shape (...).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from morreylab._parallel import ordered_map
from morreylab.core import MorreyError

MAX_EXHAUSTIVE_CELLS = 20
_CHUNK = 1 << 13
GATE_RTOL = 1e-12


@dataclass(frozen=True)
class FiniteSpace:
    """N cells with positive measures, optionally laid out as a 1-D or 2-D lattice."""

    weights: np.ndarray = field(repr=False)
    layout: tuple[int, ...] | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise MorreyError("cell weights must be finite and positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.layout is not None:
            layout = tuple(int(s) for s in self.layout)
            if math.prod(layout) != w.size or len(layout) not in (1, 2):
                raise MorreyError(f"layout {layout} does not hold {w.size} cells")
            object.__setattr__(self, "layout", layout)

    @classmethod
    def uniform(cls, n_cells: int, layout=None) -> "FiniteSpace":
        return cls(np.ones(n_cells), layout)

    @property
    def N(self) -> int:
        return self.weights.size

    def to_json(self) -> dict:
        out = {"weights": self.weights.tolist()}
        if self.layout is not None:
            out["layout"] = list(self.layout)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteSpace":
        if "weights" in obj:
            return cls(np.asarray(obj["weights"], dtype=float), obj.get("layout"))
        return cls.uniform(int(obj["N"]), obj.get("layout"))


@dataclass(frozen=True)
class LatticeNorm:
    """A named lattice (quasi-)norm on functions over a FiniteSpace.

    ``normed`` is False for quasi-norms (Morrey with q < 1, l^p with p < 1).
    """

    name: str
    evaluator: Callable[[FiniteSpace, np.ndarray], np.ndarray]
    normed: bool = True
    lattice: bool = True
    params: dict = field(default_factory=dict)

    def __call__(self, space: FiniteSpace, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-1] != space.N:
            raise MorreyError(f"function has {f.shape[-1]} entries, space has {space.N} cells")
        return self.evaluator(space, np.abs(f))

    def to_json(self) -> dict:
        return {"kind": self.name, **self.params}


def lp_norm(p: float) -> LatticeNorm:
    p = float(p)
    if not p > 0:
        raise MorreyError("p must be positive")

    def ev(space, a):
        return np.sum(a ** p * space.weights, axis=-1) ** (1.0 / p)

    return LatticeNorm("lp", ev, normed=p >= 1, params={"p": p})


def _padded_prefix(x: np.ndarray, ndim: int) -> np.ndarray:
    pad = [(0, 0)] * (x.ndim - ndim) + [(1, 0)] * ndim
    out = np.pad(x, pad)
    for ax in range(1, ndim + 1):
        out = np.cumsum(out, axis=-ax)
    return out


def _groups_1d(N: int):
    """Index pairs (lo, hi) of all discrete intervals [lo, hi)."""
    lo, hi = zip(*[(i, j) for i in range(N) for j in range(i + 1, N + 1)])
    return np.array(lo), np.array(hi)


def _groups_2d(rows: int, cols: int):
    """Corner indices of all discrete squares in a rows x cols lattice."""
    out = []
    for s in range(1, min(rows, cols) + 1):
        for i in range(rows - s + 1):
            for j in range(cols - s + 1):
                out.append((i, j, i + s, j + s))
    return tuple(np.array(c) for c in zip(*out))


def _morrey_norm(p: float, q: float, dim: int) -> LatticeNorm:
    p, q = float(p), float(q)
    if not 0 < q <= p:
        raise MorreyError(f"need 0 < q <= p, got p={p}, q={q}")
    vol_exp = 1.0 / p - 1.0 / q

    def ev(space, a):
        layout = space.layout if dim == 2 else (space.N,)
        if dim == 2 and (layout is None or len(layout) != 2):
            raise MorreyError("morrey2d needs a 2-D layout on the finite space")
        mass_src = (a ** q * space.weights).reshape(a.shape[:-1] + layout)
        w = space.weights.reshape(layout)
        if dim == 1:
            lo, hi = _groups_1d(space.N)
            S, W = _padded_prefix(mass_src, 1), _padded_prefix(w, 1)
            mass = S[..., hi] - S[..., lo]
            meas = W[hi] - W[lo]
        else:
            i0, j0, i1, j1 = _groups_2d(*layout)
            S, W = _padded_prefix(mass_src, 2), _padded_prefix(w, 2)
            mass = S[..., i1, j1] - S[..., i0, j1] - S[..., i1, j0] + S[..., i0, j0]
            meas = W[i1, j1] - W[i0, j1] - W[i1, j0] + W[i0, j0]
        mass = np.maximum(mass, 0.0)
        return np.max(meas ** vol_exp * mass ** (1.0 / q), axis=-1)

    return LatticeNorm(f"morrey{dim}d", ev, normed=q >= 1, params={"p": p, "q": q})


def morrey1d_norm(p: float, q: float) -> LatticeNorm:
    """sup over discrete intervals I of |I|^(1/p - 1/q) (sum_I |f_i|^q mu_i)^(1/q)."""
    return _morrey_norm(p, q, 1)


def morrey2d_norm(p: float, q: float) -> LatticeNorm:
    """Same as morrey1d_norm over discrete squares of a 2-D layout."""
    return _morrey_norm(p, q, 2)


def norm_from_json(obj: dict) -> LatticeNorm:
    kind = obj.get("kind")
    if kind == "lp":
        return lp_norm(obj["p"])
    if kind == "morrey1d":
        return morrey1d_norm(obj["p"], obj["q"])
    if kind == "morrey2d":
        return morrey2d_norm(obj["p"], obj["q"])
    raise MorreyError(f"unknown norm kind {kind!r}")


@dataclass(frozen=True)
class CellMap:
    """sigma: {0..N-1} -> {0..N-1}; total by construction."""

    table: tuple[int, ...]

    def __post_init__(self):
        table = tuple(int(v) for v in self.table)
        N = len(table)
        if N == 0 or any(not 0 <= v < N for v in table):
            raise MorreyError("cell map must send every cell into {0..N-1}")
        object.__setattr__(self, "table", table)

    @property
    def N(self) -> int:
        return len(self.table)

    def compose(self, f: np.ndarray) -> np.ndarray:
        """f o sigma, batched over leading axes."""
        return np.asarray(f)[..., list(self.table)]

    def to_json(self) -> dict:
        return {"table": list(self.table)}

    @classmethod
    def from_json(cls, obj: dict) -> "CellMap":
        return cls(obj["table"])

    @classmethod
    def identity(cls, N: int) -> "CellMap":
        return cls(range(N))

    @classmethod
    def constant(cls, N: int, cell: int = 0) -> "CellMap":
        return cls([cell] * N)

    @classmethod
    def shift(cls, N: int) -> "CellMap":
        """i -> min(i + 1, N - 1)."""
        return cls([min(i + 1, N - 1) for i in range(N)])


def weak_norm_batch(F, space: FiniteSpace, norm: LatticeNorm) -> np.ndarray:
    """Exact weak norms sup_lambda lambda ||chi_{|f| > lambda}|| for each row.

    On each interval between consecutive magnitudes the level set is fixed,
    so the supremum is the left limit at a magnitude v: v ||chi_{|f| >= v}||.
    """
    A = np.abs(np.asarray(F, dtype=float))
    levels = np.sort(A, axis=-1)
    best = np.zeros(A.shape[:-1])
    for j in range(A.shape[-1]):
        v = levels[..., j]
        mask = (A >= v[..., None]).astype(float)
        best = np.maximum(best, v * norm(space, mask))
    return best


def weak_norm_finite(f, space: FiniteSpace, norm: LatticeNorm) -> float:
    return float(weak_norm_batch(np.asarray(f, dtype=float), space, norm))


def _subset_masks(N: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(N)) & 1).astype(float)


@dataclass(frozen=True)
class IndicatorRatio:
    K: float
    witness: tuple[int, ...]
    exact: bool
    subsets: int


def indicator_ratio_sup(sigma: CellMap, space: FiniteSpace, norm: LatticeNorm,
                        sampled: bool = False, samples: int = 100_000, seed: int = 0,
                        threads: int | None = None) -> IndicatorRatio:
    """max over nonempty E of ||chi_{sigma^-1 E}|| / ||chi_E||.

    Exhaustive for N <= 20.  Larger N needs ``sampled=True`` and the result
    is then only a lower bound (``exact=False``).
    """
    N = space.N
    if sigma.N != N:
        raise MorreyError("cell map and space have different cell counts")
    if N > MAX_EXHAUSTIVE_CELLS and not sampled:
        raise MorreyError(f"N={N} exceeds the exhaustive cap {MAX_EXHAUSTIVE_CELLS}; use sampled mode")

    def score(masks):
        denom = norm(space, masks)
        ratio = norm(space, sigma.compose(masks)) / denom
        ratio = np.where(denom > 0, ratio, -np.inf)
        i = int(np.argmax(ratio))
        return float(ratio[i]), masks[i]

    if sampled:
        rng = np.random.default_rng(seed)
        masks = (rng.random((samples, N)) < 0.5).astype(float)
        masks = masks[masks.sum(axis=1) > 0]
        K, w = score(masks)
        exact, count = False, masks.shape[0]
    else:
        total = 1 << N
        bounds = [(s, min(s + _CHUNK, total)) for s in range(1, total, _CHUNK)]
        results = ordered_map(lambda b: score(_subset_masks(N, *b)), bounds, threads)
        K, w = -np.inf, None
        for r, m in results:
            if r > K:
                K, w = r, m
        exact, count = True, total - 1
    return IndicatorRatio(K, tuple(int(i) for i in np.flatnonzero(w)), exact, count)


def default_family(N: int, seed: int = 0, n_random: int = 1000) -> np.ndarray:
    """All indicators (N <= 20), all {0,1,2}-valued vectors (N <= 8), random nonnegative vectors."""
    parts = []
    if N <= MAX_EXHAUSTIVE_CELLS:
        parts.append(_subset_masks(N, 1, 1 << N))
    if N <= 8:
        parts.append(np.array(list(itertools.product((0.0, 1.0, 2.0), repeat=N)))[1:])
    rng = np.random.default_rng(seed)
    rand = rng.random((n_random, N))
    rand[rng.random((n_random, N)) < 0.3] = 0.0
    parts.append(rand)
    return np.concatenate(parts)


@dataclass(frozen=True)
class EmpiricalBound:
    value: float
    witness: tuple[float, ...]
    family_size: int
    skipped: int


def weak_opnorm_empirical(sigma: CellMap, space: FiniteSpace, norm: LatticeNorm,
                          family: np.ndarray | None = None, seed: int = 0,
                          threads: int | None = None) -> EmpiricalBound:
    """max over the family of ||f o sigma||_WB / ||f||_WB (a lower bound for the operator norm)."""
    F = default_family(space.N, seed) if family is None else np.atleast_2d(np.asarray(family, dtype=float))
    if F.shape[0] == 0:
        raise MorreyError("empty test family")
    chunks = [F[i:i + _CHUNK] for i in range(0, F.shape[0], _CHUNK)]

    def score(chunk):
        denom = weak_norm_batch(chunk, space, norm)
        num = weak_norm_batch(sigma.compose(chunk), space, norm)
        ok = denom > 0
        ratio = np.where(ok, num / np.where(ok, denom, 1.0), -np.inf)
        i = int(np.argmax(ratio))
        return float(ratio[i]), chunk[i], int((~ok).sum())

    best, wit, skipped = -np.inf, None, 0
    for r, f, s in ordered_map(score, chunks, threads):
        skipped += s
        if r > best:
            best, wit = r, f
    if wit is None or not np.isfinite(best):
        raise MorreyError("every test function had zero weak norm")
    return EmpiricalBound(best, tuple(float(v) for v in wit), F.shape[0], skipped)


def check_norm_instance(space: FiniteSpace, norm: LatticeNorm, seed: int = 0, trials: int = 200,
                        rtol: float = 1e-12) -> list[str]:
    """Return the invariants the norm violates on random probes (empty when fine)."""
    rng = np.random.default_rng(seed)
    N = space.N
    f = rng.normal(size=(trials, N))
    g = np.abs(f) + rng.random((trials, N))
    c = rng.uniform(0.1, 10.0, size=trials)
    nf = norm(space, f)
    problems = []
    if not np.all(np.isfinite(nf)) or np.any(nf < 0):
        problems.append("nonnegative finite values")
    if not np.allclose(norm(space, np.abs(f)), nf, rtol=rtol, atol=0):
        problems.append("absolute-value invariance")
    if not np.allclose(norm(space, c[:, None] * f), c * nf, rtol=1e-10, atol=0):
        problems.append("positive homogeneity")
    if norm.lattice and np.any(nf > norm(space, g) * (1 + rtol)):
        problems.append("lattice monotonicity")
    return problems


PASS = "PASS"
FAIL = "FAIL"


@dataclass(frozen=True)
class GateReport:
    K: float
    empirical: float
    verdict: str
    asserted: bool
    witness_set: tuple[int, ...]
    witness_function: tuple[float, ...]
    norm: str
    N: int

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "empirical": self.empirical,
            "verdict": self.verdict,
            "asserted": self.asserted,
            "witness_set": list(self.witness_set),
            "witness_function": list(self.witness_function),
            "norm": self.norm,
            "N": self.N,
        }


def verify_gate(sigma: CellMap, space: FiniteSpace, norm: LatticeNorm, allow_quasi: bool = False,
                family: np.ndarray | None = None, seed: int = 0, threads: int | None = None) -> GateReport:
    """Check ||C_sigma||_{WB} = sup_E ratio on both sides, to relative 1e-12.

    Quasi-norms fall outside the normed setting where equality is expected; with ``allow_quasi``
    they are evaluated and reported with ``asserted=False``.
    """
    problems = check_norm_instance(space, norm, seed)
    if problems:
        raise MorreyError(f"norm {norm.name} fails preflight: {', '.join(problems)}")
    if not norm.normed and not allow_quasi:
        raise MorreyError(f"{norm.name} is only a quasi-norm here; pass allow_quasi=True")
    ratio = indicator_ratio_sup(sigma, space, norm, threads=threads)
    emp = weak_opnorm_empirical(sigma, space, norm, family, seed, threads)
    K = ratio.K
    ok = K * (1 - GATE_RTOL) <= emp.value <= K * (1 + GATE_RTOL)
    return GateReport(K, emp.value, PASS if ok else FAIL, norm.normed, ratio.witness, emp.witness,
                      norm.name, space.N)
