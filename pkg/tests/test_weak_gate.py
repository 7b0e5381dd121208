import itertools

import numpy as np
import pytest

from morreylab.core import MorreyError
from morreylab.weak_gate import (
    MAX_EXHAUSTIVE_CELLS,
    CellMap,
    FiniteSpace,
    LatticeNorm,
    check_norm_instance,
    default_family,
    indicator_ratio_sup,
    lp_norm,
    morrey1d_norm,
    morrey2d_norm,
    norm_from_json,
    verify_gate,
    weak_norm_batch,
    weak_norm_finite,
    weak_opnorm_empirical,
)


def loop_morrey1d(space, f, p, q):
    w = space.weights
    a = np.abs(f)
    best = 0.0
    for i in range(space.N):
        for j in range(i + 1, space.N + 1):
            meas = w[i:j].sum()
            best = max(best, meas ** (1 / p - 1 / q) * (np.sum(a[i:j] ** q * w[i:j])) ** (1 / q))
    return best


def loop_morrey2d(space, f, p, q):
    rows, cols = space.layout
    w = space.weights.reshape(rows, cols)
    a = np.abs(f).reshape(rows, cols)
    best = 0.0
    for s in range(1, min(rows, cols) + 1):
        for i in range(rows - s + 1):
            for j in range(cols - s + 1):
                ww, aa = w[i:i + s, j:j + s], a[i:i + s, j:j + s]
                best = max(best, ww.sum() ** (1 / p - 1 / q) * np.sum(aa**q * ww) ** (1 / q))
    return best


def loop_weak(space, f, norm):
    a = np.abs(np.asarray(f, dtype=float))
    best = 0.0
    for v in np.unique(a):
        if v > 0:
            best = max(best, v * float(norm(space, (a >= v).astype(float))))
    return best


def test_lp_norm_values():
    sp = FiniteSpace(np.array([1.0, 2.0, 0.5]))
    assert float(lp_norm(1)(sp, [1.0, -1.0, 2.0])) == pytest.approx(4.0)
    assert float(lp_norm(2)(sp, [1.0, 1.0, 2.0])) == pytest.approx(np.sqrt(5.0))


def test_morrey1d_matches_loop():
    rng = np.random.default_rng(0)
    sp = FiniteSpace(rng.uniform(0.5, 2, 9))
    for p, q in [(2, 1), (3, 2), (1.5, 1.5)]:
        norm = morrey1d_norm(p, q)
        for _ in range(20):
            f = rng.normal(size=9)
            assert float(norm(sp, f)) == pytest.approx(loop_morrey1d(sp, f, p, q), rel=1e-12)


def test_morrey2d_matches_loop():
    rng = np.random.default_rng(1)
    sp = FiniteSpace(rng.uniform(0.5, 2, 12), (3, 4))
    norm = morrey2d_norm(2, 1)
    for _ in range(20):
        f = rng.normal(size=12)
        assert float(norm(sp, f)) == pytest.approx(loop_morrey2d(sp, f, 2, 1), rel=1e-12)


def test_morrey2d_needs_layout():
    with pytest.raises(MorreyError):
        morrey2d_norm(2, 1)(FiniteSpace.uniform(4), np.ones(4))


def test_space_validation():
    with pytest.raises(MorreyError):
        FiniteSpace(np.array([1.0, 0.0]))
    with pytest.raises(MorreyError):
        FiniteSpace(np.ones(4), (3, 2))
    sp = FiniteSpace.uniform(6, (2, 3))
    assert FiniteSpace.from_json(sp.to_json()).layout == (2, 3)


def test_norm_json_roundtrip():
    for norm in [lp_norm(2), morrey1d_norm(3, 2), morrey2d_norm(2, 1)]:
        again = norm_from_json(norm.to_json())
        sp = FiniteSpace.uniform(4, (2, 2))
        f = np.array([1.0, 0.5, 0.0, 2.0])
        assert float(again(sp, f)) == float(norm(sp, f))


def test_cellmap():
    assert CellMap.shift(4).table == (1, 2, 3, 3)
    assert CellMap.constant(3).compose(np.array([5.0, 1.0, 2.0])).tolist() == [5.0, 5.0, 5.0]
    with pytest.raises(MorreyError):
        CellMap((0, 5))
    assert CellMap.from_json(CellMap.shift(5).to_json()) == CellMap.shift(5)


def test_weak_norm_examples():
    sp = FiniteSpace.uniform(4)
    l1 = lp_norm(1)
    assert weak_norm_finite([3.0, 1.0, 0.0, 0.0], sp, l1) == 3.0
    assert weak_norm_finite([0.0] * 4, sp, l1) == 0.0


def test_weak_norm_matches_loop():
    rng = np.random.default_rng(2)
    sp = FiniteSpace(rng.uniform(0.5, 2, 7))
    for norm in [lp_norm(1), lp_norm(2), morrey1d_norm(2, 1)]:
        F = rng.integers(0, 4, size=(50, 7)).astype(float)
        batch = weak_norm_batch(F, sp, norm)
        for f, b in zip(F, batch):
            assert b == pytest.approx(loop_weak(sp, f, norm), rel=1e-12)


def test_indicator_weak_identity_all_subsets():
    sp = FiniteSpace.uniform(12, (3, 4))
    masks = np.array(list(itertools.product((0.0, 1.0), repeat=12)))
    for norm in [lp_norm(1), lp_norm(2), morrey1d_norm(2, 1), morrey1d_norm(3, 2), morrey2d_norm(2, 1)]:
        assert np.array_equal(weak_norm_batch(masks, sp, norm), norm(sp, masks))


def test_weak_properties():
    rng = np.random.default_rng(4)
    sp = FiniteSpace(rng.uniform(0.5, 2, 8))
    for norm in [lp_norm(1), morrey1d_norm(2, 1), morrey1d_norm(3, 2)]:
        F = rng.random((100, 8))
        c = rng.uniform(0.1, 10, 100)
        w = weak_norm_batch(F, sp, norm)
        assert np.all(w <= norm(sp, F) * (1 + 1e-12))
        assert np.allclose(weak_norm_batch(c[:, None] * F, sp, norm), c * w, rtol=1e-12)


def test_indicator_ratio_examples():
    sp4 = FiniteSpace.uniform(4)
    assert indicator_ratio_sup(CellMap.identity(4), sp4, lp_norm(1)).K == 1.0
    const = indicator_ratio_sup(CellMap.constant(4), sp4, lp_norm(1))
    assert const.K == 4.0 and const.witness == (0,) and const.subsets == 15
    swap = indicator_ratio_sup(CellMap((1, 0)), FiniteSpace.uniform(2), lp_norm(2))
    assert swap.K == pytest.approx(1.0)


def test_empirical_examples():
    sp = FiniteSpace.uniform(4)
    emp = weak_opnorm_empirical(CellMap.constant(4), sp, lp_norm(1))
    assert emp.value == 4.0
    assert emp.witness == (1.0, 0.0, 0.0, 0.0)
    rng = np.random.default_rng(5)
    for _ in range(5):
        perm = CellMap(rng.permutation(6))
        assert weak_opnorm_empirical(perm, FiniteSpace.uniform(6), lp_norm(2)).value == pytest.approx(1.0)


def test_verify_gate_examples():
    r = verify_gate(CellMap.identity(5), FiniteSpace.uniform(5), morrey1d_norm(2, 1))
    assert (r.K, r.empirical, r.verdict) == (1.0, 1.0, "PASS")
    r = verify_gate(CellMap.constant(4), FiniteSpace.uniform(4), lp_norm(1))
    assert r.K == r.empirical == 4.0 and r.verdict == "PASS"
    r = verify_gate(CellMap.shift(8), FiniteSpace.uniform(8), morrey1d_norm(2, 1))
    assert r.verdict == "PASS" and r.K == pytest.approx(r.empirical, rel=1e-12)


def test_verify_gate_fails_with_weak_family():
    # a family without the extremal indicator cannot reach K
    fam = np.array([[1.0, 1.0, 1.0, 1.0]])
    r = verify_gate(CellMap.constant(4), FiniteSpace.uniform(4), lp_norm(1), family=fam)
    assert r.verdict == "FAIL" and r.empirical < r.K


def test_quasi_norm_flag():
    sp = FiniteSpace.uniform(6)
    quasi = morrey1d_norm(1.0, 0.5)
    with pytest.raises(MorreyError):
        verify_gate(CellMap.shift(6), sp, quasi)
    r = verify_gate(CellMap.shift(6), sp, quasi, allow_quasi=True)
    assert r.asserted is False


def test_preflight_rejects_bad_norm():
    sp = FiniteSpace.uniform(4)
    bad = LatticeNorm("bad", lambda space, a: np.sum(a, axis=-1) ** 2)
    assert "positive homogeneity" in check_norm_instance(sp, bad)
    with pytest.raises(MorreyError):
        verify_gate(CellMap.identity(4), sp, bad)
    assert check_norm_instance(sp, lp_norm(2)) == []


def test_exhaustion_cap():
    N = MAX_EXHAUSTIVE_CELLS + 1
    sp = FiniteSpace.uniform(N)
    with pytest.raises(MorreyError):
        indicator_ratio_sup(CellMap.identity(N), sp, lp_norm(1))
    r = indicator_ratio_sup(CellMap.identity(N), sp, lp_norm(1), sampled=True, samples=2000)
    assert r.exact is False and r.K == pytest.approx(1.0)


def test_default_family_contents():
    F = default_family(4, n_random=10)
    assert F.shape == (15 + 80 + 10, 4)
    assert np.all(F >= 0)


def test_gate_threads_identical():
    sp = FiniteSpace(np.linspace(0.5, 2, 12), (3, 4))
    a = verify_gate(CellMap.shift(12), sp, morrey2d_norm(2, 1), threads=1)
    b = verify_gate(CellMap.shift(12), sp, morrey2d_norm(2, 1), threads=8)
    assert a == b
