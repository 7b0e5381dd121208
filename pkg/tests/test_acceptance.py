"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines inline; they are
also repeated in the terminal summary.
"""

import io
import itertools
import json
import math
import time
from contextlib import redirect_stdout

import numpy as np

from morreylab.cli import main as cli_main
from morreylab.composition import (
    AffineMap,
    diag_opnorm_lower,
    exp1d_map,
    exp_interval_family,
    jacobian_profile,
    opnorm_lower_search,
    diag_closed_form_bound,
    scalar_opnorm_exact,
    set_ratio_estimator,
    shear_cubic_map,
    svd_ascending,
)
from morreylab.core import AxisBox, GridFunction, MorreyParams
from morreylab.exact_norms import SUPPORT_SCALE, box_indicator_norm, dilation_norm_factor, slab_indicator_norm
from morreylab.grid_norms import morrey_norm_grid
from morreylab.suites import (
    affine_consistency,
    closed_form_vs_oracle,
    gate_matrix,
    random_box_sides,
    random_params,
    shear_growth_ratios,
    shear_lebesgue_family,
)
from morreylab.weak_gate import FiniteSpace, lp_norm, morrey1d_norm, morrey2d_norm, verify_gate, weak_norm_batch

RESULTS: dict[int, str] = {}


def record(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert passed, line


def test_criterion_01_closed_form_vs_oracle():
    t0 = time.perf_counter()
    stats = closed_form_vs_oracle(count=500, seed=0, num=200_000, refine=3)
    dt = time.perf_counter() - t0
    every = {(n, m) for n in range(1, 5) for m in range(1, n + 1)}
    ok = (stats["max_rel_error"] <= 1e-6 and stats["max_overshoot"] <= 1e-12 and every <= set(stats["regimes"])
          and dt < 30)
    record(1, ok, f"max rel err {stats['max_rel_error']:.2e} (tol 1e-6), max overshoot "
                  f"{stats['max_overshoot']:.2e} (tol 1e-12), {len(stats['regimes'])} (n,m) regimes, {dt:.1f}s")


def test_criterion_02_slab_norm():
    exact = slab_indicator_norm([1.0], MorreyParams(2, 2, 1)).value
    grid = morrey_norm_grid(GridFunction.truncated_slab(1.0, 64.0, 2, 1 / 32), MorreyParams(2, 2, 1)).value
    rng = np.random.default_rng(0)
    verdicts_ok, checked = True, 0
    for _ in range(200):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n))
        q = float(rng.uniform(0.5, 2))
        p = float(q * rng.uniform(1, 2 * n))
        if abs(n * q - k * p) < 1e-9:
            continue
        v = slab_indicator_norm(list(rng.uniform(0.1, 10, k)), MorreyParams(n, p, q)).value
        verdicts_ok &= math.isinf(v) == (n * q > k * p)
        checked += 1
    ok = exact == 1.0 and abs(grid - 1) <= 0.05 and verdicts_ok
    record(2, ok, f"slab norm {exact!r} (exact 1), grid T=64 {grid:.4f} (within 5%), "
                  f"{checked} unbounded/bounded verdicts {'all correct' if verdicts_ok else 'WRONG'}")


def test_criterion_03_scaling_laws():
    rng = np.random.default_rng(0)
    worst_box = worst_op = 0.0
    for t in (1 / 7, 1.0, 3.0, 16.0):
        for n in range(1, 5):
            for m in range(1, n + 1):
                params = random_params(rng, n, m)
                sides = random_box_sides(rng, n, 0.1, 10.0)
                base = box_indicator_norm(sides, params).value
                scaled = box_indicator_norm(tuple(t * s for s in sides), params).value
                expect = dilation_norm_factor(t, params, SUPPORT_SCALE) * base
                worst_box = max(worst_box, abs(scaled - expect) / expect)
                family = [AxisBox.from_sides(random_box_sides(rng, n, 0.1, 10.0)) for _ in range(3)]
                lower = opnorm_lower_search(AffineMap(t * np.eye(n)), params, family).value
                exact = scalar_opnorm_exact(t, params).value
                worst_op = max(worst_op, abs(lower - exact) / exact)
                worst_op = max(worst_op, abs(exact - t ** (-n / params.p)) / exact)
    ok = worst_box <= 1e-12 and worst_op <= 1e-12
    record(3, ok, f"support scaling rel err {worst_box:.2e}, scalar operator norm rel err {worst_op:.2e} (tol 1e-12)")


def test_criterion_04_diagonal_lower_bound():
    params = MorreyParams(2, 1.5, 1)
    v = diag_opnorm_lower([1.0, 4.0], params)
    expect = 4 ** (-1 / 3)
    bound = diag_closed_form_bound([1.0, 4.0], params)
    rel = abs(v.value - expect) / expect
    ok = rel <= 1e-9 and abs(bound - expect) / expect <= 1e-9
    record(4, ok, f"diag(1,4) lower {v.value:.12f} vs 4^(-1/3) rel err {rel:.1e} (tol 1e-9), "
                  f"witness box sides {v.witness['box']['sides']}")


def test_criterion_05_affine_consistency():
    stats = affine_consistency(count=100, seed=0)
    gap, leb = stats["max_lower_over_upper_minus_1"], stats["max_lebesgue_rel_error"]
    ok = gap <= 1e-9 and leb <= 1e-9
    record(5, ok, f"100 maps: max lower/upper {1 + gap:.4f} (<= 1 + 1e-9), "
                  f"hull Lebesgue norm vs |det|^(-1/p) rel err {leb:.1e} (tol 1e-9)")


def test_criterion_06_weak_gate_matrix():
    t0 = time.perf_counter()
    cases = gate_matrix(sizes=(4, 8, 12), seed=0)
    failures = [label for label, sigma, space, norm in cases if verify_gate(sigma, space, norm).verdict != "PASS"]
    dt = time.perf_counter() - t0
    ok = not failures and dt < 60
    record(6, ok, f"{len(cases) - len(failures)}/{len(cases)} gate cases equal at 1e-12, {dt:.1f}s (< 60s)"
                  + (f"; failing: {failures[:3]}" if failures else ""))


def test_criterion_07_indicator_weak_identity():
    sp = FiniteSpace.uniform(12, (3, 4))
    weighted = FiniteSpace(np.linspace(0.5, 2.0, 12), (3, 4))
    masks = np.array(list(itertools.product((0.0, 1.0), repeat=12)))
    norms = [lp_norm(1), lp_norm(2), morrey1d_norm(2, 1), morrey1d_norm(3, 2), morrey2d_norm(2, 1)]
    mismatches = 0
    for space in (sp, weighted):
        for norm in norms:
            mismatches += int(np.sum(weak_norm_batch(masks, space, norm) != norm(space, masks)))
    ok = mismatches == 0
    record(7, ok, f"{len(masks)} subsets x {len(norms)} norms x 2 spaces, {mismatches} inexact")


def test_criterion_08_shear_dichotomy():
    prof = jacobian_profile(shear_cubic_map(), AxisBox((-10.0, -10.0), (20.0, 20.0)))
    det_dev = float(np.max(np.abs(prof.dets - 1)))
    sh = shear_cubic_map()
    ratio_dev = max(abs(set_ratio_estimator(sh, [b]).value - 1) for b in shear_lebesgue_family())
    ratios = shear_growth_ratios(MorreyParams(2, 2, 1))
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    ok = det_dev <= 1e-9 and ratio_dev <= 0.01 and increasing and max(ratios) > 10
    record(8, ok, f"|det-1| <= {det_dev:.1e}, |set ratio-1| <= {ratio_dev:.1e}, Morrey ratios "
                  f"{[round(r, 2) for r in ratios]}")


def test_criterion_09_exp_map_bounded():
    em = exp1d_map()
    family = exp_interval_family([float(x) for x in range(21)], (1e-2, 1e-1, 1.0, 10.0, 100.0))
    ratio = set_ratio_estimator(em, family).value
    morrey = opnorm_lower_search(em, MorreyParams(1, 2, 1), family).value
    deriv = float(jacobian_profile(em, AxisBox((0.0,), (20.0,)), points_per_axis=41).alphas.max())
    ok = ratio <= 1 + 1e-6 and morrey <= 4 and deriv > 1e3
    record(9, ok, f"set ratio {ratio:.12f} (<= 1 + 1e-6), Morrey ratio {morrey:.6f} (<= 4), "
                  f"max derivative {deriv:.3e} (> 1e3)")


def test_criterion_10_svd_kernel():
    rng = np.random.default_rng(0)
    worst_rec = worst_det = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        a = rng.normal(size=(n, n))
        alpha, u, v = svd_ascending(a)
        worst_rec = max(worst_rec, float(np.max(np.abs(u @ np.diag(alpha) @ v - a))))
        det = abs(np.linalg.det(a))
        worst_det = max(worst_det, abs(float(np.prod(alpha)) - det) / det)
    alpha, _, _ = svd_ascending(np.array([[1.0, 1.0], [0.0, 1.0]]))
    s5 = math.sqrt(5)
    shear_err = max(abs(alpha[0] - (s5 - 1) / 2), abs(alpha[1] - (s5 + 1) / 2))
    ok = worst_rec <= 1e-10 and worst_det <= 1e-9 and shear_err <= 1e-12
    record(10, ok, f"reconstruction {worst_rec:.1e} (<= 1e-10), prod alpha vs |det| {worst_det:.1e} (<= 1e-9), "
                   f"shear singular values err {shear_err:.1e} (<= 1e-12)")


def test_criterion_11_determinism():
    outputs = {}
    for threads in (1, 4, 8):
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = cli_main(["verify", "all", "--seed", "0", "--threads", str(threads), "--no-timing"])
        outputs[threads] = (code, buf.getvalue())
    texts = {out for _, out in outputs.values()}
    report = json.loads(outputs[1][1])
    ok = len(texts) == 1 and all(code == 0 for code, _ in outputs.values()) and report["status"] == "PASS"
    record(11, ok, f"verify all: {len(report['records'])} records, "
                   f"{'identical' if len(texts) == 1 else 'DIFFERENT'} JSON for threads 1/4/8")
