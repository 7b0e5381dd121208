"""Named verification suites behind ``morreylab verify``.

Each suite fills an :class:`ExperimentReport` with PASS/FAIL records and
is deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from morreylab.composition import (
    AffineMap,
    bilip_certify,
    diag_map,
    diag_opnorm_lower,
    exp1d_map,
    exp_interval_family,
    jacobian_profile,
    lebesgue_opnorm_affine,
    morrey_opnorm_upper_affine,
    opnorm_lower_search,
    diag_closed_form_bound,
    scalar_opnorm_exact,
    set_ratio_estimator,
    shear_cubic_map,
    shear_witness_box,
)
from morreylab.core import AxisBox, GridFunction, MorreyParams, regime_index
from morreylab.exact_norms import SUPPORT_SCALE, box_indicator_norm, dilation_norm_factor, slab_indicator_norm
from morreylab.grid_norms import morrey_norm_grid, oracle_r_sweep
from morreylab.report import ExperimentReport
from morreylab.weak_gate import CellMap, FiniteSpace, lp_norm, morrey1d_norm, morrey2d_norm, verify_gate

CLOSED_FORM_RTOL = 1e-9
OVERSHOOT_RTOL = 1e-12
SCALING_RTOL = 1e-12
DIAG_RTOL = 1e-9
AFFINE_RTOL = 1e-9
DET_TOL = 1e-9
LEBESGUE_RATIO_TOL = 0.01
EXP_RATIO_TOL = 1e-6
EXP_MORREY_CAP = 4.0
EXP_DERIVATIVE_FLOOR = 1e3
# harness choice, not a derived constant
SHEAR_GROWTH_THRESHOLD = 10.0
SHEAR_TRANSLATIONS = (1.0, 2.0, 4.0, 8.0, 16.0)
SCALING_FACTORS = (1 / 7, 1.0, 3.0, 16.0)


def random_params(rng: np.random.Generator, n: int, m: int) -> MorreyParams:
    """Parameters whose regime index is m (boundaries excluded)."""
    q = float(rng.uniform(0.5, 3.0))
    if m == 1:
        p = n * q * float(rng.uniform(1.0, 3.0))
    else:
        lo, hi = n * q / m, n * q / (m - 1)
        p = float(rng.uniform(lo, hi))
    return MorreyParams(n, p, q)


def random_box_sides(rng: np.random.Generator, n: int, lo: float = 1e-2, hi: float = 1e2):
    return tuple(float(v) for v in np.exp(rng.uniform(math.log(lo), math.log(hi), n)))


def closed_form_vs_oracle(count: int = 500, seed: int = 0, num: int = 200_000, refine: int = 3) -> dict:
    """Compare box_indicator_norm with the brute-force R sweep on random boxes.

    Dimensions cycle through 1..4 and the regime index cycles through 1..n
    so every (n, m) pair is hit.
    """
    rng = np.random.default_rng(seed)
    worst_rel, worst_over, regimes = 0.0, -math.inf, set()
    worst_case = None
    pairs = [(n, m) for n in range(1, 5) for m in range(1, n + 1)]
    for i in range(count):
        n, m = pairs[i % len(pairs)]
        params = random_params(rng, n, m)
        sides = random_box_sides(rng, n)
        regimes.add((n, regime_index(params)))
        exact = box_indicator_norm(sides, params).value
        sweep = oracle_r_sweep(sides, params, num=num, refine=refine).value
        rel = abs(exact - sweep) / exact
        over = (sweep - exact) / exact
        if rel > worst_rel:
            worst_rel, worst_case = rel, {"sides": sides, "params": params.to_json()}
        worst_over = max(worst_over, over)
    return {"max_rel_error": worst_rel, "max_overshoot": worst_over, "regimes": sorted(regimes),
            "worst_case": worst_case, "count": count}


def suite_closed_forms(report: ExperimentReport, seed: int = 0, count: int = 500, **_) -> None:
    stats = closed_form_vs_oracle(count=count, seed=seed)
    report.tolerances.update(closed_form_rtol=CLOSED_FORM_RTOL, overshoot_rtol=OVERSHOOT_RTOL)
    report.check("closed form vs sweep, max relative error", stats["max_rel_error"],
                 stats["max_rel_error"] <= CLOSED_FORM_RTOL, "approx", "oracle_r_sweep",
                 CLOSED_FORM_RTOL, witness=stats["worst_case"])
    report.check("sweep overshoot over closed form", stats["max_overshoot"],
                 stats["max_overshoot"] <= OVERSHOOT_RTOL, "approx", "oracle_r_sweep", OVERSHOOT_RTOL)
    every = {(n, m) for n in range(1, 5) for m in range(1, n + 1)}
    covered = every <= set(stats["regimes"])
    report.check("regimes covered", len(stats["regimes"]), covered, "exact", "regime_index", len(every))
    slab = slab_indicator_norm([1.0], MorreyParams(2, 2, 1)).value
    report.check("slab [0,1] x R, n=2 p=2 q=1", slab, slab == 1.0, "exact", "slab_indicator_norm", 1.0)
    box = box_indicator_norm((1.0, 4.0), MorreyParams(2, 1.5, 1)).value
    report.check("box (1,4), n=2 p=3/2 q=1", box, abs(box - 4 ** (1 / 3)) <= 1e-12 * box, "exact",
                 "box_indicator_norm", 4 ** (1 / 3))


def gate_matrix(sizes=(4, 8, 12), seed: int = 0):
    """(label, sigma, space, norm) tuples covering maps x norms x sizes."""
    rng = np.random.default_rng(seed)
    layouts = {4: (2, 2), 8: (2, 4), 12: (3, 4)}
    out = []
    for N in sizes:
        maps = {
            "identity": CellMap.identity(N),
            "constant": CellMap.constant(N),
            "reverse": CellMap(range(N - 1, -1, -1)),
            "cycle": CellMap([(i + 1) % N for i in range(N)]),
            "shift": CellMap.shift(N),
            "halve": CellMap([i // 2 for i in range(N)]),
        }
        spaces = {
            "unit": FiniteSpace.uniform(N, layouts.get(N)),
            "weighted": FiniteSpace(rng.uniform(0.5, 2.0, N), layouts.get(N)),
        }
        norms = [lp_norm(1), lp_norm(2), morrey1d_norm(2, 1), morrey1d_norm(3, 2)]
        if N in layouts:
            norms.append(morrey2d_norm(2, 1))
        for sname, space in spaces.items():
            for norm in norms:
                for mname, sigma in maps.items():
                    label = f"N={N} {sname} {norm.name}{tuple(norm.params.values())} {mname}"
                    out.append((label, sigma, space, norm))
    return out


def suite_weak_gate(report: ExperimentReport, seed: int = 0, threads=None, **_) -> None:
    report.tolerances["gate_rtol"] = 1e-12
    for label, sigma, space, norm in gate_matrix(seed=seed):
        r = verify_gate(sigma, space, norm, seed=seed, threads=threads)
        report.check(f"gate {label}", r.K, r.verdict == "PASS", "exact", "verify_gate",
                     witness={"empirical": r.empirical, "set": r.witness_set})


def _scaling_boxes(rng, per_dim: int = 2):
    out = []
    for n in range(1, 5):
        for m in range(1, n + 1):
            for _ in range(per_dim):
                out.append((random_box_sides(rng, n, 0.1, 10.0), random_params(rng, n, m)))
    return out


def suite_scaling(report: ExperimentReport, seed: int = 0, **_) -> None:
    rng = np.random.default_rng(seed)
    report.tolerances["scaling_rtol"] = SCALING_RTOL
    cases = _scaling_boxes(rng)
    for t in SCALING_FACTORS:
        worst = 0.0
        for sides, params in cases:
            base = box_indicator_norm(sides, params).value
            scaled = box_indicator_norm(tuple(t * s for s in sides), params).value
            expect = dilation_norm_factor(t, params, SUPPORT_SCALE) * base
            worst = max(worst, abs(scaled - expect) / expect)
        report.check(f"support scaling t={t:.6g}", worst, worst <= SCALING_RTOL, "approx",
                     "box_indicator_norm", SCALING_RTOL)
        worst = 0.0
        for n in range(1, 5):
            for m in range(1, n + 1):
                params = random_params(rng, n, m)
                family = [AxisBox.from_sides(random_box_sides(rng, n, 0.1, 10.0)) for _ in range(3)]
                lower = opnorm_lower_search(diag_map([t] * n), params, family).value
                exact = scalar_opnorm_exact(t, params).value
                worst = max(worst, abs(lower - exact) / exact)
        report.check(f"scalar map operator norm t={t:.6g}", worst, worst <= SCALING_RTOL, "approx",
                     "opnorm_lower_search", SCALING_RTOL)


def shear_growth_ratios(params: MorreyParams, translations=SHEAR_TRANSLATIONS) -> list[float]:
    sh = shear_cubic_map()
    return [opnorm_lower_search(sh, params, [shear_witness_box(t)]).value for t in translations]


def suite_shear_growth(report: ExperimentReport, p: float = 2.0, q: float = 1.0, **_) -> None:
    params = MorreyParams(2, p, q)
    ratios = shear_growth_ratios(params)
    for t, r in zip(SHEAR_TRANSLATIONS, ratios):
        report.add(f"witness ratio T={t:g}", r, "lower", "opnorm_lower_search")
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    report.check("ratios strictly increasing in T", ratios[-1], increasing, "lower", "opnorm_lower_search")
    report.check("max ratio exceeds harness threshold", max(ratios), max(ratios) > SHEAR_GROWTH_THRESHOLD,
                 "lower", "opnorm_lower_search", SHEAR_GROWTH_THRESHOLD,
                 note="threshold 10 within T <= 16 is a harness choice")


def shear_lebesgue_family():
    boxes = [shear_witness_box(t) for t in SHEAR_TRANSLATIONS]
    boxes += [AxisBox((-1.0, -1.0), (2.0, 2.0)), AxisBox((0.5, 0.2), (3.0, 0.5)), AxisBox((-30.0, 0.0), (10.0, 1.0))]
    return boxes


def suite_shear_lebesgue(report: ExperimentReport, **_) -> None:
    sh = shear_cubic_map()
    prof = jacobian_profile(sh, AxisBox((-10.0, -10.0), (20.0, 20.0)))
    dev = float(np.max(np.abs(prof.dets - 1.0)))
    report.tolerances.update(det_tol=DET_TOL, lebesgue_ratio_tol=LEBESGUE_RATIO_TOL)
    report.check("max |det D phi - 1| on [-10,10]^2", dev, dev <= DET_TOL, "approx", "jacobian_profile", DET_TOL)
    worst = 0.0
    for box in shear_lebesgue_family():
        r = set_ratio_estimator(sh, [box]).value
        worst = max(worst, abs(r - 1.0))
    report.check("max |set ratio - 1|", worst, worst <= LEBESGUE_RATIO_TOL, "approx", "set_ratio_estimator",
                 LEBESGUE_RATIO_TOL)


EXP_TRANSLATIONS = tuple(float(x) for x in range(21))
EXP_WIDTHS = (1e-2, 1e-1, 1.0, 10.0, 100.0)


def suite_exp_bounded(report: ExperimentReport, p: float = 2.0, q: float = 1.0, **_) -> None:
    em = exp1d_map()
    family = exp_interval_family(EXP_TRANSLATIONS, EXP_WIDTHS)
    report.tolerances.update(ratio_tol=EXP_RATIO_TOL, morrey_cap=EXP_MORREY_CAP)
    ratio = set_ratio_estimator(em, family).value
    report.check("interval set ratio", ratio, ratio <= 1 + EXP_RATIO_TOL, "lower", "set_ratio_estimator",
                 1 + EXP_RATIO_TOL)
    mor = opnorm_lower_search(em, MorreyParams(1, p, q), family).value
    report.check(f"Morrey p={p:g} q={q:g} ratio", mor, mor <= EXP_MORREY_CAP, "lower", "opnorm_lower_search",
                 EXP_MORREY_CAP)
    prof = jacobian_profile(em, AxisBox((0.0,), (20.0,)), points_per_axis=41)
    dmax = float(prof.alphas[:, -1].max())
    report.check("max sampled derivative on [0,20]", dmax, dmax > EXP_DERIVATIVE_FLOOR, "lower",
                 "jacobian_profile", EXP_DERIVATIVE_FLOOR)


def suite_diag_lower(report: ExperimentReport, seed: int = 0, **_) -> None:
    params = MorreyParams(2, 1.5, 1.0)
    val = diag_opnorm_lower([1.0, 4.0], params).value
    expect = 4 ** (-1 / 3)
    report.check("diag(1,4) n=2 p=3/2 q=1", val, abs(val - expect) <= DIAG_RTOL * expect, "lower",
                 "diag_opnorm_lower", expect)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for n in range(2, 5):
        for m in range(2, n + 1):
            params = random_params(rng, n, m)
            a = (1.0,) + tuple(sorted(float(v) for v in np.exp(rng.uniform(0, 3, n - 1))))
            lower = diag_opnorm_lower(a, params).value
            bound = diag_closed_form_bound(a, params)
            worst = min(worst, lower / bound - 1.0)
    report.check("witness ratio minus closed-form bound (relative)", worst, worst >= -DIAG_RTOL, "lower",
                 "diag_opnorm_lower", -DIAG_RTOL)


def random_affine(rng: np.random.Generator, n: int = 2, min_det: float = 0.1, max_cond: float = 30.0):
    while True:
        a = rng.normal(size=(n, n))
        if abs(np.linalg.det(a)) > min_det and np.linalg.cond(a) < max_cond:
            return AffineMap(a, rng.normal(size=n))


def affine_consistency(count: int = 100, seed: int = 0, params: MorreyParams | None = None) -> dict:
    rng = np.random.default_rng(seed)
    params = params or MorreyParams(2, 3.0, 1.5)
    worst_gap, worst_leb = -math.inf, 0.0
    for _ in range(count):
        fmap = random_affine(rng)
        family = [AxisBox(tuple(rng.normal(size=2)), tuple(np.exp(rng.uniform(-1, 1, 2)))) for _ in range(2)]
        lower = opnorm_lower_search(fmap, params, family, resolution=32).value
        upper = morrey_opnorm_upper_affine(fmap, params).value
        worst_gap = max(worst_gap, lower / upper - 1.0)
        leb = lebesgue_opnorm_affine(fmap, params.p).value
        hull = set_ratio_estimator(fmap, family).value ** (1.0 / params.p)
        worst_leb = max(worst_leb, abs(hull - leb) / leb)
    return {"max_lower_over_upper_minus_1": worst_gap, "max_lebesgue_rel_error": worst_leb}


def suite_affine(report: ExperimentReport, seed: int = 0, count: int = 100, **_) -> None:
    stats = affine_consistency(count, seed)
    report.tolerances["affine_rtol"] = AFFINE_RTOL
    gap = stats["max_lower_over_upper_minus_1"]
    report.check("lower/upper - 1 (must be <= tol)", gap, gap <= AFFINE_RTOL, "approx",
                 "opnorm_lower_search", AFFINE_RTOL)
    leb = stats["max_lebesgue_rel_error"]
    report.check("Lebesgue norm |det|^(-1/p) vs hull volumes", leb, leb <= AFFINE_RTOL, "approx",
                 "lebesgue_opnorm_affine", AFFINE_RTOL)


def suite_slab(report: ExperimentReport, **_) -> None:
    params = MorreyParams(2, 2, 1)
    f = GridFunction.truncated_slab(1.0, 64.0, 2, 1 / 32)
    est = morrey_norm_grid(f, params).value
    report.check("truncated slab T=64 grid estimate", est, abs(est - 1) <= 0.05, "lower", "morrey_norm_grid", 0.05)
    unb = slab_indicator_norm([1.0], MorreyParams(2, 1.5, 1)).value
    report.check("slab with n q > k p is unbounded", unb, math.isinf(unb), "exact", "slab_indicator_norm")


def suite_certify(report: ExperimentReport, **_) -> None:
    cert = bilip_certify(jacobian_profile(diag_map([2.0, 3.0]), AxisBox((-1, -1), (2, 2))), 2.0)
    report.check("diag(2,3), C=2", cert.inverse_lipschitz_bound, cert.verdict == "certified", "upper",
                 "bilip_certify", math.sqrt(2) / 2)
    cert = bilip_certify(jacobian_profile(shear_cubic_map(), AxisBox((-10, -10), (20, 20))), 0.1)
    report.check("shear-cubic on [-10,10]^2, C=0.1 fails", cert.c_lower, cert.verdict == "failed", "lower",
                 "bilip_certify", 0.1)


SUITES: dict[str, Callable] = {
    "closed-forms": suite_closed_forms,
    "weak-gate": suite_weak_gate,
    "scaling": suite_scaling,
    "shear-growth": suite_shear_growth,
    "shear-lebesgue": suite_shear_lebesgue,
    "exp-bounded": suite_exp_bounded,
    "diag-lower": suite_diag_lower,
    "affine": suite_affine,
    "slab": suite_slab,
    "certify": suite_certify,
}


def run_suite(name: str, seed: int = 0, threads=None, **opts) -> ExperimentReport:
    if name not in SUITES:
        raise KeyError(name)
    report = ExperimentReport(f"verify:{name}", inputs={"suite": name, "seed": seed, **opts})
    SUITES[name](report, seed=seed, threads=threads, **opts)
    report.status = "FAIL" if report.failures else "PASS"
    return report.finish()
