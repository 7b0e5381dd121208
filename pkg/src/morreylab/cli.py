"""Command-line harness: ``morreylab norm|compose|certify|verify|bundle|schema``.

Reports go to stdout as JSON.  Exit codes: 0 ok/PASS, 1 certification
failed or a suite FAILed, 2 bad input, 3 unbounded result under
--require-finite, 4 inconclusive certificate.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from morreylab import suites
from morreylab.composition import (
    AffineMap,
    BUILTIN_MAPS,
    CERTIFIED,
    FAILED,
    bilip_certify,
    builtin_map,
    default_diag_witnesses,
    diag_opnorm_lower,
    exp_interval_family,
    jacobian_profile,
    lebesgue_opnorm_affine,
    morrey_opnorm_upper_affine,
    opnorm_lower_search,
    diag_closed_form_bound,
    scalar_opnorm_exact,
    set_ratio_estimator,
    shear_witness_box,
)
from morreylab.core import AxisBox, GridFunction, GridSpec, MorreyError, MorreyParams, regime_index
from morreylab.exact_norms import box_indicator_norm, slab_indicator_norm
from morreylab.grid_norms import morrey_norm_grid, weak_morrey_norm_grid
from morreylab.report import REPORT_SCHEMA, ExperimentReport

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_UNBOUNDED = 3
EXIT_INCONCLUSIVE = 4


class InputError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}")
    return vals[0], vals[1]


def _params(args, n: int) -> MorreyParams:
    if args.n is not None and args.n != n:
        raise InputError(f"--n {args.n} does not match the input dimension {n}")
    return MorreyParams(n, args.p, args.q)


def _emit(report: ExperimentReport, args) -> None:
    print(report.dumps(timing=not args.no_timing))
    if args.csv:
        report.write_csv(args.csv)


# ---------------------------------------------------------------------------
# norm


def read_grid_csv(path) -> GridFunction:
    """First line: JSON GridSpec.  Remaining lines: values in row-major order."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InputError(f"{path} is empty")
    grid = GridSpec.from_json(json.loads(lines[0]))
    body = ",".join(line for line in lines[1:] if line.strip())
    values = np.array([float(tok) for tok in body.split(",") if tok.strip()])
    if values.size != grid.size:
        raise InputError(f"expected {grid.size} values for shape {grid.shape}, got {values.size}")
    return GridFunction(grid, values.reshape(grid.shape))


def cmd_norm(args) -> int:
    report = ExperimentReport(f"norm:{args.kind}", inputs={"kind": args.kind, "p": args.p, "q": args.q})
    if args.kind == "box":
        if args.sides is None:
            raise InputError("norm box needs --sides")
        sides = args.sides
        params = _params(args, len(sides))
        if any(math.isinf(s) for s in sides):
            val = slab_indicator_norm([s for s in sides if math.isfinite(s)], params)
        else:
            val = box_indicator_norm(sides, params)
        report.inputs.update(sides=sides, n=params.n)
        op = "box_indicator_norm"
    elif args.kind == "slab":
        if args.t is None:
            raise InputError("norm slab needs --t")
        n = args.n or 2
        params = MorreyParams(n, args.p, args.q)
        val = slab_indicator_norm(args.t, params)
        report.inputs.update(t=args.t, n=n)
        op = "slab_indicator_norm"
    else:
        if args.input is None:
            raise InputError("norm grid needs --input")
        f = read_grid_csv(args.input)
        params = _params(args, f.grid.n)
        val = (weak_morrey_norm_grid if args.weak else morrey_norm_grid)(f, params, threads=args.threads)
        report.inputs.update(input=str(args.input), grid=f.grid.to_json(), weak=args.weak)
        op = "weak_morrey_norm_grid" if args.weak else "morrey_norm_grid"
    report.inputs["regime_m"] = regime_index(params)
    report.add("norm", val.value, val.kind, op, witness=val.witness, space=val.space)
    if not val.is_finite:
        report.status = "unbounded"
    _emit(report.finish(), args)
    if args.require_finite and not val.is_finite:
        return EXIT_UNBOUNDED
    return EXIT_OK


# ---------------------------------------------------------------------------
# compose


def _map_from_args(args):
    try:
        return builtin_map(args.map, n=args.n, matrix=args.matrix, offset=args.offset, entries=args.entries)
    except MorreyError as exc:
        raise InputError(str(exc)) from exc


def _family(name: str, fmap, n: int, rng: np.random.Generator, count: int):
    if name == "boxes":
        out = []
        for _ in range(count):
            lower = tuple(rng.normal(size=n))
            sides = tuple(np.exp(rng.uniform(-2.0, 2.0, n)))
            out.append(AxisBox(lower, sides))
        return out
    if name == "intervals":
        if n != 1:
            raise InputError("the intervals family is one-dimensional")
        return exp_interval_family(suites.EXP_TRANSLATIONS, suites.EXP_WIDTHS)
    if name == "shear":
        if n != 2:
            raise InputError("the shear family is two-dimensional")
        return [shear_witness_box(t) for t in suites.SHEAR_TRANSLATIONS]
    if name == "diag-witness":
        entries = getattr(fmap, "matrix", None)
        if entries is None or not fmap.is_diagonal:
            raise InputError("diag-witness family needs a diagonal affine map")
        return default_diag_witnesses(np.diag(fmap.matrix))
    raise InputError(f"unknown family {name!r}")


def _is_scalar(fmap) -> bool:
    if not isinstance(fmap, AffineMap):
        return False
    m = fmap.matrix
    return bool(m[0, 0] > 0 and np.array_equal(m, m[0, 0] * np.eye(fmap.n)))


def cmd_compose(args) -> int:
    fmap = _map_from_args(args)
    n = fmap.n
    params = _params(args, n)
    rng = np.random.default_rng(args.seed)
    family_name = args.family or ("intervals" if args.map == "exp1d" else "shear" if args.map == "shear-cubic"
                                  else "boxes")
    family = _family(family_name, fmap, n, rng, args.count)
    report = ExperimentReport("compose", inputs={
        "map": args.map, "n": n, "p": params.p, "q": params.q, "family": family_name,
        "family_size": len(family), "seed": args.seed, "regime_m": regime_index(params)})
    if args.matrix is not None:
        report.inputs["matrix"] = args.matrix
    if args.entries is not None:
        report.inputs["entries"] = args.entries

    lower = opnorm_lower_search(fmap, params, family, threads=args.threads)
    report.add("morrey lower bound", lower.value, "lower", "opnorm_lower_search", witness=lower.witness["index"],
               note=lower.source)
    if args.map == "diag" and fmap.is_diagonal:
        a = np.diag(fmap.matrix)
        diag = diag_opnorm_lower(a, params)
        report.add("morrey lower bound, diagonal witness boxes", diag.value, "lower", "diag_opnorm_lower",
                   witness=diag.witness)
        try:
            report.add("diagonal closed-form bound", diag_closed_form_bound(a, params), "lower",
                       "diag_closed_form_bound")
        except MorreyError:
            pass
    if isinstance(fmap, AffineMap):
        if _is_scalar(fmap):
            exact = scalar_opnorm_exact(float(fmap.matrix[0, 0]), params)
            report.add("morrey upper bound", exact.value, "exact", "scalar_opnorm_exact", note=exact.source)
        else:
            upper = morrey_opnorm_upper_affine(fmap, params)
            report.add("morrey upper bound", upper.value, "upper", "morrey_opnorm_upper_affine",
                       witness=upper.witness)
        leb = lebesgue_opnorm_affine(fmap, params.p)
        report.add("lebesgue operator norm", leb.value, "exact", "lebesgue_opnorm_affine")
    ratio = set_ratio_estimator(fmap, family)
    report.add("set ratio sup |phi^-1 E| / |E|", ratio.value, "lower", "set_ratio_estimator", note=ratio.source)
    if args.profile:
        domain = _domain(args, n)
        summary = jacobian_profile(fmap, domain, points_per_axis=args.points).summary()
        for key, value in summary.items():
            if isinstance(value, (int, float)) and value is not None:
                report.add(f"jacobian {key}", value, "approx", "jacobian_profile")
    _emit(report.finish(), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify


def _domain(args, n: int) -> AxisBox:
    lo, hi = args.domain if args.domain is not None else (-1.0, 1.0)
    if not hi > lo:
        raise InputError("--domain needs lo < hi")
    return AxisBox.cube(n, hi - lo, (lo,) * n)


def cmd_certify(args) -> int:
    fmap = _map_from_args(args)
    domain = _domain(args, fmap.n)
    profile = jacobian_profile(fmap, domain, points_per_axis=args.points)
    cert = bilip_certify(profile, args.C, max_spacing=args.max_spacing)
    report = ExperimentReport("certify", inputs={
        "map": args.map, "n": fmap.n, "domain": domain.to_json(), "C": args.C, "points_per_axis": args.points,
        "max_spacing": args.max_spacing})
    report.add("L_upper", cert.L_upper, "upper", "bilip_certify")
    report.add("c_lower", cert.c_lower, "approx", "bilip_certify")
    report.add("inverse lipschitz bound", cert.inverse_lipschitz_bound, "upper", "bilip_certify",
               note=cert.reason or None)
    report.add("max neighbour variation", cert.variation, "approx", "bilip_certify")
    report.status = cert.verdict
    _emit(report.finish(), args)
    if cert.verdict == CERTIFIED:
        return EXIT_OK
    return EXIT_FAIL if cert.verdict == FAILED else EXIT_INCONCLUSIVE


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    opts = {}
    if args.p is not None:
        opts["p"] = args.p
    if args.q is not None:
        opts["q"] = args.q
    names = list(suites.SUITES) if args.suite == "all" else [args.suite]
    if any(name not in suites.SUITES for name in names):
        raise InputError(f"unknown suite {args.suite!r}; choose from all, {', '.join(suites.SUITES)}")
    if len(names) == 1:
        report = suites.run_suite(names[0], seed=args.seed, threads=args.threads, **opts)
    else:
        report = ExperimentReport("verify:all", inputs={"suite": "all", "seed": args.seed})
        for name in names:
            sub = suites.run_suite(name, seed=args.seed, threads=args.threads)
            for rec in sub.records:
                report.records.append({**rec, "name": f"{name}: {rec['name']}"})
            report.tolerances.update({f"{name}.{k}": v for k, v in sub.tolerances.items()})
        report.status = "FAIL" if report.failures else "PASS"
        report.finish()
    _emit(report, args)
    return EXIT_FAIL if report.failures else EXIT_OK


# ---------------------------------------------------------------------------
# bundle / schema


def cmd_bundle(args) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read bundle config: {exc}") from exc
    bundles = config.get("bundles", config)
    if args.name not in bundles:
        raise InputError(f"no bundle named {args.name!r} in {args.config}")
    argv = [str(a) for a in bundles[args.name]]
    if argv and argv[0] == "bundle":
        raise InputError("bundles cannot nest")
    return main(argv + _passthrough(args))


def _passthrough(args) -> list[str]:
    out = ["--seed", str(args.seed)]
    if args.threads is not None:
        out += ["--threads", str(args.threads)]
    if args.csv:
        out += ["--csv", str(args.csv)]
    if args.no_timing:
        out.append("--no-timing")
    if args.require_finite:
        out.append("--require-finite")
    return out


def cmd_schema(args) -> int:
    print(json.dumps(REPORT_SCHEMA, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for random families (default 0)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (MORREYLAB_THREADS caps it)")
    common.add_argument("--csv", type=Path, default=None, help="also write records as CSV")
    common.add_argument("--no-timing", action="store_true", help="omit wall-clock duration from the JSON")
    common.add_argument("--require-finite", action="store_true", help="exit 3 if a norm is infinite")

    def params_args(p, p_default=2.0, q_default=1.0):
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--p", type=float, default=p_default)
        p.add_argument("--q", type=float, default=q_default)

    parser = argparse.ArgumentParser(prog="morreylab", description="Morrey norms and composition operators.")
    sub = parser.add_subparsers(dest="command", required=True)

    pn = sub.add_parser("norm", parents=[common], help="norm of a box, slab or grid function")
    pn.add_argument("kind", choices=["box", "slab", "grid"])
    pn.add_argument("--sides", type=_floats, help="box sides, 'inf' allowed")
    pn.add_argument("--t", type=_floats, help="slab thickness (one value per finite side)")
    pn.add_argument("--input", type=Path, help="grid CSV: JSON GridSpec line, then values")
    pn.add_argument("--weak", action="store_true", help="weak Morrey norm for grid input")
    params_args(pn)
    pn.set_defaults(func=cmd_norm)

    def map_args(p):
        p.add_argument("--map", required=True, choices=BUILTIN_MAPS)
        p.add_argument("--matrix", type=_floats, help="row-major affine matrix")
        p.add_argument("--offset", type=_floats)
        p.add_argument("--entries", type=_floats, help="diagonal entries")
        p.add_argument("--domain", type=_pair, help="lo,hi of the cube domain (default -1,1)")
        p.add_argument("--points", type=int, default=33, help="Jacobian samples per axis")

    pc = sub.add_parser("compose", parents=[common], help="operator bounds for a built-in map")
    map_args(pc)
    params_args(pc)
    pc.add_argument("--family", choices=["boxes", "intervals", "shear", "diag-witness"], default=None)
    pc.add_argument("--count", type=int, default=16, help="size of the random box family")
    pc.add_argument("--profile", action="store_true", help="include a Jacobian profile summary")
    pc.set_defaults(func=cmd_compose)

    pk = sub.add_parser("certify", parents=[common], help="bi-Lipschitz certificate from Jacobian samples")
    map_args(pk)
    pk.add_argument("--n", type=int, default=None)
    pk.add_argument("--C", type=float, required=True, help="lower threshold for the smallest singular value")
    pk.add_argument("--max-spacing", type=float, default=None)
    pk.set_defaults(func=cmd_certify)

    pv = sub.add_parser("verify", parents=[common], help="run a named verification suite")
    pv.add_argument("suite", help="all, " + ", ".join(suites.SUITES))
    pv.add_argument("--p", type=float, default=None)
    pv.add_argument("--q", type=float, default=None)
    pv.set_defaults(func=cmd_verify)

    pb = sub.add_parser("bundle", parents=[common], help="run a named argument bundle from a JSON config")
    pb.add_argument("config", type=Path)
    pb.add_argument("name")
    pb.set_defaults(func=cmd_bundle)

    ps = sub.add_parser("schema", help="print the report JSON schema")
    ps.set_defaults(func=cmd_schema)
    return parser


_NEGATIVE = re.compile(r"^-[\d.]")


def _join_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--domain -10,10`` into ``--domain=-10,10`` so argparse accepts it."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_join_negative_values(argv))
    try:
        return args.func(args)
    except (InputError, MorreyError, OSError, ValueError) as exc:
        print(f"morreylab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
