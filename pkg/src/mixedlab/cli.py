"""Command-line front end.

Verbs: ``gen``, ``norm``, ``op``, ``dual``, ``suite``, ``plotdata``.
Exit codes: 0 success, 1 suite-check failure, 2 usage or IO error.
A ``--config FILE`` of ``key = value`` lines supplies defaults for any
long flag of the chosen verb.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .duality import SolverParams, block_norm_upper, dual_norm_lower, duality_gap
from .grid import (
    GridCube,
    GridFunction,
    enumerate_cubes,
    read_gridfn,
    write_gridfn,
)
from .lab import SuiteConfig, emit_plotdata, generate, run_suite, suite_names
from .norms import (
    ExponentTuple,
    Weight,
    bmo_norm,
    mean_oscillation,
    mixed_norm,
    morrey_norm,
    weighted_lp_norm,
)
from .operators import KernelSpec, bmo_probe, commutator, frac_integral, maximal, sharp_maximal


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _parse_cube(text: str) -> GridCube:
    start, side = text.split(":")
    return GridCube(_parse_ints(start), int(side))


def _cube_dict(cube: GridCube | None):
    if cube is None:
        return None
    return {"start": list(cube.start), "side": cube.side}


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_config(path: str) -> dict[str, str]:
    cfg = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (need key = value): {line!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _apply_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    for key, value in _load_config(path).items():
        flag = f"--{key}"
        if flag not in rest:
            rest += [flag, value]
    return rest


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="mixedlab", description=__doc__)
    # global flags (before the verb); per-verb flags of the same name win
    top.add_argument("--seed", type=int, default=None, dest="global_seed")
    top.add_argument("--threads", type=int, default=None, dest="global_threads")
    top.add_argument("--out", default=None, dest="global_out")
    sub = top.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen", help="generate a test function and write it")
    g.add_argument("--kind", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--spacing", type=float, default=None)
    g.add_argument("--cube", type=_parse_cube, default=None)
    g.add_argument("--out", default=None)

    n = sub.add_parser("norm", help="evaluate a norm, reporting value and argmax cube")
    n.add_argument("--space", required=True, choices=["mixed", "morrey", "bmo", "wlp"])
    n.add_argument("--input", required=True)
    n.add_argument("--p0", type=float, default=3.0)
    n.add_argument("--p", type=_parse_floats, default=None)
    n.add_argument("--family", default="all",
                   choices=["dyadic", "shifted", "all", "unit"])
    n.add_argument("--weight", default=None)
    n.add_argument("--wp", type=float, default=2.0)
    n.add_argument("--out", default=None)

    o = sub.add_parser("op", help="apply an operator, writing the image")
    o.add_argument("operator", choices=["maximal", "sharp", "ialpha", "commutator", "probe"])
    o.add_argument("--input", default=None)
    o.add_argument("--b", default=None)
    o.add_argument("--alpha", type=float, default=0.5)
    o.add_argument("--method", default="direct", choices=["direct", "fft"])
    o.add_argument("--maximal-method", default="summed-area",
                   choices=["summed-area", "brute", "dyadic"])
    o.add_argument("--family", default="all",
                   choices=["dyadic", "shifted", "all", "unit"])
    o.add_argument("--cube", type=_parse_cube, default=None)
    o.add_argument("--z0", type=_parse_ints, default=None)
    o.add_argument("--modes", type=int, default=8)
    o.add_argument("--out", default=None)

    d = sub.add_parser("dual", help="block norm, dual norm, or the two-sided gap")
    d.add_argument("mode", choices=["gap", "block", "lower"])
    d.add_argument("--input", required=True)
    d.add_argument("--p0", type=float, required=True)
    d.add_argument("--p", type=_parse_floats, required=True)
    d.add_argument("--family", default="dyadic",
                   choices=["dyadic", "shifted", "all", "unit"])
    d.add_argument("--max-iters", type=int, default=20000)
    d.add_argument("--tol", type=float, default=1e-8)
    d.add_argument("--export-dir", default=None)
    d.add_argument("--out", default=None)

    s = sub.add_parser("suite", help="run a property suite and emit a report")
    s.add_argument("--name", required=True, choices=sorted(suite_names()))
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--sizes", type=_parse_ints, default=(16,))
    s.add_argument("--p0", type=float, default=3.0)
    s.add_argument("--p", type=_parse_floats, default=None)
    s.add_argument("--q0", type=float, default=None)
    s.add_argument("--q", type=_parse_floats, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--r", type=float, default=2.0)
    s.add_argument("--family", default="dyadic",
                   choices=["dyadic", "shifted", "all", "unit"])
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--count", type=int, default=6)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iters", type=int, default=20000)
    s.add_argument("--ascent-iters", type=int, default=120)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", default=None)

    p = sub.add_parser("plotdata", help="extract a CSV series from a suite report")
    p.add_argument("--report", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--out", default=None)

    return top


def _resolved(args, name: str, fallback):
    value = getattr(args, name, None)
    if value is None:
        value = getattr(args, f"global_{name}", None)
    return fallback if value is None else value


def _require_input(path: str | None, flag: str) -> GridFunction:
    if path is None:
        raise ValueError(f"missing required {flag}")
    return read_gridfn(path)


def _cmd_gen(args) -> int:
    seed = _resolved(args, "seed", 0)
    out = _resolved(args, "out", None)
    if out is None:
        raise ValueError("missing required --out")
    spacing = args.spacing if args.spacing is not None else 1.0 / args.size
    geo = GridFunction.zeros((args.size,) * args.dim, spacing)
    fn = generate(args.kind, seed, geo, cube=args.cube)
    write_gridfn(fn, out)
    _emit({"kind": args.kind, "seed": seed, "shape": list(fn.shape),
           "spacing": fn.spacing, "written": str(out)}, None)
    return 0


def _cmd_norm(args) -> int:
    f = read_gridfn(args.input)
    pvec = args.p if args.p is not None else (2.0,) * f.dim
    payload = {"space": args.space, "family": args.family,
               "exponents": {"p0": args.p0, "p": list(pvec)}}
    if args.space == "mixed":
        payload["value"] = mixed_norm(f, pvec)
        payload["argmax_cube"] = None
    elif args.space == "morrey":
        fam = enumerate_cubes(f.shape, args.family)
        value, arg = morrey_norm(f, ExponentTuple(args.p0, pvec), fam)
        payload["value"] = value
        payload["argmax_cube"] = _cube_dict(arg)
    elif args.space == "bmo":
        fam = enumerate_cubes(f.shape, args.family)
        value, arg = bmo_norm(f, fam)
        payload["value"] = value
        payload["argmax_cube"] = _cube_dict(arg)
    else:
        w = Weight(_require_input(args.weight, "--weight"))
        payload["value"] = weighted_lp_norm(f, args.wp, w)
        payload["argmax_cube"] = None
        payload["exponents"] = {"p": args.wp}
    _emit(payload, _resolved(args, "out", None))
    return 0


def _cmd_op(args) -> int:
    if args.operator == "probe":
        b = _require_input(args.b, "--b")
        if args.cube is None or args.z0 is None:
            raise ValueError("probe needs --cube and --z0")
        lower, resid = bmo_probe(b, args.cube, args.z0, args.alpha, args.modes)
        ref = GridCube(tuple(a + d for a, d in zip(args.cube.start, args.z0)),
                       args.cube.side)
        _emit({"lower": lower, "residual": resid,
               "direct_oscillation": mean_oscillation(b, args.cube, ref)}, None)
        return 0
    f = _require_input(args.input, "--input")
    if args.operator == "maximal":
        fam = None if args.maximal_method == "dyadic" else enumerate_cubes(f.shape, args.family)
        out = maximal(f, fam, args.maximal_method)
    elif args.operator == "sharp":
        out = sharp_maximal(f, enumerate_cubes(f.shape, args.family))
    elif args.operator == "ialpha":
        out = frac_integral(f, KernelSpec(args.alpha, args.method))
    else:
        b = _require_input(args.b, "--b")
        out = commutator(b, f, KernelSpec(args.alpha, args.method))
    stats = {"min": float(out.values.min()), "max": float(out.values.max()),
             "integral": float(out.spacing**out.dim * out.values.sum())}
    out_path = _resolved(args, "out", None)
    if out_path:
        write_gridfn(out, out_path)
        stats["written"] = str(out_path)
    _emit({"operator": args.operator, "alpha": args.alpha, "stats": stats}, None)
    return 0


def _cmd_dual(args) -> int:
    f = read_gridfn(args.input)
    exps = ExponentTuple(args.p0, args.p)
    fam = enumerate_cubes(f.shape, args.family)
    params = SolverParams(tol=args.tol, max_iters=args.max_iters)
    if args.mode == "block":
        value, dec = block_norm_upper(f, exps, fam, params)
        payload = {"upper": value, "terms": len(dec.terms),
                   "total_coefficient": dec.total_coefficient,
                   "iterations": dec.diagnostics.get("iterations"),
                   "primal_residual": dec.diagnostics.get("primal_residual")}
    elif args.mode == "lower":
        value, _ = dual_norm_lower(f, exps, fam, params)
        payload = {"lower": value}
    else:
        report = duality_gap(f, exps, fam, params)
        payload = report.summary_dict()
        if args.export_dir:
            outdir = Path(args.export_dir)
            outdir.mkdir(parents=True, exist_ok=True)
            index = []
            for i, term in enumerate(report.decomposition.terms):
                path = outdir / f"block_{i:04d}.gfn"
                write_gridfn(term.block, path)
                index.append({"cube": _cube_dict(term.cube),
                              "coefficient": term.coefficient,
                              "file": path.name})
            (outdir / "decomposition.json").write_text(
                json.dumps(index, sort_keys=True, indent=2) + "\n")
            payload["exported"] = str(outdir)
    _emit(payload, _resolved(args, "out", None))
    return 0


def _cmd_suite(args) -> int:
    pvec = args.p if args.p is not None else (2.0,) * args.dim
    out_dir = _resolved(args, "out", None)
    cfg = SuiteConfig(
        suite=args.name, dim=args.dim, sizes=args.sizes, p0=args.p0, p=pvec,
        q0=args.q0, q=args.q, alpha=args.alpha, r=args.r, family=args.family,
        seed=_resolved(args, "seed", 7),
        count=args.count, tol=args.tol, max_iters=args.max_iters,
        ascent_iters=args.ascent_iters,
        threads=_resolved(args, "threads", 1), out_dir=out_dir,
    )
    report = run_suite(cfg)
    for check in report.checks:
        status = "pass" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: measured={check['measured']:.3e} "
              f"threshold={check['threshold']:.3e}")
    if out_dir:
        outdir = Path(out_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / f"report-{args.name}.json").write_text(report.to_json() + "\n")
        print(f"report written to {outdir / f'report-{args.name}.json'}")
    return 0 if report.passed else 1


def _cmd_plotdata(args) -> int:
    raw = json.loads(Path(args.report).read_text())
    from .lab import SuiteReport

    report = SuiteReport(raw["suite"], raw["env"], raw["checks"], raw["series"])
    csv = emit_plotdata(report, args.series)
    out_path = _resolved(args, "out", None)
    if out_path:
        Path(out_path).write_text(csv)
    else:
        sys.stdout.write(csv)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "norm": _cmd_norm,
    "op": _cmd_op,
    "dual": _cmd_dual,
    "suite": _cmd_suite,
    "plotdata": _cmd_plotdata,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
