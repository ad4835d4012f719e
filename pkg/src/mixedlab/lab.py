"""Test-function generators, property-suite runner, and report emission."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .duality import SolverParams, block_norm_upper, duality_gap, truncate
from .grid import GridCube, GridFunction, enumerate_cubes, indicator
from .norms import (
    ExponentTuple,
    bmo_norm,
    default_family,
    mean_oscillation,
    mixed_norm,
    morrey_norm,
    pairing,
)
from .operators import (
    KernelSpec,
    bmo_probe,
    commutator,
    frac_integral,
    maximal,
    maximal_block_image,
    sharp_bound_constant,
)

_KINDS = ("indicator", "two-level", "smooth-bump-sum", "random-sign-cells", "log-like")


def fractional_target(exponents: ExponentTuple, alpha: float) -> ExponentTuple:
    """Target exponents for the fractional-order mapping with the uniform
    shift 1/q_i = 1/p_i - alpha/n (so both defining relations hold)."""
    n = exponents.dim
    inv_q0 = 1.0 / exponents.p0 - alpha / n
    if inv_q0 <= 0:
        raise ValueError(f"alpha too large for p0={exponents.p0}")
    q = []
    for pi in exponents.p:
        inv = 1.0 / pi - alpha / n
        if inv <= 0:
            raise ValueError(f"alpha too large for inner exponent {pi}")
        q.append(1.0 / inv)
    target = ExponentTuple(1.0 / inv_q0, tuple(q))
    exponents.check_fractional_relation(target, alpha)
    return target


def generate(kind: str, seed: int, geometry: GridFunction,
             cube: GridCube | None = None) -> GridFunction:
    """Deterministic test functions on the geometry of ``geometry``.

    Kinds: ``indicator`` (a cube's characteristic function; random dyadic
    cube unless one is given), ``two-level`` (two values split along a
    random axis), ``smooth-bump-sum`` (up to five Gaussians, physical
    coordinates, so one seed gives the same function at every resolution),
    ``random-sign-cells`` (iid signed cell values), ``log-like``
    (truncated -log distance profile).
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown generator kind {kind!r}")
    rng = np.random.default_rng(seed)
    shape = geometry.shape
    dim = geometry.dim
    h = geometry.spacing

    if kind == "indicator":
        if cube is None:
            kmax = int(math.log2(min(shape)))
            side = 2 ** int(rng.integers(0, kmax))
            start = tuple(int(rng.integers(0, n - side + 1)) for n in shape)
            cube = GridCube(start, side)
        return indicator(geometry, cube)

    if kind == "two-level":
        axis = int(rng.integers(0, dim))
        frac = rng.uniform(0.25, 0.75)
        split = max(1, min(shape[axis] - 1, int(round(frac * shape[axis]))))
        lo, hi = sorted(rng.uniform(-2.0, 2.0, size=2))
        v = np.full(shape, lo)
        sel = [slice(None)] * dim
        sel[axis] = slice(split, None)
        v[tuple(sel)] = hi
        return geometry.with_values(v)

    if kind == "smooth-bump-sum":
        mesh = geometry.center_mesh()
        extent = [n * h for n in shape]
        v = np.zeros(shape)
        for _ in range(int(rng.integers(1, 6))):
            center = [geometry.origin[i] + rng.uniform(0.1, 0.9) * extent[i]
                      for i in range(dim)]
            width = rng.uniform(0.05, 0.25) * min(extent)
            amp = rng.uniform(0.2, 1.0) * rng.choice([-1.0, 1.0])
            r2 = sum((mesh[i] - center[i]) ** 2 for i in range(dim))
            v += amp * np.exp(-r2 / (2.0 * width**2))
        return geometry.with_values(v)

    if kind == "random-sign-cells":
        v = rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.5, 1.5, size=shape)
        return geometry.with_values(v)

    # log-like
    mesh = geometry.center_mesh()
    extent = [n * h for n in shape]
    center = [geometry.origin[i] + rng.uniform(0.3, 0.7) * extent[i] for i in range(dim)]
    r = np.sqrt(sum((mesh[i] - center[i]) ** 2 for i in range(dim)))
    r = np.maximum(r, h / 2.0)
    diam = math.sqrt(sum(x**2 for x in extent))
    return geometry.with_values(np.maximum(-np.log(r / diam), 0.0))


#: Default per-property check thresholds; a SuiteConfig can override any of
#: them, so no suite hard-codes a tolerance.
DEFAULT_THRESHOLDS = {
    "indicator-morrey-value": 1e-12,
    "indicator-block-duality": 1e-6,
    "indicator-volume-identity": 1e-6,
    "kothe-weak-duality": 1e-9,
    "kothe-duality-gap": 0.02,
    "fatou-monotone-norms": 0.02,
    "fatou-limit-value": 0.01,
    "adjoint-identity": 1e-10,
    "commutator-antisymmetry": 1e-10,
    "fractional-integral-accuracy": 0.02,
    "fractional-error-decreasing": 0.0,
    "maximal-method-agreement": 1e-12,
    "maximal-family-monotonicity": 1e-12,
    "annular-decay": 4.0,
    "maximal-block-boundedness": 100.0,
    "hoelder-inequality": 0.0,
    "sharp-commutator-bound": 1e6,
    "sharp-commutator-stability": 2.0,
    "commutator-boundedness": 1e6,
    "commutator-boundedness-stability": 2.0,
    "oscillation-reconstruction": 1e-9,
}


@dataclass
class SuiteConfig:
    """One suite run: what to check, at which sizes, with which budgets.

    The seed fully determines every generated input; fractional suites
    validate the exponent relations before anything runs. Check thresholds
    default to :data:`DEFAULT_THRESHOLDS` and can be overridden per
    property id.
    """

    suite: str
    dim: int = 1
    sizes: tuple[int, ...] = (16,)
    p0: float = 3.0
    p: tuple[float, ...] = (2.0,)
    q0: float | None = None
    q: tuple[float, ...] | None = None
    alpha: float | None = None
    r: float = 2.0
    family: str = "dyadic"
    seed: int = 7
    count: int = 6
    tol: float = 1e-8
    max_iters: int = 20000
    ascent_iters: int = 120
    threads: int = 1
    out_dir: str | None = None
    thresholds: dict = field(default_factory=dict)

    _FRACTIONAL = ("sharp-commutator", "commutator-ratio", "bmo-probe")

    def __post_init__(self):
        self.sizes = tuple(int(n) for n in self.sizes)
        self.p = tuple(float(x) for x in self.p)
        if len(self.p) != self.dim:
            raise ValueError(f"p has length {len(self.p)}, dim is {self.dim}")
        if self.q is not None:
            self.q = tuple(float(x) for x in self.q)

    def threshold(self, prop: str) -> float:
        if prop in self.thresholds:
            return float(self.thresholds[prop])
        return DEFAULT_THRESHOLDS[prop]

    def exponents(self) -> ExponentTuple:
        return ExponentTuple(self.p0, self.p)

    def target_exponents(self) -> ExponentTuple:
        """Explicit (q0, q) when configured (validated against the exponent
        relations), else the uniform-shift derivation."""
        if self.alpha is None:
            raise ValueError(f"suite {self.suite!r} needs --alpha")
        if (self.q0 is None) != (self.q is None):
            raise ValueError("give both q0 and q, or neither")
        if self.q0 is not None:
            target = ExponentTuple(self.q0, self.q)
            self.exponents().check_fractional_relation(target, self.alpha)
            return target
        return fractional_target(self.exponents(), self.alpha)

    def solver_params(self) -> SolverParams:
        return SolverParams(tol=self.tol, max_iters=self.max_iters,
                            ascent_iters=self.ascent_iters)

    def validate(self) -> None:
        self.exponents().require_admissible()
        if self.suite in self._FRACTIONAL:
            self.target_exponents()  # raises naming the violated relation

    def repro_command(self) -> str:
        parts = [
            "mixedlab", "suite", "--name", self.suite,
            "--dim", str(self.dim),
            "--sizes", ",".join(str(n) for n in self.sizes),
            "--p0", str(self.p0), "--p", ",".join(str(x) for x in self.p),
            "--family", self.family, "--seed", str(self.seed),
            "--count", str(self.count), "--tol", str(self.tol),
        ]
        if self.alpha is not None:
            parts += ["--alpha", str(self.alpha)]
        return " ".join(parts)


@dataclass
class SuiteReport:
    suite: str
    env: dict
    checks: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            return x

        payload = {
            "suite": self.suite,
            "env": clean(self.env),
            "checks": clean(self.checks),
            "series": clean(self.series),
            "passed": self.passed,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _hash_inputs(*arrays) -> str:
    digest = hashlib.sha256()
    for a in arrays:
        a = np.asarray(a)
        digest.update(str(a.shape).encode())
        digest.update(a.tobytes())
    return digest.hexdigest()[:16]


class _Recorder:
    def __init__(self, cfg: SuiteConfig):
        self.cfg = cfg
        self.checks: list[dict] = []
        self.series: dict = {}

    def add(self, name, prop, measured, inputs_hash="", passed=None):
        # thresholds come from the config, never from the check itself
        threshold = self.cfg.threshold(prop)
        if passed is None:
            passed = math.isfinite(measured) and measured <= threshold
        rec = {
            "name": name,
            "property": prop,
            "inputs_hash": inputs_hash,
            "measured": float(measured),
            "threshold": float(threshold),
            "passed": bool(passed),
        }
        if not passed:
            rec["repro"] = self.cfg.repro_command()
        self.checks.append(rec)

    def add_series(self, name, columns, rows):
        self.series[name] = {"columns": list(columns), "rows": [list(r) for r in rows]}


def _geometry(cfg: SuiteConfig, n: int) -> GridFunction:
    return GridFunction.zeros((n,) * cfg.dim, 1.0 / n)


def _suite_chi_q(cfg: SuiteConfig, rec: _Recorder):
    exps = cfg.exponents()
    params = cfg.solver_params()
    for n in cfg.sizes:
        geo = _geometry(cfg, n)
        fam = enumerate_cubes(geo.shape, cfg.family)
        for c in enumerate_cubes(geo.shape, "dyadic").cubes:
            chi = indicator(geo, c)
            vol = c.volume(geo.spacing)
            mval, arg = morrey_norm(chi, exps, fam)
            expect = vol ** (1.0 / exps.p0)
            rec.add(f"morrey-chi N={n} side={c.side} start={c.start}",
                    "indicator-morrey-value",
                    abs(mval - expect) / expect, _hash_inputs(chi.values))
            rep = duality_gap(chi, exps, fam, params)
            anchor = vol ** (1.0 - 1.0 / exps.p0)
            rec.add(f"block-chi N={n} side={c.side} start={c.start}",
                    "indicator-block-duality",
                    max(abs(rep.upper - anchor), rep.gap) / anchor,
                    _hash_inputs(chi.values))
            prod = mval * rep.upper
            rec.add(f"volume-product N={n} side={c.side} start={c.start}",
                    "indicator-volume-identity", abs(prod - vol) / vol)


def _suite_duality(cfg: SuiteConfig, rec: _Recorder):
    exps = cfg.exponents()
    params = cfg.solver_params()
    for n in cfg.sizes:
        geo = _geometry(cfg, n)
        fam = enumerate_cubes(geo.shape, cfg.family)
        for i in range(cfg.count):
            f = generate("random-sign-cells", cfg.seed + i, geo)
            rep = duality_gap(f, exps, fam, params)
            rec.add(f"weak-duality N={n} #{i}", "kothe-weak-duality",
                    (rep.lower - rep.upper) / max(1.0, rep.upper),
                    _hash_inputs(f.values))
            rec.add(f"strong-duality N={n} #{i}", "kothe-duality-gap",
                    rep.gap / max(rep.upper, 1e-300), _hash_inputs(f.values))
            if rep.trace is not None and i == 0:
                rec.add_series(f"duality-gap-N{n}",
                               ["iteration", "lower", "upper"],
                               [[int(t[0]), t[2], t[1]] for t in rep.trace])


def _suite_fatou(cfg: SuiteConfig, rec: _Recorder):
    exps = cfg.exponents()
    params = cfg.solver_params()
    n = cfg.sizes[0]
    geo = _geometry(cfg, n)
    fam = enumerate_cubes(geo.shape, cfg.family)
    steps = 6
    for i in range(cfg.count):
        f = generate("smooth-bump-sum", cfg.seed + i, geo)
        f = f.with_values(np.abs(f.values))
        full, _ = block_norm_upper(f, exps, fam, params)
        top = float(f.values.max())
        box = geo.box_cube()
        rows = []
        values = []
        for j in range(1, steps + 1):
            k = top * j / steps
            side = max(2, int(round(n * j / steps)))
            side = min(side, n)
            start = tuple((n - side) // 2 for _ in range(cfg.dim))
            fk = truncate(f, k, GridCube(start, side))
            vk, _ = block_norm_upper(fk, exps, fam, params)
            values.append(vk)
            rows.append([j, k, vk])
        rec.add_series(f"fatou-{i}", ["step", "level", "block_norm"], rows)
        worst_drop = max(
            (values[j] - values[j + 1]) / max(full, 1e-300)
            for j in range(len(values) - 1)
        )
        rec.add(f"fatou-monotone #{i}", "fatou-monotone-norms", worst_drop,
                _hash_inputs(f.values))
        rec.add(f"fatou-limit #{i}", "fatou-limit-value",
                abs(values[-1] - full) / max(full, 1e-300))
        # normalized variant: scale so the untruncated norm is 1
        if full > 0:
            scale = 1.0 / full
            rows_n = [[r[0], r[1] * scale, r[2] * scale] for r in rows]
            rec.add_series(f"fatou-normalized-{i}",
                           ["step", "level", "block_norm"], rows_n)


def _suite_adjoint(cfg: SuiteConfig, rec: _Recorder):
    alpha = cfg.alpha if cfg.alpha is not None else 0.5 * cfg.dim
    spec = KernelSpec(alpha, "direct")
    for n in cfg.sizes:
        geo = _geometry(cfg, n)
        for i in range(cfg.count):
            f = generate("smooth-bump-sum", cfg.seed + 2 * i, geo)
            g = generate("smooth-bump-sum", cfg.seed + 2 * i + 1, geo)
            b = generate("two-level", cfg.seed + 31 + i, geo)
            lhs = pairing(f, frac_integral(g, spec))
            rhs = pairing(g, frac_integral(f, spec))
            scale = max(abs(lhs), abs(rhs), 1e-300)
            rec.add(f"adjoint N={n} #{i}", "adjoint-identity",
                    abs(lhs - rhs) / scale, _hash_inputs(f.values, g.values))
            a1 = pairing(f, commutator(b, g, spec))
            a2 = pairing(g, commutator(b, f, spec))
            scale = max(abs(a1), abs(a2), 1e-300)
            rec.add(f"antisymmetry N={n} #{i}", "commutator-antisymmetry",
                    abs(a1 + a2) / scale,
                    _hash_inputs(f.values, g.values, b.values))


def _suite_frac_accuracy(cfg: SuiteConfig, rec: _Recorder):
    rows = []
    prev = None
    for n in sorted(cfg.sizes):
        geo = GridFunction.zeros((n,), 1.0 / n)
        f = geo.with_values(np.ones(n))
        out = frac_integral(f, KernelSpec(0.5, "direct"))
        x = geo.centers(0)
        exact = 2.0 * (np.sqrt(x) + np.sqrt(1.0 - x))
        err = float(np.max(np.abs(out.values - exact) / exact))
        rows.append([n, err])
        rec.add(f"frac-closed-form N={n}", "fractional-integral-accuracy", err)
        if prev is not None:
            rec.add(f"frac-monotone N={n}", "fractional-error-decreasing",
                    err - prev, passed=err < prev)
        prev = err
    rec.add_series("frac-error", ["n", "max_rel_error"], rows)


def _suite_maximal(cfg: SuiteConfig, rec: _Recorder):
    exps = cfg.exponents()
    conj = exps.conjugate()
    params = cfg.solver_params()
    for n in cfg.sizes:
        geo = _geometry(cfg, n)
        fam = default_family(geo.shape)
        f = generate("smooth-bump-sum", cfg.seed, geo)
        fast = maximal(f, fam, "summed-area")
        slow = maximal(f, fam, "brute")
        rec.add(f"methods-agree N={n}", "maximal-method-agreement",
                float(np.max(np.abs(fast.values - slow.values))),
                _hash_inputs(f.values))
        dy = maximal(f, method="dyadic")
        allm = maximal(f, enumerate_cubes(geo.shape, "all"), "summed-area") \
            if fam.kind != "all" else fast
        rec.add(f"dyadic-below-all N={n}", "maximal-family-monotonicity",
                float(np.max(dy.values - allm.values)))
        # normalized block, annular decay
        e = exps.morrey_exponent
        side = max(2, n // 8)
        start = tuple((n - side) // 2 for _ in range(cfg.dim))
        cube = GridCube(start, side)
        raw = generate("smooth-bump-sum", cfg.seed + 1, geo)
        blk = np.zeros(geo.shape)
        blk[cube.slices()] = np.abs(raw.values[cube.slices()]) + 0.1
        bfn = geo.with_values(blk)
        bound = cube.volume(geo.spacing) ** e
        bfn = bfn.with_values(bfn.values * (bound / mixed_norm(bfn, conj.p)))
        ann = maximal_block_image(bfn, exps, fam)
        envelope = max(
            nor / 2.0 ** (-cfg.dim * k / exps.p0)
            for k, nor in enumerate(ann.normalized)
        )
        rec.add(f"annular-decay N={n}", "annular-decay", envelope,
                _hash_inputs(bfn.values))
        rec.add_series(
            f"annular-decay-N{n}", ["k", "normalized_norm", "reference"],
            [[k, nor, 4.0 * 2.0 ** (-cfg.dim * k / exps.p0)]
             for k, nor in enumerate(ann.normalized)],
        )
        ub, _ = block_norm_upper(maximal(bfn, fam), exps, fam, params)
        rec.add(f"maximal-block-bound N={n}", "maximal-block-boundedness", ub)


def _suite_hoelder(cfg: SuiteConfig, rec: _Recorder):
    exps = cfg.exponents()
    conj = exps.conjugate()
    n = cfg.sizes[0]
    geo = _geometry(cfg, n)
    worst = -math.inf
    for i in range(cfg.count):
        f = generate("random-sign-cells", cfg.seed + 2 * i, geo)
        g = generate("smooth-bump-sum", cfg.seed + 2 * i + 1, geo)
        lhs = pairing(f, g, absolute=True)
        rhs = mixed_norm(f, exps.p) * mixed_norm(g, conj.p)
        worst = max(worst, lhs - rhs * (1.0 + 1e-12))
    rec.add("hoelder-pairing", "hoelder-inequality", worst)


def _suite_sharp_commutator(cfg: SuiteConfig, rec: _Recorder):
    alpha = cfg.alpha if cfg.alpha is not None else 0.25
    consts = []
    for n in cfg.sizes:
        geo = _geometry(cfg, n)
        fam = default_family(geo.shape)
        vals = []
        for i in range(cfg.count):
            b = generate("two-level", cfg.seed + i, geo)
            f = generate("smooth-bump-sum", cfg.seed + 100 + i, geo)
            vals.append(sharp_bound_constant(b, f, alpha, cfg.r, fam))
        consts.append(max(vals))
        rec.add(f"sharp-bound-finite N={n}", "sharp-commutator-bound", consts[-1])
    if len(consts) >= 2:
        rec.add("sharp-bound-stable", "sharp-commutator-stability",
                max(consts) / max(min(consts), 1e-300))
    rec.add_series("sharp-constants", ["n", "constant"],
                   [[n, c] for n, c in zip(cfg.sizes, consts)])


def _suite_commutator_ratio(cfg: SuiteConfig, rec: _Recorder):
    exps = cfg.exponents()
    target = cfg.target_exponents()
    alpha = cfg.alpha
    spec = KernelSpec(alpha, "direct")
    ratios_by_n = []
    for n in cfg.sizes:
        geo = _geometry(cfg, n)
        fam = default_family(geo.shape)
        b = generate("log-like", cfg.seed, geo)
        vals = []
        for i in range(cfg.count):
            f = generate("smooth-bump-sum", cfg.seed + i, geo)
            num = morrey_norm(commutator(b, f, spec), target, fam)[0]
            den = bmo_norm(b, fam)[0] * morrey_norm(f, exps, fam)[0]
            vals.append(num / den)
        ratios_by_n.append(max(vals))
        rec.add(f"forward-ratio N={n}", "commutator-boundedness", ratios_by_n[-1])
    if len(ratios_by_n) >= 2:
        rec.add("forward-ratio-stable", "commutator-boundedness-stability",
                max(ratios_by_n) / max(min(ratios_by_n), 1e-300))


def _suite_bmo_probe(cfg: SuiteConfig, rec: _Recorder):
    alpha = cfg.alpha if cfg.alpha is not None else 0.25
    n = cfg.sizes[0]
    geo = _geometry(cfg, n)
    side = max(2, n // 8)
    cube = GridCube((n // 8,) * cfg.dim, side)
    z0 = (2 * side,) + (0,) * (cfg.dim - 1)
    for i in range(cfg.count):
        b = generate("two-level", cfg.seed + i, geo)
        ref = GridCube(tuple(a + d for a, d in zip(cube.start, z0)), side)
        direct = mean_oscillation(b, cube, ref)
        lower, resid = bmo_probe(b, cube, z0, alpha, n_modes=min(12, 2 * side))
        rec.add(f"probe-reconstruction #{i}", "oscillation-reconstruction",
                abs(lower - direct) - resid, _hash_inputs(b.values))


_SUITES = {
    "chi-q": _suite_chi_q,
    "duality": _suite_duality,
    "fatou": _suite_fatou,
    "adjoint": _suite_adjoint,
    "frac-accuracy": _suite_frac_accuracy,
    "maximal": _suite_maximal,
    "hoelder": _suite_hoelder,
    "sharp-commutator": _suite_sharp_commutator,
    "commutator-ratio": _suite_commutator_ratio,
    "bmo-probe": _suite_bmo_probe,
}


def suite_names() -> tuple[str, ...]:
    return tuple(_SUITES)


def run_suite(cfg: SuiteConfig) -> SuiteReport:
    """Execute one named suite; deterministic for a fixed config."""
    if cfg.suite not in _SUITES:
        raise ValueError(f"unknown suite {cfg.suite!r} (have {sorted(_SUITES)})")
    cfg.validate()
    rec = _Recorder(cfg)
    _SUITES[cfg.suite](cfg, rec)
    env = {
        "dim": cfg.dim,
        "sizes": list(cfg.sizes),
        "seed": cfg.seed,
        "family": cfg.family,
        "p0": cfg.p0,
        "p": list(cfg.p),
        "alpha": cfg.alpha,
        "count": cfg.count,
        "tol": cfg.tol,
        "max_iters": cfg.max_iters,
        "threads": cfg.threads,
    }
    return SuiteReport(cfg.suite, env, rec.checks, rec.series)


def emit_plotdata(report: SuiteReport, series: str) -> str:
    """Plot-ready CSV for one named series of a report (header row plus
    deterministic data rows; header-only when the report has no rows)."""
    if series not in report.series:
        known = sorted(report.series)
        raise ValueError(f"unknown series {series!r} (report has {known})")
    spec = report.series[series]
    lines = [",".join(spec["columns"])]
    for row in spec["rows"]:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    return "\n".join(lines) + "\n"
