"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Tolerances are pinned here, not in helper config. Run with ``pytest -s``
to see the per-criterion lines.
"""

import json
import math

import numpy as np

from mixedlab import (
    ExponentTuple,
    GridCube,
    GridFunction,
    KernelSpec,
    SolverParams,
    block_norm_upper,
    bmo_norm,
    bmo_probe,
    commutator,
    duality_gap,
    enumerate_cubes,
    frac_integral,
    fractional_target,
    generate,
    indicator,
    maximal,
    maximal_block_image,
    mean_oscillation,
    mixed_norm,
    morrey_norm,
    pairing,
    read_gridfn,
    run_suite,
    sharp_bound_constant,
    write_gridfn,
)
from mixedlab.lab import SuiteConfig
from mixedlab.operators import _mode_coefficients


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    assert passed, f"{criterion}: {detail}"


def test_criterion_1_indicator_identities():
    cases = [
        ((32,), ExponentTuple(3.0, (2.0,)),
         SolverParams(max_iters=400, check_every=25, ascent_iters=30, ascent_starts=2)),
        ((16, 16), ExponentTuple(2.5, (2.0, 3.0)),
         SolverParams(max_iters=40, check_every=10, ascent_iters=20, ascent_starts=2)),
    ]
    worst_m = worst_gap = worst_prod = 0.0
    for shape, exps, params in cases:
        geo = GridFunction.unit_box(shape)
        fam = enumerate_cubes(shape, "dyadic")
        for q in fam.cubes:
            chi = indicator(geo, q)
            vol = q.volume(geo.spacing)
            mval, _ = morrey_norm(chi, exps, fam)
            want_m = vol ** (1.0 / exps.p0)
            worst_m = max(worst_m, abs(mval - want_m) / want_m)
            rep = duality_gap(chi, exps, fam, params)
            anchor = vol ** (1.0 - 1.0 / exps.p0)
            worst_gap = max(worst_gap, abs(rep.upper - anchor) / anchor,
                            rep.gap / anchor)
            worst_prod = max(worst_prod, abs(mval * rep.upper - vol) / vol)
    passed = worst_m <= 1e-12 and worst_gap <= 1e-6 and worst_prod <= 1e-6
    _report("criterion 1 (indicator identities)", passed,
            f"morrey err {worst_m:.2e} (<=1e-12), gap {worst_gap:.2e} (<=1e-6), "
            f"volume product err {worst_prod:.2e} (<=1e-6)")


def test_criterion_2_kothe_duality():
    exps = ExponentTuple(3.0, (2.0,))
    default = SolverParams()
    oracle = SolverParams.oracle()
    worst_weak = -math.inf
    worst_default = worst_oracle = 0.0
    for n in (8, 16):
        geo = GridFunction.unit_box((n,))
        fam = enumerate_cubes((n,), "dyadic")
        for i in range(50):
            f = generate("random-sign-cells", 1000 + i, geo)
            rep = duality_gap(f, exps, fam, default)
            worst_weak = max(worst_weak, rep.lower - rep.upper)
            worst_default = max(worst_default, rep.gap / rep.upper)
            rep_o = duality_gap(f, exps, fam, oracle)
            worst_oracle = max(worst_oracle, rep_o.gap / rep_o.upper)
    passed = worst_weak <= 1e-9 and worst_default <= 0.02 and worst_oracle <= 0.001
    _report("criterion 2 (Koethe duality)", passed,
            f"weak slack {worst_weak:.2e} (<=1e-9), default gap {worst_default:.2e} "
            f"(<=2e-2), oracle gap {worst_oracle:.2e} (<=1e-3)")


def test_criterion_3_fatou():
    exps = ExponentTuple(3.0, (2.0,))
    params = SolverParams()
    n = 16
    geo = GridFunction.unit_box((n,))
    fam = enumerate_cubes((n,), "dyadic")
    steps = 6
    worst_drop = -math.inf
    worst_limit = 0.0
    for i in range(10):
        f = generate("smooth-bump-sum", 300 + i, geo)
        f = f.with_values(np.abs(f.values) + 0.01)
        full, _ = block_norm_upper(f, exps, fam, params)
        top = float(f.values.max())
        vals = []
        for j in range(1, steps + 1):
            side = min(n, max(2, 2 * int(math.ceil(n * j / (2 * steps)))))
            start = ((n - side) // 2,)
            fk = f if j == steps else None
            if j == steps:
                vk = full
            else:
                trunc = np.zeros(n)
                sl = slice(start[0], start[0] + side)
                trunc[sl] = np.minimum(f.values[sl], top * j / steps)
                vk, _ = block_norm_upper(f.with_values(trunc), exps, fam, params)
            vals.append(vk)
        drops = [vals[j] - vals[j + 1] for j in range(len(vals) - 1)]
        worst_drop = max(worst_drop, max(drops) / full)
        worst_limit = max(worst_limit, abs(vals[-1] - full) / full)
    passed = worst_drop <= 1e-6 and worst_limit <= 0.01
    _report("criterion 3 (Fatou truncation)", passed,
            f"worst monotonicity drop {worst_drop:.2e} (<=1e-6 rel), "
            f"limit error {worst_limit:.2e} (<=1e-2)")


def test_criterion_4_adjointness():
    worst_adj = worst_anti = 0.0
    for shape, alpha in [((256,), 0.5), ((32, 32), 1.0)]:
        geo = GridFunction.unit_box(shape)
        spec = KernelSpec(alpha, "direct")
        rng = np.random.default_rng(42)
        for _ in range(20):
            f = geo.with_values(rng.standard_normal(shape))
            g = geo.with_values(rng.standard_normal(shape))
            b = geo.with_values(rng.standard_normal(shape))
            lhs = pairing(f, frac_integral(g, spec))
            rhs = pairing(g, frac_integral(f, spec))
            worst_adj = max(worst_adj, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
            a1 = pairing(f, commutator(b, g, spec))
            a2 = pairing(g, commutator(b, f, spec))
            worst_anti = max(worst_anti, abs(a1 + a2) / max(abs(a1), abs(a2), 1e-300))
    passed = worst_adj <= 1e-10 and worst_anti <= 1e-10
    _report("criterion 4 (adjointness)", passed,
            f"adjoint residual {worst_adj:.2e}, antisymmetry residual "
            f"{worst_anti:.2e} (both <=1e-10)")


def test_criterion_5_fractional_accuracy():
    errs = {}
    for n in (128, 256, 512, 1024):
        geo = GridFunction.zeros((n,), 1.0 / n)
        f = geo.with_values(np.ones(n))
        out = frac_integral(f, KernelSpec(0.5, "direct", diagonal="analytic"))
        x = geo.centers(0)
        exact = 2.0 * (np.sqrt(x) + np.sqrt(1.0 - x))
        errs[n] = float(np.max(np.abs(out.values - exact) / exact))
    monotone = all(errs[a] > errs[b] for a, b in [(128, 256), (256, 512), (512, 1024)])
    passed = errs[1024] <= 0.02 and monotone
    _report("criterion 5 (fractional accuracy)", passed,
            f"errors {json.dumps(errs)}: N=1024 err {errs[1024]:.4f} (<=0.02), "
            f"monotone decreasing={monotone}")


def test_criterion_6_maximal():
    exps = ExponentTuple(3.0, (2.0,))
    conj = exps.conjugate()
    params = SolverParams()
    rng = np.random.default_rng(77)
    worst_agree = 0.0
    dyadic_ok = True
    decay_ok = True
    cemps = {}
    for n in (64, 128):
        geo = GridFunction.unit_box((n,))
        fam = enumerate_cubes((n,), "all")
        probe = geo.with_values(rng.standard_normal(n))
        fast = maximal(probe, fam, "summed-area")
        slow = maximal(probe, fam, "brute")
        worst_agree = max(worst_agree, float(np.max(np.abs(fast.values - slow.values))))
        dy = maximal(probe, method="dyadic")
        dyadic_ok &= bool(np.all(dy.values <= fast.values + 1e-12))
        cemp = 0.0
        for i in range(10):
            profile = generate("smooth-bump-sum", 500 + i, geo)
            side = n // 8
            start = (int((0.25 + 0.04 * i) * n),)
            cube = GridCube(start, side)
            vals = np.zeros(n)
            sl = cube.slices()[0]
            vals[sl] = np.abs(profile.values[sl]) + 0.1
            blk = geo.with_values(vals)
            bound = cube.volume(geo.spacing) ** exps.morrey_exponent
            blk = blk.with_values(blk.values * (bound / mixed_norm(blk, conj.p)))
            ann = maximal_block_image(blk, exps, fam)
            for k, nor in enumerate(ann.normalized):
                if nor > 4.0 * 2.0 ** (-k / exps.p0) + 1e-12:
                    decay_ok = False
            mb = maximal(blk, fam)
            ub, _ = block_norm_upper(mb, exps, enumerate_cubes((n,), "dyadic"), params)
            cemp = max(cemp, ub)
        cemps[n] = cemp
    stable = max(cemps.values()) / min(cemps.values()) <= 2.0
    passed = worst_agree <= 1e-12 and dyadic_ok and decay_ok and stable
    _report("criterion 6 (maximal function)", passed,
            f"method dev {worst_agree:.2e} (<=1e-12), dyadic<=all {dyadic_ok}, "
            f"annular decay within 4*2^(-k/p0) {decay_ok}, C_emp {cemps} "
            f"stable x2 {stable}")


def test_criterion_7_hoelder():
    tuples = [
        ExponentTuple(3.0, (2.0,)),
        ExponentTuple(2.0, (1.5,)),
        ExponentTuple(5.0, (4.0,)),
        ExponentTuple(2.5, (1.7, 3.0)),
        ExponentTuple(3.0, (2.0, 2.0)),
    ]
    violations = 0
    total = 0
    for exps in tuples:
        shape = (64,) if exps.dim == 1 else (16, 16)
        geo = GridFunction.unit_box(shape)
        rng = np.random.default_rng(11 + exps.dim)
        conj = exps.conjugate()
        for _ in range(200):
            f = geo.with_values(rng.standard_normal(shape))
            g = geo.with_values(rng.standard_normal(shape))
            lhs = pairing(f, g, absolute=True)
            rhs = mixed_norm(f, exps.p) * mixed_norm(g, conj.p)
            total += 1
            if lhs > rhs * (1.0 + 1e-12):
                violations += 1
    passed = violations == 0 and total == 1000
    _report("criterion 7 (Hoelder pairing)", passed,
            f"{violations} violations in {total} pairs (need 0 of 1000)")


def test_criterion_8_sharp_bound():
    alpha, r = 0.25, 2.0
    consts = {}
    for n in (64, 128, 256):
        geo = GridFunction.unit_box((n,))
        fam = enumerate_cubes((n,), "all")
        worst = 0.0
        for i in range(5):
            b = generate("two-level", 800 + i, geo)
            f = generate("smooth-bump-sum", 900 + i, geo)
            worst = max(worst, sharp_bound_constant(b, f, alpha, r, fam))
        consts[n] = worst
    finite = all(math.isfinite(c) and c > 0 for c in consts.values())
    stable = max(consts.values()) / min(consts.values()) <= 2.0
    passed = finite and stable
    _report("criterion 8 (pointwise sharp bound)", passed,
            f"constants {consts}: finite={finite}, stable x2={stable}")


def test_criterion_9_commutator_characterization():
    p_exps = ExponentTuple(3.0, (2.0,))
    alpha = 0.25
    q_exps = fractional_target(p_exps, alpha)
    spec = KernelSpec(alpha, "direct")

    ratios = {}
    for n in (64, 128):
        geo = GridFunction.unit_box((n,))
        fam = enumerate_cubes((n,), "all")
        b = generate("log-like", 4, geo)
        bmo = bmo_norm(b, fam)[0]
        worst = 0.0
        for i in range(6):
            f = generate("smooth-bump-sum", 600 + i, geo)
            num = morrey_norm(commutator(b, f, spec), q_exps, fam)[0]
            den = bmo * morrey_norm(f, p_exps, fam)[0]
            worst = max(worst, num / den)
        ratios[n] = worst
    forward_stable = max(ratios.values()) / min(ratios.values()) <= 2.0

    # reverse direction: probe reconstruction and the final-display bound
    n = 64
    geo = GridFunction.unit_box((n,))
    side = 8
    cube = GridCube((8,), side)
    z0 = (16,)
    ref = GridCube((24,), side)
    t = side * geo.spacing
    fam_dyadic = enumerate_cubes((n,), "dyadic")
    chi_q = indicator(geo, cube)
    block_chi, _ = block_norm_upper(chi_q, q_exps, fam_dyadic, SolverParams())
    fam_all = enumerate_cubes((n,), "all")
    recon_ok = True
    display_ok = True
    n_modes = 12
    coeff = _mode_coefficients(1, alpha, (z0[0] / side,), 4096)
    mesh = geo.center_mesh()
    mask_ref = indicator(geo, ref).values
    for i in range(5):
        b = generate("two-level", 700 + i, geo)
        direct = mean_oscillation(b, cube, ref)
        lower, resid = bmo_probe(b, cube, z0, alpha, n_modes)
        recon_ok &= abs(lower - direct) <= resid + 1e-12
        # final display: oscillation bounded through the mode pairings
        total = 0.0
        sum_am = 0.0
        t_emp = 0.0
        for m in range(-n_modes, n_modes + 1):
            phase = 2.0 * np.pi * m * mesh[0] / (t * 4.0)
            emode = np.exp(1j * phase)
            src_re = geo.with_values((emode.real * mask_ref))
            src_im = geo.with_values((emode.imag * mask_ref))
            u_re = commutator(b, src_re, spec)
            u_im = commutator(b, src_im, spec)
            bound_m = (morrey_norm(u_re, q_exps, fam_all)[0]
                       + morrey_norm(u_im, q_exps, fam_all)[0])
            am = abs(coeff[m % 4096])
            total += am * bound_m * block_chi
            sum_am += am
            t_emp = max(t_emp, bound_m / t ** (1.0 / p_exps.p0))
        bound = t ** (-1.0 - alpha) * total + resid
        display_ok &= lower <= bound + 1e-12
    passed = forward_stable and recon_ok and display_ok
    _report("criterion 9 (commutator characterization)", passed,
            f"forward ratios {ratios} stable x2={forward_stable}, probe "
            f"reconstruction within residual={recon_ok}, final-display bound "
            f"holds={display_ok}")


def test_criterion_10_determinism_io(tmp_path):
    cfgs = [
        dict(suite="duality", sizes=(8,), count=3, seed=5,
             max_iters=2000, ascent_iters=40),
        dict(suite="maximal", sizes=(32,), count=2, seed=5),
    ]
    identical = True
    for kw in cfgs:
        a = run_suite(SuiteConfig(**kw)).to_json()
        b = run_suite(SuiteConfig(**kw)).to_json()
        identical &= a == b
    rng = np.random.default_rng(123)
    f = GridFunction((8, 8), (0.25, -1.5), 0.125, rng.standard_normal((8, 8)))
    path = tmp_path / "roundtrip.gfn"
    write_gridfn(f, path)
    g = read_gridfn(path)
    bit_exact = (g.values.tobytes() == f.values.tobytes()
                 and g.shape == f.shape and g.origin == f.origin
                 and g.spacing == f.spacing)
    passed = identical and bit_exact
    _report("criterion 10 (determinism and IO)", passed,
            f"byte-identical reports={identical}, bit-exact round trip={bit_exact}")
