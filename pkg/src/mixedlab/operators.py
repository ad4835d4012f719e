"""Maximal operators, the fractional integral, its commutator with a
multiplier, and the diagnostic constructions built from them (annular
decompositions of maximal images, pointwise sharp bounds, and the
oscillation-reconstruction probe).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import ndimage, signal

from . import _kernels
from .grid import CubeFamily, GridCube, GridFunction, enumerate_cubes, same_geometry
from .norms import (
    ExponentTuple,
    _check_coverage,
    bmo_norm,
    default_family,
    mixed_norm,
)

_MATRIX_CACHE: dict = {}
_MATRIX_CACHE_LIMIT = 4


@dataclass(frozen=True)
class KernelSpec:
    """Fractional-integral kernel |x-y|^(alpha-dim) with a rule for the
    singular diagonal cell.

    method: ``direct`` (explicit symmetric matrix) or ``fft`` (zero-padded
    convolution); both agree to near machine precision. diagonal:
    ``analytic`` (closed-form cell average, dim 1), ``quadrature``
    (tensor Gauss-Legendre cell average, dims 2-3), ``zero``, or None for
    the per-dimension default.
    """

    alpha: float
    method: str = "direct"
    diagonal: str | None = None

    def __post_init__(self):
        if self.method not in ("direct", "fft"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.diagonal not in (None, "analytic", "quadrature", "zero"):
            raise ValueError(f"unknown diagonal rule {self.diagonal!r}")

    def resolve_diagonal(self, dim: int) -> str:
        if self.diagonal is not None:
            if self.diagonal == "analytic" and dim != 1:
                raise ValueError("analytic diagonal is closed-form only in dim 1")
            return self.diagonal
        return "analytic" if dim == 1 else "quadrature"

    def validate(self, dim: int) -> None:
        if not 0.0 < self.alpha < dim:
            raise ValueError(f"alpha must lie in (0, {dim}), got {self.alpha}")


def _diagonal_value(dim: int, h: float, alpha: float, rule: str) -> float:
    if rule == "zero":
        return 0.0
    if dim == 1:
        # cell average of |z|^(alpha-1) over [-h/2, h/2]
        return h ** (alpha - 1.0) * 2.0 ** (1.0 - alpha) / alpha
    nodes, wts = leggauss(16)
    pts = [0.5 * h * nodes] * dim
    grids = np.meshgrid(*pts, indexing="ij")
    r2 = sum(g**2 for g in grids)
    wgrid = np.ones_like(r2)
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = 16
        wgrid = wgrid * (0.5 * wts).reshape(shape)
    return float((wgrid * np.sqrt(r2) ** (alpha - dim)).sum())


def _offset_kernel(shape, h: float, alpha: float, rule: str) -> np.ndarray:
    dim = len(shape)
    axes = [np.arange(-(n - 1), n, dtype=np.float64) for n in shape]
    grids = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(sum(g**2 for g in grids)) * h
    center = tuple(n - 1 for n in shape)
    r[center] = 1.0
    w = r ** (alpha - dim)
    w[center] = _diagonal_value(dim, h, alpha, rule)
    return w


def _direct_matrix(shape, h: float, alpha: float, rule: str) -> np.ndarray:
    key = (tuple(shape), float(h), float(alpha), rule)
    hit = _MATRIX_CACHE.get(key)
    if hit is not None:
        return hit
    ncells = int(np.prod(shape))
    if ncells * ncells > 1 << 26:
        raise ValueError(
            f"direct kernel matrix would need {ncells}^2 entries; use method='fft'"
        )
    w = _offset_kernel(shape, h, alpha, rule)
    idx = [np.arange(n) for n in shape]
    mesh = np.meshgrid(*idx, indexing="ij")
    flat = [g.ravel() for g in mesh]
    sel = tuple(
        flat[ax][:, None] - flat[ax][None, :] + shape[ax] - 1 for ax in range(len(shape))
    )
    mat = w[sel]
    if len(_MATRIX_CACHE) >= _MATRIX_CACHE_LIMIT:
        _MATRIX_CACHE.pop(next(iter(_MATRIX_CACHE)))
    _MATRIX_CACHE[key] = mat
    return mat


def frac_integral(f: GridFunction, spec: KernelSpec) -> GridFunction:
    """Fractional integral: convolution of ``f`` (zero outside the box) with
    the cell-centered kernel |x-y|^(alpha-dim), the diagonal cell replaced
    by its cell average per the kernel spec."""
    spec.validate(f.dim)
    rule = spec.resolve_diagonal(f.dim)
    hd = f.spacing**f.dim
    if spec.method == "direct":
        mat = _direct_matrix(f.shape, f.spacing, spec.alpha, rule)
        out = hd * (mat @ f.values.ravel())
        return f.with_values(out.reshape(f.shape))
    w = _offset_kernel(f.shape, f.spacing, spec.alpha, rule)
    out = hd * signal.fftconvolve(w, f.values, mode="valid")
    return f.with_values(out)


def commutator(b: GridFunction, f: GridFunction, spec: KernelSpec) -> GridFunction:
    """[b, I_alpha] f = b * I_alpha(f) - I_alpha(b f)."""
    if not same_geometry(b, f):
        raise ValueError("commutator requires identical grid geometry")
    lhs = b.values * frac_integral(f, spec).values
    rhs = frac_integral(f.with_values(b.values * f.values), spec).values
    return f.with_values(lhs - rhs)


# ---------------------------------------------------------------------------
# Maximal operators
# ---------------------------------------------------------------------------


def _prefix_table(a: np.ndarray) -> np.ndarray:
    # padded inclusive prefix sums in extended precision: P[i+1,...] covers a[:i+1]
    p = a.astype(np.longdouble)
    for ax in range(a.ndim):
        p = p.cumsum(axis=ax)
    out = np.zeros(tuple(n + 1 for n in a.shape), dtype=np.longdouble)
    out[(slice(1, None),) * a.ndim] = p
    return out


def _window_sums(p: np.ndarray, side: int) -> np.ndarray:
    d = p
    for ax in range(p.ndim):
        hi = [slice(None)] * p.ndim
        lo = [slice(None)] * p.ndim
        hi[ax] = slice(side, None)
        lo[ax] = slice(None, -side)
        d = d[tuple(hi)] - d[tuple(lo)]
    return d


def _maximal_summed_area(absv: np.ndarray, family: CubeFamily) -> np.ndarray:
    out = np.full(absv.shape, -np.inf)
    table = _prefix_table(absv)
    dim = absv.ndim
    for side, starts in family.side_groups:
        sums = _window_sums(table, side)
        nfull = int(np.prod([n - side + 1 for n in absv.shape]))
        avgs = (sums / np.longdouble(side**dim)).astype(np.float64)
        if len(starts) == nfull:
            padded = np.full(absv.shape, -np.inf)
            padded[tuple(slice(0, n - side + 1) for n in absv.shape)] = avgs
            # cell x is covered by starts in [x-side+1, x]; scipy's positive
            # origin shifts the window left by that amount
            cover = ndimage.maximum_filter(
                padded, size=side, mode="constant", cval=-np.inf,
                origin=(side - 1) // 2,
            )
            np.maximum(out, cover, out=out)
        else:
            for st in starts:
                avg = float(avgs[tuple(st)])
                sl = tuple(slice(a, a + side) for a in st)
                region = out[sl]
                np.maximum(region, avg, out=region)
    return out


def maximal(f: GridFunction, family: CubeFamily | None = None,
            method: str = "summed-area") -> GridFunction:
    """Maximal function: at each cell, the largest average of |f| over the
    family cubes containing it.

    Methods: ``summed-area`` (prefix-sum averages with a sliding maximum,
    O(1) per cube), ``brute`` (independent per-cube slice loop, the
    agreement oracle), ``dyadic`` (ignores the passed family and uses the
    dyadic one, where each scale contributes exactly one cube per cell).
    """
    if method == "dyadic":
        fam = enumerate_cubes(f.shape, "dyadic")
        absv = np.abs(f.values)
        out = np.full(f.shape, -np.inf)
        for side, _ in fam.side_groups:
            blocks = tuple(x for n in f.shape for x in (n // side, side))
            avg = absv.reshape(blocks).mean(axis=tuple(range(1, 2 * f.dim, 2)))
            up = avg
            for ax in range(f.dim):
                up = np.repeat(up, side, axis=ax)
            np.maximum(out, up, out=out)
        return f.with_values(out)
    if family is None:
        raise ValueError("maximal needs a cube family (or method='dyadic')")
    _check_coverage(f, family)
    absv = np.abs(f.values)
    if method == "summed-area":
        return f.with_values(_maximal_summed_area(absv, family))
    if method == "brute":
        out = np.full(f.shape, -np.inf)
        for c in family.cubes:
            sl = c.slices()
            avg = float(absv[sl].mean())
            region = out[sl]
            np.maximum(region, avg, out=region)
        return f.with_values(out)
    raise ValueError(f"unknown maximal method {method!r}")


def sharp_maximal(f: GridFunction, family: CubeFamily) -> GridFunction:
    """Sharp maximal function: at each cell, the largest mean oscillation
    (1/|Q|) \\int_Q |f - f_Q| over family cubes containing it."""
    _check_coverage(f, family)
    var_cell, cube_ptr, _ = family.flat_index
    out = np.zeros(f.ncells)
    _kernels.cube_oscillation_scan_max(out, f.values.ravel(), var_cell, cube_ptr)
    return f.with_values(out.reshape(f.shape))


# ---------------------------------------------------------------------------
# Annular decomposition of a maximal image
# ---------------------------------------------------------------------------


@dataclass
class AnnularDecomposition:
    """Maximal image of a block sliced over doubling annuli around the
    block's cube; the pieces partition the box exactly."""

    base_cube: GridCube
    cubes: list[GridCube]
    pieces: list[GridFunction] = field(repr=False)
    piece_norms: list[float]
    normalized: list[float]
    decay_exponent: float
    maximal_image: GridFunction = field(repr=False)

    def reconstruction_error(self) -> float:
        total = np.zeros(self.maximal_image.shape)
        for p in self.pieces:
            total += p.values
        return float(np.abs(total - self.maximal_image.values).max())


def _centered_cube(base: GridCube, side: int, shape) -> GridCube:
    start = tuple(
        min(max(a - (side - base.side) // 2, 0), n - side)
        for a, n in zip(base.start, shape)
    )
    return GridCube(start, side)


def support_cube(f: GridFunction) -> GridCube:
    """Smallest cell-aligned cube containing the support of ``f``."""
    nz = np.nonzero(f.values)
    if nz[0].size == 0:
        raise ValueError("function is identically zero")
    mins = [int(ix.min()) for ix in nz]
    maxs = [int(ix.max()) for ix in nz]
    side = max(mx - mn + 1 for mn, mx in zip(mins, maxs))
    if side > min(f.shape):
        raise ValueError("support bounding cube does not fit inside the box")
    start = tuple(min(mn, n - side) for mn, n in zip(mins, f.shape))
    return GridCube(start, side)


def maximal_block_image(b: GridFunction, exponents: ExponentTuple,
                        family: CubeFamily | None = None) -> AnnularDecomposition:
    """Slice the maximal image of a normalized block over doubling annuli.

    The per-annulus conjugate mixed norms, normalized by the annulus cube's
    volume power, must decay geometrically at rate set by 1/p0; the fitted
    decay exponent and the exact partition are reported.
    """
    if len(set(b.shape)) != 1:
        raise ValueError("annular decomposition needs equal axis sizes")
    exponents.require_admissible(strict=True)
    conj = exponents.conjugate()
    e = exponents.morrey_exponent
    h = b.spacing
    base = support_cube(b)
    bound = base.volume(h) ** e
    if mixed_norm(b, conj.p) > bound * (1.0 + 1e-9):
        raise ValueError("input fails the block condition on its support cube")

    fam = family or default_family(b.shape)
    mb = maximal(b, fam)

    nside = b.shape[0]
    ring_cubes = []
    side = base.side
    while True:
        side = min(2 * side, nside)
        ring_cubes.append(_centered_cube(base, side, b.shape))
        if side == nside:
            break

    pieces = []
    norms = []
    normalized = []
    cubes = []
    prev = np.zeros(b.shape, dtype=bool)
    for k, q in enumerate(ring_cubes):
        mask = np.zeros(b.shape, dtype=bool)
        mask[q.slices()] = True
        if k == len(ring_cubes) - 1:
            mask[:] = True  # final annulus absorbs any clipped remainder
        ring = mask & ~prev
        prev |= mask
        vals = np.where(ring, mb.values, 0.0)
        piece = b.with_values(vals)
        nrm = mixed_norm(piece, conj.p)
        pieces.append(piece)
        norms.append(nrm)
        normalized.append(nrm * q.volume(h) ** (-e))
        cubes.append(q)

    ks = [k for k in range(1, len(normalized)) if normalized[k] > 0]
    if len(ks) >= 2:
        xs = np.array(ks, dtype=float)
        ys = np.log2([normalized[k] for k in ks])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = 0.0
    return AnnularDecomposition(base, cubes, pieces, norms, normalized, slope, mb)


def sharp_bound_constant(b: GridFunction, f: GridFunction, alpha: float, r: float,
                         family: CubeFamily, den_floor: float = 1e-9) -> float:
    """Smallest constant C with, cellwise,

        sharp_maximal([b, I_alpha] f) <= C * ||b||_BMO *
            (I_alpha(|f|) + I_{r alpha}(|f|^r)^(1/r)),

    i.e. the maximal pointwise ratio, skipping cells whose denominator is
    below ``den_floor`` times its maximum. Constant ``b`` short-circuits
    to 0 (the commutator vanishes)."""
    if not r > 1.0:
        raise ValueError(f"r must exceed 1, got {r}")
    if not r * alpha < f.dim:
        raise ValueError(f"need r*alpha < dim, got {r * alpha} vs {f.dim}")
    if not same_geometry(b, f):
        raise ValueError("geometry mismatch")
    bmo = bmo_norm(b, family)[0]
    if bmo == 0.0:
        return 0.0
    com = commutator(b, f, KernelSpec(alpha, "direct"))
    num = sharp_maximal(com, family).values
    absf = f.with_values(np.abs(f.values))
    part1 = frac_integral(absf, KernelSpec(alpha, "direct")).values
    powr = f.with_values(np.abs(f.values) ** r)
    part2 = frac_integral(powr, KernelSpec(r * alpha, "direct")).values ** (1.0 / r)
    den = bmo * (part1 + part2)
    mask = den >= den_floor * den.max()
    return float((num[mask] / den[mask]).max())


# ---------------------------------------------------------------------------
# Oscillation-reconstruction probe
# ---------------------------------------------------------------------------


def _smoothstep(t):
    # C^infinity transition: 0 for t <= 0, 1 for t >= 1
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        lo = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        hi = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return lo / (lo + hi)


_TORUS_SIDE = 4.0
_WINDOW_FLAT = 1.05
_WINDOW_ZERO = 1.90


def _mode_coefficients(dim: int, alpha: float, z0_rel, quad: int):
    """Fourier coefficients of the windowed kernel profile |w|^(dim-alpha)
    on the period-4 torus centered at the offset; the window is 1 on the
    evaluation cube and 0 near the origin and the seam."""
    L = _TORUS_SIDE
    axes = []
    for i in range(dim):
        w0 = z0_rel[i] - L / 2.0
        axes.append(w0 + np.arange(quad) * (L / quad))
    grids = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(sum(g**2 for g in grids))
    window = np.ones_like(r)
    for i in range(dim):
        u = np.abs(grids[i] - z0_rel[i])
        window = window * _smoothstep((_WINDOW_ZERO - u) / (_WINDOW_ZERO - _WINDOW_FLAT))
    g = np.where(window > 0.0, window * r ** (dim - alpha), 0.0)
    coeff = np.fft.fftn(g) / quad**dim
    # phase for the off-origin sample start: a_m picks up e^{-2pi i m w0 / L}
    for i in range(dim):
        modes = np.fft.fftfreq(quad) * quad
        shape = [1] * dim
        shape[i] = quad
        w0 = z0_rel[i] - L / 2.0
        coeff = coeff * np.exp(-2j * np.pi * modes * w0 / L).reshape(shape)
    return coeff


def bmo_probe(b: GridFunction, cube: GridCube, z0, alpha: float, n_modes: int,
              kernel: KernelSpec | None = None, quad: int | None = None,
              ) -> tuple[float, float]:
    """Reconstruct the mean oscillation of ``b`` over ``cube`` (against the
    mean on the offset cube) from commutator pairings with finitely many
    modulated indicators.

    Returns (reconstructed oscillation, truncation residual). The residual
    is an estimate: the computed spectrum tail (plus a geometric allowance
    for the uncomputed remainder) times a rigorous uniform bound on the
    mode pairings, so the reconstruction error is bounded by it whenever
    the extrapolated remainder dominates reality, which the window's
    smoothness is designed to ensure.
    """
    dim = b.dim
    if kernel is None:
        kernel = KernelSpec(alpha, "direct")
    kernel.validate(dim)
    if kernel.alpha != alpha:
        raise ValueError("kernel spec alpha disagrees with the probe alpha")
    if n_modes < 1:
        raise ValueError("need at least one mode")
    s = cube.side
    if n_modes > 2 * s:
        raise ValueError(
            f"{n_modes} modes exceed the grid Nyquist limit {2 * s} for side {s}"
        )
    z0 = tuple(int(v) for v in np.atleast_1d(z0))
    if len(z0) != dim:
        raise ValueError("offset dimension mismatch")
    if not cube.inside(b.shape):
        raise ValueError("cube out of bounds")
    ref = GridCube(tuple(a + d for a, d in zip(cube.start, z0)), s)
    if not ref.inside(b.shape):
        raise ValueError("offset cube out of bounds")
    z0_rel = tuple(d / s for d in z0)
    if max(abs(v) for v in z0_rel) < 2.0 - 1e-12:
        raise ValueError(
            f"cube too close to the origin offset: need max |z0|/side >= 2, got {z0_rel}"
        )

    h = b.spacing
    t = s * h
    if quad is None:
        quad = {1: 4096, 2: 512, 3: 96}[dim]
    coeff = _mode_coefficients(dim, alpha, z0_rel, quad)

    # sign pattern on the probe cube
    ref_mean = float(b.values[ref.slices()].mean())
    sgn = np.sign(b.values[cube.slices()] - ref_mean)

    rule = kernel.resolve_diagonal(dim)
    mat = _direct_matrix(b.shape, h, alpha, rule)
    hd = h**dim
    bflat = b.values.ravel()

    def apply_commutator(vflat):
        return bflat * (hd * (mat @ vflat)) - hd * (mat @ (bflat * vflat))

    mesh = b.center_mesh()
    mask_ref = np.zeros(b.shape)
    mask_ref[ref.slices()] = 1.0

    mode_range = range(-n_modes, n_modes + 1)
    grids = np.meshgrid(*([list(mode_range)] * dim), indexing="ij")
    mode_list = np.stack([g.ravel() for g in grids], axis=-1)

    probe = 0.0 + 0.0j
    box_abs = 0.0
    for m in mode_list:
        phase = sum(mi * x for mi, x in zip(m, mesh)) * (2.0 * np.pi / (t * _TORUS_SIDE))
        emode = np.exp(1j * phase)
        src = emode * mask_ref
        u = apply_commutator(src.real.ravel()) + 1j * apply_commutator(src.imag.ravel())
        u = u.reshape(b.shape)
        inner = hd * (sgn * np.conj(emode[cube.slices()]) * u[cube.slices()]).sum()
        am = coeff[tuple(m % quad)]
        probe += am * inner
        box_abs += abs(am)

    scale = t ** (-dim - alpha)
    lower = float(scale * probe.real)

    # rigorous uniform bound on any mode pairing
    qcells = np.stack([g[cube.slices()].ravel() for g in mesh], axis=-1)
    rcells = np.stack([g[ref.slices()].ravel() for g in mesh], axis=-1)
    dist = np.sqrt(((qcells[:, None, :] - rcells[None, :, :]) ** 2).sum(axis=-1))
    bq = b.values[cube.slices()].ravel()
    br = b.values[ref.slices()].ravel()
    jbound = float(
        (np.abs(bq[:, None] - br[None, :]) * dist ** (alpha - dim)).sum() * hd * hd
    )

    absc = np.abs(coeff)
    total_abs = float(absc.sum())
    tail = total_abs - box_abs
    # geometric allowance for modes beyond the quadrature Nyquist
    freqs = np.fft.fftfreq(quad) * quad
    fgrids = np.meshgrid(*([freqs] * dim), indexing="ij")
    supmode = np.max(np.abs(np.stack(fgrids)), axis=0)
    last_shell = float(absc[supmode > quad // 4].sum())
    residual = scale * jbound * (tail + last_shell)
    residual += scale * abs(probe.imag) + 1e-12 * (abs(lower) + 1.0)
    return lower, float(residual)
