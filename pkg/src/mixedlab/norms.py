"""Norms and constants: mixed Lebesgue, mixed Morrey, BMO, weighted L^p,
Muckenhoupt products, and the duality pairing.

Mixed norms fold the axes in order (axis 0 innermost) with the grid
spacing as quadrature weight; cube suprema scan a :class:`CubeFamily`
grouped by side, vectorized over same-size cubes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import CubeFamily, GridCube, GridFunction, enumerate_cubes, same_geometry

_ADMISSIBLE_TOL = 1e-12


@dataclass(frozen=True)
class ExponentTuple:
    """Exponents (p0, p1..pn): p0 for the cube-volume weight, p for the
    mixed norm. All entries must lie in (1, inf).

    Admissibility ``n/p0 <= sum 1/p_i`` is what the Morrey norm needs;
    block-space operations need it strictly. Both are checked at the
    operations, not in the constructor, because the conjugate tuple of an
    admissible tuple satisfies the reversed inequality.
    """

    p0: float
    p: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "p0", float(self.p0))
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if not 1.0 < self.p0 < math.inf:
            raise ValueError(f"p0 must lie in (1, inf), got {self.p0}")
        if not 1 <= len(self.p) <= 3:
            raise ValueError(f"need 1..3 inner exponents, got {len(self.p)}")
        for x in self.p:
            if not 1.0 < x < math.inf:
                raise ValueError(f"inner exponents must lie in (1, inf), got {x}")

    @property
    def dim(self) -> int:
        return len(self.p)

    @cached_property
    def inv_sum(self) -> float:
        """sum_i 1/p_i"""
        return float(sum(1.0 / x for x in self.p))

    @cached_property
    def morrey_exponent(self) -> float:
        """1/p0 - (1/n) sum_i 1/p_i; <= 0 exactly when admissible,
        0 exactly when the Morrey norm collapses to the mixed norm."""
        return 1.0 / self.p0 - self.inv_sum / self.dim

    @property
    def is_admissible(self) -> bool:
        return self.dim / self.p0 <= self.inv_sum + _ADMISSIBLE_TOL

    @property
    def is_strictly_admissible(self) -> bool:
        return self.dim / self.p0 < self.inv_sum - _ADMISSIBLE_TOL

    def conjugate(self) -> "ExponentTuple":
        """Conjugate exponents: 1/p + 1/p' = 1, entrywise and for p0."""
        return ExponentTuple(
            self.p0 / (self.p0 - 1.0), tuple(x / (x - 1.0) for x in self.p)
        )

    def require_admissible(self, strict: bool = False) -> None:
        if strict and not self.is_strictly_admissible:
            raise ValueError(
                f"exponents {self} need strict admissibility "
                f"n/p0 < sum 1/p_i ({self.dim}/{self.p0} vs {self.inv_sum})"
            )
        if not self.is_admissible:
            raise ValueError(
                f"exponents {self} violate admissibility n/p0 <= sum 1/p_i "
                f"({self.dim}/{self.p0} vs {self.inv_sum})"
            )

    def check_fractional_relation(self, target: "ExponentTuple", alpha: float) -> None:
        """Validate the exponent relations of the fractional-order mapping
        between two Morrey scales: alpha = n/p0 - n/q0 = sum 1/p_i - sum 1/q_i
        with p <= q entrywise and 0 < alpha < n. Raises naming the violation."""
        n = self.dim
        if target.dim != n:
            raise ValueError("exponent tuples have different dimensions")
        if not 0.0 < alpha < n:
            raise ValueError(f"alpha must lie in (0, {n}), got {alpha}")
        lhs = n / self.p0 - n / target.p0
        if abs(lhs - alpha) > 1e-10:
            raise ValueError(
                f"violated relation alpha = n/p0 - n/q0: {alpha} vs {lhs}"
            )
        rhs = self.inv_sum - target.inv_sum
        if abs(rhs - alpha) > 1e-10:
            raise ValueError(
                f"violated relation alpha = sum 1/p_i - sum 1/q_i: {alpha} vs {rhs}"
            )
        if any(pi > qi + 1e-12 for pi, qi in zip(self.p, target.p)):
            raise ValueError(f"need p <= q entrywise, got {self.p} vs {target.p}")


@dataclass(frozen=True)
class Weight:
    """Strictly positive grid function used as a measure density."""

    fn: GridFunction

    def __post_init__(self):
        if not np.all(self.fn.values > 0.0):
            raise ValueError("weight must be strictly positive everywhere")


def _exponent_vector(p, dim: int) -> tuple[float, ...]:
    if isinstance(p, ExponentTuple):
        vec = p.p
    elif np.isscalar(p):
        vec = (float(p),) * dim
    else:
        vec = tuple(float(x) for x in p)
    if len(vec) != dim:
        raise ValueError(f"exponent vector length {len(vec)} != dim {dim}")
    for x in vec:
        if x < 1.0:
            raise ValueError(f"exponents must be >= 1, got {x}")
    return vec


def _mixed_reduce(a: np.ndarray, h: float, pvec) -> float:
    """Iterated norm of |a|: axis 0 first, each step (h*sum |.|^p)^(1/p),
    max for p = inf."""
    a = np.abs(a)
    for q in pvec:
        if math.isinf(q):
            a = a.max(axis=0)
        else:
            a = (h * (a**q).sum(axis=0)) ** (1.0 / q)
    return float(a)


def mixed_norm(f: GridFunction, p) -> float:
    """Mixed Lebesgue norm with exponent vector ``p`` (entries in [1, inf];
    an :class:`ExponentTuple` contributes its inner exponents)."""
    pvec = _exponent_vector(p, f.dim)
    return _mixed_reduce(f.values, f.spacing, pvec)


def _batched_mixed(windows: np.ndarray, h: float, pvec) -> np.ndarray:
    """Iterated norms of a batch: windows has shape (ncubes, s, ..., s)."""
    a = np.abs(windows)
    for q in pvec:
        if math.isinf(q):
            a = a.max(axis=1)
        else:
            a = (h * (a**q).sum(axis=1)) ** (1.0 / q)
    return a


def _group_windows(values: np.ndarray, side: int, starts: np.ndarray) -> np.ndarray:
    """Gather the (side,...,side) windows at the given starts: (ncubes, side^dim...)."""
    dim = values.ndim
    view = sliding_window_view(values, (side,) * dim)
    return view[tuple(starts[:, i] for i in range(dim))]


def _scan_family(values: np.ndarray, h: float, family: CubeFamily,
                 score_fn) -> tuple[float, GridCube]:
    """Maximize score_fn(windows, side) over the family; ties resolve to the
    smallest side, then the lexicographically smallest start."""
    best = -math.inf
    best_cube = None
    for side, starts in family.side_groups:
        windows = _group_windows(values, side, starts)
        scores = np.asarray(score_fn(windows, side), dtype=np.float64)
        k = int(np.argmax(scores))  # first max = lex-smallest start
        if scores[k] > best:
            best = float(scores[k])
            best_cube = GridCube(tuple(starts[k]), side)
    return best, best_cube


def _check_coverage(f: GridFunction, family: CubeFamily) -> None:
    if family.dim != f.dim or family.shape != f.shape:
        raise ValueError("family shape does not match the grid")
    if len(family) == 0:
        raise ValueError("empty cube family")
    if not family.covers_box:
        hit = np.zeros(f.shape, dtype=bool)
        for c in family.cubes:
            hit[c.slices()] = True
        if np.any((f.values != 0.0) & ~hit):
            raise ValueError("family does not cover the support of f")


def morrey_norm(f: GridFunction, exponents: ExponentTuple,
                family: CubeFamily) -> tuple[float, GridCube]:
    """Mixed Morrey norm: sup over family cubes of
    |Q|^(1/p0 - (1/n) sum 1/p_i) * mixed_norm(f restricted to Q).

    Returns the value and the maximizing cube (ties: smallest volume, then
    lexicographic start).
    """
    if exponents.dim != f.dim:
        raise ValueError("exponent dimension does not match the grid")
    exponents.require_admissible()
    _check_coverage(f, family)
    e = exponents.morrey_exponent
    h = f.spacing

    def score(windows, side):
        vol = (side * h) ** f.dim
        return vol**e * _batched_mixed(windows, h, exponents.p)

    return _scan_family(f.values, h, family, score)


def convexified_norm(f: GridFunction, base: Callable[[GridFunction], float],
                     p: float) -> float:
    """p-convexification of a base norm: base(|f|^p) ** (1/p)."""
    if p <= 0:
        raise ValueError(f"convexification power must be positive, got {p}")
    return base(f.with_values(np.abs(f.values) ** p)) ** (1.0 / p)


def bmo_norm(b: GridFunction, family: CubeFamily) -> tuple[float, GridCube]:
    """Sup over family cubes of the mean oscillation
    (1/|Q|) \\int_Q |b - b_Q| with exact cell-average means."""
    _check_coverage(b, family)

    def score(windows, side):
        flat = windows.reshape(windows.shape[0], -1)
        means = flat.mean(axis=1, keepdims=True)
        return np.abs(flat - means).mean(axis=1)

    return _scan_family(b.values, b.spacing, family, score)


def mean_oscillation(b: GridFunction, cube: GridCube,
                     reference_cube: GridCube | None = None) -> float:
    """(1/|Q|) \\int_Q |b - mean over the reference cube| (reference defaults
    to the cube itself)."""
    for c in (cube, reference_cube):
        if c is not None and not c.inside(b.shape):
            raise ValueError(f"cube {c} out of bounds")
    ref = cube if reference_cube is None else reference_cube
    m = float(b.values[ref.slices()].mean())
    return float(np.abs(b.values[cube.slices()] - m).mean())


def weighted_lp_norm(f: GridFunction, p: float, weight) -> float:
    """(\\int |f|^p w dx)^(1/p) for a strictly positive weight."""
    if not 0.0 < p < math.inf:
        raise ValueError(f"p must lie in (0, inf), got {p}")
    w = weight.fn if isinstance(weight, Weight) else weight
    if not same_geometry(f, w):
        raise ValueError("weight geometry mismatch")
    if not np.all(w.values > 0.0):
        raise ValueError("weight must be strictly positive everywhere")
    return float((f.spacing**f.dim * (np.abs(f.values) ** p * w.values).sum()) ** (1.0 / p))


def ap_constant(weight, p: float, family: CubeFamily) -> float:
    """Muckenhoupt product, maximized over the family.

    p > 1: sup_Q (avg_Q w) (avg_Q w^(1/(1-p)))^(p-1); p = 1:
    (sup_Q avg_Q w) * max(1/w). Always >= 1.
    """
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    w = weight.fn if isinstance(weight, Weight) else weight
    if not np.all(w.values > 0.0):
        raise ValueError("weight must be strictly positive everywhere")
    _check_coverage(w, family)
    if p == 1.0:
        def score(windows, side):
            return windows.reshape(windows.shape[0], -1).mean(axis=1)
        top, _ = _scan_family(w.values, w.spacing, family, score)
        return float(top * (1.0 / w.values).max())

    dual_pow = w.values ** (1.0 / (1.0 - p))

    best = -math.inf
    for side, starts in family.side_groups:
        a = _group_windows(w.values, side, starts).reshape(len(starts), -1).mean(axis=1)
        bpart = _group_windows(dual_pow, side, starts).reshape(len(starts), -1).mean(axis=1)
        val = float((a * bpart ** (p - 1.0)).max())
        if val > best:
            best = val
    return best


def pairing(f: GridFunction, g: GridFunction, absolute: bool = False) -> float:
    """Duality pairing h^dim sum f*g (or of |f*g| when ``absolute``)."""
    if not same_geometry(f, g):
        raise ValueError("pairing requires identical grid geometry")
    prod = f.values * g.values
    if absolute:
        prod = np.abs(prod)
    return float(f.spacing**f.dim * prod.sum())


def default_family(shape) -> CubeFamily:
    """`all` when the squared cell count stays within the summed-area budget
    (1e8), else shifted-dyadic."""
    shape = tuple(int(n) for n in shape)
    ncells = int(np.prod(shape))
    kind = "all" if ncells * ncells <= 10**8 else "shifted"
    return enumerate_cubes(shape, kind)
