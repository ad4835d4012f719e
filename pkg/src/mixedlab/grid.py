"""Uniform-grid function carriers, cube families, quadrature, and file IO.

Everything downstream (norms, duality, operators) runs on these types.
Functions are stored as cell averages on a uniform grid with a single
spacing shared by all axes, are implicitly zero outside the box, and
integrate exactly as ``spacing**dim * values.sum()``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

#: Hard cap on the number of cells a grid may hold (guards file headers too).
MAX_CELLS = 1 << 22

_MAGIC = b"GFN1"

_KIND_ALIASES = {
    "dyadic": "dyadic",
    "shifted": "shifted",
    "shifted-dyadic": "shifted",
    "all": "all",
    "unit": "unit",
    "unit-cells": "unit",
}


@dataclass(frozen=True)
class GridCube:
    """Axis-aligned, cell-aligned cube: per-axis start index and one side.

    The physical side length is ``side * spacing`` and the volume is
    ``(side * spacing) ** dim``; the spacing lives on the grid function,
    not on the cube.
    """

    start: tuple[int, ...]
    side: int

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(a) for a in self.start))
        object.__setattr__(self, "side", int(self.side))
        if self.side < 1:
            raise ValueError(f"cube side must be >= 1, got {self.side}")
        if any(a < 0 for a in self.start):
            raise ValueError(f"cube start must be non-negative, got {self.start}")

    @property
    def dim(self) -> int:
        return len(self.start)

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + self.side) for a in self.start)

    def inside(self, shape: tuple[int, ...]) -> bool:
        return len(shape) == self.dim and all(
            a + self.side <= n for a, n in zip(self.start, shape)
        )

    def contains_cell(self, idx: tuple[int, ...]) -> bool:
        return all(a <= i < a + self.side for a, i in zip(self.start, idx))

    def volume(self, spacing: float) -> float:
        return float((self.side * spacing) ** self.dim)

    def sort_key(self):
        return (self.side, self.start)


@dataclass(frozen=True)
class GridFunction:
    """Real function sampled as cell averages on a uniform grid.

    Attributes:
        shape: per-axis cell counts (dim = len(shape) in {1,2,3}, each >= 2).
        origin: physical coordinate of the box corner, per axis.
        spacing: shared cell width ``h > 0``.
        values: float64 array of shape ``shape``; axis 0 is the first
            coordinate; entries are cell averages, so the function is
            piecewise constant on cells.
    """

    shape: tuple[int, ...]
    origin: tuple[float, ...]
    spacing: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        origin = tuple(float(x) for x in self.origin)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", float(self.spacing))
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"unsupported dimension {len(shape)} (need 1..3)")
        if len(origin) != len(shape):
            raise ValueError("origin and shape dimension mismatch")
        if any(n < 2 for n in shape):
            raise ValueError(f"each axis needs >= 2 cells, got {shape}")
        ncells = int(np.prod(shape))
        if ncells > MAX_CELLS:
            raise ValueError(f"shape overflow: {ncells} cells exceeds budget {MAX_CELLS}")
        if not self.spacing > 0.0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.shape != shape:
            vals = vals.reshape(shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite values in grid function")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def ncells(self) -> int:
        return int(np.prod(self.shape))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.shape, self.origin, self.spacing, values)

    def centers(self, axis: int) -> np.ndarray:
        """Physical cell-center coordinates along one axis."""
        n = self.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing

    def center_mesh(self) -> list[np.ndarray]:
        """Cell-center coordinate arrays broadcast to the full grid shape."""
        axes = [self.centers(i) for i in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def box_cube(self) -> GridCube:
        """The full box as a cube; requires all axes equal."""
        if len(set(self.shape)) != 1:
            raise ValueError("box is not a cube: unequal axis sizes")
        return GridCube((0,) * self.dim, self.shape[0])

    @classmethod
    def zeros(cls, shape, spacing: float, origin=None) -> "GridFunction":
        shape = tuple(int(n) for n in shape)
        if origin is None:
            origin = (0.0,) * len(shape)
        return cls(shape, tuple(origin), spacing, np.zeros(shape))

    @classmethod
    def unit_box(cls, shape) -> "GridFunction":
        """Zero function on [0,1)^dim with the given cell counts (equal axes)."""
        shape = tuple(int(n) for n in shape)
        if len(set(shape)) != 1:
            raise ValueError("unit_box needs equal axis sizes")
        return cls.zeros(shape, 1.0 / shape[0])


def same_geometry(a: GridFunction, b: GridFunction) -> bool:
    return a.shape == b.shape and a.origin == b.origin and a.spacing == b.spacing


def indicator(geometry: GridFunction, cube: GridCube) -> GridFunction:
    """Characteristic function of a cube on the geometry of ``geometry``."""
    if not cube.inside(geometry.shape):
        raise ValueError(f"cube {cube} out of bounds for shape {geometry.shape}")
    v = np.zeros(geometry.shape)
    v[cube.slices()] = 1.0
    return geometry.with_values(v)


@dataclass(frozen=True)
class CubeFamily:
    """A fixed, deduplicated collection of cubes on one grid shape.

    kind is one of ``dyadic``, ``shifted`` (shifted-dyadic), ``all``,
    ``unit`` (unit cells); members are sorted by (side, start).
    """

    kind: str
    shape: tuple[int, ...]
    cubes: tuple[GridCube, ...]

    @property
    def dim(self) -> int:
        return len(self.shape)

    def __len__(self) -> int:
        return len(self.cubes)

    @cached_property
    def covers_box(self) -> bool:
        """True when every cell lies in at least one member cube."""
        hit = np.zeros(self.shape, dtype=bool)
        for c in self.cubes:
            hit[c.slices()] = True
        return bool(hit.all())

    @cached_property
    def side_groups(self) -> list[tuple[int, np.ndarray]]:
        """Members grouped by side: list of (side, starts array (ncubes, dim)),
        starts in lexicographic order, sides ascending."""
        groups: dict[int, list[tuple[int, ...]]] = {}
        for c in self.cubes:
            groups.setdefault(c.side, []).append(c.start)
        return [
            (s, np.array(sorted(starts), dtype=np.int64))
            for s, starts in sorted(groups.items())
        ]

    @cached_property
    def flat_index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened per-variable indexing used by solvers and scans.

        Returns (var_cell, cube_ptr, coverage): flat cell index of every
        (cube, cell-in-cube) variable in lex order within each cube, cube
        slice boundaries, and the per-cell count of covering cubes.
        """
        ncells = int(np.prod(self.shape))
        sizes = np.array([c.side**self.dim for c in self.cubes], dtype=np.int64)
        cube_ptr = np.zeros(len(self.cubes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=cube_ptr[1:])
        var_cell = np.empty(int(cube_ptr[-1]), dtype=np.int64)
        flat = np.arange(ncells, dtype=np.int64).reshape(self.shape)
        for i, c in enumerate(self.cubes):
            var_cell[cube_ptr[i] : cube_ptr[i + 1]] = flat[c.slices()].ravel()
        coverage = np.bincount(var_cell, minlength=ncells).astype(np.float64)
        return var_cell, cube_ptr, coverage


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def enumerate_cubes(shape, kind: str) -> CubeFamily:
    """Enumerate a named cube family on a grid shape.

    Kinds: ``dyadic`` (sides 1,2,4,... up to the smallest axis, starts
    multiples of the side), ``shifted`` (dyadic plus per-axis translations
    by floor(s/3) and floor(2s/3), clamped into the box), ``all`` (every
    cell-aligned cube), ``unit`` (unit cells). Dyadic kinds require every
    axis to be a power of two.
    """
    shape = tuple(int(n) for n in shape)
    dim = len(shape)
    if not 1 <= dim <= 3:
        raise ValueError(f"unsupported dimension {dim}")
    canon = _KIND_ALIASES.get(kind)
    if canon is None:
        raise ValueError(f"unknown cube family kind {kind!r}")
    if canon in ("dyadic", "shifted") and not all(_is_pow2(n) for n in shape):
        raise ValueError(f"dyadic families need power-of-two shape, got {shape}")

    max_side = min(shape)
    cubes: set[GridCube] = set()

    def add_aligned(side: int):
        grids = [np.arange(0, n - side + 1, side, dtype=int) for n in shape]
        for start in np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, dim):
            cubes.add(GridCube(tuple(start), side))

    if canon == "unit":
        add_aligned(1)
    elif canon == "all":
        for side in range(1, max_side + 1):
            grids = [np.arange(0, n - side + 1, dtype=int) for n in shape]
            for start in np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, dim):
                cubes.add(GridCube(tuple(start), side))
    else:
        side = 1
        while side <= max_side:
            add_aligned(side)
            side *= 2
        if canon == "shifted":
            extra: set[GridCube] = set()
            for c in cubes:
                s = c.side
                for shifts in np.stack(
                    np.meshgrid(*([np.array([0, s // 3, (2 * s) // 3])] * dim), indexing="ij"),
                    axis=-1,
                ).reshape(-1, dim):
                    start = tuple(
                        min(a + int(t), n - s) for a, t, n in zip(c.start, shifts, shape)
                    )
                    extra.add(GridCube(start, s))
            cubes |= extra

    ordered = tuple(sorted(cubes, key=GridCube.sort_key))
    return CubeFamily(canon, shape, ordered)


def integrate(f: GridFunction) -> float:
    """Integral of ``f`` over the box; exact for cell-average semantics."""
    return float(f.spacing**f.dim * f.values.sum())


def restrict(f: GridFunction, cube: GridCube) -> GridFunction:
    """``f`` times the indicator of ``cube`` (exact zeros outside)."""
    if not cube.inside(f.shape):
        raise ValueError(f"cube {cube} out of bounds for shape {f.shape}")
    v = np.zeros_like(f.values)
    sl = cube.slices()
    v[sl] = f.values[sl]
    return f.with_values(v)


def _round_sig(x: float, digits: int = 12) -> float:
    if x == 0.0 or not math.isfinite(x):
        return 0.0
    return float(round(x, digits - 1 - int(math.floor(math.log10(abs(x))))))


def simple_approximate(f: GridFunction, eps: float, exponents) -> list[tuple[float, GridCube]]:
    """Approximate ``f`` by a simple function over one dyadic level.

    Averages ``f`` over the dyadic cells of the coarsest level whose
    mixed-norm error is below ``eps``; coefficients are rounded to 12
    significant digits. ``eps`` at or below the rounding floor selects the
    finest (unit-cell) level. Returns (coefficient, cube) pairs, zero
    coefficients dropped.
    """
    from .norms import mixed_norm  # avoids a module cycle

    if eps < 0:
        raise ValueError("eps must be >= 0")
    if not all(_is_pow2(n) for n in f.shape):
        raise ValueError(f"dyadic approximation needs power-of-two shape, got {f.shape}")
    sides = []
    s = 1
    while s <= min(f.shape):
        sides.append(s)
        s *= 2
    scale = mixed_norm(f, exponents)
    floor = 1e-11 * (1.0 + scale)
    target = max(eps, floor)
    for side in reversed(sides):
        blocks = tuple(x for n in f.shape for x in (n // side, side))
        # average over side^dim blocks: reshape to (n1/s, s, n2/s, s, ...)
        avg = f.values.reshape(blocks).mean(axis=tuple(range(1, 2 * f.dim, 2)))
        avg = np.vectorize(_round_sig, otypes=[np.float64])(avg)
        rep = np.repeat(avg, side, axis=0)
        for ax in range(1, f.dim):
            rep = np.repeat(rep, side, axis=ax)
        err = mixed_norm(f.with_values(f.values - rep), exponents)
        if err < eps or (side == 1 and err <= target):
            terms = []
            for idx in np.ndindex(avg.shape):
                c = float(avg[idx])
                if c != 0.0:
                    terms.append((c, GridCube(tuple(i * side for i in idx), side)))
            return terms
    raise ValueError(
        f"tolerance {eps} not achievable: rounding-limited error exceeds it at unit cells"
    )


# ---------------------------------------------------------------------------
# File IO.  Binary format: magic "GFN1", then little-endian u32 dim,
# u32 shape[dim], f64 origin[dim], f64 spacing, f64 values (row-major).
# CSV text form: header "dim,shape...,origin...,spacing", one value per line.
# ---------------------------------------------------------------------------


def write_gridfn(f: GridFunction, path, fmt: str | None = None) -> None:
    """Write a grid function; format from ``fmt`` or the file suffix
    (``.csv`` selects the text form, anything else the binary form)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "binary"
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", f.dim))
            fh.write(struct.pack(f"<{f.dim}I", *f.shape))
            fh.write(struct.pack(f"<{f.dim}d", *f.origin))
            fh.write(struct.pack("<d", f.spacing))
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    elif fmt == "csv":
        with open(path, "w") as fh:
            head = [str(f.dim)] + [str(n) for n in f.shape]
            head += [repr(x) for x in f.origin] + [repr(f.spacing)]
            fh.write(",".join(head) + "\n")
            for v in f.values.ravel():
                fh.write(repr(float(v)) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _validated(dim: int, shape, origin, spacing, values) -> GridFunction:
    if not 1 <= dim <= 3:
        raise ValueError(f"unsupported dimension {dim}")
    ncells = 1
    for n in shape:
        if n < 2:
            raise ValueError(f"bad shape {tuple(shape)}: each axis needs >= 2 cells")
        ncells *= n
    if ncells > MAX_CELLS:
        raise ValueError(f"shape overflow: {ncells} cells exceeds budget {MAX_CELLS}")
    values = np.asarray(values, dtype=np.float64)
    if values.size != ncells:
        raise ValueError(f"truncated file: expected {ncells} values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite values in file")
    return GridFunction(tuple(shape), tuple(origin), float(spacing), values.reshape(tuple(shape)))


def read_gridfn(path) -> GridFunction:
    """Read a grid function written by :func:`write_gridfn` (either form)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv(path)
    raw = path.read_bytes()
    if len(raw) < 4 or raw[:4] != _MAGIC:
        raise ValueError(f"bad magic in {path}")
    off = 4
    (dim,) = struct.unpack_from("<I", raw, off)
    off += 4
    if not 1 <= dim <= 3:
        raise ValueError(f"unsupported dimension {dim}")
    shape = struct.unpack_from(f"<{dim}I", raw, off)
    off += 4 * dim
    origin = struct.unpack_from(f"<{dim}d", raw, off)
    off += 8 * dim
    (spacing,) = struct.unpack_from("<d", raw, off)
    off += 8
    values = np.frombuffer(raw, dtype="<f8", offset=off)
    return _validated(dim, shape, origin, spacing, values)


def _read_csv(path: Path) -> GridFunction:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"bad magic in {path}: empty file")
    head = lines[0].split(",")
    try:
        dim = int(head[0])
    except ValueError as exc:
        raise ValueError(f"bad header in {path}") from exc
    if not 1 <= dim <= 3:
        raise ValueError(f"unsupported dimension {dim}")
    if len(head) != 1 + 2 * dim + 1:
        raise ValueError(f"bad header in {path}: expected {1 + 2 * dim + 1} fields")
    shape = [int(x) for x in head[1 : 1 + dim]]
    origin = [float(x) for x in head[1 + dim : 1 + 2 * dim]]
    spacing = float(head[1 + 2 * dim])
    values = np.array([float(x) for x in lines[1:]])
    return _validated(dim, shape, origin, spacing, values)
