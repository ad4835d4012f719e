"""
The block norm and its dual, as a two-sided certificate
=======================================================

The block norm of f is the cheapest way to write f as a sum of normalized
blocks on family cubes; its Koethe dual is the Morrey norm. On a grid with
the same cube family on both sides the two optima coincide, so the solver
pair (decomposition splitting + pairing ascent) reports a gap that measures
nothing but its own accuracy.
"""

import numpy as np

from mixedlab import (
    ExponentTuple,
    GridCube,
    GridFunction,
    SolverParams,
    block_norm_upper,
    canonicalize_decomposition,
    duality_gap,
    enumerate_cubes,
    indicator,
    morrey_norm,
    truncate,
)

geo = GridFunction.unit_box((16,))
fam = enumerate_cubes((16,), "dyadic")
exps = ExponentTuple(3.0, (2.0,))

# --- the indicator anchor: both sides in closed form ----------------------
q = GridCube((4,), 4)
chi = indicator(geo, q)
rep = duality_gap(chi, exps, fam)
vol = q.volume(geo.spacing)
print(f"indicator: lower {rep.lower:.9f}  upper {rep.upper:.9f}  "
      f"closed form {vol ** (1 - 1 / 3.0):.9f}")
print(f"morrey * block = {morrey_norm(chi, exps, fam)[0] * rep.upper:.9f} "
      f"(= |Q| = {vol})")

# --- a random function ----------------------------------------------------
rng = np.random.default_rng(3)
f = geo.with_values(rng.standard_normal(16))
rep = duality_gap(f, exps, fam)
print(f"random f : lower {rep.lower:.9f}  upper {rep.upper:.9f}  "
      f"relative gap {rep.gap / rep.upper:.2e}  ({rep.iterations} sweeps)")
print("decomposition:", len(rep.decomposition.terms), "blocks, residuals:",
      {k: f"{v:.1e}" for k, v in rep.residuals.items()})

# the solver trace is plottable: iteration, upper, lower, residual
for row in rep.trace[:: max(1, len(rep.trace) // 5)]:
    print(f"  sweep {int(row[0]):5d}: upper {row[1]:.9f}  lower {row[2]:.9f}")

# --- regrouping onto dyadic cubes ----------------------------------------
value, dec = block_norm_upper(f, exps, enumerate_cubes((16,), "all"),
                              SolverParams(max_iters=4000))
regrouped = canonicalize_decomposition(dec, f, exps)
print(f"all-family decomposition {value:.6f} -> dyadic regrouping with "
      f"coefficient sum {regrouped.total_coefficient:.6f} "
      f"(factor <= {2 * 3 ** 1} of the norm)")

# --- the Fatou staircase ---------------------------------------------------
g = geo.with_values(np.abs(f.values))
full, _ = block_norm_upper(g, exps, fam)
print("truncation staircase toward the full norm", f"{full:.6f}:")
top = float(g.values.max())
for j, (level, side) in enumerate([(0.25, 4), (0.5, 8), (0.75, 12), (1.0, 16)]):
    fk = truncate(g, level * top, GridCube(((16 - side) // 2,), side))
    vk, _ = block_norm_upper(fk, exps, fam)
    print(f"  step {j}: block norm {vk:.6f}")
