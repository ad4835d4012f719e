"""
A gallery of norms
==================

Mixed Lebesgue norms iterate one axis at a time, Morrey norms weigh cube
restrictions by a volume power, BMO measures mean oscillation, and the
Muckenhoupt product grades weights. Indicators make every value checkable
by hand.
"""

import numpy as np

from mixedlab import (
    ExponentTuple,
    GridCube,
    GridFunction,
    Weight,
    ap_constant,
    bmo_norm,
    convexified_norm,
    enumerate_cubes,
    indicator,
    mixed_norm,
    morrey_norm,
    pairing,
    weighted_lp_norm,
)

# --- mixed norms ---------------------------------------------------------
geo2 = GridFunction.unit_box((16, 16))
chi = indicator(geo2, GridCube((4, 4), 8))
ell = 8 / 16  # physical side of the cube
for p in [(2.0, 2.0), (1.5, 3.0)]:
    got = mixed_norm(chi, p)
    want = ell ** (1 / p[0] + 1 / p[1])
    print(f"mixed {p}: {got:.6f}   closed form {want:.6f}")

# --- Morrey norms --------------------------------------------------------
exps = ExponentTuple(2.5, (2.0, 3.0))
fam = enumerate_cubes((16, 16), "dyadic")
value, arg = morrey_norm(chi, exps, fam)
print(f"morrey of the indicator: {value:.6f} = |Q|^(1/p0) "
      f"{(ell ** 2) ** (1 / 2.5):.6f}, attained on {arg}")

# equality case: the volume weight disappears and Morrey = mixed
eq = ExponentTuple(2.0, (2.0, 2.0))
rng = np.random.default_rng(1)
f = geo2.with_values(rng.standard_normal((16, 16)))
print("equality case gap:",
      abs(morrey_norm(f, eq, enumerate_cubes((16, 16), "all"))[0]
          - mixed_norm(f, (2.0, 2.0))))

# --- convexification -----------------------------------------------------
geo = GridFunction.unit_box((32,))
g = geo.with_values(rng.standard_normal(32))
base = lambda u: mixed_norm(u, (2.0,))
print("convexified L2 by p=1.5 vs plain L3:",
      convexified_norm(g, base, 1.5), mixed_norm(g, (3.0,)))

# --- BMO -----------------------------------------------------------------
b = indicator(geo, GridCube((0,), 16))  # left half
print("BMO norm of a half indicator:", bmo_norm(b, enumerate_cubes((32,), "all"))[0])

# --- weights -------------------------------------------------------------
w = Weight(geo.with_values(np.where(np.arange(32) < 16, 1.0, 4.0)))
print("A_2 product of the {1,4} weight:",
      ap_constant(w, 2.0, enumerate_cubes((32,), "all")), "(closed form 25/16)")
print("weighted L2 norm of the half indicator:",
      weighted_lp_norm(b, 2.0, w))

# --- the pairing that drives duality ------------------------------------
h = geo.with_values(rng.standard_normal(32))
print("pairing vs product of conjugate mixed norms:",
      pairing(g, h, absolute=True), "<=",
      mixed_norm(g, (2.0,)) * mixed_norm(h, (2.0,)))
