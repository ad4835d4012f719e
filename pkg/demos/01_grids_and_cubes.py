"""
Grid functions and cube families
================================

The basic carrier is a real function stored as cell averages on a uniform
grid. Everything else (norms, decompositions, operators) works with cubes
drawn from a named family on that grid.
"""

import numpy as np

from mixedlab import (
    GridCube,
    GridFunction,
    enumerate_cubes,
    indicator,
    integrate,
    read_gridfn,
    restrict,
    simple_approximate,
    write_gridfn,
)

# A 1-d grid over [0, 1) with 16 cells, and a bump to play with.
geo = GridFunction.unit_box((16,))
x = geo.centers(0)
f = geo.with_values(np.exp(-30 * (x - 0.4) ** 2))

print("integral of the bump:", integrate(f))

# Cube families: unit cells < dyadic < shifted-dyadic < all.
for kind in ("unit", "dyadic", "shifted", "all"):
    fam = enumerate_cubes((16,), kind)
    print(f"{kind:8s}: {len(fam):4d} cubes, covers box: {fam.covers_box}")

# Restriction zeroes everything outside a cube; integrating the restriction
# is the same as a masked sum.
q = GridCube((4,), 8)
print("mass on", q, "=", integrate(restrict(f, q)))

# The simple-function approximation averages f over one dyadic level, the
# coarsest that meets the tolerance.
for eps in (0.5, 0.1, 0.01):
    terms = simple_approximate(f, eps, (2.0,))
    sides = {c.side for _, c in terms}
    print(f"eps={eps:5.2f}: {len(terms):2d} terms on side(s) {sorted(sides)}")

# Functions round-trip bit-for-bit through the binary format.
write_gridfn(f, "/tmp/demo_bump.gfn")
g = read_gridfn("/tmp/demo_bump.gfn")
print("round trip bit-exact:", g.values.tobytes() == f.values.tobytes())
