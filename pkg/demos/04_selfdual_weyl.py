"""The self-dual Weyl operator as a 3x3 matrix and its spectral invariants.

On a Kahler 4-manifold W+ is forced into the shape (S/6) diag(2,-1,-1); on
the strictly almost Kahler nilmanifold it has two eigenvalues but the wrong
proportions, and the gap is exactly what the integrability conditions see.
"""

import numpy as np

from weyl4.catalog import builtin_manifolds
from weyl4.conditions import point_context
from weyl4.selfdual import wplus_invariants

rng = np.random.default_rng(1)
print(f"{'manifold':26s} {'|W+|^2':>10s} {'det W+':>10s} {'S^2/6':>10s}  eigenvalues")
for spec in builtin_manifolds():
    pt = spec.sample_points(1, rng)[0]
    ctx = point_context(spec, pt, order=2)
    inv = wplus_invariants(ctx.wplus)
    eig = ", ".join(f"{v: .4f}" for v in inv["eigenvalues"])
    print(
        f"{spec.id:26s} {inv['norm2']:10.4f} {inv['det']:10.4f} "
        f"{ctx.S**2 / 6:10.4f}  ({eig})"
    )

print("\ncharacteristic polynomial is t^3 - |W+|^2/2 t - det(W+); on the")
print("nilmanifold the spectrum is (1/3, 1/3, -2/3): two eigenvalues, yet")
print("|W+|^2 = 2/3 differs from S^2/6 = 1/24 -- the Kahler test fails there.")
