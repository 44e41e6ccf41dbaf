"""J-adapted frames, quaternionic supplements, and the 2-form dictionary.

Given a compatible almost complex structure J at a point, a J-frame
(e1, e2 = J e1, e3, e4 = J e3) determines a quaternionic pair (I, K) with
I J K = -1, and the associated 2-forms (Omega_J, Omega_I, Omega_K) form an
orthonormal basis of the self-dual forms.
"""

import numpy as np

from weyl4.catalog import get_manifold
from weyl4.pointgeom import (
    build_j_frame,
    endo_to_form,
    hodge_star,
    inner_endo,
    rotate_supplement,
)

spec = get_manifold("fubini_study_cp2")
point = [0.3, -0.2, 0.5, 0.1]
mp = spec.metric_point(point, order=2)
frame = build_j_frame(mp, spec.j_matrix(point), seed=np.eye(4)[0])

print("frame vectors (columns):")
print(np.round(frame.E, 6))
print("quaternion residual |IJK + 1|:", np.abs(frame.I @ frame.J @ frame.K + np.eye(4)).max())

names = ("J", "I", "K")
for a, A in zip(names, frame.sd_endos()):
    for b, B in zip(names, frame.sd_endos()):
        print(f"<{a},{b}> = {inner_endo(A, B, mp): .3f}", end="  ")
    print()

print("\nself-duality of the associated 2-forms (star residuals):")
for name, A in zip(names, frame.sd_endos()):
    w = endo_to_form(A, mp, check=False)
    print(f"  |*Omega_{name} - Omega_{name}| = {np.abs(hodge_star(w, mp, frame.orientation) - w).max():.2e}")

# the supplement is only determined up to a rotation in the (I, K) plane
rotated = rotate_supplement(frame, 0.7)
print("\nafter rotating the supplement by 0.7 rad:")
print("  |I'^2 + 1| =", np.abs(rotated.I @ rotated.I + np.eye(4)).max())
print("  <I', K'>  =", inner_endo(rotated.I, rotated.K, mp))
