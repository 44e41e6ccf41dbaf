"""Point-local metric linear algebra.

Everything here lives at a single chart point: adjoints with respect to the
metric, the dimension-weighted inner product ``<A,B> = tr(A* B)/4`` on
endomorphisms, J-adapted orthonormal frames with their quaternionic
supplements (I, K), the skew-endomorphism / 2-form correspondence
``Omega_A(X,Y) = g(AX,Y)``, and the Hodge star on 2-forms in the orientation
fixed by ``vol = Omega_J ^ Omega_J / 2``.

All matrices are in the chart basis unless noted; endomorphisms act on
column vectors of chart components.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .exprjet import jmatinv, jvalue

N = 4

# Frame-basis matrices of the standard quaternionic triple for a J-frame
# (JX1 = X2, JX3 = X4; IX1 = X3, IX2 = -X4, IX3 = -X1, IX4 = X2;
#  KX1 = -X4, KX2 = -X3, KX3 = X2, KX4 = X1).  Columns are images.
J_STD = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
I_STD = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
K_STD = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, -1, 0, 0], [-1, 0, 0, 0]], dtype=float)

# Anti-self-dual counterparts (second block of J flipped, etc.)
JM_STD = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], dtype=float)
IM_STD = np.array([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
KM_STD = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], dtype=float)


def _levi_civita() -> np.ndarray:
    eps = np.zeros((N, N, N, N))
    for perm in itertools.permutations(range(N)):
        sign = 1.0
        p = list(perm)
        for i in range(N):
            for j in range(i + 1, N):
                if p[i] > p[j]:
                    sign = -sign
        eps[perm] = sign
    return eps


EPS4 = _levi_civita()


class FrameError(ValueError):
    """Raised for degenerate seeds or incompatible almost complex structures."""


@dataclass(frozen=True)
class MetricPoint:
    """Metric matrix, inverse, and component jets at one chart point."""

    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    jets: np.ndarray       # (4, 4, ncoef)
    inv_jets: np.ndarray   # (4, 4, ncoef)
    order: int

    @staticmethod
    def from_jets(point, jets: np.ndarray, order: int) -> "MetricPoint":
        point = np.asarray(point, dtype=float)
        g = jvalue(jets)
        asym = np.abs(g - g.T).max()
        scale = np.abs(g).max()
        if asym > 1e-12 * max(scale, 1.0):
            raise ValueError(f"metric matrix not symmetric (residual {asym:.3e})")
        eig = np.linalg.eigvalsh(0.5 * (g + g.T))
        if eig[0] <= 1e-12 * eig[-1]:
            raise ValueError(f"metric not positive definite (eigenvalues {eig})")
        inv_jets = jmatinv(jets, order)
        return MetricPoint(point, g, jvalue(inv_jets), jets, inv_jets, order)

    @property
    def scale(self) -> float:
        """Largest metric eigenvalue; tolerances are taken relative to it."""
        return float(np.linalg.eigvalsh(self.g)[-1])

    def dot(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(x @ self.g @ y)

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.dot(x, x), 0.0)))


# ---------------------------------------------------------------------------
# Adjoints, inner products, 2-form correspondence
# ---------------------------------------------------------------------------


def adjoint_endo(A: np.ndarray, mp: MetricPoint) -> np.ndarray:
    """Adjoint A* with g(AX, Y) = g(X, A*Y)."""
    return mp.g_inv @ A.T @ mp.g


def is_skew(A: np.ndarray, mp: MetricPoint, tol: float = 1e-10) -> bool:
    res = np.abs(adjoint_endo(A, mp) + A).max()
    return res <= tol * max(np.abs(A).max(), 1.0)


def inner_endo(A: np.ndarray, B: np.ndarray, mp: MetricPoint) -> float:
    """Weighted inner product tr(A* B)/4 (differs from Frobenius by 1/n)."""
    return float(np.trace(adjoint_endo(A, mp) @ B)) / N


def norm_endo(A: np.ndarray, mp: MetricPoint) -> float:
    return float(np.sqrt(max(inner_endo(A, A, mp), 0.0)))


def endo_to_form(A: np.ndarray, mp: MetricPoint, check: bool = True) -> np.ndarray:
    """2-form of a skew endomorphism: Omega_A(X,Y) = g(AX, Y)."""
    if check and not is_skew(A, mp):
        raise ValueError("endomorphism is not skew with respect to g")
    return A.T @ mp.g


def form_to_endo(w: np.ndarray, mp: MetricPoint, check: bool = True) -> np.ndarray:
    if check and np.abs(w + w.T).max() > 1e-10 * max(np.abs(w).max(), 1.0):
        raise ValueError("2-form matrix is not antisymmetric")
    return -mp.g_inv @ w


def inner_form(w1: np.ndarray, w2: np.ndarray, mp: MetricPoint) -> float:
    """Form inner product matching <Omega_A, Omega_B> = <A, B>."""
    return float(np.einsum("ij,ik,jl,kl->", w1, mp.g_inv, mp.g_inv, w2)) / N


def hodge_star(w: np.ndarray, mp: MetricPoint, orientation: float) -> np.ndarray:
    """Hodge star on 2-forms for the given chart orientation sign."""
    det = np.linalg.det(mp.g)
    raised = mp.g_inv @ w @ mp.g_inv.T  # w^{kl}
    return 0.5 * orientation * np.sqrt(det) * np.einsum("ijkl,kl->ij", EPS4, raised)


def chart_orientation(J: np.ndarray, mp: MetricPoint) -> float:
    """Sign of the chart basis in the orientation with vol = Omega_J^2 / 2."""
    w = endo_to_form(J, mp, check=False)
    pf = w[0, 1] * w[2, 3] - w[0, 2] * w[1, 3] + w[0, 3] * w[1, 2]
    if pf == 0.0:
        raise ValueError("degenerate fundamental form")
    return float(np.sign(pf))


# ---------------------------------------------------------------------------
# J-adapted frames and quaternionic supplements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelfDualFrame:
    """Orthonormal J-frame plus quaternionic supplement and its 2-forms.

    ``E`` holds the frame vectors e1..e4 as columns (chart components), with
    J e1 = e2 and J e3 = e4.  (I, K) complete J to a quaternionic triple with
    I J K = -1, so (Omega_I, Omega_J, Omega_K) is positively oriented in the
    canonical orientation of the self-dual 2-forms.
    """

    E: np.ndarray
    J: np.ndarray
    I: np.ndarray
    K: np.ndarray
    omega_J: np.ndarray
    omega_I: np.ndarray
    omega_K: np.ndarray
    orientation: float  # chart orientation sign under vol = Omega_J^2/2
    mp: MetricPoint

    @property
    def vectors(self) -> tuple[np.ndarray, ...]:
        return tuple(self.E[:, k] for k in range(N))

    def sd_endos(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.J, self.I, self.K

    def asd_endos(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        Einv = np.linalg.inv(self.E)
        return tuple(self.E @ M @ Einv for M in (JM_STD, IM_STD, KM_STD))


def check_acs(J: np.ndarray, mp: MetricPoint, tol: float = 1e-10) -> None:
    """Validate J^2 = -1 and J* = -J."""
    r1 = np.abs(J @ J + np.eye(N)).max()
    r2 = np.abs(adjoint_endo(J, mp) + J).max()
    if max(r1, r2) > tol:
        raise FrameError(f"not a compatible almost complex structure (residuals {r1:.2e}, {r2:.2e})")


def build_j_frame(mp: MetricPoint, J: np.ndarray, seed: np.ndarray) -> SelfDualFrame:
    """Build a J-frame from a seed vector with a deterministic completion.

    e3 is the Gram-Schmidt remainder of the first chart basis vector whose
    residual against span(e1, e2) exceeds 1e-6, which makes frames
    reproducible across runs.
    """
    check_acs(J, mp)
    seed = np.asarray(seed, dtype=float)
    ns = mp.norm(seed)
    if ns < 1e-12:
        raise FrameError("degenerate frame seed")
    e1 = seed / ns
    e2 = J @ e1
    e3 = None
    for i in range(N):
        b = np.zeros(N)
        b[i] = 1.0
        r = b - mp.dot(b, e1) * e1 - mp.dot(b, e2) * e2
        if mp.norm(r) > 1e-6:
            e3 = r / mp.norm(r)
            break
    if e3 is None:
        raise FrameError("no chart basis vector completes the frame")
    e4 = J @ e3
    E = np.column_stack([e1, e2, e3, e4])
    Einv = np.linalg.inv(E)
    I = E @ I_STD @ Einv
    K = E @ K_STD @ Einv
    sigma = chart_orientation(J, mp)
    return SelfDualFrame(
        E=E,
        J=J,
        I=I,
        K=K,
        omega_J=endo_to_form(J, mp, check=False),
        omega_I=endo_to_form(I, mp, check=False),
        omega_K=endo_to_form(K, mp, check=False),
        orientation=sigma,
        mp=mp,
    )


def rotate_supplement(frame: SelfDualFrame, alpha: float) -> SelfDualFrame:
    """Rotate the quaternionic supplement: I' = cos a I - sin a K, K' = sin a I + cos a K."""
    c, s = np.cos(alpha), np.sin(alpha)
    I2 = c * frame.I - s * frame.K
    K2 = s * frame.I + c * frame.K
    return replace(
        frame,
        I=I2,
        K=K2,
        omega_I=endo_to_form(I2, frame.mp, check=False),
        omega_K=endo_to_form(K2, frame.mp, check=False),
    )
