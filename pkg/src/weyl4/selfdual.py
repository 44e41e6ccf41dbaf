"""Self-dual / anti-self-dual splitting and the W+ apparatus.

Operators on 2-forms are handled through matrices M with
``(C w)_{ij} = M[i,j,k,l] w_{kl}`` (full sums).  For the operator induced by
a (0,4) curvature-type tensor C via ``C(A) = C(A X_k, X^k)`` this matrix is
``M = -C_{ij}^{kl}``; the trace of such an operator over the 6-dimensional
space of 2-forms is ``M[i,j,i,j]``.

Norms of operators on the self-dual bundle use the full trace (so the
squared norm of W+ is the Frobenius norm of its 3x3 matrix in the
orthonormal basis (Omega_J, Omega_I, Omega_K)); norms of individual
endomorphisms keep the 1/4-weighted product from pointgeom.  Only this
assignment makes the characteristic-polynomial and projection identities
consistent, which the conditions module verifies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import CurvatureBundle
from .exprjet import Jet, jmul, jtruncate, jdet4, jet_sqrt
from .pointgeom import (
    EPS4,
    MetricPoint,
    SelfDualFrame,
    endo_to_form,
    form_to_endo,
    inner_endo,
)


# ---------------------------------------------------------------------------
# Operator matrices on 2-forms
# ---------------------------------------------------------------------------


def form_operator(C04: np.ndarray, mp: MetricPoint) -> np.ndarray:
    """Matrix of the operator induced by a (0,4) tensor: (Cw)_{ij} = M[ijkl] w_{kl}."""
    return -np.einsum("ijab,ak,bl->ijkl", C04, mp.g_inv, mp.g_inv)


def operator_to_04(M: np.ndarray, mp: MetricPoint) -> np.ndarray:
    return -np.einsum("ijab,ak,bl->ijkl", M, mp.g, mp.g)


def identity_operator() -> np.ndarray:
    eye = np.eye(4)
    return 0.5 * (np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("il,jk->ijkl", eye, eye))


def star_operator(mp: MetricPoint, orientation: float) -> np.ndarray:
    factor = 0.5 * orientation * np.sqrt(np.linalg.det(mp.g))
    return factor * np.einsum("ijab,ak,bl->ijkl", EPS4, mp.g_inv, mp.g_inv)


def compose(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    return np.einsum("ijmk,mkab->ijab", M1, M2)


def apply_form_operator(M: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("ijkl,kl->ij", M, w)


def pm_projectors(mp: MetricPoint, orientation: float) -> tuple[np.ndarray, np.ndarray]:
    ident = identity_operator()
    star = star_operator(mp, orientation)
    return 0.5 * (ident + star), 0.5 * (ident - star)


def interior_product(U: np.ndarray, C04: np.ndarray, mp: MetricPoint) -> np.ndarray:
    """(U .| C)(X) = C(U, X) as an endomorphism table [direction, a, b]."""
    return np.einsum("m,an,mibn->iab", U, mp.g_inv, C04)


# ---------------------------------------------------------------------------
# Lambda^2 basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lambda2Basis:
    """Six orthonormal 2-forms, the first three spanning the self-dual part."""

    endos: tuple        # (J, I, K, J-, I-, K-) endomorphisms
    forms: tuple        # corresponding 2-forms
    star_signs: tuple   # (+1,+1,+1,-1,-1,-1)
    frame: SelfDualFrame
    mp: MetricPoint

    @property
    def sd(self) -> tuple:
        return self.endos[:3]

    @property
    def asd(self) -> tuple:
        return self.endos[3:]

    def project_plus(self, A: np.ndarray) -> np.ndarray:
        return sum(inner_endo(B, A, self.mp) * B for B in self.sd)

    def project_minus(self, A: np.ndarray) -> np.ndarray:
        return sum(inner_endo(B, A, self.mp) * B for B in self.asd)


def lambda2_split(frame: SelfDualFrame, mp: MetricPoint) -> Lambda2Basis:
    endos = frame.sd_endos() + frame.asd_endos()
    forms = tuple(endo_to_form(A, mp, check=False) for A in endos)
    return Lambda2Basis(
        endos=endos,
        forms=forms,
        star_signs=(1.0, 1.0, 1.0, -1.0, -1.0, -1.0),
        frame=frame,
        mp=mp,
    )


# ---------------------------------------------------------------------------
# W+ as a 3x3 matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WplusMatrix:
    m: np.ndarray           # symmetric traceless 3x3 in (Omega_J, Omega_I, Omega_K)
    norm2: float            # full-trace |W+|^2 = Frobenius(m)^2
    det: float
    eigenvalues: np.ndarray  # sorted descending

    @staticmethod
    def from_matrix(m: np.ndarray) -> "WplusMatrix":
        sym = 0.5 * (m + m.T)
        eig = np.sort(np.linalg.eigvalsh(sym))[::-1]
        return WplusMatrix(
            m=m,
            norm2=float(np.sum(m * m)),
            det=float(np.linalg.det(m)),
            eigenvalues=eig,
        )


def _operator_matrix_on(endos, op, mp) -> np.ndarray:
    k = len(endos)
    m = np.empty((k, k))
    for b, B in enumerate(endos):
        image = op(B)
        for a, A in enumerate(endos):
            m[a, b] = inner_endo(A, image, mp)
    return m


def wplus_matrix(bundle: CurvatureBundle, basis: Lambda2Basis) -> WplusMatrix:
    """W+ in the orthonormal self-dual basis, via the weighted pairing."""
    from .curvature import tensor_operator

    mp = basis.mp
    op = lambda A: tensor_operator(bundle.weyl_v, A, mp)
    return WplusMatrix.from_matrix(_operator_matrix_on(basis.sd, op, mp))


def wminus_matrix(bundle: CurvatureBundle, basis: Lambda2Basis) -> WplusMatrix:
    from .curvature import tensor_operator

    mp = basis.mp
    op = lambda A: tensor_operator(bundle.weyl_v, A, mp)
    return WplusMatrix.from_matrix(_operator_matrix_on(basis.asd, op, mp))


def wplus_invariants(w: WplusMatrix) -> dict:
    """Spectral invariants and the two-eigenvalue predicate of the char poly
    chi(t) = t^3 - |W+|^2/2 t - det(W+)."""
    return {
        "norm2": w.norm2,
        "det": w.det,
        "char_poly": (1.0, 0.0, -0.5 * w.norm2, -w.det),
        "eigenvalues": w.eigenvalues,
        "two_eigenvalue_residual": w.det**2 - w.norm2**3 / 54.0,
    }


def weyl_pm_04(bundle: CurvatureBundle, frame: SelfDualFrame) -> tuple[np.ndarray, np.ndarray]:
    """(0,4) components of W+ and W- (operator composed with the projections)."""
    mp = bundle.mp
    Pp, Pm = pm_projectors(mp, frame.orientation)
    M = form_operator(bundle.weyl_v, mp)
    return operator_to_04(compose(M, Pp), mp), operator_to_04(compose(M, Pm), mp)


# ---------------------------------------------------------------------------
# Divergence and derivative norms
# ---------------------------------------------------------------------------


def delta_w_full(bundle: CurvatureBundle) -> np.ndarray:
    """delta W(X) = (nabla_{X_k} W)(X, X^k) as an endo table [i,a,b]."""
    nw = bundle.require("nabla_weyl")
    gi = bundle.mp.g_inv
    return np.einsum("km,an,kimbn->iab", gi, gi, nw)


def delta_wpm(bundle: CurvatureBundle, frame: SelfDualFrame) -> tuple[np.ndarray, np.ndarray]:
    """(delta W+, delta W-) from the local divergence formula applied to the
    projected derivative tensors (nabla_k W) P_pm."""
    nw = bundle.require("nabla_weyl")
    mp = bundle.mp
    Pp, Pm = pm_projectors(mp, frame.orientation)
    out = []
    for P in (Pp, Pm):
        C = np.stack(
            [operator_to_04(compose(form_operator(nw[k], mp), P), mp) for k in range(4)]
        )
        out.append(np.einsum("km,an,kimbn->iab", mp.g_inv, mp.g_inv, C))
    return out[0], out[1]


def nabla_w_sd_matrices(bundle: CurvatureBundle, frame: SelfDualFrame) -> np.ndarray:
    """3x3 matrices of nabla_p W+ in the (J, I, K) basis, one per direction."""
    nw = bundle.require("nabla_weyl")
    mp = bundle.mp
    basis = frame.sd_endos()
    out = np.empty((4, 3, 3))
    for p in range(4):
        M = form_operator(nw[p], mp)
        for b, B in enumerate(basis):
            image = form_to_endo(apply_form_operator(M, endo_to_form(B, mp, check=False)), mp, check=False)
            for a, A in enumerate(basis):
                out[p, a, b] = inner_endo(A, image, mp)
    return out


def nabla_wplus_norm2(bundle: CurvatureBundle, frame: SelfDualFrame) -> float:
    """|nabla W+|^2 = g^{pq} tr(nabla_p W+ o nabla_q W+) (full 3x3 trace)."""
    n = nabla_w_sd_matrices(bundle, frame)
    return float(np.einsum("pq,pab,qba->", bundle.mp.g_inv, n, n))


def wplus_norm2_jet(bundle: CurvatureBundle, orientation: float) -> Jet:
    """|W+|^2 as a scalar jet (frame-free), for gradients and Laplacians.

    Uses the trace over 2-forms: |W+|^2 = (tr W^2 + tr(W^2 star))/2, with
    every factor run through jet arithmetic.
    """
    d = bundle.order - 2
    if d < 0:
        raise ValueError("bundle lacks Weyl jets")
    mp = bundle.mp
    g = jtruncate(mp.jets, bundle.order, d)
    gi = jtruncate(mp.inv_jets, bundle.order, d)
    W = bundle.weyl

    def raise_last(T):
        # contract the third-from-last tensor index of T[..., a, x, c] style
        # layouts; here: A[i,j,b,k] = sum_a T[i,j,a,b] g^{ak}
        tmp = jmul(T[:, :, :, :, None, :], gi[None, None, :, None, :, :], d)
        return tmp.sum(axis=2)

    A = raise_last(W)          # [i,j,b,k]
    Wud = raise_last(A)        # [i,j,k,l] = W_{ij}^{kl}
    M = -Wud
    T2 = jmul(M[:, :, :, :, None, None, :], M[None, None, :, :, :, :, :], d).sum(axis=(2, 3))
    tr_w2 = np.einsum("ijijc->c", T2)

    sqrt_det = jet_sqrt(Jet(jdet4(g, d), d)).coeffs
    # EPS4 is constant, so the first raising is a plain contraction
    step = np.einsum("ijab,akc->ijbkc", EPS4, gi)  # [i,j,b,k]
    step2 = jmul(step[:, :, :, :, None, :], gi[None, None, :, None, :, :], d).sum(axis=2)  # [i,j,k,l]
    Mstar = (0.5 * orientation) * jmul(step2, sqrt_det, d)
    prod = jmul(T2, Mstar.transpose(2, 3, 0, 1, 4), d)  # T2[i,j,a,b] * Mstar[a,b,i,j]
    tr_w2_star = prod.sum(axis=(0, 1, 2, 3))
    return Jet(0.5 * (tr_w2 + tr_w2_star), d)
