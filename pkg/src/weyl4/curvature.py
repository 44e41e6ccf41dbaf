"""Curvature from metric jets.

The whole pipeline runs in truncated Taylor arithmetic: Christoffel symbols,
the (0,4) Riemann tensor, Ricci, scalar curvature and the (0,4) Weyl tensor
are all computed as jets, so coordinate derivatives of any of them are read
off coefficients instead of being re-approximated.

Conventions (normative throughout the package):

* ``R(X,Y) = nabla^2_{X,Y} - nabla^2_{Y,X}`` with
  ``nabla^2_{X,Y} = nabla_X nabla_Y - nabla_{nabla_X Y}``;
* ``Ric(X) = R(X, X_k) X^k`` (positive scalar curvature on round spheres),
  ``S = tr Ric``;
* (0,4) lowering ``R_{ijkl} = g(R(d_i, d_j) d_k, d_l)``;
* for skew A, ``R(A) = R(A X_k, X^k)`` and
  ``W(A) = R(A) - ({Ric, A} - (S/3) A)`` (n = 4);
* scalar Laplacian ``lap f = -g^{ij} (d_i d_j f - Gamma^k_{ij} d_k f)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exprjet import Jet, jderiv, jmul, jtruncate, jvalue, tables
from .pointgeom import MetricPoint, is_skew


class InsufficientJetOrder(ValueError):
    """A derivative of curvature was requested beyond the metric jet order."""


@dataclass(frozen=True)
class CurvatureBundle:
    """All curvature data available at one point for one metric jet order.

    Jet-valued fields carry their own truncation order (metric order minus
    the number of derivatives taken); ``*_v`` views are plain values.
    """

    mp: MetricPoint
    order: int
    gamma: np.ndarray           # (4,4,4,*) jets of Gamma^k_{ij}, index [k,i,j]
    riem: np.ndarray            # (4,4,4,4,*) jets of R_{ijkl}
    ric: np.ndarray             # (4,4,*) jets of the Ricci endomorphism [a,b]
    ric_form: np.ndarray        # (4,4,*) jets of Ric_{ij}
    S: np.ndarray               # (*,) jet of the scalar curvature
    weyl: np.ndarray            # (4,4,4,4,*) jets of W_{ijkl}
    dS: Optional[np.ndarray]    # (4,) gradient of S (order >= 3)
    nabla_ric: Optional[np.ndarray]       # (4,4,4) values (nabla_m Ric)^a_b
    nabla_ric_jets: Optional[np.ndarray]  # same, as jets (order >= 4)
    nabla2_ric: Optional[np.ndarray]      # (4,4,4,4) values (nabla^2_{m,n} Ric)^a_b
    nabla_weyl: Optional[np.ndarray]      # (4,4,4,4,4) values (nabla_m W)_{ijkl}

    @property
    def gamma_v(self) -> np.ndarray:
        return jvalue(self.gamma)

    @property
    def riem_v(self) -> np.ndarray:
        return jvalue(self.riem)

    @property
    def ric_v(self) -> np.ndarray:
        return jvalue(self.ric)

    @property
    def ric_form_v(self) -> np.ndarray:
        return jvalue(self.ric_form)

    @property
    def S_v(self) -> float:
        return float(self.S[0])

    @property
    def weyl_v(self) -> np.ndarray:
        return jvalue(self.weyl)

    def require(self, field: str):
        value = getattr(self, field)
        if value is None:
            raise InsufficientJetOrder(
                f"{field} needs higher metric jet order than {self.order}"
            )
        return value


def christoffel(mp: MetricPoint) -> np.ndarray:
    """Christoffel jets Gamma^k_{ij} = g^{kl}(d_i g_{jl} + d_j g_{il} - d_l g_{ij})/2."""
    if mp.order < 1:
        raise InsufficientJetOrder("christoffel needs metric jets of order >= 1")
    d = mp.order
    dg = np.stack([jderiv(mp.jets, v, d) for v in range(4)])  # [v,i,j] = d_v g_{ij}
    # T[l,i,j] = d_i g_{jl} + d_j g_{il} - d_l g_{ij}
    T = dg.transpose(2, 0, 1, 3) + dg.transpose(2, 1, 0, 3) - dg
    ginv = jtruncate(mp.inv_jets, d, d - 1)
    prod = jmul(ginv[:, :, None, None, :], T[None, :, :, :, :], d - 1)
    return 0.5 * prod.sum(axis=1)


def curvature_bundle(mp: MetricPoint) -> CurvatureBundle:
    """Build every curvature quantity the metric jet order supports."""
    d = mp.order
    if d < 2:
        raise InsufficientJetOrder("curvature needs metric jets of order >= 2")
    gamma = christoffel(mp)
    o2 = d - 2
    dgamma = np.stack([jderiv(gamma, v, d - 1) for v in range(4)])  # [m,k,i,j]
    gam = jtruncate(gamma, d - 1, o2)
    gg = jmul(gam[:, :, :, None, None, :], gam[None, None, :, :, :, :], o2).sum(axis=2)
    # R(d_i, d_j) d_k = rup[l,i,j,k] d_l
    rup = (
        dgamma.transpose(1, 0, 2, 3, 4)
        - dgamma.transpose(1, 2, 0, 3, 4)
        + gg
        - gg.transpose(0, 2, 1, 3, 4)
    )
    g2 = jtruncate(mp.jets, d, o2)
    ginv2 = jtruncate(mp.inv_jets, d, o2)
    # R_{ijkl} = g_{lm} rup[m,i,j,k]; the sum over the first axis of rup
    # leaves the result already ordered as [i,j,k,l]
    riem = jmul(rup[:, :, :, :, None, :], g2[:, None, None, None, :, :], o2).sum(axis=0)
    ric = jmul(rup, ginv2[None, None, :, :, :], o2).sum(axis=(2, 3))  # [a,i]
    ric_form = jmul(ric[:, :, None, :], g2[:, None, :, :], o2).sum(axis=0)  # [i,j]
    S = np.einsum("aac->c", ric)
    weyl = _weyl_04(riem, ric_form, S, g2, o2)

    dS = None
    nabla_ric = nabla_ric_jets = nabla2_ric = nabla_weyl = None
    if d >= 3:
        t = tables(o2)
        dS = np.array([S[t.pos[_unit(v)]] for v in range(4)])
        o3 = d - 3
        ric3 = jtruncate(ric, o2, o3)
        gam3 = jtruncate(gamma, d - 1, o3)
        rows = []
        for m in range(4):
            gm = gam3[:, m, :, :]  # [k, j] = Gamma^k_{mj}
            term = jderiv(ric, m, o2)
            term = term + jmul(gm[:, :, None, :], ric3[None, :, :, :], o3).sum(axis=1)
            term = term - jmul(ric3[:, :, None, :], gm[None, :, :, :], o3).sum(axis=1)
            rows.append(term)
        nabla_ric_jets = np.stack(rows)  # [m,a,b]
        nabla_ric = jvalue(nabla_ric_jets)

        dweyl = np.stack([jvalue(jderiv(weyl, v, o2)) for v in range(4)])  # [m,i,j,k,l]
        gv = jvalue(gam3)
        wv = jvalue(weyl)
        corr = (
            np.einsum("pmi,pjkl->mijkl", gv, wv)
            + np.einsum("pmj,ipkl->mijkl", gv, wv)
            + np.einsum("pmk,ijpl->mijkl", gv, wv)
            + np.einsum("pml,ijkp->mijkl", gv, wv)
        )
        nabla_weyl = dweyl - corr

    if d >= 4:
        o3 = d - 3
        gv = jvalue(gamma)
        nrv = jvalue(nabla_ric_jets)
        dnr = np.stack([jvalue(jderiv(nabla_ric_jets, v, o3)) for v in range(4)])  # [m,n,a,b]
        nabla2_ric = (
            dnr
            + np.einsum("amc,ncb->mnab", gv, nrv)
            - np.einsum("cmb,nac->mnab", gv, nrv)
            - np.einsum("pmn,pab->mnab", gv, nrv)
        )

    return CurvatureBundle(
        mp=mp,
        order=d,
        gamma=gamma,
        riem=riem,
        ric=ric,
        ric_form=ric_form,
        S=S,
        weyl=weyl,
        dS=dS,
        nabla_ric=nabla_ric,
        nabla_ric_jets=nabla_ric_jets,
        nabla2_ric=nabla2_ric,
        nabla_weyl=nabla_weyl,
    )


def _unit(v: int):
    e = [0, 0, 0, 0]
    e[v] = 1
    return tuple(e)


def _kulkarni(h: np.ndarray, k: np.ndarray, order: int) -> np.ndarray:
    """(h . k)_{ijkl} = h_{jk}k_{il} + h_{il}k_{jk} - h_{ik}k_{jl} - h_{jl}k_{ik},
    the product for which constant curvature K is (K/2)(g . g) in our sign."""
    h_jk = h[None, :, :, None, :]
    k_il = k[:, None, None, :, :]
    h_il = h[:, None, None, :, :]
    k_jk = k[None, :, :, None, :]
    h_ik = h[:, None, :, None, :]
    k_jl = k[None, :, None, :, :]
    h_jl = h[None, :, None, :, :]
    k_ik = k[:, None, :, None, :]
    return (
        jmul(h_jk, k_il, order)
        + jmul(h_il, k_jk, order)
        - jmul(h_ik, k_jl, order)
        - jmul(h_jl, k_ik, order)
    )


def _weyl_04(riem, ric_form, S, g2, order):
    """Standard Ricci decomposition, arranged so the induced operator matches
    W(A) = R(A) - {Ric,A} + (S/3)A."""
    Sg = jmul(S, g2, order)
    ric0 = ric_form - 0.25 * Sg
    corr = 0.5 * _kulkarni(ric0, g2, order) + _kulkarni(Sg / 24.0, g2, order)
    return riem - corr


# ---------------------------------------------------------------------------
# Operators on skew endomorphisms
# ---------------------------------------------------------------------------


def tensor_operator(C: np.ndarray, A: np.ndarray, mp: MetricPoint) -> np.ndarray:
    """Contract a (0,4) curvature-type tensor against a skew endo:
    C(A) = C(A X_k, X^k), returned as an endomorphism matrix."""
    return np.einsum("pk,km,an,pmbn->ab", A, mp.g_inv, mp.g_inv, C)


def curvature_operator(A: np.ndarray, bundle: CurvatureBundle) -> np.ndarray:
    """R(A) = R(A X_k, X^k) for skew A."""
    if not is_skew(A, bundle.mp):
        raise ValueError("curvature operator expects a skew endomorphism")
    return tensor_operator(bundle.riem_v, A, bundle.mp)


def weyl_operator(A: np.ndarray, bundle: CurvatureBundle) -> np.ndarray:
    """W(A) = R(A) - ({Ric, A} - (S/3) A)."""
    if not is_skew(A, bundle.mp):
        raise ValueError("weyl operator expects a skew endomorphism")
    RA = tensor_operator(bundle.riem_v, A, bundle.mp)
    ric = bundle.ric_v
    return RA - (ric @ A + A @ ric) + (bundle.S_v / 3.0) * A


def covariant_derivatives(bundle: CurvatureBundle):
    """(nabla Ric, nabla^2 Ric, nabla W) values; errors if the jet order is short."""
    return (
        bundle.require("nabla_ric"),
        bundle.require("nabla2_ric"),
        bundle.require("nabla_weyl"),
    )


def laplacian_scalar(f: Jet | np.ndarray, bundle: CurvatureBundle) -> float:
    """lap f = -g^{ij}(d_i d_j f - Gamma^k_{ij} d_k f) (sign: -trace of Hessian)."""
    coeffs = f.coeffs if isinstance(f, Jet) else np.asarray(f)
    order = {tables(n).ncoef: n for n in range(5)}.get(coeffs.shape[-1])
    if order is None or order < 2:
        raise InsufficientJetOrder("laplacian needs a scalar jet of order >= 2")
    t = tables(order)
    grad = np.array([coeffs[t.pos[_unit(v)]] for v in range(4)])
    hess = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            alpha = [0, 0, 0, 0]
            alpha[i] += 1
            alpha[j] += 1
            factor = 2.0 if i == j else 1.0
            hess[i, j] = coeffs[t.pos[tuple(alpha)]] * factor
    gv = bundle.gamma_v
    return float(-np.einsum("ij,ij->", bundle.mp.g_inv, hess - np.einsum("kij,k->ij", gv, grad)))
