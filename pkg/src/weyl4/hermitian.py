"""Curvature quantities that involve the almost complex structure.

Star Ricci tensor and its triangle/box companions for the quaternionic
supplement, their symmetric/skew splittings, the tensor Rt with
``Rt(X,Y) = [R(X,Y) - R(JX,JY), J] J / 4``, nabla J with its (xi, eta)
frame coefficients, the Nijenhuis tensor, the algebraic 1-form Theta, the
scalar q(J) built from the second covariant derivative of Ricci, and the
phi/psi pairing that obstructs the Kahler property on compact manifolds.

All endomorphisms are chart-basis matrices; ``frame`` supplies (I, K).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import CurvatureBundle
from .exprjet import Jet, jderiv, jmul, jtruncate, jvalue
from .pointgeom import (
    MetricPoint,
    SelfDualFrame,
    adjoint_endo,
    chart_orientation,
    endo_to_form,
    hodge_star,
    inner_endo,
    norm_endo,
)
from .selfdual import (
    identity_operator,
    interior_product,
    operator_to_04,
    star_operator,
)


@dataclass(frozen=True)
class AcsPoint:
    """Almost complex structure at a point: matrix, fundamental form, jets."""

    J: np.ndarray
    omega: np.ndarray
    jets: np.ndarray
    order: int
    mp: MetricPoint

    @staticmethod
    def from_jets(j_jets: np.ndarray, mp: MetricPoint, tol: float = 1e-10) -> "AcsPoint":
        order = None
        from .exprjet import tables

        for n in range(5):
            if tables(n).ncoef == j_jets.shape[-1]:
                order = n
        if order is None:
            raise ValueError("bad jet coefficient count")
        J = jvalue(j_jets)
        r1 = np.abs(J @ J + np.eye(4)).max()
        r2 = np.abs(adjoint_endo(J, mp) + J).max()
        if max(r1, r2) > tol:
            raise ValueError(
                f"not a compatible almost complex structure (J^2 residual {r1:.2e}, adjoint {r2:.2e})"
            )
        omega = endo_to_form(J, mp, check=False)
        sigma = chart_orientation(J, mp)
        r3 = np.abs(hodge_star(omega, mp, sigma) - omega).max()
        if r3 > tol * max(np.abs(omega).max(), 1.0):
            raise ValueError(f"fundamental form not self-dual (residual {r3:.2e})")
        return AcsPoint(J=J, omega=omega, jets=j_jets, order=order, mp=mp)


@dataclass(frozen=True)
class StarCurvature:
    """The J-dependent curvature family at a point, for one supplement (I, K)."""

    ric_star: np.ndarray
    ric_plus: np.ndarray
    ric_minus: np.ndarray
    ric_star_plus: np.ndarray
    ric_star_minus: np.ndarray
    s_star: float
    ric_tri: np.ndarray
    ric_box: np.ndarray
    ric_tri_plus: np.ndarray
    ric_tri_minus: np.ndarray
    ric_box_plus: np.ndarray
    ric_box_minus: np.ndarray
    s_tri: float
    s_box: float
    lam: float                      # (S_star - S/3)/4
    rtilde_I: np.ndarray
    rtilde_K: np.ndarray
    rt2: float                      # |Rt|^2
    rtp2: float                     # |Rt^+|^2
    rtm2: float                     # |Rt^-|^2
    ric_star_minus2: float
    ric_tri_minus2: float
    ric_box_minus2: float
    j_dot_tri_minus: float          # <J, Ric_tri^->
    rho: np.ndarray                 # Ricci form of Ric^+ J
    rho_star: np.ndarray
    rho_star_plus: np.ndarray
    rho_star_minus: np.ndarray


def _r_op(bundle: CurvatureBundle) -> np.ndarray:
    """Endomorphisms R(d_p, d_m): r_op[p,m,a,b] with R(d_p,d_m) d_b = r_op[p,m,a,b] d_a."""
    return np.einsum("an,pmbn->pmab", bundle.mp.g_inv, bundle.riem_v)


def star_ricci_endo(A: np.ndarray, bundle: CurvatureBundle, r_op: np.ndarray | None = None) -> np.ndarray:
    """Star Ricci of the structure A: X -> R(AX, A X_k) X^k."""
    if r_op is None:
        r_op = _r_op(bundle)
    gi = bundle.mp.g_inv
    return np.einsum("mi,nk,kl,mnal->ai", A, A, gi, r_op)


def rtilde_table(bundle: CurvatureBundle, J: np.ndarray, r_op: np.ndarray | None = None) -> np.ndarray:
    """Rt(d_p, d_m) = [R(d_p,d_m) - R(J d_p, J d_m), J] J / 4 as [p,m,a,b]."""
    if r_op is None:
        r_op = _r_op(bundle)
    rjj = np.einsum("ap,bm,abcd->pmcd", J, J, r_op)
    D = r_op - rjj
    comm = np.einsum("pmac,cb->pmab", D, J) - np.einsum("ac,pmcb->pmab", J, D)
    return 0.25 * np.einsum("pmac,cb->pmab", comm, J)


def rtilde_operator(A: np.ndarray, bundle: CurvatureBundle, J: np.ndarray, rt: np.ndarray | None = None) -> np.ndarray:
    """Rt(A) = Rt(A X_k, X^k) (defined for any endomorphism by contraction)."""
    if rt is None:
        rt = rtilde_table(bundle, J)
    return np.einsum("pk,km,pmab->ab", A, bundle.mp.g_inv, rt)


def rictilde_endo(bundle: CurvatureBundle, J: np.ndarray, rt: np.ndarray | None = None) -> np.ndarray:
    """Rtic(X) = Rt(X, X_k) X^k from the definition."""
    if rt is None:
        rt = rtilde_table(bundle, J)
    return np.einsum("km,ikam->ai", bundle.mp.g_inv, rt)


def triangle_box_ricci(bundle: CurvatureBundle, frame: SelfDualFrame, r_op: np.ndarray | None = None):
    """Star Ricci tensors of the local structures (g, I) and (g, K) with their
    symmetric/skew parts; returns (ric_tri, ric_box, s_tri, s_box, parts)."""
    if r_op is None:
        r_op = _r_op(bundle)
    mp = bundle.mp
    ric_tri = star_ricci_endo(frame.I, bundle, r_op)
    ric_box = star_ricci_endo(frame.K, bundle, r_op)
    parts = {}
    for name, R in (("tri", ric_tri), ("box", ric_box)):
        Rs = adjoint_endo(R, mp)
        parts[name + "_plus"] = 0.5 * (R + Rs)
        parts[name + "_minus"] = 0.5 * (R - Rs)
    return ric_tri, ric_box, float(np.trace(ric_tri)), float(np.trace(ric_box)), parts


def star_ricci_family(bundle: CurvatureBundle, acs: AcsPoint, frame: SelfDualFrame) -> StarCurvature:
    mp = bundle.mp
    J = acs.J
    r_op = _r_op(bundle)
    ric = bundle.ric_v

    ric_star = star_ricci_endo(J, bundle, r_op)
    ric_star_adj = adjoint_endo(ric_star, mp)
    ric_plus = 0.5 * (ric - J @ ric @ J)
    ric_minus = 0.5 * (ric + J @ ric @ J)
    ric_star_plus = 0.5 * (ric_star + ric_star_adj)
    ric_star_minus = 0.5 * (ric_star - ric_star_adj)
    s_star = float(np.trace(ric_star))
    lam = 0.25 * (s_star - bundle.S_v / 3.0)

    ric_tri, ric_box, s_tri, s_box, parts = triangle_box_ricci(bundle, frame, r_op)

    rt = rtilde_table(bundle, J, r_op)
    rt_I = rtilde_operator(frame.I, bundle, J, rt)
    rt_K = rtilde_operator(frame.K, bundle, J, rt)
    rt_JI = rtilde_operator(J @ frame.I, bundle, J, rt)
    rt_JK = rtilde_operator(J @ frame.K, bundle, J, rt)
    rtp_I = 0.5 * (rt_I + rt_JI @ J)
    rtp_K = 0.5 * (rt_K + rt_JK @ J)
    rtm_I = rt_I - rtp_I
    rtm_K = rt_K - rtp_K

    def n2(A):
        return inner_endo(A, A, mp)

    return StarCurvature(
        ric_star=ric_star,
        ric_plus=ric_plus,
        ric_minus=ric_minus,
        ric_star_plus=ric_star_plus,
        ric_star_minus=ric_star_minus,
        s_star=s_star,
        ric_tri=ric_tri,
        ric_box=ric_box,
        ric_tri_plus=parts["tri_plus"],
        ric_tri_minus=parts["tri_minus"],
        ric_box_plus=parts["box_plus"],
        ric_box_minus=parts["box_minus"],
        s_tri=s_tri,
        s_box=s_box,
        lam=lam,
        rtilde_I=rt_I,
        rtilde_K=rt_K,
        rt2=n2(rt_I) + n2(rt_K),
        rtp2=n2(rtp_I) + n2(rtp_K),
        rtm2=n2(rtm_I) + n2(rtm_K),
        ric_star_minus2=n2(ric_star_minus),
        ric_tri_minus2=n2(parts["tri_minus"]),
        ric_box_minus2=n2(parts["box_minus"]),
        j_dot_tri_minus=inner_endo(J, parts["tri_minus"], mp),
        rho=endo_to_form(ric_plus @ J, mp, check=False),
        rho_star=endo_to_form(ric_star @ J, mp, check=False),
        rho_star_plus=endo_to_form(ric_star_plus @ J, mp, check=False),
        rho_star_minus=endo_to_form(ric_star_minus @ J, mp, check=False),
    )


# ---------------------------------------------------------------------------
# nabla J and friends
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NablaJData:
    nabla_j: np.ndarray        # [m,a,b] = (nabla_m J)^a_b
    xi: np.ndarray             # vector with nabla_X J = g(xi,X) I + g(eta,X) K
    eta: np.ndarray
    xi_form: np.ndarray        # g(xi, .) components
    eta_form: np.ndarray
    d_omega: np.ndarray        # [i,j,k] components of d Omega
    delta_omega: np.ndarray    # co-differential, (4,)
    nijenhuis: np.ndarray      # [a,i,j] = N(d_i, d_j)^a
    norm2: float               # |nabla J|^2 (weighted)
    quasi_kahler_residual: float
    reconstruction_residual: float

    @property
    def d_omega_norm(self) -> float:
        return float(np.abs(self.d_omega).max())

    @property
    def nijenhuis_norm(self) -> float:
        return float(np.abs(self.nijenhuis).max())

    @property
    def nabla_j_norm(self) -> float:
        return float(np.abs(self.nabla_j).max())


def nabla_j_data(acs: AcsPoint, bundle: CurvatureBundle, frame: SelfDualFrame) -> NablaJData:
    if acs.order < 1:
        raise ValueError("nabla J needs J jets of order >= 1")
    mp = bundle.mp
    gv = bundle.gamma_v
    J = acs.J
    dJ = np.stack([jvalue(jderiv(acs.jets, m, acs.order)) for m in range(4)])  # [m,a,b]
    nabla_j = dJ + np.einsum("amc,cb->mab", gv, J) - np.einsum("cmb,ac->mab", gv, J)

    xi_form = np.array([inner_endo(frame.I, nabla_j[m], mp) for m in range(4)])
    eta_form = np.array([inner_endo(frame.K, nabla_j[m], mp) for m in range(4)])
    xi = mp.g_inv @ xi_form
    eta = mp.g_inv @ eta_form
    recon = nabla_j - np.einsum("m,ab->mab", xi_form, frame.I) - np.einsum("m,ab->mab", eta_form, frame.K)

    # Omega as jets (for d Omega), then the covariant pieces from values
    o = min(acs.order, bundle.order)
    jj = jtruncate(acs.jets, acs.order, o)
    gj = jtruncate(mp.jets, mp.order, o)
    omega_jets = jmul(jj[:, :, None, :], gj[:, None, :, :], o).sum(axis=0)  # (J^T g)_{ij}
    d_omega_partials = np.stack([jvalue(jderiv(omega_jets, m, o)) for m in range(4)])  # [m,i,j]
    # (d Omega)_{ijk} = d_i O_{jk} - d_j O_{ik} + d_k O_{ij}
    d_omega = (
        d_omega_partials
        - d_omega_partials.transpose(1, 0, 2)
        + d_omega_partials.transpose(1, 2, 0)
    )
    omega = jvalue(omega_jets)
    nabla_omega = (
        d_omega_partials
        - np.einsum("pmi,pj->mij", gv, omega)
        - np.einsum("pmj,ip->mij", gv, omega)
    )
    delta_omega = -np.einsum("mi,mij->j", mp.g_inv, nabla_omega)

    # N(X,Y) = (nabla_{JX} J)Y - (nabla_{JY} J)X + (nabla_X J)(JY) - (nabla_Y J)(JX)
    t1 = np.einsum("mi,maj->aij", J, nabla_j)
    t2 = np.einsum("iac,cj->aij", nabla_j, J)
    nijenhuis = t1 - t1.transpose(0, 2, 1) + t2 - t2.transpose(0, 2, 1)

    # |nabla J|^2 = g^{km} <nabla_k J, nabla_m J> with the weighted product
    inner = np.array(
        [[inner_endo(nabla_j[k], nabla_j[m], mp) for m in range(4)] for k in range(4)]
    )
    norm2 = float(np.einsum("km,km->", mp.g_inv, inner))

    qk = np.einsum("pm,pab->mab", J, nabla_j) - np.einsum("mac,cb->mab", nabla_j, J)

    return NablaJData(
        nabla_j=nabla_j,
        xi=xi,
        eta=eta,
        xi_form=xi_form,
        eta_form=eta_form,
        d_omega=d_omega,
        delta_omega=delta_omega,
        nijenhuis=nijenhuis,
        norm2=norm2,
        quasi_kahler_residual=float(np.abs(qk).max()),
        reconstruction_residual=float(np.abs(recon).max()),
    )


def rictilde_ak_check(
    nabla_j: NablaJData,
    star: StarCurvature,
    bundle: CurvatureBundle,
    gate: float = 1e-8,
):
    """Almost-Kahler identities: Rtic = -(1/4) nabla_{X_k} J nabla_{X^k} J and
    S_star - S = 2 |nabla J|^2.  Returns (applicable, residual_30, residual_31)."""
    mp = bundle.mp
    scale = max(np.abs(nabla_j.nabla_j).max(), 1.0)
    if nabla_j.d_omega_norm > gate * scale:
        return False, None, None
    curv = max(abs(bundle.S_v), float(np.abs(bundle.ric_v).max()), 1.0)
    lhs = 0.5 * (star.ric_star_plus - star.ric_plus)
    rhs = -0.25 * np.einsum("km,kac,mcb->ab", mp.g_inv, nabla_j.nabla_j, nabla_j.nabla_j)
    denom = max(norm_endo(lhs, mp), norm_endo(rhs, mp), curv)
    r30 = norm_endo(lhs - rhs, mp) / denom
    lhs31 = 0.5 * (star.s_star - bundle.S_v)
    r31 = abs(lhs31 - nabla_j.norm2) / max(abs(lhs31), abs(nabla_j.norm2), curv)
    return True, r30, r31


# ---------------------------------------------------------------------------
# Projections, Theta, q(J), pairings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionData:
    p1_pairing: float    # <W+, P_1> (full trace)
    p2_pairing: float
    two_lambda: float
    F: np.ndarray        # 3x3 matrix of lambda (2 P_1 - P_2)
    G: np.ndarray        # W+ - F
    g_norm2: float       # |G|^2 (full trace)


def projections_p1p2(star: StarCurvature, wplus_m: np.ndarray) -> ProjectionData:
    F = star.lam * np.diag([2.0, -1.0, -1.0])
    G = wplus_m - F
    return ProjectionData(
        p1_pairing=float(wplus_m[0, 0]),
        p2_pairing=float(wplus_m[1, 1] + wplus_m[2, 2]),
        two_lambda=2.0 * star.lam,
        F=F,
        G=G,
        g_norm2=float(np.sum(G * G)),
    )


def theta_form(bundle: CurvatureBundle, frame: SelfDualFrame) -> np.ndarray:
    """Theta(X) = (2 dS(JX) J - dS(IX) I - dS(KX) K)/24 as [i,a,b]."""
    dS = bundle.require("dS")
    out = np.zeros((4, 4, 4))
    for A, coef in ((frame.J, 2.0), (frame.I, -1.0), (frame.K, -1.0)):
        out += coef * np.einsum("i,ab->iab", A.T @ dS, A) / 24.0
    return out


def p1_p2_operators(frame: SelfDualFrame, mp: MetricPoint):
    """Form-operator matrices of P_1 (projection on the Omega_J axis) and
    P_2 = P_+ - P_1."""
    w = frame.omega_J
    w_up = mp.g_inv @ w @ mp.g_inv.T
    P1 = 0.25 * np.einsum("ij,kl->ijkl", w, w_up)
    Pp = 0.5 * (identity_operator() + star_operator(mp, frame.orientation))
    return P1, Pp - P1


def theta_form_interior(bundle: CurvatureBundle, frame: SelfDualFrame) -> np.ndarray:
    """Theta = (1/6) grad S .| (2 P_1 - P_2) through the 2-form correspondence."""
    mp = bundle.mp
    dS = bundle.require("dS")
    P1, P2 = p1_p2_operators(frame, mp)
    C = operator_to_04(2.0 * P1 - P2, mp)
    return interior_product(mp.g_inv @ dS, C, mp) / 6.0


def q_j_integrand(bundle: CurvatureBundle, acs: AcsPoint) -> float:
    """q(J) = g((nabla^2_{X_k,X_l} Ric) J X^k, J X^l)."""
    n2r = bundle.require("nabla2_ric")
    mp = bundle.mp
    J = acs.J
    return float(
        np.einsum("ka,lb,ca,db,ed,klec->", mp.g_inv, mp.g_inv, J, J, mp.g, n2r)
    )


def ric_derivative_vector(A: np.ndarray, bundle: CurvatureBundle) -> np.ndarray:
    """v_A = (nabla_{X_k} Ric) A X^k as a vector (components v^c)."""
    nr = bundle.require("nabla_ric")
    gi = bundle.mp.g_inv
    return np.einsum("ka,ba,kcb->c", gi, A, nr)


def gl121_delta_wplus(bundle: CurvatureBundle, frame: SelfDualFrame) -> np.ndarray:
    """delta W+ from nabla Ric and dS alone (positively oriented (I, J, K))."""
    mp = bundle.mp
    dS = bundle.require("dS")
    out = np.zeros((4, 4, 4))
    for A in (frame.I, frame.J, frame.K):
        vA = ric_derivative_vector(A, bundle)
        out += 0.25 * np.einsum("i,ab->iab", mp.g @ vA, A)
        out += np.einsum("i,ab->iab", A.T @ dS, A) / 24.0
    return out


def phi_psi_pairing(bundle: CurvatureBundle, nabla_j: NablaJData, frame: SelfDualFrame, gate: float = 1e-8):
    """<phi, psi> two ways: the 2-form contraction against antisymmetrized
    nabla Ric, and the (xi, eta) expression.  Returns (applicable, v1, v2)."""
    mp = bundle.mp
    scale = max(np.abs(nabla_j.nabla_j).max(), 1.0)
    if nabla_j.d_omega_norm > gate * scale:
        return False, None, None
    nr = bundle.require("nabla_ric")
    J = frame.J
    phi = nabla_j.nabla_j.transpose(1, 0, 2) - nabla_j.nabla_j.transpose(1, 2, 0)  # [e,a,b]
    jphi = np.einsum("fe,eab->fab", J, phi)
    # v[k,n,l] = (nabla_k Ric)^n_l - (nabla_l Ric)^n_k
    v = nr - nr.transpose(2, 1, 0)
    via126 = 0.25 * np.einsum("ka,lb,fn,fab,knl->", mp.g_inv, mp.g_inv, mp.g, jphi, v)
    vK = ric_derivative_vector(frame.K, bundle)
    vI = ric_derivative_vector(frame.I, bundle)
    via130 = 0.5 * float(vK @ mp.g @ nabla_j.xi) - 0.5 * float(vI @ mp.g @ nabla_j.eta)
    return True, float(via126), float(via130)


def conformal_nabla_j(nabla_j: NablaJData, frame: SelfDualFrame, f_jet: Jet) -> np.ndarray:
    """Predicted nabla J under gbar = exp(f) g:
    (nabla-bar_X J) = nabla_X J + df(KX) I / 2 - df(IX) K / 2."""
    df = f_jet.gradient()
    return (
        nabla_j.nabla_j
        + 0.5 * np.einsum("m,ab->mab", frame.K.T @ df, frame.I)
        - 0.5 * np.einsum("m,ab->mab", frame.I.T @ df, frame.K)
    )


def conformal_bracket(f_grad: np.ndarray, X: np.ndarray, frame: SelfDualFrame) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of [df (x) X - g(X) (x) grad f, J] = df(KX) I - df(IX) K."""
    mp = frame.mp
    grad = mp.g_inv @ f_grad
    B = np.einsum("b,a->ab", f_grad, X) - np.einsum("b,a->ab", mp.g @ X, grad)
    lhs = B @ frame.J - frame.J @ B
    rhs = float(f_grad @ (frame.K @ X)) * frame.I - float(f_grad @ (frame.I @ X)) * frame.K
    return lhs, rhs


# ---------------------------------------------------------------------------
# Star scalar curvature as a jet (for d lambda)
# ---------------------------------------------------------------------------


def s_star_jet(bundle: CurvatureBundle, acs: AcsPoint) -> Jet:
    """S_star as a scalar jet, from Riemann jets and J jets."""
    d = min(bundle.order - 2, acs.order)
    mp = bundle.mp
    riem = jtruncate(bundle.riem, bundle.order - 2, d)
    gi = jtruncate(mp.inv_jets, mp.order, d)
    jj = jtruncate(acs.jets, acs.order, d)
    # rop[p,m,a,l]: raise the last Riemann index
    tmp = jmul(riem[:, :, :, :, None, :], gi[None, None, None, :, :, :], d).sum(axis=3)  # [p,m,l,a]
    rop = tmp.transpose(0, 1, 3, 2, 4)
    C = jmatmul_like(jj, gi, d)  # C[n,l] = J^n_k g^{kl}
    # E[m,n,a] = sum_l rop[m,n,a,l] C[n,l]
    E = jmul(rop, C[None, :, None, :, :], d).sum(axis=3)
    G = E.sum(axis=1)  # [m,a]
    ric_star = jmul(jj[:, :, None, :], G[:, None, :, :], d).sum(axis=0)  # [i,a]
    return Jet(np.einsum("iic->c", ric_star), d)


def jmatmul_like(A: np.ndarray, B: np.ndarray, order: int) -> np.ndarray:
    return jmul(A[:, :, None, :], B[None, :, :, :], order).sum(axis=1)


def lambda_jet(bundle: CurvatureBundle, acs: AcsPoint) -> Jet:
    """lambda = (S_star - S/3)/4 as a scalar jet."""
    ss = s_star_jet(bundle, acs)
    S = jtruncate(bundle.S, bundle.order - 2, ss.order)
    return Jet(0.25 * (ss.coeffs - S / 3.0), ss.order)
