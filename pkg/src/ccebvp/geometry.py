"""Metric reconstruction and curvature computations.

The solution profile's log variables are converted to the slice components
I_i(x); warped radii a_i = sinh(r) sqrt(I_i) give the radial sectional
curvatures K0_i = -(d^2 a_i/dr^2)/a_i exactly, and tangential plane
curvatures come from the homogeneous-slice curvature assembly (structure
constants) through the Gauss equation.  r-derivatives always use the chain
rule dx/dr = -x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .structure import StructureConstants, has_slice_structure, slice_structure
from .systems import BoundaryData, DomainError, UsageError, family


class InfeasibleProfileError(DomainError):
    """Profile produced non-finite metric components."""


def log_component_matrix(bd: BoundaryData) -> np.ndarray:
    """Matrix W with log I = W y for the distinct slice directions."""
    n, fam = bd.n, bd.kind.family
    if fam == "gberger":
        return np.array([[1.0, -2.0, -1.0], [1.0, 1.0, -1.0], [1.0, 1.0, 2.0]]) / 3.0
    if fam == "su":
        return np.array([[1.0, 1.0 - n], [1.0, 1.0]]) / n
    w4 = np.array([1.0, -1.0, -1.0, -1.0]) / n
    rows = [w4 + e for e in np.eye(4)[1:]]
    rows.append(w4)
    return np.array(rows)


def direction_multiplicities(bd: BoundaryData) -> np.ndarray:
    n, fam = bd.n, bd.kind.family
    if fam == "gberger":
        return np.array([1, 1, 1])
    if fam == "su":
        return np.array([1, n - 1])
    return np.array([1, 1, 1, n - 3])


@dataclass
class MetricProfile:
    """Distinct slice components I_i(x) with x-derivatives of log I_i."""

    bd: BoundaryData
    x: np.ndarray  # (N,)
    I: np.ndarray  # (ndistinct, N)
    L: np.ndarray
    Lp: np.ndarray
    Lpp: np.ndarray

    @property
    def multiplicities(self):
        return direction_multiplicities(self.bd)

    def node_index(self, x: float) -> int:
        j = int(np.argmin(np.abs(self.x - x)))
        if abs(self.x[j] - x) > 1e-9:
            raise UsageError(f"x={x} is not a node of this profile")
        return j

    def slice_metric(self, j: int) -> np.ndarray:
        """Full n-vector diag of the slice metric h at node j."""
        return np.repeat(self.I[:, j], self.multiplicities)

    def a_log_deriv_r(self):
        """(a_i'/a_i) in r at every node: coth(r) - x L'/2."""
        coth = (1.0 + self.x**2) / (1.0 - self.x**2)
        return coth[None, :] - self.x[None, :] * self.Lp / 2.0


def reconstruct_metric(profile) -> MetricProfile:
    """I_i, warped radii data and log-derivatives from a solution profile."""
    bd = profile.bd
    W = log_component_matrix(bd)
    L = W @ profile.y
    Lp = W @ profile.yp
    Lpp = W @ profile.ypp
    with np.errstate(over="raise"):
        try:
            I = np.exp(L)
        except FloatingPointError as e:
            raise InfeasibleProfileError("metric components overflow") from e
    if not np.all(np.isfinite(I)):
        raise InfeasibleProfileError("non-finite metric components")
    return MetricProfile(bd, profile.mesh.nodes.copy(), I, L, Lp, Lpp)


def radial_sectional(mp: MetricProfile, i: int, x: float) -> float:
    """Sectional curvature of the (radial, e_i) plane at node x (i 1-based)."""
    j = mp.node_index(x)
    return float(radial_sectional_all(mp)[i - 1, j])


def radial_sectional_all(mp: MetricProfile) -> np.ndarray:
    """K0_i = -(a_i''/a_i) in r for every distinct direction, all nodes."""
    x, Lp, Lpp = mp.x, mp.Lp, mp.Lpp
    coth = (1.0 + x * x) / (1.0 - x * x)
    return (
        -1.0
        - (x * x * Lpp + x * Lp) / 2.0
        + (x * coth) * Lp
        - (x * Lp) ** 2 / 4.0
    )


def radial_trace(mp: MetricProfile) -> np.ndarray:
    """Multiplicity-weighted sum of radial curvatures (equals -n on Einstein profiles)."""
    return mp.multiplicities @ radial_sectional_all(mp)


def ricci_su(I1, I2, n) -> np.ndarray:
    """Closed-form diagonal Ricci of the SU slice: ((n-1)I1^2/I2^2, (n+1)-2I1/I2, ...)."""
    first = (n - 1.0) * I1 * I1 / (I2 * I2)
    rest = (n + 1.0) - 2.0 * I1 / I2
    return np.array([first] + [rest] * (n - 1))


def ricci_sp(t1, t2, t3, n) -> np.ndarray:
    """Closed-form diagonal Ricci entries of the Sp slice in the t-variables."""
    if n % 4 != 3:
        raise UsageError("Sp slice needs n = 3 mod 4")
    e1 = 4.0 * n * t1 * t1 + 2.0 * (t1 * t1 - (t2 - t3) ** 2) / (t2 * t3)
    e2 = 4.0 * n * t2 * t2 + 2.0 * (t2 * t2 - (t1 - t3) ** 2) / (t1 * t3)
    e3 = 4.0 * n * t3 * t3 + 2.0 * (t3 * t3 - (t1 - t2) ** 2) / (t1 * t2)
    rest = 4.0 * n + 8.0 - 2.0 * (t1 + t2 + t3)
    return np.array([e1, e2, e3] + [rest] * (n - 3))


@dataclass
class SliceCurvature:
    """Curvature data of one homogeneous slice at the base point."""

    ricci: np.ndarray  # from the invariant-frame R_ij formula
    ricci_riemann: np.ndarray  # contracted from the assembled Riemann tensor
    sectional: np.ndarray  # (n, n), coordinate-plane sectional curvatures


def riemann_from_structure(sc: StructureConstants, h: np.ndarray) -> SliceCurvature:
    """Slice curvature at the base point from (C, T, dT) and diagonal metric h.

    The Ricci tensor is assembled with the invariant-frame homogeneous-space
    formula; the full Riemann tensor comes from the Christoffel symbols and
    their theta-derivatives, giving the tangential sectional curvatures.
    """
    sc.validate()
    d = sc.dim
    h = np.asarray(h, dtype=float)
    if h.shape != (d,) or np.any(h <= 0):
        raise UsageError(f"need {d} positive diagonal metric entries")
    g = np.diag(h)
    ginv = np.diag(1.0 / h)
    C, dC, T, dT = sc.C, sc.dC, sc.T, sc.dT

    ric = _ricci_invariant_frame(C, T, dT, g, ginv)
    Gam, dGam = _christoffels(C, dC, g, ginv)
    # dGam[s,i,j,p] = d_s Gam_ij^p;  R(d_i,d_j)d_k has components
    # Rup[i,j,k,l] = d_i Gam_jk^l - d_j Gam_ik^l + Gam_ie^l Gam_jk^e - Gam_je^l Gam_ik^e
    Rup = (
        dGam
        - dGam.transpose(1, 0, 2, 3)
        + np.einsum("iel,jke->ijkl", Gam, Gam)
        - np.einsum("jel,ike->ijkl", Gam, Gam)
    )
    Rlow = np.einsum("ijkm,ml->ijkl", Rup, g)
    ric_riem = np.einsum("ijki->jk", Rup)
    sect = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            if i != j:
                sect[i, j] = Rlow[i, j, j, i] / (h[i] * h[j])
    return SliceCurvature(ric, ric_riem, sect)


def _christoffels(C, dC, g, ginv):
    d = g.shape[0]
    # dg[q, i, j] = d_q g_ij = -C_qi^m g_mj - C_qj^m g_mi
    dg = -np.einsum("qim,mj->qij", C, g) - np.einsum("qjm,mi->qij", C, g)
    dginv = -np.einsum("pa,sab,bq->spq", ginv, dg, ginv)
    sym = -(C + C.transpose(1, 0, 2))  # -(C_ij^p + C_ji^p)
    inner = (
        -np.einsum("iqm,mj->ijq", C, g)
        - np.einsum("jqm,mi->ijq", C, g)
        + np.einsum("qim,mj->ijq", C, g)
        + np.einsum("qjm,mi->ijq", C, g)
    )
    Gam = 0.5 * (sym + np.einsum("pq,ijq->ijp", ginv, inner))
    # derivative: product rule through dC and dg
    dsym = -(dC + dC.transpose(0, 2, 1, 3))
    dinner = (
        -np.einsum("siqm,mj->sijq", dC, g)
        - np.einsum("iqm,smj->sijq", C, dg)
        - np.einsum("sjqm,mi->sijq", dC, g)
        - np.einsum("jqm,smi->sijq", C, dg)
        + np.einsum("sqim,mj->sijq", dC, g)
        + np.einsum("qim,smj->sijq", C, dg)
        + np.einsum("sqjm,mi->sijq", dC, g)
        + np.einsum("qjm,smi->sijq", C, dg)
    )
    dGam = 0.5 * (
        dsym
        + np.einsum("spq,ijq->sijp", dginv, inner)
        + np.einsum("pq,sijq->sijp", ginv, dinner)
    )
    return Gam, dGam


def _ricci_invariant_frame(C, T, dT, g, ginv):
    """Homogeneous-slice Ricci from the frame data (C, T, dT), term by term."""
    trC = np.einsum("qpp->q", C)
    trT = np.einsum("psp->s", T)
    t1 = 0.5 * (
        np.einsum("pijp->ij", dT)
        + np.einsum("ipq,qjp->ij", C, T)
        + np.einsum("qjp,ipq->ij", C, T)
        + np.einsum("q,jiq->ij", trC, T)
    )
    B = (
        dT
        + np.einsum("ips,sqm->piqm", C, T)
        + np.einsum("pqs,ism->piqm", C, T)
        - np.einsum("psm,iqs->piqm", C, T)
    )
    t2 = -0.5 * np.einsum("pq,piqm,mj->ij", ginv, B, g)
    t3 = -0.5 * np.einsum("pq,pjqm,mi->ij", ginv, B, g)
    t4 = 0.25 * np.einsum("pis,sjp->ij", T, T)
    t5 = -0.25 * np.einsum("pq,pis,sqm,mj->ij", ginv, T, T, g)
    t6 = -0.25 * np.einsum("pq,pjs,sqm,mi->ij", ginv, T, T, g)
    t7 = -0.5 * np.einsum("sq,s,iqm,mj->ij", ginv, trT, T, g)
    t8 = -0.5 * np.einsum("sq,s,jqm,mi->ij", ginv, trT, T, g)
    t9 = 0.25 * np.einsum("pq,pjs,iqm,sm->ij", ginv, T, T, g)
    t10 = 0.25 * np.einsum("pq,pis,jqm,sm->ij", ginv, T, T, g)
    U = np.einsum("jlm,ms->jls", T, g) + np.einsum("slm,mj->jls", T, g)
    V = np.einsum("pqm,mi->pqi", T, g) + np.einsum("iqm,mp->pqi", T, g)
    t11 = -0.25 * np.einsum("pl,jls,sq,pqi->ij", ginv, U, ginv, V)
    return t1 + t2 + t3 + t4 + t5 + t6 + t7 + t8 + t9 + t10 + t11


def gauss_tangential(mp: MetricProfile, slice_curv: float, i: int, j: int, x: float) -> float:
    """Ambient tangential sectional curvature via the Gauss equation.

    slice_curv is the intrinsic sectional curvature of the geodesic-sphere
    slice (with its induced metric) for the plane (e_i, e_j); the second
    fundamental form contributes -(a_i'/a_i)(a_j'/a_j) in r-derivatives.
    """
    k = mp.node_index(x)
    rat = mp.a_log_deriv_r()
    return float(slice_curv - rat[i - 1, k] * rat[j - 1, k])


@dataclass
class CurvatureSample:
    x: float
    plane: str
    value: float


def curvature_samples(profile, tangential: bool | None = None) -> list:
    """Sectional-curvature samples at every node: all radial planes, plus all
    tangential coordinate planes where a structure-constant table exists
    (slice dimensions 3 and 5; the Sp slice is radial-only by design)."""
    mp = reconstruct_metric(profile)
    bd = profile.bd
    if tangential is None:
        tangential = bd.kind.family != "sp" and has_slice_structure(bd.n)
    rad = radial_sectional_all(mp)
    samples = []
    nd = mp.I.shape[0]
    for j, x in enumerate(mp.x):
        for i in range(nd):
            samples.append(CurvatureSample(float(x), f"radial-{i + 1}", float(rad[i, j])))
    if not tangential:
        return samples
    sc = slice_structure(bd.n)
    sinh2 = ((1.0 - mp.x**2) / (2.0 * mp.x)) ** 2
    rat = mp.a_log_deriv_r()
    full_idx = np.repeat(np.arange(nd), mp.multiplicities)
    for j, x in enumerate(mp.x):
        h = mp.slice_metric(j)
        sect = riemann_from_structure(sc, h).sectional
        seen = set()
        for a in range(bd.n):
            for b in range(a + 1, bd.n):
                ia, ib = full_idx[a], full_idx[b]
                key = (ia, ib)
                if key in seen:
                    continue
                seen.add(key)
                intr = sect[a, b] / sinh2[j]
                amb = intr - rat[ia, j] * rat[ib, j]
                samples.append(
                    CurvatureSample(float(x), f"tangential-{ia + 1}-{ib + 1}", float(amb))
                )
    return samples


def weyl_mixed_n3(mp: MetricProfile, i: int, p: int, q: int, x: float) -> float:
    """|W|-type mixed Weyl component magnitude for the n=3 families."""
    if mp.bd.n != 3:
        raise UsageError("weyl_mixed_n3 requires an n=3 profile")
    if sorted((i, p, q)) != [1, 2, 3]:
        raise UsageError("(i, p, q) must be a permutation of (1, 2, 3)")
    j = mp.node_index(x)
    full = np.repeat(np.arange(mp.I.shape[0]), mp.multiplicities)
    ii, pp, qq = full[i - 1], full[p - 1], full[q - 1]
    Li, Lp_, Lq = mp.L[ii, j], mp.L[pp, j], mp.L[qq, j]
    dLi, dLp, dLq = mp.Lp[ii, j], mp.Lp[pp, j], mp.Lp[qq, j]
    # bracket = Ii^1/2 Ip^-1/2 + Ii^-1/2 Ip^1/2 - Ii^-1/2 Ip^-1/2 Iq
    e1 = np.exp((Li - Lp_) / 2.0)
    e2 = np.exp((Lp_ - Li) / 2.0)
    e3 = np.exp(-(Li + Lp_) / 2.0 + Lq)
    der = (
        0.5 * (dLi - dLp) * e1
        + 0.5 * (dLp - dLi) * e2
        - (-0.5 * (dLi + dLp) + dLq) * e3
    )
    return float(2.0 * x * x / (1.0 - x * x) * np.exp(-Lq / 2.0) * abs(der))


WEYL_BOUND_N3 = 2.0 * np.sqrt(6.0)


def k0_lower_bound(bd: BoundaryData):
    """Closed-form lower bound for K(0); None for families without one."""
    if bd.kind.family == "gberger":
        p1, p2 = bd.phi0
        b0 = (
            2.0 * (p1 * p1 * p2) ** (1 / 3)
            + 2.0 * (p2 / p1) ** (1 / 3)
            + 2.0 * (p1 * p2 * p2) ** (-1 / 3)
            - p1 ** (-4 / 3) * p2 ** (-2 / 3)
            - p1 ** (2 / 3) * p2 ** (-2 / 3)
            - p1 ** (2 / 3) * p2 ** (4 / 3)
        )
        return (b0 / 3.0) ** 3 if b0 > 0 else None
    if bd.kind.family == "su":
        phi, n = bd.phi0[0], bd.n
        if phi <= 1.0 / (n + 1):
            return None
        return ((n + 1) * phi - 1.0) ** n / (n * phi ** ((n + 1.0) / n)) ** n
    return None


@dataclass
class K0BoundsReport:
    k0: float
    lower_bound: float | None
    upper_ok: bool
    lower_ok: bool | None
    boundary_case: bool

    @property
    def passed(self):
        low = True if self.lower_ok is None else self.lower_ok
        return (self.upper_ok and low) or self.boundary_case


def k0_bounds_check(bd: BoundaryData, K0: float) -> K0BoundsReport:
    """Report K(0) against the volume-comparison upper bound 1 and the
    family's closed-form lower bound (round data sits exactly on the boundary)."""
    lb = k0_lower_bound(bd)
    boundary = bd.is_round and abs(K0 - 1.0) <= 1e-10
    upper_ok = K0 < 1.0
    lower_ok = None if lb is None else K0 > lb
    return K0BoundsReport(float(K0), lb, upper_ok, lower_ok, boundary)
