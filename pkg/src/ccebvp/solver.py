"""Two-point BVP solver: Hermite collocation on an interior mesh, closed at
both singular endpoints by truncated series, solved by damped Newton.

Unknowns are the node values and first derivatives of every y_i plus the
endpoint parameters (log K(0), the nonlocal order-n coefficients, and the
free second-order coefficients at x=1).  Each interval contributes two
Gauss-point collocations of the regularized evolution equations per unknown;
the first integral is anchored once, at the mid node, in exchange for the two
y1 collocations of the adjacent interval (constraint propagation makes them
redundant there).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from . import systems as sysm
from .series import (
    DEFAULT_INFINITY_ORDER,
    NonlocalParams,
    evaluate_series,
    fg_series_origin,
    seed_values,
    series_infinity,
)
from .systems import BoundaryData, DomainError, UsageError, family

# Gauss-Legendre points on [0,1]
_G1 = 0.5 - np.sqrt(3.0) / 6.0
_G2 = 0.5 + np.sqrt(3.0) / 6.0

_CSTEP = 1e-80  # complex-step width for endpoint-parameter derivatives


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray
    grading: str = "endpoint-clustered"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < 4:
            raise UsageError("mesh needs at least 4 nodes")
        if np.any(np.diff(nodes) <= 0):
            raise UsageError("mesh nodes must be strictly increasing")
        if nodes[0] <= 0.0 or nodes[-1] >= 1.0:
            raise DomainError("mesh must lie strictly inside (0,1)")
        from .series import TRUST_RADIUS

        if nodes[0] > TRUST_RADIUS or nodes[-1] < 1.0 - TRUST_RADIUS:
            raise DomainError("mesh endpoints must lie inside the series trust radii")

    @property
    def n_nodes(self):
        return len(self.nodes)


def make_mesh(num=128, xl=0.1, xr=0.85, grading="endpoint-clustered", stretch=1.5) -> Mesh:
    """Mesh on [xl, xr].

    Endpoint-clustered grading blends a cosine map (mild refinement toward
    both series interfaces; the first-integral sensitivity grows like 1/x at
    the left, the solution derivatives at the right) with a uniform map, then
    stretches toward x=1 by the given density ratio.  The blend keeps the
    smallest spacing proportional to 1/num so the 1/h^2 roundoff floor of the
    collocation residual stays below tight tolerances.
    """
    s = np.linspace(0.0, 1.0, num)
    if grading == "uniform":
        g = s
    elif grading == "endpoint-clustered":
        w = 0.4
        g = (1.0 - w) * s + w * 0.5 * (1.0 - np.cos(np.pi * s))
        if stretch != 1.0:
            beta = np.log(stretch)
            g = 1.0 - (np.exp(beta * (1.0 - g)) - 1.0) / (np.exp(beta) - 1.0)
    else:
        raise UsageError(f"unknown grading {grading!r}")
    return Mesh(xl + (xr - xl) * g, grading)


@dataclass
class SolveOptions:
    grid: int = 128
    tol: float = 1e-10
    max_iter: int = 40
    xl: float = 0.1
    xr: float = 0.85
    grading: str = "endpoint-clustered"
    stretch: float = 1.5
    origin_order: int | None = None  # default n + 23
    infinity_order: int = 26
    refine_rounds: int = 3
    refine_target: float | None = None
    seed_mode: str = "blend"  # 'blend' | 'zero'
    experimental_sp: bool = False
    homotopy_retry: bool = True
    coarse_stage: int = 96  # warm-start grids larger than ~1.5x this


@dataclass
class SolveReport:
    converged: bool = False
    iterations: int = 0
    residual_norm: float = np.inf
    residual_history: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    refinements: int = 0
    constraint_drift: float = np.inf
    failure_reason: str = ""
    retried: bool = False
    wall_time: float = 0.0

    def summary(self):
        """Deterministic fields only (wall time excluded)."""
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "residual_history": list(self.residual_history),
            "damping_history": list(self.damping_history),
            "refinements": self.refinements,
            "constraint_drift": self.constraint_drift,
            "failure_reason": self.failure_reason,
            "retried": self.retried,
        }


@dataclass
class SolutionProfile:
    bd: BoundaryData
    mesh: Mesh
    y: np.ndarray  # (m, N)
    yp: np.ndarray
    k0var: float = 0.0  # y1(0) = log K(0)
    free: NonlocalParams | None = None
    infinity_free: np.ndarray | None = None
    converged: bool = False
    residual_norm: float = np.inf
    tol: float = 1e-10
    origin_order: int | None = None
    infinity_order: int = DEFAULT_INFINITY_ORDER

    def __post_init__(self):
        fam = family(self.bd.kind, self.bd.n)
        if self.free is None:
            self.free = NonlocalParams.zeros(self.bd.kind)
        if self.infinity_free is None:
            self.infinity_free = np.zeros(fam.m - 1)
        if self.origin_order is None:
            self.origin_order = self.bd.n + 23

    @property
    def k0(self) -> float:
        return float(np.exp(self.k0var))

    @property
    def ypp(self) -> np.ndarray:
        """Second derivatives at the nodes, eliminated through the evolution equations."""
        fam = family(self.bd.kind, self.bd.n)
        z = np.zeros_like(self.y)
        return -sysm.evo_residuals(fam, self.mesh.nodes, self.y.T, self.yp.T, z.T).T

    def origin_series(self):
        return fg_series_origin(self.bd, self.free, self.origin_order, k0=self.k0)

    def infinity_series(self):
        return series_infinity(self.bd.kind, self.bd.n, self.infinity_order, self.infinity_free)

    def constraint_values(self) -> np.ndarray:
        """First integral at every node (uses the eliminated second derivatives)."""
        fam = family(self.bd.kind, self.bd.n)
        return sysm.constraint_residual(fam, self.mesh.nodes, self.y.T, self.yp.T, self.ypp.T)

    def interpolate(self, xq):
        """Hermite-cubic values and derivatives at query points inside the mesh."""
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        xs = self.mesh.nodes
        j = np.clip(np.searchsorted(xs, xq) - 1, 0, len(xs) - 2)
        h = xs[j + 1] - xs[j]
        t = (xq - xs[j]) / h
        ya, yb = self.y[:, j], self.y[:, j + 1]
        pa, pb = self.yp[:, j], self.yp[:, j + 1]
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        y = h00 * ya + h10 * h * pa + h01 * yb + h11 * h * pb
        d00 = 6 * t**2 - 6 * t
        d10 = 3 * t**2 - 4 * t + 1
        d01 = -6 * t**2 + 6 * t
        d11 = 3 * t**2 - 2 * t
        yp = (d00 * ya + d01 * yb) / h + d10 * pa + d11 * pb
        return y, yp


# ---------------------------------------------------------------------------
# packing
# ---------------------------------------------------------------------------


def _pack(profile: SolutionProfile) -> np.ndarray:
    m, N = profile.y.shape
    u = np.empty(2 * m * N + 2 * m - 1)
    blk = np.concatenate([profile.y, profile.yp], axis=0)  # (2m, N)
    u[: 2 * m * N] = blk.T.ravel()
    u[2 * m * N] = profile.k0var
    u[2 * m * N + 1 : 2 * m * N + m] = np.asarray(profile.free.coeffs, dtype=float)
    u[2 * m * N + m :] = profile.infinity_free
    return u


def _unpack(bd, mesh, u, tol, opts=None):
    fam = family(bd.kind, bd.n)
    m, N = fam.m, mesh.n_nodes
    blk = u[: 2 * m * N].reshape(N, 2 * m).T
    kw = {}
    if opts is not None:
        kw = dict(
            origin_order=opts.origin_order or bd.n + 23, infinity_order=opts.infinity_order
        )
    return SolutionProfile(
        bd,
        mesh,
        y=blk[:m].copy(),
        yp=blk[m:].copy(),
        k0var=float(u[2 * m * N]),
        free=NonlocalParams(tuple(u[2 * m * N + 1 : 2 * m * N + m])),
        infinity_free=u[2 * m * N + m :].copy(),
        tol=tol,
        **kw,
    )


# ---------------------------------------------------------------------------
# endpoint closures with complex-step parameter derivatives
# ---------------------------------------------------------------------------


def _origin_closure(bd, order, x0, k0var, free_vals, want_jac):
    """Series value/derivative at x0 and their endpoint-parameter Jacobian."""
    m = family(bd.kind, bd.n).m

    def build(kv, fv):
        sc = fg_series_origin(bd, NonlocalParams(tuple(fv)), order, log_k0=kv)
        y, yp, _ = evaluate_series(sc, np.array([x0]))
        return y[:, 0], yp[:, 0]

    y0, yp0 = build(k0var, free_vals)
    if not want_jac:
        return y0.real, yp0.real, None
    jac = np.zeros((2 * m, m))
    h = _CSTEP
    yc, ypc = build(k0var + 1j * h, free_vals)
    jac[:m, 0], jac[m:, 0] = yc.imag / h, ypc.imag / h
    for k in range(m - 1):
        fv = np.asarray(free_vals, dtype=complex)
        fv[k] += 1j * h
        yc, ypc = build(k0var, fv)
        jac[:m, k + 1], jac[m:, k + 1] = yc.imag / h, ypc.imag / h
    return y0.real, yp0.real, jac


def _infinity_closure(kind, n, order, x1, free_vals, want_jac):
    m = family(kind, n).m

    def build(fv):
        sc = series_infinity(kind, n, order, np.asarray(fv))
        y, yp, _ = evaluate_series(sc, np.array([x1]))
        return y[:, 0], yp[:, 0]

    y1, yp1 = build(free_vals)
    if not want_jac:
        return y1.real, yp1.real, None
    jac = np.zeros((2 * m, m - 1))
    h = _CSTEP
    for k in range(m - 1):
        fv = np.asarray(free_vals, dtype=complex)
        fv[k] += 1j * h
        yc, ypc = build(fv)
        jac[:m, k], jac[m:, k] = yc.imag / h, ypc.imag / h
    return y1.real, yp1.real, jac


# ---------------------------------------------------------------------------
# collocation assembly
# ---------------------------------------------------------------------------


def _hermite_weights(t, h):
    """Basis weights for (ya, pa, yb, pb) at local coordinate t: value, d/dx, d2/dx2."""
    one = np.ones_like(h)
    wv = np.array(
        [(2 * t**3 - 3 * t**2 + 1) * one, (t**3 - 2 * t**2 + t) * h, (-2 * t**3 + 3 * t**2) * one, (t**3 - t**2) * h]
    )
    wd = np.array(
        [(6 * t**2 - 6 * t) / h, (3 * t**2 - 4 * t + 1) * one, (-6 * t**2 + 6 * t) / h, (3 * t**2 - 2 * t) * one]
    )
    ws = np.array([(12 * t - 6) / h**2, (6 * t - 4) / h, (-12 * t + 6) / h**2, (6 * t - 2) / h])
    return wv, wd, ws


def _collocation_state(y, yp, xs, t):
    """State (x, y, yp, ypp) at local point t of every interval; shapes (N-1, m)."""
    h = np.diff(xs)
    x = xs[:-1] + t * h
    wv, wd, ws = _hermite_weights(t, h)  # rows are interval arrays
    parts = [y[:, :-1], yp[:, :-1], y[:, 1:], yp[:, 1:]]
    Y = sum(w * p for w, p in zip(wv, parts)).T
    Yp = sum(w * p for w, p in zip(wd, parts)).T
    Ypp = sum(w * p for w, p in zip(ws, parts)).T
    return x, Y, Yp, Ypp, (wv, wd, ws)


def assemble_collocation(bd: BoundaryData, mesh: Mesh, guess: SolutionProfile, opts: SolveOptions | None = None, want_jac: bool = True):
    """Residual vector and dense Jacobian of the square discrete system.

    Rows: matching to the origin series, regularized evolution collocation at
    two Gauss points per interval, and matching to the x=1 series.  The
    y1-derivative match at x0 is shed: the first integral holds identically
    on both endpoint series, so that row is redundant in the continuum (the
    constraint propagates inward from the x=1 closure, and the propagation
    toward the origin is contracting).  The constraint is never imposed at
    any interior node; its nodal drift is pure propagation and is checked
    after the solve.
    """
    if opts is None:
        opts = SolveOptions()
    fam = family(bd.kind, bd.n)
    m, N = fam.m, mesh.n_nodes
    if guess.y.shape != (m, N) or guess.yp.shape != (m, N):
        raise UsageError("guess dimensions do not match the mesh")
    xs = mesh.nodes
    y, yp = guess.y, guess.yp
    k0var = guess.k0var
    freeL = np.asarray(guess.free.coeffs, dtype=float)
    freeR = guess.infinity_free
    oorder = opts.origin_order or bd.n + 23

    nU = 2 * m * N + 2 * m - 1
    nfull = 2 * m * N + 2 * m  # before shedding the redundant y1' match
    F = np.zeros(nfull)
    J = np.zeros((nfull, nU)) if want_jac else None
    tail0 = 2 * m * N

    # --- origin matching
    yL, ypL, jacL = _origin_closure(bd, oorder, xs[0], k0var, freeL, want_jac)
    F[:m] = y[:, 0] - yL
    F[m : 2 * m] = yp[:, 0] - ypL
    if want_jac:
        for i in range(m):
            J[i, 2 * m * 0 + i] = 1.0
            J[m + i, 2 * m * 0 + m + i] = 1.0
        J[: 2 * m, tail0 : tail0 + m] = -jacL

    # --- collocation block
    row0 = 2 * m
    ncol_rows = 2 * m * (N - 1)
    Fc = np.zeros(ncol_rows)
    hj = np.diff(xs)
    for g, t in enumerate((_G1, _G2)):
        x, Y, Yp, Ypp, (wv, wd, ws) = _collocation_state(y, yp, xs, t)
        # cell-width weighting keeps the 1/h^2 roundoff of the Hermite second
        # derivative out of the residual norm (defect-integral scaling)
        W = x * (1.0 - x * x) * hj
        evo = sysm.evo_residuals(fam, x, Y, Yp, Ypp) * W[:, None]
        idx = (np.arange(N - 1) * 2 + g) * m  # row of unknown 0 per interval
        for i in range(m):
            Fc[idx + i] = evo[:, i]
        if want_jac:
            dy, dyp, dypp = sysm.evo_jacobian(fam, x, Y, Yp, Ypp)
            dy *= W[:, None, None]
            dyp *= W[:, None, None]
            dypp *= W[:, None, None]
            # columns: node j slot (y_k -> 2m*j + k, yp_k -> 2m*j + m + k), node j+1 likewise
            for i in range(m):
                rows = row0 + idx + i
                for k in range(m):
                    cy = dy[:, i, k]
                    cp = dyp[:, i, k]
                    cs = dypp[:, i, k]
                    # basis slots: (ya, pa, yb, pb)
                    coef = [
                        cy * wv[0] + cp * wd[0] + cs * ws[0],
                        cy * wv[1] + cp * wd[1] + cs * ws[1],
                        cy * wv[2] + cp * wd[2] + cs * ws[2],
                        cy * wv[3] + cp * wd[3] + cs * ws[3],
                    ]
                    jj = np.arange(N - 1)
                    J[rows, 2 * m * jj + k] += coef[0]
                    J[rows, 2 * m * jj + m + k] += coef[1]
                    J[rows, 2 * m * (jj + 1) + k] += coef[2]
                    J[rows, 2 * m * (jj + 1) + m + k] += coef[3]
    F[row0 : row0 + ncol_rows] = Fc

    # --- infinity matching
    yR, ypR, jacR = _infinity_closure(bd.kind, bd.n, opts.infinity_order, xs[-1], freeR, want_jac)
    rowR = row0 + ncol_rows
    F[rowR : rowR + m] = y[:, -1] - yR
    F[rowR + m : rowR + 2 * m] = yp[:, -1] - ypR
    if want_jac:
        for i in range(m):
            J[rowR + i, 2 * m * (N - 1) + i] = 1.0
            J[rowR + m + i, 2 * m * (N - 1) + m + i] = 1.0
        J[rowR : rowR + 2 * m, tail0 + m :] = -jacR

    keep = np.setdiff1d(np.arange(nfull), [m])
    F = F[keep]
    if want_jac:
        J = J[keep]
    return F, J


# ---------------------------------------------------------------------------
# Newton iteration and drivers
# ---------------------------------------------------------------------------


def seed_profile(bd: BoundaryData, mesh: Mesh, opts: SolveOptions | None = None) -> SolutionProfile:
    """Initial guess: smooth blend of the log boundary offsets (see seed_values)."""
    if opts is None:
        opts = SolveOptions()
    if opts.seed_mode == "zero":
        fam = family(bd.kind, bd.n)
        y = np.zeros((fam.m, mesh.n_nodes))
        yp = np.zeros_like(y)
    else:
        y, yp = seed_values(bd, mesh.nodes)
    return SolutionProfile(
        bd,
        mesh,
        y,
        yp,
        tol=opts.tol,
        origin_order=opts.origin_order or bd.n + 23,
        infinity_order=opts.infinity_order,
    )


def newton_solve(bd, mesh, guess, tol=1e-10, max_iter=40, opts: SolveOptions | None = None):
    """Damped Newton (Armijo halving, minimum damping 2^-20) on the collocation system."""
    if opts is None:
        opts = SolveOptions(tol=tol, max_iter=max_iter)
    t0 = time.perf_counter()
    rep = SolveReport()
    u = _pack(guess)

    def residual_only(uv):
        # extreme trial states can overflow the exponential sources or break
        # the series recursion; the line search treats that as a rejection
        try:
            with np.errstate(over="raise", invalid="raise"):
                p = _unpack(bd, mesh, uv, tol, opts)
                return assemble_collocation(bd, mesh, p, opts, want_jac=False)[0]
        except (sysm.SeriesRecursionError, FloatingPointError, np.linalg.LinAlgError):
            return None

    # the Jacobian is built lazily: an already-converged start (round data)
    # never pays for the endpoint-parameter derivative columns
    F = assemble_collocation(bd, mesh, _unpack(bd, mesh, u, tol, opts), opts, want_jac=False)[0]
    J = None
    norm = float(np.abs(F).max())
    rep.residual_history.append(norm)
    for it in range(max_iter):
        if norm <= tol:
            break
        if J is None:
            F, J = assemble_collocation(bd, mesh, _unpack(bd, mesh, u, tol, opts), opts)
        try:
            lu = splu(csc_matrix(J))
            step = lu.solve(-F)
        except (np.linalg.LinAlgError, RuntimeError, ValueError):
            rep.failure_reason = "singular linearization"
            break
        # affine-invariant (natural) monotonicity: compare J^-1 F along the
        # step using the current factorization; Armijo halving, floor 2^-20
        dnorm = float(np.linalg.norm(step))
        if not np.isfinite(dnorm) or dnorm == 0.0:
            rep.failure_reason = "singular linearization"
            break
        lam, accepted = 1.0, False
        while lam >= 2.0**-20:
            Ft = residual_only(u + lam * step)
            if Ft is not None and np.all(np.isfinite(Ft)):
                dbar = lu.solve(-Ft)
                if float(np.linalg.norm(dbar)) <= (1.0 - 0.5 * lam) * dnorm:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            rep.failure_reason = "line search stalled"
            break
        u = u + lam * step
        rep.damping_history.append(lam)
        rep.iterations = it + 1
        try:
            F, J = assemble_collocation(bd, mesh, _unpack(bd, mesh, u, tol, opts), opts)
        except sysm.SeriesRecursionError:
            rep.failure_reason = "series recursion breakdown"
            break
        norm = float(np.abs(F).max())
        rep.residual_history.append(norm)

    prof = _unpack(bd, mesh, u, tol, opts)
    drift = float(np.abs(prof.constraint_values()).max())
    # polish: an iterate that just crossed tol may still sit well off the
    # discrete root; extra full steps in the quadratic basin are cheap and
    # bring the drift down to the root's own value
    polish = 0
    while norm <= tol and drift > 10.0 * tol and polish < 2:
        try:
            if J is None:
                F, J = assemble_collocation(bd, mesh, _unpack(bd, mesh, u, tol, opts), opts)
            lu = splu(csc_matrix(J))
            ut = u + lu.solve(-F)
            Ft, Jt = assemble_collocation(bd, mesh, _unpack(bd, mesh, ut, tol, opts), opts)
        except (np.linalg.LinAlgError, RuntimeError, ValueError, sysm.SeriesRecursionError):
            break
        nt = float(np.abs(Ft).max())
        if not np.isfinite(nt) or nt > norm:
            break
        u, F, J, norm = ut, Ft, Jt, nt
        rep.residual_history.append(norm)
        rep.iterations += 1
        polish += 1
        prof = _unpack(bd, mesh, u, tol, opts)
        drift = float(np.abs(prof.constraint_values()).max())

    prof.residual_norm = norm
    rep.residual_norm = norm
    rep.constraint_drift = drift
    prof.converged = bool(norm <= tol and drift <= 10.0 * tol)
    rep.converged = prof.converged
    if not rep.converged and not rep.failure_reason:
        rep.failure_reason = "max iterations" if norm > tol else "constraint drift"
    rep.wall_time = time.perf_counter() - t0
    return prof, rep


def refine_mesh(profile: SolutionProfile, target: float) -> Mesh:
    """Insert midpoints of intervals whose interior equation residual exceeds target."""
    fam = family(profile.bd.kind, profile.bd.n)
    xs = profile.mesh.nodes
    x, Y, Yp, Ypp, _ = _collocation_state(profile.y, profile.yp, xs, 0.5)
    res = np.abs(sysm.evo_residuals(fam, x, Y, Yp, Ypp) * (x * (1 - x * x))[:, None]).max(axis=1)
    bad = res > target
    if not np.any(bad):
        return profile.mesh
    mids = 0.5 * (xs[:-1] + xs[1:])[bad]
    return Mesh(np.sort(np.concatenate([xs, mids])), profile.mesh.grading)


def _interp_onto(profile: SolutionProfile, mesh: Mesh) -> SolutionProfile:
    y, yp = profile.interpolate(mesh.nodes)
    return SolutionProfile(
        profile.bd,
        mesh,
        y,
        yp,
        k0var=profile.k0var,
        free=profile.free,
        infinity_free=profile.infinity_free.copy(),
        tol=profile.tol,
        origin_order=profile.origin_order,
        infinity_order=profile.infinity_order,
    )


def _halfway_round(bd: BoundaryData) -> BoundaryData:
    return BoundaryData(bd.kind, bd.n, tuple(np.sqrt(np.asarray(bd.phi0))))


def _as_guess_for(bd, prof, opts):
    return SolutionProfile(
        bd, prof.mesh, prof.y.copy(), prof.yp.copy(), k0var=prof.k0var,
        free=prof.free, infinity_free=prof.infinity_free.copy(), tol=opts.tol,
        origin_order=prof.origin_order, infinity_order=prof.infinity_order,
    )


def _cold_solve(bd, mesh, opts):
    """Seeded Newton with one homotopy retry through half-round data."""
    prof, rep = newton_solve(bd, mesh, seed_profile(bd, mesh, opts), opts.tol, opts.max_iter, opts)
    if not rep.converged and rep.residual_norm > 1e3 * opts.tol and opts.homotopy_retry and not bd.is_round:
        bdh = _halfway_round(bd)
        half, _ = newton_solve(bdh, mesh, seed_profile(bdh, mesh, opts), opts.tol, opts.max_iter, opts)
        if half.residual_norm <= 1e3 * opts.tol:
            prof, rep = newton_solve(bd, mesh, _as_guess_for(bd, half, opts), opts.tol, opts.max_iter, opts)
            rep.retried = True
    return prof, rep


def solve_bvp(bd: BoundaryData, opts: SolveOptions | None = None, guess: SolutionProfile | None = None):
    """Seed (through a coarse warm-up stage for large grids), Newton-solve,
    then refine while the converged-profile gates are unmet; one homotopy
    retry through half-round data on a cold-start failure."""
    if opts is None:
        opts = SolveOptions()
    if bd.kind.family == "sp" and not opts.experimental_sp:
        raise UsageError(
            "the Sp family solve path is experimental; set experimental_sp=True to enable"
        )
    mesh = make_mesh(opts.grid, opts.xl, opts.xr, opts.grading, opts.stretch)
    if guess is not None:
        start = guess if guess.mesh.n_nodes == mesh.n_nodes else _interp_onto(guess, mesh)
        prof, rep = newton_solve(bd, mesh, start, opts.tol, opts.max_iter, opts)
    elif opts.coarse_stage and opts.grid > 1.5 * opts.coarse_stage and not bd.is_round:
        cmesh = make_mesh(opts.coarse_stage, opts.xl, opts.xr, opts.grading, opts.stretch)
        copts = SolveOptions(**{**opts.__dict__, "tol": max(opts.tol, 1e-9), "grid": opts.coarse_stage})
        cprof, crep = _cold_solve(bd, cmesh, copts)
        if crep.residual_norm <= 1e3 * copts.tol:
            prof, rep = newton_solve(bd, mesh, _interp_onto(cprof, mesh), opts.tol, opts.max_iter, opts)
            rep.retried = crep.retried
        else:
            prof, rep = _cold_solve(bd, mesh, opts)
    else:
        prof, rep = _cold_solve(bd, mesh, opts)

    rounds = 0
    while rep.residual_norm <= opts.tol and not prof.converged and rounds < opts.refine_rounds:
        # converged in residual but the constraint drift gate failed: refine
        target = opts.refine_target if opts.refine_target is not None else 10.0 * opts.tol
        newmesh = refine_mesh(prof, target)
        if newmesh.n_nodes == prof.mesh.n_nodes:
            break
        prof2, rep2 = newton_solve(bd, newmesh, _interp_onto(prof, newmesh), opts.tol, opts.max_iter, opts)
        rounds += 1
        rep2.refinements = rounds
        rep2.retried = rep.retried
        prof, rep = prof2, rep2
        if rep.residual_norm > opts.tol:
            break
    return prof, rep
