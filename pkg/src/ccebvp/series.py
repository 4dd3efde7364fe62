"""Truncated series solutions at the two singular endpoints.

At x=0 the coefficients below order n are determined recursively from the
equations and the boundary ratios; the order-n coefficients of the non-K
unknowns are the free nonlocal parameters (the K coefficient at order n is
forced by trace-freeness).  At x=1 (series in u = 1-x) the second-order
coefficients of the non-K unknowns are free and everything else, including
the whole K series, is slaved to them.

Both recursions share one engine: build the regularized residual series of
the closing equations (the first integral for y1 at the origin, the
quadratic y1 equation at infinity, the phi/t equations for the rest),
extract the exactly-linear map onto the order-k coefficients, and solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .systems import (
    BoundaryData,
    DomainError,
    Family,
    SeriesRecursionError,
    SystemKind,
    UsageError,
    family,
)

TRUST_RADIUS = 0.15
DEFAULT_INFINITY_ORDER = 6

# consistency tolerance for the residual coefficient at a free (resonant)
# order, relative to the source-weight scale
_CONSISTENCY_RTOL = 1e-8


@dataclass(frozen=True)
class NonlocalParams:
    """Free coefficients entering the origin expansion at order x^n."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) if isinstance(c, complex) else float(c) for c in self.coeffs))

    @staticmethod
    def zeros(kind: SystemKind) -> "NonlocalParams":
        return NonlocalParams((0.0,) * kind.free_count)

    def validate(self, kind: SystemKind) -> None:
        if len(self.coeffs) != kind.free_count:
            raise UsageError(
                f"{kind.family} expects {kind.free_count} nonlocal parameters, got {len(self.coeffs)}"
            )


@dataclass
class SeriesCoefficients:
    """Truncated endpoint expansion; table[i, k] multiplies x^k (origin) or (1-x)^k (infinity)."""

    endpoint: str
    kind: SystemKind
    n: int
    order: int
    table: np.ndarray
    free: NonlocalParams | None = None
    consistency: float = 0.0


# -- series helpers (coefficient arrays of fixed length P+1) ----------------


def _pmul(a, b):
    n = len(a)
    return np.convolve(a, b)[:n]


def _pexp(c):
    """exp of a series; exact treatment of the constant term."""
    n = len(c)
    out = np.zeros(n, dtype=c.dtype)
    out[0] = np.exp(c[0])
    for k in range(1, n):
        acc = 0.0
        for j in range(1, k + 1):
            acc = acc + j * c[j] * out[k - j]
        out[k] = acc / k
    return out


def _pderiv(c):
    n = len(c)
    out = np.zeros(n, dtype=c.dtype)
    out[: n - 1] = c[1:] * np.arange(1, n)
    return out


def _geom(P, power, dtype):
    """(1-x^2)^-power as a series of length P+1 (power in {1, 2})."""
    out = np.zeros(P + 1, dtype=dtype)
    for k in range(0, P + 1, 2):
        out[k] = 1.0 if power == 1 else k // 2 + 1
    return out


def _expsum_series(fam: Family, table, C):
    """Series of sum_a w_a exp(v_a . y) for coefficient rows C (m, P+1)."""
    w, v = table
    out = np.zeros(C.shape[1], dtype=C.dtype)
    for wa, va in zip(w, v):
        out = out + wa * _pexp(va @ C)
    return out


# -- origin recursion --------------------------------------------------------


def _origin_residual_rows(fam: Family, C):
    """Regularized residual series at x=0: row 0 is x*Phi, rows i are x(1-x^2)E_{i+1}."""
    m, P = fam.m, C.shape[1] - 1
    dt = C.dtype
    yp = np.array([_pderiv(C[i]) for i in range(m)])
    ypp = np.array([_pderiv(yp[i]) for i in range(m)])
    inv1, inv2 = _geom(P, 1, dt), _geom(P, 2, dt)
    x = np.zeros(P + 1, dtype=dt)
    x[1] = 1.0
    x1mx2 = np.zeros(P + 1, dtype=dt)  # x(1-x^2)
    x1mx2[1] = 1.0
    if P >= 3:
        x1mx2[3] = -1.0

    rows = np.zeros((m, P + 1), dtype=dt)
    # row 0: x * Phi
    quad = _pmul(yp[0], yp[0])
    for i in range(m):
        for j in range(m):
            if fam.rmat[i, j] != 0.0:
                quad = quad - fam.rmat[i, j] * _pmul(yp[i], yp[j])
    s2 = _expsum_series(fam, fam.s2, C)
    one_px2 = np.zeros(P + 1, dtype=dt)
    one_px2[0] = 1.0
    if P >= 2:
        one_px2[2] = 1.0
    rows[0] = (
        _pmul(x, quad)
        - 4.0 * fam.n * _pmul(_pmul(one_px2, inv1), yp[0])
        + fam.cphi * _pmul(_pmul(x, inv2), s2)
    )
    # rows 1..m-1: x(1-x^2) E_i
    for i in range(1, m):
        a, b = fam.sing[i]
        coef = np.zeros(P + 1, dtype=dt)
        coef[0] = a
        if P >= 2:
            coef[2] = b
        F = _expsum_series(fam, fam.src[i - 1], C)
        rows[i] = (
            _pmul(x1mx2, ypp[i])
            - _pmul(coef, yp[i])
            + 0.5 * _pmul(x1mx2, _pmul(yp[0], yp[i]))
            + _pmul(_pmul(x, inv1), F)
        )
    return rows


def _infinity_residual_rows(fam: Family, D):
    """Regularized residual series at x=1 in u=1-x: x(1-x^2)E_1 and x(1-x^2)E_i.

    The source term x(1-x^2)^-1 F is evaluated as (1-u)(2-u)^-1 (F/u); the
    constant coefficient of F vanishes identically because the source weights
    cancel at y=0.
    """
    m, P = fam.m, D.shape[1] - 1
    dt = D.dtype
    # x-derivatives: d/dx = -d/du
    yp = np.array([-_pderiv(D[i]) for i in range(m)])
    ypp = np.array([_pderiv(_pderiv(D[i])) for i in range(m)])

    x = np.zeros(P + 1, dtype=dt)
    x[0], x[1] = 1.0, -1.0
    x1mx2 = np.zeros(P + 1, dtype=dt)  # u(1-u)(2-u) = 2u - 3u^2 + u^3
    if P >= 1:
        x1mx2[1] = 2.0
    if P >= 2:
        x1mx2[2] = -3.0
    if P >= 3:
        x1mx2[3] = 1.0
    inv2mu = np.array([0.5 ** (k + 1) for k in range(P + 1)], dtype=dt)  # (2-u)^-1

    rows = np.zeros((m, P + 1), dtype=dt)
    # row 0: x(1-x^2) E_1
    a, b = fam.sing[0]
    coef = np.zeros(P + 1, dtype=dt)  # a + b x^2 = a + b(1-u)^2
    coef[0] = a + b
    if P >= 1:
        coef[1] = -2.0 * b
    if P >= 2:
        coef[2] = b
    quad = np.zeros(P + 1, dtype=dt)
    for i in range(m):
        for j in range(m):
            if fam.q1[i, j] != 0.0:
                quad = quad + fam.q1[i, j] * _pmul(yp[i], yp[j])
    rows[0] = _pmul(x1mx2, ypp[0]) - _pmul(coef, yp[0]) + _pmul(x1mx2, quad)

    for i in range(1, m):
        a, b = fam.sing[i]
        coef = np.zeros(P + 1, dtype=dt)
        coef[0] = a + b
        if P >= 1:
            coef[1] = -2.0 * b
        if P >= 2:
            coef[2] = b
        F = _expsum_series(fam, fam.src[i - 1], D)
        G = np.zeros(P + 1, dtype=dt)  # F / u
        G[:P] = F[1:]
        src = _pmul(_pmul(x, inv2mu), G)
        rows[i] = (
            _pmul(x1mx2, ypp[i])
            - _pmul(coef, yp[i])
            + 0.5 * _pmul(x1mx2, _pmul(yp[0], yp[i]))
            + src
        )
    return rows


def _indicial_origin(fam, k):
    """Diagonal linear map of the order-k coefficients in the origin rows."""
    d = np.empty(fam.m)
    d[0] = -4.0 * fam.n * k
    for i in range(1, fam.m):
        d[i] = k * (k - 1.0 - fam.sing[i][0])
    return d


def _source_linearization(fam):
    """d(source_i)/d(y_j) at y=0 over the non-K unknowns, (m-1, m-1)."""
    M = np.empty((fam.m - 1, fam.m - 1))
    for i in range(1, fam.m):
        w, v = fam.src[i - 1]
        M[i - 1] = (w @ v)[1:]
    return M


def _solve_recursion(fam, C, rows_fn, free_order, free_vals, start, endpoint):
    """Fill C[:, k] for k >= start order by order.

    The residual coefficient at order k-1 is exactly linear in the order-k
    coefficients with an analytic indicial map (the y1 row decouples, and the
    non-K block is diagonal at the origin and diagonal plus half the source
    linearization at infinity).  At the resonant order `free_order` the non-K
    block is singular: the free values are inserted and the skipped residual
    coefficients checked for consistency.
    """
    m, P = fam.m, C.shape[1] - 1
    wsum = 1.0 + max(np.sum(np.abs(w)) for w, _ in (fam.s2, *fam.src))
    consistency = 0.0
    for k in range(start, P + 1):
        base = rows_fn(fam, C)[:, k - 1]
        if endpoint == "origin":
            diag = _indicial_origin(fam, k)
            C[0, k] = -base[0] / diag[0]
            if k == free_order:
                C[1:, k] = free_vals
            else:
                if np.any(diag[1:] == 0.0):
                    raise SeriesRecursionError(f"vanishing indicial factor at order {k}")
                C[1:, k] = -base[1:] / diag[1:]
        else:
            C[0, k] = -base[0] / (2.0 * k * (k + 1.0))
            if k == free_order:
                C[1:, k] = free_vals
            else:
                ab = fam.sing[1 : fam.m, 0] + fam.sing[1 : fam.m, 1]
                A = np.diag(2.0 * k * (k - 1.0) + ab * k) + 0.5 * _source_linearization(fam)
                C[1:, k] = np.linalg.solve(A.astype(C.dtype), -base[1:])
        if k == free_order:
            res = np.abs(rows_fn(fam, C)[1:, k - 1])
            cmax = float(np.abs(C[:, :k]).max()) if k else 0.0
            scale = wsum * k * k * (1.0 + cmax * cmax)
            consistency = float(res.max())
            if consistency > _CONSISTENCY_RTOL * scale:
                raise SeriesRecursionError(
                    f"inconsistent resonant order {k}: residual {consistency:.3e}"
                )
    return consistency


# -- public constructors -----------------------------------------------------


def fg_series_origin(
    bd: BoundaryData, free: NonlocalParams, order: int | None = None, k0=1.0, log_k0=None
) -> SeriesCoefficients:
    """Origin expansion with boundary ratios from bd and determinant ratio k0.

    Coefficients below order n are determined recursively; the order-n
    coefficients of the non-K unknowns carry the free nonlocal parameters.
    log_k0 overrides k0 (the solver works in y1(0) = log K(0) directly).
    """
    fam = family(bd.kind, bd.n)
    if order is None:
        order = bd.n + 4
    if order < bd.n + 2:
        raise UsageError(f"origin series order must be >= n+2 = {bd.n + 2}")
    free.validate(bd.kind)
    if log_k0 is None:
        if np.real(k0) <= 0:
            raise DomainError("k0 must be positive")
        log_k0 = np.log(k0)
    vals = np.asarray(free.coeffs)
    dt = complex if (np.iscomplexobj(vals) or isinstance(log_k0, complex)) else float
    C = np.zeros((fam.m, order + 1), dtype=dt)
    C[0, 0] = log_k0
    C[1:, 0] = bd.y_boundary()
    cons = _solve_recursion(fam, C, _origin_residual_rows, bd.n, vals, start=1, endpoint="origin")
    return SeriesCoefficients("origin", bd.kind, bd.n, order, C, free, cons)


def series_infinity(
    kind: SystemKind, n: int, order: int = DEFAULT_INFINITY_ORDER, free=None
) -> SeriesCoefficients:
    """Expansion at x=1 in powers of u=1-x.

    The free values are the u^2 coefficients of the non-K unknowns; the K
    series is slaved to them (its local solution manifold at the center has
    no second-order freedom), and y_i(1)=0, y_i'(1)=0 hold by construction.
    """
    kind.validate_dimension(n)
    fam = family(kind, n)
    if order < 3:
        raise UsageError("infinity series order must be >= 3")
    if free is None:
        free = np.zeros(fam.m - 1)
    free = np.asarray(free)
    if free.shape != (fam.m - 1,):
        raise UsageError(f"expected {fam.m - 1} free infinity coefficients")
    dt = complex if np.iscomplexobj(free) else float
    D = np.zeros((fam.m, order + 1), dtype=dt)
    cons = _solve_recursion(fam, D, _infinity_residual_rows, 2, free, start=2, endpoint="infinity")
    return SeriesCoefficients("infinity", kind, n, order, D, None, cons)


# -- evaluation ---------------------------------------------------------------


def _eval_table(table, t, dsign):
    """Evaluate values and first two derivatives of the coefficient rows at t.

    dsign = -1 converts d/du into d/dx for the infinity series; the second
    derivative is sign-free either way.
    """
    t = np.asarray(t)
    m, P1 = table.shape
    d1 = np.array([_pderiv(row) for row in table])
    d2 = np.array([_pderiv(row) for row in d1])
    powers = t[..., None] ** np.arange(P1)
    return powers @ table.T, dsign * (powers @ d1.T), powers @ d2.T


def evaluate_series(sc: SeriesCoefficients, x):
    """State (y, y', y'') of the series at x, inside its trust radius."""
    from .systems import StateVector

    xs = np.asarray(x, dtype=float)
    if sc.endpoint == "origin":
        if np.any(xs < 0) or np.any(xs > TRUST_RADIUS):
            raise DomainError(f"x={x} outside origin series trust radius {TRUST_RADIUS}")
        y, yp, ypp = _eval_table(sc.table, xs, 1.0)
    else:
        if np.any(xs > 1) or np.any(xs < 1.0 - TRUST_RADIUS):
            raise DomainError(f"x={x} outside infinity series trust radius")
        y, yp, ypp = _eval_table(sc.table, 1.0 - xs, -1.0)
    if np.ndim(x) == 0 and not np.iscomplexobj(sc.table):
        return StateVector(float(x), y, yp, ypp)
    return y.T, yp.T, ypp.T


def seed_values(bd: BoundaryData, xs):
    """Smooth monotone blend of the log boundary offsets; the initial guess.

    Satisfies y_i(0)=log phi_(i-1)(0), y_i(1)=0, y_i'(0)=y_i'(1)=0 exactly.
    """
    fam = family(bd.kind, bd.n)
    xs = np.asarray(xs, dtype=float)
    psi = (1.0 + 2.0 * xs) * (1.0 - xs) ** 2
    dpsi = -6.0 * xs * (1.0 - xs)
    y = np.zeros((fam.m,) + xs.shape)
    yp = np.zeros_like(y)
    logs = bd.y_boundary()
    for i in range(1, fam.m):
        y[i] = logs[i - 1] * psi
        yp[i] = logs[i - 1] * dpsi
    return y, yp
