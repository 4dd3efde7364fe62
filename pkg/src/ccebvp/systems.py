"""Pointwise residual, constraint and Jacobian evaluators for the reduced
Einstein ODE systems on x in [0,1].

Three families are supported, written in the log variables y_i:

* generalized Berger sphere (n=3, unknowns y1=log K, y2=log phi1, y3=log phi2)
* SU-invariant spheres (n=2k+1, unknowns y1=log K, y2=log phi)
* Sp-invariant spheres (n=4k+3, unknowns y1=log K, y2..y4=log t_i)

Every second-order equation of each family fits the template

    y_i'' - x^-1 (a_i + b_i x^2) (1-x^2)^-1 y_i' + Q_i(y') + (1-x^2)^-2 F_i(y) = 0

where F_i is a weighted sum of exponentials of linear combinations of the y_j,
and the first integral is

    Phi = (y1')^2 - y'^T R y' - 4n x^-1 (1+x^2)(1-x^2)^-1 y1'
          + (1-x^2)^-2 S(y),      S = (2n/(n-1)) * (eq-2 source).

The tables below encode each family once; residuals, constraints, state
Jacobians and the endpoint series recursions are all driven from them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Switch radius for the removable-singularity limit forms near x=0 and x=1.
ENDPOINT_SWITCH = 1e-3


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class UsageError(ValueError):
    """Structurally invalid call (wrong sizes, wrong family, ...)."""


class InfeasibleStateError(DomainError):
    """State violates an inequality required for a closed form (3 - Upsilon > 0)."""


class SeriesRecursionError(RuntimeError):
    """Endpoint series recursion hit a vanishing indicial factor or inconsistency."""


_FAMILIES = ("gberger", "su", "sp")
_UNKNOWNS = {"gberger": 3, "su": 2, "sp": 4}


@dataclass(frozen=True)
class SystemKind:
    """Which reduced system: 'gberger', 'su' or 'sp'."""

    family: str

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise UsageError(f"unknown family {self.family!r}, expected one of {_FAMILIES}")

    @property
    def unknowns(self) -> int:
        return _UNKNOWNS[self.family]

    @property
    def free_count(self) -> int:
        """Number of free nonlocal parameters at the origin (one per non-K unknown)."""
        return self.unknowns - 1

    def validate_dimension(self, n: int) -> None:
        if n % 2 == 0 or n < 3:
            raise UsageError(f"boundary dimension must be odd and >= 3, got {n}")
        if self.family == "gberger" and n != 3:
            raise UsageError("generalized Berger system requires n = 3")
        if self.family == "sp" and n % 4 != 3:
            raise UsageError(f"Sp system requires n = 3 mod 4, got {n}")


GBERGER = SystemKind("gberger")
SU = SystemKind("su")
SP = SystemKind("sp")


@dataclass(frozen=True)
class BoundaryData:
    """Problem instance: family, dimension and the boundary ratios at x=0."""

    kind: SystemKind
    n: int
    phi0: tuple

    def __post_init__(self):
        self.kind.validate_dimension(self.n)
        phi0 = tuple(float(p) for p in self.phi0)
        object.__setattr__(self, "phi0", phi0)
        if len(phi0) != self.kind.free_count:
            raise UsageError(
                f"{self.kind.family} needs {self.kind.free_count} boundary ratios, got {len(phi0)}"
            )
        if any(p <= 0 for p in phi0):
            raise DomainError(f"boundary ratios must be positive, got {phi0}")

    @property
    def in_admissible_window(self) -> bool:
        """SU admissible window 1/(n+1) < phi(0) < n+1; other families unrestricted."""
        if self.kind.family == "su":
            return 1.0 / (self.n + 1) < self.phi0[0] < self.n + 1
        return True

    @property
    def is_round(self) -> bool:
        return all(p == 1.0 for p in self.phi0)

    def y_boundary(self) -> np.ndarray:
        """Values of (y_2, ..., y_m) at x = 0."""
        return np.log(np.asarray(self.phi0))


@dataclass
class StateVector:
    """Point state (x, y, y', y'') handed to the pointwise evaluators."""

    x: float
    y: np.ndarray
    yp: np.ndarray
    ypp: np.ndarray

    def __post_init__(self):
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        self.yp = np.atleast_1d(np.asarray(self.yp, dtype=float))
        self.ypp = np.atleast_1d(np.asarray(self.ypp, dtype=float))


@dataclass
class ResidualVector:
    evo: np.ndarray
    constraint: float


def _check_state(fam: "Family", s: StateVector) -> None:
    m = fam.m
    if not (len(s.y) == len(s.yp) == len(s.ypp) == m):
        raise UsageError(f"state arrays must have length {m} for {fam.kind.family}")
    if not 0.0 <= s.x <= 1.0:
        raise DomainError(f"x must lie in [0,1], got {s.x}")


class Family:
    """Numeric tables for one (kind, n) pair; see the module docstring."""

    def __init__(self, kind: SystemKind, n: int):
        kind.validate_dimension(n)
        self.kind = kind
        self.n = n
        self.m = kind.unknowns
        m, fam = self.m, kind.family

        # singular coefficient (a_i, b_i) per equation; index 0 is the
        # quadratic y1 equation, index m is the sourced y1 equation (eq 2).
        self.sing = np.zeros((m + 1, 2))
        self.sing[0] = (1.0, 3.0)
        self.sing[m] = (2 * n - 1.0, 2 * n + 1.0)

        # quadratic form of eq-1 (coefficient matrix over y'):
        q1 = np.zeros((m, m))
        q1[0, 0] = 1.0 / (2 * n)
        if fam == "gberger":
            q1[1:, 1:] = np.array([[1.0, 0.5], [0.5, 1.0]]) / 3.0
            self.sing[1] = self.sing[2] = (2.0, 4.0)
        elif fam == "su":
            q1[1, 1] = (n - 1.0) / (2 * n)
            self.sing[1] = (n - 1.0, n + 1.0)
        else:
            u = np.ones(3)
            mat = (n - 3.0) * np.outer(u, u)
            for i in range(3):
                v = n * np.eye(3)[i] - u
                mat += np.outer(v, v)
            q1[1:, 1:] = mat / (2.0 * n * n)
            self.sing[1:4] = (n - 1.0, n + 1.0)
        self.q1 = q1

        # constraint quadratic form: Phi = (y1')^2 - y'^T R y' - ...
        self.rmat = np.zeros((m, m))
        self.rmat[1:, 1:] = (2.0 * n / (n - 1.0)) * q1[1:, 1:]

        srcs, s2 = _source_tables(fam, n)
        # per-equation sources for unknowns 2..m: (weights, exponent matrix)
        self.src = [(np.asarray(w), np.asarray(v)) for w, v in srcs]
        self.s2 = (np.asarray(s2[0]), np.asarray(s2[1]))
        # constraint source = cphi * (eq-2 source); applied after summation so
        # the exact integer cancellation at the zero state survives
        self.cphi = 2.0 * n / (n - 1.0)

        # which equation the reported evo_1 is: eq 1 for gberger, eq 2 for su/sp
        self.evo1_is_eq1 = fam == "gberger"

    # -- source sums ---------------------------------------------------------

    @staticmethod
    def expsum(table, y):
        """sum_a w_a exp(v_a . y) for y of shape (..., m)."""
        w, v = table
        return np.exp(y @ v.T) @ w

    @staticmethod
    def expsum_grad(table, y):
        """Gradient of expsum w.r.t. y, shape (..., m)."""
        w, v = table
        return np.exp(y @ v.T) @ (w[:, None] * v)

    @staticmethod
    def expsum_hess_dot(table, y, d):
        """(Hessian of expsum) . d, shape (..., m)."""
        w, v = table
        return (np.exp(y @ v.T) * (d @ v.T)) @ (w[:, None] * v)


def _source_tables(fam: str, n: int):
    """Weight/exponent tables: per-equation sources and the eq-2 source."""
    if fam == "gberger":
        ups = [  # Upsilon exponent terms: K^(-1/3) phi1^p phi2^q
            (2.0, (-1 / 3, 2 / 3, 1 / 3)),
            (2.0, (-1 / 3, -1 / 3, 1 / 3)),
            (2.0, (-1 / 3, -1 / 3, -2 / 3)),
            (-1.0, (-1 / 3, -4 / 3, -2 / 3)),
            (-1.0, (-1 / 3, 2 / 3, -2 / 3)),
            (-1.0, (-1 / 3, 2 / 3, 4 / 3)),
        ]
        s2_w = [48.0] + [-16.0 * w for w, _ in ups]
        s2_v = [(0.0, 0.0, 0.0)] + [v for _, v in ups]
        src2 = (
            [32.0, -32.0, -32.0, 32.0],
            [
                (-1 / 3, 2 / 3, 1 / 3),
                (-1 / 3, -1 / 3, 1 / 3),
                (-1 / 3, 2 / 3, -2 / 3),
                (-1 / 3, -4 / 3, -2 / 3),
            ],
        )
        src3 = (
            [32.0, -32.0, -32.0, 32.0],
            [
                (-1 / 3, -1 / 3, 1 / 3),
                (-1 / 3, -1 / 3, -2 / 3),
                (-1 / 3, 2 / 3, 4 / 3),
                (-1 / 3, 2 / 3, -2 / 3),
            ],
        )
        return [src2, src3], (s2_w, s2_v)

    if fam == "su":
        c = 8.0 * (n + 1.0)
        src2 = ([c, -c], [(-1.0 / n, -(n + 1.0) / n), (-1.0 / n, -1.0 / n)])
        d = 8.0 * (n - 1.0)
        s2 = (
            [d * n, -d * (n + 1.0), d],
            [(0.0, 0.0), (-1.0 / n, -1.0 / n), (-1.0 / n, -(n + 1.0) / n)],
        )
        return [src2], s2

    # sp: prefactor (K^-1 t1 t2 t3)^(1/n) = exp(vp . y)
    vp = np.array([-1.0, 1.0, 1.0, 1.0]) / n
    e = np.eye(4)[1:]  # unit vectors for y2, y3, y4

    def bracket(i):
        j, k = [a for a in range(3) if a != i]
        return [
            (n - 1.0, e[i]),
            (2.0, e[j]),
            (2.0, e[k]),
            (-(n + 5.0), np.zeros(4)),
            (2.0, e[i] - e[j] - e[k]),
            (-2.0, -e[i] + e[j] - e[k]),
            (-2.0, -e[i] - e[j] + e[k]),
            (4.0, -e[i]),
        ]

    srcs = []
    for i in range(3):
        w = [-8.0 * wi for wi, _ in bracket(i)]
        v = [vp + vi for _, vi in bracket(i)]
        srcs.append((w, v))

    phi_br = [(float((n - 3) * (n + 5)), np.zeros(4))]
    phi_br += [(-(n - 3.0), e[i]) for i in range(3)]
    phi_br += [(4.0, -e[i]) for i in range(3)]
    phi_br += [(-2.0, e[i] - e[j] - e[k]) for i, j, k in ((0, 1, 2), (1, 0, 2), (2, 0, 1))]
    s2_w = [8.0 * n * (n - 1.0)] + [-8.0 * wi for wi, _ in phi_br]
    s2_v = [np.zeros(4)] + [vi for _, vi in phi_br]
    return srcs, (s2_w, s2_v)


_family_cache: dict = {}


def family(kind: SystemKind, n: int) -> Family:
    key = (kind.family, n)
    if key not in _family_cache:
        _family_cache[key] = Family(kind, n)
    return _family_cache[key]


# ---------------------------------------------------------------------------
# singular-term helpers with removable-singularity limit forms
# ---------------------------------------------------------------------------


def _sing_term(a, b, x, yp, ypp):
    """x^-1 (a + b x^2)(1-x^2)^-1 yp with the limit substitutions near x=0,1.

    Near x=0 the smooth-state limit replaces yp/x by ypp; near x=1 it replaces
    yp/(1-x^2) by -ypp/(2x).  The limits assume the state is compatible with
    the boundary conditions (y'(0)=y'(1)=0); they stay finite for any input.
    """
    dyp, dypp = _sing_term_jac(a, b, x)
    return dyp * yp + dypp * ypp


def _sing_term_jac(a, b, x):
    """Coefficients (w.r.t. yp, ypp) of _sing_term."""
    x = np.asarray(x, dtype=float)
    c = a + b * x * x
    lo = x < ENDPOINT_SWITCH
    hi = x > 1.0 - ENDPOINT_SWITCH
    mid = ~(lo | hi)
    xm = np.where(mid, x, 0.5)
    dyp = np.where(mid, c / (xm * (1.0 - xm * xm)), 0.0)
    xl = np.where(lo, x, 0.0)
    dypp = np.where(lo, c / (1.0 - xl * xl), 0.0)
    xs = np.where(hi, x, 0.5)
    dypp = np.where(hi, -c / (2.0 * xs * xs), dypp)
    return dyp, dypp


def _source_term(fam, table, x, y, ypp):
    """(1-x^2)^-2 F(y) with the x=1 limit form (grad F . ypp)/8."""
    x = np.asarray(x, dtype=float)
    hi = x > 1.0 - ENDPOINT_SWITCH
    F = fam.expsum(table, y)
    xm = np.where(hi, 0.5, x)
    out = F / (1.0 - xm * xm) ** 2
    if np.any(hi):
        lim = np.sum(fam.expsum_grad(table, y) * ypp, axis=-1) / 8.0
        out = np.where(hi, lim, out)
    return out


def _source_term_jac(fam, table, x, y, ypp):
    """Partials of _source_term w.r.t. (y, ypp), both shaped (..., m)."""
    x = np.asarray(x, dtype=float)
    hi = x > 1.0 - ENDPOINT_SWITCH
    xm = np.where(hi, 0.5, x)
    dy = fam.expsum_grad(table, y) / np.asarray((1.0 - xm * xm) ** 2)[..., None]
    dypp = np.zeros_like(dy)
    if np.any(hi):
        dy_lim = fam.expsum_hess_dot(table, y, ypp) / 8.0
        dy = np.where(hi[..., None], dy_lim, dy)
        dypp = np.where(hi[..., None], fam.expsum_grad(table, y) / 8.0, dypp)
    return dy, dypp


# ---------------------------------------------------------------------------
# vectorised residual cores (x: (...,), y/yp/ypp: (..., m))
# ---------------------------------------------------------------------------


def eq1_residual(fam, x, y, yp, ypp):
    """Quadratic y1 equation (no source)."""
    quad = np.sum((yp @ fam.q1) * yp, axis=-1)
    return ypp[..., 0] - _sing_term(*fam.sing[0], x, yp[..., 0], ypp[..., 0]) + quad


def eq2_residual(fam, x, y, yp, ypp):
    """Sourced y1 equation."""
    return (
        ypp[..., 0]
        - _sing_term(*fam.sing[fam.m], x, yp[..., 0], ypp[..., 0])
        + 0.5 * yp[..., 0] ** 2
        + _source_term(fam, fam.s2, x, y, ypp)
    )


def eqi_residual(fam, i, x, y, yp, ypp):
    """Equation for unknown i (2-based: i in 2..m)."""
    k = i - 1
    return (
        ypp[..., k]
        - _sing_term(*fam.sing[k], x, yp[..., k], ypp[..., k])
        + 0.5 * yp[..., 0] * yp[..., k]
        + _source_term(fam, fam.src[k - 1], x, y, ypp)
    )


def constraint_residual(fam, x, y, yp, ypp):
    """First integral Phi; vanishes identically on exact solutions."""
    quad = yp[..., 0] ** 2 - np.sum((yp @ fam.rmat) * yp, axis=-1)
    lin = -4.0 * fam.n * _sing_term(1.0, 1.0, x, yp[..., 0], ypp[..., 0])
    return quad + lin + fam.cphi * _source_term(fam, fam.s2, x, y, ypp)


def evo_residuals(fam, x, y, yp, ypp):
    """Per-unknown evolution residuals, stacked on the last axis.

    Row 0 is eq 1 for the generalized Berger family and eq 2 for SU/Sp (the
    form whose source term feeds the origin curvature identity); rows
    1..m-1 are the phi/t equations.
    """
    first = eq1_residual if fam.evo1_is_eq1 else eq2_residual
    rows = [first(fam, x, y, yp, ypp)]
    for i in range(2, fam.m + 1):
        rows.append(eqi_residual(fam, i, x, y, yp, ypp))
    return np.stack(rows, axis=-1)


def evo_jacobian(fam, x, y, yp, ypp):
    """Partials of evo_residuals w.r.t. (y, yp, ypp): three (..., m, m) arrays."""
    m = fam.m
    shape = np.broadcast_shapes(np.shape(x), y.shape[:-1])
    dy = np.zeros(shape + (m, m))
    dyp = np.zeros(shape + (m, m))
    dypp = np.zeros(shape + (m, m))

    # row 0
    if fam.evo1_is_eq1:
        cyp, cypp = _sing_term_jac(*fam.sing[0], x)
        dyp[..., 0, :] = 2.0 * (yp @ fam.q1)
        dyp[..., 0, 0] -= cyp
        dypp[..., 0, 0] = 1.0 - cypp
    else:
        cyp, cypp = _sing_term_jac(*fam.sing[m], x)
        sdy, sdypp = _source_term_jac(fam, fam.s2, x, y, ypp)
        dy[..., 0, :] = sdy
        dyp[..., 0, 0] = yp[..., 0] - cyp
        dypp[..., 0, :] = sdypp
        dypp[..., 0, 0] += 1.0 - cypp

    for i in range(2, m + 1):
        k = i - 1
        cyp, cypp = _sing_term_jac(*fam.sing[k], x)
        sdy, sdypp = _source_term_jac(fam, fam.src[k - 1], x, y, ypp)
        dy[..., k, :] = sdy
        dyp[..., k, 0] += 0.5 * yp[..., k]
        dyp[..., k, k] += 0.5 * yp[..., 0] - cyp
        dypp[..., k, :] = sdypp
        dypp[..., k, k] += 1.0 - cypp
    return dy, dyp, dypp


def constraint_jacobian(fam, x, y, yp, ypp):
    """Partials of the first integral w.r.t. (y, yp, ypp), each (..., m)."""
    cyp, cypp = _sing_term_jac(1.0, 1.0, x)
    sdy, sdypp = _source_term_jac(fam, fam.s2, x, y, ypp)
    dy = fam.cphi * sdy
    dyp = -2.0 * (yp @ fam.rmat)
    dyp[..., 0] += 2.0 * yp[..., 0] - 4.0 * fam.n * cyp
    dypp = fam.cphi * sdypp
    dypp[..., 0] += -4.0 * fam.n * cypp
    return dy, dyp, dypp


# ---------------------------------------------------------------------------
# public pointwise operations
# ---------------------------------------------------------------------------


def upsilon(K, phi1, phi2):
    """The scalar Upsilon(K, phi1, phi2) controlling the n=3 origin identity."""
    if K <= 0 or phi1 <= 0 or phi2 <= 0:
        raise DomainError("upsilon requires strictly positive arguments")
    y = np.log([K, phi1, phi2])
    fam = family(GBERGER, 3)
    # S2 = 16*(3 - Upsilon): recover Upsilon from the eq-2 source table.
    return 3.0 - fam.expsum(fam.s2, y) / 16.0


def residual_gberger(s: StateVector) -> ResidualVector:
    fam = family(GBERGER, 3)
    _check_state(fam, s)
    evo = evo_residuals(fam, s.x, s.y, s.yp, s.ypp)
    return ResidualVector(evo, float(constraint_residual(fam, s.x, s.y, s.yp, s.ypp)))


def constraint_gberger(s: StateVector) -> float:
    fam = family(GBERGER, 3)
    _check_state(fam, s)
    return float(constraint_residual(fam, s.x, s.y, s.yp, s.ypp))


def residual_su(n: int, s: StateVector) -> ResidualVector:
    fam = family(SU, n)
    _check_state(fam, s)
    evo = evo_residuals(fam, s.x, s.y, s.yp, s.ypp)
    return ResidualVector(evo, float(constraint_residual(fam, s.x, s.y, s.yp, s.ypp)))


def constraint_su(n: int, s: StateVector) -> float:
    fam = family(SU, n)
    _check_state(fam, s)
    return float(constraint_residual(fam, s.x, s.y, s.yp, s.ypp))


def residual_sp(n: int, s: StateVector) -> ResidualVector:
    fam = family(SP, n)
    _check_state(fam, s)
    evo = evo_residuals(fam, s.x, s.y, s.yp, s.ypp)
    return ResidualVector(evo, float(constraint_residual(fam, s.x, s.y, s.yp, s.ypp)))


def constraint_sp(n: int, s: StateVector) -> float:
    fam = family(SP, n)
    _check_state(fam, s)
    return float(constraint_residual(fam, s.x, s.y, s.yp, s.ypp))


def y1prime_closed_form_gb(x, yp2, yp3, ups):
    """Closed form for y1' from the n=3 first integral (minus-root branch)."""
    if not 0.0 < x < 1.0:
        raise DomainError(f"x must lie in (0,1), got {x}")
    quad = yp2 * yp2 + yp2 * yp3 + yp3 * yp3
    rad = (1 + x * x) ** 2 + x * x * (1 - x * x) ** 2 * quad / 36.0 - 4.0 * x * x * (3.0 - ups) / 3.0
    if rad < 0:
        raise InfeasibleStateError("negative radicand: state violates 3 - Upsilon > 0")
    return 6.0 / (x * (1.0 - x * x)) * (1.0 + x * x - np.sqrt(rad))


def y1prime_closed_form(fam: Family, x, yp_rest, g):
    """General minus-root closed form: y1' from Phi = 0.

    yp_rest are the derivatives of the non-K unknowns and g is the source sum
    S(y)/(16 n) = n - (n+1)(K phi)^(-1/n) + ... for the family at the state.
    """
    n = fam.n
    quad = yp_rest @ fam.rmat[1:, 1:] @ yp_rest
    rad = (1 + x * x) ** 2 + (x * (1 - x * x) / (2.0 * n)) ** 2 * quad - 4.0 * x * x * g / n
    if np.any(rad < 0):
        raise InfeasibleStateError("negative radicand in closed form for y1'")
    return 2.0 * n / (x * (1.0 - x * x)) * (1.0 + x * x - np.sqrt(rad))


def jacobian_state(kind: SystemKind, n: int, s: StateVector):
    """Analytic partials of (evo rows, constraint) w.r.t. (y, yp, ypp).

    Returns an array of shape (m+1, 3, m): row r, block b (0=y, 1=yp, 2=ypp).
    """
    fam = family(kind, n)
    _check_state(fam, s)
    dy, dyp, dypp = evo_jacobian(fam, s.x, s.y, s.yp, s.ypp)
    cy, cyp, cypp = constraint_jacobian(fam, s.x, s.y, s.yp, s.ypp)
    out = np.zeros((fam.m + 1, 3, fam.m))
    out[: fam.m, 0] = dy
    out[: fam.m, 1] = dyp
    out[: fam.m, 2] = dypp
    out[fam.m, 0] = cy
    out[fam.m, 1] = cyp
    out[fam.m, 2] = cypp
    return out
