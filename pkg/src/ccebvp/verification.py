"""Invariant checks against solution profiles and the two-solution
total-variation uniqueness diagnostic.

Every check produces a record (name, anchor slug, measured margin, threshold,
pass flag); checks whose hypotheses fail are marked not-applicable rather
than failed.  A report run can fan out checks over a bounded thread pool and
joins them in a fixed order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geom
from .systems import UsageError, family

DEADBAND = 1e-9


@dataclass
class CheckRecord:
    name: str
    anchor: str
    margin: float
    threshold: float | None
    passed: bool | None  # None when informational
    applicable: bool = True

    @property
    def ok(self) -> bool:
        return (not self.applicable) or self.passed is not False


@dataclass
class VerificationReport:
    records: list

    @property
    def overall_pass(self) -> bool:
        return all(r.ok for r in self.records)

    def record(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


def _interior(profile):
    return slice(1, profile.mesh.n_nodes - 1)


def check_monotonicity(profile) -> list:
    """Derivative sign conditions of the monotone-solution properties at interior nodes."""
    bd = profile.bd
    sl = _interior(profile)
    recs = [
        CheckRecord(
            "monotone-K",
            "volume-ratio-monotonicity",
            float(profile.yp[0, sl].min()),
            -DEADBAND,
            bool(profile.yp[0, sl].min() > -DEADBAND),
        )
    ]
    if bd.kind.family == "su":
        sign = np.sign(1.0 - bd.phi0[0])
        vals = sign * profile.yp[1, sl] if sign != 0 else np.zeros(1)
        recs.append(
            CheckRecord(
                "monotone-ratio",
                "ratio-monotonicity",
                float(vals.min()),
                -DEADBAND,
                bool(vals.min() > -DEADBAND),
            )
        )
    elif bd.kind.family == "gberger":
        p1, p2 = bd.phi0
        hypothesis = p1 < 1.0 and p1 * p2 < 1.0 and p1 + p1 * p2 > 1.0
        for name, f in (
            ("monotone-ratio-1", profile.yp[1, sl]),
            ("monotone-ratio-2", profile.yp[2, sl]),
            ("monotone-ratio-product", profile.yp[1, sl] + profile.yp[2, sl]),
        ):
            if hypothesis:
                margin = float(max(f.min(), (-f).min()))  # single-signedness
                recs.append(
                    CheckRecord(name, "ratio-monotonicity", margin, -DEADBAND, bool(margin > -DEADBAND))
                )
            else:
                recs.append(CheckRecord(name, "ratio-monotonicity", 0.0, None, None, applicable=False))
    return recs


def check_constraint_drift(profile) -> CheckRecord:
    """Sup-norm of the first integral at the nodes against ten times the solve tolerance."""
    drift = float(np.abs(profile.constraint_values()).max())
    thr = 10.0 * profile.tol
    return CheckRecord("constraint-drift", "first-integral-propagation", drift, thr, bool(drift <= thr))


def origin_second_derivatives(bd, k0) -> np.ndarray:
    """Closed forms for y_i''(0) from the equation balance at the origin."""
    fam = family(bd.kind, bd.n)
    y0 = np.concatenate([[np.log(k0)], bd.y_boundary()])
    out = np.empty(fam.m)
    out[0] = fam.cphi * fam.expsum(fam.s2, y0) / (4.0 * fam.n)
    for i in range(1, fam.m):
        a = fam.sing[i][0]
        out[i] = fam.expsum(fam.src[i - 1], y0) / (a - 1.0)
    return out


def check_origin_identities(profile, rtol=1e-6) -> list:
    """Series second coefficients against the closed-form origin identities."""
    sc = profile.origin_series()
    target = origin_second_derivatives(profile.bd, profile.k0)
    got = 2.0 * sc.table[:, 2].real
    recs = []
    names = ["origin-identity-K"] + [f"origin-identity-ratio-{i}" for i in range(1, family(profile.bd.kind, profile.bd.n).m)]
    for name, g, t in zip(names, got, target):
        err = abs(g - t) / max(1.0, abs(t))
        recs.append(CheckRecord(name, "origin-curvature-identity", float(err), rtol, bool(err <= rtol)))
    return recs


def check_apriori_bounds(profile) -> list:
    """Interior bound y1' < 4n x/(1-x^2) and ratio-range containment."""
    bd = profile.bd
    n = bd.n
    sl = _interior(profile)
    xs = profile.mesh.nodes[sl]
    bound = 4.0 * n * xs / (1.0 - xs * xs)
    margin = float((bound - profile.yp[0, sl]).min())
    recs = [
        CheckRecord("apriori-y1-derivative", "first-derivative-bound", margin, 0.0, bool(margin > 0.0))
    ]
    m = family(bd.kind, bd.n).m
    for i in range(1, m):
        phi0 = bd.phi0[i - 1]
        lo, hi = min(phi0, 1.0), max(phi0, 1.0)
        phi = np.exp(profile.y[i, sl])
        margin = float(min((phi - lo).min(), (hi - phi).min()))
        recs.append(
            CheckRecord(
                f"range-ratio-{i}",
                "ratio-range-containment",
                margin,
                -DEADBAND,
                bool(margin > -DEADBAND),
            )
        )
    K = np.exp(profile.y[0, sl])
    kmargin = float(min((K - profile.k0).min(), (1.0 - K).min()))
    recs.append(
        CheckRecord("range-K", "determinant-ratio-window", kmargin, -DEADBAND, bool(kmargin > -DEADBAND))
    )
    return recs


def check_k0_window(profile) -> CheckRecord:
    rep = geom.k0_bounds_check(profile.bd, profile.k0)
    lb = rep.lower_bound if rep.lower_bound is not None else 0.0
    margin = float(min(profile.k0 - lb, 1.0 - profile.k0))
    if rep.boundary_case:
        return CheckRecord("k0-window", "determinant-ratio-window", 0.0, None, True)
    return CheckRecord("k0-window", "determinant-ratio-window", margin, 0.0, bool(rep.passed))


def check_weyl_bound(profile, samples=None) -> CheckRecord:
    """n=3 mixed Weyl components against the nonpositively-curved bound 2*sqrt(6)."""
    if profile.bd.n != 3:
        return CheckRecord("weyl-bound", "weyl-norm-bound", 0.0, None, None, applicable=False)
    if samples is None:
        samples = geom.curvature_samples(profile)
    if max(s.value for s in samples) > 1e-8:
        # the bound's hypothesis (nonpositive curvature) fails
        return CheckRecord("weyl-bound", "weyl-norm-bound", 0.0, None, None, applicable=False)
    mp = geom.reconstruct_metric(profile)
    worst = 0.0
    for x in mp.x:
        for perm in ((1, 2, 3), (2, 3, 1), (3, 1, 2), (1, 3, 2), (2, 1, 3), (3, 2, 1)):
            worst = max(worst, geom.weyl_mixed_n3(mp, *perm, float(x)))
    thr = geom.WEYL_BOUND_N3 + 1e-8
    return CheckRecord("weyl-bound", "weyl-norm-bound", float(worst), thr, bool(worst <= thr))


def pinching_report(profile, samples=None, threshold=None) -> CheckRecord:
    """Max |K + 1| over monitored planes; informational unless a threshold is set."""
    if samples is None:
        samples = geom.curvature_samples(profile)
    worst = max(abs(s.value + 1.0) for s in samples)
    passed = None if threshold is None else bool(worst <= threshold)
    return CheckRecord("pinching", "curvature-pinching", float(worst), threshold, passed)


def check_radial_trace(profile) -> CheckRecord:
    """Multiplicity-weighted radial curvature sum equals -n at every node."""
    mp = geom.reconstruct_metric(profile)
    err = float(np.abs(geom.radial_trace(mp) + profile.bd.n).max())
    return CheckRecord("radial-einstein-trace", "einstein-radial-trace", err, 1e-8, bool(err <= 1e-8))


@dataclass
class VariationLedger:
    z: np.ndarray  # difference functions, one row per unknown
    variations: np.ndarray
    intervals: list  # per unknown: list of (x_lo, x_hi, sign) monotone pieces
    inequality_residuals: np.ndarray | None  # gberger contraction system
    slack: float
    forces_zero: bool


def _monotone_decomposition(xs, z):
    d = np.diff(z)
    sgn = np.where(np.abs(d) <= DEADBAND, 0.0, np.sign(d))
    pieces = []
    start, cur = 0, 0.0
    for j, s in enumerate(sgn):
        if s != 0.0 and cur == 0.0:
            cur = s
        elif s != 0.0 and s != cur:
            pieces.append((float(xs[start]), float(xs[j]), float(cur)))
            start, cur = j, s
    pieces.append((float(xs[start]), float(xs[-1]), float(cur)))
    return pieces


def uniqueness_diagnostic(p1, p2) -> VariationLedger:
    """Total-variation ledger of the difference of two solutions.

    Computes z_i, its monotone-interval decomposition and total variations,
    and for the generalized Berger family evaluates the contraction
    inequalities V(z2) <= V(z1)/2 + V(z3)/4, V(z3) <= V(z1)/2 + V(z2)/4,
    V(z1) <= (V(z2)+V(z3))/3, whose only nonnegative solution is zero.
    """
    if p1.bd != p2.bd:
        raise UsageError("uniqueness diagnostic requires identical boundary data")
    xs = p1.mesh.nodes
    if p2.mesh.n_nodes == p1.mesh.n_nodes and np.array_equal(p2.mesh.nodes, xs):
        y2 = p2.y
    else:
        y2 = p2.interpolate(xs)[0]
    z = p1.y - y2
    V = np.abs(np.diff(z, axis=1)).sum(axis=1)
    intervals = [_monotone_decomposition(xs, zi) for zi in z]
    slack = max(1e-12, 100.0 * max(p1.tol, p2.tol))
    ineq = None
    if p1.bd.kind.family == "gberger":
        ineq = np.array(
            [
                0.5 * V[0] + 0.25 * V[2] - V[1],
                0.5 * V[0] + 0.25 * V[1] - V[2],
                (V[1] + V[2]) / 3.0 - V[0],
            ]
        )
    forces_zero = bool(np.all(V <= slack))
    return VariationLedger(z, V, intervals, ineq, slack, forces_zero)


def run_verification(profile, threads: int | None = None, pinching_threshold=None) -> VerificationReport:
    """Run every applicable check; deterministic record ordering."""
    if threads is None:
        threads = max(1, int(os.environ.get("CCE_THREADS", "1") or 1))
    samples = geom.curvature_samples(profile)
    tasks = {
        "drift": lambda: [check_constraint_drift(profile)],
        "trace": lambda: [check_radial_trace(profile)],
        "mono": lambda: check_monotonicity(profile),
        "origin": lambda: check_origin_identities(profile),
        "apriori": lambda: check_apriori_bounds(profile),
        "k0": lambda: [check_k0_window(profile)],
        "weyl": lambda: [check_weyl_bound(profile, samples)],
        "pinch": lambda: [pinching_report(profile, samples, pinching_threshold)],
    }
    order = ["drift", "trace", "mono", "origin", "apriori", "k0", "weyl", "pinch"]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futures = {k: ex.submit(fn) for k, fn in tasks.items()}
            results = {k: f.result() for k, f in futures.items()}
    else:
        results = {k: fn() for k, fn in tasks.items()}
    records = []
    for k in order:
        records.extend(results[k])
    return VerificationReport(records)
