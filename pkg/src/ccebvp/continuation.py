"""Boundary-parameter continuation from the round sphere.

The sweep walks the ratio parameter away from 1, warm-starting each solve
from the previous converged profile, with adaptive steps (halve on failure,
grow after three straight successes).  It stops at the path end, at the
first curvature-sign event, or on min-step exhaustion; an event is then
bisected in the parameter until the bracket is tight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geom
from .solver import SolveOptions, newton_solve, seed_profile, solve_bvp
from .systems import BoundaryData, SystemKind, UsageError
from .verification import run_verification

DEFAULT_EVENT_TOL = 1e-6


@dataclass
class SweepPlan:
    kind: SystemKind
    n: int
    lam_end: float
    lam_start: float = 1.0
    step: float = 0.05
    min_step: float = 1e-4
    max_step: float = 0.1
    event_tol: float = DEFAULT_EVENT_TOL
    options: SolveOptions = field(
        default_factory=lambda: SolveOptions(grid=384, tol=3e-8, refine_rounds=0, coarse_stage=96)
    )

    def __post_init__(self):
        if self.lam_start != 1.0:
            raise UsageError("sweep paths start at the round sphere (ratio 1)")
        if self.step <= 0 or self.min_step <= 0 or self.max_step < self.step:
            raise UsageError("sweep steps must be positive with min <= step <= max")
        if self.lam_end <= 0:
            raise UsageError("the ratio parameter must stay positive")

    def boundary_data(self, lam: float) -> BoundaryData:
        # SU family: phi(0) = lambda per the continuity-method normalization;
        # generalized Berger sweeps walk the Berger line (phi2 = 1).
        if self.kind.family == "su":
            return BoundaryData(self.kind, self.n, (lam,))
        if self.kind.family == "gberger":
            return BoundaryData(self.kind, self.n, (lam, 1.0))
        raise UsageError("sweeps cover the su and gberger families")


@dataclass
class TraceRecord:
    lam: float
    converged: bool
    k0: float
    max_curvature: float
    free: tuple
    verification_pass: bool
    iterations: int
    profile: object = None


@dataclass
class EventRecord:
    lam_event: float
    bracket: tuple
    witness: geom.CurvatureSample
    width: float
    annotation: str = ""


@dataclass
class ContinuationTrace:
    plan: SweepPlan
    records: list
    stop_reason: str  # 'event' | 'path-end' | 'min-step'
    event: EventRecord | None = None


def detect_curvature_event(profile):
    """First node (in x) where any monitored plane curvature reaches zero."""
    samples = geom.curvature_samples(profile)
    for s in sorted(samples, key=lambda t: t.x):
        if s.value >= 0.0:
            at_x = [t for t in samples if t.x == s.x]
            return max(at_x, key=lambda t: t.value)
    return None


def max_curvature(profile) -> float:
    return max(s.value for s in geom.curvature_samples(profile))


def _solve_at(plan: SweepPlan, lam: float, warm=None):
    bd = plan.boundary_data(lam)
    opts = plan.options
    if warm is not None:
        guess = seed_profile(bd, warm.mesh, opts)
        guess.y, guess.yp = warm.y.copy(), warm.yp.copy()
        guess.k0var = warm.k0var
        guess.free = warm.free
        guess.infinity_free = warm.infinity_free.copy()
        return newton_solve(bd, warm.mesh, guess, opts.tol, opts.max_iter, opts)
    return solve_bvp(bd, opts)


def sweep(plan: SweepPlan, tol: float | None = None) -> ContinuationTrace:
    """Walk the parameter path; returns the trace with its stop reason."""
    if tol is not None:
        plan.options.tol = tol
    direction = 1.0 if plan.lam_end >= plan.lam_start else -1.0
    prof, rep = _solve_at(plan, plan.lam_start)
    if not rep.converged:
        raise RuntimeError("the round-sphere solve failed; sweep cannot start")
    records = [_record(plan, plan.lam_start, prof, rep)]
    if plan.lam_end == plan.lam_start:
        return ContinuationTrace(plan, records, "path-end")

    lam, step, streak = plan.lam_start, plan.step, 0
    prev = prof
    while True:
        target = lam + direction * step
        if direction * (target - plan.lam_end) >= 0.0:
            target = plan.lam_end
        prof, rep = _solve_at(plan, target, warm=prev)
        if not rep.converged:
            step *= 0.5
            streak = 0
            if step < plan.min_step:
                return ContinuationTrace(plan, records, "min-step")
            continue
        rec = _record(plan, target, prof, rep)
        sample = detect_curvature_event(prof)
        if sample is not None:
            records.append(rec)
            event = bisect_event(
                ContinuationTrace(plan, records, "event"), plan.event_tol
            )
            return ContinuationTrace(plan, records, "event", event)
        records.append(rec)
        prev, lam = prof, target
        if lam == plan.lam_end:
            return ContinuationTrace(plan, records, "path-end")
        streak += 1
        if streak >= 3:
            step = min(step * 1.5, plan.max_step)
            streak = 0


def _record(plan, lam, prof, rep):
    ver = run_verification(prof)
    return TraceRecord(
        lam,
        rep.converged,
        prof.k0,
        max_curvature(prof),
        tuple(float(np.real(c)) for c in prof.free.coeffs),
        ver.overall_pass,
        rep.iterations,
        prof,
    )


def bisect_event(trace: ContinuationTrace, tol_lambda: float = DEFAULT_EVENT_TOL,
                 solve_at=None, detect=None) -> EventRecord:
    """Shrink the (no-event, event) parameter bracket by bisection.

    Each midpoint is re-solved (warm-started from the nearest converged
    profile); a solver failure inside the bracket returns the widest
    certified bracket with an annotation.
    """
    plan = trace.plan
    if len(trace.records) < 2:
        raise UsageError("bisection needs a no-event record and an event record")
    lo_rec, hi_rec = trace.records[-2], trace.records[-1]
    lo, hi = lo_rec.lam, hi_rec.lam
    if solve_at is None:
        profiles = {lo: lo_rec.profile, hi: hi_rec.profile}

        def solve_at(lam):
            nearest = profiles[min(profiles, key=lambda mu: abs(mu - lam))]
            prof, rep = _solve_at(plan, lam, warm=nearest)
            if rep.converged:
                profiles[lam] = prof
            return prof if rep.converged else None

    if detect is None:
        detect = detect_curvature_event

    witness = detect(hi_rec.profile) if hi_rec.profile is not None else None
    annotation = ""
    while abs(hi - lo) > tol_lambda:
        mid = 0.5 * (lo + hi)
        prof = solve_at(mid)
        if prof is None:
            annotation = f"solver failure at lambda={mid!r}; widest certified bracket returned"
            break
        sample = detect(prof)
        if sample is None:
            lo = mid
        else:
            hi = mid
            witness = sample
    lam_event = 0.5 * (lo + hi)
    return EventRecord(lam_event, (min(lo, hi), max(lo, hi)), witness, abs(hi - lo), annotation)
