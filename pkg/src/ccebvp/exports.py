"""Bit-stable CSV and JSON export of profiles, traces and reports.

Numbers are serialized as shortest round-trip decimals (17 significant
digits at most), lines end with LF, the decimal separator is '.', and JSON
keys are ordered lexicographically with all numerics as decimal strings.
Writes are whole-file atomic (write-temp-then-rename); timestamps appear
only inside the provenance object.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import tempfile

import numpy as np

from . import __version__, geometry
from .series import NonlocalParams
from .solver import Mesh, SolutionProfile
from .systems import GBERGER, SP, SU, BoundaryData

PROFILE_SCHEMA = "cce-profile-v1"
TRACE_SCHEMA = "cce-trace-v1"
REPORT_SCHEMA = "cce-report-v1"
EVENT_SCHEMA = "cce-event-v1"

_KINDS = {"gberger": GBERGER, "su": SU, "sp": SP}


def fmt(x) -> str:
    """Shortest round-trip decimal, capped at 17 significant digits."""
    return repr(float(x))


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".cce-")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def profile_columns(profile: SolutionProfile):
    """Column names and per-node data matrix for the profile CSV."""
    m = profile.y.shape[0]
    mp = geometry.reconstruct_metric(profile)
    phi = np.exp(profile.y[1:])
    K = np.exp(profile.y[0])
    Phi = profile.constraint_values()
    maxrad = geometry.radial_sectional_all(mp).max(axis=0)
    names = (
        ["x"]
        + [f"y{i + 1}" for i in range(m)]
        + [f"yp{i + 1}" for i in range(m)]
        + ["K"]
        + [f"phi{i}" for i in range(1, m)]
        + ["Phi"]
        + [f"I{i + 1}" for i in range(mp.I.shape[0])]
        + ["max_radial_curvature"]
    )
    cols = np.vstack([profile.mesh.nodes, profile.y, profile.yp, K[None], phi, Phi[None], mp.I, maxrad[None]])
    return names, cols.T


def export_profile_csv(profile: SolutionProfile, path: str) -> None:
    names, rows = profile_columns(profile)
    meta = [
        f"# schema={PROFILE_SCHEMA}",
        f"# system={profile.bd.kind.family}",
        f"# n={profile.bd.n}",
        "# phi0=" + ",".join(fmt(p) for p in profile.bd.phi0),
        f"# k0var={fmt(profile.k0var)}",
        "# free=" + ",".join(fmt(np.real(c)) for c in profile.free.coeffs),
        "# infinity_free=" + ",".join(fmt(c) for c in profile.infinity_free),
        f"# tol={fmt(profile.tol)}",
        f"# converged={str(profile.converged).lower()}",
        f"# grading={profile.mesh.grading}",
        f"# origin_order={profile.origin_order}",
        f"# infinity_order={profile.infinity_order}",
    ]
    lines = meta + [",".join(names)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def load_profile_csv(path: str) -> SolutionProfile:
    meta, names, rows = {}, None, []
    with open(path, "r") as f:
        for raw in f:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, _, v = body.partition("=")
                    meta[k.strip()] = v.strip()
            elif names is None:
                names = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    if names is None or not rows:
        raise ValueError(f"{path} does not contain a profile table")
    data = np.array(rows).T
    col = {name: data[i] for i, name in enumerate(names)}
    kind = _KINDS[meta["system"]]
    bd = BoundaryData(kind, int(meta["n"]), tuple(float(p) for p in meta["phi0"].split(",")))
    m = kind.unknowns
    y = np.vstack([col[f"y{i + 1}"] for i in range(m)])
    yp = np.vstack([col[f"yp{i + 1}"] for i in range(m)])
    free = NonlocalParams(tuple(float(v) for v in meta["free"].split(",")))
    inf_free = np.array([float(v) for v in meta["infinity_free"].split(",")])
    prof = SolutionProfile(
        bd,
        Mesh(col["x"], meta.get("grading", "endpoint-clustered")),
        y,
        yp,
        k0var=float(meta["k0var"]),
        free=free,
        infinity_free=inf_free,
        converged=meta.get("converged") == "true",
        tol=float(meta["tol"]),
        origin_order=int(meta["origin_order"]),
        infinity_order=int(meta["infinity_order"]),
    )
    return prof


def export_trace_csv(trace, path: str) -> None:
    names = ["lambda", "converged", "K0", "max_curvature", "verification_pass", "iterations"]
    nfree = len(trace.records[0].free)
    names += [f"free{i + 1}" for i in range(nfree)]
    lines = [
        f"# schema={TRACE_SCHEMA}",
        f"# system={trace.plan.kind.family}",
        f"# n={trace.plan.n}",
        ",".join(names),
    ]
    for r in trace.records:
        row = [fmt(r.lam), str(r.converged).lower(), fmt(r.k0), fmt(r.max_curvature),
               str(r.verification_pass).lower(), str(r.iterations)]
        row += [fmt(c) for c in r.free]
        lines.append(",".join(row))
    lines.append(f"# stop_reason={trace.stop_reason}")
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


def provenance(config_hash=""):
    return {
        "tool_version": __version__,
        "config_hash": config_hash,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def report_document(report, profile=None, config_digest=""):
    checks = [
        {
            "name": r.name,
            "anchor": r.anchor,
            "margin": r.margin,
            "threshold": r.threshold,
            "passed": r.passed,
            "applicable": r.applicable,
        }
        for r in report.records
    ]
    doc = {
        "schema": REPORT_SCHEMA,
        "checks": checks,
        "overall_pass": report.overall_pass,
        "provenance": provenance(config_digest),
    }
    if profile is not None:
        doc["boundary"] = {
            "system": profile.bd.kind.family,
            "n": profile.bd.n,
            "phi0": list(profile.bd.phi0),
            "K0": profile.k0,
        }
        doc["converged"] = profile.converged
    return doc


def event_document(event, config_digest=""):
    return {
        "schema": EVENT_SCHEMA,
        "lambda_event": event.lam_event,
        "bracket": list(event.bracket),
        "width": event.width,
        "witness": {"x": event.witness.x, "plane": event.witness.plane, "value": event.witness.value}
        if event.witness is not None
        else None,
        "annotation": event.annotation,
        "provenance": provenance(config_digest),
    }


def export_json(doc: dict, path: str) -> None:
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2)
    _atomic_write(path, text + "\n")
