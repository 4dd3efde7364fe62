"""Config parsing, CSV/JSON export stability, round-trips and CLI exit codes."""

import json
import os

import numpy as np
import pytest

from ccebvp.cli import main
from ccebvp.config import ParseError, parse_config
from ccebvp.exports import export_profile_csv, fmt, load_profile_csv
from ccebvp.solver import SolveOptions, solve_bvp
from ccebvp.systems import SU, BoundaryData


class TestConfig:
    def test_minimal_defaults(self):
        cfg = parse_config("system = su\nn = 5\nphi0 = 0.8\n")
        assert cfg.grid == 128 and cfg.tol == 1e-10
        assert cfg.phi0 == (0.8,) and cfg.out == "."

    def test_comments_and_whitespace(self):
        cfg = parse_config("# comment\nsystem=su # trailing\n n = 5 \nphi0=0.8\n")
        assert cfg.system == "su"

    def test_even_n_rejected(self):
        with pytest.raises(ParseError, match="odd"):
            parse_config("system = su\nn = 4\nphi0 = 0.8\n")

    def test_negative_ratio_rejected(self):
        with pytest.raises(ParseError, match="positive"):
            parse_config("system = su\nn = 5\nphi0 = -1\n")

    def test_unknown_key_named(self):
        with pytest.raises(ParseError, match="frobnicate.*line 2"):
            parse_config("system = su\nfrobnicate = 1\nn = 5\nphi0 = 0.8\n")

    def test_missing_required(self):
        with pytest.raises(ParseError, match="phi0"):
            parse_config("system = su\nn = 5\n")

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("CCE_THREADS", "3")
        cfg = parse_config("system = su\nn = 5\nphi0 = 0.8\n")
        assert cfg.threads == 3


@pytest.fixture(scope="module")
def small_profile():
    prof, rep = solve_bvp(
        BoundaryData(SU, 5, (0.85,)),
        SolveOptions(grid=64, tol=1e-7, refine_rounds=0, coarse_stage=0),
    )
    assert rep.residual_norm <= 1e-7
    return prof


class TestCSV:
    def test_round_trip_bit_exact(self, small_profile, tmp_path):
        p = tmp_path / "profile.csv"
        export_profile_csv(small_profile, str(p))
        loaded = load_profile_csv(str(p))
        assert np.array_equal(loaded.y, small_profile.y)
        assert np.array_equal(loaded.yp, small_profile.yp)
        assert np.array_equal(loaded.mesh.nodes, small_profile.mesh.nodes)
        assert loaded.k0var == small_profile.k0var
        assert loaded.free.coeffs == tuple(np.real(c) for c in small_profile.free.coeffs)
        # re-export reproduces the file byte for byte
        p2 = tmp_path / "profile2.csv"
        export_profile_csv(loaded, str(p2))
        assert p.read_bytes() == p2.read_bytes()

    def test_fmt_shortest_roundtrip(self):
        for v in (1 / 3, 1e-17, 123456.789, 0.1, -2.5e300):
            assert float(fmt(v)) == v
        assert fmt(0.5) == "0.5"

    def test_zero_profile_rows(self, tmp_path):
        prof, rep = solve_bvp(
            BoundaryData(SU, 5, (1.0,)), SolveOptions(grid=16, refine_rounds=0, coarse_stage=0)
        )
        p = tmp_path / "round.csv"
        export_profile_csv(prof, str(p))
        lines = [l for l in p.read_text().splitlines() if l and not l.startswith("#")]
        header, rows = lines[0], lines[1:]
        assert len(rows) == 16
        phi_col = header.split(",").index("Phi")
        assert all(float(r.split(",")[phi_col]) == 0.0 for r in rows)


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestSolveCommand:
    def test_round_exit_zero(self, tmp_path):
        cfg = write_cfg(
            tmp_path, "system = gberger\nn = 3\nphi0 = 1,1\ngrid = 48\ntol = 1e-9\n"
        )
        rc = main(["solve", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        assert (tmp_path / "profile.csv").exists()
        assert (tmp_path / "report.json").exists()

    def test_su_case_exit_zero(self, tmp_path):
        cfg = write_cfg(tmp_path, "system = su\nn = 5\nphi0 = 0.8\ngrid = 96\ntol = 1e-7\n")
        rc = main(["solve", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["overall_pass"] is True
        assert doc["schema"] == "cce-report-v1"
        # numerics serialized as decimal strings
        assert isinstance(doc["boundary"]["K0"], str)

    def test_unwritable_out_exit_three(self, tmp_path):
        cfg = write_cfg(tmp_path, "system = gberger\nn = 3\nphi0 = 1,1\ngrid = 16\n")
        rc = main(["solve", "--config", cfg, "--out", "/proc/definitely-not-writable", "--quiet"])
        assert rc == 3

    def test_bad_config_exit_one(self, tmp_path):
        cfg = write_cfg(tmp_path, "system = su\nn = 4\nphi0 = 0.8\n")
        assert main(["solve", "--config", cfg, "--quiet"]) == 1

    def test_determinism_reruns(self, tmp_path):
        cfg = write_cfg(tmp_path, "system = su\nn = 5\nphi0 = 0.9\ngrid = 48\ntol = 1e-6\n")
        outs = []
        for d in ("a", "b"):
            out = tmp_path / d
            main(["solve", "--config", cfg, "--out", str(out), "--quiet"])
            outs.append(out)
        assert (outs[0] / "profile.csv").read_bytes() == (outs[1] / "profile.csv").read_bytes()
        docs = [json.loads((o / "report.json").read_text()) for o in outs]
        for d in docs:
            d["provenance"].pop("timestamp")
        assert docs[0] == docs[1]


class TestSweepCommand:
    def test_single_point_sweep(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            "system = su\nn = 3\nphi0 = 1\ngrid = 48\ntol = 1e-8\nsweep_end = 1.0\n",
        )
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 0
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        data = [l for l in lines if l and not l.startswith("#")]
        assert len(data) == 2  # header + one row
        assert any("stop_reason=path-end" in l for l in lines)
        assert not (tmp_path / "event.json").exists()

    def test_missing_sweep_end(self, tmp_path):
        cfg = write_cfg(tmp_path, "system = su\nn = 3\nphi0 = 1\n")
        assert main(["sweep", "--config", cfg, "--quiet"]) == 1


class TestVerifyExport:
    def test_verify_single(self, small_profile, tmp_path):
        p = tmp_path / "profile.csv"
        export_profile_csv(small_profile, str(p))
        rc = main(["verify", str(p), "--out", str(tmp_path)])
        assert rc in (0, 2)
        assert (tmp_path / "report.json").exists()

    def test_verify_pair(self, small_profile, tmp_path, capsys):
        p = tmp_path / "a.csv"
        export_profile_csv(small_profile, str(p))
        rc = main(["verify", str(p), str(p)])
        assert rc == 0
        outtext = capsys.readouterr().out
        assert "V(z1)" in outtext and "forces_zero=True" in outtext

    def test_export_json(self, small_profile, tmp_path):
        p = tmp_path / "profile.csv"
        export_profile_csv(small_profile, str(p))
        rc = main(["export", str(p), "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "profile.json").read_text())
        assert doc["system"] == "su" and len(doc["x"]) == 64


class TestSweepMinStep:
    def test_min_step_exhaustion_exit_two(self, tmp_path):
        # a coarse grid with an unreachable drift gate fails every step after
        # the round start; halving exhausts the minimum step
        cfg = write_cfg(
            tmp_path,
            "system = su\nn = 3\nphi0 = 1\ngrid = 24\ntol = 1e-12\n"
            "sweep_end = 0.5\nsweep_step = 0.05\nsweep_min_step = 0.02\n",
        )
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 2
        assert "stop_reason=min-step" in (tmp_path / "trace.csv").read_text()


class TestFlaggedExit:
    def test_converged_but_flagged_exit_two(self, tmp_path):
        # converges at a loose tolerance but the hard radial-trace threshold
        # fails at this resolution: converged-but-flagged
        cfg = write_cfg(
            tmp_path, "system = su\nn = 3\nphi0 = 0.31\ngrid = 128\ntol = 1e-6\n"
        )
        rc = main(["solve", "--config", cfg, "--out", str(tmp_path), "--quiet"])
        assert rc == 2
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["converged"] is True and doc["overall_pass"] is False


class TestFlagOverrides:
    def test_grid_and_tol_flags(self, tmp_path):
        cfg = write_cfg(tmp_path, "system = gberger\nn = 3\nphi0 = 1,1\n")
        rc = main(
            ["solve", "--config", cfg, "--out", str(tmp_path), "--grid", "24",
             "--tol", "1e-8", "--quiet"]
        )
        assert rc == 0
        lines = (tmp_path / "profile.csv").read_text().splitlines()
        rows = [l for l in lines if l and not l.startswith("#") and not l.startswith("x,")]
        assert len(rows) == 24
        assert any("tol=1e-08" in l for l in lines)
