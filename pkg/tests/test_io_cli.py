import json

import numpy as np
import pytest

from parascatter import cli
from parascatter.geometry import BilliardSpec
from parascatter.io import (GridSpec, export_grid, export_resonances, export_spectrum,
                            export_tmatrix, read_grid, read_resonances, read_spectrum,
                            read_tmatrix, sidecar_path)
from parascatter.spectrum import Resonance, SpectrumScan

SMALL_GRID = {"x_min": -1.0, "x_max": 1.0, "y_min": -1.0, "y_max": 1.0, "nx": 5, "ny": 4}


def write_config(path, **cfg):
    path.write_text(json.dumps(cfg, indent=2))
    return path


class TestGrid:
    def test_two_by_two_size(self, tmp_path):
        g = GridSpec(0, 1, 0, 1, 2, 2)
        p = export_grid(np.ones(4), g, tmp_path / "a.psgr")
        raw = p.read_bytes()
        assert len(raw) == 16 + 32
        assert raw[:4] == b"PSGR"
        assert np.frombuffer(raw[4:16], "<u4").tolist() == [2, 2, 1]

    def test_round_trip(self, tmp_path):
        g = GridSpec(**SMALL_GRID)
        rng = np.random.default_rng(1)
        vals = rng.normal(size=20) + 1j * rng.normal(size=20)
        export_grid(vals, g, tmp_path / "b.psgr")
        back, nx, ny = read_grid(tmp_path / "b.psgr")
        assert (nx, ny) == (5, 4)
        np.testing.assert_array_equal(back.ravel(), vals.astype(np.complex64))

    def test_row_major_x_fastest(self, tmp_path):
        g = GridSpec(**SMALL_GRID)
        pts = g.points()
        export_grid(pts[:, 0] + 1j * pts[:, 1], g, tmp_path / "c.psgr")
        back, _, _ = read_grid(tmp_path / "c.psgr")
        np.testing.assert_allclose(back[0].real, g.x, atol=1e-7)
        np.testing.assert_allclose(back[:, 0].imag, g.y, atol=1e-7)

    def test_sidecar(self, tmp_path):
        g = GridSpec(**SMALL_GRID)
        p = export_grid(np.zeros(20), g, tmp_path / "d.psgr", {"k": 2.0, "scenario": {"mode": "x"}})
        side = json.loads(sidecar_path(p).read_text())
        assert side["grid"] == SMALL_GRID
        assert side["k"] == 2.0 and side["scenario"] == {"mode": "x"}

    def test_size_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            export_grid(np.zeros(3), GridSpec(0, 1, 0, 1, 2, 2), tmp_path / "e.psgr")

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "f.psgr"
        p.write_bytes(b"XXXX" + bytes(12))
        with pytest.raises(ValueError):
            read_grid(p)

    def test_grid_spec_checks(self):
        with pytest.raises(ValueError):
            GridSpec(1, 0, 0, 1, 2, 2)
        with pytest.raises(ValueError):
            GridSpec(0, 1, 0, 1, 1, 2)


class TestSpectrumFiles:
    def test_three_point_csv(self, tmp_path):
        scan = SpectrumScan([0.5, 0.6, 0.7], [1.0, 3.0, 2.0], BilliardSpec(3, 2), 200)
        p = export_spectrum(scan, tmp_path / "s.csv")
        lines = p.read_text().splitlines()
        assert len(lines) == 4 and lines[0] == "k,k2,tnorm"
        k, k2, t = read_spectrum(p)
        np.testing.assert_array_equal(k, scan.k_values)
        np.testing.assert_array_equal(k2, scan.k_values**2)
        np.testing.assert_array_equal(t, scan.norms)

    def test_resonance_json(self, tmp_path):
        rs = [Resonance.from_k(1.1, iterations=7, window=1e-5, converged=False, escaped=True, t_norm=3.5),
              Resonance.from_k(0.6354, iterations=6, window=6.5e-6, converged=True, t_norm=2e8)]
        p = export_resonances(rs, tmp_path / "r.json", {"n_points": 200})
        back = read_resonances(p)
        assert back == sorted(rs, key=lambda r: r.k_n)

    def test_tmatrix(self, tmp_path):
        T = np.arange(6).reshape(2, 3) * (1 + 1j)
        p = export_tmatrix(T, tmp_path / "t.f32")
        assert p.stat().st_size == 6 * 4
        np.testing.assert_allclose(read_tmatrix(p), np.abs(T), rtol=1e-7)


class TestCli:
    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "bad.json", wave={"k": -1.0})
        assert cli.main(["analytic-infinite", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "bad.json:3" in err and "wave/k" in err

    def test_invalid_json(self, tmp_path, capsys):
        cfg = tmp_path / "broken.json"
        cfg.write_text('{\n  "wave": {"k": 1.0,}\n}')
        assert cli.main(["analytic-infinite", "--config", str(cfg)]) == 2
        assert "broken.json:2" in capsys.readouterr().err

    def test_mode_mismatch(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", mode="spectrum")
        assert cli.main(["analytic-infinite", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_unknown_key(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", wave={"k": 1.0, "omega": 2})
        assert cli.main(["analytic-infinite", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_analytic_run_and_manifest(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", wave={"k": 10.0, "beta_deg": 15.0}, grid=SMALL_GRID)
        out = tmp_path / "run"
        assert cli.main(["analytic-infinite", "--config", str(cfg), "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        # every default is written out
        for section, values in cli.DEFAULTS.items():
            if isinstance(values, dict):
                assert set(values) <= set(man[section])
        assert man["wave"] == {"k": 10.0, "beta_deg": 15.0}
        side = json.loads((out / "psi.psgr.json").read_text())
        assert side["scenario"]["barrier"] == man["barrier"]
        vals, nx, ny = read_grid(out / "psi.psgr")
        assert (nx, ny) == (5, 4) and np.all(np.isfinite(vals))

    def test_manifest_replay_bitwise(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", billiard={"xi0": 3.0, "eta0": 2.0},
                           wave={"k": 1.5, "beta_deg": 10.0}, grid=SMALL_GRID,
                           numerics={"n_points": 40})
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["bwm-billiard", "--config", str(cfg), "--out", str(a)]) == 0
        assert cli.main(["bwm-billiard", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
        for name in ("psi.psgr", "tmatrix_abs.f32", "boundary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_flags_override_config(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", wave={"k": 1.0}, grid=SMALL_GRID,
                           numerics={"n_points": 40, "threads": 1})
        out = tmp_path / "o"
        argv = ["bwm-billiard", "--config", str(cfg), "--out", str(out), "--k", "1.25",
                "--beta", "30", "--gamma", "2.5", "--n-points", "48", "--grid-nx", "3",
                "--threads", "2"]
        assert cli.main(argv) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["wave"] == {"k": 1.25, "beta_deg": 30.0}
        assert man["numerics"]["gamma"] == 2.5 and man["numerics"]["n_points"] == 48
        assert man["numerics"]["threads"] == 2 and man["grid"]["nx"] == 3
        assert man["results"]["n_points"] == 48

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path / "c.json", grid=SMALL_GRID)
        monkeypatch.setenv("PARASCATTER_THREADS", "3")
        out = tmp_path / "env"
        assert cli.main(["analytic-knife", "--config", str(cfg), "--out", str(out)]) == 0
        assert json.loads((out / "manifest.json").read_text())["numerics"]["threads"] == 3
        out2 = tmp_path / "flag"
        assert cli.main(["analytic-knife", "--config", str(cfg), "--out", str(out2), "--threads", "1"]) == 0
        assert json.loads((out2 / "manifest.json").read_text())["numerics"]["threads"] == 1

    def test_gamma_inf_flag(self):
        assert cli._parse_strength("inf") == "inf"
        assert cli._parse_strength("1e400") == "inf"
        assert cli._parse_strength("2") == 2.0

    def test_warnings_recorded(self, tmp_path):
        # a one-term cap cannot converge, which is reported but not fatal
        cfg = write_config(tmp_path / "c.json", wave={"k": 10.0, "beta_deg": 15.0}, grid=SMALL_GRID,
                           numerics={"max_terms": 1})
        out = tmp_path / "w"
        assert cli.main(["analytic-infinite", "--config", str(cfg), "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert any("TruncationWarning" in w for w in man["warnings"])

    def test_spectrum_mode(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", numerics={"n_points": 80},
                           spectrum={"k_min": 0.6, "k_max": 0.7, "samples": 11})
        out = tmp_path / "sp"
        assert cli.main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 0
        k, _, t = read_spectrum(out / "spectrum.csv")
        assert k.size == 11 and np.all(np.diff(k) > 0) and np.all(t > 0)

    def test_refine_mode_sorted(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", numerics={"n_points": 80},
                           spectrum={"k_min": 0.6, "k_max": 0.95, "samples": 36, "epsilon": 1e-5})
        out = tmp_path / "rf"
        assert cli.main(["refine", "--config", str(cfg), "--out", str(out)]) == 0
        rs = read_resonances(out / "resonances.json")
        assert len(rs) >= 2
        assert [r.k_n for r in rs] == sorted(r.k_n for r in rs)
