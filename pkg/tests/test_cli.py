import json
import math

import numpy as np
import pytest

from pvlab import pvlf
from pvlab.cli import main
from pvlab.grid import GridSpec, ScalarField, VectorField, gradient
from pvlab.report import load_reports, read_csv
from pvlab.synth import radial_vortex_2d, vortex_profile

ALL_CHECKS = """\
checks:
  - identity: hyperplane
    params: {count: 4}
  - identity: global
  - identity: sphere
  - identity: sign_sweep
    params: {count: 8}
  - identity: weak_form
    params: {count: 6, ramps: 2}
"""


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def invoke(*argv):
    return main([str(a) for a in argv])


def summary(root):
    return json.loads((root / "summary.json").read_text(encoding="utf-8"))


class TestRunExamples:
    def test_zero_field_all_checks(self, tmp_path, capsys):
        cfg = write(tmp_path, "grid: {M: 64}\ngenerator: {name: zero}\n" + ALL_CHECKS)
        out = tmp_path / "zero"
        assert invoke("check", "--config", cfg, "--out", out) == 0
        doc = summary(out)
        assert doc["counts"]["fail"] == 0 and doc["counts"]["pass"] == doc["total"] > 0
        notes = json.loads((out / "reports" / "03_sign_sweep_notes.json").read_text())
        assert notes["verdict"] == "v ≡ 0 confirmed"
        assert "total" in capsys.readouterr().out

    def test_radial_vortex_twenty_planes(self, tmp_path):
        cfg = write(
            tmp_path,
            "grid: {M: 256}\ngenerator: {name: radial_vortex, params: {a: 0.4}}\n"
            "checks:\n  - identity: hyperplane\n    params: {count: 20, max_offset: 0.3}\n",
        )
        out = tmp_path / "vortex"
        assert invoke("check", "--config", cfg, "--out", out) == 0
        files = sorted((out / "reports").glob("00_hyperplane_*.json"))
        assert len(files) == 20
        assert all(json.loads(f.read_text())["status"] == "pass" for f in files)
        rows = read_csv(out / "sweeps" / "00_hyperplane.csv")
        assert len(rows) == 20 and {"residual_rel", "status", "params.plane.xi_0", "params.plane.x0_0"} <= set(rows[0])

    def test_anisotropic_control_is_excused(self, tmp_path):
        cfg = write(tmp_path, "grid: {M: 256}\ngenerator: {name: anisotropic_control}\nchecks:\n  - identity: sign_sweep\n")
        out = tmp_path / "aniso"
        assert invoke("check", "--config", cfg, "--out", out) == 0
        statuses = {r.status for r in load_reports(out)}
        assert statuses == {"hypothesis-violated"}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("verify")
    cfg = write(
        tmp,
        "seed: 11\ngrid: {M: 128}\ngenerator: {name: radial_vortex, params: {a: 0.4}}\n"
        "checks:\n  - identity: global\n  - identity: weak_form\n    params: {count: 8, ramps: 2}\n",
    )
    assert invoke("check", "--config", cfg, "--out", tmp / "ref") == 0
    return tmp, cfg


class TestVerify:
    def test_round_trip_reproduces_reports(self, pipeline):
        tmp, cfg = pipeline
        ref = tmp / "ref"
        assert invoke("verify", "--config", cfg, "--out", tmp / "ext", ref / "fields" / "velocity.pvlf") == 0
        for sub in ("reports", "sweeps"):
            names = sorted(p.name for p in (ref / sub).iterdir())
            assert names == sorted(p.name for p in (tmp / "ext" / sub).iterdir())
            for n in names:
                assert (ref / sub / n).read_bytes() == (tmp / "ext" / sub / n).read_bytes()

    def test_corrupted_pressure_fails_weak_form(self, pipeline):
        tmp, cfg = pipeline
        ref = tmp / "ref"
        p = pvlf.read(ref / "fields" / "pressure.pvlf")
        bump = np.exp(-(p.grid.radius() ** 2) / 0.01) * 1e-3 * np.abs(p.samples).max()
        bad = write(tmp, "", "bad.pvlf")
        bad.write_bytes(pvlf.encode(p.with_samples(p.samples + bump)))
        out = tmp / "corrupt"
        assert invoke("verify", "--config", cfg, "--out", out, ref / "fields" / "velocity.pvlf", bad) == 1
        weak = [r for r in load_reports(out) if r.identity == "weak_form"]
        assert any(r.status == "fail" for r in weak)

    def test_divergent_velocity_rejected(self, tmp_path, pipeline, capsys):
        _, cfg = pipeline
        g = GridSpec(2, 128, 1.0)
        v, _, _ = radial_vortex_2d(vortex_profile(0.4), g)
        grad = gradient(ScalarField(g, np.exp(-(g.radius() ** 2) / 0.02)))
        scale = 1e-2 * v.max_speed() / grad.max_speed()
        leaky = VectorField(g, [a + scale * b for a, b in zip(v.components, grad.components)])
        path = tmp_path / "leaky.pvlf"
        path.write_bytes(pvlf.encode(leaky))
        out = tmp_path / "leaky"
        assert invoke("verify", "--config", cfg, "--out", out, path) == 3
        assert "divergence" in capsys.readouterr().err
        assert not (out / "reports").exists()

    @pytest.mark.parametrize("offset,field", [(0, "magic"), (12, "M")])
    def test_format_error_names_field(self, tmp_path, pipeline, capsys, offset, field):
        tmp, cfg = pipeline
        raw = bytearray((tmp / "ref" / "fields" / "velocity.pvlf").read_bytes())
        raw[offset : offset + 4] = b"\x07\x00\x00\x00"
        path = tmp_path / "broken.pvlf"
        path.write_bytes(bytes(raw))
        assert invoke("verify", "--config", cfg, "--out", tmp_path / "o", path) == 3
        assert f"error: {field}" in capsys.readouterr().err


class TestErrors:
    def test_stage_failure_leaves_marker(self, tmp_path, capsys):
        cfg = write(tmp_path, "generator: {name: radial_vortex, params: {a: 0.7}}\nchecks:\n  - identity: global\n")
        out = tmp_path / "failed"
        assert invoke("check", "--config", cfg, "--out", out) == 3
        assert (out / "FAILED").read_text().startswith("synth:")
        assert (out / "config.yaml").exists() and "failed" in summary(out)
        assert "synth" in capsys.readouterr().err

    def test_marker_cleared_on_success(self, tmp_path):
        out = tmp_path / "o"
        out.mkdir()
        (out / "FAILED").write_text("old\n")
        assert invoke("synth", "--out", out) == 0
        assert not (out / "FAILED").exists()

    def test_config_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "grid:\n  M: 100\n")
        assert invoke("check", "--config", cfg, "--out", tmp_path / "o") == 2
        assert f"{cfg}:2:" in capsys.readouterr().err

    @pytest.mark.parametrize("value", ["0", "many", "-2"])
    def test_bad_thread_count(self, tmp_path, monkeypatch, capsys, value):
        monkeypatch.setenv("PVL_THREADS", value)
        assert invoke("synth", "--out", tmp_path / "o") == 2
        assert "PVL_THREADS" in capsys.readouterr().err

    def test_bad_seed(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            invoke("synth", "--out", tmp_path / "o", "--seed", str(2**64))
        assert info.value.code == 2

    def test_report_without_run(self, tmp_path):
        assert invoke("report", "--out", tmp_path / "empty") == 2


class TestOutputs:
    def test_deterministic_bytes(self, tmp_path, monkeypatch):
        cfg = write(tmp_path, "seed: 5\ngrid: {M: 64}\ngenerator: {name: generic}\n" + ALL_CHECKS)
        outs = []
        for i, threads in enumerate(["1", "4"]):
            monkeypatch.setenv("PVL_THREADS", threads)
            out = tmp_path / f"run{i}"
            invoke("check", "--config", cfg, "--out", out)
            outs.append(out)
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
        assert all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)

    def test_seed_recorded_and_format_flag(self, tmp_path):
        cfg = write(tmp_path, "grid: {M: 64}\nchecks:\n  - identity: global\n")
        out = tmp_path / "csv"
        assert invoke("check", "--config", cfg, "--out", out, "--seed", "0xff", "--format", "csv") == 0
        assert not (out / "reports").exists()
        assert (out / "sweeps" / "00_global.csv").exists()
        assert summary(out)["seed"] == 255

    def test_report_renders_pngs(self, tmp_path, capsys):
        cfg = write(tmp_path, "grid: {M: 64}\ngenerator: {name: generic}\nchecks:\n  - identity: sign_sweep\n    params: {count: 8}\n")
        out = tmp_path / "rep"
        assert invoke("report", "--config", cfg, "--out", out) == 0
        pngs = sorted((out / "plots").glob("*.png"))
        names = {p.name for p in pngs}
        assert {"00_sign_sweep.png", "00_sign_sweep_values.png", "field_velocity.png", "field_pressure.png"} <= names
        assert all(p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in pngs)
        assert "wrote" in capsys.readouterr().out
        # rerunning on the existing directory needs no config
        assert invoke("report", "--out", out, "--no-plots") == 0


class TestEvolve:
    def test_taylor_green_benchmark(self, tmp_path):
        cfg = write(
            tmp_path,
            f"grid: {{M: 32, L: {math.pi!r}}}\ngenerator: {{name: taylor_green}}\nevolve: {{nu: 0.05, t_end: 0.4, snapshots: 3}}\n",
        )
        out = tmp_path / "tg"
        assert invoke("evolve", "--config", cfg, "--out", out) == 0
        assert len(list((out / "fields").glob("snapshot_*.pvlf"))) == 3
        rows = read_csv(out / "sweeps" / "evolve_energy.csv")
        assert [float(r["t"]) for r in rows] == [0.0, 0.2, 0.4]

    def test_tracked_rings(self, tmp_path):
        cfg = write(
            tmp_path,
            f"grid: {{M: 512, L: {math.pi!r}}}\ngenerator: {{name: vortex_rings, params: {{sigma: 0.1}}}}\n"
            "evolve: {nu: 0.001, t_end: 0.02, snapshots: 2, window: 0.78}\n",
        )
        out = tmp_path / "rings"
        assert invoke("evolve", "--config", cfg, "--out", out) == 0
        reps = load_reports(out)
        assert {r.identity for r in reps} == {"hyperplane", "global", "sphere"}
        assert all(r.status == "pass" for r in reps)

    def test_evolve_needs_evolution_generator(self, tmp_path):
        assert invoke("evolve", "--out", tmp_path / "o") == 2
