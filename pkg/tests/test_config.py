import math

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from pvlab.config import ConfigError, RunConfig, load, loads

FULL = """\
seed: 7
grid: {dim: 2, M: 256, L: 1.0}
generator: {name: radial_vortex, params: {a: 0.4}, symmetrize: false}
pressure: {solver: spectral, filtered: true}
checks:
  - identity: hyperplane
    params: {count: 20, max_offset: 0.15}
    tolerance: 1.0e-4
  - identity: sphere
    params: {radii: [0.0, 0.1]}
  - identity: weak_form
output: {directory: out, formats: [json, csv]}
"""

MERIDIONAL = """\
grid:
  meridional: {N: 4, P: 4.0, Z: 4.0, n_rho: 257, n_z: 257, periodic_z: true}
generator: {name: meridional_bump}
checks:
  - identity: axisymmetric_decay
"""

EVOLVE = f"""\
grid: {{dim: 2, M: 64, L: {math.pi!r}}}
generator: {{name: vortex_rings, params: {{sigma: 0.1, rings: [[0.1, 0.3, 1.0], [0.22, 1.1, -1.0]]}}}}
evolve: {{nu: 0.01, t_end: 0.2, snapshots: 2, window: 0.7}}
"""


@pytest.mark.parametrize("text", [FULL, MERIDIONAL, EVOLVE, ""])
def test_round_trip(text):
    cfg = loads(text)
    assert loads(cfg.dump()) == cfg
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_defaults_filled():
    cfg = loads(FULL)
    assert cfg.checks[2].params == {"count": 50, "ramps": 10}
    assert cfg.checks[1].tolerance is None and cfg.checks[0].tolerance == 1e-4
    assert loads(MERIDIONAL).family == "meridional"
    assert loads(EVOLVE).evolve.window == 0.7


def test_exponent_without_dot():
    # YAML 1.1 reads 1e-4 as a string
    cfg = loads("checks: [{identity: global, tolerance: 1e-4}]")
    assert cfg.checks[0].tolerance == 1e-4


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 2**64 - 1),
    st.sampled_from([16, 64, 256, 1024]),
    st.floats(0.1, 10.0),
    st.lists(st.sampled_from(["hyperplane", "global", "sphere", "sign_sweep", "weak_form"]), max_size=4),
)
def test_round_trip_property(seed, M, L, idents):
    d = {"seed": seed, "grid": {"dim": 2, "M": M, "L": L}, "checks": [{"identity": i} for i in idents]}
    cfg = RunConfig.from_dict(d)
    assert loads(cfg.dump()) == cfg


@pytest.mark.parametrize(
    "text,line,needle",
    [
        ("seed: 1\ngrid: {dim: 2, M: 100}\n", 2, "grid.M: must be a power of two"),
        ("grid:\n  dim: 2\n  bogus: 1\n", 3, "grid.bogus: unknown key"),
        ("generator: {name: nope}\n", 1, "generator.name: unknown value 'nope'"),
        ("checks:\n  - identity: global\n  - identity: axisymmetric_decay\n", 3, "checks[1].identity"),
        ("checks:\n  - params: {}\n", 2, "missing key 'identity'"),
        ("seed: -3\n", 1, "seed: must be >= 0"),
        ("grid: {L: 1.0}\ngenerator: {name: taylor_green}\n", 1, "grid.L: taylor_green needs"),
        ("evolve: {nu: 0.1}\n", 1, "cannot be evolved"),
        ("seed: 1\nseed: : 2\n", 2, "YAML syntax error"),
        ("output: {formats: [xml]}\n", 1, "output.formats[0]"),
    ],
)
def test_errors_carry_line_numbers(text, line, needle):
    with pytest.raises(ConfigError) as info:
        loads(text, "run.yaml")
    msg = str(info.value)
    assert msg.startswith(f"run.yaml:{line}:") and needle in msg


def test_load_from_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(FULL, encoding="utf-8")
    assert load(path) == loads(FULL)
    path.write_text("grid: {M: 7}\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=f"^{path}:1:"):
        load(path)


def test_recorded_config_reloads(tmp_path):
    from pvlab.cli import _recorded_config

    cfg = loads(FULL)
    recorded = yaml.safe_dump(_recorded_config(cfg), sort_keys=True)
    back = loads(recorded)
    assert back.checks == cfg.checks and back.grid == cfg.grid and back.seed == 7
    assert back.output.directory != "out"  # the directory is not recorded
