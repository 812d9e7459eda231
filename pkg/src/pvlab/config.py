"""Run configuration: YAML parsing, validation with line numbers, round-trip.

A config has the blocks ``grid``, ``generator``, ``pressure``, ``checks``,
``evolve`` (optional) and ``output`` plus a top-level ``seed``::

    seed: 7
    grid: {dim: 2, M: 256, L: 1.0}
    generator: {name: radial_vortex, params: {a: 0.4}, symmetrize: false}
    pressure: {solver: spectral, filtered: true}
    checks:
      - identity: hyperplane
        params: {count: 20, max_offset: 0.15}
        tolerance: 1.0e-4
    output: {directory: out, formats: [json, csv]}

Meridional generators read their grid from ``grid.meridional``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

GENERATORS = {
    "zero": "cartesian",
    "radial_vortex": "cartesian",
    "generic": "cartesian",
    "anisotropic_control": "cartesian",
    "meridional_bump": "meridional",
    "vortex_rings": "evolve",
    "taylor_green": "evolve",
}

GENERATOR_PARAMS = {
    "zero": set(),
    "radial_vortex": {"a", "amplitude"},
    "generic": {"count", "radius", "reach"},
    "anisotropic_control": {"offset", "radius"},
    "meridional_bump": {"rho_c", "z_c", "radius", "amplitude"},
    "vortex_rings": {"sigma", "speed", "rings"},
    "taylor_green": set(),
}

IDENTITY_PARAMS = {
    "hyperplane": {"count", "max_offset", "planes"},
    "global": set(),
    "sphere": {"radii"},
    "sign_sweep": {"radii", "count"},
    "axisymmetric_decay": {"rho1", "rho2", "sweep"},
    "weak_form": {"count", "ramps"},
}

# identities usable with each generator family
COMPATIBLE = {
    "cartesian": {"hyperplane", "global", "sphere", "sign_sweep", "weak_form"},
    "meridional": {"axisymmetric_decay"},
    "evolve": {"hyperplane", "sphere"},
}

FORMATS = ("json", "csv")
SEED_MAX = 2**64 - 1


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``source:line:``."""


@dataclass
class MeridionalBlock:
    N: int = 3
    P: float = 4.0
    Z: float = 4.0
    n_rho: int = 1025
    n_z: int = 1025
    periodic_z: bool = False


@dataclass
class GridBlock:
    dim: int = 2
    M: int = 256
    L: float = 1.0
    meridional: MeridionalBlock | None = None


@dataclass
class GeneratorBlock:
    name: str = "zero"
    params: dict = field(default_factory=dict)
    symmetrize: bool = False


@dataclass
class PressureBlock:
    solver: str = "spectral"
    filtered: bool = True
    boundary: str = "multipole"


@dataclass
class CheckBlock:
    identity: str
    params: dict = field(default_factory=dict)
    tolerance: float | None = None


@dataclass
class EvolveBlock:
    nu: float = 0.01
    t_end: float = 0.5
    snapshots: int = 3
    window: float = 0.5
    dt_max: float | None = None


@dataclass
class OutputBlock:
    directory: str = "pvlab-out"
    formats: list = field(default_factory=lambda: ["json", "csv"])
    plots: bool = True


@dataclass
class RunConfig:
    grid: GridBlock = field(default_factory=GridBlock)
    generator: GeneratorBlock = field(default_factory=GeneratorBlock)
    pressure: PressureBlock = field(default_factory=PressureBlock)
    checks: list = field(default_factory=list)
    evolve: EvolveBlock | None = None
    output: OutputBlock = field(default_factory=OutputBlock)
    seed: int = 0

    @property
    def family(self) -> str:
        return GENERATORS[self.generator.name]

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["evolve"] is None:
            del d["evolve"]
        if d["grid"]["meridional"] is None:
            del d["grid"]["meridional"]
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, source: str = "<dict>") -> "RunConfig":
        return _Builder(data, {}, source).build()


# -- parsing -------------------------------------------------------------------


def _marks(node, path=(), out=None) -> dict:
    """Map key paths of a composed YAML tree to 1-based line numbers."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            sub = path + (k.value,)
            _marks(v, sub, out)
            out[sub] = k.start_mark.line + 1  # point at the key, not its value
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _marks(v, path + (i,), out)
    return out


def loads(text: str, source: str = "<string>") -> RunConfig:
    """Parse and validate YAML text."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else 0
        raise ConfigError(f"{source}:{line}: YAML syntax error: {exc.problem}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")
    marks = _marks(node) if node is not None else {}
    return _Builder(data, marks, source).build()


def load(path) -> RunConfig:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), str(path))


class _Builder:
    def __init__(self, data: dict, marks: dict, source: str):
        self.data = data
        self.marks = marks
        self.source = source

    def fail(self, path: tuple, msg: str):
        probe = tuple(path)
        while probe not in self.marks and probe:
            probe = probe[:-1]
        line = self.marks.get(probe, 0)
        dotted = ".".join(f"[{p}]" if isinstance(p, int) else str(p) for p in path).replace(".[", "[")
        raise ConfigError(f"{self.source}:{line}: {dotted or '<root>'}: {msg}")

    def mapping(self, path, value, allowed) -> dict:
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        for k in value:
            if k not in allowed:
                self.fail(path + (k,), f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return value

    def number(self, path, value, kind=float, lo=None, hi=None, lo_open=False):
        if isinstance(value, str) and kind is float:
            # YAML 1.1 reads "1e-4" (no dot) as a string
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if kind is int and not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
        value = kind(value)
        if lo is not None and (value < lo or (lo_open and value == lo)):
            self.fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
        if hi is not None and value > hi:
            self.fail(path, f"must be <= {hi}, got {value}")
        return value

    def flag(self, path, value):
        if not isinstance(value, bool):
            self.fail(path, f"expected true/false, got {value!r}")
        return value

    def choice(self, path, value, options):
        if value not in options:
            self.fail(path, f"unknown value {value!r} (expected one of: {', '.join(sorted(options))})")
        return value

    def build(self) -> RunConfig:
        d = self.mapping((), self.data, {"grid", "generator", "pressure", "checks", "evolve", "output", "seed"})
        seed = self.number(("seed",), d.get("seed", 0), int, 0, SEED_MAX)
        grid = self.grid(d.get("grid"))
        gen = self.generator(d.get("generator"))
        family = GENERATORS[gen.name]
        if family == "meridional" and grid.meridional is None:
            grid.meridional = MeridionalBlock()
        if family == "cartesian" and gen.name == "radial_vortex" and grid.dim != 2:
            self.fail(("grid", "dim"), "radial_vortex needs dim = 2")
        if family == "evolve" and grid.dim != 2:
            self.fail(("grid", "dim"), "evolution runs need dim = 2")
        if gen.symmetrize and grid.M % 4:
            self.fail(("generator", "symmetrize"), "symmetrize needs M divisible by 4")
        pressure = self.pressure(d.get("pressure"))
        raw_checks = d.get("checks") or []
        if not isinstance(raw_checks, list):
            self.fail(("checks",), "expected a list")
        checks = [self.check(("checks", i), c, grid, family) for i, c in enumerate(raw_checks)]
        evolve = None
        if d.get("evolve") is not None:
            if family != "evolve":
                self.fail(("evolve",), f"generator {gen.name!r} cannot be evolved (use vortex_rings or taylor_green)")
            evolve = self.evolve(d["evolve"], grid)
        elif family == "evolve":
            evolve = EvolveBlock()
        if gen.name == "taylor_green":
            if abs(grid.L - math.pi) > 1e-12:
                self.fail(("grid", "L"), "taylor_green needs the 2π-periodic box, L = 3.141592653589793")
            if checks:
                self.fail(("checks",), "taylor_green is a solver benchmark and takes no identity checks")
        output = self.output(d.get("output"))
        return RunConfig(grid, gen, pressure, checks, evolve, output, seed)

    def grid(self, value) -> GridBlock:
        p = ("grid",)
        d = self.mapping(p, value, {"dim", "M", "L", "meridional"})
        dim = self.number(p + ("dim",), d.get("dim", 2), int)
        self.choice(p + ("dim",), dim, {2, 3})
        M = self.number(p + ("M",), d.get("M", 256), int, 16, 4096)
        if M & (M - 1):
            self.fail(p + ("M",), f"must be a power of two, got {M}")
        L = self.number(p + ("L",), d.get("L", 1.0), float, 0.0, lo_open=True)
        mer = None
        if d.get("meridional") is not None:
            q = p + ("meridional",)
            m = self.mapping(q, d["meridional"], {"N", "P", "Z", "n_rho", "n_z", "periodic_z"})
            base = MeridionalBlock()
            mer = MeridionalBlock(
                self.number(q + ("N",), m.get("N", base.N), int, 3),
                self.number(q + ("P",), m.get("P", base.P), float, 0.0, lo_open=True),
                self.number(q + ("Z",), m.get("Z", base.Z), float, 0.0, lo_open=True),
                self.number(q + ("n_rho",), m.get("n_rho", base.n_rho), int, 8),
                self.number(q + ("n_z",), m.get("n_z", base.n_z), int, 8),
                self.flag(q + ("periodic_z",), m.get("periodic_z", base.periodic_z)),
            )
        return GridBlock(dim, M, L, mer)

    def generator(self, value) -> GeneratorBlock:
        p = ("generator",)
        d = self.mapping(p, value, {"name", "params", "symmetrize"})
        name = self.choice(p + ("name",), d.get("name", "zero"), set(GENERATORS))
        params = dict(self.mapping(p + ("params",), d.get("params"), GENERATOR_PARAMS[name]))
        for k, v in params.items():
            if k in ("radius",) and isinstance(v, list):
                params[k] = [self.number(p + ("params", k, i), x, float, 0.0, lo_open=True) for i, x in enumerate(v)]
            elif k == "rings":
                if not isinstance(v, list) or not all(isinstance(r, list) and len(r) == 3 for r in v):
                    self.fail(p + ("params", k), "expected a list of [radius, phase, sign] triples")
                params[k] = [[self.number(p + ("params", k, i), x) for x in r] for i, r in enumerate(v)]
            elif k == "count":
                params[k] = self.number(p + ("params", k), v, int, 1)
            else:
                params[k] = self.number(p + ("params", k), v)
        sym = self.flag(p + ("symmetrize",), d.get("symmetrize", False))
        return GeneratorBlock(name, params, sym)

    def pressure(self, value) -> PressureBlock:
        p = ("pressure",)
        d = self.mapping(p, value, {"solver", "filtered", "boundary"})
        return PressureBlock(
            self.choice(p + ("solver",), d.get("solver", "spectral"), {"spectral", "sampled"}),
            self.flag(p + ("filtered",), d.get("filtered", True)),
            self.choice(p + ("boundary",), d.get("boundary", "multipole"), {"multipole", "zero"}),
        )

    def check(self, p, value, grid: GridBlock, family: str) -> CheckBlock:
        d = self.mapping(p, value, {"identity", "params", "tolerance"})
        if "identity" not in d:
            self.fail(p, "missing key 'identity'")
        ident = self.choice(p + ("identity",), d["identity"], set(IDENTITY_PARAMS))
        if ident not in COMPATIBLE[family]:
            self.fail(p + ("identity",), f"identity {ident!r} does not apply to {family} generators")
        params = dict(self.mapping(p + ("params",), d.get("params"), IDENTITY_PARAMS[ident]))
        tol = d.get("tolerance")
        if tol is not None:
            tol = self.number(p + ("tolerance",), tol, float, 0.0, lo_open=True)
        q = p + ("params",)
        half = 0.5 * grid.L
        if ident == "hyperplane":
            if "count" in params:
                params["count"] = self.number(q + ("count",), params["count"], int, 1)
            if "max_offset" in params:
                params["max_offset"] = self.number(q + ("max_offset",), params["max_offset"], float, 0.0, grid.L)
            if "planes" in params:
                params["planes"] = [self.plane(q + ("planes", i), pl, grid) for i, pl in enumerate(params["planes"])]
        elif ident in ("sphere", "sign_sweep"):
            if "radii" in params:
                if not isinstance(params["radii"], list):
                    self.fail(q + ("radii",), "expected a list")
                params["radii"] = [
                    self.number(q + ("radii", i), r, float, 0.0, half) for i, r in enumerate(params["radii"])
                ]
            if "count" in params:
                params["count"] = self.number(q + ("count",), params["count"], int, 2)
        elif ident == "axisymmetric_decay":
            P = (grid.meridional or MeridionalBlock()).P
            r1 = self.number(q + ("rho1",), params.get("rho1", 0.0), float, 0.0, P)
            r2 = self.number(q + ("rho2",), params.get("rho2", P), float, 0.0, P)
            if r2 <= r1:
                self.fail(q + ("rho2",), f"must exceed rho1 = {r1}")
            params.update(rho1=r1, rho2=r2)
            if "sweep" in params:
                params["sweep"] = self.number(q + ("sweep",), params["sweep"], int, 2)
        elif ident == "weak_form":
            count = self.number(q + ("count",), params.get("count", 50), int, 1)
            ramps = self.number(q + ("ramps",), params.get("ramps", 10), int, 0, count)
            params.update(count=count, ramps=ramps)
        return CheckBlock(ident, params, tol)

    def plane(self, p, value, grid: GridBlock) -> dict:
        d = self.mapping(p, value, {"xi", "offset"})
        xi = d.get("xi")
        if not isinstance(xi, list) or len(xi) != grid.dim:
            self.fail(p + ("xi",), f"expected a list of {grid.dim} numbers")
        xi = [self.number(p + ("xi", i), x) for i, x in enumerate(xi)]
        if sum(x * x for x in xi) == 0:
            self.fail(p + ("xi",), "normal must be nonzero")
        off = self.number(p + ("offset",), d.get("offset", 0.0), float, -grid.L, grid.L)
        return {"xi": xi, "offset": off}

    def evolve(self, value, grid: GridBlock) -> EvolveBlock:
        p = ("evolve",)
        d = self.mapping(p, value, {"nu", "t_end", "snapshots", "window", "dt_max"})
        base = EvolveBlock()
        dt_max = d.get("dt_max")
        if dt_max is not None:
            dt_max = self.number(p + ("dt_max",), dt_max, float, 0.0, lo_open=True)
        return EvolveBlock(
            self.number(p + ("nu",), d.get("nu", base.nu), float, 0.0),
            self.number(p + ("t_end",), d.get("t_end", base.t_end), float, 0.0, lo_open=True),
            self.number(p + ("snapshots",), d.get("snapshots", base.snapshots), int, 1),
            self.number(p + ("window",), d.get("window", base.window), float, 0.0, 0.25 * grid.L, lo_open=True),
            dt_max,
        )

    def output(self, value) -> OutputBlock:
        p = ("output",)
        d = self.mapping(p, value, {"directory", "formats", "plots"})
        directory = d.get("directory", OutputBlock().directory)
        if not isinstance(directory, str) or not directory:
            self.fail(p + ("directory",), "expected a non-empty path")
        formats = d.get("formats", list(FORMATS))
        if not isinstance(formats, list) or not formats:
            self.fail(p + ("formats",), "expected a non-empty list")
        formats = [self.choice(p + ("formats", i), f, set(FORMATS)) for i, f in enumerate(formats)]
        return OutputBlock(directory, formats, self.flag(p + ("plots",), d.get("plots", True)))
