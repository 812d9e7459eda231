"""Command-line front end: config-driven synthesis, pressure, checks, evolution and reports.

Subcommands::

    pvlab synth    --config run.yaml --out DIR     write the velocity field
    pvlab pressure --config run.yaml --out DIR     velocity and pressure fields
    pvlab check    --config run.yaml --out DIR     full pipeline with identity reports
    pvlab evolve   --config run.yaml --out DIR     torus run with tracked identities
    pvlab verify   --config run.yaml --out DIR VELOCITY.pvlf [PRESSURE.pvlf]
    pvlab report   --out DIR [--config run.yaml]   summary table and PNG figures

Exit status: 0 when no check failed (``hypothesis-violated`` never counts
as a failure), 1 when some check failed, 2 for usage or configuration
errors, 3 when a stage raised; the output directory then holds a
``FAILED`` marker next to whatever artifacts were already written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from copy import deepcopy
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import pvlf
from .config import SEED_MAX, ConfigError, RunConfig, load
from .evolve import run as evolve_run
from .evolve import (
    taylor_green_state,
    taylor_green_velocity,
    track_identities,
    vortex_ring_state,
    vorticity_support,
)
from .grid import GridSpec, ScalarField, VectorField, weak_divergence
from .identities import (
    MERIDIONAL_TOL,
    PASS,
    SPECTRAL_TOL,
    WEAK_TOL,
    FAIL,
    Hypothesis,
    IdentityReport,
    check_axisymmetric_decay,
    check_global,
    check_hyperplane,
    check_sign_sweep,
    check_sphere_formula,
    check_weak_form,
    default_sweep_radii,
)
from .meridional import MeridionalField, MeridionalGrid, axisymmetric_divergence, pressure_meridional
from .pressure import pressure_freespace, random_test_functions
from .quad import PlaneSpec
from .report import Artifacts, Group
from .synth import (
    anisotropic_control,
    generic_field,
    meridional_bump_psi,
    meridional_streamfunction,
    radial_vortex_2d,
    symmetrize,
    vortex_profile,
)

# external velocities are rejected above this relative divergence (see divergence_gate)
DIV_GATE = 5e-3
TAYLOR_GREEN_TOL = 1e-6
TRACK_TOL = 1e-2
SNAPSHOT_NOTE = "single snapshot: only the snapshot implication of the vanishing statement is checked"

DEFAULT_TOL = {
    "hyperplane": SPECTRAL_TOL,
    "global": SPECTRAL_TOL,
    "sphere": SPECTRAL_TOL,
    "sign_sweep": SPECTRAL_TOL,
    "weak_form": WEAK_TOL,
    "axisymmetric_decay": MERIDIONAL_TOL,
}


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


class DivergenceError(ValueError):
    """External velocity rejected by the divergence gate."""


def thread_count() -> int:
    raw = os.environ.get("PVL_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PVL_THREADS: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"PVL_THREADS: expected a positive integer, got {raw!r}")
    return n


def _rng(cfg: RunConfig, *stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *stream])


# -- stages --------------------------------------------------------------------


def cartesian_grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.grid.dim, cfg.grid.M, cfg.grid.L)


def meridional_grid(cfg: RunConfig) -> MeridionalGrid:
    m = cfg.grid.meridional
    return MeridionalGrid(m.P, m.Z, m.n_rho, m.n_z, m.periodic_z)


def synthesize(cfg: RunConfig):
    """Initial field for the configured generator.

    Returns a VectorField, a MeridionalField or (for evolution generators)
    an EvolveState.
    """
    gen = cfg.generator
    prm = gen.params
    if gen.name == "meridional_bump":
        mg = meridional_grid(cfg)
        psi = meridional_bump_psi(
            mg, prm.get("rho_c", 1.2), prm.get("z_c", 0.3), prm.get("radius", 0.9), prm.get("amplitude", 1.0)
        )
        return meridional_streamfunction(cfg.grid.meridional.N, psi, mg)
    g = cartesian_grid(cfg)
    nu = cfg.evolve.nu if cfg.evolve is not None else 0.0
    if gen.name == "vortex_rings":
        kw = {"rings": [tuple(r) for r in prm["rings"]]} if "rings" in prm else {}
        return vortex_ring_state(g, nu, prm.get("sigma", 0.12), speed=prm.get("speed", 0.1), **kw)
    if gen.name == "taylor_green":
        return taylor_green_state(g, nu)
    if gen.name == "generic":
        radius = tuple(prm.get("radius", (0.12, 0.2)))
        return generic_field(g, cfg.seed, prm.get("count", 5), radius, gen.symmetrize, prm.get("reach", 0.45))
    if gen.name == "zero":
        v = VectorField(g, [np.zeros(g.shape)] * g.dim, True)
    elif gen.name == "radial_vortex":
        v = radial_vortex_2d(vortex_profile(prm.get("a", 0.4 * g.L), prm.get("amplitude", 1.0)), g)[0]
    else:
        v = anisotropic_control(g, prm.get("offset", 0.12), prm.get("radius", 0.25))
    return symmetrize(v) if gen.symmetrize else v


def solve_pressure(cfg: RunConfig, v):
    if isinstance(v, MeridionalField):
        return pressure_meridional(v, cfg.pressure.boundary)
    return pressure_freespace(v, cfg.pressure.solver, cfg.pressure.filtered)


def _planes(cfg: RunConfig, index: int, params: dict, dim: int) -> list[PlaneSpec]:
    if "planes" in params:
        return [PlaneSpec.through(pl["xi"], pl["offset"]) for pl in params["planes"]]
    rng = _rng(cfg, index, 1)
    top = params.get("max_offset", 0.2 * cfg.grid.L)
    out = []
    for _ in range(params.get("count", 20)):
        xi = rng.normal(size=dim)
        out.append(PlaneSpec.through(xi / np.linalg.norm(xi), rng.uniform(-top, top)))
    return out


def check_group(cfg: RunConfig, index: int, block, v, p) -> Group:
    """Run one ``checks`` entry against a velocity/pressure pair."""
    ident = block.identity
    tol = block.tolerance if block.tolerance is not None else DEFAULT_TOL[ident]
    prm = block.params
    name = f"{index:02d}_{ident}"
    notes = {}
    if ident == "axisymmetric_decay":
        rep = check_axisymmetric_decay(p, prm["rho1"], prm["rho2"], tol, prm.get("sweep", 64))
        sweep = rep.extra["sweep"]
        rows = [{"rho": float(r), "I": float(i)} for r, i in zip(sweep["rho"], sweep["I"])]
        return Group(name, ident, [rep], {"monotone": rep.extra["monotone"]}, {f"{name}_profile": rows})
    if ident == "hyperplane":
        reports = [check_hyperplane(v, p, pl, tol) for pl in _planes(cfg, index, prm, v.grid.dim)]
    elif ident == "global":
        reports = check_global(v, p, tol)
        notes = {"corollary_pass": reports[0].extra["corollary_pass"], "energy_spread": reports[0].extra["energy_spread"]}
    elif ident == "sphere":
        radii = prm.get("radii", [0.0, 0.125 * cfg.grid.L, 0.25 * cfg.grid.L])
        reports = [check_sphere_formula(v, p, R, tol) for R in radii]
    elif ident == "sign_sweep":
        radii = prm.get("radii")
        if radii is None:
            radii = default_sweep_radii(v, prm.get("count", 32))
        sweep = check_sign_sweep(v, p, radii, tol)
        reports = sweep.reports
        notes = {"verdict": sweep.verdict, "scope": SNAPSHOT_NOTE}
    else:
        tests = random_test_functions(v.grid, _rng(cfg, index, 2), prm.get("count", 50), prm.get("ramps", 10))
        reports = check_weak_form(v, p, tests, tol)
    return Group(name, ident, reports, notes)


def run_checks(cfg: RunConfig, v, p, artifacts: Artifacts) -> list[Group]:
    """Evaluate all check blocks, concurrently when ``PVL_THREADS`` allows.

    Groups are recorded in config order whatever the completion order.
    BLAS stays single-threaded (see :func:`run`) so that reductions, and
    hence report bytes, do not depend on the thread count.
    """
    blocks = list(enumerate(cfg.checks))
    workers = min(thread_count(), max(1, len(blocks)))

    def one(item):
        i, block = item
        try:
            return check_group(cfg, i, block, v, p)
        except Exception as exc:
            raise StageError(f"checks[{i}] ({block.identity}): {exc}") from exc

    if workers == 1:
        groups = [one(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(one, blocks))
    for g in groups:
        artifacts.add(g)
    return groups


def _evolve_targets(cfg: RunConfig):
    planes, radii, tol = [], [], TRACK_TOL
    explicit = False
    for i, block in enumerate(cfg.checks):
        explicit = True
        if block.tolerance is not None:
            tol = min(tol, block.tolerance)
        if block.identity == "hyperplane":
            planes.extend(_planes(cfg, i, block.params, 2))
        else:
            radii.extend(block.params.get("radii", [0.0]))
    if not explicit:
        return None, None, tol
    return planes, radii, tol


def run_evolution(cfg: RunConfig, state, artifacts: Artifacts) -> list[Group]:
    ev = cfg.evolve
    times = np.linspace(0.0, ev.t_end, ev.snapshots) if ev.snapshots > 1 else [ev.t_end]
    states = evolve_run(state, ev.t_end, list(times), ev.dt_max)
    for k, s in enumerate(states):
        artifacts.field(f"snapshot_{k:03d}", s.velocity())
    rows = [{"t": s.t, "energy": s.energy()} for s in states]
    if cfg.generator.name == "taylor_green":
        reports = []
        for s in states:
            exact = taylor_green_velocity(s.grid, s.nu, s.t)
            got = s.velocity()
            err = max(float(np.abs(a - b).max()) for a, b in zip(got.components, exact.components))
            scale = exact.max_speed()
            rel = err / scale
            status = PASS if rel <= TAYLOR_GREEN_TOL else FAIL
            reports.append(
                IdentityReport(
                    "taylor_green", {"t": s.t, "nu": s.nu, "M": s.grid.M}, err, 0.0, err, rel,
                    Hypothesis(), status, TAYLOR_GREEN_TOL, {"energy": s.energy()},
                )
            )
        artifacts.table("evolve_energy", rows, ["t", "energy"])
        group = Group("evolve_taylor_green", "taylor_green", reports)
        artifacts.add(group)
        return [group]
    planes, radii, tol = _evolve_targets(cfg)
    tracked = []
    for s, row in zip(states, rows):
        row["vorticity_support"] = vorticity_support(s)
        tracked.extend(track_identities(s, ev.window, planes, radii, cfg.generator.symmetrize, tol))
    artifacts.table("evolve_energy", rows, ["t", "energy", "vorticity_support"])
    groups = []
    for ident in ("hyperplane", "global", "sphere"):
        reps = [r for r in tracked if r.identity == ident]
        if reps:
            window_error = max(r.extra["window_error"] for r in reps)
            groups.append(Group(f"evolve_{ident}", ident, reps, {"max_window_error": window_error}))
    for g in groups:
        artifacts.add(g)
    return groups


STAGES = {
    "synth": ("synth",),
    "pressure": ("synth", "pressure"),
    "check": ("synth", "pressure", "checks", "evolve"),
    "evolve": ("synth", "evolve"),
}


def _recorded_config(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    del d["output"]["directory"]  # keep reports independent of where they are written
    return d


def run(cfg: RunConfig, command: str = "check") -> tuple[int, Path]:
    """Execute the pipeline stages for ``command``; returns ``(exit status, directory)``."""
    stages = STAGES[command]
    if command == "evolve" and cfg.family != "evolve":
        raise ConfigError(f"{cfg.generator.name!r} is not an evolution generator (use vortex_rings or taylor_green)")
    art = Artifacts(cfg.output.directory, cfg.output.formats, cfg.seed)
    art.text("config.yaml", yaml.safe_dump(_recorded_config(cfg), sort_keys=True))
    stage = "synth"
    try:
        with threadpool_limits(limits=1):
            field = synthesize(cfg)
            if cfg.family == "evolve":
                art.field("velocity", field.velocity())
                if "evolve" in stages:
                    stage = "evolve"
                    run_evolution(cfg, field, art)
            else:
                art.field("velocity", field)
                if "pressure" in stages:
                    stage = "pressure"
                    p = solve_pressure(cfg, field)
                    if isinstance(p, MeridionalField):
                        art.field("meridional", p)
                        field, p = p, p
                    else:
                        art.field("pressure", p)
                if "checks" in stages:
                    stage = "checks"
                    run_checks(cfg, field, p, art)
    except Exception as exc:
        msg = str(exc) if isinstance(exc, StageError) else f"{stage}: {type(exc).__name__}: {exc}"
        art.summary(_recorded_config(cfg), {"failed": msg})
        art.fail(msg)
        raise StageError(msg) from exc
    art.summary(_recorded_config(cfg))
    return art.exit_status(), art.root


# -- external fields -------------------------------------------------------------


def divergence_gate(v) -> float:
    """Relative divergence of an external velocity; raises DivergenceError above ``DIV_GATE``.

    Cartesian fields use :func:`weak_divergence` (spectral differentiation
    of sampled bumps is too inaccurate to serve as a gate).  Meridional
    fields use the discrete axisymmetric divergence times ``P / max|v|``.
    """
    if isinstance(v, MeridionalField):
        top = max(np.abs(v.v_rho).max(), np.abs(v.v_z).max())
        div = float(np.abs(axisymmetric_divergence(v)).max())
        rel = div * v.grid.P / top if top > 0 else 0.0
    else:
        rel = weak_divergence(v)
    if rel > DIV_GATE:
        raise DivergenceError(
            f"divergence: weighted mean |div v| reaches {rel:.3e} * max|v|/length (gate {DIV_GATE:.0e}); "
            "the velocity is not divergence-free"
        )
    return rel


def _config_for(cfg: RunConfig, field) -> RunConfig:
    """Copy of ``cfg`` with the grid block taken from an external field, revalidated."""
    d = deepcopy(cfg.to_dict())
    if isinstance(field, MeridionalField):
        g = field.grid
        d["grid"]["meridional"] = {"N": field.N, "P": g.P, "Z": g.Z, "n_rho": g.n_rho, "n_z": g.n_z, "periodic_z": g.periodic_z}
    else:
        g = field.grid
        d["grid"].update(dim=g.dim, M=g.M, L=g.L)
    return RunConfig.from_dict(d, "<external grid>")


def verify_external(field_files, cfg: RunConfig) -> tuple[int, Path]:
    """Run the configured checks on PVLF velocity (and optional pressure) files."""
    paths = [Path(p) for p in field_files]
    if not 1 <= len(paths) <= 2:
        raise ConfigError("verify takes a velocity file and an optional pressure file")
    v = pvlf.read(paths[0])
    if isinstance(v, ScalarField):
        raise pvlf.FormatError(f"kind: {paths[0]} holds a scalar field, expected a velocity")
    cfg = _config_for(cfg, v)
    if isinstance(v, MeridionalField) and cfg.family != "meridional":
        raise ConfigError("meridional velocity needs a meridional generator block in the config")
    if isinstance(v, VectorField) and cfg.family != "cartesian":
        raise ConfigError("cartesian velocity needs a cartesian generator block in the config")
    divergence_gate(v)
    if isinstance(v, MeridionalField):
        field = v if v.p is not None else solve_pressure(cfg, v)
        p = field
        if len(paths) == 2:
            raise ConfigError("meridional files carry their own pressure; pass a single file")
    else:
        field = v
        if len(paths) == 2:
            p = pvlf.read(paths[1])
            if not isinstance(p, ScalarField):
                raise pvlf.FormatError(f"kind: {paths[1]} does not hold a scalar pressure")
            if p.grid != v.grid:
                raise pvlf.FormatError(f"M: pressure grid {p.grid} does not match velocity grid {v.grid}")
        else:
            p = solve_pressure(cfg, v)
    art = Artifacts(cfg.output.directory, cfg.output.formats, cfg.seed)
    art.text("config.yaml", yaml.safe_dump(_recorded_config(cfg), sort_keys=True))
    try:
        with threadpool_limits(limits=1):
            run_checks(cfg, field, p, art)
    except Exception as exc:
        msg = str(exc)
        art.fail(msg)
        raise StageError(msg) from exc
    art.summary(_recorded_config(cfg), {"inputs": [p.name for p in paths]})
    return art.exit_status(), art.root


# -- report ------------------------------------------------------------------------


def summarize(root) -> list[str]:
    root = Path(root)
    doc = json.loads((root / "summary.json").read_text(encoding="utf-8"))
    lines = []
    for g in doc["groups"]:
        c = g["counts"]
        extra = f"  [{g['notes']['verdict']}]" if "verdict" in g.get("notes", {}) else ""
        lines.append(f"{g['name']:<28} pass={c['pass']:<4} fail={c['fail']:<4} violated={c['hypothesis-violated']}{extra}")
    c = doc["counts"]
    lines.append(f"total {doc['total']}: pass={c['pass']} fail={c['fail']} hypothesis-violated={c['hypothesis-violated']}")
    if (root / "FAILED").exists():
        lines.append("FAILED: " + (root / "FAILED").read_text(encoding="utf-8").strip())
    return lines


# -- argument parsing ------------------------------------------------------------------


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvlab", description="Pressure-velocity identity laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="YAML run configuration (defaults: zero field, no checks)")
        p.add_argument("--out", type=Path, help="artifact directory (overrides output.directory)")
        p.add_argument("--seed", type=_seed, help="unsigned 64-bit seed (overrides the config)")
        p.add_argument("--format", choices=["json", "csv", "both"], help="report formats (overrides output.formats)")
        return p

    common(sub.add_parser("synth", help="write the generated velocity field"))
    common(sub.add_parser("pressure", help="write velocity and pressure fields"))
    common(sub.add_parser("check", help="run synthesis, pressure and all configured checks"))
    common(sub.add_parser("evolve", help="evolve on the torus and track windowed identities"))
    verify = common(sub.add_parser("verify", help="check external PVLF velocity (and pressure) files"))
    verify.add_argument("fields", nargs="+", type=Path, help="velocity PVLF file, optionally followed by a pressure file")
    report = common(sub.add_parser("report", help="summarize an artifact directory and render PNG figures"))
    report.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    return parser


def _configure(args) -> RunConfig:
    cfg = load(args.config) if args.config is not None else RunConfig.from_dict({})
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = cfg.output
    if args.out is not None:
        out = replace(out, directory=str(args.out))
    if args.format is not None:
        out = replace(out, formats=["json", "csv"] if args.format == "both" else [args.format])
    return replace(cfg, output=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _configure(args)
        thread_count()  # a bad PVL_THREADS is a usage error, not a stage failure
        if args.command == "report":
            root = Path(cfg.output.directory)
            if args.config is not None:
                status, root = run(cfg, "check")
            elif not (root / "summary.json").exists():
                raise ConfigError(f"{root}: no summary.json (run 'pvlab check' first or pass --config)")
            for line in summarize(root):
                print(line)
            if cfg.output.plots and not args.no_plots:
                from .plotting import render_directory

                for path in render_directory(root):
                    print(f"wrote {path}")
            doc = json.loads((root / "summary.json").read_text(encoding="utf-8"))
            return int(doc["exit_status"]) if not (root / "FAILED").exists() else 3
        if args.command == "verify":
            status, root = verify_external(args.fields, cfg)
        else:
            status, root = run(cfg, args.command)
    except ConfigError as exc:
        print(f"pvlab: config error: {exc}", file=sys.stderr)
        return 2
    except (StageError, DivergenceError, pvlf.FormatError, OSError) as exc:
        print(f"pvlab: error: {exc}", file=sys.stderr)
        return 3
    for line in summarize(root):
        print(line)
    return status


if __name__ == "__main__":
    sys.exit(main())
