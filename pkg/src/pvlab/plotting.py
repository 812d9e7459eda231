"""PNG figures for an artifact directory (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import pvlf  # noqa: E402
from .grid import ScalarField, VectorField  # noqa: E402
from .report import read_csv  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
}
STATUS_COLORS = {"pass": "tab:green", "fail": "tab:red", "hypothesis-violated": "tab:orange"}
# preferred x-axis for sweep tables, first match wins
X_KEYS = ("params.t", "params.R", "params.rho2", "params.plane.x0_0", "params.component", "params.test")


def _x_axis(rows: list[dict]):
    for key in X_KEYS:
        if key in rows[0]:
            return key.split(".")[-1], np.array([float(r[key]) for r in rows])
    return "index", np.arange(len(rows), dtype=float)


def residual_figure(rows: list[dict], title: str = ""):
    """Relative residual per report, colored by status, with the tolerance."""
    label, x = _x_axis(rows)
    res = np.array([float(r["residual_rel"]) for r in rows])
    tol = np.array([float(r["tolerance"]) for r in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        floor = np.where(res > 0, res, np.nan)
        for status, color in STATUS_COLORS.items():
            m = np.array([r["status"] == status for r in rows])
            if m.any():
                ax.scatter(x[m], floor[m], s=14, color=color, label=status, zorder=3)
        ax.plot(np.sort(x), tol[np.argsort(x)], "k--", lw=0.8, label="tolerance")
        if np.any(np.isfinite(floor)):
            ax.set_yscale("log")
        ax.set_xlabel(label)
        ax.set_ylabel("relative residual")
        ax.set_title(title)
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
    return fig


def sign_figure(rows: list[dict], title: str = ""):
    """Shell values against the sweep radius; admissible values lie below zero."""
    r = np.array([float(row["params.R"]) for row in rows])
    val = np.array([float(row["lhs"]) for row in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(r, val, "o-", ms=3)
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel("R")
        ax.set_ylabel("shell value")
        ax.set_title(title)
        fig.tight_layout()
    return fig


def series_figure(rows: list[dict], title: str = ""):
    """Every remaining column against the first one (profiles, energy histories)."""
    keys = list(rows[0])
    x = np.array([float(r[keys[0]]) for r in rows])
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(keys) - 1, 1, sharex=True, squeeze=False)
        for ax, key in zip(axes[:, 0], keys[1:]):
            ax.plot(x, [float(r[key]) for r in rows])
            ax.set_ylabel(key)
        axes[-1, 0].set_xlabel(keys[0])
        axes[0, 0].set_title(title)
        fig.tight_layout()
    return fig


def field_figure(f, title: str = ""):
    """Image of a scalar field or of the speed of a vector field (mid-plane slice in 3-D)."""
    if isinstance(f, VectorField):
        data = np.sqrt(f.speed_squared())
    elif isinstance(f, ScalarField):
        data = f.samples
    else:
        data = np.hypot(f.v_rho, f.v_z)
    if data.ndim == 3:
        data = data[:, :, data.shape[2] // 2]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if isinstance(f, (ScalarField, VectorField)):
            L = f.grid.L
            data, extent = data.T, (-L, L, -L, L)
        else:
            extent = (-f.grid.Z, f.grid.Z, 0.0, f.grid.P)
        cmap = "RdBu_r" if isinstance(f, ScalarField) else "viridis"
        im = ax.imshow(data, origin="lower", extent=extent, cmap=cmap, aspect="auto")
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.grid(False)
        ax.set_xlabel("x1" if isinstance(f, (ScalarField, VectorField)) else "z")
        ax.set_ylabel("x2" if isinstance(f, (ScalarField, VectorField)) else "rho")
        ax.set_title(title)
        fig.tight_layout()
    return fig


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def render_directory(root) -> list[Path]:
    """Write one PNG per sweep table and per 2-D/3-D field; returns the paths."""
    root = Path(root)
    out = []
    for path in sorted(root.glob("sweeps/*.csv")):
        rows = read_csv(path)
        if not rows:
            continue
        name = path.stem
        if "residual_rel" not in rows[0]:
            fig = series_figure(rows, name)
        elif rows[0].get("identity") == "sign":
            out.append(_save(sign_figure(rows, name), root / "plots" / f"{name}_values.png"))
            fig = residual_figure(rows, name)
        else:
            fig = residual_figure(rows, name)
        out.append(_save(fig, root / "plots" / f"{name}.png"))
    for path in sorted(root.glob("fields/*.pvlf")):
        try:
            f = pvlf.read(path)
        except pvlf.FormatError:
            continue
        out.append(_save(field_figure(f, path.stem), root / "plots" / f"field_{path.stem}.png"))
    return out
