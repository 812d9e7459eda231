"""Artifact directory layout and deterministic report serialization.

::

    <out>/config.yaml              normalized run configuration
    <out>/fields/*.pvlf            velocity, pressure and snapshot fields
    <out>/reports/<group>_NNN.json one IdentityReport per file
    <out>/sweeps/<group>.csv       one row per report of a check group
    <out>/summary.json             pass/fail counts and exit status
    <out>/FAILED                   present only if the run aborted
    <out>/plots/*.png              written by ``pvlab report``

Output bytes depend only on the configuration and seed: keys are sorted,
floats use ``repr`` and nothing time- or host-dependent is recorded.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import pvlf
from .identities import FAIL, PASS, SCHEMA_VERSION, VIOLATED, IdentityReport, _plain

STATUSES = (PASS, FAIL, VIOLATED)


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def report_dict(rep: IdentityReport, seed: int) -> dict:
    d = rep.to_dict()
    d["seed"] = seed
    return d


def _flatten(prefix: str, value, out: dict) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}_{i}", v, out)
    else:
        out[prefix] = value


def report_row(rep: IdentityReport) -> dict:
    row = {}
    _flatten("", {"params": rep.params}, row)
    row.update(
        identity=rep.identity,
        lhs=rep.lhs,
        rhs=rep.rhs,
        residual_abs=rep.residual_abs,
        residual_rel=rep.residual_rel,
        tolerance=rep.tolerance,
        status=rep.status,
        moment_isotropy=rep.hypothesis.moment_isotropy,
        support_margin=rep.hypothesis.support_margin,
        tail_fraction=rep.hypothesis.tail_fraction,
    )
    return row


def csv_text(rows: list[dict], columns=None) -> str:
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in _plain(r).items()})
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@dataclass
class Group:
    """Reports from one ``checks`` entry (or one tracked evolution)."""

    name: str
    identity: str
    reports: list
    notes: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # extra CSV tables: name -> rows

    def counts(self) -> dict:
        return {s: sum(r.status == s for r in self.reports) for s in STATUSES}


class Artifacts:
    """Writer for one run's output directory."""

    def __init__(self, root, formats=("json", "csv"), seed: int = 0):
        self.root = Path(root)
        self.formats = tuple(formats)
        self.seed = int(seed)
        self.groups: list[Group] = []
        self.files: list[str] = []
        self.root.mkdir(parents=True, exist_ok=True)
        marker = self.root / "FAILED"
        if marker.exists():
            marker.unlink()

    def _write(self, rel: str, text: str | bytes) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text, encoding="utf-8")
        self.files.append(rel)
        return path

    def text(self, rel: str, text: str) -> Path:
        return self._write(rel, text)

    def field(self, name: str, f) -> Path:
        return self._write(f"fields/{name}.pvlf", pvlf.encode(f))

    def table(self, name: str, rows: list[dict], columns=None) -> Path | None:
        if "csv" not in self.formats or not rows:
            return None
        return self._write(f"sweeps/{name}.csv", csv_text(rows, columns))

    def add(self, group: Group) -> None:
        self.groups.append(group)
        if "json" in self.formats:
            for i, rep in enumerate(group.reports):
                self._write(f"reports/{group.name}_{i:03d}.json", dumps(report_dict(rep, self.seed)))
            if group.notes:
                self._write(f"reports/{group.name}_notes.json", dumps(dict(group.notes, schema=SCHEMA_VERSION)))
        self.table(group.name, [report_row(r) for r in group.reports])
        for name, rows in group.tables.items():
            self.table(name, rows)

    def counts(self) -> dict:
        tot = {s: 0 for s in STATUSES}
        for g in self.groups:
            for s, n in g.counts().items():
                tot[s] += n
        return tot

    def exit_status(self) -> int:
        return 0 if self.counts()[FAIL] == 0 else 1

    def summary(self, config: dict | None = None, extra: dict | None = None) -> dict:
        counts = self.counts()
        doc = {
            "schema": SCHEMA_VERSION,
            "seed": self.seed,
            "counts": counts,
            "total": sum(counts.values()),
            "exit_status": self.exit_status(),
            "groups": [
                {"name": g.name, "identity": g.identity, "counts": g.counts(), "notes": g.notes} for g in self.groups
            ],
        }
        if config is not None:
            doc["config"] = config
        if extra:
            doc.update(extra)
        self._write("summary.json", dumps(doc))
        return doc

    def fail(self, message: str) -> None:
        """Mark the directory as the output of an aborted run."""
        self._write("FAILED", message.rstrip() + "\n")


def load_reports(root) -> list[IdentityReport]:
    """Every JSON report in an artifact directory, in file-name order."""
    out = []
    for path in sorted(Path(root, "reports").glob("*_[0-9][0-9][0-9].json")):
        out.append(IdentityReport.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    return out
