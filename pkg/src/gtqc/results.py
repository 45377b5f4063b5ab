"""Run manifests and CSV/JSON export of training histories."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "train_metric", "val_metric", "sim_calls")


class ExportError(ValueError):
    pass


class NonFiniteHistoryError(ExportError, FloatingPointError):
    pass


def version_string() -> str:
    """Package version plus the short commit id when run from a git checkout."""
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            cwd=Path(__file__).parent,
            timeout=5,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def config_hash(experiment: str, seed: int, config: dict) -> str:
    blob = json.dumps({"experiment": experiment, "seed": seed, "config": config}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class RunManifest:
    experiment: str
    seed: int
    config: dict
    version: str = field(default_factory=version_string)
    outputs: list[str] = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.experiment, self.seed, self.config)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config_hash"] = self.config_hash
        return d


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def history_csv(history: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for row in history:
        w.writerow([_cell(row.get(c)) for c in HISTORY_COLUMNS])
    return buf.getvalue()


def loss_series_csv(history: list[dict]) -> str:
    """Long format (epoch, series, value), one row per available loss value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("epoch", "series", "value"))
    for row in history:
        for series in ("train_loss", "val_loss"):
            if row.get(series) is not None:
                w.writerow([row["epoch"], series, _cell(float(row[series]))])
    return buf.getvalue()


def _check_finite(history: list[dict]) -> None:
    for row in history:
        for c in ("train_loss", "val_loss", "train_metric", "val_metric"):
            v = row.get(c)
            if v is not None and not math.isfinite(float(v)):
                raise NonFiniteHistoryError(f"non-finite {c} at epoch {row.get('epoch')}; export refused")


def export_results(history: list[dict], manifest: RunManifest, out_dir, label: str = "run") -> dict[str, Path]:
    """Write ``history_<label>_<hash>.csv``, ``loss_<label>_<hash>.csv`` and
    ``manifest_<hash>.json``; returns the written paths."""
    if not history:
        raise ExportError("nothing to export: empty history")
    _check_finite(history)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExportError(f"cannot create {out}: {e}") from None
    h = manifest.config_hash
    paths = {
        "history": out / f"history_{label}_{h}.csv",
        "loss_series": out / f"loss_{label}_{h}.csv",
        "manifest": out / f"manifest_{h}.json",
    }
    try:
        paths["history"].write_text(history_csv(history))
        paths["loss_series"].write_text(loss_series_csv(history))
        for key in ("history", "loss_series"):
            if paths[key].name not in manifest.outputs:
                manifest.outputs.append(paths[key].name)
        write_manifest(manifest, out)
    except OSError as e:
        raise ExportError(f"cannot write results to {out}: {e}") from None
    return paths


def write_manifest(manifest: RunManifest, out_dir) -> Path:
    path = Path(out_dir) / f"manifest_{manifest.config_hash}.json"
    path.write_text(json.dumps(manifest.to_dict(), indent=1, sort_keys=True) + "\n")
    return path


def read_history(path) -> list[dict]:
    rows = []
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            rows.append(
                {
                    "epoch": int(r["epoch"]),
                    "sim_calls": int(r["sim_calls"]),
                    **{c: float(r[c]) if r[c] != "" else None for c in HISTORY_COLUMNS[1:5]},
                }
            )
    return rows
