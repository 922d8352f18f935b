"""Deterministic CSV/JSON emission and run manifests.

Every file is rendered to bytes in memory first; nothing touches the disk
until the whole run succeeded, so failures leave no partial outputs. Files
carry no timestamps or timings, which keeps reruns byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .. import __version__

__all__ = ["SCHEMA_VERSION", "OUTPUT_ENV", "RunManifest", "OutputBundle", "to_jsonable", "render_json", "render_csv"]

SCHEMA_VERSION = 1
OUTPUT_ENV = "FRACHARDY_OUT"
TRAJECTORY_COLUMNS = ("step", "time", "l2_norm", "w1p_seminorm", "lp_norm", "potential_energy")


def to_jsonable(obj):
    """Convert numpy values and non-finite floats into strict JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def render_json(obj) -> bytes:
    return (json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def render_csv(columns, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue().encode()


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    input_hash: str
    outputs: dict
    verdicts: dict
    artifact_version: str = __version__
    schema_version: int = SCHEMA_VERSION

    def as_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "artifact_version": self.artifact_version,
            "command": self.command,
            "config": self.config,
            "input_hash": self.input_hash,
            "outputs": self.outputs,
            "verdicts": self.verdicts,
        }


@dataclass
class OutputBundle:
    """Collects named file contents, then writes them with a manifest."""

    command: str
    config: dict
    files: dict = field(default_factory=dict)

    def add_json(self, name: str, obj) -> None:
        if isinstance(obj, dict):
            obj = {"schema_version": SCHEMA_VERSION, **obj}
        self.files[name] = render_json(obj)

    def add_csv(self, name: str, columns, rows) -> None:
        self.files[name] = render_csv(columns, rows)

    def manifest(self, verdicts: dict) -> RunManifest:
        config_bytes = render_json({"command": self.command, "config": self.config})
        outputs = {name: {"sha256": sha256(data), "bytes": len(data)} for name, data in sorted(self.files.items())}
        return RunManifest(self.command, self.config, sha256(config_bytes), outputs, to_jsonable(verdicts))

    def write(self, directory: str, verdicts: dict) -> list[str]:
        manifest = render_json(self.manifest(verdicts).as_dict())
        os.makedirs(directory, exist_ok=True)
        written = []
        for name, data in sorted(self.files.items()) + [("manifest.json", manifest)]:
            path = os.path.join(directory, name)
            tmp = path + ".tmp"
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
            written.append(path)
        return written


def trajectory_rows(report) -> list[tuple]:
    return [
        (k, report.times[k], report.l2_norm[k], report.w1p_seminorm[k], report.lp_norm[k], report.potential_energy[k])
        for k in range(report.times.size)
    ]
