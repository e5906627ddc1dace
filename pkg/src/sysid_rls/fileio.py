"""File formats: model JSON, trajectory CSV, canonical hashing.

Numbers in CSV files use Python's shortest round-trip decimal representation
so reruns with identical seeds produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model_core import IOModel, Trajectory


def fmt_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def save_model(model: IOModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")


def load_model(path) -> IOModel:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"model file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return IOModel.from_dict(data)


def trajectory_header(m: int, p: int) -> list[str]:
    return ["k"] + [f"u_{i + 1}" for i in range(m)] + [f"y_{i + 1}" for i in range(p)]


def save_trajectory(traj: Trajectory, path) -> None:
    """CSV with header ``k,u_1..u_m,y_1..y_p``, one row per time step.

    NaN input cells (missing pre-history inputs) are written empty.
    """
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trajectory_header(traj.m, traj.p))
        for i in range(len(traj)):
            row = [str(traj.k0 + i)]
            row += ["" if not np.isfinite(v) else fmt_float(v) for v in traj.u[i]]
            row += [fmt_float(v) for v in traj.y[i]]
            writer.writerow(row)


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"trajectory file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if not header or header[0] != "k":
        raise ValidationError(f"{path}: first column must be 'k'")
    m = sum(1 for h in header if h.startswith("u_"))
    p = sum(1 for h in header if h.startswith("y_"))
    if m == 0 or p == 0 or len(header) != 1 + m + p:
        raise ValidationError(f"{path}: header must be k,u_1..u_m,y_1..y_p")
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    ks, us, ys = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            ks.append(int(row[0]))
            us.append([float(c) if c.strip() != "" else float("nan") for c in row[1:1 + m]])
            ys.append([float(c) for c in row[1 + m:]])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    k0 = ks[0]
    if ks != list(range(k0, k0 + len(ks))):
        raise ValidationError(f"{path}: k column must be consecutive integers")
    return Trajectory(k0=k0, u=np.asarray(us), y=np.asarray(ys))


def write_csv(path, header: list[str], rows) -> None:
    """Rows of floats/ints/strings; floats go through :func:`fmt_float`."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                c if isinstance(c, str) else (str(c) if isinstance(c, (int, np.integer)) else fmt_float(c))
                for c in row
            ])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
