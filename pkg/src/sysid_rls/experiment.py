"""Experiment configuration, orchestration, and run manifests.

An experiment fits one true model at several orders on shared input data and
emits one trace CSV and one summary JSON per order, plus a manifest tying
the outputs to the configuration.  Reruns of the same configuration are
byte-identical; the manifest hash covers the configuration, seeds, and
output-file digests (wall-clock time is recorded but excluded).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .convergence import run_tracked_identification
from .errors import ValidationError
from .fileio import canonical_json, load_model, sha256_file, sha256_text, write_csv, write_json
from .inputs import InputSpec, generate_input, spec_from_dict
from .model_core import IOModel
from .rls import DEFAULT_P0_SCALE

_ALLOWED_KEYS = {"true_model", "fit_orders", "input", "horizon", "theta0",
                 "p0_scale", "tolerances", "out_dir"}
_ALLOWED_TOLERANCES = {"equivalence", "pe_slope"}


@dataclass(frozen=True)
class ExperimentConfig:
    true_model: IOModel
    fit_orders: tuple
    input: InputSpec
    horizon: int
    theta0: str = "zeros"
    p0_scale: float = DEFAULT_P0_SCALE
    tolerances: dict = field(default_factory=dict)
    out_dir: str | None = None

    def to_dict(self) -> dict:
        return {
            "true_model": self.true_model.to_dict(),
            "fit_orders": list(self.fit_orders),
            "input": self.input.to_dict(),
            "horizon": self.horizon,
            "theta0": self.theta0,
            "p0_scale": self.p0_scale,
            "tolerances": dict(self.tolerances),
        }

    @property
    def config_hash(self) -> str:
        return sha256_text(canonical_json(self.to_dict()))


def config_from_dict(d: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a raw config mapping; unknown keys are rejected with the
    offending field path in the message."""
    if not isinstance(d, dict):
        raise ValidationError("config: expected a JSON object")
    unknown = set(d) - _ALLOWED_KEYS
    if unknown:
        raise ValidationError(f"config: unknown keys {sorted(unknown)}")
    for key in ("true_model", "fit_orders", "horizon"):
        if key not in d:
            raise ValidationError(f"config.{key}: required")

    tm = d["true_model"]
    if isinstance(tm, str):
        path = Path(tm)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        model = load_model(path)
    elif isinstance(tm, dict):
        model = IOModel.from_dict(tm)
    else:
        raise ValidationError("config.true_model: expected a path or an inline model object")

    orders = d["fit_orders"]
    if not isinstance(orders, list) or not orders:
        raise ValidationError("config.fit_orders: must be a nonempty list")
    for i, o in enumerate(orders):
        if not isinstance(o, int) or o < 0:
            raise ValidationError(f"config.fit_orders[{i}]: must be a non-negative integer")
        if o < model.n:
            raise ValidationError(
                f"config.fit_orders[{i}]: order {o} is below the true order {model.n}"
            )

    horizon = d["horizon"]
    if not isinstance(horizon, int) or horizon <= max(orders):
        raise ValidationError("config.horizon: must be an integer above every fit order")

    spec = spec_from_dict(d.get("input", {"kind": "white"}), where="config.input")

    theta0 = d.get("theta0", "zeros")
    if not isinstance(theta0, str):
        raise ValidationError("config.theta0: expected 'zeros' or a JSON file path")

    p0_scale = float(d.get("p0_scale", DEFAULT_P0_SCALE))
    if p0_scale <= 0:
        raise ValidationError("config.p0_scale: must be positive")

    tolerances = d.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ValidationError("config.tolerances: expected an object")
    unknown = set(tolerances) - _ALLOWED_TOLERANCES
    if unknown:
        raise ValidationError(f"config.tolerances: unknown keys {sorted(unknown)}")

    out_dir = d.get("out_dir")
    return ExperimentConfig(
        true_model=model, fit_orders=tuple(orders), input=spec, horizon=horizon,
        theta0=theta0, p0_scale=p0_scale, tolerances=dict(tolerances),
        out_dir=out_dir,
    )


def load_config(path) -> ExperimentConfig:
    import json

    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(raw, base_dir=path.parent)


def _load_theta0(config: ExperimentConfig, order: int, p: int, m: int):
    if config.theta0 == "zeros":
        return None
    import json

    path = Path(config.theta0)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"theta0 file {path}: {exc}") from exc
    theta = np.asarray(raw, dtype=float)
    width = p * order + m * (order + 1)
    if theta.shape != (p, width):
        raise ValidationError(
            f"theta0 file {path}: shape {theta.shape} does not fit order {order} "
            f"(expected {(p, width)})"
        )
    return theta


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    tool_version: str
    runs: tuple
    wall_clock_s: float
    manifest_hash: str

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "runs": list(self.runs),
            "wall_clock_s": self.wall_clock_s,
            "manifest_hash": self.manifest_hash,
        }


def run_experiment(config: ExperimentConfig, out_dir) -> RunManifest:
    """Fit every configured order on shared input data and write artifacts.

    All orders see the same physical input sequence: one stream of length
    ``horizon + max(fit_orders)`` is generated and each order consumes the
    suffix covering its own pre-history.  A failure in one order is recorded
    in the manifest and does not disturb the other orders' outputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    model = config.true_model
    max_order = max(config.fit_orders)
    u_full = generate_input(config.input, config.horizon + max_order, model.m)

    runs = []
    for order in config.fit_orders:
        entry = {"fit_order": order, "seed": config.input.seed, "status": "ok",
                 "outputs": {}}
        try:
            theta0 = _load_theta0(config, order, model.p, model.m)
            trace = run_tracked_identification(
                model, order, u_full[max_order - order:], config.horizon,
                theta0=theta0, p0_scale=config.p0_scale,
            )
            trace_path = out_dir / f"trace_order{order}.csv"
            write_csv(
                trace_path,
                ["k", "frob_err_to_ref", "scaled_err_norm", "residual_norm"],
                zip(trace.ks.tolist(), trace.dist_to_ref, trace.scaled_err,
                    trace.residual_norm),
            )
            summary = trace.summary_dict()
            summary["seed"] = config.input.seed
            summary["config_hash"] = config.config_hash
            summary_path = out_dir / f"summary_order{order}.json"
            write_json(summary_path, summary)
            entry["outputs"] = {
                "trace": trace_path.name,
                "trace_sha256": sha256_file(trace_path),
                "summary": summary_path.name,
                "summary_sha256": sha256_file(summary_path),
            }
        except Exception as exc:  # crash isolation across orders
            entry["status"] = f"error: {exc}"
        runs.append(entry)

    wall = time.monotonic() - start
    hash_basis = canonical_json({
        "config_hash": config.config_hash,
        "runs": runs,
        "tool_version": __version__,
    })
    manifest = RunManifest(
        config_hash=config.config_hash, tool_version=__version__,
        runs=tuple(runs), wall_clock_s=wall,
        manifest_hash=sha256_text(hash_basis),
    )
    write_json(out_dir / "manifest.json", manifest.to_dict())
    return manifest
