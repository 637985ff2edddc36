from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import structlog

from ntkparam.errors import ConfigError
from ntkparam.finite.net import DEFAULT_PARAM_CAP
from ntkparam.netspec import NetworkSpec, Parameterization
from ntkparam.utils import canonical_hash
from ntkparam.validation import validate

log = structlog.get_logger().bind(component="config")


def log_lr_grid(num: int = 20, low: float = 0.01, high: float = 100.0) -> list[float]:
    """``num`` log-spaced learning rates in [low, high]."""
    return [float(v) for v in np.logspace(np.log10(low), np.log10(high), num)]


@dataclass
class DatasetConfig:
    source: str = "synthetic"
    kind: str = "two-spheres"
    n: int = 800
    d: int = 16
    noise: float = 0.0
    paths: list[str] = field(default_factory=list)
    n_train: int = 400
    n_test: int = 400
    standardize: bool | None = None
    center_targets: bool = False

    @property
    def should_standardize(self) -> bool:
        if self.standardize is None:
            return self.source == "cifar10"
        return self.standardize


@dataclass
class ExperimentConfig:
    """Experiment configuration: defaults < JSON file < environment < CLI flags."""

    spec: NetworkSpec
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    parameterizations: list[Parameterization] = field(
        default_factory=lambda: [Parameterization.NTK, Parameterization.IMPROVED_STANDARD]
    )
    widths_sweep: list[tuple[int, ...]] = field(default_factory=list)
    s_sweep: list[int] = field(default_factory=lambda: [16, 64, 256])
    draws: int = 32
    ridge: float = 0.0
    lr_grid: list[float] = field(default_factory=log_lr_grid)
    epochs: int = 100
    batch_size: int = 256
    train_scale: int = 1
    seeds: list[int] = field(default_factory=lambda: [0])
    threads: int = 1
    out_dir: str = "results"
    journal: str | None = None
    param_cap: int = DEFAULT_PARAM_CAP

    def __post_init__(self) -> None:
        if not self.widths_sweep:
            self.widths_sweep = [self.spec.hidden_widths]

    @property
    def journal_path(self) -> Path:
        return Path(self.journal) if self.journal else Path(self.out_dir) / "journal.db"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ExperimentConfig:
        """Build a config from a parsed JSON tree, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "spec" not in data:
            raise ConfigError("config needs a 'spec' section")
        try:
            spec = NetworkSpec.from_dict(data["spec"])
            dataset_data = dict(data.get("dataset", {}))
            dataset_known = {f.name for f in fields(DatasetConfig)}
            if set(dataset_data) - dataset_known:
                raise ConfigError(
                    "unknown dataset keys: "
                    + ", ".join(sorted(set(dataset_data) - dataset_known))
                )
            kwargs: dict[str, Any] = {"spec": spec, "dataset": DatasetConfig(**dataset_data)}
            if "parameterizations" in data:
                kwargs["parameterizations"] = [
                    Parameterization(p) for p in data["parameterizations"]
                ]
            if "widths_sweep" in data:
                kwargs["widths_sweep"] = [_widths(spec, w) for w in data["widths_sweep"]]
            if "lr_grid" in data:
                grid = data["lr_grid"]
                kwargs["lr_grid"] = (
                    log_lr_grid(int(grid.get("num", 20)), float(grid.get("low", 0.01)),
                                float(grid.get("high", 100.0)))
                    if isinstance(grid, Mapping)
                    else [float(v) for v in grid]
                )
            for name in ("s_sweep", "seeds"):
                if name in data:
                    kwargs[name] = [int(v) for v in data[name]]
            for name in ("draws", "epochs", "batch_size", "train_scale", "threads", "param_cap"):
                if name in data:
                    kwargs[name] = int(data[name])
            if "ridge" in data:
                kwargs["ridge"] = float(data["ridge"])
            for name in ("out_dir", "journal"):
                if name in data:
                    kwargs[name] = str(data[name])
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def with_env(self, env: Mapping[str, str] | None = None) -> ExperimentConfig:
        """Overlay NTKPARAM_* environment variables."""
        env = os.environ if env is None else env
        updates: dict[str, Any] = {}
        try:
            if "NTKPARAM_OUT_DIR" in env:
                updates["out_dir"] = env["NTKPARAM_OUT_DIR"]
            if "NTKPARAM_JOURNAL" in env:
                updates["journal"] = env["NTKPARAM_JOURNAL"]
            if "NTKPARAM_THREADS" in env:
                updates["threads"] = int(env["NTKPARAM_THREADS"])
            if "NTKPARAM_SEED" in env:
                updates["seeds"] = [int(env["NTKPARAM_SEED"])]
            if "NTKPARAM_RIDGE" in env:
                updates["ridge"] = float(env["NTKPARAM_RIDGE"])
            if "NTKPARAM_PARAM_CAP" in env:
                updates["param_cap"] = int(env["NTKPARAM_PARAM_CAP"])
        except ValueError as exc:
            raise ConfigError(f"bad environment override: {exc}") from exc
        return replace(self, **updates)

    def with_overrides(
        self,
        out_dir: str | None = None,
        threads: int | None = None,
        seed: int | None = None,
        ridge: float | None = None,
    ) -> ExperimentConfig:
        """Apply CLI flag values; ``None`` leaves a field untouched."""
        updates: dict[str, Any] = {}
        if out_dir is not None:
            updates["out_dir"] = out_dir
        if threads is not None:
            updates["threads"] = threads
        if seed is not None:
            updates["seeds"] = [seed]
        if ridge is not None:
            updates["ridge"] = ridge
        return replace(self, **updates)

    def check(self) -> None:
        """Run-start checks: valid spec, nonempty sweeps, existing files."""
        report = validate(self.spec)
        if not report.ok:
            raise ConfigError("invalid spec: " + "; ".join(report.violations))
        for name in ("parameterizations", "widths_sweep", "s_sweep", "lr_grid", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")
        if self.draws < 1 or self.threads < 1 or self.batch_size < 1 or self.train_scale < 1:
            raise ConfigError("draws, threads, batch_size and train_scale must be ≥ 1")
        if self.ridge < 0:
            raise ConfigError("ridge must be ≥ 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be ≥ 0")
        if self.dataset.source == "cifar10":
            if not self.dataset.paths:
                raise ConfigError("cifar10 dataset needs 'paths'")
            missing = [p for p in self.dataset.paths if not Path(p).is_file()]
            if missing:
                raise ConfigError(f"missing dataset files: {', '.join(missing)}")
        elif self.dataset.source != "synthetic":
            raise ConfigError(f"unknown dataset source {self.dataset.source!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec": self.spec.to_dict(),
            "dataset": dict(vars(self.dataset)),
            "parameterizations": [p.value for p in self.parameterizations],
            "widths_sweep": [list(w) for w in self.widths_sweep],
            "s_sweep": list(self.s_sweep),
            "draws": self.draws,
            "ridge": self.ridge,
            "lr_grid": list(self.lr_grid),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "train_scale": self.train_scale,
            "seeds": list(self.seeds),
            "threads": self.threads,
            "param_cap": self.param_cap,
        }

    def config_hash(self) -> str:
        """Hash of everything that determines results (output paths and threads excluded)."""
        payload = self.to_dict()
        payload.pop("threads")
        return canonical_hash(payload)

    def log_config(self) -> None:
        """Log the configuration at startup."""
        log.info("spec", hash=self.spec.spec_hash(), layers=len(self.spec.layers),
                 parameterization=self.spec.parameterization.value)
        log.info("dataset", **vars(self.dataset))
        log.info("parameterizations", values=[p.value for p in self.parameterizations])
        log.info("widths_sweep", values=[list(w) for w in self.widths_sweep])
        log.info("s_sweep", values=self.s_sweep, draws=self.draws)
        log.info("ridge", value=self.ridge)
        log.info("lr_grid", points=len(self.lr_grid), low=min(self.lr_grid),
                 high=max(self.lr_grid))
        log.info("training", epochs=self.epochs, batch_size=self.batch_size,
                 train_scale=self.train_scale)
        log.info("seeds", values=self.seeds)
        log.info("threads", value=self.threads)
        log.info("out_dir", value=self.out_dir, journal=str(self.journal_path))


def _widths(spec: NetworkSpec, value: Any) -> tuple[int, ...]:
    hidden = len(spec.hidden_widths)
    if isinstance(value, int):
        return (value,) * hidden
    widths = tuple(int(v) for v in value)
    if len(widths) != hidden:
        raise ConfigError(f"widths entry {list(widths)} needs {hidden} values")
    return widths
