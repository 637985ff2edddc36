from __future__ import annotations

import asyncio
import time
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Awaitable, Callable, Sequence, TypeVar

import numpy as np
import structlog

from ntkparam import __version__
from ntkparam.data import Dataset, load_cifar10, regression_targets, standardize, subset, synthetic
from ntkparam.errors import (
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    ConfigError,
    NtkParamError,
)
from ntkparam.inference import Predictor, gp_mean, ntk_predict_inf
from ntkparam.kernels import KernelState, propagate, split_blocks
from ntkparam.netspec import NetworkSpec
from ntkparam.utils import derive_seed

if TYPE_CHECKING:
    from ntkparam.config import ExperimentConfig
    from ntkparam.storage import Journal

log = structlog.get_logger().bind(component="commands")

J = TypeVar("J")
R = TypeVar("R")


@dataclass
class CommandContext:
    """Context object passed to every command handler."""

    config: ExperimentConfig | None
    journal: Journal
    out_dir: Path
    run_id: int | None = None

    @property
    def cfg(self) -> ExperimentConfig:
        if self.config is None:
            raise ConfigError("this command needs --config")
        return self.config

    async def timed(self, step: str, func: Callable[[], R], detail: str | None = None) -> R:
        """Run ``func`` off the event loop and journal its wall time."""
        started = time.perf_counter()
        result = await asyncio.to_thread(func)
        await self._record(step, time.perf_counter() - started, detail)
        return result

    async def map_points(
        self,
        step: str,
        func: Callable[[J], R],
        jobs: Sequence[J],
        label: Callable[[J], str] = str,
    ) -> list[R]:
        """Evaluate independent sweep points on up to ``threads`` workers.

        Results come back in job order; journal rows are written afterwards
        from the event loop in the same order.
        """
        gate = asyncio.Semaphore(max(self.cfg.threads, 1))

        async def run(job: J) -> tuple[R, float]:
            async with gate:
                started = time.perf_counter()
                result = await asyncio.to_thread(func, job)
                return result, time.perf_counter() - started

        outcomes = await asyncio.gather(*(run(job) for job in jobs))
        for job, (_, seconds) in zip(jobs, outcomes):
            log.info("sweep point done", step=step, point=label(job), seconds=round(seconds, 3))
            await self._record(step, seconds, label(job))
        return [result for result, _ in outcomes]

    async def _record(self, step: str, seconds: float, detail: str | None) -> None:
        if self.run_id is not None:
            await self.journal.record_step(self.run_id, step, seconds, detail)


@dataclass
class Command:
    """A registered subcommand."""

    name: str
    description: str
    usage: str
    handler: Callable[[CommandContext], Awaitable[str | None]]
    needs_config: bool = True


# Command registry
_commands: dict[str, Command] = {}


def register(
    name: str,
    description: str,
    usage: str,
    needs_config: bool = True,
) -> Callable:
    """Decorator to register a command handler function."""

    def decorator(
        func: Callable[[CommandContext], Awaitable[str | None]],
    ) -> Callable[[CommandContext], Awaitable[str | None]]:
        _commands[name] = Command(
            name=name,
            description=description,
            usage=usage,
            handler=func,
            needs_config=needs_config,
        )
        return func

    return decorator


def get_all_commands() -> dict[str, Command]:
    """Return a copy of the command registry."""
    return dict(_commands)


async def dispatch(name: str, ctx: CommandContext) -> int:
    """Run one subcommand and map its outcome to an exit code."""
    cmd = _commands.get(name)
    if cmd is None:
        log.error("unknown command", command=name)
        return EXIT_CONFIG_ERROR

    started = time.perf_counter()
    if cmd.needs_config:
        ctx.run_id = await ctx.journal.start_run(name, ctx.cfg.config_hash(), __version__)

    status, code = "ok", EXIT_OK
    try:
        response = await cmd.handler(ctx)
        if response:
            print(response)
    except NtkParamError as exc:
        log.error("command failed", command=name, error=str(exc), exit_code=exc.exit_code)
        status, code = "failed", exc.exit_code
    except Exception as exc:
        log.exception("internal error", command=name, error=repr(exc))
        status, code = "error", EXIT_NUMERICAL_FAILURE

    if ctx.run_id is not None:
        await ctx.journal.finish_run(ctx.run_id, status, time.perf_counter() - started)
    return code


def load_commands() -> None:
    """Import all command modules to trigger their @register decorators."""
    import ntkparam.commands.compare  # noqa: F401
    import ntkparam.commands.kernel  # noqa: F401
    import ntkparam.commands.mc_validate  # noqa: F401
    import ntkparam.commands.status  # noqa: F401
    import ntkparam.commands.sweep_widths  # noqa: F401
    import ntkparam.commands.train_finite  # noqa: F401


# ── Shared experiment helpers ────────────────────────────────────────────


def widths_label(widths: Sequence[int]) -> str:
    return "x".join(str(w) for w in widths)


def prepare_data(config: ExperimentConfig, seed: int) -> tuple[Dataset, Dataset]:
    """Train/test splits for one seed, standardised when configured."""
    ds = config.dataset
    if ds.source == "cifar10":
        data = load_cifar10(ds.paths)
    else:
        data = synthetic(ds.kind, ds.n, ds.d, ds.noise, derive_seed(seed, 1))
    train, test = subset(data, ds.n_train, ds.n_test, derive_seed(seed, 2))
    if train.dim != config.spec.input_dim:
        raise ConfigError(
            f"dataset has {train.dim} features but spec expects {config.spec.input_dim}"
        )
    if ds.should_standardize:
        train, test = standardize(train, test, channels=config.spec.input_channels)
    log.info("dataset ready", source=train.meta.source, seed=seed,
             n_train=train.n, n_test=test.n, classes=train.classes)
    return train, test


@dataclass(frozen=True)
class KernelPredictions:
    """Test-set predictions of the NNGP posterior and the t → ∞ NTK ensemble."""

    state: KernelState
    nngp: np.ndarray
    ntk: np.ndarray | None


def kernel_predictions(
    spec: NetworkSpec, train: Dataset, test: Dataset, ridge: float, center_targets: bool
) -> KernelPredictions:
    """Propagate over train ∪ test and solve both regressions.

    ``ntk`` is ``None`` when the NTK is divergent.
    """
    state = propagate(spec, train.inputs, test.inputs)
    targets = regression_targets(train, center_targets)
    k_train, k_cross = split_blocks(state.nngp, train.n)
    nngp = gp_mean(Predictor(k_train, k_cross, targets, ridge))
    ntk = None
    if not state.is_divergent:
        t_train, t_cross = split_blocks(state.ntk_matrix(), train.n)
        ntk = ntk_predict_inf(Predictor(t_train, t_cross, targets, ridge))
    return KernelPredictions(state, nngp, ntk)


async def load_splits(ctx: CommandContext) -> dict[int, tuple[Dataset, Dataset]]:
    """Train/test splits for every configured seed, in seed order."""
    splits: dict[int, tuple[Dataset, Dataset]] = {}
    for seed in ctx.cfg.seeds:
        splits[seed] = await ctx.timed(
            "data", lambda seed=seed: prepare_data(ctx.cfg, seed), f"seed{seed}"
        )
    return splits
