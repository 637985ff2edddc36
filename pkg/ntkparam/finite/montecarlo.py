from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import structlog

from ntkparam.finite.net import DEFAULT_PARAM_CAP, forward, init, ntk_gram
from ntkparam.netspec import NetworkSpec
from ntkparam.utils import derive_seed

log = structlog.get_logger().bind(component="finite")


@dataclass(frozen=True)
class EmpiricalKernels:
    nngp_hat: np.ndarray
    ntk_hat: np.ndarray
    draws_R: int
    scale_s: int


def _one_draw(
    spec: NetworkSpec, x: np.ndarray, s: int, seed: int, head: int, param_cap: int
) -> tuple[np.ndarray, np.ndarray]:
    net = init(spec, s, seed, param_cap=param_cap)
    outputs = forward(net, x)
    nngp = outputs @ outputs.T / outputs.shape[1]
    return 0.5 * (nngp + nngp.T), ntk_gram(net, x, head)


def empirical_kernels(
    spec: NetworkSpec,
    x: np.ndarray,
    s: int,
    draws: int,
    seed: int,
    head: int = 0,
    threads: int = 1,
    param_cap: int = DEFAULT_PARAM_CAP,
) -> EmpiricalKernels:
    """Monte Carlo NNGP (over draws and readout units) and NTK (one head).

    Draw ``r`` uses ``derive_seed(seed, r)``; results are reduced in draw
    order, so the estimate does not depend on ``threads``.
    """
    if draws < 1:
        raise ValueError("need at least one draw")
    seeds = [derive_seed(seed, r) for r in range(draws)]
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        results = list(
            pool.map(lambda d: _one_draw(spec, x, s, d, head, param_cap), seeds)
        )
    nngp = np.zeros_like(results[0][0])
    ntk = np.zeros_like(results[0][1])
    for draw_nngp, draw_ntk in results:
        nngp += draw_nngp
        ntk += draw_ntk
    log.debug("monte carlo kernels", s=s, draws=draws, n=nngp.shape[0])
    return EmpiricalKernels(nngp / draws, ntk / draws, draws, s)


def relative_frobenius_error(estimate: np.ndarray, reference: np.ndarray) -> float:
    return float(np.linalg.norm(estimate - reference) / np.linalg.norm(reference))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    slope, _ = np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)
    return float(slope)
