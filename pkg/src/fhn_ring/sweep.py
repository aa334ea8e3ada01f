"""Batch simulation over parameter grids.

Cases are independent, so they can be farmed out to worker processes; the
result list is always in grid order and does not depend on the worker count.
Initial states come from numpy's PCG64 generator seeded per case.
"""

from __future__ import annotations

import dataclasses
import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .diagnostics import SyncVerdict, check_dissipative_bound, classify_sync, diagnostics_series
from .integrate import IntegrationError, IntegratorConfig, Trajectory, integrate
from .model import CubicNonlinearity, ModelParams, NetworkState

RNG_NAME = "numpy.random.PCG64"


def random_initial(n: int, radius: float, seed: int) -> NetworkState:
    """Uniform draw on ``[-radius, radius]**(2n)``: first ``n`` values are ``x``, next ``n`` are ``y``."""
    if n < 4:
        raise ValueError("n must be at least 4")
    if not radius > 0:
        raise ValueError("radius must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.uniform(-radius, radius, size=2 * n)
    return NetworkState(z[:n], z[n:])


@dataclass(frozen=True)
class SweepGrid:
    p_values: Sequence[float]
    a_values: Sequence[float]
    alpha_values: Sequence[float]
    n_values: Sequence[int]
    seeds: Sequence[int]
    base: ModelParams = field(default_factory=ModelParams)
    init_radius: float = 2.0
    integ: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        for name in ("p_values", "a_values", "alpha_values", "n_values", "seeds"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, values)
        if any(v < 4 for v in self.n_values):
            raise ValueError("every n must be at least 4")
        if any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be unsigned")
        if not self.init_radius > 0:
            raise ValueError("init_radius must be positive")

    def __len__(self) -> int:
        return (len(self.p_values) * len(self.a_values) * len(self.alpha_values)
                * len(self.n_values) * len(self.seeds))

    def cases(self):
        """Yield ``(params, seed)`` in lexicographic grid order, seeds varying fastest."""
        for p, a, alpha, n, seed in itertools.product(
                self.p_values, self.a_values, self.alpha_values, self.n_values, self.seeds):
            params = dataclasses.replace(
                self.base, p=float(p), a=float(a), n=int(n),
                nonlinearity=CubicNonlinearity(float(alpha)))
            yield params, int(seed)


@dataclass(frozen=True)
class SweepRecord:
    params: ModelParams
    seed: Optional[int]
    verdict: SyncVerdict
    bound_violations: int
    max_plain_energy: float
    failed: bool = False
    failure: str = ""
    wall_time: float = field(default=0.0, compare=False)


def run_case(params: ModelParams, init: NetworkState, cfg: IntegratorConfig,
             seed: Optional[int] = None, eps_sync: float = 1e-8, tail_fraction: float = 0.25,
             tol: float = 1e-6) -> SweepRecord:
    """Integrate one case and summarize it; integration failures become flagged records."""
    start = time.perf_counter()
    failed, failure = False, ""
    try:
        traj = integrate(params, init, cfg)
    except IntegrationError as exc:
        failed, failure = True, str(exc)
        traj = exc.trajectory
        if traj is None or len(traj) == 0:
            traj = Trajectory(np.zeros(1), init.x[None, :].copy(), init.y[None, :].copy(), 0)
    verdict = classify_sync(traj, params, eps_sync, tail_fraction)
    if failed and verdict.synchronized:
        verdict = dataclasses.replace(verdict, synchronized=False)
    violations = check_dissipative_bound(traj, params, tol)
    energy = diagnostics_series(traj, params).plain_energy
    return SweepRecord(
        params=params,
        seed=seed,
        verdict=verdict,
        bound_violations=int(violations.size),
        max_plain_energy=float(np.max(energy)),
        failed=failed,
        failure=failure,
        wall_time=time.perf_counter() - start,
    )


def _run_point(job) -> SweepRecord:
    params, seed, radius, cfg = job
    return run_case(params, random_initial(params.n, radius, seed), cfg, seed=seed)


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get("FHN_WORKERS", "1"))
    if workers < 1:
        raise ValueError("worker count must be at least 1")
    return workers


def run_sweep(grid: SweepGrid, workers: Optional[int] = None) -> List[SweepRecord]:
    """Run every grid case; records come back in grid order whatever ``workers`` is."""
    workers = resolve_workers(workers)
    jobs = [(params, seed, grid.init_radius, grid.integ) for params, seed in grid.cases()]
    if workers == 1 or len(jobs) <= 1:
        return [_run_point(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point, jobs))
