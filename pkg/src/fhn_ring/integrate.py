"""Time integration of the ring network.

Two schemes are provided:

* :func:`integrate_fixed` -- classical four-stage Runge-Kutta with a constant step.
* :func:`integrate_adaptive` -- Dormand-Prince 5(4) embedded pair with
  mixed absolute/relative error control.

The network-specific inner loops are compiled (see ``_kernels``); the generic
:func:`rk4_step` is plain numpy and serves as the reference path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .model import ModelParams, NetworkState

SAFETY = 0.9
MAX_GROWTH = 5.0
MIN_SHRINK = 0.2


class IntegrationError(RuntimeError):
    """Integration stopped early.

    ``time`` is where the failure was detected and ``trajectory`` holds every
    sample recorded before it.
    """

    def __init__(self, message: str, time: float, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 200.0
    sample_stride: int = 10
    rtol: float = 1e-6
    atol: float = 1e-9
    dt_min: float = 1e-10
    dt_max: float = 0.1
    method: str = "fixed"

    def __post_init__(self):
        for name in ("dt", "t_end", "rtol", "atol", "dt_min", "dt_max"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if isinstance(self.sample_stride, bool) or int(self.sample_stride) != self.sample_stride \
                or self.sample_stride < 1:
            raise ValueError(f"sample_stride must be an integer >= 1, got {self.sample_stride!r}")
        object.__setattr__(self, "sample_stride", int(self.sample_stride))
        if self.dt_min > self.dt_max:
            raise ValueError("dt_min must not exceed dt_max")
        if self.method not in ("fixed", "adaptive"):
            raise ValueError(f"method must be 'fixed' or 'adaptive', got {self.method!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution path.

    ``xs`` and ``ys`` have shape ``(samples, n)``; row ``k`` is the state at
    ``times[k]``.  Row 0 is the initial condition.
    """

    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    step_count: int
    rejected_steps: int = 0

    def __post_init__(self):
        if self.xs.shape != self.ys.shape or self.xs.shape[0] != self.times.shape[0]:
            raise ValueError("times, xs and ys must align")
        if self.times.size and self.times[0] != 0.0:
            raise ValueError("trajectory must start at t=0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    @property
    def n(self) -> int:
        return self.xs.shape[1]

    @property
    def states(self) -> list:
        return [NetworkState(x, y) for x, y in zip(self.xs, self.ys)]

    def state(self, k: int) -> NetworkState:
        return NetworkState(self.xs[k], self.ys[k])

    @property
    def initial(self) -> NetworkState:
        return self.state(0)

    @property
    def final(self) -> NetworkState:
        return self.state(-1)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (np.array_equal(self.times, other.times) and np.array_equal(self.xs, other.xs)
                and np.array_equal(self.ys, other.ys) and self.step_count == other.step_count
                and self.rejected_steps == other.rejected_steps)

    __hash__ = None


def rk4_step(deriv: Callable, state, t: float, dt: float):
    """One classical Runge-Kutta step of ``dz/dt = deriv(t, z)``.

    ``state`` may be an array or a :class:`NetworkState`; in the latter case
    ``deriv`` receives and returns network states.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if isinstance(state, NetworkState):
        n = state.n

        def flat(tt, z):
            d = deriv(tt, NetworkState(z[:n], z[n:]))
            return np.concatenate([d.x, d.y])

        return NetworkState.from_vector(rk4_step(flat, state.as_vector(), t, dt))

    z = np.asarray(state, dtype=np.float64)
    half = dt / 2.0
    k1 = _finite(deriv(t, z), t)
    k2 = _finite(deriv(t + half, z + half * k1), t)
    k3 = _finite(deriv(t + half, z + half * k2), t)
    k4 = _finite(deriv(t + dt, z + dt * k3), t)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _finite(k, t):
    k = np.asarray(k, dtype=np.float64)
    if not np.all(np.isfinite(k)):
        raise IntegrationError(f"non-finite derivative at t={t}", t)
    return k


def _coefficients(params: ModelParams):
    return (float(params.a), float(params.b), float(params.c), float(params.delta),
            float(params.p), float(params.alpha))


def _check_init(params: ModelParams, init: NetworkState):
    if init.n != params.n:
        raise ValueError(f"initial state has {init.n} cells, params.n={params.n}")


def fixed_step_count(t_end: float, dt: float) -> int:
    # tolerate t_end/dt landing a hair above an integer through rounding
    return max(1, int(math.ceil(t_end / dt - 1e-9)))


def integrate_fixed(params: ModelParams, init: NetworkState, cfg: IntegratorConfig) -> Trajectory:
    """RK4 over ``[0, t_end]`` with constant step ``cfg.dt``.

    Every ``sample_stride``-th step is recorded, and the final step always is.
    Sample times are ``k * dt``, so the last time lies within ``dt`` of ``t_end``.

    Raises
    ------
    IntegrationError
        If a non-finite value appears; the step is too large for the dynamics.
    """
    _check_init(params, init)
    nsteps = fixed_step_count(cfg.t_end, cfg.dt)
    steps, xs, ys, _, fail = _kernels.rk4_run(
        np.array(init.x), np.array(init.y), *_coefficients(params),
        float(cfg.dt), nsteps, cfg.sample_stride)
    times = steps * cfg.dt
    if fail:
        traj = Trajectory(times, xs, ys, fail - 1)
        t_fail = fail * cfg.dt
        raise IntegrationError(f"state blew up near t={t_fail:g}; reduce dt", t_fail, traj)
    return Trajectory(times, xs, ys, nsteps)


def integrate_adaptive(params: ModelParams, init: NetworkState, cfg: IntegratorConfig) -> Trajectory:
    """Dormand-Prince 5(4) with step control.

    A step is accepted when the RMS of ``err_i / (atol + rtol |z_i|)`` is at most
    one.  The next step is ``0.9 h err**(-1/5)``, with the factor clamped to
    ``[0.2, 5]`` and the step to ``[dt_min, dt_max]``.  ``cfg.dt`` is the initial
    guess.  Accepted steps are recorded every ``sample_stride`` and at the end.
    """
    _check_init(params, init)
    coeffs = _coefficients(params)
    x = np.array(init.x)
    y = np.array(init.y)
    t = 0.0
    h = min(max(cfg.dt, cfg.dt_min), cfg.dt_max)
    times, xs, ys = [0.0], [x.copy()], [y.copy()]
    accepted = rejected = 0
    while t < cfg.t_end:
        last = cfg.t_end - t <= h
        step = cfg.t_end - t if last else h
        xn, yn, err = _kernels.dopri_step(x, y, step, *coeffs, cfg.atol, cfg.rtol)
        if not math.isfinite(err):
            err = math.inf
        if err <= 1.0:
            t = cfg.t_end if last else t + step
            x, y = xn, yn
            accepted += 1
            if accepted % cfg.sample_stride == 0 or last:
                times.append(t)
                xs.append(x.copy())
                ys.append(y.copy())
        else:
            rejected += 1
            if h <= cfg.dt_min:
                traj = Trajectory(np.array(times), np.array(xs), np.array(ys), accepted, rejected)
                raise IntegrationError(
                    f"step size reached dt_min={cfg.dt_min:g} at t={t:g} with error {err:.3g}",
                    t, traj)
        if err == 0.0:
            factor = MAX_GROWTH
        else:
            factor = min(MAX_GROWTH, max(MIN_SHRINK, SAFETY * err ** -0.2))
        if not last or err > 1.0:
            h = min(max(h * factor, cfg.dt_min), cfg.dt_max)
    return Trajectory(np.array(times), np.array(xs), np.array(ys), accepted, rejected)


def integrate(params: ModelParams, init: NetworkState, cfg: IntegratorConfig) -> Trajectory:
    if cfg.method == "adaptive":
        return integrate_adaptive(params, init, cfg)
    return integrate_fixed(params, init, cfg)


def estimate_order(dts: Sequence[float], solve: Callable[[float], np.ndarray]) -> float:
    """Observed convergence order from final values computed at decreasing steps.

    Errors are max-norm distances to the finest-step result; the order is the
    least-squares slope of ``log(error)`` against ``log(dt)`` over the coarser
    steps.  Returns ``inf`` if any error is exactly zero.
    """
    dts = [float(d) for d in dts]
    if len(dts) < 3:
        raise ValueError("need at least three step sizes")
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("step sizes must be strictly decreasing")
    finals = [np.asarray(solve(dt), dtype=np.float64) for dt in dts]
    errors = np.array([np.max(np.abs(f - finals[-1])) for f in finals[:-1]])
    if np.any(errors == 0.0):
        return math.inf
    slope, _ = np.polyfit(np.log(dts[:-1]), np.log(errors), 1)
    return float(slope)


def convergence_order(params: ModelParams, init: NetworkState, t_end: float,
                      dts: Sequence[float]) -> float:
    """Observed order of :func:`integrate_fixed` on the network."""

    def solve(dt):
        cfg = IntegratorConfig(dt=dt, t_end=t_end, sample_stride=10**9)
        return integrate_fixed(params, init, cfg).final.as_vector()

    return estimate_order(dts, solve)
