"""Energy functionals, the adjacent-difference system and synchronization checks.

Scalar functions take a :class:`NetworkState`; :func:`diagnostics_series`
evaluates everything along a whole :class:`Trajectory` at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrate import Trajectory
from .model import ModelParams, NetworkState, derived_constants, feedback_controls

FIT_FLOOR = 1e-30
RATE_TOLERANCE = 0.2


class FitUnavailable(ValueError):
    """Not enough usable samples in the requested window to fit a rate."""


@dataclass(frozen=True, eq=False)
class DifferenceState:
    """Adjacent-cell differences ``v_i = x_i - x_{i-1}``, ``w_i = y_i - y_{i-1}`` (ring)."""

    v: np.ndarray
    w: np.ndarray


@dataclass(frozen=True, eq=False)
class DiagnosticsSeries:
    times: np.ndarray
    weighted_energy: np.ndarray
    plain_energy: np.ndarray
    diff_energy: np.ndarray
    gap: np.ndarray
    bound: np.ndarray


@dataclass(frozen=True)
class SyncVerdict:
    synchronized: bool
    t_sync: Optional[float]
    fitted_rate: Optional[float]
    threshold_satisfied_tail: bool
    tail_min_gap_sq: float
    premises_held_in_window: bool = False
    # None unless the premises held over the whole fit window
    rate_meets_guarantee: Optional[bool] = None


@dataclass(frozen=True, eq=False)
class SyncInequalityReport:
    failure_times: np.ndarray
    checked: int

    @property
    def premises_never_active(self) -> bool:
        return self.checked == 0

    @property
    def ok(self) -> bool:
        return self.failure_times.size == 0


# ---------------------------------------------------------------------------
# Pointwise functionals
# ---------------------------------------------------------------------------


def weighted_energy(state: NetworkState, c1: float) -> float:
    """``sum_i c1 x_i**2 + y_i**2``."""
    if c1 <= 0:
        raise ValueError("c1 must be positive")
    return float(c1 * np.dot(state.x, state.x) + np.dot(state.y, state.y))


def dissipative_bound(t: float, ew0: float, params: ModelParams) -> float:
    """Upper bound on ``|x|**2 + |y|**2`` at time ``t`` given the initial weighted energy.

    ``(e^{-delta t} ew0 + (n/delta)(c2 + delta beta / b)) / min(c1, 1)``
    """
    if t < 0 or ew0 < 0:
        raise ValueError("t and ew0 must be nonnegative")
    return float(_bound(np.asarray(t, dtype=np.float64), ew0, params))


def _bound(t: np.ndarray, ew0: float, params: ModelParams) -> np.ndarray:
    k = derived_constants(params)
    forcing = (params.n / params.delta) * (k.c2 + params.delta * k.beta / params.b)
    return (np.exp(-params.delta * t) * ew0 + forcing) / min(k.c1, 1.0)


def difference_state(state: NetworkState) -> DifferenceState:
    x, y = state.x, state.y
    return DifferenceState(x - np.roll(x, 1), y - np.roll(y, 1))


def difference_energy(state: NetworkState) -> float:
    d = difference_state(state)
    return float(np.dot(d.v, d.v) + np.dot(d.w, d.w))


def boundary_gap(state: NetworkState) -> float:
    """``x_n - x_1``, the signal fed back at both ends of the chain."""
    return float(state.x[-1] - state.x[0])


def feedback_sum_identity_residual(state: NetworkState, p: float) -> float:
    """Defect between the feedback work term and its closed form.

    The direct sum ``sum_i p (u_i - u_{i-1}) (x_i - x_{i-1})`` (ring indices)
    equals ``p (-3 g**2 + g (x_{n-1} - x_2))`` with ``g = x_n - x_1``.
    """
    x = state.x
    u = feedback_controls(x)
    direct = float(np.dot(p * (u - np.roll(u, 1)), x - np.roll(x, 1)))
    g = x[-1] - x[0]
    closed = p * (-3.0 * g * g + g * (x[-2] - x[1]))
    return abs(direct - float(closed))


# ---------------------------------------------------------------------------
# Trajectory-level checks
# ---------------------------------------------------------------------------


def _diff_energy_rows(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    v = xs - np.roll(xs, 1, axis=1)
    w = ys - np.roll(ys, 1, axis=1)
    return np.sum(v * v, axis=1) + np.sum(w * w, axis=1)


def diagnostics_series(traj: Trajectory, params: ModelParams) -> DiagnosticsSeries:
    c1 = derived_constants(params).c1
    xx = np.sum(traj.xs * traj.xs, axis=1)
    yy = np.sum(traj.ys * traj.ys, axis=1)
    weighted = c1 * xx + yy
    return DiagnosticsSeries(
        times=traj.times,
        weighted_energy=weighted,
        plain_energy=xx + yy,
        diff_energy=_diff_energy_rows(traj.xs, traj.ys),
        gap=traj.xs[:, -1] - traj.xs[:, 0],
        bound=_bound(traj.times, float(weighted[0]), params),
    )


def check_dissipative_bound(traj: Trajectory, params: ModelParams, tol: float = 1e-6) -> np.ndarray:
    """Times at which ``|x|**2 + |y|**2`` exceeds the dissipative bound by more than ``tol``."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    s = diagnostics_series(traj, params)
    return s.times[s.plain_energy > s.bound * (1.0 + tol)]


def sync_premises(series: DiagnosticsSeries, params: ModelParams) -> np.ndarray:
    """Mask of samples inside the absorbing ball with a gap large enough to force decay."""
    k = derived_constants(params)
    drive = params.delta + k.gamma + abs(params.c - params.b)
    return (series.plain_energy < k.q) & (params.p * series.gap**2 > (drive + params.p) * k.q)


def sync_inequality_failures(times, diff_energy, premises, delta: float,
                             slack: float = 1e-4, rel_slack: float = 0.0) -> SyncInequalityReport:
    """Check ``dD/dt + 2 delta D < slack + rel_slack * D`` where ``premises`` holds.

    ``dD/dt`` is a centered difference on the (possibly nonuniform) samples, so
    the first and last samples are never checked.
    """
    t = np.asarray(times, dtype=np.float64)
    d = np.asarray(diff_energy, dtype=np.float64)
    mask = np.asarray(premises, dtype=bool)
    if t.size < 3:
        raise ValueError("need at least three samples")
    inner = np.flatnonzero(mask[1:-1]) + 1
    if inner.size == 0:
        return SyncInequalityReport(np.empty(0), 0)
    rate = (d[inner + 1] - d[inner - 1]) / (t[inner + 1] - t[inner - 1])
    lhs = rate + 2.0 * delta * d[inner]
    failed = ~(lhs < slack + rel_slack * d[inner])
    return SyncInequalityReport(t[inner[failed]], int(inner.size))


def check_sync_inequality(traj: Trajectory, params: ModelParams, slack: float = 1e-4,
                          rel_slack: float = 1e-4) -> SyncInequalityReport:
    """Test the difference-energy decay inequality wherever its premises hold.

    The premises are: plain energy below ``q`` and
    ``p gap**2 > (delta + gamma + |c - b| + p) q``.  With the closed-form
    constants they are rarely (if ever) met, in which case the report says so
    via ``premises_never_active``.
    """
    series = diagnostics_series(traj, params)
    return sync_inequality_failures(series.times, series.diff_energy,
                                    sync_premises(series, params), params.delta,
                                    slack, rel_slack)


def fit_decay_rate(times, values, t_from: float, t_to: float) -> float:
    """Exponential decay rate by least squares on ``log(values)``.

    Only samples with ``t_from <= t <= t_to`` and value above 1e-30 are used.
    A positive result means decay.

    Raises
    ------
    FitUnavailable
        Fewer than two usable samples in the window.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    keep = (t >= t_from) & (t <= t_to) & (v > FIT_FLOOR)
    if np.count_nonzero(keep) < 2:
        raise FitUnavailable(f"fewer than two usable samples in [{t_from}, {t_to}]")
    tk = t[keep]
    if tk[-1] == tk[0]:
        raise FitUnavailable("window has zero width")
    slope, _ = np.polyfit(tk, np.log(v[keep]), 1)
    return float(-slope)


def classify_sync(traj: Trajectory, params: ModelParams, eps_sync: float = 1e-8,
                  tail_fraction: float = 0.25) -> SyncVerdict:
    """Synchronization verdict for a (possibly truncated) trajectory.

    The infinite-time liminf of the squared gap is replaced by its minimum over
    the trailing ``tail_fraction`` of samples.  The decay rate is fitted on
    ``[t_sync / 2, t_end]``.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    series = diagnostics_series(traj, params)
    d = series.diff_energy
    times = series.times
    below = np.flatnonzero(d <= eps_sync)
    synchronized = bool(d[-1] <= eps_sync)
    t_sync = float(times[below[0]]) if below.size else None

    fitted = None
    premises_held = False
    meets = None
    if t_sync is not None:
        lo, hi = t_sync / 2.0, float(times[-1])
        try:
            fitted = fit_decay_rate(times, d, lo, hi)
        except FitUnavailable:
            fitted = None
        window = (times >= lo) & (times <= hi)
        premises_held = bool(np.all(sync_premises(series, params)[window]))
        if fitted is not None and premises_held:
            meets = fitted >= params.delta * (1.0 - RATE_TOLERANCE)

    n_tail = max(1, int(math.ceil(tail_fraction * len(traj))))
    tail_min = float(np.min(series.gap[-n_tail:] ** 2))
    threshold = derived_constants(params).sync_threshold
    return SyncVerdict(
        synchronized=synchronized,
        t_sync=t_sync,
        fitted_rate=fitted,
        threshold_satisfied_tail=tail_min > threshold,
        tail_min_gap_sq=tail_min,
        premises_held_in_window=premises_held,
        rate_meets_guarantee=meets,
    )
