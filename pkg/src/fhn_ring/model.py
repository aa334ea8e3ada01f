"""Model definitions for the boundary-feedback FitzHugh-Nagumo ring lattice.

Each of the ``n`` cells carries an activator ``x_i`` and a recovery variable
``y_i``::

    dx_i/dt = a (x_{i-1} - 2 x_i + x_{i+1}) + f(x_i) - b y_i + p u_i
    dy_i/dt = c x_i - delta y_i

with ring indexing ``x_0 = x_n``, ``x_{n+1} = x_1`` and a boundary feedback
``u`` that is nonzero only at the two endpoint cells::

    u_1 = x_n - x_1,   u_n = x_1 - x_n,   u_i = 0 otherwise.

The nonlinearity is the cubic ``f(s) = s (s - alpha) (1 - s)``.  Everything in
this module is a pure function of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MIN_CELLS = 4


class ParameterError(ValueError):
    """Raised when a model parameter violates its admissible range."""


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.array(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


def _check_ring(x: np.ndarray, n: Optional[int] = None) -> None:
    if x.shape[-1] < MIN_CELLS:
        raise ValueError(f"ring needs at least {MIN_CELLS} cells, got {x.shape[-1]}")
    if n is not None and x.shape[-1] != n:
        raise ValueError(f"vector length {x.shape[-1]} does not match n={n}")


# ---------------------------------------------------------------------------
# Nonlinearity and its dissipativity envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubicNonlinearity:
    """The FitzHugh-Nagumo cubic ``f(s) = s (s - alpha) (1 - s)``, ``0 < alpha < 1``."""

    alpha: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ParameterError(f"alpha must satisfy 0 < alpha < 1, got {self.alpha}")


@dataclass(frozen=True)
class AssumptionEnvelope:
    """Constants bounding a nonlinearity.

    A function ``f`` is admissible when, for every real ``s``::

        f(s) s  <= -lam s**4 + beta
        f'(s)   <= gamma
    """

    lam: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("lam", "beta", "gamma"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ParameterError(f"envelope {name} must be positive and finite, got {value}")

    @classmethod
    def unchecked(cls, lam: float, beta: float, gamma: float) -> "AssumptionEnvelope":
        """Build an envelope without the positivity check, for probing :func:`verify_envelope`."""
        env = object.__new__(cls)
        for name, value in (("lam", lam), ("beta", beta), ("gamma", gamma)):
            object.__setattr__(env, name, float(value))
        return env


def f_eval(s, nl: CubicNonlinearity):
    """Evaluate the cubic nonlinearity; works elementwise on arrays."""
    return s * (s - nl.alpha) * (1.0 - s)


def f_prime(s, nl: CubicNonlinearity):
    """Derivative ``-alpha + 2 (alpha + 1) s - 3 s**2``."""
    alpha = nl.alpha
    return -alpha + 2.0 * (alpha + 1.0) * s - 3.0 * s * s


def envelope_for_cubic(nl: CubicNonlinearity) -> AssumptionEnvelope:
    """Closed-form envelope of the cubic.

    Young's inequality on the cubic term gives ``f(s) s <= -s**4/2 + 8 (alpha+1)**4``
    and completing the square in ``f'`` gives ``f'(s) <= 1 + alpha + alpha**2``.
    """
    alpha = nl.alpha
    return AssumptionEnvelope(lam=0.5, beta=8.0 * (alpha + 1.0) ** 4, gamma=1.0 + alpha + alpha**2)


def verify_envelope(
    nl: CubicNonlinearity,
    env: AssumptionEnvelope,
    s_min: float = -20.0,
    s_max: float = 20.0,
    samples: int = 100_000,
) -> np.ndarray:
    """Return the grid points where either envelope inequality fails.

    The grid has ``samples`` evenly spaced points on ``[s_min, s_max]``; the result
    is empty iff ``f(s) s <= -lam s**4 + beta`` and ``f'(s) <= gamma``
    hold at every grid point.  This is a sampling check, not a proof.
    """
    if not s_min < s_max:
        raise ValueError("s_min must be smaller than s_max")
    if samples < 2:
        raise ValueError("need at least two samples")
    s = np.linspace(s_min, s_max, samples)
    bad = (f_eval(s, nl) * s > -env.lam * s**4 + env.beta) | (f_prime(s, nl) > env.gamma)
    return s[bad]


# ---------------------------------------------------------------------------
# Parameters and state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """System constants of the ring.

    ``envelope`` optionally overrides the closed-form cubic envelope; use
    :func:`verify_envelope` to check an override is actually admissible.
    """

    n: int = 4
    a: float = 1.0
    b: float = 1.0
    c: float = 0.1
    delta: float = 0.2
    p: float = 1.0
    nonlinearity: CubicNonlinearity = field(default_factory=CubicNonlinearity)
    envelope: Optional[AssumptionEnvelope] = None

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ParameterError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < MIN_CELLS:
            raise ParameterError(f"n must satisfy n >= {MIN_CELLS}, got {self.n}")
        for name in ("a", "b", "c", "delta", "p"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be positive and finite, got {value}")

    @property
    def alpha(self) -> float:
        return self.nonlinearity.alpha

    def resolved_envelope(self) -> AssumptionEnvelope:
        return self.envelope if self.envelope is not None else envelope_for_cubic(self.nonlinearity)


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Activator vector ``x`` and recovery vector ``y`` of the ring (read-only copies)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_vector(self.x, "x")
        y = _as_vector(self.y, "y")
        if x.shape != y.shape:
            raise ValueError(f"x and y lengths differ: {x.size} vs {y.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("state entries must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def zeros(cls, n: int) -> "NetworkState":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def synchronized(cls, n: int, x: float, y: float = 0.0) -> "NetworkState":
        return cls(np.full(n, float(x)), np.full(n, float(y)))

    @classmethod
    def from_vector(cls, z) -> "NetworkState":
        z = np.asarray(z, dtype=np.float64)
        n = z.size // 2
        return cls(z[:n], z[n:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    def norm_sq(self) -> float:
        return float(np.dot(self.x, self.x) + np.dot(self.y, self.y))

    def __eq__(self, other):
        if not isinstance(other, NetworkState):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    __hash__ = None


# ---------------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------------


def laplacian_periodic(x) -> np.ndarray:
    """Second difference ``x_{i-1} - 2 x_i + x_{i+1}`` on the ring.

    The coupling constant is not applied here.  Works along the last axis.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_ring(x)
    return np.roll(x, 1, axis=-1) - 2.0 * x + np.roll(x, -1, axis=-1)


def feedback_controls(x) -> np.ndarray:
    """Boundary feedback vector: ``u_1 = x_n - x_1``, ``u_n = -u_1``, zero elsewhere."""
    x = np.asarray(x, dtype=np.float64)
    _check_ring(x)
    u = np.zeros_like(x)
    gap = x[..., -1] - x[..., 0]
    u[..., 0] = gap
    u[..., -1] = -gap
    return u


def rhs(state: NetworkState, params: ModelParams) -> NetworkState:
    """Time derivative of the full network, returned as a state-shaped pair."""
    x, y = state.x, state.y
    _check_ring(x, params.n)
    dx = params.a * laplacian_periodic(x) + f_eval(x, params.nonlinearity) - params.b * y \
        + params.p * feedback_controls(x)
    dy = params.c * x - params.delta * y
    return NetworkState(dx, dy)


def divergence_residual(x) -> float:
    """Defect of the summation-by-parts identity on the ring.

    ``<L x, x> = -sum_i (x_i - x_{i-1})**2`` holds exactly in real arithmetic, so
    the returned value only measures rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_ring(x)
    lhs = float(np.dot(laplacian_periodic(x), x))
    jumps = x - np.roll(x, 1)
    return abs(lhs + float(np.dot(jumps, jumps)))


# ---------------------------------------------------------------------------
# Closed-form constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivedConstants:
    lam: float
    beta: float
    gamma: float
    c1: float
    c2: float
    q: float
    sync_threshold: float

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "beta": self.beta,
            "gamma": self.gamma,
            "C1": self.c1,
            "C2": self.c2,
            "Q": self.q,
            "sync_threshold": self.sync_threshold,
        }


def derived_constants(params: ModelParams) -> DerivedConstants:
    """Energy weight, completed-square constant, absorbing radius and sync threshold.

    ``c1 = delta / (2 b)`` makes the ``y`` damping in the weighted energy exactly
    ``-delta``; ``q`` is the squared radius of the absorbing ball and
    ``sync_threshold`` the squared boundary gap above which the difference
    energy is forced to decay.
    """
    env = params.resolved_envelope()
    b, c, delta, n = params.b, params.c, params.delta, params.n
    c1 = delta / (2.0 * b)
    quad = delta**2 / (2.0 * b) + delta / 2.0 + 2.0 * c**2 / delta
    c2 = b / (4.0 * delta * env.lam) * quad**2
    q = (1.0 + (n / delta) * (c2 + delta * env.beta / b)) / min(c1, 1.0)
    threshold = (1.0 + (delta + env.gamma + abs(c - b)) / params.p) * q
    return DerivedConstants(env.lam, env.beta, env.gamma, c1, c2, q, threshold)


def absorbing_entry_time(rho: float, params: ModelParams) -> float:
    """Time after which trajectories started in ``{|g|**2 <= rho}`` stay in the absorbing ball."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    c1 = params.delta / (2.0 * params.b)
    scaled = rho * max(c1, 1.0)
    if scaled <= 1.0:
        return 0.0
    return math.log(scaled) / params.delta
