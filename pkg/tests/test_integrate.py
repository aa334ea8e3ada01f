import math

import numpy as np
import pytest

from fhn_ring.integrate import (
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    convergence_order,
    estimate_order,
    integrate_adaptive,
    integrate_fixed,
    rk4_step,
)
from fhn_ring.model import ModelParams, NetworkState, rhs
from fhn_ring.sweep import random_initial


def network_deriv(params):
    return lambda t, s: rhs(s, params)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0)
    with pytest.raises(ValueError):
        IntegratorConfig(sample_stride=0)
    with pytest.raises(ValueError):
        IntegratorConfig(dt_min=1.0, dt_max=0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")


def test_rk4_step_scalar_decay():
    h = 0.1
    taylor = 1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24
    out = rk4_step(lambda t, z: -z, np.array([1.0]), 0.0, h)
    assert out[0] == pytest.approx(taylor, rel=1e-15)
    assert out[0] == pytest.approx(0.9048375, abs=1e-7)


def test_rk4_step_equilibrium(baseline):
    s = NetworkState.zeros(4)
    assert rk4_step(network_deriv(baseline), s, 0.0, 0.01) == s


def test_rk4_step_consistency(baseline):
    s = random_initial(4, 1.0, 3)
    d = rhs(s, baseline)
    for dt in (1e-3, 1e-4, 1e-5):
        out = rk4_step(network_deriv(baseline), s, 0.0, dt)
        # one step equals z + dt f(z) + O(dt**2)
        assert np.max(np.abs(out.as_vector() - s.as_vector() - dt * d.as_vector())) < 50 * dt**2


def test_rk4_step_non_finite_derivative():
    with pytest.raises(IntegrationError):
        rk4_step(lambda t, z: z * np.inf, np.array([1.0]), 0.0, 0.1)


def test_compiled_kernel_matches_reference_path(baseline):
    s = random_initial(4, 2.0, 7)
    cfg = IntegratorConfig(dt=1e-3, t_end=0.5, sample_stride=1)
    traj = integrate_fixed(baseline, s, cfg)
    ref = s
    for k in range(500):
        ref = rk4_step(network_deriv(baseline), ref, k * 1e-3, 1e-3)
    assert np.array_equal(traj.final.x, ref.x)
    assert np.array_equal(traj.final.y, ref.y)


def test_fixed_sampling_layout(baseline):
    cfg = IntegratorConfig(dt=0.01, t_end=1.05, sample_stride=10)
    traj = integrate_fixed(baseline, random_initial(4, 1.0, 0), cfg)
    assert traj.step_count == 105
    assert traj.times[0] == 0.0
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj) == 12  # steps 0, 10, ..., 100, 105
    assert abs(traj.times[-1] - cfg.t_end) < cfg.dt
    assert traj.initial == random_initial(4, 1.0, 0)


def test_fixed_synchronized_stays_exact(baseline):
    cfg = IntegratorConfig(dt=0.001, t_end=1.0, sample_stride=1)
    traj = integrate_fixed(baseline, NetworkState.synchronized(4, 0.8, -0.3), cfg)
    assert np.all(traj.xs == traj.xs[:, :1])
    assert np.all(traj.ys == traj.ys[:, :1])


def test_fixed_zero_stays_zero(baseline):
    traj = integrate_fixed(baseline, NetworkState.zeros(4), IntegratorConfig(t_end=5.0))
    assert not np.any(traj.xs) and not np.any(traj.ys)


def test_fixed_is_deterministic(baseline):
    s = random_initial(4, 2.0, 11)
    cfg = IntegratorConfig(t_end=20.0)
    assert integrate_fixed(baseline, s, cfg) == integrate_fixed(baseline, s, cfg)


def test_fixed_step_halving_order(baseline):
    s = random_initial(4, 1.0, 5)
    t_end, dt = 2.0, 0.02
    finals = [integrate_fixed(baseline, s, IntegratorConfig(dt=dt / 2**k, t_end=t_end)).final.as_vector()
              for k in range(5)]
    ref = finals[-1]
    e = [np.max(np.abs(f - ref)) for f in finals[:3]]
    assert math.log2(e[0] / e[1]) >= 3.8
    assert math.log2(e[1] / e[2]) >= 3.8


def test_fixed_blow_up_reports_time():
    params = ModelParams()
    with pytest.raises(IntegrationError) as info:
        integrate_fixed(params, NetworkState.synchronized(4, 50.0), IntegratorConfig(dt=1.0, t_end=50))
    err = info.value
    assert err.time > 0
    assert isinstance(err.trajectory, Trajectory)
    assert len(err.trajectory) >= 1


def test_adaptive_matches_fixed(baseline):
    s = random_initial(4, 2.0, 1)
    fixed = integrate_fixed(baseline, s, IntegratorConfig(dt=1e-4, t_end=10.0))
    adapt = integrate_adaptive(baseline, s, IntegratorConfig(t_end=10.0, rtol=1e-8, atol=1e-12))
    assert adapt.times[-1] == 10.0
    assert np.max(np.abs(adapt.final.as_vector() - fixed.final.as_vector())) < 1e-6


def test_adaptive_equilibrium_never_rejects(baseline):
    traj = integrate_adaptive(baseline, NetworkState.zeros(4), IntegratorConfig(t_end=10.0))
    assert traj.rejected_steps == 0
    assert not np.any(traj.xs)


def test_adaptive_error_shrinks_with_rtol(baseline):
    s = random_initial(4, 2.0, 2)
    ref = integrate_fixed(baseline, s, IntegratorConfig(dt=2e-4, t_end=10.0)).final.as_vector()
    errs = []
    for rtol in (1e-5, 1e-7):
        traj = integrate_adaptive(baseline, s, IntegratorConfig(t_end=10.0, rtol=rtol, atol=1e-14))
        errs.append(np.max(np.abs(traj.final.as_vector() - ref)))
    assert errs[0] >= 10 * errs[1]


def test_adaptive_dt_min_failure(baseline):
    cfg = IntegratorConfig(t_end=10.0, rtol=1e-14, atol=1e-16, dt=0.1, dt_min=0.05, dt_max=0.1)
    with pytest.raises(IntegrationError, match="dt_min"):
        integrate_adaptive(baseline, random_initial(4, 2.0, 0), cfg)


def test_adaptive_records_every_stride(baseline):
    cfg = IntegratorConfig(t_end=5.0, sample_stride=3)
    traj = integrate_adaptive(baseline, random_initial(4, 1.0, 0), cfg)
    assert len(traj) == 1 + math.ceil(traj.step_count / 3)


def test_convergence_order_network(baseline):
    order = convergence_order(baseline, random_initial(4, 1.0, 0), 2.0, [0.02, 0.01, 0.005, 0.0025])
    assert 3.8 <= order <= 4.2


def test_convergence_order_linear_scalar():
    def solve(dt):
        z = np.array([1.0])
        for k in range(round(1.0 / dt)):
            z = rk4_step(lambda t, v: -v, z, k * dt, dt)
        return z

    assert 3.8 <= estimate_order([0.1, 0.05, 0.025, 0.0125], solve) <= 4.2


def test_convergence_order_preconditions(baseline):
    s = random_initial(4, 1.0, 0)
    with pytest.raises(ValueError):
        convergence_order(baseline, s, 1.0, [0.01, 0.01, 0.005])
    with pytest.raises(ValueError):
        convergence_order(baseline, s, 1.0, [0.01, 0.005])


def test_convergence_order_zero_error_sentinel(baseline):
    assert convergence_order(baseline, NetworkState.zeros(4), 1.0, [0.02, 0.01, 0.005]) == math.inf
