"""Acceptance criteria; each test logs one PASS/FAIL line to the terminal summary."""

import math
import time

import numpy as np
import pytest

from fhn_ring import cli
from fhn_ring.diagnostics import (
    check_dissipative_bound,
    check_sync_inequality,
    classify_sync,
    diagnostics_series,
    feedback_sum_identity_residual,
)
from fhn_ring.integrate import IntegratorConfig, convergence_order, integrate_fixed
from fhn_ring.model import (
    CubicNonlinearity,
    ModelParams,
    NetworkState,
    absorbing_entry_time,
    derived_constants,
    divergence_residual,
    envelope_for_cubic,
    verify_envelope,
)
from fhn_ring.sweep import SweepGrid, random_initial

from conftest import ACCEPTANCE_LINES

BASELINE = ModelParams(n=4, a=1.0, b=1.0, c=0.1, delta=0.2, p=1.0, nonlinearity=CubicNonlinearity(0.5))


def record(tag, ok, detail):
    ACCEPTANCE_LINES.append(f"{tag:>3} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def random_ring_vectors(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(4, 65))
        yield rng.standard_normal(n) * 10.0 ** rng.uniform(-3, 3)


@pytest.fixture(scope="module")
def bounded_runs():
    """Twenty baseline trajectories from random states with squared norm at most 100."""
    radius = math.sqrt(100.0 / (2 * BASELINE.n))  # box corner sits on the sphere
    cfg = IntegratorConfig(dt=1e-3, t_end=200.0)
    start = time.perf_counter()
    runs = []
    for seed in range(20):
        init = random_initial(BASELINE.n, radius, 1000 + seed)
        assert init.norm_sq() <= 100.0
        runs.append(integrate_fixed(BASELINE, init, cfg))
    return runs, time.perf_counter() - start


def test_c01_divergence_identity():
    start = time.perf_counter()
    worst = max(divergence_residual(x) / (1 + np.dot(x, x)) for x in random_ring_vectors(10_000, 1))
    elapsed = time.perf_counter() - start
    record("C1", worst < 1e-12 and elapsed < 5,
           f"divergence identity: max residual/(1+|x|^2) = {worst:.2e} (< 1e-12), {elapsed:.2f}s (< 5s)")


def test_c02_feedback_sum_identity():
    start = time.perf_counter()
    worst = 0.0
    for x in random_ring_vectors(10_000, 2):
        s = NetworkState(x, np.zeros_like(x))
        worst = max(worst, feedback_sum_identity_residual(s, BASELINE.p) / (1 + np.dot(x, x)))
    elapsed = time.perf_counter() - start
    record("C2", worst < 1e-12 and elapsed < 5,
           f"feedback-sum identity: max residual/(1+|x|^2) = {worst:.2e} (< 1e-12), {elapsed:.2f}s (< 5s)")


def test_c03_assumption_envelope():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    failures = []
    for alpha in rng.uniform(0, 1, 100):
        nl = CubicNonlinearity(float(alpha))
        env = envelope_for_cubic(nl)
        assert (env.lam, env.beta, env.gamma) == (0.5, 8 * (alpha + 1) ** 4, 1 + alpha + alpha**2)
        if verify_envelope(nl, env, -20.0, 20.0, 100_000).size:
            failures.append(alpha)
    elapsed = time.perf_counter() - start
    record("C3", not failures and elapsed < 30,
           f"envelope holds for 100 random alpha on [-20,20] x 1e5 samples: "
           f"{len(failures)} failures, {elapsed:.2f}s (< 30s)")


def test_c04_constants_reproduction():
    k = derived_constants(ModelParams(n=4, b=1.0, c=0.1, delta=0.2, p=10.0,
                                      nonlinearity=CubicNonlinearity(0.5)))
    expected = {"c1": 0.1, "c2": 0.121, "q": 1654.2, "sync_threshold": 2125.647}
    rel = {key: abs(getattr(k, key) - v) / v for key, v in expected.items()}
    record("C4", all(r <= 1e-12 for r in rel.values()),
           "constants C1=%.17g C2=%.17g Q=%.17g threshold=%.17g, max rel err %.1e (<= 1e-12)"
           % (k.c1, k.c2, k.q, k.sync_threshold, max(rel.values())))


def test_c05_dissipative_bound(bounded_runs):
    runs, elapsed = bounded_runs
    start = time.perf_counter()
    violations = sum(check_dissipative_bound(traj, BASELINE, 1e-6).size for traj in runs)
    elapsed += time.perf_counter() - start
    record("C5", violations == 0 and elapsed < 60,
           f"dissipative bound: {violations} violations over 20 runs at tol 1e-6, {elapsed:.2f}s (< 60s)")


def test_c06_absorbing_ball(bounded_runs):
    runs, _ = bounded_runs
    q = derived_constants(BASELINE).q
    t_b = absorbing_entry_time(100.0, BASELINE)
    worst = 0.0
    for traj in runs:
        s = diagnostics_series(traj, BASELINE)
        worst = max(worst, float(np.max(s.plain_energy[s.times >= t_b])))
    record("C6", worst < q and abs(t_b - 23.0259) < 1e-4,
           f"absorbing ball: max |g|^2 after T_B={t_b:.4f} is {worst:.3e} < Q={q:g}")


def test_c07_conditional_decay(bounded_runs):
    runs, _ = bounded_runs
    reports = [check_sync_inequality(traj, BASELINE, slack=1e-4, rel_slack=1e-4) for traj in runs]
    failures = sum(r.failure_times.size for r in reports)
    vacuous = all(r.premises_never_active for r in reports)
    checked = sum(r.checked for r in reports)
    note = "vacuous: premises never active" if vacuous else f"{checked} samples checked"
    record("C7", failures == 0, f"conditional decay inequality: {failures} failures ({note})")


def test_c08_synchronization_decay():
    params = ModelParams(n=4, a=5.0, b=1.0, c=0.1, delta=0.2, p=1.0, nonlinearity=CubicNonlinearity(0.5))
    start = time.perf_counter()
    traj = integrate_fixed(params, random_initial(4, 2.0, 8), IntegratorConfig())
    verdict = classify_sync(traj, params)
    v = traj.xs - np.roll(traj.xs, 1, axis=1)
    w = traj.ys - np.roll(traj.ys, 1, axis=1)
    norms = np.sqrt(np.sum(traj.xs**2 + traj.ys**2, axis=1))
    telescoping = bool(np.all(np.abs(v.sum(axis=1)) <= 1e-12 * norms)
                       and np.all(np.abs(w.sum(axis=1)) <= 1e-12 * norms))
    gap_identity = bool(np.all(traj.xs[:, -1] - traj.xs[:, 0] == -v[:, 0]))
    elapsed = time.perf_counter() - start
    ok = (verdict.synchronized and verdict.fitted_rate is not None and verdict.fitted_rate > 0
          and telescoping and gap_identity and elapsed < 30)
    record("C8", ok,
           f"synchronization (a=5): synchronized={verdict.synchronized} t_sync={verdict.t_sync} "
           f"fitted rate={verdict.fitted_rate:.4f} telescoping={telescoping} gap identity={gap_identity}, "
           f"{elapsed:.2f}s (< 30s)")


def test_c09_integrator_order():
    start = time.perf_counter()
    order = convergence_order(BASELINE, random_initial(4, 1.0, 0), 2.0, [0.02, 0.01, 0.005, 0.0025])
    elapsed = time.perf_counter() - start
    record("C9", 3.8 <= order <= 4.2 and elapsed < 30,
           f"RK4 observed order {order:.4f} in [3.8, 4.2], {elapsed:.2f}s (< 30s)")


def test_c10_sweep_determinism(tmp_path):
    grid = SweepGrid([0.1, 1.0, 10.0], [1.0, 5.0], [0.5], [4], [0, 1, 2], base=BASELINE,
                     init_radius=2.0, integ=IntegratorConfig())
    cfg = cli.RunConfig("sweep", BASELINE, grid.integ, sweep=grid)
    start = time.perf_counter()
    assert cli.cmd_sweep(cfg, tmp_path / "one", workers=1) == 0
    assert cli.cmd_sweep(cfg, tmp_path / "eight", workers=8) == 0
    elapsed = time.perf_counter() - start
    one = (tmp_path / "one_sweep.csv").read_bytes()
    eight = (tmp_path / "eight_sweep.csv").read_bytes()
    rows = [line for line in one.decode().splitlines() if not line.startswith("#")]
    record("C10", one == eight and len(rows) == 19 and elapsed < 120,
           f"18-case sweep CSV identical for 1 and 8 workers: {one == eight}, "
           f"{len(rows) - 1} rows, {elapsed:.2f}s (< 120s)")
