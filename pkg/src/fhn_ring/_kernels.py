"""Compiled stepping kernels for the ring network.

The arithmetic mirrors :func:`fhn_ring.model.rhs` operation for operation, so
the compiled path and the numpy path agree to the last bit when no fused
multiply-add contraction is applied (numba does not contract without
``fastmath``).
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau.
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# fifth-order weights minus embedded fourth-order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True)
def field(x, y, a, b, c, delta, p, alpha, dx, dy):
    n = x.shape[0]
    gap = x[n - 1] - x[0]
    for i in range(n):
        left = x[i - 1] if i > 0 else x[n - 1]
        right = x[i + 1] if i < n - 1 else x[0]
        s = x[i]
        lap = left - 2.0 * s + right
        if i == 0:
            u = gap
        elif i == n - 1:
            u = -gap
        else:
            u = 0.0
        dx[i] = a * lap + s * (s - alpha) * (1.0 - s) - b * y[i] + p * u
        dy[i] = c * s - delta * y[i]


@njit(cache=True)
def rk4_run(x0, y0, a, b, c, delta, p, alpha, dt, nsteps, stride):
    """Fixed-step RK4 with sampling every ``stride`` steps plus the last step.

    Returns ``(steps, xs, ys, count, fail_step)``; ``fail_step`` is 0 on success,
    otherwise the index of the first step that produced a non-finite value.
    """
    n = x0.shape[0]
    nrec = nsteps // stride + 2
    steps = np.empty(nrec, dtype=np.int64)
    xs = np.empty((nrec, n))
    ys = np.empty((nrec, n))
    x = x0.copy()
    y = y0.copy()
    k1x = np.empty(n); k1y = np.empty(n)
    k2x = np.empty(n); k2y = np.empty(n)
    k3x = np.empty(n); k3y = np.empty(n)
    k4x = np.empty(n); k4y = np.empty(n)
    tx = np.empty(n); ty = np.empty(n)
    half = dt / 2.0
    sixth = dt / 6.0
    steps[0] = 0
    xs[0] = x
    ys[0] = y
    m = 1
    for k in range(1, nsteps + 1):
        field(x, y, a, b, c, delta, p, alpha, k1x, k1y)
        for i in range(n):
            tx[i] = x[i] + half * k1x[i]
            ty[i] = y[i] + half * k1y[i]
        field(tx, ty, a, b, c, delta, p, alpha, k2x, k2y)
        for i in range(n):
            tx[i] = x[i] + half * k2x[i]
            ty[i] = y[i] + half * k2y[i]
        field(tx, ty, a, b, c, delta, p, alpha, k3x, k3y)
        for i in range(n):
            tx[i] = x[i] + dt * k3x[i]
            ty[i] = y[i] + dt * k3y[i]
        field(tx, ty, a, b, c, delta, p, alpha, k4x, k4y)
        finite = True
        for i in range(n):
            x[i] = x[i] + sixth * (((k1x[i] + 2.0 * k2x[i]) + 2.0 * k3x[i]) + k4x[i])
            y[i] = y[i] + sixth * (((k1y[i] + 2.0 * k2y[i]) + 2.0 * k3y[i]) + k4y[i])
            if not (np.isfinite(x[i]) and np.isfinite(y[i])):
                finite = False
        if not finite:
            return steps[:m], xs[:m], ys[:m], m, k
        if k % stride == 0 or k == nsteps:
            steps[m] = k
            xs[m] = x
            ys[m] = y
            m += 1
    return steps[:m], xs[:m], ys[:m], m, 0


@njit(cache=True)
def dopri_step(x, y, h, a, b, c, delta, p, alpha, atol, rtol):
    """One Dormand-Prince step; returns ``(x_new, y_new, err)`` with RMS-scaled error."""
    n = x.shape[0]
    kx = np.empty((7, n))
    ky = np.empty((7, n))
    tx = np.empty(n)
    ty = np.empty(n)
    field(x, y, a, b, c, delta, p, alpha, kx[0], ky[0])
    for i in range(n):
        tx[i] = x[i] + h * (_A21 * kx[0, i])
        ty[i] = y[i] + h * (_A21 * ky[0, i])
    field(tx, ty, a, b, c, delta, p, alpha, kx[1], ky[1])
    for i in range(n):
        tx[i] = x[i] + h * (_A31 * kx[0, i] + _A32 * kx[1, i])
        ty[i] = y[i] + h * (_A31 * ky[0, i] + _A32 * ky[1, i])
    field(tx, ty, a, b, c, delta, p, alpha, kx[2], ky[2])
    for i in range(n):
        tx[i] = x[i] + h * (_A41 * kx[0, i] + _A42 * kx[1, i] + _A43 * kx[2, i])
        ty[i] = y[i] + h * (_A41 * ky[0, i] + _A42 * ky[1, i] + _A43 * ky[2, i])
    field(tx, ty, a, b, c, delta, p, alpha, kx[3], ky[3])
    for i in range(n):
        tx[i] = x[i] + h * (_A51 * kx[0, i] + _A52 * kx[1, i] + _A53 * kx[2, i] + _A54 * kx[3, i])
        ty[i] = y[i] + h * (_A51 * ky[0, i] + _A52 * ky[1, i] + _A53 * ky[2, i] + _A54 * ky[3, i])
    field(tx, ty, a, b, c, delta, p, alpha, kx[4], ky[4])
    for i in range(n):
        tx[i] = x[i] + h * (_A61 * kx[0, i] + _A62 * kx[1, i] + _A63 * kx[2, i]
                            + _A64 * kx[3, i] + _A65 * kx[4, i])
        ty[i] = y[i] + h * (_A61 * ky[0, i] + _A62 * ky[1, i] + _A63 * ky[2, i]
                            + _A64 * ky[3, i] + _A65 * ky[4, i])
    field(tx, ty, a, b, c, delta, p, alpha, kx[5], ky[5])
    xn = np.empty(n)
    yn = np.empty(n)
    for i in range(n):
        xn[i] = x[i] + h * (_B1 * kx[0, i] + _B3 * kx[2, i] + _B4 * kx[3, i]
                            + _B5 * kx[4, i] + _B6 * kx[5, i])
        yn[i] = y[i] + h * (_B1 * ky[0, i] + _B3 * ky[2, i] + _B4 * ky[3, i]
                            + _B5 * ky[4, i] + _B6 * ky[5, i])
    field(xn, yn, a, b, c, delta, p, alpha, kx[6], ky[6])
    acc = 0.0
    for i in range(n):
        ex = h * (_E1 * kx[0, i] + _E3 * kx[2, i] + _E4 * kx[3, i]
                  + _E5 * kx[4, i] + _E6 * kx[5, i] + _E7 * kx[6, i])
        ey = h * (_E1 * ky[0, i] + _E3 * ky[2, i] + _E4 * ky[3, i]
                  + _E5 * ky[4, i] + _E6 * ky[5, i] + _E7 * ky[6, i])
        sx = atol + rtol * max(abs(x[i]), abs(xn[i]))
        sy = atol + rtol * max(abs(y[i]), abs(yn[i]))
        acc += (ex / sx) ** 2 + (ey / sy) ** 2
    err = np.sqrt(acc / (2 * n))
    return xn, yn, err
