"""Inner loops of the Euler-Maruyama integrator and the increment likelihood.

Each kernel exists twice: a scalar loop (``*_loop``) compiled with numba,
and a vectorized numpy form (``*_numpy``) that applies the same arithmetic
in the same order across trajectories. The two paths are bit-identical on
the integrator; the likelihood sums differ only in summation order.

All kernels take the noise as an explicit array so that random-number
generation stays outside the compiled code.
"""
import math

import numpy as np

from . import _accel


def em_block_loop(x, eta, alpha, beta, gamma, s0, s1, dt, stride, rec):
    """Advance every row of ``x`` through ``eta.shape[1]`` reflected EM steps.

    The state after every ``stride``-th step is written into ``rec``.
    ``x`` is updated in place.
    """
    sqdt = math.sqrt(dt)
    n, m = eta.shape
    for i in range(n):
        xi = x[i]
        j = 0
        for k in range(m):
            mu = alpha * xi * (1.0 - xi) - beta * xi * xi + gamma
            sig = s0 + s1 * xi
            y = xi + mu * dt + sig * sqdt * eta[i, k]
            while y < 0.0 or y > 1.0:
                if y < 0.0:
                    y = -y
                else:
                    y = 2.0 - y
            xi = y
            if (k + 1) % stride == 0:
                rec[i, j] = xi
                j += 1
        x[i] = xi


def _reflect_array(y):
    while True:
        low = y < 0.0
        high = y > 1.0
        if not (low.any() or high.any()):
            return y
        y = np.where(low, -y, np.where(high, 2.0 - y, y))


def em_block_numpy(x, eta, alpha, beta, gamma, s0, s1, dt, stride, rec):
    sqdt = math.sqrt(dt)
    m = eta.shape[1]
    xi = x.copy()
    j = 0
    for k in range(m):
        mu = alpha * xi * (1.0 - xi) - beta * xi * xi + gamma
        sig = s0 + s1 * xi
        xi = _reflect_array(xi + mu * dt + sig * sqdt * eta[:, k])
        if (k + 1) % stride == 0:
            rec[:, j] = xi
            j += 1
    x[:] = xi


def passage_block_loop(x, eta, alpha, beta, gamma, s0, s1, dt, x_harm, step0, max_step, hit):
    """Reflected EM with absorption at ``x_harm``.

    Rows with ``hit[i] >= 0`` are skipped. A row is absorbed on the first
    step whose unreflected value reaches ``x_harm``; ``hit[i]`` then holds
    the 1-based global step index. Steps beyond ``max_step`` are not taken.
    """
    sqdt = math.sqrt(dt)
    n, m = eta.shape
    for i in range(n):
        if hit[i] >= 0:
            continue
        xi = x[i]
        for k in range(m):
            step = step0 + k + 1
            if step > max_step:
                break
            mu = alpha * xi * (1.0 - xi) - beta * xi * xi + gamma
            sig = s0 + s1 * xi
            y = xi + mu * dt + sig * sqdt * eta[i, k]
            if y >= x_harm:
                hit[i] = step
                xi = y
                break
            while y < 0.0 or y > 1.0:
                if y < 0.0:
                    y = -y
                else:
                    y = 2.0 - y
            xi = y
        x[i] = xi


def passage_block_numpy(x, eta, alpha, beta, gamma, s0, s1, dt, x_harm, step0, max_step, hit):
    sqdt = math.sqrt(dt)
    m = eta.shape[1]
    for k in range(m):
        step = step0 + k + 1
        if step > max_step:
            break
        live = np.flatnonzero(hit < 0)
        if live.size == 0:
            break
        xi = x[live]
        mu = alpha * xi * (1.0 - xi) - beta * xi * xi + gamma
        sig = s0 + s1 * xi
        y = xi + mu * dt + sig * sqdt * eta[live, k]
        absorbed = y >= x_harm
        hit[live[absorbed]] = step
        x[live] = np.where(absorbed, y, _reflect_array(np.where(absorbed, 0.0, y)))


def loglik_loop(x, dx, dt, alpha, beta, gamma, s0, s1):
    """Sum of Gaussian log-densities of increments under the EM transition."""
    total = 0.0
    log2pi = math.log(2.0 * math.pi)
    for i in range(x.shape[0]):
        xi = x[i]
        mu = alpha * xi * (1.0 - xi) - beta * xi * xi + gamma
        sig = s0 + s1 * xi
        var = sig * sig * dt[i]
        r = dx[i] - mu * dt[i]
        total += -0.5 * (log2pi + math.log(var)) - r * r / (2.0 * var)
    return total


def loglik_numpy(x, dx, dt, alpha, beta, gamma, s0, s1):
    mu = alpha * x * (1.0 - x) - beta * x * x + gamma
    sig = s0 + s1 * x
    var = sig * sig * dt
    r = dx - mu * dt
    return float(np.sum(-0.5 * (math.log(2.0 * math.pi) + np.log(var)) - r * r / (2.0 * var)))


if _accel.HAVE_NUMBA:
    em_block_jit = _accel.njit(em_block_loop)
    passage_block_jit = _accel.njit(passage_block_loop)
    loglik_jit = _accel.njit(loglik_loop)
else:  # pragma: no cover
    em_block_jit = passage_block_jit = loglik_jit = None

if _accel.USE_NUMBA:
    em_block = em_block_jit
    passage_block = passage_block_jit
    loglik = loglik_jit
else:
    em_block = em_block_numpy
    passage_block = passage_block_numpy
    loglik = loglik_numpy
