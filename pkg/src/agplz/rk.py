"""
Embedded explicit Runge-Kutta integration for the two-level equations of motion.

Two Dormand-Prince pairs are available: ``dopri5`` (5th order with a 4th
order estimate) and ``dop853`` (8th order with the Hairer 5/3 combined
estimate). The Butcher tableaus come from :mod:`scipy.integrate`; the
stepping loop is compiled with numba since a single sweep over
``tau in [-200, 200]`` takes a few hundred thousand steps.

Right-hand sides are selected by an integer ``kind`` so the whole loop
stays cacheable:

* ``DIABATIC_IP``  diabatic amplitudes in the interaction picture of ``tau sigma_z``
* ``DIABATIC``     plain diabatic amplitudes
* ``FROZEN``       plain amplitudes with ``h`` frozen at ``par[2]``
* ``ADIABATIC``    adiabatic coefficients plus three phase integrals
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy.integrate import DOP853, RK45

from .errors import StepSizeUnderflow

DIABATIC_IP = 0
DIABATIC = 1
FROZEN = 2
ADIABATIC = 3

# Fraction of the requested tolerance used as the per-step error target.
# Keeps accumulated norm drift over ~1e6 steps below 100 tol.
LOCAL_ERROR_FRACTION = 0.3


@dataclass(frozen=True)
class Tableau:
    name: str
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E5: np.ndarray
    E3: np.ndarray
    error_order: int


def _square(a, n):
    out = np.zeros((n, n))
    out[: a.shape[0], : a.shape[1]] = a
    return out


TABLEAUS = {
    "dopri5": Tableau("dopri5", _square(RK45.A, RK45.n_stages), RK45.B.copy(), RK45.C.copy(),
                      RK45.E.copy(), np.zeros(0), RK45.error_estimator_order),
    "dop853": Tableau("dop853", _square(DOP853.A, DOP853.n_stages), DOP853.B.copy(), DOP853.C.copy(),
                      DOP853.E5.copy(), DOP853.E3.copy(), 7),
}


@nb.njit(cache=True)
def real_axis_frame(t, delta, a):
    """Gap, Berry connections and couplings of the eta family on the real axis.

    Smooth gauge |1> = (cos(T/2), e^{i phi} sin(T/2)), |0> = (-sin(T/2), e^{i phi} cos(T/2))
    with polar angle T and azimuth phi of the field vector (1, -b, t), b = a / (1 + t^2).
    Returns (e, a0, a1, p01, p10).
    """
    w = 1.0 + t * t
    b = a / w
    db = -2.0 * a * t / (w * w)
    rho2 = 1.0 + b * b
    rho = math.sqrt(rho2)
    e = math.sqrt(rho2 + t * t)
    cos_t = t / e
    sin_t = rho / e
    dtheta = -(rho2 - t * b * db) / (e * e * rho)
    dphi = -db / rho2
    a0 = 0.5 * dphi * (1.0 + cos_t)
    a1 = 0.5 * dphi * (1.0 - cos_t)
    p01 = complex(-0.5 * dtheta, -0.5 * dphi * sin_t)
    p10 = complex(0.5 * dtheta, -0.5 * dphi * sin_t)
    return e, a0, a1, p01, p10


@nb.njit(cache=True)
def _rhs(kind, t, y, par, out):
    delta = par[0]
    a = par[1]
    if kind == ADIABATIC:
        e, a0, a1, p01, p10 = real_axis_frame(t, delta, a)
        # y = (c0, c1, int e1, int a0, int a1)
        arg = 2.0 * y[2].real / delta + (y[4].real - y[3].real)
        ph = complex(math.cos(arg), math.sin(arg))
        out[0] = p01 * y[1] / ph
        out[1] = p10 * y[0] * ph
        out[2] = e
        out[3] = a0
        out[4] = a1
        return
    tt = t
    if kind == FROZEN:
        tt = par[2]
    b = a / (1.0 + tt * tt)
    h01 = complex(1.0, b)
    h10 = complex(1.0, -b)
    if kind == DIABATIC_IP:
        arg = t * t / delta
        ph = complex(math.cos(arg), math.sin(arg))
        out[0] = complex(0.0, -1.0 / delta) * (h01 * ph * y[1])
        out[1] = complex(0.0, -1.0 / delta) * (h10 / ph * y[0])
    else:
        out[0] = complex(0.0, -1.0 / delta) * (tt * y[0] + h01 * y[1])
        out[1] = complex(0.0, -1.0 / delta) * (h10 * y[0] - tt * y[1])


@nb.njit(cache=True)
def _integrate(kind, par, y0, t0, checkpoints, tol, A, B, C, E5, E3, error_order, h0):
    n = y0.shape[0]
    s = B.shape[0]
    dual = E3.shape[0] > 0
    ncp = checkpoints.shape[0]
    states = np.zeros((ncp, n), dtype=np.complex128)
    K = np.zeros((s + 1, n), dtype=np.complex128)
    y = y0.copy()
    yt = np.empty(n, dtype=np.complex128)
    yn = np.empty(n, dtype=np.complex128)
    t = t0
    span = abs(checkpoints[ncp - 1] - t0)
    hmin = 1e-14 * span
    k_exp = error_order + 1.0
    _rhs(kind, t, y, par, K[0])
    h = h0
    err_old = 1e-4
    n_acc = 0
    n_rej = 0
    status = 0
    icp = 0
    while icp < ncp and checkpoints[icp] <= t:
        states[icp] = y
        icp += 1
    while icp < ncp:
        target = checkpoints[icp]
        hs = h
        landing = False
        if t + hs >= target - 1e-13 * span:
            hs = target - t
            landing = True
        for j in range(1, s):
            for i in range(n):
                acc = 0j
                for m in range(j):
                    acc += A[j, m] * K[m, i]
                yt[i] = y[i] + hs * acc
            _rhs(kind, t + C[j] * hs, yt, par, K[j])
        for i in range(n):
            acc = 0j
            for m in range(s):
                acc += B[m] * K[m, i]
            yn[i] = y[i] + hs * acc
        _rhs(kind, t + hs, yn, par, K[s])
        e5 = 0.0
        e3 = 0.0
        for i in range(n):
            sc = tol * max(1.0, abs(y[i]), abs(yn[i]))
            acc5 = 0j
            for m in range(s + 1):
                acc5 += E5[m] * K[m, i]
            e5 += (abs(acc5) / sc) ** 2
            if dual:
                acc3 = 0j
                for m in range(s + 1):
                    acc3 += E3[m] * K[m, i]
                e3 += (abs(acc3) / sc) ** 2
        if dual:
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = abs(hs) * e5 / math.sqrt((e5 + 0.01 * e3) * n)
        else:
            err = abs(hs) * math.sqrt(e5 / n)
        if err <= 1.0:
            t = target if landing else t + hs
            for i in range(n):
                y[i] = yn[i]
                K[0, i] = K[s, i]
            n_acc += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * err ** (-0.7 / k_exp) * err_old ** (0.4 / k_exp)
            fac = min(5.0, max(0.2, fac))
            err_old = max(err, 1e-4)
            if landing:
                states[icp] = y
                icp += 1
                # keep the natural step when a checkpoint clipped it
                h = max(h, hs * fac)
            else:
                h = hs * fac
        else:
            n_rej += 1
            h = hs * max(0.2, 0.9 * err ** (-1.0 / k_exp))
        if h < hmin:
            status = 1
            break
    return states, n_acc, n_rej, status


@dataclass(frozen=True)
class StepStats:
    n_steps: int
    n_rejected: int
    method: str
    tol: float


def integrate(kind: int, par, y0, t0: float, checkpoints, tol: float, method: str = "dop853",
              h0: float = 1e-3):
    """Integrate from ``t0`` through the increasing ``checkpoints``.

    Returns the states at every checkpoint (one row each) and the step
    statistics. Raises ``StepSizeUnderflow`` if the step collapses below
    ``1e-14 |t1 - t0|``.
    """
    tab = TABLEAUS[method]
    cps = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    if cps.size == 0 or np.any(np.diff(cps) < 0) or cps[0] < t0:
        raise ValueError("checkpoints must be non-empty, increasing and >= t0")
    if cps[-1] <= t0:
        raise ValueError("integration interval is empty")
    states, n_acc, n_rej, status = _integrate(
        kind, np.asarray(par, dtype=float), np.asarray(y0, dtype=np.complex128), float(t0), cps,
        float(tol) * LOCAL_ERROR_FRACTION, tab.A, tab.B, tab.C, tab.E5, tab.E3, tab.error_order, float(h0))
    if status:
        raise StepSizeUnderflow(f"step below 1e-14 of the interval after {n_acc} steps")
    return states, StepStats(int(n_acc), int(n_rej), method, float(tol))
