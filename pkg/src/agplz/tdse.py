"""
Real-time propagation of ``i delta d_tau psi = h(tau) psi`` for the eta family.

Two frames are provided and cross-check each other:

* diabatic: the 2-component state in the sigma_z basis, integrated in the
  interaction picture of ``tau sigma_z`` (the fast diagonal phase is removed
  analytically and restored on output);
* adiabatic: the coefficients ``c_n`` of the instantaneous eigenstates,
  with the dynamical and geometric phase integrals carried as extra ODE
  components.

The transition probability is ``|<1(+T)|psi(+T)>|^2`` for a run started in
``|0(-T)>``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import rk
from .model import AdiabaticParams

DEFAULT_TAU_MAX = 200.0
DEFAULT_TOL = 1e-10
TOL_RANGE = (1e-13, 1e-4)


class Frame(str, enum.Enum):
    DIABATIC = "diabatic"
    ADIABATIC = "adiabatic"


@dataclass(frozen=True)
class StateVector:
    psi: np.ndarray
    tau: float
    stats: Optional[rk.StepStats] = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))


@dataclass(frozen=True)
class AmplitudePair:
    """Adiabatic coefficients with their phase bookkeeping at time ``tau``.

    ``dyn_n = int e_n dtau`` and ``geo_n = int a_n dtau`` are measured from
    ``tau0``; the state is ``sum_n c_n exp(-i (dyn_n / delta + geo_n)) |n>``.
    """

    c0: complex
    c1: complex
    dyn0: float
    dyn1: float
    geo0: float
    geo1: float
    tau: float
    delta: float
    stats: Optional[rk.StepStats] = None

    @property
    def phase0(self) -> float:
        return self.dyn0 / self.delta + self.geo0

    @property
    def phase1(self) -> float:
        return self.dyn1 / self.delta + self.geo1

    def reconstruct(self, p: AdiabaticParams) -> np.ndarray:
        """Diabatic-basis state built from the coefficients and the smooth real-axis basis."""
        v0, v1 = real_axis_basis(self.tau, p)
        return (self.c0 * np.exp(-1j * self.phase0) * v0
                + self.c1 * np.exp(-1j * self.phase1) * v1)


@dataclass(frozen=True)
class PropagationReport:
    P: float
    norm_drift: float
    n_steps: int
    n_rejected: int
    frame: Frame
    tau_max: float
    tol: float
    method: str = "dop853"

    @property
    def resolution_limited(self) -> bool:
        """True when P is too small to be resolved against the integration tolerance."""
        return self.P < 1e3 * self.tol

    def as_dict(self) -> dict:
        return {
            "P": self.P,
            "norm_drift": self.norm_drift,
            "n_steps": self.n_steps,
            "n_rejected": self.n_rejected,
            "frame": self.frame.value,
            "tau_max": self.tau_max,
            "tol": self.tol,
            "method": self.method,
            "resolution_limited": self.resolution_limited,
        }


def real_axis_basis(tau: float, p: AdiabaticParams):
    """Instantaneous eigenvectors ``(|0>, |1>)`` in the smooth gauge used by the adiabatic frame."""
    tau = float(tau)
    b = p.a / (1.0 + tau * tau)
    rho = math.hypot(1.0, b)
    e = math.hypot(rho, tau)
    half = 0.5 * math.acos(max(-1.0, min(1.0, tau / e)))
    phase = complex(1.0, -b) / rho  # e^{i phi}, phi = atan2(-b, 1)
    v1 = np.array([math.cos(half), phase * math.sin(half)], dtype=complex)
    v0 = np.array([-math.sin(half), phase * math.cos(half)], dtype=complex)
    return v0, v1


def _check_tol(tol):
    lo, hi = TOL_RANGE
    if not (lo <= tol <= hi):
        raise ValueError(f"tol must lie in [{lo:g}, {hi:g}], got {tol}")


def diabatic_trajectory(p: AdiabaticParams, tau0: float, taus: Sequence[float], psi0,
                        tol: float = DEFAULT_TOL, method: str = "dop853",
                        picture: str = "interaction", frozen_tau: Optional[float] = None):
    """States at each of the increasing times ``taus`` for a run started at ``tau0``.

    ``frozen_tau`` evaluates ``h`` at a fixed time throughout (an autonomous
    test problem); it forces the plain picture.
    """
    _check_tol(tol)
    taus = np.asarray(taus, dtype=float)
    psi0 = np.asarray(psi0, dtype=complex)
    if frozen_tau is not None:
        kind, par = rk.FROZEN, [p.delta, p.a, float(frozen_tau)]
    elif picture == "interaction":
        kind, par = rk.DIABATIC_IP, [p.delta, p.a]
    elif picture == "plain":
        kind, par = rk.DIABATIC, [p.delta, p.a]
    else:
        raise ValueError(f"unknown picture {picture!r}")

    def to_ip(t):
        return np.exp(np.array([1j, -1j]) * t * t / (2 * p.delta))

    y0 = psi0 * to_ip(tau0) if kind == rk.DIABATIC_IP else psi0
    states, stats = rk.integrate(kind, par, y0, tau0, taus, tol, method,
                                 h0=1e-3 * min(1.0, p.delta))
    if kind == rk.DIABATIC_IP:
        states = states / np.array([to_ip(t) for t in taus])
    return [StateVector(states[i].copy(), float(taus[i]), stats) for i in range(len(taus))]


def propagate_diabatic(p: AdiabaticParams, tau0: float, tau1: float, psi0,
                       tol: float = DEFAULT_TOL, method: str = "dop853",
                       picture: str = "interaction", frozen_tau: Optional[float] = None) -> StateVector:
    """Propagate a diabatic-basis state from ``tau0`` to ``tau1``."""
    if not tau0 < tau1:
        raise ValueError("need tau0 < tau1")
    if isinstance(psi0, StateVector):
        psi0 = psi0.psi
    return diabatic_trajectory(p, tau0, [tau1], psi0, tol, method, picture, frozen_tau)[0]


def adiabatic_trajectory(p: AdiabaticParams, tau0: float, taus: Sequence[float],
                         tol: float = DEFAULT_TOL, method: str = "dop853"):
    """Adiabatic coefficients at each of ``taus`` starting from ``c_n(tau0) = delta_{n0}``."""
    _check_tol(tol)
    taus = np.asarray(taus, dtype=float)
    y0 = np.array([1.0, 0.0, 0.0, 0.0, 0.0], dtype=complex)
    states, stats = rk.integrate(rk.ADIABATIC, [p.delta, p.a], y0, tau0, taus, tol, method,
                                 h0=1e-3 * min(1.0, p.delta))
    out = []
    for i, t in enumerate(taus):
        c0, c1, dyn1, geo0, geo1 = states[i]
        out.append(AmplitudePair(complex(c0), complex(c1), -dyn1.real, dyn1.real, geo0.real,
                                 geo1.real, float(t), p.delta, stats))
    return out


def propagate_adiabatic(p: AdiabaticParams, tau0: float, tau1: float, tol: float = DEFAULT_TOL,
                        method: str = "dop853") -> AmplitudePair:
    """Coefficients ``(c0, c1)`` at ``tau1`` for a run that starts in the ground state at ``tau0``."""
    if not tau0 < tau1:
        raise ValueError("need tau0 < tau1")
    return adiabatic_trajectory(p, tau0, [tau1], tol, method)[0]


def transition_probability(p: AdiabaticParams, tau_max: float = DEFAULT_TAU_MAX,
                           tol: float = DEFAULT_TOL, frame="diabatic",
                           method: str = "dop853") -> PropagationReport:
    """Non-adiabatic transition probability over ``[-tau_max, tau_max]``."""
    frame = Frame(frame)
    if tau_max < 50:
        raise ValueError("tau_max must be >= 50")
    if frame is Frame.DIABATIC:
        v0, _ = real_axis_basis(-tau_max, p)
        out = propagate_diabatic(p, -tau_max, tau_max, v0, tol, method)
        _, v1 = real_axis_basis(tau_max, p)
        P = abs(np.vdot(v1, out.psi)) ** 2
        drift = abs(out.norm - 1.0)
    else:
        out = propagate_adiabatic(p, -tau_max, tau_max, tol, method)
        P = abs(out.c1) ** 2
        drift = abs(math.sqrt(abs(out.c0) ** 2 + abs(out.c1) ** 2) - 1.0)
    return PropagationReport(float(P), float(drift), out.stats.n_steps, out.stats.n_rejected,
                             frame, float(tau_max), float(tol), method)
