"""
Complex-time (Dykhne-Davis-Pechukas) prediction of the transition probability.

The leading-order probability is assembled from three factors,

    P = cos^2(eta pi / 2) * exp(2 geo_im) * exp(-2 dyn_im / delta),

where ``dyn_im`` is the imaginary part of the gap integral from the real
axis to the branch point on the imaginary axis, ``geo_im`` the matching
Berry-connection integral, and the prefactor comes from the holonomy of the
gauge-potential pole at ``tau = i``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import PathError, PathThroughCutError, QuadratureNonConvergence, RadiusError
from .model import (EXCLUSION_RADIUS, POLE, SIGMA_Y, AdiabaticParams, ContourPath,
                    connection_matrix_exact, discriminant, eigensystem, segments_cross)
from .quadrature import adaptive_gk, gauss_legendre_edges, gauss_legendre_panels

DEFAULT_PATH_OFFSET = 0.05
CUT_HEIGHT = 10.0
GEO_MAX_DOUBLINGS = 7
PANELS_PER_UNIT_GEO = 200.0  # density at which panels are half their distance to a singularity
GRADING_RATIO = 0.5


@dataclass(frozen=True)
class BranchPoints:
    """Upper half-plane eigenvalue degeneracies and the gauge-potential pole.

    ``upper[0]`` lies on the positive imaginary axis; ``upper[1]`` and
    ``upper[2]`` are to its lower left and lower right. For ``a = 0`` all
    three coincide with ``i`` and ``collapsed`` is set.
    """

    upper: tuple
    pole: complex = POLE
    collapsed: bool = False
    a: float = 0.0

    @property
    def residuals(self):
        return tuple(abs((1 + t * t) ** 3 + self.a**2) for t in self.upper)


@dataclass(frozen=True)
class QuadratureConfig:
    pv_epsilon0: float = 0.1
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_subdivisions: int = 500

    def __post_init__(self):
        if not self.pv_epsilon0 > 0:
            raise ValueError("pv_epsilon0 must be positive")
        if self.abs_tol < 1e-13 or self.rel_tol < 1e-13:
            raise ValueError("quadrature tolerances must be >= 1e-13")


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class PhaseBreakdown:
    dyn_im: float
    geo_im: float
    topo_prefactor: float
    P_pred: float
    method: Method
    delta: float
    eta: float

    def as_dict(self) -> dict:
        return {
            "method": self.method.value,
            "delta": self.delta,
            "eta": self.eta,
            "dyn_im": self.dyn_im,
            "geo_im": self.geo_im,
            "topo_prefactor": self.topo_prefactor,
            "P": self.P_pred,
        }


def branch_points(p: AdiabaticParams) -> BranchPoints:
    """Zeros of ``(1 + tau^2)^3 + a^2`` in the upper half-plane, Newton-polished."""
    a = p.a
    if a == 0:
        return BranchPoints((POLE, POLE, POLE), POLE, True, 0.0)
    c = abs(a) ** (2.0 / 3.0)
    pts = []
    for k in range(3):
        t = 1j * cmath.sqrt(1 + c * cmath.exp(2j * math.pi * k / 3))
        for _ in range(8):
            w = 1 + t * t
            f = w**3 + a * a
            df = 6 * t * w * w
            if f == 0 or df == 0:
                break
            step = f / df
            t -= step
            if abs(step) < 1e-17 * abs(t):
                break
        pts.append(t)
    # the k = 0 root is on the imaginary axis exactly
    pts[0] = complex(0.0, pts[0].imag)
    return BranchPoints(tuple(pts), POLE, False, a)


# ---------------------------------------------------------------------------
# dynamical phase


def _pv_integrand(y, a):
    """``sqrt(1 - y^2 + a^2 / (1 - y^2)^2)``, zero where the radicand is negative."""
    y = np.asarray(y, dtype=float)
    w = (1.0 - y) * (1.0 + y)
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = w + (a * a) / (w * w) if a else w
    return np.sqrt(np.clip(rad, 0.0, None))


def dynamical_phase_integral(p: AdiabaticParams, q: QuadratureConfig = QuadratureConfig()) -> float:
    """``Im int_0^{tau*_1} (e1 - e0) dtau`` reduced to a principal-value integral on the imaginary axis.

    The integrand ``f(y)`` diverges like ``a / |1 - y^2|`` at ``y = 1`` from
    both sides. The two sides enter with opposite signs, so on ``(0, eps)``
    the difference ``f(1 - u) - f(1 + u)`` is integrated, which is finite.
    The square-root zero at ``y* = Im tau*_1`` is removed with
    ``y = y* (1 - s^2)``.
    """
    a = abs(p.a)
    if a >= 0.5:
        raise ValueError(f"a = eta delta / 2 must be < 0.5, got {a}")
    kw = dict(abs_tol=q.abs_tol, rel_tol=q.rel_tol, max_subdivisions=q.max_subdivisions)
    if a == 0:
        val, _, _ = adaptive_gk(lambda s: _pv_integrand(1 - s * s, 0.0) * 2 * s, 0.0, 1.0, **kw)
        return 2.0 * val
    ystar = math.sqrt(1.0 + a ** (2.0 / 3.0))
    eps = min(q.pv_epsilon0, 0.5 * (ystar - 1.0))

    inner, _, _ = adaptive_gk(lambda y: _pv_integrand(y, a), 0.0, 1.0 - eps, **kw)
    paired, _, _ = adaptive_gk(lambda u: _pv_integrand(1 - u, a) - _pv_integrand(1 + u, a),
                               0.0, eps, **kw)
    smax = math.sqrt(1.0 - (1.0 + eps) / ystar)
    outer, _, _ = adaptive_gk(lambda s: _pv_integrand(ystar * (1 - s * s), a) * 2 * ystar * s,
                              0.0, smax, **kw)
    return 2.0 * (inner + paired - outer)


# ---------------------------------------------------------------------------
# geometric phase


def default_path(p: AdiabaticParams, offset: float = DEFAULT_PATH_OFFSET, density: float = 200.0) -> ContourPath:
    """Vertical ascent to the right of the imaginary axis, then a hook onto ``tau*_1``.

    The offset is capped at half of ``Re tau*_3`` so the path stays between
    the imaginary axis and the right-hand branch point; passing outside it
    continues the eigenvectors onto a different sheet.
    """
    bp = branch_points(p)
    top = bp.upper[0]
    if not bp.collapsed:
        offset = min(offset, 0.5 * bp.upper[2].real)
    return ContourPath((0.0, offset, offset + 1j * top.imag, top), density)


def registered_cuts(p: AdiabaticParams):
    """Cuts a phase-integral path may not cross.

    A vertical ray above ``tau*_1`` and horizontal rays running outward from
    ``tau*_2`` (to the left) and ``tau*_3`` (to the right).
    """
    bp = branch_points(p)
    t1, t2, t3 = bp.upper
    cuts = [(t1, complex(0.0, t1.imag + CUT_HEIGHT))]
    if not bp.collapsed:
        cuts.append((t2, t2 - CUT_HEIGHT))
        cuts.append((t3, t3 + CUT_HEIGHT))
    return cuts


def _check_path(p: AdiabaticParams, path: ContourPath):
    top = branch_points(p).upper[0]
    if abs(path.vertices[0]) > 1e-12:
        raise PathError("phase-integral path must start at tau = 0")
    if abs(path.vertices[-1] - top) > 1e-10:
        raise PathError(f"phase-integral path must end at tau*_1 = {top}")
    for c0, c1 in registered_cuts(p):
        for a, b in path.segments:
            if segments_cross(a, b, c0, c1):
                raise PathThroughCutError(f"segment {a}->{b} crosses the cut from {c0}")
    if p.eta != 0:
        path.check_clearance([POLE], EXCLUSION_RADIUS)


def _connection_gap(tau, p, hint):
    es = eigensystem(tau, p, hint)
    m = connection_matrix_exact(tau, p, es=es)
    # a_n = -i M_nn
    return -1j * (m[1, 1] - m[0, 0]), es


def _walk(nodes, dtau, p, hint):
    total = 0j
    for t, w in zip(nodes, dtau):
        g, hint = _connection_gap(t, p, hint)
        total += g * w
    return total, hint


def _graded_edges(a, b, singular, h_max, ratio):
    """Panel boundaries in ``s`` for ``a + (b - a) s``, each panel at most ``ratio`` times
    its distance to the nearest singular point and at most ``h_max`` long."""
    length = abs(b - a)
    edges = [0.0]
    while edges[-1] < 1.0:
        z = a + (b - a) * edges[-1]
        dist = min(abs(z - c) for c in singular)
        h = min(h_max, ratio * dist) / length
        # the next panel must also respect the distance at its far end
        while h * length > ratio * min(abs(z + (b - a) * h - c) for c in singular) and h * length > 1e-12:
            h *= 0.5
        edges.append(min(1.0, edges[-1] + h))
    return edges


def _gauge_singularities(a):
    """Upper half-plane zeros of ``1 + tau^2 = +-i a``, where an eigenvector component vanishes.

    The bilinear gauge pins that component, so the connection has a simple
    pole there with a real residue. The imaginary part of the phase integral
    does not depend on which side the path passes, but the quadrature must
    resolve the pole.
    """
    if a == 0:
        return []
    out = []
    for sgn in (1, -1):
        t = cmath.sqrt(-1 + sgn * 1j * a)
        out.append(t if t.imag > 0 else -t)
    return out


def _segment_integral(a, b, p, hint, density):
    bp = branch_points(p)
    singular = list(bp.upper) + [POLE] + _gauge_singularities(p.a)
    scale = PANELS_PER_UNIT_GEO / density
    edges = _graded_edges(a, b, singular, 8.0 / density, GRADING_RATIO * scale)
    s, w = gauss_legendre_edges(edges)
    return _walk(a + (b - a) * s, (b - a) * w, p, hint)


def _hook_integral(a, top, p, hint, n_panels, smin):
    # tau = top + (a - top) s^2, walked from s = 1 down to s = smin
    s, w = gauss_legendre_panels(1.0, smin, n_panels)
    return _walk(top + (a - top) * s * s, (a - top) * 2 * s * w, p, hint)


def geometric_phase_integral(p: AdiabaticParams, path: Optional[ContourPath] = None,
                             q: QuadratureConfig = QuadratureConfig(), n_levels: int = 4) -> float:
    """``Im int_0^{tau*_1} (a1 - a0) dtau`` along ``path`` in the bilinear gauge.

    Eigenvectors are continued node by node from the real-axis convention at
    ``tau = 0``. The final segment ends on the branch point, where the
    connection difference diverges like ``(tau - tau*)^(-1/2)``. With
    ``tau = tau* + L s^2`` the integrand is smooth in ``s``; the hook is
    integrated up to distances ``eps_j = 1e-4 min(pv_epsilon0, L) 4^-j`` and
    the truncated values are Richardson-extrapolated in ``sqrt(eps)``.
    """
    if p.eta == 0:
        path = path or default_path(p)
        _check_path(p, path)
        return 0.0
    path = path or default_path(p)
    _check_path(p, path)
    top = path.vertices[-1]

    def run(density):
        hint = None
        total = 0j
        for a, b in path.segments[:-1]:
            part, hint = _segment_integral(a, b, p, hint, density)
            total += part
        a = path.segments[-1][0]
        length = abs(a - top)
        eps = 1e-4 * min(q.pv_epsilon0, length)
        n = max(8, int(math.ceil(length * density / 8)))
        # truncated hook integrals with s_min halving, then Richardson in s_min
        vals = []
        for j in range(n_levels):
            smin = math.sqrt(eps * 4.0**-j / length)
            part, _ = _hook_integral(a, top, p, hint, n + 4 * j, smin)
            vals.append(total + part)
        table = [vals]
        for k in range(1, n_levels):
            prev = table[-1]
            table.append([(2**k * prev[i + 1] - prev[i]) / (2**k - 1) for i in range(len(prev) - 1)])
        return table[-1][0].imag

    target = max(1e2 * q.abs_tol, 1e-10)
    density = path.density
    prev = run(density)
    for _ in range(GEO_MAX_DOUBLINGS):
        density *= 2
        cur = run(density)
        change = abs(cur - prev)
        if change <= target:
            return float(cur)
        prev = cur
    raise QuadratureNonConvergence(
        f"geometric phase unresolved at density {density}: last change {change:.3e}")


# ---------------------------------------------------------------------------
# holonomy and assembled prediction


def holonomy(p: AdiabaticParams, radius: float, n_nodes: Optional[int] = None) -> np.ndarray:
    """Loop matrix ``exp(-(i/delta) eta oint theta_dot A_theta dtau)`` around the pole at ``i``.

    The integrand is a scalar times ``sigma_y``, so path ordering is trivial.
    The circle is sampled with the periodic trapezoid rule, which converges
    geometrically with ratio ``radius / 2`` (the distance to ``-i``).
    """
    if not (EXCLUSION_RADIUS <= radius < 2.0 - EXCLUSION_RADIUS):
        raise RadiusError(f"radius must lie in [{EXCLUSION_RADIUS}, {2 - EXCLUSION_RADIUS}), got {radius}")
    if n_nodes is None:
        n_nodes = int(math.ceil(math.log(1e-17) / math.log(radius / 2.0))) + 32
        n_nodes = min(n_nodes, 2_000_000)
    phi = 2 * math.pi * np.arange(n_nodes) / n_nodes
    z = np.exp(1j * phi)
    tau = POLE + radius * z
    dtau = 1j * radius * z * (2 * math.pi / n_nodes)
    # theta_dot A_theta = -delta / (2 (1 + tau^2)) sigma_y
    scalar = np.sum(-p.delta / (2 * (1 + tau * tau)) * dtau)
    gen = (-1j / p.delta) * p.eta * scalar
    return expm(gen * SIGMA_Y)


def topological_prefactor(eta: float) -> float:
    """``cos^2(eta pi / 2)``, written as ``sin^2((1 - eta) pi / 2)`` so ``eta = 1`` gives exactly 0."""
    return math.sin((1.0 - eta) * math.pi / 2) ** 2


def closed_form_dyn_im(p: AdiabaticParams) -> float:
    """Dynamical exponent consistent with ``P = cos^2 e^{-2 eta / 3} e^{-pi / delta}``."""
    return math.pi / 2 + p.eta * p.delta / 3


def predict_probability(p: AdiabaticParams, method="closed_form",
                        q: QuadratureConfig = QuadratureConfig()) -> PhaseBreakdown:
    method = Method(method)
    if method is Method.CLOSED_FORM:
        dyn, geo = closed_form_dyn_im(p), 0.0
    else:
        dyn = dynamical_phase_integral(p, q)
        geo = geometric_phase_integral(p, None, q)
    topo = topological_prefactor(p.eta)
    P = topo * math.exp(2 * geo) * math.exp(-2 * dyn / p.delta)
    return PhaseBreakdown(float(dyn), float(geo), topo, float(P), method, p.delta, p.eta)


__all__ = [
    "BranchPoints", "QuadratureConfig", "Method", "PhaseBreakdown", "branch_points",
    "dynamical_phase_integral", "geometric_phase_integral", "default_path", "registered_cuts",
    "holonomy", "topological_prefactor", "closed_form_dyn_im", "predict_probability",
    "discriminant",
]
