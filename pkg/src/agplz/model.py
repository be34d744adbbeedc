"""
Two-level Landau-Zener model with a tunable adiabatic gauge potential (AGP).

The dimensionless Hamiltonian is

    h(tau) = sigma_x + tau sigma_z - a / (1 + tau^2) sigma_y,   a = eta delta / 2,

evaluated for real or complex slow time ``tau``. ``eta = 0`` is the plain
linear sweep, ``eta = 1`` adds the full counterdiabatic term.

Off the real axis the Hamiltonian is not Hermitian, so eigenvectors come in
left/right pairs normalised with the bilinear (non-conjugated) product
``vL . v = 1``. The remaining scale freedom ``v -> alpha v, vL -> vL / alpha``
is fixed by requiring ``v[k] == vL[k]`` for a gauge component ``k``. On the
real axis this makes ``v[k]`` real, and we pick it positive.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegeneracyError, PathError, PoleError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

POLE = 1j
EXCLUSION_RADIUS = 1e-3
POLE_TOL = 1e-12
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class AdiabaticParams:
    """Adiabatic parameter ``delta`` and AGP strength ``eta``.

    ``eta`` outside ``[0, 1]`` is accepted (all formulas stay valid) but
    ``eta_out_of_range`` is set and a warning is issued.
    """

    delta: float
    eta: float = 0.0
    eta_out_of_range: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")
        if not math.isfinite(self.eta):
            raise ValueError(f"eta must be finite, got {self.eta}")
        out = not (0.0 <= self.eta <= 1.0)
        object.__setattr__(self, "eta_out_of_range", out)
        if out:
            warnings.warn(f"eta={self.eta} outside [0, 1]", stacklevel=3)

    @property
    def a(self) -> float:
        """Coefficient of the gauge-potential term, ``eta * delta / 2``."""
        return self.eta * self.delta / 2.0

    def with_eta(self, eta: float) -> "AdiabaticParams":
        return AdiabaticParams(self.delta, eta)


@dataclass(frozen=True)
class PolarParameters:
    """Gap function ``e = sqrt(1 + tau^2)`` and mixing angle ``cot(theta) = tau``."""

    e: complex
    theta: complex


class BranchTag(enum.Enum):
    REAL_AXIS = "real_axis"  # e0 <= 0 <= e1 on the real line
    PRINCIPAL = "principal"  # principal square root, no hint
    CONTINUED = "continued"  # nearest match to a continuity hint


@dataclass(frozen=True)
class EigenSystem:
    """Instantaneous eigenpairs of ``h(tau)``; index 0 is the lower branch on the real axis."""

    tau: complex
    e0: complex
    e1: complex
    v0: np.ndarray
    v1: np.ndarray
    vL0: np.ndarray
    vL1: np.ndarray
    branch_tag: BranchTag
    gauge: tuple

    @property
    def energies(self):
        return (self.e0, self.e1)

    @property
    def right(self):
        return (self.v0, self.v1)

    @property
    def left(self):
        return (self.vL0, self.vL1)


def _as_complex(tau) -> complex:
    z = complex(tau)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"tau must be finite, got {tau}")
    return z


def _check_pole(tau: complex, p: AdiabaticParams) -> complex:
    w = 1.0 + tau * tau
    if p.eta != 0 and abs(w) < POLE_TOL:
        raise PoleError(f"|1 + tau^2| = {abs(w):.3e} at tau={tau}")
    return w


def agp_term(tau, p: AdiabaticParams) -> np.ndarray:
    """Full-strength gauge-potential term ``-delta / (2 (1 + tau^2)) sigma_y``.

    The η-dependent Hamiltonian adds ``eta`` times this matrix.
    """
    tau = _as_complex(tau)
    w = 1.0 + tau * tau
    if abs(w) < POLE_TOL:
        raise PoleError(f"|1 + tau^2| = {abs(w):.3e} at tau={tau}")
    c = p.delta / (2.0 * w)
    return np.array([[0.0, 1j * c], [-1j * c, 0.0]], dtype=complex)


def hamiltonian(tau, p: AdiabaticParams) -> np.ndarray:
    """``h = sigma_x + tau sigma_z - a / (1 + tau^2) sigma_y`` as a 2x2 complex array."""
    tau = _as_complex(tau)
    w = _check_pole(tau, p)
    b = p.a / w if p.eta != 0 else 0.0
    return np.array([[tau, 1.0 + 1j * b], [1.0 - 1j * b, -tau]], dtype=complex)


def polar_parameters(tau) -> PolarParameters:
    tau = _as_complex(tau)
    e = np.sqrt(1.0 + tau * tau + 0j)
    # cot(theta) = tau with theta in (0, pi) on the real line
    theta = np.pi / 2 - np.arctan(tau + 0j)
    if tau.imag == 0:
        e, theta = complex(e.real, 0.0), complex(theta.real, 0.0)
    return PolarParameters(complex(e), complex(theta))


def diagonalizer(theta) -> np.ndarray:
    """``U(theta) = exp(-i theta sigma_y / 2) sigma_x``; columns are |0>, |1> of the plain sweep."""
    theta = complex(theta)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    rot = c * IDENTITY - 1j * s * SIGMA_Y
    return rot @ SIGMA_X


def discriminant(tau, p: AdiabaticParams) -> complex:
    """``(1 + tau^2)^3 + a^2``; its zeros are the eigenvalue branch points."""
    tau = _as_complex(tau)
    w = 1.0 + tau * tau
    return w**3 + p.a**2


def _right_left(h: np.ndarray, lam: complex):
    h00, h01, h10, h11 = h[0, 0], h[0, 1], h[1, 0], h[1, 1]
    r1 = np.array([h01, lam - h00])
    r2 = np.array([lam - h11, h10])
    v = r1 if np.abs(r1).sum() >= np.abs(r2).sum() else r2
    l1 = np.array([h10, lam - h00])
    l2 = np.array([lam - h11, h01])
    w = l1 if np.abs(l1).sum() >= np.abs(l2).sum() else l2
    return v, w


def _fix_gauge(v, w, k, ref_left=None, real_axis=False):
    s = w @ v
    if s == 0 or v[k] == 0:
        raise DegeneracyError("self-orthogonal eigenvector (exceptional point)")
    alpha = np.sqrt(w[k] / (s * v[k]))
    if ref_left is not None:
        if (ref_left @ (alpha * v)).real < 0:
            alpha = -alpha
    elif (alpha * v[k]).real < 0:
        alpha = -alpha
    v = alpha * v
    w = w / (alpha * s)
    if real_axis:
        v[k] = v[k].real
        w[k] = v[k]
    return v, w


def eigensystem(tau, p: AdiabaticParams, continuity_hint: Optional[EigenSystem] = None) -> EigenSystem:
    """Eigenvalues ``e0 = -e1`` and bilinearly normalised eigenvectors of ``h(tau)``.

    Without a hint the real-axis convention ``e0 < 0 < e1`` (principal root
    off the axis) is used and the gauge component is the larger-modulus one.
    With a hint, the branch and the eigenvector sign follow the hint, which
    is how analytic continuation along a sampled path is done.
    """
    tau = _as_complex(tau)
    h = hamiltonian(tau, p)
    disc = discriminant(tau, p)
    if abs(disc) < DEGENERACY_TOL:
        raise DegeneracyError(f"branch point: |(1+tau^2)^3 + a^2| = {abs(disc):.3e} at tau={tau}")
    s = np.sqrt(h[0, 0] ** 2 + h[0, 1] * h[1, 0])
    real_axis = tau.imag == 0.0
    if continuity_hint is not None:
        e1 = s if abs(s - continuity_hint.e1) <= abs(-s - continuity_hint.e1) else -s
        tag = BranchTag.CONTINUED
    elif real_axis:
        e1 = complex(abs(s.real), 0.0)
        tag = BranchTag.REAL_AXIS
    else:
        e1 = s
        tag = BranchTag.PRINCIPAL
    e0 = -e1

    vecs = []
    gauge = []
    for n, lam in enumerate((e0, e1)):
        v, w = _right_left(h, lam)
        if continuity_hint is not None:
            k = continuity_hint.gauge[n]
            ref = continuity_hint.left[n]
        else:
            # near-ties go to the lower component, matching |0> = (-sin, cos) at tau = 0
            k = int(np.argmax(np.abs(v) * np.array([1.0, 1.0 + 1e-12])))
            ref = None
        v, w = _fix_gauge(v, w, k, ref, real_axis and continuity_hint is None)
        vecs.append((v, w))
        gauge.append(k)
    (v0, vL0), (v1, vL1) = vecs
    return EigenSystem(tau, complex(e0), complex(e1), v0, v1, vL0, vL1, tag, tuple(gauge))


def default_fd_step(tau) -> float:
    return 1e-5 * max(1.0, abs(tau))


def connection_matrix(tau, p: AdiabaticParams, hint: Optional[EigenSystem] = None,
                      h_fd: Optional[float] = None, center: Optional[EigenSystem] = None) -> np.ndarray:
    """Matrix ``M[n, m] = vL_n . d/dtau v_m`` in the bilinear gauge.

    Central differences at steps ``h`` and ``h/2`` combined by one Richardson
    step. Stencil eigenvectors are continued from the centre point, so the
    gauge is the same analytic one throughout.
    """
    tau = _as_complex(tau)
    if center is None:
        center = eigensystem(tau, p, hint)
    h = default_fd_step(tau) if h_fd is None else h_fd

    def diff(step):
        plus = eigensystem(tau + step, p, center)
        minus = eigensystem(tau - step, p, center)
        return [(plus.right[m] - minus.right[m]) / (2 * step) for m in (0, 1)]

    d1 = diff(h)
    d2 = diff(h / 2)
    dv = [(4 * d2[m] - d1[m]) / 3 for m in (0, 1)]
    return np.array([[center.left[n] @ dv[m] for m in (0, 1)] for n in (0, 1)])


def _dh(tau: complex, p: AdiabaticParams) -> np.ndarray:
    w = 1.0 + tau * tau
    db = -2.0 * p.a * tau / (w * w)
    return np.array([[1.0, 1j * db], [-1j * db, -1.0]])


def connection_matrix_exact(tau, p: AdiabaticParams, hint: Optional[EigenSystem] = None,
                            es: Optional[EigenSystem] = None) -> np.ndarray:
    """Analytic version of :func:`connection_matrix`.

    With ``v = alpha r`` for an unnormalised eigenvector ``r`` and the gauge
    condition fixing ``alpha``, ``M[n, m] = delta_nm alpha_m'/alpha_m +
    alpha_m vL_n . r_m'``. No stencil is involved, so it stays usable
    arbitrarily close to a branch point.
    """
    tau = _as_complex(tau)
    if es is None:
        es = eigensystem(tau, p, hint)
    h = hamiltonian(tau, p)
    dh = _dh(tau, p)
    h00, h01, h10 = h[0, 0], h[0, 1], h[1, 0]
    d00, d01, d10 = dh[0, 0], dh[0, 1], dh[1, 0]
    M = np.zeros((2, 2), dtype=complex)
    for m, lam in enumerate(es.energies):
        dlam = (h00 * d00 + 0.5 * (h01 * d10 + d01 * h10)) / lam
        r1, dr1 = np.array([h01, lam - h00]), np.array([d01, dlam - d00])
        r2, dr2 = np.array([lam + h00, h10]), np.array([dlam + d00, d10])
        r, dr = (r1, dr1) if np.abs(r1).sum() >= np.abs(r2).sum() else (r2, dr2)
        l1, dl1 = np.array([h10, lam - h00]), np.array([d10, dlam - d00])
        l2, dl2 = np.array([lam + h00, h01]), np.array([dlam + d00, d01])
        w, dw = (l1, dl1) if np.abs(l1).sum() >= np.abs(l2).sum() else (l2, dl2)
        k = es.gauge[m]
        s = w @ r
        ds = dw @ r + w @ dr
        j = int(np.argmax(np.abs(r)))
        alpha = es.right[m][j] / r[j]
        for n in (0, 1):
            M[n, m] = alpha * (es.left[n] @ dr)
        M[m, m] += 0.5 * (dw[k] / w[k] - ds / s - dr[k] / r[k])
    return M


def berry_connection(tau, p: AdiabaticParams, hint: Optional[EigenSystem] = None,
                     h_fd: Optional[float] = None):
    """Berry connections ``a_n = -i <n| d_tau |n>`` (gauge-dependent, bilinear gauge)."""
    m = connection_matrix(tau, p, hint, h_fd)
    return complex(-1j * m[0, 0]), complex(-1j * m[1, 1])


def coupling_coefficients(tau, p: AdiabaticParams, hint: Optional[EigenSystem] = None,
                          h_fd: Optional[float] = None):
    """Non-adiabatic couplings ``p01 = -<0|d_tau 1>`` and ``p10 = -<1|d_tau 0>``."""
    m = connection_matrix(tau, p, hint, h_fd)
    return complex(-m[0, 1]), complex(-m[1, 0])


@dataclass(frozen=True)
class ContourPath:
    """Piecewise-linear contour in the complex tau plane.

    ``density`` is the number of sample points per unit length used when the
    path is walked for branch continuation.
    """

    vertices: tuple
    density: float = 200.0
    loop: bool = False

    def __post_init__(self):
        verts = tuple(complex(v) for v in self.vertices)
        if len(verts) < 2:
            raise ValueError("a contour needs at least 2 vertices")
        object.__setattr__(self, "vertices", verts)

    @property
    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))

    @property
    def length(self) -> float:
        return float(sum(abs(b - a) for a, b in self.segments))

    def check_clearance(self, singularities: Sequence[complex], radius: float = EXCLUSION_RADIUS):
        """Raise ``PathError`` if any vertex or segment comes within ``radius`` of a singularity."""
        if self.loop:
            return
        for z0 in singularities:
            for a, b in self.segments:
                if segment_distance(a, b, z0) < radius:
                    raise PathError(f"segment {a}->{b} passes within {radius} of {z0}")


def segment_distance(a: complex, b: complex, z: complex) -> float:
    """Euclidean distance from ``z`` to the closed segment ``[a, b]``."""
    d = b - a
    if d == 0:
        return abs(z - a)
    t = ((z - a) * d.conjugate()).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(z - (a + t * d))


def segments_cross(a: complex, b: complex, c: complex, d: complex) -> bool:
    """True when the open segments ``[a, b]`` and ``[c, d]`` properly intersect."""

    def orient(p, q, r):
        return ((q - p).conjugate() * (r - p)).imag

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)
