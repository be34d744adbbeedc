"""
The level-line function ``Delta(tau) = Im int_0^tau (e0 - e1) dtau'`` on a grid.

Each cell is the endpoint of a straight segment from the origin. The gap is
continued along the segment by nearest-eigenvalue matching, starting from
the real-axis convention ``e1(0) > 0``, and integrated with composite
Gauss-Legendre panels. The number of panels is doubled until two successive
values agree to ``refine_tol``.

Cells are masked (never silently dropped) when the segment

* crosses a registered branch cut,
* passes within the exclusion radius of a branch point or the pole, or
* ends within one grid spacing of a cut or Dirac string,

or when refinement does not converge.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba as nb
import numpy as np

from .ddp import branch_points
from .errors import ContinuationError
from .model import EXCLUSION_RADIUS, POLE, AdiabaticParams

DEFAULT_RE_RANGE = (-2.5, 2.5)
DEFAULT_IM_RANGE = (0.0, 2.2)
DEFAULT_SHAPE = (400, 300)
PANELS_PER_UNIT = 8  # 8-point rule: 64 samples per unit length
MAX_DOUBLINGS = 6
REFINE_TOL = 1e-8
AMBIGUITY_TOL = 1e-10
STRING_LENGTH = 10.0


class MaskReason(enum.IntFlag):
    NONE = 0
    SINGULARITY = 1  # segment within the exclusion radius of a branch point or pole
    CUT_CROSSING = 2
    NEAR_LINE = 4  # cell within one grid spacing of a cut or string
    UNRESOLVED = 8


@dataclass(frozen=True)
class CutSpec:
    """Branch cuts and Dirac strings as lists of ``(start, end)`` segments."""

    cuts: tuple
    strings: tuple = ()
    singularities: tuple = ()

    @property
    def lines(self):
        return self.cuts + self.strings


def default_cuts(p: AdiabaticParams, height: float = STRING_LENGTH) -> CutSpec:
    """Cut up from ``tau*_1``, a cut joining ``tau*_2`` and ``tau*_3``, and a string from ``i`` to the right.

    For ``a = 0`` the three branch points merge at ``i``; only the vertical
    cut remains and there is no pole.
    """
    bp = branch_points(p)
    t1, t2, t3 = bp.upper
    cuts = [(t1, complex(t1.real, t1.imag + height))]
    if bp.collapsed:
        return CutSpec(tuple(cuts), (), (t1,))
    cuts.append((t2, t3))
    strings = ((POLE, POLE + height),)
    return CutSpec(tuple(cuts), strings, (t1, t2, t3, POLE))


@dataclass
class FieldGrid:
    re_range: tuple
    im_range: tuple
    n_re: int
    n_im: int
    values: np.ndarray
    mask: np.ndarray = field(default=None)
    mask_reason: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n_re, self.n_im):
            raise ValueError(f"values shape {self.values.shape} != ({self.n_re}, {self.n_im})")
        if self.mask_reason is None:
            self.mask_reason = np.zeros(self.values.shape, dtype=np.int64)
        if self.mask is None:
            self.mask = self.mask_reason != 0

    @property
    def re(self):
        return np.linspace(self.re_range[0], self.re_range[1], self.n_re)

    @property
    def im(self):
        return np.linspace(self.im_range[0], self.im_range[1], self.n_im)

    @property
    def spacing(self):
        dre = (self.re_range[1] - self.re_range[0]) / max(1, self.n_re - 1)
        dim = (self.im_range[1] - self.im_range[0]) / max(1, self.n_im - 1)
        return dre, dim

    def to_csv(self, path_or_file) -> None:
        """Header ``re,im,delta,masked``; rows ordered by ``(i_re, i_im)``; masked cells carry ``nan``."""
        re, im = self.re, self.im
        lines = ["re,im,delta,masked"]
        for i in range(self.n_re):
            for j in range(self.n_im):
                m = bool(self.mask[i, j])
                v = "nan" if m else repr(float(self.values[i, j]))
                lines.append(f"{float(re[i])!r},{float(im[j])!r},{v},{int(m)}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", newline="") as fh:
                fh.write(text)


@nb.njit(cache=True)
def _segment_delta(z, a, xs, ws, n_panels):
    """Delta at ``z`` with ``n_panels`` Gauss-Legendre panels; returns (value, ambiguous)."""
    order = xs.shape[0]
    prev = complex(math.sqrt(1.0 + a * a), 0.0)
    acc = 0j
    ambiguous = False
    h = 1.0 / n_panels
    for k in range(n_panels):
        mid = (k + 0.5) * h
        for m in range(order):
            s = mid + 0.5 * h * xs[m]
            tau = s * z
            w = 1.0 + tau * tau
            b = a / w
            root = np.sqrt(tau * tau + 1.0 + b * b)
            d_plus = abs(root - prev)
            d_minus = abs(root + prev)
            if abs(d_plus - d_minus) < AMBIGUITY_TOL:
                ambiguous = True
            e1 = root if d_plus <= d_minus else -root
            acc += 0.5 * h * ws[m] * e1
            prev = e1
    # (e0 - e1) = -2 e1, dtau = z ds
    return (-2.0 * z * acc).imag, ambiguous


@nb.njit(cache=True)
def _fill(zs, skip, a, xs, ws, panels_per_unit, max_doublings, tol):
    n = zs.shape[0]
    out = np.zeros(n)
    status = np.zeros(n, dtype=np.int64)  # 0 ok, 1 ambiguous, 2 unresolved
    for i in range(n):
        if skip[i]:
            continue
        z = zs[i]
        if z == 0:
            continue
        n_p = max(1, int(math.ceil(panels_per_unit * abs(z))))
        prev, amb = _segment_delta(z, a, xs, ws, n_p)
        done = False
        for _ in range(max_doublings):
            n_p *= 2
            cur, amb2 = _segment_delta(z, a, xs, ws, n_p)
            amb = amb or amb2
            if abs(cur - prev) <= tol:
                prev = cur
                done = True
                break
            prev = cur
        out[i] = prev
        if amb:
            status[i] = 1
        elif not done:
            status[i] = 2
    return out, status


def _point_segment_distance(z, a, b):
    """Vectorised distance from points ``z`` to the segment ``[a, b]``."""
    d = b - a
    if d == 0:
        return np.abs(z - a)
    t = np.clip(((z - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return np.abs(z - (a + t * d))


def _origin_segment_distance(z, z0):
    """Distance from the fixed point ``z0`` to each segment ``[0, z]``."""
    denom = np.abs(z) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, (z0 * np.conj(z)).real / denom, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(z0 - t * z)


def _crosses(z, c, d):
    """Whether segments ``[0, z]`` properly intersect ``[c, d]``."""

    def orient(p, q, r):
        return (np.conj(q - p) * (r - p)).imag

    o1 = orient(0j, z, c)
    o2 = orient(0j, z, d)
    o3 = orient(c, d, 0j)
    o4 = orient(c, d, z)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def compute_mask(zs: np.ndarray, cuts: CutSpec, spacing: float,
                 radius: float = EXCLUSION_RADIUS) -> np.ndarray:
    """Mask-reason bit flags for the segments ``[0, z]``."""
    reason = np.zeros(zs.shape, dtype=np.int64)
    for z0 in cuts.singularities:
        reason |= np.where(_origin_segment_distance(zs, z0) < radius, int(MaskReason.SINGULARITY), 0)
    for c, d in cuts.cuts:
        reason |= np.where(_crosses(zs, c, d), int(MaskReason.CUT_CROSSING), 0)
    for c, d in cuts.lines:
        reason |= np.where(_point_segment_distance(zs, c, d) <= spacing * (1 + 1e-9),
                           int(MaskReason.NEAR_LINE), 0)
    return reason


def delta_field(p: AdiabaticParams, re_range=DEFAULT_RE_RANGE, im_range=DEFAULT_IM_RANGE,
                n_re: int = DEFAULT_SHAPE[0], n_im: int = DEFAULT_SHAPE[1],
                cuts: Optional[CutSpec] = None, refine_tol: float = REFINE_TOL,
                panels_per_unit: float = PANELS_PER_UNIT) -> FieldGrid:
    """Fill a ``n_re x n_im`` grid with ``Delta``; masked cells hold ``nan``.

    Raises ``ContinuationError`` if the branch choice is ambiguous at an
    unmasked cell.
    """
    if n_re < 2 or n_im < 2:
        raise ValueError("grid needs at least 2 points per axis")
    cuts = default_cuts(p) if cuts is None else cuts
    re = np.linspace(re_range[0], re_range[1], n_re)
    im = np.linspace(im_range[0], im_range[1], n_im)
    zs = (re[:, None] + 1j * im[None, :]).ravel()
    dre = (re_range[1] - re_range[0]) / (n_re - 1)
    dim = (im_range[1] - im_range[0]) / (n_im - 1)
    reason = compute_mask(zs, cuts, max(dre, dim))
    xs, ws = np.polynomial.legendre.leggauss(8)
    vals, status = _fill(zs, reason != 0, float(p.a), xs, ws, float(panels_per_unit), MAX_DOUBLINGS,
                         float(refine_tol))
    amb = (status == 1) & (reason == 0)
    if amb.any():
        k = int(np.flatnonzero(amb)[0])
        raise ContinuationError(f"ambiguous branch continuation towards tau={zs[k]}")
    reason |= np.where(status == 2, int(MaskReason.UNRESOLVED), 0)
    vals = np.where(reason != 0, np.nan, vals)
    return FieldGrid(tuple(re_range), tuple(im_range), n_re, n_im, vals.reshape(n_re, n_im),
                     None, reason.reshape(n_re, n_im))


def delta_at(p: AdiabaticParams, tau: complex, refine_tol: float = REFINE_TOL) -> float:
    """``Delta`` at a single point along the straight segment from 0, without masking."""
    xs, ws = np.polynomial.legendre.leggauss(8)
    vals, status = _fill(np.array([complex(tau)]), np.zeros(1, dtype=np.bool_), float(p.a), xs, ws,
                         float(PANELS_PER_UNIT), MAX_DOUBLINGS, float(refine_tol))
    if status[0] == 1:
        raise ContinuationError(f"ambiguous branch continuation towards tau={tau}")
    return float(vals[0])


def refined_shape(n_re: int, n_im: int):
    """Grid shape with halved spacing; every old node is also a new node."""
    return 2 * n_re - 1, 2 * n_im - 1


# ---------------------------------------------------------------------------
# level lines


@dataclass(frozen=True)
class Polyline:
    level: float
    points: np.ndarray  # complex, in tau coordinates


def level_lines(fg: FieldGrid, levels: Sequence[float]):
    """Marching-squares contours of ``fg`` at each level; masked cells break the lines."""
    from skimage.measure import find_contours

    unmasked = ~fg.mask
    if unmasked.sum() < 4:
        raise ValueError("field needs at least 2x2 unmasked cells")
    vals = np.where(fg.mask, 0.0, fg.values)
    re0, im0 = fg.re_range[0], fg.im_range[0]
    dre, dim = fg.spacing
    out = []
    for lev in levels:
        for c in find_contours(vals, float(lev), mask=unmasked):
            pts = (re0 + c[:, 0] * dre) + 1j * (im0 + c[:, 1] * dim)
            out.append(Polyline(float(lev), pts))
    return out


def _fmt(x: float) -> str:
    return repr(round(float(x), 6))


def lines_to_svg(lines, fg: FieldGrid) -> str:
    """SVG with one ``<g>`` per level. The imaginary axis points up (y is negated)."""
    re0, re1 = fg.re_range
    im0, im1 = fg.im_range
    width, height = re1 - re0, im1 - im0
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_fmt(re0)} {_fmt(-im1)} '
            f'{_fmt(width)} {_fmt(height)}">')
    body = []
    levels = sorted({pl.level for pl in lines})
    for lev in levels:
        body.append(f'<g class="level" data-level="{lev!r}" fill="none" stroke="black" '
                    f'stroke-width="{_fmt(0.002 * max(width, height))}">')
        for pl in lines:
            if pl.level != lev:
                continue
            d = " ".join(("M" if k == 0 else "L") + f"{_fmt(z.real)},{_fmt(-z.imag)}"
                         for k, z in enumerate(pl.points))
            body.append(f'<path d="{d}"/>')
        body.append("</g>")
    return "\n".join([head] + body + ["</svg>"]) + "\n"
