"""
End-to-end acceptance criteria, shared by ``agplz verify`` and the test suite.

Each criterion returns a :class:`CriterionResult` with the measured value,
the threshold it is held to and the wall time. Runtime budgets are part of
the criterion. Numba kernels are compiled by :func:`warm_up` before any
timing starts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import ddp, field as fieldmod, integrability, tdse
from .model import AdiabaticParams


@dataclass
class CriterionResult:
    key: str
    title: str
    expected: str
    measured: str
    tolerance: str
    passed: bool
    runtime: float
    budget: float
    details: Dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.runtime <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        note = "" if self.within_budget else f" (over budget {self.budget:g} s)"
        return (f"[{status}] {self.key:>3} {self.title}: expected {self.expected}; measured {self.measured}; "
                f"tolerance {self.tolerance}; {self.runtime:.2f} s{note}")


def warm_up() -> None:
    """Compile (or load cached) numba kernels so timings measure the numerics only."""
    p = AdiabaticParams(1.0, 0.5)
    tdse.propagate_diabatic(p, -1.0, 1.0, [1.0, 0.0], tol=1e-6)
    tdse.propagate_adiabatic(p, -1.0, 1.0, tol=1e-6)
    for m in ("dopri5",):
        tdse.propagate_diabatic(p, -1.0, 1.0, [1.0, 0.0], tol=1e-6, method=m)
    fieldmod.delta_field(p, n_re=3, n_im=3)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _lz_ratio(delta):
    P = tdse.transition_probability(AdiabaticParams(delta, 0.0)).P
    return P / math.exp(-math.pi / delta)


def criterion_1() -> CriterionResult:
    deltas = (0.35, 0.45, 0.6)
    ratios, dt = _timed(lambda: [_lz_ratio(d) for d in deltas])
    worst = max(abs(r - 1) for r in ratios)
    return CriterionResult("1", "Landau-Zener baseline", "P_ode / e^{-pi/delta} = 1",
                           f"max |ratio - 1| = {worst:.3e}", "0.05", worst <= 0.05, dt, 5.0,
                           {"deltas": deltas, "ratios": ratios})


def criterion_2() -> CriterionResult:
    deltas = (0.2, 0.5, 1.0)
    Ps, dt = _timed(lambda: [tdse.transition_probability(AdiabaticParams(d, 1.0)).P for d in deltas])
    worst = max(Ps)
    return CriterionResult("2", "Counterdiabatic exactness", "P_ode = 0 at eta = 1",
                           f"max P = {worst:.3e}", "1e-8", worst <= 1e-8, dt, 5.0,
                           {"deltas": deltas, "P": Ps})


def modified_prefactor_ratios(delta: float = 0.5, etas=(0.25, 0.5, 0.75)):
    P0 = tdse.transition_probability(AdiabaticParams(delta, 0.0)).P
    out = []
    for eta in etas:
        P = tdse.transition_probability(AdiabaticParams(delta, eta)).P
        expected = math.cos(eta * math.pi / 2) ** 2 * math.exp(-2 * eta / 3)
        out.append((eta, (P / P0) / expected))
    return out


def criterion_3() -> CriterionResult:
    ratios, dt = _timed(modified_prefactor_ratios)
    worst = max(abs(r - 1) for _, r in ratios)
    return CriterionResult("3", "Modified prefactor (ratio test)",
                           "(P(eta)/P(0)) / (cos^2(eta pi/2) e^{-2 eta/3}) = 1",
                           f"max |ratio - 1| = {worst:.3f} "
                           + "(" + ", ".join(f"eta={e}: {r:.3f}" for e, r in ratios) + ")",
                           "0.10", worst <= 0.10, dt, 10.0, {"ratios": ratios})


GRID_DELTAS = (0.35, 0.4, 0.45, 0.5, 0.55, 0.6)
GRID_ETAS = (0.0, 0.25, 0.5, 0.75)


def comparison_grid():
    rows = []
    for d in GRID_DELTAS:
        for e in GRID_ETAS:
            p = AdiabaticParams(d, e)
            dia = tdse.transition_probability(p, frame="diabatic").P
            adi = tdse.transition_probability(p, frame="adiabatic").P
            closed = ddp.predict_probability(p, "closed_form").P_pred
            rows.append((d, e, dia, adi, closed))
    return rows


def criteria_4_and_9():
    rows, dt = _timed(comparison_grid)
    dev = [(d, e, abs(dia / closed - 1)) for d, e, dia, _, closed in rows]
    worst4 = max(dev, key=lambda t: t[2])
    diff = max(abs(dia - adi) for _, _, dia, adi, _ in rows)
    r4 = CriterionResult("4", "ODE vs closed form over the delta-eta grid", "P_ode / P_ddp_closed = 1",
                         f"max |ratio - 1| = {worst4[2]:.3f} at delta={worst4[0]}, eta={worst4[1]}",
                         "0.20", worst4[2] <= 0.20, dt, 60.0, {"rows": rows})
    r9 = CriterionResult("9", "Frame equivalence", "P_diabatic = P_adiabatic",
                         f"max |diff| = {diff:.3e}", "1e-6", diff <= 1e-6, dt, 60.0)
    return r4, r9


def criterion_5() -> CriterionResult:
    def run():
        I0 = ddp.dynamical_phase_integral(AdiabaticParams(1.0, 0.0))
        slopes = []
        for a in (0.025, 0.0125):
            I = ddp.dynamical_phase_integral(AdiabaticParams(1.0, 2 * a))
            slopes.append((a, (math.pi / 2 - I) / (2 * a / 3)))
        return I0, slopes

    (I0, slopes), dt = _timed(run)
    err0 = abs(I0 - math.pi / 2)
    ok = err0 <= 1e-9 and all(0.9 <= s <= 1.1 for _, s in slopes)
    return CriterionResult("5", "Principal-value quadrature", "I(0) = pi/2; (pi/2 - I(a))/(2a/3) in [0.9, 1.1]",
                           f"|I(0) - pi/2| = {err0:.1e}; slopes "
                           + ", ".join(f"a={a}: {s:.4f}" for a, s in slopes),
                           "1e-9; [0.9, 1.1]", ok, dt, 5.0, {"I0": I0, "slopes": slopes})


def criterion_6() -> CriterionResult:
    def run():
        worst = 0.0
        for eta in (0.0, 0.5, 1.0):
            expected = (math.cos(eta * math.pi / 2) * np.eye(2)
                        + 1j * math.sin(eta * math.pi / 2) * np.array([[0, -1j], [1j, 0]]))
            for r in (0.2, 1.0):
                M = ddp.holonomy(AdiabaticParams(0.5, eta), r)
                worst = max(worst, float(np.abs(M - expected).max()))
        return worst

    worst, dt = _timed(run)
    return CriterionResult("6", "Holonomy", "exp(i eta pi/2 sigma_y)", f"max entry error = {worst:.1e}",
                           "1e-8", worst <= 1e-8, dt, 2.0)


def criterion_7() -> CriterionResult:
    deltas = (0.5, 0.25, 0.125)
    G, dt = _timed(lambda: [ddp.geometric_phase_integral(AdiabaticParams(d, 1.0)) for d in deltas])
    decreasing = all(abs(G[i + 1]) < abs(G[i]) for i in range(len(G) - 1))
    factor = math.exp(2 * G[-1])
    ok = decreasing and 0.8 <= factor <= 1.25
    return CriterionResult("7", "Geometric-factor suppression",
                           "|geo_im| decreasing; exp(2 geo_im) in [0.8, 1.25] at delta=0.125",
                           "geo_im = " + ", ".join(f"{g:.5f}" for g in G)
                           + f"; decreasing={decreasing}; exp(2 geo_im)={factor:.4f}",
                           "strict decrease; [0.8, 1.25]", ok, dt, 10.0, {"deltas": deltas, "geo_im": G})


def criterion_8() -> CriterionResult:
    def run():
        reports = []
        for n, eps in ((2, (0.0, 1.0)), (3, (0.0, 1.0, 2.5))):
            f = integrability.gaudin_family(n, 1.0)
            reports.append(integrability.corrected_flatness_residual(f, eps, 1e-5, 1e-4))
        return reports

    reports, dt = _timed(run)
    sym = max(r.sym_residual for r in reports)
    comm = max(r.comm_residual for r in reports)
    corr = max(r.corrected_residual for r in reports)
    inter = max(max(r.agp_flatness, r.cross_commutator, r.eigenvalue_curl) for r in reports)
    ok = sym <= 1e-12 and comm <= 1e-12 and corr <= 1e-6 and inter <= 1e-6
    return CriterionResult("8", "Flatness of AGP-corrected Gaudin families",
                           "all residuals vanish",
                           f"sym={sym:.1e}, comm={comm:.1e}, corrected={corr:.1e}, intermediate={inter:.1e}",
                           "1e-12 / 1e-12 / 1e-6 / 1e-6", ok, dt, 30.0,
                           {"reports": [r.as_dict() for r in reports]})


def criterion_10() -> CriterionResult:
    def run():
        zero_row = 0.0
        for eta in (0.0, 1.0):
            fg = fieldmod.delta_field(AdiabaticParams(0.5, eta))
            row = fg.values[:, 0]
            zero_row = max(zero_row, float(np.nanmax(np.abs(row))))
        p = AdiabaticParams(0.5, 1.0)
        coarse = fieldmod.delta_field(p, n_re=101, n_im=89)
        fine = fieldmod.delta_field(p, n_re=201, n_im=177)
        shared = fine.values[::2, ::2]
        ok = ~coarse.mask & ~fine.mask[::2, ::2]
        grid_diff = float(np.abs(shared - coarse.values)[ok].max())
        dense = fieldmod.delta_field(p, n_re=101, n_im=89, panels_per_unit=2 * fieldmod.PANELS_PER_UNIT)
        ok2 = ~coarse.mask & ~dense.mask
        path_diff = float(np.abs(dense.values - coarse.values)[ok2].max())
        return zero_row, grid_diff, path_diff

    (zero_row, grid_diff, path_diff), dt = _timed(run)
    ok = zero_row <= 1e-10 and grid_diff <= 1e-8 and path_diff <= 1e-8
    return CriterionResult("10", "Field sanity", "Delta = 0 on real axis; refinement-stable",
                           f"max |Delta| on real axis = {zero_row:.1e}; grid refinement {grid_diff:.1e}; "
                           f"path refinement {path_diff:.1e}",
                           "1e-10; 1e-8", ok, dt, 20.0)


CRITERIA: Dict[str, Callable] = {
    "1": criterion_1,
    "2": criterion_2,
    "3": criterion_3,
    "4+9": criteria_4_and_9,
    "5": criterion_5,
    "6": criterion_6,
    "7": criterion_7,
    "8": criterion_8,
    "10": criterion_10,
}

QUICK = ("1", "2", "5", "6", "8")


def run_all(quick: bool = False) -> List[CriterionResult]:
    warm_up()
    results: List[CriterionResult] = []
    for key, fn in CRITERIA.items():
        if quick and key not in QUICK:
            continue
        out = fn()
        results.extend(out if isinstance(out, tuple) else (out,))
    results.sort(key=lambda r: int(r.key))
    return results


def format_table(results: List[CriterionResult]) -> str:
    header = f"{'#':>3}  {'criterion':<44} {'measured':<70} {'tolerance':<28} {'time':>7}  status"
    lines = [header, "-" * len(header)]
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        lines.append(f"{r.key:>3}  {r.title:<44} {r.measured:<70} {r.tolerance:<28} {r.runtime:6.2f}s  {status}")
        lines.append(f"{'':>5}expected: {r.expected}")
    return "\n".join(lines)
