import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agplz import acceptance, ddp
from agplz.ddp import (
    QuadratureConfig,
    branch_points,
    default_path,
    dynamical_phase_integral,
    geometric_phase_integral,
    holonomy,
    predict_probability,
    topological_prefactor,
)
from agplz.errors import PathError, PathThroughCutError, RadiusError
from agplz.model import SIGMA_Y, AdiabaticParams, ContourPath, discriminant

# geometric phase along the imaginary axis at eta = 1, computed with mpmath
# from the analytic connection (independent of the path-walking code)
GEO_ORACLE = {0.5: -0.3371558706, 0.25: -0.2318765363, 0.125: -0.1534671659}


def pv_oracle(a, eps=mp.mpf("1e-30")):
    """``2 PV int_0^{y*} sgn(1 - y) f(y) dy`` evaluated with mpmath at 40 digits."""
    with mp.workdps(40):
        a = mp.mpf(a)
        f = lambda y: mp.sqrt(max(mp.mpf(0), (1 - y * y) + a * a / (1 - y * y) ** 2))
        ystar = mp.sqrt(1 + a ** (mp.mpf(2) / 3))
        left = mp.quad(f, [0, mp.mpf("0.5"), 1 - eps])
        right = mp.quad(f, [1 + eps, (1 + ystar) / 2, ystar])
        return float(2 * (left - right))


class TestBranchPoints:
    def test_collapse(self):
        bp = branch_points(AdiabaticParams(0.5, 0.0))
        assert bp.collapsed and all(t == 1j for t in bp.upper)

    def test_reference_values(self):
        bp = branch_points(AdiabaticParams(0.5, 1.0))
        assert bp.upper[0] == pytest.approx(1.181884j, abs=1e-6)
        assert bp.upper[0].real == 0.0
        # polynomial root oracle
        roots = np.roots(np.poly1d([1, 0, 1]) ** 3 + 0.0625)
        upper = sorted((r for r in roots if r.imag > 0), key=lambda z: z.real)
        assert bp.upper[1] == pytest.approx(upper[0], abs=1e-9)
        assert bp.upper[2] == pytest.approx(upper[2], abs=1e-9)
        assert bp.upper[1].real < 0 < bp.upper[2].real

    @pytest.mark.xfail(strict=True, reason="quoted root is not a zero of (1+tau^2)^3 + 1/16; see decisions ledger")
    def test_quoted_left_root(self):
        bp = branch_points(AdiabaticParams(0.5, 1.0))
        assert bp.upper[1] == pytest.approx(-0.18896 + 0.90955j, abs=1e-4)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0.1, 1.0), st.floats(1e-6, 1.0))
    def test_residuals(self, delta, eta):
        bp = branch_points(AdiabaticParams(delta, eta))
        assert max(bp.residuals) <= 1e-12
        for t in bp.upper:
            assert abs(discriminant(t, AdiabaticParams(delta, eta))) <= 1e-11

    def test_converge_to_pole(self):
        for eta in (1e-3, 1e-6, 1e-9):
            bp = branch_points(AdiabaticParams(0.5, eta))
            assert max(abs(t - 1j) for t in bp.upper) < 2 * (eta / 4) ** (2 / 3)


class TestDynamicalPhase:
    def test_lz_value(self):
        assert dynamical_phase_integral(AdiabaticParams(0.5, 0.0)) == pytest.approx(math.pi / 2, abs=1e-12)

    @pytest.mark.parametrize("a", [0.0125, 0.05, 0.1, 0.25, 0.4])
    def test_against_mpmath(self, a):
        assert dynamical_phase_integral(AdiabaticParams(1.0, 2 * a)) == pytest.approx(pv_oracle(a), abs=1e-10)

    @pytest.mark.parametrize("a", [0.025, 0.25])
    def test_pv_window_independence(self, a):
        p = AdiabaticParams(1.0, 2 * a)
        vals = [dynamical_phase_integral(p, QuadratureConfig(pv_epsilon0=e)) for e in (0.1, 0.05, 0.025)]
        assert max(vals) - min(vals) <= 1e-11

    def test_rejects_large_a(self):
        with pytest.raises(ValueError):
            dynamical_phase_integral(AdiabaticParams(1.0, 1.0))

    @pytest.mark.xfail(strict=True, reason="integral rises above pi/2 at small a; no -2a/3 term; see decisions ledger")
    def test_small_a_slope(self):
        for a in (0.1, 0.05, 0.025):
            slope = (math.pi / 2 - dynamical_phase_integral(AdiabaticParams(1.0, 2 * a))) / (2 * a / 3)
            assert abs(slope - 1) <= 3 * a ** (1 / 3)

    @pytest.mark.xfail(strict=True, reason="same small-a discrepancy as the slope test")
    def test_small_a_bound(self):
        a_vals = np.linspace(0.01, 0.25, 12)
        C = max(abs(dynamical_phase_integral(AdiabaticParams(1.0, 2 * a)) - (math.pi / 2 - 2 * a / 3))
                / a ** (4 / 3) for a in a_vals)
        assert C < 3


class TestGeometricPhase:
    def test_zero_at_eta0(self):
        assert geometric_phase_integral(AdiabaticParams(0.5, 0.0)) == 0.0

    @pytest.mark.parametrize("delta", sorted(GEO_ORACLE))
    def test_against_oracle(self, delta):
        g = geometric_phase_integral(AdiabaticParams(delta, 1.0))
        assert g == pytest.approx(GEO_ORACLE[delta], abs=1e-9)

    def test_path_near_gauge_pole(self):
        # the capped offset lands ~1e-4 from a zero of 1 + tau^2 - i a; mpmath value on a clear path
        p = AdiabaticParams(0.25, 0.75)
        assert geometric_phase_integral(p) == pytest.approx(-0.1960201165, abs=1e-7)
        for off in (0.005, 0.02):
            assert geometric_phase_integral(p, default_path(p, off)) == pytest.approx(
                geometric_phase_integral(p), abs=1e-10)

    def test_decreasing_in_delta(self):
        G = [abs(geometric_phase_integral(AdiabaticParams(d, 1.0))) for d in (0.5, 0.25, 0.125)]
        assert G[0] > G[1] > G[2] > 0

    def test_offset_halving(self):
        p = AdiabaticParams(0.5, 1.0)
        a = geometric_phase_integral(p, default_path(p, 0.05))
        b = geometric_phase_integral(p, default_path(p, 0.025))
        assert abs(a - b) <= 1e-6

    def test_left_path_agrees(self):
        # mirror-image path stays in the same cut-free region
        p = AdiabaticParams(0.5, 1.0)
        top = branch_points(p).upper[0]
        left = ContourPath((0.0, -0.04, -0.04 + 1j * top.imag, top))
        assert geometric_phase_integral(p, left) == pytest.approx(geometric_phase_integral(p), abs=1e-6)

    def test_path_through_cut(self):
        p = AdiabaticParams(0.5, 1.0)
        top = branch_points(p).upper[0]
        with pytest.raises(PathThroughCutError):
            geometric_phase_integral(p, ContourPath((0.0, 0.5, 0.5 + 1.5j, top)))

    def test_path_must_end_on_branch_point(self):
        with pytest.raises(PathError):
            geometric_phase_integral(AdiabaticParams(0.5, 1.0), ContourPath((0.0, 0.05, 0.05 + 1j)))


class TestHolonomy:
    @pytest.mark.parametrize("eta", [0.0, 0.5, 1.0])
    def test_closed_form(self, eta):
        ref = math.cos(eta * math.pi / 2) * np.eye(2) + 1j * math.sin(eta * math.pi / 2) * SIGMA_Y
        assert np.abs(holonomy(AdiabaticParams(0.5, eta), 0.5) - ref).max() <= 1e-12

    def test_reference_matrices(self):
        np.testing.assert_allclose(holonomy(AdiabaticParams(0.5, 0.0), 0.5), np.eye(2), atol=1e-14)
        np.testing.assert_allclose(holonomy(AdiabaticParams(0.5, 1.0), 0.5), [[0, 1], [-1, 0]], atol=1e-14)
        r = math.sqrt(0.5)
        np.testing.assert_allclose(holonomy(AdiabaticParams(0.5, 0.5), 0.5), [[r, r], [-r, r]], atol=1e-5)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 1.0), st.floats(0.0, 1.0))
    def test_radius_independence(self, delta, eta):
        p = AdiabaticParams(delta, eta)
        mats = [holonomy(p, r) for r in (0.2, 0.5, 1.0)]
        assert max(np.abs(m - mats[0]).max() for m in mats) <= 1e-8

    def test_unitary(self):
        M = holonomy(AdiabaticParams(0.3, 0.7), 1.5)
        np.testing.assert_allclose(M @ M.conj().T, np.eye(2), atol=1e-13)

    @pytest.mark.parametrize("r", [1e-4, 2.0, 5.0])
    def test_bad_radius(self, r):
        with pytest.raises(RadiusError):
            holonomy(AdiabaticParams(0.5, 1.0), r)

    def test_broken_sign_detected(self, monkeypatch):
        good = ddp.holonomy
        monkeypatch.setattr(ddp, "holonomy", lambda p, r, n=None: good(p, r, n).T)
        assert not acceptance.criterion_6().passed


class TestPrediction:
    def test_lz(self):
        pb = predict_probability(AdiabaticParams(0.5, 0.0), "closed_form")
        assert pb.P_pred == pytest.approx(1.8674e-3, rel=1e-4)
        assert pb.dyn_im == math.pi / 2

    def test_counterdiabatic_zero(self):
        assert predict_probability(AdiabaticParams(0.5, 1.0), "closed_form").P_pred == 0.0
        assert predict_probability(AdiabaticParams(0.5, 1.0), "quadrature").P_pred == 0.0

    def test_closed_form_formula(self):
        pb = predict_probability(AdiabaticParams(0.5, 0.5), "closed_form")
        assert pb.P_pred == pytest.approx(0.5 * math.exp(-1 / 3 - 2 * math.pi), rel=1e-12)

    def test_quadrature_at_eta0(self):
        pb = predict_probability(AdiabaticParams(0.5, 0.0), "quadrature")
        assert pb.P_pred == pytest.approx(math.exp(-2 * math.pi), rel=1e-10)

    @pytest.mark.xfail(strict=True, reason="quadrature P is 24% below the closed form at eta=0.5; see decisions ledger")
    def test_quadrature_vs_closed(self):
        p = AdiabaticParams(0.5, 0.5)
        q = predict_probability(p, "quadrature").P_pred
        c = predict_probability(p, "closed_form").P_pred
        assert q == pytest.approx(c, rel=0.05)

    @pytest.mark.parametrize("method", ["closed_form", "quadrature"])
    def test_monotone_in_eta(self, method):
        P = [predict_probability(AdiabaticParams(0.5, e), method).P_pred for e in np.linspace(0, 1, 6)]
        assert all(x > y for x, y in zip(P, P[1:]))

    def test_topological_prefactor(self):
        assert topological_prefactor(0.0) == 1.0
        assert topological_prefactor(1.0) == 0.0
        assert topological_prefactor(0.5) == pytest.approx(0.5)

    def test_breakdown_dict(self):
        d = predict_probability(AdiabaticParams(0.5, 0.25)).as_dict()
        assert set(d) == {"method", "delta", "eta", "dyn_im", "geo_im", "topo_prefactor", "P"}
