import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from agplz.errors import StepSizeUnderflow
from agplz.model import AdiabaticParams, hamiltonian
from agplz.tdse import (
    adiabatic_trajectory,
    diabatic_trajectory,
    propagate_adiabatic,
    propagate_diabatic,
    real_axis_basis,
    transition_probability,
)

LZ_HALF = math.exp(-2 * math.pi)


def test_lz_reference_value():
    rep = transition_probability(AdiabaticParams(0.5, 0.0))
    assert rep.P == pytest.approx(1.8674e-3, rel=0.02)
    assert rep.P == pytest.approx(LZ_HALF, rel=0.02)
    assert not rep.resolution_limited


@pytest.mark.xfail(strict=True, reason="integrated P is 5.60e-4, 16% below the closed form; see decisions ledger")
def test_modified_lz_reference_value():
    rep = transition_probability(AdiabaticParams(0.5, 0.5))
    expected = 0.5 * math.exp(-1 / 3) * LZ_HALF
    assert expected == pytest.approx(6.69e-4, rel=1e-3)
    assert rep.P == pytest.approx(expected, rel=0.10)


@pytest.mark.parametrize("frame", ["diabatic", "adiabatic"])
def test_counterdiabatic_zero(frame):
    assert transition_probability(AdiabaticParams(0.5, 1.0), frame=frame).P <= 1e-8


def test_counterdiabatic_whole_trajectory():
    # the driven state follows the eigenstates of the undressed sweep
    p = AdiabaticParams(0.5, 1.0)
    bare = p.with_eta(0.0)
    v0, _ = real_axis_basis(-200.0, bare)
    taus = np.linspace(-199.0, 200.0, 400)
    worst = 0.0
    for sv in diabatic_trajectory(p, -200.0, taus, v0, tol=1e-10):
        _, v1 = real_axis_basis(sv.tau, bare)
        worst = max(worst, abs(np.vdot(v1, sv.psi)) ** 2)
    assert worst <= 1e-8


def test_real_axis_basis_is_eigenbasis():
    p = AdiabaticParams(0.4, 0.7)
    for tau in (-30.0, -0.3, 0.0, 2.0):
        h = hamiltonian(tau, p)
        v0, v1 = real_axis_basis(tau, p)
        e = math.sqrt(tau * tau + 1 + (p.a / (1 + tau * tau)) ** 2)
        np.testing.assert_allclose(h @ v0, -e * v0, atol=1e-14)
        np.testing.assert_allclose(h @ v1, e * v1, atol=1e-14)
        assert abs(np.vdot(v0, v1)) < 1e-15


def test_frozen_hamiltonian_matches_expm():
    p = AdiabaticParams(0.5, 0.6)
    psi0 = np.array([0.6, 0.8j])
    out = propagate_diabatic(p, 0.0, 7.0, psi0, tol=1e-12, frozen_tau=0.4)
    ref = expm(-1j * hamiltonian(0.4, p) * 7.0 / p.delta) @ psi0
    assert np.abs(out.psi - ref).max() <= 1e-9


@pytest.mark.parametrize("method", ["dop853", "dopri5"])
def test_pictures_agree(method):
    p = AdiabaticParams(0.6, 0.3)
    psi0 = np.array([1.0, 0.0], dtype=complex)
    a = propagate_diabatic(p, -10.0, 10.0, psi0, tol=1e-11, method=method, picture="interaction")
    b = propagate_diabatic(p, -10.0, 10.0, psi0, tol=1e-11, method=method, picture="plain")
    assert np.abs(a.psi - b.psi).max() < 1e-7


def test_adiabatic_amplitudes_reconstruct_diabatic_state():
    p = AdiabaticParams(0.5, 0.5)
    c = propagate_adiabatic(p, -60.0, 3.0, tol=1e-11)
    v0, _ = real_axis_basis(-60.0, p)
    psi = propagate_diabatic(p, -60.0, 3.0, v0, tol=1e-11).psi
    assert np.abs(c.reconstruct(p) - psi).max() < 1e-7


def test_adiabatic_phases_accumulate():
    p = AdiabaticParams(0.5, 0.0)
    tr = adiabatic_trajectory(p, -5.0, [0.0, 5.0], tol=1e-10)
    # dynamical phase of the upper level: int e dtau, e = sqrt(1 + tau^2)
    F = lambda t: 0.5 * (t * math.sqrt(1 + t * t) + math.asinh(t))
    assert tr[-1].dyn1 == pytest.approx(F(5) - F(-5), rel=1e-8)
    assert tr[-1].phase1 == pytest.approx((F(5) - F(-5)) / p.delta, rel=1e-8)
    assert tr[-1].dyn0 == pytest.approx(-tr[-1].dyn1)
    assert abs(tr[-1].geo0) < 1e-12


def test_sudden_limit_frames_agree():
    p = AdiabaticParams(50.0, 0.0)
    dia = transition_probability(p, frame="diabatic").P
    adi = transition_probability(p, frame="adiabatic").P
    assert adi == pytest.approx(dia, abs=1e-6)
    assert 0.5 < dia < 1.0


@pytest.mark.parametrize("delta", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("eta", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_frame_equivalence(delta, eta):
    p = AdiabaticParams(delta, eta)
    dia = transition_probability(p, frame="diabatic")
    adi = transition_probability(p, frame="adiabatic")
    assert abs(dia.P - adi.P) <= 1e-6


@settings(max_examples=12, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.0, 1.0))
def test_norm_conservation(delta, eta):
    p = AdiabaticParams(delta, eta)
    v0, _ = real_axis_basis(-200.0, p)
    for sv in diabatic_trajectory(p, -200.0, np.linspace(-150, 200, 8), v0, tol=1e-10):
        assert abs(sv.norm - 1) <= 100 * 1e-10


def test_tolerance_convergence():
    p = AdiabaticParams(0.4, 0.3)
    Ps = [transition_probability(p, tol=t).P for t in (1e-7, 5e-8, 2.5e-8)]
    d1, d2 = abs(Ps[1] - Ps[0]), abs(Ps[2] - Ps[1])
    assert d2 <= 10 * d1 + 1e-15


@pytest.mark.parametrize("delta", [0.3, 0.6])
def test_tau_max_stability(delta):
    p = AdiabaticParams(delta, 0.5)
    a = transition_probability(p, tau_max=200).P
    b = transition_probability(p, tau_max=400).P
    assert abs(a - b) <= 1e-5


def test_dopri5_selectable():
    rep = transition_probability(AdiabaticParams(0.5, 0.0), tol=1e-12, method="dopri5")
    assert rep.method == "dopri5"
    assert rep.P == pytest.approx(LZ_HALF, rel=0.02)


def test_resolution_limited_flag():
    rep = transition_probability(AdiabaticParams(0.15, 0.0), tol=1e-10)
    assert rep.resolution_limited
    assert rep.as_dict()["resolution_limited"] is True


@pytest.mark.parametrize("kw", [dict(tol=1e-3), dict(tol=1e-15), dict(tau_max=10.0), dict(frame="sideways")])
def test_bad_arguments(kw):
    with pytest.raises(ValueError):
        transition_probability(AdiabaticParams(0.5, 0.0), **kw)


def test_step_underflow_reported(monkeypatch):
    from agplz import rk

    def fake(*args, **kwargs):
        raise StepSizeUnderflow("h below minimum")

    monkeypatch.setattr(rk, "integrate", fake)
    with pytest.raises(StepSizeUnderflow):
        transition_probability(AdiabaticParams(0.5, 0.0))
