import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import erfcx

from inhomlimit.ensemble import Spectrum, quadrature_grid, spectrum
from inhomlimit.errors import EmptyWindow, NonPositiveEta, NonPositiveInput, NoWindowFound
from inhomlimit.recovery import (
    at_window_width,
    beta_from_spectra,
    compensation_plan,
    dressed_beta,
    extract_beta,
    inhomogeneous_limit,
    inhomogeneous_peak,
    saturation_parameter,
    predicted_beta,
    saturation_beta,
    scattering_rates,
    simulate_beta,
    two_photon_resonance,
    voigt_absorption,
)
from inhomlimit.scheme import preset

COARSE = quadrature_grid(1001)
FIG2 = (29.0, -270.0, 220.0, 2.875, 29.6, -300.0, 220.0, 3.033)


def test_inhomogeneous_limit_values():
    assert round(inhomogeneous_limit(220, 2.875), 2) == 61.06
    assert round(inhomogeneous_limit(5000, 50), 1) == 79.8
    assert inhomogeneous_limit(2.0, 2.0) == pytest.approx(math.sqrt(2 / math.pi))
    with pytest.raises(NonPositiveInput):
        inhomogeneous_limit(0, 1)


def test_voigt_against_erfc_and_quadrature():
    s, g = 220.0, 2.875
    y = g / (math.sqrt(2) * s)
    assert inhomogeneous_peak(s, g) == pytest.approx(math.sqrt(math.pi / 2) * g / s * erfcx(y), rel=1e-12)
    x = 150.0
    num, _ = quad(lambda d: math.exp(-d * d / (2 * s * s)) / (math.sqrt(2 * math.pi) * s)
                  * g * g / (g * g + (x - d) ** 2), -12 * s, 12 * s, points=[x], limit=400)
    assert voigt_absorption(x, s, g) == pytest.approx(num, rel=1e-8)


def test_compensation_examples():
    p = compensation_plan(29, -270, 1)
    assert (p.omega_r, p.delta_r) == (29, -270)
    q = compensation_plan(29, -270, 795 / 780)
    assert (round(q.omega_r, 2), round(q.delta_r, 2)) == (29.28, -275.19)
    with pytest.raises(NonPositiveEta):
        compensation_plan(29, -270, 0)


@given(st.floats(1, 100), st.floats(-1000, -50), st.floats(0.2, 5),
       st.lists(st.floats(-40, 40), min_size=100, max_size=100))
def test_compensation_identity(omega, delta, eta, deltas):
    p = compensation_plan(omega, delta, eta)
    assert abs(p.omega_r - omega * math.sqrt(eta)) <= 1e-12 * p.omega_r
    for d in deltas:
        lhs = omega**2 / (delta - d)
        rhs = p.omega_r**2 / (p.delta_r - eta * d)
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_scattering_rates():
    g, gr = scattering_rates(*FIG2)
    assert round(g, 5) == 0.01993 and round(gr, 5) == 0.01920
    assert scattering_rates(0, -270, 220, 2.875, 29, -270, 220, 3.033).gamma_sc == 0
    vals = [scattering_rates(29, d, 220, 2.875, 29, d, 220, 3.033).gamma_sc for d in (-100, -1e3, -1e4, -1e5)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(NonPositiveInput):
        scattering_rates(29, -270, 0, 2.875, 29, -270, 220, 3.033)


def test_predicted_beta_fig2():
    pred = predicted_beta(scattering_rates(*FIG2), 0.35)
    assert round(pred.beta0, 2) == 61.06
    assert round(pred.beta, 2) == 3.13
    assert pred.beta == pytest.approx(pred.beta0 * pred.gamma_sc / (pred.gamma_sc + pred.gamma_sc_r + 0.35),
                                      rel=1e-12)


def test_mu_example():
    r = scattering_rates(29, -270, 220, 2.875, 29, -270, 220, 3.033)
    assert round(predicted_beta(r, 0.35).mu, 3) == 0.342
    assert round(saturation_parameter(29, -270, 220, 2.875, 3.033, 0.35), 3) == 0.342


def test_saturates_at_half():
    r = scattering_rates(1e5, -270, 220, 2.875, 1e5, -270, 220, 2.875)
    pred = predicted_beta(r, 0.35)
    assert pred.beta == pytest.approx(pred.beta0 / 2, rel=1e-6)


@given(st.floats(0.5, 200), st.floats(-3000, -10), st.floats(0.5, 5), st.floats(0.5, 5),
       st.floats(0.01, 2))
def test_symmetric_forms_agree(omega, delta, gamma, gamma_r, gamma_sg):
    r = scattering_rates(omega, delta, 220, gamma, omega, delta, 220, gamma_r)
    pred = predicted_beta(r, gamma_sg)
    assert pred.beta_saturation_form == pytest.approx(pred.beta, rel=1e-12)
    assert 0 <= pred.beta <= pred.beta0


@given(st.floats(1, 100), st.floats(0.01, 1.0))
def test_monotonicity(omega, gamma_sg):
    def b(om, gsg):
        return predicted_beta(scattering_rates(om, -270, 220, 2.875, 29, -270, 220, 3.033), gsg).beta
    assert b(omega * 1.1, gamma_sg) > b(omega, gamma_sg)
    assert b(omega, gamma_sg * 1.1) < b(omega, gamma_sg)


def test_dressed_form_reduces_to_saturation_form():
    b0 = 61.0
    om = 50.0
    mu = saturation_parameter(om, -5000, 0, 2.875, 2.875, 0.35)
    assert dressed_beta(b0, 2.875, 2.875, 0.35, om, -5000) == pytest.approx(
        saturation_beta(b0, 2.875, 2.875, mu), rel=2e-3)


def test_two_photon_resonance_positions():
    assert two_photon_resonance(preset("n_type", delta=-250.0)) == pytest.approx(-250.0)
    assert two_photon_resonance(preset("ladder_rydberg", delta=10.0)) == pytest.approx(-10.0)


def test_beta_recovery_off_is_bounded():
    b = simulate_beta(preset("n_type", omega_r=0.0), (-280, -260), COARSE).beta
    assert b <= 1.02


def test_beta_coupling_off_is_voigt_ratio():
    s = preset("n_type", omega=0.0, omega_r=0.0)
    with_fields = spectrum(s, (-280, -260), 21, COARSE)
    bare = spectrum(preset("two_level"), (-5, 5), 11, COARSE)
    b = extract_beta(with_fields, bare, (-280, -260))
    expected = voigt_absorption(-260.0, 220, 2.875) / voigt_absorption(0.0, 220, 2.875)
    assert b == pytest.approx(expected, rel=2e-3)
    assert b <= 1
    with pytest.raises(EmptyWindow):
        extract_beta(with_fields, bare, (0, 10))


def test_beta_at_compensation_exceeds_closed_form():
    s = preset("n_type")
    b, fine, bare = beta_from_spectra(s, grid=COARSE, n_points=21)
    assert b > 3
    assert b == pytest.approx(simulate_beta(s, None, COARSE).beta, rel=1e-3)


@pytest.fixture(scope="module")
def window_spectrum():
    s = preset("n_type", omega=29.0, omega_r=29.0, delta=-270.0, delta_r=-270.0)
    return spectrum(s, (-700.0, 300.0), 501, COARSE)


def test_window_width_n_type(window_spectrum):
    w = at_window_width(window_spectrum)
    assert abs(w / 116 - 1) < 0.25


@pytest.fixture(scope="module")
def ladder_spectrum():
    return spectrum(preset("ladder_rydberg"), (-300.0, 300.0), 601, COARSE)


def test_window_width_ladder_dressed(ladder_spectrum):
    # the unshifted ground level sees a single dressed pair split by sqrt(W^2 + W_r^2)
    w = at_window_width(ladder_spectrum)
    assert abs(w / (2 * math.hypot(55, 45)) - 1) < 0.10


@pytest.mark.xfail(strict=True, reason="ladder window follows 2*sqrt(W^2+W_r^2)=142 MHz, not 2W+2W_r")
def test_window_width_ladder_sum_rule(ladder_spectrum):
    assert abs(at_window_width(ladder_spectrum) / 200 - 1) < 0.25


def test_no_window_without_drives():
    sp = spectrum(preset("n_type", omega=0.0, omega_r=0.0), (-400, 200), 61, COARSE)
    with pytest.raises(NoWindowFound):
        at_window_width(sp)


def test_window_background_options():
    x = np.linspace(-10, 10, 21)
    y = np.where(np.abs(x) < 1, 5.0, np.where(np.abs(x) < 6, 0.1, 1.0))
    sp = Spectrum(x, y)
    assert at_window_width(sp, background=1.0) == pytest.approx(10.0 + 8 / 9, rel=1e-12)
    assert at_window_width(sp, background=lambda d: np.ones_like(d)) == at_window_width(sp, background=1.0)
    with pytest.raises(NoWindowFound):
        at_window_width(sp)  # no metadata for the default background
