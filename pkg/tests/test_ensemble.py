import math

import numpy as np
import pytest
from scipy.special import erfcx

from inhomlimit.ensemble import (
    Spectrum,
    default_grid,
    ensemble_absorption,
    gaussian_beam_profile,
    intensity_average,
    locate_peak,
    peak,
    quadrature_grid,
    resolve_workers,
    spectrum,
    spectrum_at,
)
from inhomlimit.errors import BadGridParams, BadProfile, EmptyWindow
from inhomlimit.scheme import preset

SIGMA, GAMMA = 220.0, 2.875
COARSE = quadrature_grid(1001)


def voigt_peak(sigma, gamma):
    y = gamma / (math.sqrt(2) * sigma)
    return math.sqrt(math.pi / 2) * gamma / sigma * erfcx(y)


def test_small_grid_symmetry():
    g = quadrature_grid(3, 5)
    assert g.weights[0] == g.weights[2]
    assert g.weights[1] > g.weights[0]


def test_grid_moments():
    g = default_grid()
    assert abs(math.fsum(g.nodes * g.weights)) < 1e-12
    assert abs(math.fsum(g.weights) - 1) < 1e-12
    assert abs(math.fsum(g.nodes**2 * g.weights) - 1) < 2e-3
    assert np.all(np.diff(g.nodes) > 0) and np.all(g.weights >= 0)


@pytest.mark.parametrize("n, span", [(4, 5), (1, 5), (101, 3.9)])
def test_bad_grid(n, span):
    with pytest.raises(BadGridParams):
        quadrature_grid(n, span)


def test_voigt_peak():
    a = ensemble_absorption(preset("two_level", sigma=SIGMA, gamma=GAMMA), 0.0)
    assert a == pytest.approx(0.01621, rel=5e-3)
    assert a == pytest.approx(voigt_peak(SIGMA, GAMMA), rel=5e-3)


def test_homogeneous_limit():
    a = ensemble_absorption(preset("two_level", sigma=0.001 * GAMMA, gamma=GAMMA), 0.0)
    assert a == pytest.approx(1.0, abs=1e-3)


def test_recovery_off_stays_below_limit():
    limit = ensemble_absorption(preset("two_level"), 0.0, COARSE)
    off = preset("n_type", omega_r=0.0)
    for x in (-300.0, -272.0, -270.0, -268.0, -100.0, 0.0, 50.0):
        assert ensemble_absorption(off, x, COARSE) <= 1.02 * limit


def test_empty_coupling_equals_two_level():
    det = np.linspace(-400, 200, 13)
    a = spectrum_at(preset("lambda", omega=0.0), det).absorption
    b = spectrum_at(preset("two_level"), det).absorption
    np.testing.assert_allclose(a, b, atol=1e-6, rtol=0)


def test_enhanced_peak_and_window():
    sp = spectrum(preset("n_type"), (-400.0, 0.0), 201, COARSE)
    limit = ensemble_absorption(preset("two_level"), 0.0, COARSE)
    i = int(np.argmax(sp.absorption))
    assert abs(sp.probe_detunings[i] + 270) <= 2
    assert sp.absorption[i] > limit
    # transmission window on both sides of the peak
    for x in (-310.0, -230.0):
        j = int(np.argmin(abs(sp.probe_detunings - x)))
        assert sp.absorption[j] < 0.5 * limit


def test_raman_feature_below_one_photon_peak():
    off = preset("n_type", omega_r=0.0)
    raman = locate_peak(off, (-280.0, -260.0), COARSE)
    one = ensemble_absorption(off, 0.0, COARSE)
    assert raman.height < one


def test_spectrum_independent_of_workers():
    s = preset("n_type")
    a = spectrum(s, (-300, -240), 7, COARSE, workers=1)
    b = spectrum(s, (-300, -240), 7, COARSE, workers=3)
    assert a.to_csv() == b.to_csv()


def test_workers_env(monkeypatch):
    monkeypatch.setenv("INHOMLIMIT_WORKERS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    monkeypatch.delenv("INHOMLIMIT_WORKERS")
    assert resolve_workers() == 1


def test_csv_round_trip(tmp_path):
    sp = spectrum(preset("two_level"), (-10, 10), 5, COARSE)
    sp.write(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "probe_detuning_mhz,absorption_norm"
    back = Spectrum.read(tmp_path / "s.csv")
    np.testing.assert_allclose(back.absorption, sp.absorption, rtol=1e-8)
    assert back.metadata["grid_nodes"] == 1001
    assert back.metadata["scheme_digest"] == preset("two_level").digest()
    assert back.metadata["probe_rabi"] == pytest.approx(0.01 * GAMMA)


def test_grid_convergence():
    s = preset("n_type")
    fine = quadrature_grid(8001)
    for x in (-270.0, 0.0, -320.0):
        a = ensemble_absorption(s, x)
        b = ensemble_absorption(s, x, fine)
        assert abs(b / a - 1) < 1e-3


def test_single_profile_is_plain_spectrum():
    s = preset("n_type")
    a = intensity_average(s, (-280, -260), 5, COARSE)
    b = spectrum(s, (-280, -260), 5, COARSE)
    np.testing.assert_array_equal(a.absorption, b.absorption)


def test_two_entry_profile_is_mean():
    s = preset("n_type")
    a = intensity_average(s, (-280, -260), 5, COARSE, [(1.0, 0.5), (0.25, 0.5)])
    full = spectrum(s, (-280, -260), 5, COARSE).absorption
    quarter = spectrum(s.scale_drives(0.25), (-280, -260), 5, COARSE).absorption
    np.testing.assert_allclose(a.absorption, 0.5 * (full + quarter), rtol=1e-13)


@pytest.mark.parametrize("profile", [[], [(0.0, 1.0)], [(1.0, 0.7)], [(1.0, 1.2), (0.5, -0.2)]])
def test_bad_profile(profile):
    with pytest.raises(BadProfile):
        intensity_average(preset("n_type"), (-280, -260), 3, COARSE, profile)


def test_gaussian_beam_lowers_enhancement():
    prof = gaussian_beam_profile(8)
    assert math.fsum(w for _, w in prof) == pytest.approx(1.0, abs=1e-12)
    s = preset("n_type")
    det = np.linspace(-274, -266, 33)
    avg = intensity_average(s, (det[0], det[-1]), det.size, COARSE, prof)
    uni = spectrum(s, (det[0], det[-1]), det.size, COARSE)
    assert peak(avg, (-274, -266)).height < peak(uni, (-274, -266)).height


def test_peak_of_symmetric_line():
    sp = spectrum(preset("two_level"), (-20, 20), 9, COARSE)
    p = peak(sp, (-20, 20))
    assert abs(p.detuning) <= 5.0 and not p.at_edge


def test_peak_edge_and_empty_window():
    sp = Spectrum([0, 1, 2, 3], [0.1, 0.2, 0.3, 0.4])
    p = peak(sp, (0.5, 2.5))
    assert p.at_edge and p.detuning == 2
    with pytest.raises(EmptyWindow):
        peak(sp, (10, 11))


def test_two_photon_peak_position():
    p = locate_peak(preset("n_type"), (-280.0, -260.0), COARSE)
    # compensated resonance sits at the coupling detuning; linewidth ~ gamma_sg + scattering
    assert abs(p.detuning + 270.0) < 0.39
