"""
Closed-form enhancement estimates and spectrum-based measurements.

Coupling strengths ``omega`` here use the off-diagonal convention of the
presets: light shift ``omega**2 / detuning`` and scattering contribution
``omega**2 gamma / detuning**2`` to the two-photon linewidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import wofz

from .ensemble import (
    Peak,
    QuadratureGrid,
    Spectrum,
    default_grid,
    locate_peak,
    peak,
    spectrum_at,
)
from .errors import NonPositiveEta, NonPositiveInput, NoWindowFound
from .scheme import LevelScheme, reference_scheme


def inhomogeneous_limit(sigma: float, gamma: float) -> float:
    """Factor ``sqrt(2/pi) sigma / gamma`` by which a Gaussian spread of
    resonance frequencies lowers the peak absorption (``sigma >> gamma``)."""
    if sigma <= 0 or gamma <= 0:
        raise NonPositiveInput("sigma and gamma must be positive")
    return math.sqrt(2.0 / math.pi) * sigma / gamma


def voigt_absorption(detuning, sigma: float, gamma: float):
    """Normalized Doppler-broadened two-level absorption (weak probe).

    Lorentzian of HWHM ``gamma`` with unit peak, convolved with a Gaussian of
    standard deviation ``sigma``.
    """
    z = (np.asarray(detuning, dtype=float) + 1j * gamma) / (math.sqrt(2.0) * sigma)
    return math.sqrt(math.pi / 2.0) * (gamma / sigma) * wofz(z).real


def inhomogeneous_peak(sigma: float, gamma: float) -> float:
    """Peak of :func:`voigt_absorption`; tends to ``1 / beta0`` for sigma >> gamma."""
    return float(voigt_absorption(0.0, sigma, gamma))


@dataclass(frozen=True)
class CompensationPlan:
    omega_r: float
    delta_r: float
    eta: float


def compensation_plan(omega: float, delta: float, eta: float) -> CompensationPlan:
    """Recovery-field strength and detuning whose light shift tracks the
    coupling field's for every absorber when ``delta_r = eta * delta_shift``."""
    if not eta > 0:
        raise NonPositiveEta(f"eta must be positive, got {eta}")
    return CompensationPlan(omega * math.sqrt(eta), delta * eta, eta)


@dataclass(frozen=True)
class ScatteringRates:
    gamma_sc: float
    gamma_sc_r: float
    omega: float
    delta: float
    sigma: float
    gamma: float
    omega_r: float
    delta_r: float
    sigma_r: float
    gamma_r: float

    def __iter__(self):
        return iter((self.gamma_sc, self.gamma_sc_r))

    @property
    def symmetric(self) -> bool:
        return (math.isclose(self.omega, self.omega_r, rel_tol=1e-12)
                and math.isclose(self.delta, self.delta_r, rel_tol=1e-12)
                and math.isclose(self.sigma, self.sigma_r, rel_tol=1e-12))


def scattering_rates(omega, delta, sigma, gamma, omega_r, delta_r, sigma_r, gamma_r) -> ScatteringRates:
    """Ensemble-averaged broadening of the two-photon line by each field."""
    if min(sigma, gamma, sigma_r, gamma_r) <= 0:
        raise NonPositiveInput("sigma and gamma values must be positive")
    if omega < 0 or omega_r < 0:
        raise NonPositiveInput("Rabi frequencies must be nonnegative")
    g = omega**2 / (delta**2 + sigma**2) * gamma
    gr = omega_r**2 / (delta_r**2 + sigma_r**2) * gamma_r
    return ScatteringRates(g, gr, omega, delta, sigma, gamma, omega_r, delta_r, sigma_r, gamma_r)


def saturation_parameter(omega, delta, sigma, gamma, gamma_r, gamma_sg) -> float:
    """mu with mu**2 = omega**2 (gamma + gamma_r) / ((delta**2 + sigma**2) gamma_sg)."""
    if gamma_sg == 0:
        return math.inf
    return math.sqrt(omega**2 * (gamma + gamma_r) / ((delta**2 + sigma**2) * gamma_sg))


def omega_for_mu(mu, delta, sigma, gamma, gamma_r, gamma_sg) -> float:
    return mu * math.sqrt((delta**2 + sigma**2) * gamma_sg / (gamma + gamma_r))


def saturation_beta(beta0, gamma, gamma_r, mu) -> float:
    return beta0 * gamma / (gamma + gamma_r) * mu**2 / (1.0 + mu**2)


def dressed_beta(beta0, gamma, gamma_r, gamma_sg, omega, delta, sigma=0.0) -> float:
    """Symmetric-case enhancement with exact two-level dressing.

    The recovery field leaves only ``cos^2`` of the bare ground state in the
    dressed ground state, and the dressed ``s`` level borrows ``sin^2`` of the
    excited state, where ``sin^2 = (1 - |D| / sqrt(D**2 + 4 omega**2)) / 2``
    with ``D**2 = delta**2 + sigma**2``.  Reduces to :func:`saturation_beta` for
    ``omega << |delta|`` and peaks below ``beta0 gamma / (gamma + gamma_r)``.
    """
    d = math.hypot(delta, sigma)
    s2 = 0.5 * (1.0 - d / math.sqrt(d * d + 4.0 * omega * omega))
    c2 = 1.0 - s2
    return beta0 * c2 * gamma * s2 / (s2 * (gamma + gamma_r) + gamma_sg)


@dataclass(frozen=True)
class EnhancementPrediction:
    beta0: float
    gamma_sc: float
    gamma_sc_r: float
    mu: float
    beta: float
    beta_saturation_form: float | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("beta0", "gamma_sc", "gamma_sc_r", "mu", "beta", "beta_saturation_form")}


def predicted_beta(rates: ScatteringRates, gamma_sg: float, beta0: float | None = None) -> EnhancementPrediction:
    """``beta0 * Gamma / (Gamma + Gamma_r + gamma_sg)``.

    In the symmetric case (equal coupling and recovery strengths, detunings and
    widths) the saturation form ``beta0 gamma/(gamma+gamma_r) mu^2/(1+mu^2)``
    is also reported; the two agree identically there.
    """
    if gamma_sg < 0:
        raise NonPositiveInput("gamma_sg must be nonnegative")
    if beta0 is None:
        beta0 = inhomogeneous_limit(rates.sigma, rates.gamma)
    g, gr = rates.gamma_sc, rates.gamma_sc_r
    total = g + gr + gamma_sg
    beta = beta0 * g / total if total > 0 else 0.0
    mu = saturation_parameter(rates.omega, rates.delta, rates.sigma, rates.gamma,
                              rates.gamma_r, gamma_sg)
    sat = None
    if rates.symmetric:
        sat = beta0 * rates.gamma / (rates.gamma + rates.gamma_r) if math.isinf(mu) else \
            saturation_beta(beta0, rates.gamma, rates.gamma_r, mu)
    return EnhancementPrediction(beta0, g, gr, mu, beta, sat)


# ---------------------------------------------------------------------------
# measurements on simulated spectra


def extract_beta(spectrum_with_fields: Spectrum, reference_spectrum_bare: Spectrum,
                 two_photon_window: tuple[float, float],
                 one_photon_window: tuple[float, float] | None = None) -> float:
    """Two-photon peak of one spectrum over the bare one-photon peak."""
    top = peak(spectrum_with_fields, two_photon_window)
    if one_photon_window is None:
        x = reference_spectrum_bare.probe_detunings
        one_photon_window = (float(x.min()), float(x.max()))
    ref = peak(reference_spectrum_bare, one_photon_window)
    return top.height / ref.height


def two_photon_resonance(scheme: LevelScheme, label: str = "s") -> float:
    """Probe detuning at which level ``label`` is two-photon resonant with the
    probe's lower level for an unshifted absorber, ignoring light shifts."""
    from .liouville import ShiftSample, rotating_frame_detunings

    s = scheme.level_index(label)
    zero = ShiftSample.from_scheme(scheme, 0.0)
    e0 = rotating_frame_detunings(scheme, zero, 0.0)[s]
    e1 = rotating_frame_detunings(scheme, zero, 1.0)[s]
    slope = e1 - e0
    if slope == 0:
        raise ValueError(f"level {label!r} does not depend on the probe detuning")
    return -e0 / slope


@lru_cache(maxsize=64)
def reference_peak(scheme: LevelScheme, grid: QuadratureGrid | None = None) -> Peak:
    """Peak of the bare one-photon line of ``scheme``'s ensemble."""
    ref = reference_scheme(scheme)
    g = ref.probe_hwhm
    return locate_peak(ref, (ref.probe.detuning - 2 * g, ref.probe.detuning + 2 * g),
                       grid, step=g / 4)


@dataclass(frozen=True)
class BetaMeasurement:
    beta: float
    peak: Peak
    reference: Peak


def simulate_beta(scheme: LevelScheme, window: tuple[float, float] | None = None,
                  grid: QuadratureGrid | None = None, step: float = 0.5,
                  half_width: float = 10.0) -> BetaMeasurement:
    """Enhancement of the two-photon peak found inside ``window``.

    The default window is centred on the bare two-photon resonance of level
    ``s``.
    """
    grid = grid or default_grid()
    if window is None:
        c = two_photon_resonance(scheme)
        window = (c - half_width, c + half_width)
    top = locate_peak(scheme, window, grid, step=step)
    ref = reference_peak(scheme, grid)
    return BetaMeasurement(top.height / ref.height, top, ref)


def beta_from_spectra(scheme: LevelScheme, window: tuple[float, float] | None = None,
                      grid: QuadratureGrid | None = None, n_points: int = 41,
                      zoom: float = 1.0, workers=None) -> tuple[float, Spectrum, Spectrum]:
    """Enhancement measured with :func:`extract_beta` on sampled spectra.

    A located peak seeds a fine spectrum of ``n_points`` over ``+-zoom`` MHz;
    the reference spectrum samples the bare line around its centre.
    """
    grid = grid or default_grid()
    meas = simulate_beta(scheme, window, grid)
    x0 = meas.peak.detuning
    fine = spectrum_at(scheme, np.linspace(x0 - zoom, x0 + zoom, n_points), grid, workers)
    ref = reference_scheme(scheme)
    g = ref.probe_hwhm
    c = ref.probe.detuning
    bare = spectrum_at(ref, np.linspace(c - g, c + g, n_points), grid, workers)
    return extract_beta(fine, bare, (x0 - zoom, x0 + zoom), (c - g, c + g)), fine, bare


def at_window_width(spec: Spectrum, threshold: float = 0.5, background=None,
                    center: float | None = None) -> float:
    """Width of the transmission window around the enhanced peak.

    Starting at ``center`` (default: the highest sample) the walk first leaves
    the peak, then continues outward until the absorption climbs back above
    ``threshold`` times the one-photon background.  The
    background defaults to the Voigt line described by the spectrum metadata
    (``probe_hwhm`` and ``probe_shift_sd``); an array or a callable of detuning
    may be given instead.
    """
    x, y = spec.probe_detunings, spec.absorption
    if background is None:
        try:
            sig, gam = spec.metadata["probe_shift_sd"], spec.metadata["probe_hwhm"]
        except KeyError as exc:
            raise NoWindowFound("no background given and metadata lacks line parameters") from exc
        bg = voigt_absorption(x, sig, gam)
    elif callable(background):
        bg = np.asarray(background(x), dtype=float)
    else:
        bg = np.broadcast_to(np.asarray(background, dtype=float), x.shape)
    level = threshold * bg
    i0 = int(np.argmax(y)) if center is None else int(np.argmin(np.abs(x - center)))

    def edge(direction):
        i = i0
        last = len(x) - 1
        # leave the enhanced peak (which may itself be split)
        while 0 < i < last and y[i] >= level[i]:
            i += direction
        if not y[i] < level[i]:
            raise NoWindowFound("absorption never drops below threshold next to the peak")
        while 0 < i < last and y[i + direction] < level[i + direction]:
            i += direction
        if i in (0, last):
            raise NoWindowFound("window extends past the spectrum range")
        j = i + direction
        # linear crossing between i (below) and j (above)
        f = (level[i] - y[i]) / ((y[j] - y[i]) - (level[j] - level[i]))
        return x[i] + f * (x[j] - x[i])

    return float(edge(+1) - edge(-1))
