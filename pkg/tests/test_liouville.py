import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inhomlimit import liouville as lv
from inhomlimit.acceptance import oracle_check, random_scheme
from inhomlimit.errors import SingularLiouvillian, ZeroProbe
from inhomlimit.scheme import DephasingChannel, DriveField, Level, build_scheme, preset

GAMMA = 2.875


def homogeneous_two_level(rabi=0.01 * GAMMA, detuning=0.0):
    return preset("two_level", gamma=GAMMA, probe_rabi=rabi, probe_detuning=detuning)


def liouvillian(scheme, u=0.0, probe_detuning=None):
    H = lv.build_hamiltonian(scheme, lv.ShiftSample.from_scheme(scheme, u), probe_detuning)
    return lv.build_liouvillian(H, scheme)


def test_frame_two_level():
    s = preset("two_level", probe_detuning=-270.0, sigma=50.0)
    # u = -1 gives a shift of -50 MHz
    d = lv.rotating_frame_detunings(s, lv.ShiftSample.from_scheme(s, -1.0))
    assert d == {0: 0.0, 1: pytest.approx(270 - 50)}


def test_frame_n_type():
    s = preset("n_type", probe_detuning=-250.0, delta=-270.0, delta_r=-300.0)
    zero = lv.ShiftSample.from_scheme(s, 0.0)
    d = lv.rotating_frame_detunings(s, zero)
    assert d[s.level_index("s")] == pytest.approx(-(-250.0 - -270.0))
    samp = lv.ShiftSample.from_scheme(s, 0.7)
    d = lv.rotating_frame_detunings(s, samp)
    dr = samp.per_field_shift["recovery"]
    assert d[s.level_index("r")] == pytest.approx(-(-300.0 - dr))


def test_hamiltonian_two_level():
    s = homogeneous_two_level()
    H = lv.build_hamiltonian(s, lv.ShiftSample.from_scheme(s, 0.0))
    np.testing.assert_allclose(H, [[0, 0.014375], [0.014375, 0]], atol=1e-15)


@pytest.mark.parametrize("kind", ["lambda", "n_type", "n_type_extra_hf", "ladder_rydberg"])
def test_hamiltonian_hermitian(kind):
    s = preset(kind)
    H = lv.build_hamiltonian(s, lv.ShiftSample.from_scheme(s, 0.3), 12.0)
    assert np.array_equal(H, H.conj().T)


def test_light_shift_of_driven_pair():
    # g-r block of the N-type scheme: dressed shift (sqrt(D^2 + W^2) - |D|)/2 with W the Rabi frequency
    s = preset("n_type", omega=29.0, delta_r=-270.0)
    H = lv.build_hamiltonian(s, lv.ShiftSample.from_scheme(s, 0.0))
    g, r = s.level_index("g"), s.level_index("r")
    block = H[np.ix_([g, r], [g, r])]
    low = np.linalg.eigvalsh(block)
    D, W = 270.0, 58.0
    shift = (np.sqrt(D**2 + W**2) - D) / 2
    assert min(abs(low - 0.0)) == pytest.approx(shift, rel=1e-12)
    assert shift == pytest.approx(29.0**2 / 270.0, rel=0.02)


def test_liouvillian_rates():
    s = homogeneous_two_level(rabi=0.0)
    L = lv.build_liouvillian(np.zeros((2, 2)), s)
    n = 2
    eg = np.zeros((n, n), complex)
    eg[1, 0] = 1
    out = (L @ eg.reshape(-1)).reshape(n, n)
    assert out[1, 0] == pytest.approx(-GAMMA)
    ee = np.zeros((n, n), complex)
    ee[1, 1] = 1
    out = (L @ ee.reshape(-1)).reshape(n, n)
    assert out[1, 1] == pytest.approx(-2 * GAMMA)
    assert out[0, 0] == pytest.approx(2 * GAMMA)


def test_dephasing_rate_and_mixed_state():
    levels = [Level(0, "g"), Level(1, "e"), Level(2, "s")]
    fields = [DriveField("probe", 0, 1, 0.0), DriveField("coupling", 2, 1, 0.0)]
    s = build_scheme(levels, fields, [DephasingChannel((0, 2), 0.35)])
    assert len(lv.jump_operators(s)) == 1
    L = lv.build_liouvillian(np.zeros((3, 3)), s)
    gs = np.zeros((3, 3), complex)
    gs[0, 2] = 1
    out = (L @ gs.reshape(-1)).reshape(3, 3)
    assert out[0, 2] == pytest.approx(-0.35)
    mixed = np.eye(3, dtype=complex) / 3
    assert np.abs(L @ mixed.reshape(-1)).max() < 1e-15


def test_trace_preservation_random():
    rng = np.random.default_rng(3)
    s, u = random_scheme(rng, 4)
    L = liouvillian(s, u)
    n = s.n_levels
    tr = np.eye(n).reshape(-1)
    assert np.abs(tr @ L).max() < 1e-12


def test_two_level_closed_form():
    wp = 0.01 * GAMMA
    sol = lv.solve_absorber(homogeneous_two_level(wp))
    expected = (wp / (2 * GAMMA)) / (1 + wp**2 / (2 * GAMMA**2))
    assert abs(sol.probe_coherence.imag) == pytest.approx(expected, abs=1e-10)
    assert sol.is_physical
    assert sol.residual_norm <= 1e-9


def test_normalization_anchor_and_half_width():
    a0 = lv.normalized_absorption(lv.solve_absorber(homogeneous_two_level()), homogeneous_two_level())
    assert a0 == pytest.approx(1.0, abs=5e-5)
    s = homogeneous_two_level(detuning=GAMMA)
    assert lv.normalized_absorption(lv.solve_absorber(s), s) == pytest.approx(0.5, abs=1e-4)


def test_probe_linearity():
    s = preset("n_type")
    half = s.with_laser("probe", rabi_scale=0.5)
    a = lv.normalized_absorption(lv.solve_absorber(s, 0.2, -270.0), s)
    b = lv.normalized_absorption(lv.solve_absorber(half, 0.2, -270.0), half)
    assert abs(b / a - 1) < 1e-4


def test_zero_probe():
    s = preset("two_level", probe_rabi=0.0)
    sol = lv.solve_absorber(s)
    assert abs(sol.probe_coherence) == 0.0
    with pytest.raises(ZeroProbe):
        lv.normalized_absorption(sol, s)


def test_singular_liouvillian():
    # no decay anywhere: every diagonal state is stationary
    levels = [Level(0, "g"), Level(1, "e")]
    s = build_scheme(levels, [DriveField("probe", 0, 1, 0.0)])
    with pytest.raises(SingularLiouvillian):
        lv.steady_state(liouvillian(s))


@pytest.mark.parametrize("kind", ["lambda", "n_type", "n_type_extra_hf", "ladder_rydberg"])
def test_steady_state_physical(kind):
    s = preset(kind)
    for u in (-2.0, 0.0, 1.3):
        sol = lv.steady_state(liouvillian(s, u))
        assert sol.is_physical
        assert sol.residual_norm <= 1e-9


def test_evolve_oracle_trivial_cases():
    rho0 = np.diag([0.25, 0.75]).astype(complex)
    np.testing.assert_array_equal(lv.evolve_oracle(np.zeros((4, 4), complex), rho0, 3.0), rho0)
    s = homogeneous_two_level(rabi=0.0)
    L = liouvillian(s)
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    for t in (0.05, 0.3):
        rho = lv.evolve_oracle(L, rho0, t)
        assert rho[1, 1].real == pytest.approx(np.exp(-2 * GAMMA * t), rel=1e-9)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)


def test_n_type_oracle_agreement():
    s = preset("n_type")
    L = liouvillian(s, 0.4, -268.0)
    rho0 = np.zeros((4, 4), complex)
    rho0[0, 0] = 1
    rho = lv.evolve_oracle(L, rho0, 50.0 / lv.relaxation_gap(L))
    assert np.abs(rho - lv.steady_state(L).rho).max() < 1e-6


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 5))
def test_random_schemes_match_oracle(seed, n):
    s, u = random_scheme(np.random.default_rng(seed), n)
    assert oracle_check(s, u) < 1e-6


@given(st.floats(0.1, 20.0))
def test_unit_covariance(c):
    s = preset("lambda", probe_detuning=-3.0)
    sol = lv.solve_absorber(s, 0.4)
    a = lv.normalized_absorption(sol, s)
    scaled = preset("lambda", probe_detuning=-3.0 * c, gamma=s.probe_hwhm * c, sigma=220.0 * c,
                    omega=29.0 * c, delta=-270.0 * c, gamma_sg=0.35 * c,
                    probe_rabi=s.probe.rabi * c)
    b = lv.normalized_absorption(lv.solve_absorber(scaled, 0.4), scaled)
    assert b == pytest.approx(a, rel=1e-8)


def test_batched_engine_matches_single_solves():
    s = preset("n_type_extra_hf")
    model = lv.compile_scheme(s)
    us = np.array([-1.5, 0.0, 0.8])
    batch = model.absorption(us, -265.0)
    single = [lv.normalized_absorption(lv.solve_absorber(s, u, -265.0), s) for u in us]
    np.testing.assert_allclose(batch, single, rtol=1e-9)


def test_health_monitor_records():
    with lv.track_solver_health() as h:
        lv.compile_scheme(preset("ladder_rydberg")).absorption(np.linspace(-3, 3, 51), 1.0)
    assert h.n_solves == 51
    assert h.ok
