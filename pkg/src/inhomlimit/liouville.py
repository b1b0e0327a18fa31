"""
Single-absorber Lindblad dynamics.

The density matrix is vectorized row-major, ``vec(rho)[i*N + j] = rho[i, j]``,
so that ``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.

Besides the per-absorber operations, :func:`compile_scheme` prepares a
batched solver.  Detunings and inhomogeneous shifts only enter the diagonal of
the Liouvillian, so for a whole quadrature grid of shifts ``u`` the systems
are ``M_fixed + diag(d0 + u*du + probe_detuning*dp)`` and can be handed to a
stacked LAPACK solve in one call.
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.integrate import solve_ivp

from .errors import SingularLiouvillian, StepFailure, ZeroProbe
from .scheme import LevelScheme

TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-8
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class ShiftSample:
    """Frequency shifts of every field's transition for one absorber."""

    u: float
    per_field_shift: Mapping[str, float]

    @classmethod
    def from_scheme(cls, scheme: LevelScheme, u: float) -> "ShiftSample":
        return cls(float(u), {f.id: f.shift_coefficient * float(u) for f in scheme.fields})


@dataclass(frozen=True)
class SteadyStateSolution:
    rho: np.ndarray
    residual_norm: float
    probe_coherence: complex = complex("nan")
    trace_error: float = field(init=False)
    hermiticity_error: float = field(init=False)
    min_eigenvalue: float = field(init=False)

    def __post_init__(self):
        rho = self.rho
        object.__setattr__(self, "trace_error", float(abs(np.trace(rho) - 1.0)))
        object.__setattr__(self, "hermiticity_error", float(np.max(np.abs(rho - rho.conj().T))))
        herm = 0.5 * (rho + rho.conj().T)
        object.__setattr__(self, "min_eigenvalue", float(np.linalg.eigvalsh(herm)[0]))

    @property
    def is_physical(self) -> bool:
        return (self.trace_error <= TRACE_TOL and self.hermiticity_error <= HERMITIAN_TOL
                and self.min_eigenvalue >= -PSD_TOL)


def _field_detunings(scheme: LevelScheme, probe_detuning: float | None) -> np.ndarray:
    det = np.array([f.detuning for f in scheme.fields])
    if probe_detuning is not None:
        laser = scheme.probe.laser
        offset = probe_detuning - scheme.probe.detuning
        det = det + offset * np.array([f.laser == laser for f in scheme.fields])
    return det


def rotating_frame_detunings(scheme: LevelScheme, sample: ShiftSample,
                             probe_detuning: float | None = None) -> dict[int, float]:
    """Energy of every level in the frame rotating with the lasers.

    The probe's lower level sits at zero and each field contributes
    ``E_upper - E_lower = -(detuning - shift)``.
    """
    det = _field_detunings(scheme, probe_detuning)
    shift = np.array([sample.per_field_shift.get(f.id, 0.0) for f in scheme.fields])
    energies = scheme._frame @ (det - shift)
    return {lv.id: float(energies[lv.id]) + 0.0 for lv in scheme.levels}


def _coupling_matrix(scheme: LevelScheme) -> np.ndarray:
    n = scheme.n_levels
    v = np.zeros((n, n), dtype=complex)
    for f in scheme.fields:
        v[f.lower_level, f.upper_level] += f.rabi / 2.0
        v[f.upper_level, f.lower_level] += f.rabi / 2.0
    return v


def build_hamiltonian(scheme: LevelScheme, sample: ShiftSample,
                      probe_detuning: float | None = None) -> np.ndarray:
    energies = rotating_frame_detunings(scheme, sample, probe_detuning)
    h = _coupling_matrix(scheme)
    h[np.diag_indices(scheme.n_levels)] = [energies[i] for i in range(scheme.n_levels)]
    return h


def jump_operators(scheme: LevelScheme) -> list[np.ndarray]:
    """Collapse operators for spontaneous decay and pure dephasing."""
    n = scheme.n_levels
    ops = []
    for lv in scheme.levels:
        for target, frac in lv.decay_branches:
            rate = lv.population_decay_rate * frac
            if rate > 0:
                c = np.zeros((n, n), dtype=complex)
                c[target, lv.id] = np.sqrt(rate)
                ops.append(c)
    for ch in scheme.dephasing:
        if ch.rate > 0:
            a, b = ch.level_pair
            c = np.zeros((n, n), dtype=complex)
            # D[sqrt(k)(Pa - Pb)] damps rho_ab at 2k
            c[a, a], c[b, b] = 1.0, -1.0
            ops.append(np.sqrt(ch.rate / 2.0) * c)
    return ops


def _dissipator(ops: list[np.ndarray], n: int) -> np.ndarray:
    eye = np.eye(n)
    out = np.zeros((n * n, n * n), dtype=complex)
    for c in ops:
        cdc = c.conj().T @ c
        out += np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return out


def build_liouvillian(H: np.ndarray, scheme: LevelScheme) -> np.ndarray:
    """Lindblad generator acting on row-major ``vec(rho)``."""
    n = H.shape[0]
    eye = np.eye(n)
    unitary = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    return unitary + _dissipator(jump_operators(scheme), n)


def _trace_row(n: int) -> np.ndarray:
    row = np.zeros(n * n, dtype=complex)
    row[:: n + 1] = 1.0
    return row


def steady_state(L: np.ndarray, probe_levels: tuple[int, int] | None = None) -> SteadyStateSolution:
    """Trace-one null vector of ``L`` by a dense solve.

    The equation for ``rho[0, 0]`` is redundant (trace preservation) and is
    replaced by the normalization row.
    """
    n2 = L.shape[0]
    n = int(round(np.sqrt(n2)))
    m = L.copy()
    m[0] = _trace_row(n)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= 1e-13 * sv[0]:
        raise SingularLiouvillian(
            f"steady state is not unique (singular values {sv[-1]:.3g} / {sv[0]:.3g})")
    b = np.zeros(n2, dtype=complex)
    b[0] = 1.0
    x = np.linalg.solve(m, b)
    rho = x.reshape(n, n)
    resid = float(np.linalg.norm(L @ x) / np.linalg.norm(L))
    coh = rho[probe_levels] if probe_levels is not None else complex("nan")
    return SteadyStateSolution(rho, resid, complex(coh))


def evolve_oracle(L: np.ndarray, rho0: np.ndarray, t: float, *,
                  rtol: float = 1e-10, atol: float = 1e-13) -> np.ndarray:
    """Integrate ``d vec(rho)/dt = L vec(rho)`` with an adaptive 8th-order
    Runge-Kutta scheme (Dormand-Prince)."""
    n = rho0.shape[0]
    y0 = np.asarray(rho0, dtype=complex).reshape(-1)
    if t == 0:
        return np.array(rho0, dtype=complex)
    sol = solve_ivp(lambda _t, y: L @ y, (0.0, float(t)), y0, method="DOP853",
                    rtol=rtol, atol=atol, t_eval=[float(t)])
    if not sol.success:
        raise StepFailure(sol.message)
    return sol.y[:, -1].reshape(n, n)


def relaxation_gap(L: np.ndarray) -> float:
    """Slowest nonzero decay rate of ``L`` (smallest |Re| among non-null modes)."""
    ev = np.linalg.eigvals(L)
    re = np.sort(np.abs(ev.real))
    scale = max(1.0, np.abs(ev).max())
    nonzero = re[re > 1e-10 * scale]
    return float(nonzero[0])


def normalized_absorption(sol: SteadyStateSolution, scheme: LevelScheme) -> float:
    """Probe absorption in units of the resonant homogeneous two-level value.

    Sums ``rabi * Im(rho[lower, upper])`` over every transition of the probe
    laser (absorbed power) and scales by ``2 gamma / Omega_p**2``.
    """
    p = scheme.probe
    if p.rabi == 0:
        raise ZeroProbe("probe Rabi frequency is zero")
    total = sum(f.rabi * sol.rho[f.lower_level, f.upper_level].imag
                for f in scheme.probe_fields())
    return abs(total) * 2.0 * scheme.probe_hwhm / p.rabi**2


def solve_absorber(scheme: LevelScheme, u: float = 0.0,
                   probe_detuning: float | None = None) -> SteadyStateSolution:
    """Steady state of one absorber; convenience wrapper over the pipeline."""
    sample = ShiftSample.from_scheme(scheme, u)
    H = build_hamiltonian(scheme, sample, probe_detuning)
    L = build_liouvillian(H, scheme)
    p = scheme.probe
    return steady_state(L, (p.lower_level, p.upper_level))


# ---------------------------------------------------------------------------
# batched engine


class SolverHealth:
    """Worst-case diagnostics accumulated over batched solves."""

    def __init__(self):
        self._lock = threading.Lock()
        self.n_solves = 0
        self.max_trace_error = 0.0
        self.max_hermiticity_error = 0.0
        self.min_eigenvalue = np.inf
        self.max_residual = 0.0

    def update(self, n, trace, herm, mineig, resid):
        with self._lock:
            self.n_solves += n
            self.max_trace_error = max(self.max_trace_error, trace)
            self.max_hermiticity_error = max(self.max_hermiticity_error, herm)
            self.min_eigenvalue = min(self.min_eigenvalue, mineig)
            self.max_residual = max(self.max_residual, resid)

    @property
    def ok(self) -> bool:
        return (self.max_trace_error <= TRACE_TOL
                and self.max_hermiticity_error <= HERMITIAN_TOL
                and self.min_eigenvalue >= -PSD_TOL
                and self.max_residual <= RESIDUAL_TOL)

    def __repr__(self):
        return (f"SolverHealth(n={self.n_solves}, trace={self.max_trace_error:.2e}, "
                f"herm={self.max_hermiticity_error:.2e}, mineig={self.min_eigenvalue:.2e}, "
                f"resid={self.max_residual:.2e})")


_monitors: list[SolverHealth] = []


@contextlib.contextmanager
def track_solver_health():
    """Record trace, Hermiticity, positivity and residual of every batched solve."""
    h = SolverHealth()
    _monitors.append(h)
    try:
        yield h
    finally:
        _monitors.remove(h)


class CompiledScheme:
    """Batched steady-state absorption for many absorbers of one scheme."""

    def __init__(self, scheme: LevelScheme):
        self.scheme = scheme
        n = self.n = scheme.n_levels
        p = scheme.probe
        if p.rabi == 0:
            raise ZeroProbe("probe Rabi frequency is zero")
        self.probe_detuning0 = p.detuning
        L = build_liouvillian(_coupling_matrix(scheme), scheme)
        self.L_fixed = L
        m = L.copy()
        m[0] = _trace_row(n)
        self.m_fixed = m

        frame = scheme._frame
        det = np.array([f.detuning for f in scheme.fields])
        shift = np.array([f.shift_coefficient for f in scheme.fields])
        pmask = np.array([f.laser == p.laser for f in scheme.fields], dtype=float)

        def commutator_diag(e):
            return (-1j * (e[:, None] - e[None, :])).reshape(-1)

        self.d0 = commutator_diag(frame @ det)
        self.du = commutator_diag(-(frame @ shift))
        self.dp = commutator_diag(frame @ pmask)
        self.d_full = (self.d0, self.du, self.dp)
        self.d0_m, self.du_m, self.dp_m = (d.copy() for d in self.d_full)
        for d in (self.d0_m, self.du_m, self.dp_m):
            d[0] = 0.0
        self.diag_idx = np.arange(n * n)
        pf = scheme.probe_fields()
        self.coh_idx = np.array([f.lower_level * n + f.upper_level for f in pf])
        self.coh_weight = np.array([f.rabi for f in pf]) * 2.0 * scheme.probe_hwhm / p.rabi**2

    def solve(self, u: np.ndarray, probe_detuning: float | None = None) -> np.ndarray:
        """Vectorized steady states, shape ``(len(u), N*N)``."""
        u = np.asarray(u, dtype=float)
        dpd = 0.0 if probe_detuning is None else probe_detuning - self.probe_detuning0
        d = self.d0_m + dpd * self.dp_m + u[:, None] * self.du_m
        m = np.broadcast_to(self.m_fixed, (u.size,) + self.m_fixed.shape).copy()
        m[:, self.diag_idx, self.diag_idx] += d
        b = np.zeros((u.size, self.n * self.n, 1), dtype=complex)
        b[:, 0, 0] = 1.0
        x = np.linalg.solve(m, b)[..., 0]
        if _monitors:
            self._record(x, u, dpd)
        return x

    def _record(self, x, u, dpd):
        n = self.n
        rho = x.reshape(-1, n, n)
        rho_h = np.conj(np.swapaxes(rho, 1, 2))
        trace = np.abs(np.trace(rho, axis1=1, axis2=2) - 1.0).max()
        herm = np.abs(rho - rho_h).max()
        mineig = np.linalg.eigvalsh(0.5 * (rho + rho_h))[:, 0].min()
        d = self.d0 + dpd * self.dp + u[:, None] * self.du
        lx = np.einsum("ij,bj->bi", self.L_fixed, x) + d * x
        lnorm = np.sqrt(np.linalg.norm(self.L_fixed) ** 2
                        + np.sum(np.abs(d) ** 2, axis=1)
                        + 2 * np.real(np.einsum("j,bj->b", np.diag(self.L_fixed).conj(), d)))
        resid = (np.linalg.norm(lx, axis=1) / lnorm).max()
        for h in list(_monitors):
            h.update(u.size, float(trace), float(herm), float(mineig), float(resid))

    def absorption(self, u: np.ndarray, probe_detuning: float | None = None) -> np.ndarray:
        """Normalized absorption of each absorber ``u`` at one probe detuning."""
        x = self.solve(u, probe_detuning)
        return np.abs(x[:, self.coh_idx].imag @ self.coh_weight)


@lru_cache(maxsize=32)
def compile_scheme(scheme: LevelScheme) -> CompiledScheme:
    return CompiledScheme(scheme)
