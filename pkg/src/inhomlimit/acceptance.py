"""
Acceptance checks, one function per criterion.

Each check returns a :class:`CriterionResult`; :func:`run_acceptance` runs a
selection and prints one pass/fail line per criterion.  Checks 2-7 run under
a shared :class:`~inhomlimit.liouville.SolverHealth` monitor whose totals
check 8 reports.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erfcx

from . import liouville as lv
from .ensemble import (
    default_grid,
    ensemble_absorption,
    locate_peak,
    quadrature_grid,
    spectrum,
)
from .optimize import (
    FIG4_COLUMNS,
    FIG4_PARAMS,
    fig4_rows,
    fig4_scheme,
    format_csv,
    maximize_beta,
    set_param,
)
from .recovery import (
    at_window_width,
    beta_from_spectra,
    inhomogeneous_limit,
    reference_peak,
    simulate_beta,
)
from .scheme import (
    DephasingChannel,
    DriveField,
    Level,
    LevelScheme,
    build_scheme,
    preset,
    reference_scheme,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name} -- {self.detail}"


@dataclass
class AcceptanceRun:
    """State shared between checks: solver health and cached datasets."""
    workers: int | str | None = None
    health: lv.SolverHealth = field(default_factory=lv.SolverHealth)
    cache: dict = field(default_factory=dict)

    def monitored(self, fn: Callable[[], CriterionResult]) -> CriterionResult:
        with lv.track_solver_health() as h:
            res = fn()
        self.health.update(h.n_solves, h.max_trace_error, h.max_hermiticity_error,
                           h.min_eigenvalue, h.max_residual)
        return res

    def fig4(self) -> list[tuple]:
        if "fig4" not in self.cache:
            self.cache["fig4"] = fig4_rows("full", default_grid(), workers=1)
        return self.cache["fig4"]


# ---------------------------------------------------------------------------


def criterion_1(run: AcceptanceRun) -> CriterionResult:
    a = inhomogeneous_limit(220.0, 2.875)
    b = inhomogeneous_limit(5000.0, 50.0)
    ok = round(a, 2) == 61.06 and round(b, 1) == 79.8
    return CriterionResult(1, "inhomogeneous limit formula", ok,
                           f"beta0(220, 2.875)={a:.4f}, beta0(5000, 50)={b:.4f}",
                           {"rb": a, "siv": b})


def voigt_peak_erfc(sigma: float, gamma: float) -> float:
    y = gamma / (math.sqrt(2.0) * sigma)
    return math.sqrt(math.pi / 2.0) * gamma / sigma * float(erfcx(y))


def criterion_2(run: AcceptanceRun) -> CriterionResult:
    def body():
        sim = ensemble_absorption(preset("two_level", sigma=220.0, gamma=2.875), 0.0)
        ref = voigt_peak_erfc(220.0, 2.875)
        rel = abs(sim / ref - 1.0)
        return CriterionResult(2, "Voigt oracle", rel < 5e-3,
                               f"ensemble {sim:.7f} vs closed form {ref:.7f} (rel {rel:.2e}, tol 5e-3)",
                               {"simulated": sim, "closed_form": ref})
    return run.monitored(body)


CRIT3_OMEGAS = (5.0, 15.0, 30.0, 60.0)
CRIT3_DELTAS = (0.0, -100.0, -270.0, -500.0)


def spectrum_maximum(scheme: LevelScheme, span=(-800.0, 300.0), step=2.0, grid=None) -> float:
    """Largest ensemble absorption: coarse scan, then refinement of the
    one-photon line, the coarse maximum and the Raman line."""
    grid = grid or default_grid()
    n = int(round((span[1] - span[0]) / step)) + 1
    sp = spectrum(scheme, span, n, grid)
    best = float(sp.absorption.max())
    centres = {0.0, float(sp.probe_detunings[int(np.argmax(sp.absorption))])}
    if scheme.has_field("coupling"):
        centres.add(float(scheme.field("coupling").detuning))
    for c in sorted(centres):
        best = max(best, locate_peak(scheme, (c - 2 * step, c + 2 * step), grid, step=0.25).height)
    return best


def criterion_3(run: AcceptanceRun) -> CriterionResult:
    def body():
        grid = default_grid()
        limit = ensemble_absorption(preset("two_level"), 0.0, grid)
        worst, where = 0.0, None
        table = {}
        for om in CRIT3_OMEGAS:
            for d in CRIT3_DELTAS:
                m = spectrum_maximum(preset("lambda", omega=om, delta=d), grid=grid)
                table[(om, d)] = m / limit
                if m / limit > worst:
                    worst, where = m / limit, (om, d)
        return CriterionResult(3, "inhomogeneous limit bound (three-level)", worst <= 1.02,
                               f"max spectrum / limit = {worst:.5f} at (omega, delta)={where}, bound 1.02",
                               {"ratios": {f"{k[0]:g},{k[1]:g}": v for k, v in table.items()}})
    return run.monitored(body)


CRIT4_MU = tuple(float(v) for v in np.geomspace(0.3, 3.0, 8))


def fit_mu_scale(mu: np.ndarray, beta: np.ndarray, beta0: float, gamma: float, gamma_r: float):
    """Scale ``c`` on ``mu`` minimizing the largest relative deviation from
    the saturation curve; returns ``(c, max relative deviation)``."""
    amp = beta0 * gamma / (gamma + gamma_r)

    def dev(logc):
        m2 = (math.exp(logc) * mu) ** 2
        return float(np.max(np.abs(beta / (amp * m2 / (1 + m2)) - 1.0)))

    res = minimize_scalar(dev, bounds=(math.log(0.05), math.log(20.0)), method="bounded",
                          options={"xatol": 1e-8})
    return math.exp(res.x), float(res.fun)


def criterion_4(run: AcceptanceRun) -> CriterionResult:
    def body():
        rows = run.fig4()
        mu = np.array([r[0] for r in rows])
        beta = np.array([r[2] for r in rows])
        p = FIG4_PARAMS
        beta0 = inhomogeneous_limit(p["sigma"], p["gamma"])
        sel = (mu >= 0.3 - 1e-12) & (mu <= 3.0 + 1e-12)
        c, dev = fit_mu_scale(mu[sel], beta[sel], beta0, p["gamma"], p["gamma_r"])
        asym = beta0 * p["gamma"] / (p["gamma"] + p["gamma_r"])
        sat = mu >= 3.0 - 1e-12
        asym_dev = float(np.max(np.abs(beta[sat] / asym - 1.0)))
        ok = dev < 0.15 and asym_dev < 0.10
        return CriterionResult(
            4, "saturation formula agreement (far-detuned symmetric)", ok,
            f"fitted mu scale {c:.3f}: max deviation {dev:.1%} (tol 15%); "
            f"mu>=3 vs asymptote {asym:.2f}: max deviation {asym_dev:.1%} (tol 10%); "
            f"beta={', '.join(f'{b:.2f}' for b in beta)}",
            {"mu": mu.tolist(), "beta": beta.tolist(), "scale": c,
             "collapse_deviation": dev, "asymptote_deviation": asym_dev})
    return run.monitored(body)


CRIT5_BOUNDS = {"omega_r": (19.0, 39.0), "delta_r": (-320.0, -220.0)}


def criterion_5(run: AcceptanceRun) -> CriterionResult:
    def body():
        grid = default_grid()
        base = preset("n_type", omega=29.0, delta=-270.0, omega_r=29.0, delta_r=-270.0, eta=1.0)
        rep = maximize_beta(base, ("omega_r", "delta_r"), CRIT5_BOUNDS, grid, run.workers)
        om_r, d_r = rep.best_params["omega_r"], rep.best_params["delta_r"]
        at_opt = set_param(base, "omega_r", om_r)
        side = [simulate_beta(set_param(at_opt, "delta_r", d_r + s), None, grid).beta
                for s in (-25.0, 25.0)]
        falls = all(b <= rep.best_beta / 2 for b in side)
        ok = abs(om_r - 29.0) <= 3.0 and abs(d_r + 270.0) <= 10.0 and falls
        return CriterionResult(
            5, "compensation optimum", ok,
            f"optimum omega_r={om_r:.2f}, delta_r={d_r:.2f}, beta={rep.best_beta:.3f} "
            f"({rep.evaluations} evaluations); beta at delta_r-+25: {side[0]:.3f}, {side[1]:.3f} "
            f"(need <= {rep.best_beta / 2:.3f}); plan beta {rep.plan_beta:.3f}",
            {"report": rep.to_dict(), "sides": side})
    return run.monitored(body)


def criterion_6(run: AcceptanceRun) -> CriterionResult:
    def body():
        n = preset("n_type", omega=29.0, delta=-270.0, omega_r=29.0, delta_r=-270.0)
        b_n, _, _ = beta_from_spectra(n, workers=run.workers)
        b_l, _, _ = beta_from_spectra(preset("ladder_rydberg", sigma2=1.0), workers=run.workers)
        return CriterionResult(6, "exceedance of the inhomogeneous limit", b_n > 3 and b_l > 3,
                               f"n_type beta={b_n:.3f}, ladder beta={b_l:.3f} (need > 3 each)",
                               {"n_type": b_n, "ladder": b_l})
    return run.monitored(body)


CRIT7_PAIRS = ((29.0, 29.0), (55.0, 45.0))


def window_scheme(omega: float, omega_r: float, delta: float = -270.0) -> LevelScheme:
    """Near-resonant N-type scheme compensated for strengths ``omega, omega_r``."""
    eta = (omega_r / omega) ** 2
    return preset("n_type", omega=omega, omega_r=omega_r, delta=delta, delta_r=eta * delta, eta=eta)


def criterion_7(run: AcceptanceRun) -> CriterionResult:
    def body():
        widths, parts, ok = {}, [], True
        for om, omr in CRIT7_PAIRS:
            sp = spectrum(window_scheme(om, omr), (-700.0, 300.0), 1001, workers=run.workers)
            w = at_window_width(sp)
            target = 2 * om + 2 * omr
            good = abs(w / target - 1.0) <= 0.25
            ok &= good
            widths[f"{om:g},{omr:g}"] = w
            parts.append(f"({om:g},{omr:g}) width {w:.1f} vs {target:.0f} MHz ({w / target - 1:+.1%})")
        lad = spectrum(preset("ladder_rydberg"), (-300.0, 300.0), 601, workers=run.workers)
        wl = at_window_width(lad)
        parts.append(f"[info] resonant ladder (55,45): {wl:.1f} MHz vs 2sqrt(om^2+om_r^2)="
                     f"{2 * math.hypot(55, 45):.1f}")
        return CriterionResult(7, "Autler-Townes window width (N-type)", ok,
                               "; ".join(parts), {"widths": widths, "ladder": wl})
    return run.monitored(body)


def random_scheme(rng: np.random.Generator, n_levels: int) -> tuple[LevelScheme, float]:
    """Random tree-driven scheme in which every excited level decays downward."""
    levels = [Level(0, "l0")]
    for k in range(1, n_levels):
        targets = rng.choice(k, size=rng.integers(1, k + 1), replace=False)
        frac = rng.dirichlet(np.ones(targets.size))
        levels.append(Level(k, f"l{k}", float(rng.uniform(0.5, 6.0)),
                            tuple((int(t), float(f)) for t, f in zip(targets, frac))))
    fields = [DriveField("probe", 0, 1, float(rng.uniform(0.2, 10.0)), float(rng.uniform(-20, 20)),
                         float(rng.uniform(-50, 50)))]
    for k in range(2, n_levels):
        j = int(rng.integers(0, k))
        lo, hi = (j, k) if rng.random() < 0.5 else (k, j)
        fields.append(DriveField(f"f{k}", lo, hi, float(rng.uniform(0.5, 20.0)),
                                 float(rng.uniform(-30, 30)), float(rng.uniform(-50, 50))))
    deph = []
    if n_levels > 2 and rng.random() < 0.7:
        a, b = sorted(int(v) for v in rng.choice(n_levels, 2, replace=False))
        deph.append(DephasingChannel((a, b), float(rng.uniform(0.05, 2.0))))
    return build_scheme(levels, fields, deph, 50.0), float(rng.normal())


def oracle_check(scheme: LevelScheme, u: float) -> float:
    """Max-norm difference between the steady state and long-time evolution."""
    H = lv.build_hamiltonian(scheme, lv.ShiftSample.from_scheme(scheme, u))
    L = lv.build_liouvillian(H, scheme)
    ss = lv.steady_state(L)
    n = scheme.n_levels
    rho0 = np.zeros((n, n), dtype=complex)
    rho0[0, 0] = 1.0
    t = 50.0 / lv.relaxation_gap(L)
    rho_t = lv.evolve_oracle(L, rho0, t)
    return float(np.max(np.abs(rho_t - ss.rho)))


def criterion_8(run: AcceptanceRun, n_schemes: int = 25, seed: int = 20240611) -> CriterionResult:
    rng = np.random.default_rng(seed)
    diffs = []
    for _ in range(n_schemes):
        s, u = random_scheme(rng, int(rng.integers(3, 6)))
        diffs.append(oracle_check(s, u))
    worst = max(diffs)
    if run.health.n_solves == 0:
        run.monitored(lambda: criterion_2(run))
        run.monitored(lambda: criterion_6(run))
    h = run.health
    ok = worst < 1e-6 and h.ok
    return CriterionResult(
        8, "solver correctness", ok,
        f"{n_schemes} random schemes: max |steady - evolved| = {worst:.2e} (tol 1e-6); "
        f"health over {h.n_solves} absorber solves: trace {h.max_trace_error:.1e}, "
        f"hermiticity {h.max_hermiticity_error:.1e}, min eigenvalue {h.min_eigenvalue:.1e}, "
        f"residual {h.max_residual:.1e}",
        {"oracle_diffs": diffs, "health": repr(h)})


def _hygiene_configs() -> list[tuple[str, LevelScheme]]:
    cfg = [(f"fig4 mu={mu:.3g}", fig4_scheme(mu)) for mu in CRIT4_MU + (5.0, 8.0)]
    cfg.append(("n_type", preset("n_type", omega=29.0, delta=-270.0, omega_r=29.0, delta_r=-270.0)))
    cfg.append(("ladder", preset("ladder_rydberg", sigma2=1.0)))
    return cfg


def criterion_9(run: AcceptanceRun) -> CriterionResult:
    fine = quadrature_grid(8001)
    grid = default_grid()
    worst_lin, worst_conv = 0.0, 0.0
    where_lin = where_conv = ""
    for name, s in _hygiene_configs():
        x = simulate_beta(s, None, grid).peak.detuning
        for label, scheme, det in (("two-photon", s, x), ("one-photon", reference_scheme(s), 0.0)):
            a = ensemble_absorption(scheme, det, grid)
            half = scheme.with_laser(scheme.probe.laser, rabi_scale=0.5)
            lin = abs(ensemble_absorption(half, det, grid) / a - 1.0)
            conv = abs(ensemble_absorption(scheme, det, fine) / a - 1.0)
            if lin > worst_lin:
                worst_lin, where_lin = lin, f"{name} {label}"
            if conv > worst_conv:
                worst_conv, where_conv = conv, f"{name} {label}"
    ok = worst_lin < 1e-4 and worst_conv < 1e-3
    return CriterionResult(9, "numerics hygiene", ok,
                           f"probe linearity {worst_lin:.1e} ({where_lin}, tol 1e-4); "
                           f"grid doubling {worst_conv:.1e} ({where_conv}, tol 1e-3)",
                           {"linearity": worst_lin, "convergence": worst_conv})


def criterion_10(run: AcceptanceRun) -> CriterionResult:
    texts = {"1": format_csv(FIG4_COLUMNS, run.fig4())}
    for w in ("4", "max"):
        texts[w] = format_csv(FIG4_COLUMNS, fig4_rows("full", default_grid(), workers=w))
    same = len(set(texts.values())) == 1
    return CriterionResult(10, "determinism across worker counts", same,
                           f"fig4 dataset identical for workers 1, 4, max "
                           f"(max={os.cpu_count()}): {same}",
                           {"bytes": len(texts["1"])})


CRITERIA: dict[int, Callable[[AcceptanceRun], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


MONITORED = frozenset(range(2, 8))


def run_criterion(number: int, run: AcceptanceRun) -> CriterionResult:
    """Run one check; checks 2-7 feed the shared solver-health totals."""
    fn = CRITERIA[number]
    return run.monitored(lambda: fn(run)) if number in MONITORED else fn(run)


def run_acceptance(numbers=None, workers=None, report: Callable[[str], None] | None = print,
                   run: AcceptanceRun | None = None) -> list[CriterionResult]:
    run = run or AcceptanceRun(workers)
    out = []
    for k in sorted(numbers or CRITERIA):
        if k not in CRITERIA:
            raise KeyError(f"no criterion {k}")
        res = run_criterion(k, run)
        out.append(res)
        if report is not None:
            report(res.line())
    return out
