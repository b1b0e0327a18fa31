"""
Parameter sweeps, enhancement maximization and figure datasets.

Parameters are addressed by path:

``omega``, ``omega_r``
    coupling / recovery strength as an off-diagonal element (the field's
    Rabi frequency is twice this); sibling entries of the same laser scale
    along.
``delta``, ``delta_r``
    coupling / recovery laser detuning.
``sigma``
    inhomogeneous width; every shift coefficient is rescaled with it.
``fields.<id>.<attribute>``
    any numeric attribute of one drive field, e.g. ``fields.recovery.rabi``.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .ensemble import (
    QuadratureGrid,
    default_grid,
    parallel_map,
    quadrature_grid,
    spectrum,
    spectrum_at,
)
from .errors import BoundsExcludePlan, InhomLimitError, SchemeError, UnknownFigure
from .liouville import compile_scheme
from .recovery import (
    CompensationPlan,
    at_window_width,
    compensation_plan,
    dressed_beta,
    inhomogeneous_limit,
    omega_for_mu,
    reference_peak,
    saturation_beta,
    simulate_beta,
)
from .scheme import LevelScheme, preset

SHORTHANDS = {"omega": "coupling", "omega_r": "recovery", "delta": "coupling", "delta_r": "recovery"}
QUANTITIES = ("beta", "peak", "window_width")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return f"{float(v):.9g}"


def format_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(columns)]
    lines += [",".join(_fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parameter paths


def get_param(scheme: LevelScheme, path: str) -> float:
    if path in ("omega", "omega_r"):
        return scheme.field(SHORTHANDS[path]).rabi / 2.0
    if path in ("delta", "delta_r"):
        return scheme.field(SHORTHANDS[path]).detuning
    if path == "sigma":
        return scheme.inhom.sigma
    parts = path.split(".")
    if len(parts) == 3 and parts[0] == "fields":
        _, fid, attr = parts
        if not scheme.has_field(fid):
            raise SchemeError(f"parameter path {path!r}: no field {fid!r}")
        if attr not in ("rabi", "detuning", "shift_coefficient"):
            raise SchemeError(f"parameter path {path!r}: {attr!r} is not a numeric field attribute")
        return float(getattr(scheme.field(fid), attr))
    raise SchemeError(f"unknown parameter path {path!r}")


def set_param(scheme: LevelScheme, path: str, value: float) -> LevelScheme:
    """Copy of ``scheme`` with the parameter at ``path`` set to ``value``."""
    value = float(value)
    get_param(scheme, path)  # resolves or raises
    if path in ("omega", "omega_r"):
        laser = SHORTHANDS[path]
        main = scheme.field(laser)
        if main.rabi > 0:
            return scheme.with_laser(laser, rabi_scale=2.0 * value / main.rabi)
        fields = tuple(replace(f, rabi=2.0 * value) if f.laser == laser else f
                       for f in scheme.fields)
        return replace(scheme, fields=fields)
    if path in ("delta", "delta_r"):
        return scheme.with_laser(SHORTHANDS[path], detuning=value)
    if path == "sigma":
        return scheme.scale_shifts(value / scheme.inhom.sigma)
    _, fid, attr = path.split(".")
    return scheme.with_field(fid, **{attr: value})


def plan_for(scheme: LevelScheme) -> CompensationPlan:
    """Compensation plan for the coupling field of a scheme with a recovery field."""
    c = scheme.field("coupling")
    r = scheme.field("recovery")
    if c.shift_coefficient == 0:
        raise SchemeError("coupling field carries no inhomogeneous shift")
    return compensation_plan(c.rabi / 2.0, c.detuning, r.shift_coefficient / c.shift_coefficient)


# ---------------------------------------------------------------------------
# derived quantities


@dataclass(frozen=True)
class Evaluation:
    """How a derived quantity is computed from a scheme."""
    quantity: str = "beta"
    window: tuple[float, float] | None = None
    spectrum_range: tuple[float, float] = (-700.0, 300.0)
    n_points: int = 1001
    threshold: float = 0.5

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"quantity must be one of {QUANTITIES}, got {self.quantity!r}")

    def __call__(self, scheme: LevelScheme, grid: QuadratureGrid) -> float:
        if self.quantity == "window_width":
            sp = spectrum(scheme, self.spectrum_range, self.n_points, grid)
            return at_window_width(sp, self.threshold)
        m = simulate_beta(scheme, self.window, grid)
        return m.beta if self.quantity == "beta" else m.peak.height


@dataclass(frozen=True)
class SweepSpec:
    base: LevelScheme
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    quantity: str = "beta"
    evaluation: Evaluation | None = None

    def __post_init__(self):
        axes = tuple((str(p), tuple(float(v) for v in vals)) for p, vals in self.axes)
        if not axes:
            raise ValueError("a sweep needs at least one axis")
        for p, vals in axes:
            if not vals:
                raise ValueError(f"axis {p!r} has no values")
            get_param(self.base, p)
        object.__setattr__(self, "axes", axes)
        if self.evaluation is None:
            object.__setattr__(self, "evaluation", Evaluation(self.quantity))
        elif self.evaluation.quantity != self.quantity:
            raise ValueError("evaluation quantity differs from sweep quantity")

    def points(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*(vals for _, vals in self.axes)))

    def scheme_at(self, point: Sequence[float]) -> LevelScheme:
        s = self.base
        for (p, _), v in zip(self.axes, point):
            s = set_param(s, p, v)
        return s


@dataclass
class SweepResult:
    columns: list[str]
    rows: list[tuple]
    errors: list[str | None]

    @property
    def values(self) -> np.ndarray:
        return np.array([r[-1] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        return format_csv(self.columns + ["error"],
                          [tuple(r) + (e or "",) for r, e in zip(self.rows, self.errors)])

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv())
        return path


def sweep(spec: SweepSpec, grid: QuadratureGrid | None = None, workers=None) -> SweepResult:
    """Evaluate ``spec.quantity`` on the Cartesian product of the axes.

    Rows follow the axis order lexicographically.  A row whose simulation
    fails holds NaN and the error message instead of aborting the sweep.
    """
    grid = grid or default_grid()
    pts = spec.points()

    def row(pt):
        try:
            return float(spec.evaluation(spec.scheme_at(pt), grid)), None
        except (InhomLimitError, ArithmeticError, np.linalg.LinAlgError) as exc:
            return math.nan, f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")

    out = parallel_map(row, pts, workers)
    return SweepResult([p for p, _ in spec.axes] + [spec.quantity],
                       [tuple(pt) + (v,) for pt, (v, _) in zip(pts, out)],
                       [e for _, e in out])


# ---------------------------------------------------------------------------
# optimization


@dataclass
class OptimumReport:
    best_params: dict[str, float]
    best_beta: float
    evaluations: int
    trace: list[tuple[dict[str, float], float]]
    plan: CompensationPlan | None = None
    plan_beta: float | None = None
    converged: bool = True
    message: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "best_params": self.best_params,
            "best_beta": self.best_beta,
            "evaluations": self.evaluations,
            "converged": self.converged,
            "message": self.message,
            "plan": None if self.plan is None else vars(self.plan).copy(),
            "plan_beta": self.plan_beta,
            "trace": [dict(p, beta=b) for p, b in self.trace],
        }


def default_bounds(scheme: LevelScheme, free_params: Sequence[str]) -> dict[str, tuple[float, float]]:
    """Half to one-and-a-half times the planned strength, +-50 MHz in detuning."""
    plan = plan_for(scheme)
    out = {}
    for p in free_params:
        if p == "omega_r":
            out[p] = (0.5 * plan.omega_r, 1.5 * plan.omega_r)
        elif p == "delta_r":
            out[p] = (plan.delta_r - 50.0, plan.delta_r + 50.0)
        else:
            v = get_param(scheme, p)
            out[p] = (v - 0.5 * abs(v), v + 0.5 * abs(v))
    return out


def maximize_beta(scheme: LevelScheme, free_params: Sequence[str] = ("omega_r", "delta_r"),
                  bounds: dict[str, tuple[float, float]] | None = None,
                  grid: QuadratureGrid | None = None, workers=None,
                  grid_points: int = 11, window: tuple[float, float] | None = None,
                  xatol: float = 0.1, frtol: float = 1e-3, maxiter: int = 400) -> OptimumReport:
    """Maximize the enhancement over ``free_params`` inside ``bounds``.

    A ``grid_points``-per-axis scan (rows evaluated in parallel) seeds a
    bounded Nelder-Mead search that stops once the simplex is smaller than
    ``xatol`` MHz and its values agree to ``frtol`` relative.
    """
    grid = grid or default_grid()
    free = list(free_params)
    if not free:
        raise ValueError("no free parameters")
    for p in free:
        get_param(scheme, p)
    bounds = dict(bounds) if bounds is not None else default_bounds(scheme, free)
    missing = [p for p in free if p not in bounds]
    if missing:
        raise ValueError(f"no bounds for {missing}")
    lo = np.array([float(bounds[p][0]) for p in free])
    hi = np.array([float(bounds[p][1]) for p in free])
    if np.any(hi < lo):
        raise ValueError("lower bound above upper bound")

    plan = None
    plan_point = None
    if scheme.has_field("recovery") and scheme.has_field("coupling"):
        plan = plan_for(scheme)
        plan_point = {p: getattr(plan, p) for p in free if p in ("omega_r", "delta_r")}
        outside = [p for p, v in plan_point.items()
                   if not bounds[p][0] - 1e-9 <= v <= bounds[p][1] + 1e-9]
        if outside:
            warnings.warn(f"bounds exclude the compensation plan for {outside}",
                          BoundsExcludePlan, stacklevel=2)

    evaluate = Evaluation("beta", window)
    cache: dict[tuple[float, ...], float] = {}
    trace: list[tuple[dict[str, float], float]] = []

    def at(x) -> LevelScheme:
        s = scheme
        for p, v in zip(free, x):
            s = set_param(s, p, v)
        return s

    def record(x, b):
        key = tuple(float(v) for v in x)
        if key not in cache:
            cache[key] = b
            trace.append((dict(zip(free, key)), b))

    def f(x) -> float:
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        key = tuple(float(v) for v in x)
        if key not in cache:
            record(key, float(evaluate(at(x), grid)))
        return cache[key]

    axes = [np.linspace(a, b, grid_points) if b > a else np.array([a]) for a, b in zip(lo, hi)]
    pts = [tuple(float(v) for v in p) for p in itertools.product(*axes)]
    vals = parallel_map(lambda p: float(evaluate(at(p), grid)), pts, workers)
    for p, v in zip(pts, vals):
        record(p, v)

    active = hi > lo
    converged, message = True, "grid scan only"
    if active.any():
        i0 = int(np.argmax(vals))
        x0 = np.array(pts[i0])
        spacing = np.where(active, (hi - lo) / max(grid_points - 1, 1), 0.0)
        idx = np.flatnonzero(active)

        def g(y):
            x = x0.copy()
            x[idx] = y
            return -f(x)

        y0 = x0[idx]
        simplex = [y0]
        for k, j in enumerate(idx):
            step = 0.5 * spacing[j]
            y = y0.copy()
            y[k] = y[k] + step if y[k] + step <= hi[j] else y[k] - step
            simplex.append(y)
        res = minimize(g, y0, method="Nelder-Mead",
                       bounds=list(zip(lo[idx], hi[idx])),
                       options={"initial_simplex": np.array(simplex), "xatol": xatol,
                                "fatol": frtol * max(vals[i0], 1e-12), "maxiter": maxiter})
        converged, message = bool(res.success), str(res.message)

    best_params, best = max(trace, key=lambda t: t[1])
    plan_beta = None
    if plan_point and len(plan_point) == len(free):
        s = scheme
        for p, v in plan_point.items():
            s = set_param(s, p, v)
        plan_beta = float(evaluate(s, grid))
    return OptimumReport(dict(best_params), float(best), len(trace), trace,
                         plan, plan_beta, converged, message)


# ---------------------------------------------------------------------------
# figure datasets

FIGURES = ("fig1bd", "fig2", "fig3a", "fig3b", "fig4", "fig5")
FIG3A_OMEGAS = (15.0, 22.0, 29.0, 36.0)
FIG4_PARAMS = dict(gamma=2.875, gamma_r=2.875, gamma_sg=0.35, sigma=220.0,
                   delta=-5000.0, delta_r=-5000.0, eta=1.0)


def fig4_scheme(mu: float, **overrides) -> LevelScheme:
    """Ideal symmetric far-detuned N-type scheme at saturation parameter ``mu``."""
    p = dict(FIG4_PARAMS, **overrides)
    om = omega_for_mu(mu, p["delta"], p["sigma"], p["gamma"], p["gamma_r"], p["gamma_sg"])
    return preset("n_type", p, omega=om, omega_r=om)


def fig4_mu_values(resolution: str = "full") -> list[float]:
    core = np.geomspace(0.3, 3.0, 8 if resolution == "full" else 4)
    return [float(v) for v in core] + [5.0, 8.0]


@dataclass
class FigureOutput:
    figure: str
    files: list[Path]
    manifest: Path


def _grid_for(resolution: str) -> QuadratureGrid:
    if resolution == "full":
        return default_grid()
    if resolution == "draft":
        return quadrature_grid(1001)
    raise ValueError(f"resolution must be 'full' or 'draft', got {resolution!r}")


def _limit_line(scheme: LevelScheme, grid: QuadratureGrid) -> float:
    return reference_peak(scheme, grid).height


def _fig1bd(out, res, grid, workers):
    step = 0.5 if res == "full" else 2.0
    us = (-2.0, -1.0, 0.0, 1.0, 2.0)
    det = np.arange(-600.0, 300.0 + step / 2, step)
    on = preset("n_type")
    off = set_param(on, "omega_r", 0.0)
    files, params = [], {}
    for name, s in (("fig1b_recovery_off.csv", off), ("fig1d_recovery_on.csv", on)):
        model = compile_scheme(s)
        per = np.array(parallel_map(lambda x: model.absorption(np.array(us), x), list(det), workers))
        summed = spectrum_at(s, det, grid, workers).absorption
        limit = _limit_line(s, grid)
        cols = ["probe_detuning_mhz"] + [f"absorber_u{u:+g}" for u in us] + \
            ["ensemble", "inhomogeneous_limit"]
        rows = [(x, *per[k], summed[k], limit) for k, x in enumerate(det)]
        files.append(_write(out / name, cols, rows))
        params[name] = s.to_dict()
    return files, params


def _fig2(out, res, grid, workers):
    step = 0.5 if res == "full" else 2.0
    det = np.arange(-600.0, 300.0 + step / 2, step)
    on = preset("n_type", omega=29.0, omega_r=29.6, delta=-270.0, delta_r=-300.0)
    off = set_param(on, "omega_r", 0.0)
    a_off = spectrum_at(off, det, grid, workers).absorption
    a_on = spectrum_at(on, det, grid, workers).absorption
    limit = _limit_line(on, grid)
    rows = [(x, a, b, limit) for x, a, b in zip(det, a_off, a_on)]
    f = _write(out / "fig2_spectra.csv",
               ["probe_detuning_mhz", "recovery_off", "recovery_on", "inhomogeneous_limit"], rows)
    return [f], {"fig2_spectra.csv": on.to_dict()}


def _best_delta_r(scheme: LevelScheme, grid, span=40.0, xatol=0.1):
    plan = plan_for(scheme)
    lo, hi = plan.delta_r - span, plan.delta_r + span
    res = minimize_scalar(lambda d: -simulate_beta(set_param(scheme, "delta_r", d), None, grid).beta,
                          bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    return float(res.x), float(-res.fun)


def _fig3a(out, res, grid, workers):
    omr = np.arange(10.0, 50.0 + 1e-9, 4.0 if res == "full" else 8.0)
    pts = [(om, r) for om in FIG3A_OMEGAS for r in omr]

    def row(pt):
        om, r = pt
        s = preset("n_type", omega=om, omega_r=r, delta=-270.0, delta_r=-270.0)
        d, b = _best_delta_r(s, grid)
        return (om, r, d, b)

    rows = parallel_map(row, pts, workers)
    f = _write(out / "fig3a_beta_vs_omega_r.csv", ["omega_mhz", "omega_r_mhz", "delta_r_opt_mhz", "beta"], rows)
    return [f], {"omega_family": list(FIG3A_OMEGAS), "delta": -270.0, "family_source": "artifact-chosen"}


def _fig3b(out, res, grid, workers):
    step = 2.5 if res == "full" else 10.0
    base = preset("n_type", omega=29.0, omega_r=29.0, delta=-270.0, delta_r=-270.0)
    spec = SweepSpec(base, (("delta_r", tuple(np.arange(-330.0, -210.0 + 1e-9, step))),))
    result = sweep(spec, grid, workers)
    f = out / "fig3b_beta_vs_delta_r.csv"
    f.write_text(format_csv(["delta_r_mhz", "beta"], [r for r in result.rows]))
    return [f], {"fig3b_beta_vs_delta_r.csv": base.to_dict()}


def fig4_rows(resolution: str = "full", grid: QuadratureGrid | None = None, workers=None) -> list[tuple]:
    grid = grid or _grid_for(resolution)
    p = FIG4_PARAMS
    beta0 = inhomogeneous_limit(p["sigma"], p["gamma"])
    asym = beta0 * p["gamma"] / (p["gamma"] + p["gamma_r"])

    def row(mu):
        s = fig4_scheme(mu)
        om = get_param(s, "omega")
        b = simulate_beta(s, None, grid).beta
        return (mu, om, b, saturation_beta(beta0, p["gamma"], p["gamma_r"], mu),
                dressed_beta(beta0, p["gamma"], p["gamma_r"], p["gamma_sg"], om, p["delta"]), asym)

    return parallel_map(row, fig4_mu_values(resolution), workers)


FIG4_COLUMNS = ["mu", "omega_mhz", "beta", "beta_saturation_form", "beta_dressed_form", "asymptote"]


def _fig4(out, res, grid, workers):
    rows = fig4_rows(res, grid, workers)
    f = _write(out / "fig4_beta_vs_mu.csv", FIG4_COLUMNS, rows)
    p = FIG4_PARAMS
    return [f], {"fig4_beta_vs_mu.csv": dict(p, beta0_formula=inhomogeneous_limit(p["sigma"], p["gamma"]))}


def _fig5(out, res, grid, workers):
    step = 0.5 if res == "full" else 2.0
    det = np.arange(-300.0, 300.0 + step / 2, step)
    on = preset("ladder_rydberg")
    off = set_param(on, "omega_r", 0.0)
    a_off = spectrum_at(off, det, grid, workers).absorption
    a_on = spectrum_at(on, det, grid, workers).absorption
    limit = _limit_line(on, grid)
    rows = [(x, a, b, limit) for x, a, b in zip(det, a_off, a_on)]
    f = _write(out / "fig5_ladder_spectra.csv",
               ["probe_detuning_mhz", "recovery_off", "recovery_on", "inhomogeneous_limit"], rows)
    return [f], {"fig5_ladder_spectra.csv": on.to_dict()}


def _write(path: Path, columns, rows) -> Path:
    path.write_text(format_csv(columns, rows))
    return path


_DRIVERS: dict[str, Callable] = {
    "fig1bd": _fig1bd, "fig2": _fig2, "fig3a": _fig3a,
    "fig3b": _fig3b, "fig4": _fig4, "fig5": _fig5,
}


def reproduce_figure(figure_id: str, out_dir=".", resolution: str = "full", workers=None) -> FigureOutput:
    """Write the CSV datasets of one figure plus ``<id>_manifest.json``."""
    if figure_id not in _DRIVERS:
        raise UnknownFigure(f"unknown figure {figure_id!r}; expected one of {list(FIGURES)}")
    grid = _grid_for(resolution)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, params = _DRIVERS[figure_id](out, resolution, grid, workers)
    manifest = {
        "figure": figure_id,
        "resolution": resolution,
        "grid_nodes": grid.size,
        "grid_span": grid.span,
        "files": [f.name for f in files],
        "parameters": params,
    }
    mpath = out / f"{figure_id}_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return FigureOutput(figure_id, files, mpath)
