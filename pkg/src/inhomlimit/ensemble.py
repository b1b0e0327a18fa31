"""
Ensemble averaging over the Gaussian shift distribution.

The ensemble variable ``u`` is sampled on a dense uniform grid with Gaussian
weights.  Absorbers are solved in one stacked call per probe detuning and the
weighted sum uses :func:`math.fsum`, so a spectrum does not depend on how its
points were distributed across worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy.optimize import minimize_scalar

from .errors import BadGridParams, BadProfile, EmptyWindow, SingularLiouvillian
from .liouville import compile_scheme
from .scheme import LevelScheme

WORKERS_ENV = "INHOMLIMIT_WORKERS"
DEFAULT_NODES = 4001
DEFAULT_SPAN = 5.0


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    span: float

    @property
    def size(self) -> int:
        return self.nodes.size


def quadrature_grid(n: int = DEFAULT_NODES, span: float = DEFAULT_SPAN) -> QuadratureGrid:
    """Uniform nodes on ``[-span, span]`` with renormalized Gaussian weights."""
    if n < 3 or n % 2 == 0:
        raise BadGridParams(f"n must be odd and >= 3, got {n}")
    if span < 4:
        raise BadGridParams(f"span must be >= 4 standard deviations, got {span}")
    nodes = np.linspace(-span, span, n)
    w = np.exp(-0.5 * nodes**2)
    # symmetric by construction so the odd moments vanish exactly
    w = 0.5 * (w + w[::-1])
    w /= math.fsum(w)
    nodes.setflags(write=False)
    w.setflags(write=False)
    return QuadratureGrid(nodes, w, float(span))


@lru_cache(maxsize=8)
def _cached_grid(n: int, span: float) -> QuadratureGrid:
    return quadrature_grid(n, span)


def default_grid() -> QuadratureGrid:
    return _cached_grid(DEFAULT_NODES, DEFAULT_SPAN)


def resolve_workers(workers: int | str | None = None) -> int:
    """Worker count from the argument, then ``$INHOMLIMIT_WORKERS``, else 1."""
    if workers is None:
        workers = os.environ.get(WORKERS_ENV, 1)
    if isinstance(workers, str):
        if workers in ("auto", "max"):
            return os.cpu_count() or 1
        workers = int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return int(workers)


def parallel_map(fn: Callable, items: Sequence, workers: int | str | None = None) -> list:
    """Order-preserving map; threads suffice because LAPACK releases the GIL."""
    nw = resolve_workers(workers)
    if nw == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(fn, items))


def ensemble_absorption(scheme: LevelScheme, probe_detuning: float | None = None,
                        grid: QuadratureGrid | None = None) -> float:
    """Weighted sum of normalized absorption over the grid of absorbers."""
    grid = grid or default_grid()
    model = compile_scheme(scheme)
    try:
        a = model.absorption(grid.nodes, probe_detuning)
    except np.linalg.LinAlgError:
        _locate_failure(scheme, grid, probe_detuning)
        raise
    return math.fsum(grid.weights * a)


def _locate_failure(scheme, grid, probe_detuning):
    model = compile_scheme(scheme)
    for u in grid.nodes:
        try:
            model.solve(np.array([u]), probe_detuning)
        except np.linalg.LinAlgError:
            raise SingularLiouvillian(
                f"singular steady-state system at u={u:.6g}, "
                f"probe detuning {probe_detuning}") from None


def absorption_curve(scheme: LevelScheme, detunings: Sequence[float],
                     grid: QuadratureGrid | None = None,
                     workers: int | str | None = None) -> np.ndarray:
    grid = grid or default_grid()
    compile_scheme(scheme)  # compile once before fanning out
    vals = parallel_map(lambda x: ensemble_absorption(scheme, x, grid),
                        [float(x) for x in detunings], workers)
    return np.array(vals)


@dataclass
class Spectrum:
    probe_detunings: np.ndarray
    absorption: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.probe_detunings = np.asarray(self.probe_detunings, dtype=float)
        self.absorption = np.asarray(self.absorption, dtype=float)
        if self.probe_detunings.shape != self.absorption.shape:
            raise ValueError("detunings and absorption differ in length")

    def __len__(self):
        return self.probe_detunings.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("probe_detuning_mhz,absorption_norm\n")
        for x, a in zip(self.probe_detunings, self.absorption):
            buf.write(f"{x:.9g},{a:.9g}\n")
        return buf.getvalue()

    def write(self, path: str | os.PathLike) -> tuple[Path, Path]:
        """Write ``path`` (CSV) and ``path`` with ``.json`` suffix (metadata)."""
        path = Path(path)
        path.write_text(self.to_csv())
        meta = path.with_suffix(".json")
        meta.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return path, meta

    @classmethod
    def read(cls, path: str | os.PathLike) -> "Spectrum":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["probe_detuning_mhz", "absorption_norm"]:
            raise ValueError(f"{path}: unexpected header {rows[0]}")
        data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, 2)
        meta_path = path.with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(data[:, 0], data[:, 1], meta)


def _metadata(scheme: LevelScheme, grid: QuadratureGrid, **extra) -> dict[str, Any]:
    meta = {
        "scheme_digest": scheme.digest(),
        "grid_nodes": grid.size,
        "grid_span": grid.span,
        "probe_rabi": scheme.probe.rabi,
        "probe_hwhm": scheme.probe_hwhm,
        "probe_shift_sd": scheme.field_sigma("probe"),
    }
    meta.update(extra)
    return meta


def spectrum_at(scheme: LevelScheme, detunings: Sequence[float],
                grid: QuadratureGrid | None = None,
                workers: int | str | None = None) -> Spectrum:
    """Ensemble spectrum on arbitrary (sorted) probe detunings."""
    grid = grid or default_grid()
    det = np.asarray(detunings, dtype=float)
    return Spectrum(det, absorption_curve(scheme, det, grid, workers), _metadata(scheme, grid))


def spectrum(scheme: LevelScheme, detuning_range: tuple[float, float], n_points: int,
             grid: QuadratureGrid | None = None,
             workers: int | str | None = None) -> Spectrum:
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    lo, hi = detuning_range
    return spectrum_at(scheme, np.linspace(lo, hi, n_points), grid, workers)


def gaussian_beam_profile(n_points: int = 8, waist_ratio: float = 4.0) -> list[tuple[float, float]]:
    """Intensities of a Gaussian control beam seen through a Gaussian probe.

    With ``x = 2 r**2 / w_probe**2`` the probe weights radii by ``exp(-x)``
    and the control intensity is ``exp(-x / waist_ratio**2)``; Gauss-Laguerre
    nodes give an ``n_points`` profile whose weights sum to one.
    """
    x, w = laggauss(n_points)
    return [(float(np.exp(-xi / waist_ratio**2)), float(wi)) for xi, wi in zip(x, w)]


def intensity_average(scheme: LevelScheme, detuning_range: tuple[float, float], n_points: int,
                      grid: QuadratureGrid | None = None,
                      beam_profile: Sequence[tuple[float, float]] = ((1.0, 1.0),),
                      workers: int | str | None = None,
                      detunings: Sequence[float] | None = None) -> Spectrum:
    """Average of spectra with the non-probe fields at several intensities."""
    profile = [(float(i), float(w)) for i, w in beam_profile]
    if not profile:
        raise BadProfile("empty beam profile")
    if any(i <= 0 for i, _ in profile) or any(w < 0 for _, w in profile):
        raise BadProfile("intensity fractions must be > 0 and weights >= 0")
    if abs(math.fsum(w for _, w in profile) - 1.0) > 1e-9:
        raise BadProfile("profile weights must sum to 1")
    grid = grid or default_grid()
    det = np.linspace(*detuning_range, n_points) if detunings is None else np.asarray(detunings)
    parts = [spectrum_at(scheme.scale_drives(i), det, grid, workers).absorption
             for i, _ in profile]
    stacked = np.array(parts)
    weights = np.array([w for _, w in profile])
    total = np.array([math.fsum(weights * stacked[:, k]) for k in range(det.size)])
    return Spectrum(det, total, _metadata(scheme, grid, beam_profile=profile))


@dataclass(frozen=True)
class Peak:
    detuning: float
    height: float
    at_edge: bool = False


def peak(spec: Spectrum, window: tuple[float, float]) -> Peak:
    """Maximum inside ``window`` refined by a parabola through three samples."""
    lo, hi = window
    x, y = spec.probe_detunings, spec.absorption
    sel = np.flatnonzero((x >= lo) & (x <= hi))
    if sel.size == 0:
        raise EmptyWindow(f"no samples in window {window}")
    i = sel[np.argmax(y[sel])]
    if i == sel[0] or i == sel[-1]:
        return Peak(float(x[i]), float(y[i]), at_edge=True)
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = y[i - 1:i + 2]
    # vertex of the interpolating parabola (nonuniform spacing allowed)
    d01, d12 = (y1 - y0) / (x1 - x0), (y2 - y1) / (x2 - x1)
    curv = (d12 - d01) / (x2 - x0)
    if curv >= 0:
        return Peak(float(x1), float(y1))
    slope1 = d01 + curv * (x1 - x0)
    xv = x1 - slope1 / (2 * curv)
    xv = min(max(xv, x0), x2)
    yv = y1 + slope1 * (xv - x1) + curv * (xv - x1) ** 2
    return Peak(float(xv), float(max(yv, y1)))


def locate_peak(scheme: LevelScheme, window: tuple[float, float],
                grid: QuadratureGrid | None = None, step: float = 0.5,
                xatol: float = 1e-3) -> Peak:
    """Maximum of the ensemble absorption inside ``window``.

    Scans with spacing ``step`` and polishes the best sample by bounded Brent
    iterations on the bracketing interval.
    """
    lo, hi = window
    if not hi > lo:
        raise EmptyWindow(f"degenerate window {window}")
    grid = grid or default_grid()
    n = max(3, int(math.ceil((hi - lo) / step)) + 1)
    xs = np.linspace(lo, hi, n)
    ys = np.array([ensemble_absorption(scheme, x, grid) for x in xs])
    i = int(np.argmax(ys))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    res = minimize_scalar(lambda x: -ensemble_absorption(scheme, x, grid),
                          bounds=(a, b), method="bounded", options={"xatol": xatol})
    if -res.fun > ys[i]:
        x_best, y_best = float(res.x), float(-res.fun)
    else:
        x_best, y_best = float(xs[i]), float(ys[i])
    edge = (i == 0 or i == n - 1) and abs(x_best - xs[i]) < 2 * xatol
    return Peak(x_best, y_best, at_edge=edge)
