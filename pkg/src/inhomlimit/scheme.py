"""
Level-scheme data model and presets.

A :class:`LevelScheme` describes one class of absorbers: its levels and decay
channels, the laser fields driving it, extra pure-dephasing channels and the
Gaussian inhomogeneity.  Every field's transition frequency is shifted by
``shift_coefficient * u`` where ``u`` is a standard-normal ensemble variable
shared by all fields of one absorber, so shifts on different transitions are
perfectly correlated (Doppler shifts of co- or counter-propagating beams, or a
common strain coupling).

Units are MHz throughout, with linewidths quoted as Lorentzian HWHM.  A level's
``population_decay_rate`` is therefore twice the HWHM of the optical coherence
it damps.

``DriveField.rabi`` is the full Rabi frequency: the Hamiltonian off-diagonal
element is ``rabi / 2`` and the Autler-Townes splitting equals ``rabi``.  The
presets take coupling strengths ``omega`` in the convention where the
off-diagonal element itself is ``omega`` (light shift ``omega**2 / detuning``),
and store ``rabi = 2 * omega``.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadBranching,
    CyclicDriveGraph,
    DisconnectedDriveGraph,
    MissingProbe,
    NonPhysicalParams,
    SchemeError,
    UnknownKind,
)

MAX_LEVELS = 6
PROBE = "probe"

# Rb constants used by the presets (MHz, HWHM).
GAMMA_D1 = 2.875
GAMMA_D2 = 3.033
GAMMA_SG = 0.35
SIGMA_RB = 220.0
D1_HF_SPLITTING = 814.5


@dataclass(frozen=True)
class Level:
    id: int
    label: str
    population_decay_rate: float = 0.0
    decay_branches: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "decay_branches",
            tuple((int(t), float(f)) for t, f in self.decay_branches),
        )
        object.__setattr__(self, "population_decay_rate", float(self.population_decay_rate))


@dataclass(frozen=True)
class DriveField:
    """One laser acting on one transition.

    Several ``DriveField`` entries may share a ``laser`` (same optical
    frequency on different transitions, e.g. a second hyperfine level); the
    detuning of each entry is measured from its own transition.
    """

    id: str
    lower_level: int
    upper_level: int
    rabi: float
    detuning: float = 0.0
    shift_coefficient: float = 0.0
    laser: str = ""

    def __post_init__(self):
        if not self.laser:
            object.__setattr__(self, "laser", self.id)
        for name in ("rabi", "detuning", "shift_coefficient"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass(frozen=True)
class DephasingChannel:
    level_pair: tuple[int, int]
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "level_pair", tuple(int(i) for i in self.level_pair))
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class InhomogeneityModel:
    sigma: float
    distribution: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class LevelScheme:
    levels: tuple[Level, ...]
    fields: tuple[DriveField, ...]
    dephasing: tuple[DephasingChannel, ...]
    inhom: InhomogeneityModel
    # level energy = frame @ (field detuning - field shift); filled by validation
    _frame: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "dephasing", tuple(self.dephasing))
        object.__setattr__(self, "_frame", _validate(self))

    # -- lookups -----------------------------------------------------------
    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def probe(self) -> DriveField:
        return self.field(PROBE)

    def field(self, field_id: str) -> DriveField:
        for f in self.fields:
            if f.id == field_id:
                return f
        raise KeyError(field_id)

    def has_field(self, field_id: str) -> bool:
        return any(f.id == field_id for f in self.fields)

    def level_index(self, label: str) -> int:
        for lv in self.levels:
            if lv.label == label:
                return lv.id
        raise KeyError(label)

    def probe_fields(self) -> tuple[DriveField, ...]:
        """All transitions driven by the probe laser."""
        laser = self.probe.laser
        return tuple(f for f in self.fields if f.laser == laser)

    @property
    def probe_hwhm(self) -> float:
        return self.levels[self.probe.upper_level].population_decay_rate / 2.0

    # -- derived inhomogeneity ----------------------------------------------
    def field_sigma(self, field_id: str) -> float:
        """Standard deviation of the shift of one field's transition."""
        return abs(self.field(field_id).shift_coefficient)

    def level_shift_coefficients(self) -> np.ndarray:
        """Coefficient of ``u`` in each level's rotating-frame energy."""
        s = np.array([f.shift_coefficient for f in self.fields])
        return -(self._frame @ s)

    def transition_shift_coefficient(self, a: int, b: int) -> float:
        """Coefficient of ``u`` in the frame energy difference ``E_b - E_a``."""
        k = self.level_shift_coefficients()
        return float(k[b] - k[a])

    # -- functional updates -------------------------------------------------
    def with_field(self, field_id: str, **changes) -> "LevelScheme":
        if not self.has_field(field_id):
            raise KeyError(field_id)
        fields = tuple(replace(f, **changes) if f.id == field_id else f for f in self.fields)
        return replace(self, fields=fields)

    def with_laser(self, laser: str, *, rabi_scale: float | None = None,
                   detuning: float | None = None) -> "LevelScheme":
        """Update every entry of one laser.

        ``detuning`` sets the detuning of the entry whose id equals ``laser``;
        siblings keep their offset from it.
        """
        main = self.field(laser)
        fields = []
        for f in self.fields:
            if f.laser == laser:
                ch: dict[str, float] = {}
                if rabi_scale is not None:
                    ch["rabi"] = f.rabi * rabi_scale
                if detuning is not None:
                    ch["detuning"] = detuning + (f.detuning - main.detuning)
                f = replace(f, **ch)
            fields.append(f)
        return replace(self, fields=tuple(fields))

    def scale_drives(self, intensity: float) -> "LevelScheme":
        """Scale every non-probe Rabi frequency by ``sqrt(intensity)``."""
        s = float(np.sqrt(intensity))
        probe_laser = self.probe.laser
        fields = tuple(f if f.laser == probe_laser else replace(f, rabi=f.rabi * s)
                       for f in self.fields)
        return replace(self, fields=fields)

    def scale_shifts(self, c: float) -> "LevelScheme":
        fields = tuple(replace(f, shift_coefficient=f.shift_coefficient * c) for f in self.fields)
        return replace(self, fields=fields, inhom=replace(self.inhom, sigma=self.inhom.sigma * c))

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return {
            "levels": [
                {
                    "id": lv.id,
                    "label": lv.label,
                    "population_decay_rate": lv.population_decay_rate,
                    "decay_branches": [[t, f] for t, f in lv.decay_branches],
                }
                for lv in self.levels
            ],
            "fields": [asdict(f) for f in self.fields],
            "dephasing": [
                {"level_pair": list(d.level_pair), "rate": d.rate} for d in self.dephasing
            ],
            "inhom": {"sigma": self.inhom.sigma, "distribution": self.inhom.distribution},
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "LevelScheme":
        _check_keys(doc, {"levels", "fields", "dephasing", "inhom"}, "scheme")
        try:
            levels = [Level(**_checked(lv, Level, "level")) for lv in doc["levels"]]
            fields = [DriveField(**_checked(f, DriveField, "field")) for f in doc["fields"]]
            deph = [DephasingChannel(**_checked(d, DephasingChannel, "dephasing"))
                    for d in doc.get("dephasing", [])]
            inhom = InhomogeneityModel(**_checked(doc["inhom"], InhomogeneityModel, "inhom"))
        except (KeyError, TypeError) as exc:
            raise SchemeError(f"malformed scheme document: {exc}") from exc
        return build_scheme(levels, fields, deph, inhom)

    @classmethod
    def from_json(cls, text: str) -> "LevelScheme":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _check_keys(doc, allowed, where):
    if not isinstance(doc, Mapping):
        raise SchemeError(f"{where}: expected an object")
    extra = set(doc) - set(allowed)
    if extra:
        raise SchemeError(f"{where}: unknown keys {sorted(extra)}")


def _checked(doc, cls, where):
    names = {f.name for f in cls.__dataclass_fields__.values() if f.init}
    _check_keys(doc, names, where)
    return dict(doc)


def build_scheme(levels: Iterable[Level], fields: Iterable[DriveField],
                 dephasing: Iterable[DephasingChannel] = (),
                 inhom: InhomogeneityModel | float = SIGMA_RB) -> LevelScheme:
    """Assemble and validate a :class:`LevelScheme`."""
    if not isinstance(inhom, InhomogeneityModel):
        inhom = InhomogeneityModel(float(inhom))
    return LevelScheme(tuple(levels), tuple(fields), tuple(dephasing), inhom)


def _validate(s: LevelScheme) -> np.ndarray:
    n = len(s.levels)
    if n < 2 or n > MAX_LEVELS:
        raise SchemeError(f"need 2..{MAX_LEVELS} levels, got {n}")
    for i, lv in enumerate(s.levels):
        if lv.id != i:
            raise SchemeError(f"level ids must be 0..{n - 1} in order (got {lv.id} at {i})")
        if lv.population_decay_rate < 0:
            raise NonPhysicalParams(f"level {lv.label!r}: negative decay rate")
        fracs = [f for _, f in lv.decay_branches]
        if any(f < 0 for f in fracs):
            raise BadBranching(f"level {lv.label!r}: negative branching fraction")
        if any(t == i for t, _ in lv.decay_branches):
            raise BadBranching(f"level {lv.label!r}: decays into itself")
        if any(not 0 <= t < n for t, _ in lv.decay_branches):
            raise BadBranching(f"level {lv.label!r}: unknown decay target")
        if lv.population_decay_rate > 0 and abs(sum(fracs) - 1.0) > 1e-12:
            raise BadBranching(f"level {lv.label!r}: branching sums to {sum(fracs)}")
    labels = [lv.label for lv in s.levels]
    if len(set(labels)) != n:
        raise SchemeError("level labels must be unique")

    ids = [f.id for f in s.fields]
    if len(set(ids)) != len(ids):
        raise SchemeError("field ids must be unique")
    if ids.count(PROBE) != 1:
        raise MissingProbe("exactly one field must have id 'probe'")
    for f in s.fields:
        if f.lower_level == f.upper_level:
            raise SchemeError(f"field {f.id!r}: lower_level == upper_level")
        if not (0 <= f.lower_level < n and 0 <= f.upper_level < n):
            raise SchemeError(f"field {f.id!r}: unknown level")
        if f.rabi < 0:
            raise NonPhysicalParams(f"field {f.id!r}: negative Rabi frequency")
        if not all(np.isfinite([f.rabi, f.detuning, f.shift_coefficient])):
            raise NonPhysicalParams(f"field {f.id!r}: non-finite parameter")

    for d in s.dephasing:
        a, b = d.level_pair
        if d.rate < 0:
            raise NonPhysicalParams("negative dephasing rate")
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise SchemeError(f"bad dephasing pair {d.level_pair}")

    if s.inhom.distribution != "gaussian":
        raise SchemeError("only a Gaussian inhomogeneity is supported")
    if not s.inhom.sigma > 0:
        raise NonPhysicalParams("sigma must be positive")

    return _rotating_frame(s)


def _rotating_frame(s: LevelScheme) -> np.ndarray:
    """Path coefficients from the probe's lower level to every level.

    Walks the drive graph breadth first.  Each level carries the integer
    combination of lasers defining its frame frequency; an edge closing a loop
    is accepted only if both ends agree, i.e. if a single rotating frame can
    remove the time dependence of every field.
    """
    n, nf = len(s.levels), len(s.fields)
    lasers = sorted({f.laser for f in s.fields})
    lidx = {name: i for i, name in enumerate(lasers)}
    root = s.probe.lower_level
    frame = np.zeros((n, nf))
    combo: list[np.ndarray | None] = [None] * n
    combo[root] = np.zeros(len(lasers), dtype=int)
    adj: dict[int, list[tuple[int, int, int]]] = {i: [] for i in range(n)}
    for j, f in enumerate(s.fields):
        adj[f.lower_level].append((j, f.upper_level, +1))
        adj[f.upper_level].append((j, f.lower_level, -1))
    used = set()
    queue = deque([root])
    while queue:
        a = queue.popleft()
        for j, b, sign in adj[a]:
            if j in used:
                continue
            used.add(j)
            step = np.zeros(len(lasers), dtype=int)
            step[lidx[s.fields[j].laser]] = sign
            want = combo[a] + step
            if combo[b] is None:
                combo[b] = want
                frame[b] = frame[a]
                # moving up along a field lowers the frame energy by its detuning
                frame[b, j] -= sign
                queue.append(b)
            elif not np.array_equal(combo[b], want):
                raise CyclicDriveGraph(
                    f"field {s.fields[j].id!r} closes a loop with no consistent rotating frame")
            else:
                _check_loop_detuning(s, frame, a, b, j, sign)
    missing = [s.levels[i].label for i in range(n) if combo[i] is None]
    if missing:
        raise DisconnectedDriveGraph(f"levels not reached by any field: {missing}")
    return frame


def _check_loop_detuning(s, frame, a, b, j, sign):
    det = np.array([f.detuning for f in s.fields])
    sh = np.array([f.shift_coefficient for f in s.fields])
    for vec in (det, sh):
        via_tree = frame[b] @ vec
        via_edge = frame[a] @ vec - sign * vec[j]
        if abs(via_tree - via_edge) > 1e-9 * max(1.0, abs(via_tree)):
            raise CyclicDriveGraph(
                f"field {s.fields[j].id!r}: detuning or shift inconsistent with the loop it closes")


# ---------------------------------------------------------------------------
# presets

_COMMON = dict(gamma=GAMMA_D1, sigma=SIGMA_RB, probe_rabi=None, probe_detuning=0.0)
_LAMBDA = dict(_COMMON, omega=29.0, delta=-270.0, gamma_sg=GAMMA_SG,
               branching_g=0.5, repump_fraction=1.0)
_NTYPE = dict(_LAMBDA, omega_r=29.0, delta_r=-270.0, gamma_r=GAMMA_D2, eta=1.0)
_NTYPE_HF = dict(_NTYPE, hf_splitting=D1_HF_SPLITTING, hf_probe_strength=1.0,
                 hf_coupling_strength=1.0)
_LADDER = dict(_COMMON, gamma=GAMMA_D2, omega=55.0, delta=0.0, omega_r=45.0, delta_r=0.0,
               gamma_r=1.0, gamma_sg=1.25, s_decay=0.66, sigma2=1.0, eta=776.0 / 1270.0)

PRESET_DEFAULTS: dict[str, dict[str, Any]] = {
    "two_level": dict(_COMMON),
    "lambda": _LAMBDA,
    "n_type": _NTYPE,
    "n_type_extra_hf": _NTYPE_HF,
    "ladder_rydberg": _LADDER,
}


def preset(kind: str, params: Mapping[str, Any] | None = None, **kwargs) -> LevelScheme:
    """Build one of the standard level schemes.

    Parameters
    ----------
    kind : {'two_level', 'lambda', 'n_type', 'n_type_extra_hf', 'ladder_rydberg'}
    params, **kwargs
        Overrides of :data:`PRESET_DEFAULTS` ``[kind]``.  ``omega`` and
        ``omega_r`` are off-diagonal coupling strengths (half Rabi frequencies);
        ``probe_rabi`` is a full Rabi frequency and defaults to ``0.01 * gamma``.
        ``eta`` is the wavevector ratio of the recovery field to the coupling
        field.  ``repump_fraction`` is the part of ``gamma_sg`` produced by
        population return from ``s`` to ``g``; the remainder is pure dephasing.

    Level labels are ``g``, ``e``, ``s``, ``r`` (and ``e2`` for the extra
    hyperfine level).
    """
    if kind not in PRESET_DEFAULTS:
        raise UnknownKind(f"unknown preset {kind!r}; expected one of {sorted(PRESET_DEFAULTS)}")
    p = dict(PRESET_DEFAULTS[kind])
    given = dict(params or {}, **kwargs)
    unknown = set(given) - set(p)
    if unknown:
        raise SchemeError(f"unknown parameters for {kind!r}: {sorted(unknown)}")
    p.update(given)
    for name in ("gamma", "gamma_r", "gamma_sg", "sigma", "s_decay", "omega", "omega_r",
                 "eta", "hf_probe_strength", "hf_coupling_strength"):
        if name in p and p[name] is not None and p[name] < 0:
            raise NonPhysicalParams(f"{name} must be nonnegative")
    if p["sigma"] <= 0 or p["gamma"] <= 0:
        raise NonPhysicalParams("sigma and gamma must be positive")
    if "repump_fraction" in p and not 0 <= p["repump_fraction"] <= 1:
        raise NonPhysicalParams("repump_fraction must lie in [0, 1]")
    if p["probe_rabi"] is None:
        p["probe_rabi"] = 0.01 * p["gamma"]
    return _BUILDERS[kind](p)


def _probe(p, sigma_coeff):
    return DriveField(PROBE, 0, 1, p["probe_rabi"], p["probe_detuning"], sigma_coeff)


def _two_level(p):
    levels = [Level(0, "g"), Level(1, "e", 2 * p["gamma"], ((0, 1.0),))]
    return build_scheme(levels, [_probe(p, p["sigma"])], [], p["sigma"])


def _ground_relaxation(p, g, s):
    """s -> g population return plus g-s dephasing adding up to gamma_sg."""
    repump = 2.0 * p["gamma_sg"] * p["repump_fraction"]
    deph = p["gamma_sg"] * (1.0 - p["repump_fraction"])
    deph_channels = [DephasingChannel((g, s), deph)] if deph > 0 else []
    return repump, deph_channels


def _e_branches(p):
    bg = p["branching_g"]
    if not 0 <= bg <= 1:
        raise NonPhysicalParams("branching_g must lie in [0, 1]")
    return tuple((t, f) for t, f in ((0, bg), (2, 1.0 - bg)) if f > 0)


def _lambda(p):
    sig = p["sigma"]
    repump, deph = _ground_relaxation(p, 0, 2)
    levels = [
        Level(0, "g"),
        Level(1, "e", 2 * p["gamma"], _e_branches(p)),
        Level(2, "s", repump, ((0, 1.0),) if repump > 0 else ()),
    ]
    fields = [_probe(p, sig), DriveField("coupling", 2, 1, 2 * p["omega"], p["delta"], sig)]
    return build_scheme(levels, fields, deph, sig)


def _n_type(p, extra_hf=False):
    sig = p["sigma"]
    repump, deph = _ground_relaxation(p, 0, 2)
    levels = [
        Level(0, "g"),
        Level(1, "e", 2 * p["gamma"], _e_branches(p)),
        Level(2, "s", repump, ((0, 1.0),) if repump > 0 else ()),
        Level(3, "r", 2 * p["gamma_r"], ((0, 1.0),)),
    ]
    fields = [
        _probe(p, sig),
        DriveField("coupling", 2, 1, 2 * p["omega"], p["delta"], sig),
        DriveField("recovery", 0, 3, 2 * p["omega_r"], p["delta_r"], p["eta"] * sig),
    ]
    if extra_hf:
        hf = p["hf_splitting"]
        levels.append(Level(4, "e2", 2 * p["gamma"], _e_branches(p)))
        fields += [
            DriveField("probe_hf", 0, 4, p["probe_rabi"] * p["hf_probe_strength"],
                       p["probe_detuning"] - hf, sig, laser=PROBE),
            DriveField("coupling_hf", 2, 4, 2 * p["omega"] * p["hf_coupling_strength"],
                       p["delta"] - hf, sig, laser="coupling"),
        ]
    return build_scheme(levels, fields, deph, sig)


def _ladder(p):
    sig, sig2 = p["sigma"], p["sigma2"]
    deph = p["gamma_sg"] - p["s_decay"] / 2.0
    if deph < -1e-12:
        raise NonPhysicalParams("gamma_sg must be at least s_decay / 2")
    levels = [
        Level(0, "g"),
        Level(1, "e", 2 * p["gamma"], ((0, 1.0),)),
        Level(2, "s", p["s_decay"], ((1, 1.0),) if p["s_decay"] > 0 else ()),
        Level(3, "r", 2 * p["gamma_r"], ((2, 1.0),)),
    ]
    coupling_coeff = -(sig - sig2)
    fields = [
        _probe(p, sig),
        DriveField("coupling", 1, 2, 2 * p["omega"], p["delta"], coupling_coeff),
        DriveField("recovery", 2, 3, 2 * p["omega_r"], p["delta_r"], p["eta"] * coupling_coeff),
    ]
    dch = [DephasingChannel((0, 2), deph)] if deph > 0 else []
    return build_scheme(levels, fields, dch, sig)


_BUILDERS = {
    "two_level": _two_level,
    "lambda": _lambda,
    "n_type": _n_type,
    "n_type_extra_hf": lambda p: _n_type(p, extra_hf=True),
    "ladder_rydberg": _ladder,
}


def reference_scheme(scheme: LevelScheme) -> LevelScheme:
    """The bare one-photon system of ``scheme``.

    Keeps only the levels joined by the probe laser, with every excited level
    decaying back to the probe's lower level.  Its ensemble peak is the
    inhomogeneous limit against which enhancement is measured.
    """
    pf = scheme.probe_fields()
    keep = sorted({f.lower_level for f in pf} | {f.upper_level for f in pf})
    remap = {old: new for new, old in enumerate(keep)}
    root = remap[scheme.probe.lower_level]
    uppers = {remap[f.upper_level] for f in pf}
    levels = []
    for old in keep:
        lv = scheme.levels[old]
        new = remap[old]
        if new in uppers:
            levels.append(Level(new, lv.label, lv.population_decay_rate, ((root, 1.0),)))
        else:
            levels.append(Level(new, lv.label))
    fields = [replace(f, lower_level=remap[f.lower_level], upper_level=remap[f.upper_level])
              for f in pf]
    return build_scheme(levels, fields, [], scheme.inhom)

