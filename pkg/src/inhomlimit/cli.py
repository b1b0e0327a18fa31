"""
Command-line entry point.

Configuration is a JSON document; command-line flags override its values.
Every command accepts ``--config FILE`` and repeatable ``--set KEY=VALUE``
(dotted keys, JSON values).  Examples::

    inhomlimit plan --omega 29 --delta -270 --eta 1
    inhomlimit predict --omega 29 --omega-r 29.6 --delta-r -300
    inhomlimit spectrum --preset n_type --range -400 100 --points 501 -o ntype.csv
    inhomlimit optimize --config run.json --delta-r -290
    inhomlimit figure fig4 --resolution draft -o out/
    inhomlimit selftest

Exit status is 0 on success, 1 on configuration or physics errors and 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .ensemble import QuadratureGrid, default_grid, quadrature_grid, resolve_workers, spectrum
from .errors import InhomLimitError, ParseError, SchemeError, ValidationError
from .optimize import FIGURES, QUANTITIES, Evaluation, SweepSpec, maximize_beta, reproduce_figure, sweep
from .recovery import compensation_plan, predicted_beta, scattering_rates
from .scheme import (
    GAMMA_D1,
    GAMMA_D2,
    GAMMA_SG,
    PRESET_DEFAULTS,
    SIGMA_RB,
    LevelScheme,
    preset,
)

COMMANDS = ("spectrum", "plan", "predict", "optimize", "sweep", "figure", "selftest")

_num = {"type": "number"}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


CONFIG_SCHEMA = _obj({
    "scheme": {"oneOf": [
        _obj({"preset": {"enum": sorted(PRESET_DEFAULTS)},
              "params": {"type": "object"}}, ["preset"]),
        _obj({"file": {"type": "string"}}, ["file"]),
        _obj({"inline": {"type": "object"}}, ["inline"]),
    ]},
    "grid": _obj({"nodes": {"type": "integer"}, "span": _num}),
    "workers": {"oneOf": [{"type": "integer", "minimum": 1}, {"enum": ["auto", "max"]}]},
    "output": {"type": "string"},
    "spectrum": _obj({"range": _pair, "points": {"type": "integer", "minimum": 2}}),
    "plan": _obj({"omega": _num, "delta": _num, "eta": _num}),
    "predict": _obj({k: _num for k in ("omega", "delta", "sigma", "gamma", "omega_r", "delta_r",
                                       "sigma_r", "gamma_r", "gamma_sg", "beta0")}),
    "optimize": _obj({
        "free": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "bounds": {"type": "object", "additionalProperties": _pair},
        "grid_points": {"type": "integer", "minimum": 1},
        "window": _pair,
    }),
    "sweep": _obj({
        "axes": {"type": "array", "minItems": 1, "items": {"oneOf": [
            _obj({"path": {"type": "string"},
                  "values": {"type": "array", "items": _num, "minItems": 1}}, ["path", "values"]),
            _obj({"path": {"type": "string"}, "start": _num, "stop": _num,
                  "num": {"type": "integer", "minimum": 1}}, ["path", "start", "stop", "num"]),
        ]}},
        "quantity": {"enum": list(QUANTITIES)},
        "window": _pair,
        "range": _pair,
        "points": {"type": "integer", "minimum": 2},
    }),
    "figure": _obj({"id": {"enum": list(FIGURES)}, "resolution": {"enum": ["full", "draft"]}}),
    "selftest": _obj({"criteria": {"type": "array", "items": {"type": "integer", "minimum": 1,
                                                              "maximum": 10}}}),
})

DEFAULTS: dict[str, Any] = {
    "scheme": {"preset": "n_type"},
    "grid": {"nodes": 4001, "span": 5.0},
    "workers": 1,
    "spectrum": {"range": [-700.0, 300.0], "points": 1001},
    "plan": {"omega": 29.0, "delta": -270.0, "eta": 1.0},
    "predict": {"omega": 29.0, "delta": -270.0, "sigma": SIGMA_RB, "gamma": GAMMA_D1,
                "omega_r": 29.0, "delta_r": -270.0, "sigma_r": SIGMA_RB, "gamma_r": GAMMA_D2,
                "gamma_sg": GAMMA_SG},
    "optimize": {"free": ["omega_r", "delta_r"], "grid_points": 11},
    "sweep": {"quantity": "beta"},
    "figure": {"resolution": "full"},
    "selftest": {"criteria": list(range(1, 11))},
}


@dataclass
class RunConfig:
    """Validated configuration with every default filled in."""
    document: dict[str, Any]
    scheme: LevelScheme
    grid: QuadratureGrid
    workers: int

    def section(self, name: str) -> dict[str, Any]:
        return self.document.get(name, {})


def _set_dotted(doc: dict, key: str, value) -> None:
    parts = key.split(".")
    cur = doc
    for p in parts[:-1]:
        nxt = cur.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ValidationError(f"{key}: {p!r} is not a section")
        cur = nxt
    cur[parts[-1]] = value


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _where(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def parse_config(text: str | None = None, *, source: str = "<config>",
                 overrides: dict[str, Any] | None = None,
                 base_dir: str | Path | None = None, command: str | None = None) -> RunConfig:
    """Parse, merge and validate a configuration.

    ``overrides`` maps dotted keys (``"scheme.params.delta_r"``) to values and
    takes precedence over the document.  Unknown keys anywhere are rejected.
    Defaults are filled for every section present and for ``command``'s.
    """
    doc: dict[str, Any] = {}
    if text is not None and text.strip():
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ParseError(f"{source}:1:1: top level must be an object")
    for k, v in (overrides or {}).items():
        _set_dotted(doc, k, v)
    sch = doc.setdefault("scheme", copy.deepcopy(DEFAULTS["scheme"]))
    if isinstance(sch, dict) and not {"preset", "file", "inline"} & set(sch):
        sch.update(DEFAULTS["scheme"])

    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(doc),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        detail = e.message
        if e.validator == "oneOf" and e.context:
            # report the branch that got furthest
            best = max(e.context, key=lambda c: len(c.absolute_path))
            detail, e = best.message, best
        raise ValidationError(f"{_where(e)}: {detail}")

    doc = _merge({"grid": DEFAULTS["grid"], "workers": DEFAULTS["workers"]}, doc)
    scheme_doc = doc["scheme"]
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    try:
        if "preset" in scheme_doc:
            kind = scheme_doc["preset"]
            params = dict(scheme_doc.get("params", {}))
            unknown = sorted(set(params) - set(PRESET_DEFAULTS[kind]))
            if unknown:
                raise ValidationError(f"scheme.params.{unknown[0]}: unknown parameter for "
                                      f"preset {kind!r}")
            full = dict(PRESET_DEFAULTS[kind], **params)
            if full.get("probe_rabi") is None:
                full["probe_rabi"] = 0.01 * full["gamma"]
            scheme_doc["params"] = full
            scheme = preset(kind, full)
        elif "file" in scheme_doc:
            path = Path(scheme_doc["file"])
            path = path if path.is_absolute() else base / path
            if not path.is_file():
                raise ValidationError(f"scheme.file: {path} does not exist")
            scheme = LevelScheme.from_json(path.read_text())
        else:
            scheme = LevelScheme.from_dict(scheme_doc["inline"])
    except SchemeError as exc:
        raise ValidationError(f"scheme: {exc}") from None

    g = doc["grid"]
    g.setdefault("nodes", DEFAULTS["grid"]["nodes"])
    g.setdefault("span", DEFAULTS["grid"]["span"])
    try:
        grid = quadrature_grid(g["nodes"], g["span"])
        workers = resolve_workers(doc["workers"])
    except (InhomLimitError, ValueError) as exc:
        raise ValidationError(f"grid/workers: {exc}") from None
    for name in COMMANDS:
        if name in doc or name == command:
            doc[name] = _merge(DEFAULTS[name], doc.get(name, {}))
    if "spectrum" in doc:
        lo, hi = doc["spectrum"]["range"]
        if not hi > lo:
            raise ValidationError("spectrum.range: upper end must exceed lower end")
    if (g["nodes"], g["span"]) == (DEFAULTS["grid"]["nodes"], DEFAULTS["grid"]["span"]):
        grid = default_grid()  # shared instance keeps per-grid caches warm
    return RunConfig(doc, scheme, grid, workers)


# ---------------------------------------------------------------------------
# output


def _round9(obj):
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(f"{obj:.9g}")
    if isinstance(obj, (np.floating, np.integer)):
        return _round9(obj.item())
    if isinstance(obj, dict):
        return {str(k): _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_round9(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def _cmd_spectrum(cfg: RunConfig) -> int:
    sec = cfg.section("spectrum")
    sp = spectrum(cfg.scheme, tuple(sec["range"]), sec["points"], cfg.grid, cfg.workers)
    out = cfg.document.get("output")
    if out:
        sp.write(out)
    else:
        sys.stdout.write(sp.to_csv())
    return 0


def _cmd_plan(cfg: RunConfig) -> int:
    s = cfg.section("plan")
    plan = compensation_plan(s["omega"], s["delta"], s["eta"])
    _emit(dumps(vars(plan)), cfg.document.get("output"))
    return 0


def _cmd_predict(cfg: RunConfig) -> int:
    s = cfg.section("predict")
    rates = scattering_rates(s["omega"], s["delta"], s["sigma"], s["gamma"],
                             s["omega_r"], s["delta_r"], s["sigma_r"], s["gamma_r"])
    pred = predicted_beta(rates, s["gamma_sg"], s.get("beta0"))
    _emit(dumps(pred.to_dict()), cfg.document.get("output"))
    return 0


def _cmd_optimize(cfg: RunConfig) -> int:
    s = cfg.section("optimize")
    bounds = {k: tuple(v) for k, v in s["bounds"].items()} if "bounds" in s else None
    rep = maximize_beta(cfg.scheme, s["free"], bounds, cfg.grid, cfg.workers, s["grid_points"],
                        tuple(s["window"]) if "window" in s else None)
    _emit(dumps(rep.to_dict()), cfg.document.get("output"))
    return 0


def _axis_values(ax: dict) -> tuple[float, ...]:
    if "values" in ax:
        return tuple(ax["values"])
    return tuple(float(v) for v in np.linspace(ax["start"], ax["stop"], ax["num"]))


def _cmd_sweep(cfg: RunConfig) -> int:
    s = cfg.section("sweep")
    if "axes" not in s:
        raise ValidationError("sweep.axes: at least one axis is required")
    ev = Evaluation(s["quantity"], tuple(s["window"]) if "window" in s else None,
                    **({"spectrum_range": tuple(s["range"])} if "range" in s else {}),
                    **({"n_points": s["points"]} if "points" in s else {}))
    spec = SweepSpec(cfg.scheme, tuple((a["path"], _axis_values(a)) for a in s["axes"]),
                     s["quantity"], ev)
    res = sweep(spec, cfg.grid, cfg.workers)
    out = Path(cfg.document.get("output") or ".")
    out.mkdir(parents=True, exist_ok=True)
    res.write(out / "sweep.csv")
    manifest = {"files": ["sweep.csv"], "config": cfg.document, "scheme_digest": cfg.scheme.digest(),
                "failed_rows": sum(e is not None for e in res.errors)}
    (out / "sweep_manifest.json").write_text(dumps(manifest))
    return 0


def _cmd_figure(cfg: RunConfig) -> int:
    s = cfg.section("figure")
    if "id" not in s:
        raise ValidationError("figure.id: a figure id is required")
    reproduce_figure(s["id"], cfg.document.get("output") or ".", s["resolution"], cfg.workers)
    return 0


def _cmd_selftest(cfg: RunConfig) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(cfg.section("selftest")["criteria"], cfg.workers)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {failed}" if failed else ""))
    return 0 if not failed else 1


_RUNNERS = {
    "spectrum": _cmd_spectrum, "plan": _cmd_plan, "predict": _cmd_predict,
    "optimize": _cmd_optimize, "sweep": _cmd_sweep, "figure": _cmd_figure,
    "selftest": _cmd_selftest,
}


def run(cfg: RunConfig, command: str) -> int:
    if command not in _RUNNERS:
        raise ValueError(f"unknown command {command!r}")
    return _RUNNERS[command](cfg)


# ---------------------------------------------------------------------------
# argument parsing


def _kv(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def _workers(text: str):
    return text if text in ("auto", "max") else int(text)


# flag -> (config key for plan/predict, scheme parameter for the rest)
PHYSICS_FLAGS = {
    "omega": "omega", "delta": "delta", "omega_r": "omega_r", "delta_r": "delta_r",
    "eta": "eta", "sigma": "sigma", "gamma": "gamma", "gamma_r": "gamma_r",
    "gamma_sg": "gamma_sg", "sigma_r": None, "beta0": None, "probe_rabi": "probe_rabi",
}
SECTION_KEYS = {
    "plan": ("omega", "delta", "eta"),
    "predict": ("omega", "delta", "sigma", "gamma", "omega_r", "delta_r", "sigma_r", "gamma_r",
                "gamma_sg", "beta0"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--set", dest="overrides", action="append", type=_kv, default=[],
                        metavar="KEY=VALUE", help="override a dotted config key (JSON value)")
    common.add_argument("--preset", help="scheme preset (replaces the configured scheme)")
    common.add_argument("--scheme-file", help="scheme JSON file (replaces the configured scheme)")
    common.add_argument("--workers", type=_workers, help="worker threads, or 'auto'")
    common.add_argument("--grid-nodes", type=int)
    common.add_argument("--grid-span", type=float)
    common.add_argument("-o", "--output", help="output file (directory for sweep/figure)")
    common.add_argument("--print-config", action="store_true",
                        help="print the effective configuration to stderr")

    physics = argparse.ArgumentParser(add_help=False)
    for name in PHYSICS_FLAGS:
        physics.add_argument("--" + name.replace("_", "-"), dest=name, type=float)

    p = argparse.ArgumentParser(prog="inhomlimit",
                                description="Absorption recovery in inhomogeneously broadened ensembles.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("spectrum", parents=[common, physics], help="ensemble absorption spectrum (CSV)")
    sp.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    sp.add_argument("--points", type=int)
    sub.add_parser("plan", parents=[common, physics], help="compensation plan (JSON)")
    sub.add_parser("predict", parents=[common, physics], help="closed-form enhancement (JSON)")
    op = sub.add_parser("optimize", parents=[common, physics], help="maximize the enhancement (JSON)")
    op.add_argument("--free", nargs="+", metavar="PATH")
    op.add_argument("--bound", nargs=3, action="append", metavar=("PATH", "LO", "HI"))
    op.add_argument("--grid-points", type=int)
    sw = sub.add_parser("sweep", parents=[common, physics], help="parameter sweep (CSV + manifest)")
    sw.add_argument("--axis", nargs=4, action="append", metavar=("PATH", "START", "STOP", "NUM"))
    sw.add_argument("--quantity", choices=QUANTITIES)
    fg = sub.add_parser("figure", parents=[common], help="figure datasets (CSV + manifest)")
    fg.add_argument("figure_id", choices=FIGURES)
    fg.add_argument("--resolution", choices=("full", "draft"))
    st = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    st.add_argument("--criteria", nargs="+", type=int)
    return p


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    ov: dict[str, Any] = dict(args.overrides)
    if args.preset:
        ov["scheme"] = {"preset": args.preset}
    if args.scheme_file:
        ov["scheme"] = {"file": args.scheme_file}
    for key, attr in (("workers", "workers"), ("grid.nodes", "grid_nodes"),
                      ("grid.span", "grid_span"), ("output", "output")):
        if getattr(args, attr, None) is not None:
            ov[key] = getattr(args, attr)
    cmd = args.command
    for name, param in PHYSICS_FLAGS.items():
        val = getattr(args, name, None)
        if val is None:
            continue
        if cmd in SECTION_KEYS:
            if name in SECTION_KEYS[cmd]:
                ov[f"{cmd}.{name}"] = val
            else:
                raise ValidationError(f"--{name.replace('_', '-')} does not apply to {cmd}")
        elif param is None:
            raise ValidationError(f"--{name.replace('_', '-')} does not apply to {cmd}")
        else:
            ov[f"scheme.params.{param}"] = val
    if cmd == "spectrum":
        if args.range:
            ov["spectrum.range"] = list(args.range)
        if args.points is not None:
            ov["spectrum.points"] = args.points
    if cmd == "optimize":
        if args.free:
            ov["optimize.free"] = args.free
        for path, lo, hi in args.bound or ():
            ov[f"optimize.bounds.{path}"] = [float(lo), float(hi)]
        if args.grid_points is not None:
            ov["optimize.grid_points"] = args.grid_points
    if cmd == "sweep":
        for path, a, b, n in args.axis or ():
            ov.setdefault("sweep.axes", []).append(
                {"path": path, "start": float(a), "stop": float(b), "num": int(n)})
        if args.quantity:
            ov["sweep.quantity"] = args.quantity
    if cmd == "figure":
        ov["figure.id"] = args.figure_id
        if args.resolution:
            ov["figure.resolution"] = args.resolution
    if cmd == "selftest" and args.criteria:
        ov["selftest.criteria"] = args.criteria
    return ov


def _load(args: argparse.Namespace) -> RunConfig:
    text, source, base = None, "<config>", None
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ValidationError(f"config: {path} does not exist")
        text, source, base = path.read_text(), str(path), path.parent
    ov = overrides_from_args(args)  # a scheme flag replaces the file's scheme wholesale
    return parse_config(text, source=source, overrides=ov, base_dir=base, command=args.command)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        cfg = _load(args)
        if args.print_config:
            sys.stderr.write(dumps(cfg.document))
        return run(cfg, args.command)
    except (InhomLimitError, ValueError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"inhomlimit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
