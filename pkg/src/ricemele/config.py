"""Run configuration: a flat ``key = value`` text format with sections.

Schema (every key optional; the defaults below apply to an empty file)::

    [model]       J = 1, delta = 0.15, mu = 0, nu = -0.2, N = 50, phi = 0
    [protocol]    kind = linear | constant | gaussian
                  phi0 = 0, beta = 1e-3, sigma = 1e-3, tau = 200, direction = 1
    [grid]        t_end = (derived), steps = (derived), max_dphi = 1e-3,
                  max_dt = 1, records = 200
    [sweep]       phi_start = 0, phi_end = pi, k = pi/25 | all | list,
                  band = -1 | 1 | both, samples = 101
    [wavepacket]  k0 = pi/2, width = 0.05, center_site = 1, band = none | upper | lower
    [run]         preset = (name), workers = 0, format = csv, out = -

Numeric values accept arithmetic with ``pi`` (``pi/25``, ``1.5*pi``, ``-2e-3``);
``sweep.k`` takes a comma separated list. An unset ``grid.t_end`` is derived
from the protocol (see :mod:`ricemele.presets`). Parsing is all-or-nothing: every problem is
collected into one :class:`~ricemele.exceptions.ConfigError`.
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
import re
from dataclasses import dataclass, field

from .bloch import classify_spectrum
from .exceptions import ConfigError
from .model import ModelParams

__all__ = ["RunConfig", "DEFAULTS", "validate_config", "parse_value", "parse_overrides"]

DEFAULTS: dict[str, dict[str, str]] = {
    "model": {"J": "1", "delta": "0.15", "mu": "0", "nu": "-0.2", "N": "50", "phi": "0"},
    "protocol": {"kind": "linear", "phi0": "0", "beta": "1e-3", "sigma": "1e-3", "tau": "200",
                 "direction": "1"},
    "grid": {"t_end": "", "steps": "", "max_dphi": "1e-3", "max_dt": "1", "records": "200"},
    "sweep": {"phi_start": "0", "phi_end": "pi", "k": "pi/25", "band": "-1", "samples": "101"},
    "wavepacket": {"k0": "pi/2", "width": "0.05", "center_site": "1", "band": "none"},
    "run": {"preset": "", "workers": "0", "format": "csv", "out": "-"},
}

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.operand))
    raise ValueError("unsupported expression")


def parse_value(text: str) -> float:
    """Evaluate a numeric literal or a small arithmetic expression in ``pi``."""
    try:
        value = _eval(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise ValueError(f"cannot parse {text!r} as a number") from exc
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _parse_list(text: str) -> list[float]:
    return [parse_value(t) for t in text.split(",") if t.strip()]


@dataclass
class RunConfig:
    model: ModelParams
    phi: float = 0.0
    protocol: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    wavepacket: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    spectrum: str = ""


def _line_index(text: str) -> dict:
    index, section = {}, None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), lineno)
            continue
        m = re.match(r"^([A-Za-z_][\w]*)\s*[=:]", s)
        if m and section is not None:
            index[(section, m.group(1).lower())] = lineno
    return index


def parse_overrides(overrides) -> list[tuple[str, str, str]]:
    """``["model.delta=0.3", "beta=1e-4"]`` -> ``[(section, key, value), ...]``.

    A bare key is resolved against the schema and must be unambiguous.
    """
    out, errors = _split_overrides(overrides)
    if errors:
        raise ConfigError(errors)
    return out


def _split_overrides(overrides):
    out, errors = [], []
    for item in overrides or ():
        if "=" not in item:
            errors.append((None, "override", f"expected key=value, got {item!r}"))
            continue
        key, value = item.split("=", 1)
        key = key.strip()
        if "." in key:
            section, name = key.split(".", 1)
        else:
            owners = [s for s, keys in DEFAULTS.items() if key.lower() in {k.lower() for k in keys}]
            if len(owners) != 1:
                errors.append((None, key, "unknown key" if not owners else f"ambiguous key, one of {owners}"))
                continue
            section, name = owners[0], key
        out.append((section.strip().lower(), name.strip(), value.strip()))
    return out, errors


def validate_config(text: str = "", overrides=()) -> RunConfig:
    """Parse and validate config text (plus ``section.key=value`` overrides).

    Raises
    ------
    ConfigError
        With every problem found, each tagged with its line number when known.
    """
    errors: list = []
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text or "")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError([(exc.lineno, "syntax", f"expected a [section] header before {exc.line.strip()!r}")])
    except configparser.ParsingError as exc:
        raise ConfigError([(lineno, "syntax", f"cannot parse {line.strip()!r}") for lineno, line in exc.errors])
    except configparser.Error as exc:
        raise ConfigError([(getattr(exc, "lineno", None), "syntax", exc.message)])
    lines = _line_index(text or "")

    raw: dict[str, dict[str, tuple[str, int | None]]] = {
        s: {k.lower(): (v, None) for k, v in keys.items()} for s, keys in DEFAULTS.items()
    }
    canon = {s: {k.lower(): k for k in keys} for s, keys in DEFAULTS.items()}
    for section in parser.sections():
        sec = section.lower()
        if sec not in raw:
            errors.append((lines.get((sec, None)), section, "unknown section"))
            continue
        for key, value in parser.items(section):
            if key.lower() not in raw[sec]:
                errors.append((lines.get((sec, key.lower())), f"{sec}.{key}", "unknown key"))
                continue
            raw[sec][key.lower()] = (value, lines.get((sec, key.lower())))
    parsed, bad = _split_overrides(overrides)
    errors.extend(bad)
    for sec, key, value in parsed:
        if sec not in raw or key.lower() not in raw[sec]:
            errors.append((None, f"{sec}.{key}", "unknown key (override)"))
            continue
        raw[sec][key.lower()] = (value, None)

    def get(sec, key, kind="float", required=True):
        value, line = raw[sec][key.lower()]
        name = f"{sec}.{canon[sec][key.lower()]}"
        if value is None or value.strip() == "":
            if required:
                errors.append((line, name, "missing value"))
            return None
        try:
            if kind == "float":
                return parse_value(value)
            if kind == "int":
                v = parse_value(value)
                if v != int(v):
                    raise ValueError(f"{value!r} is not an integer")
                return int(v)
            if kind == "list":
                return _parse_list(value)
            return value.strip()
        except ValueError as exc:
            errors.append((line, name, str(exc)))
            return None

    def check(cond, sec, key, msg):
        if not cond:
            errors.append((raw[sec][key.lower()][1], f"{sec}.{canon[sec][key.lower()]}", msg))

    J, delta, mu, nu = (get("model", k) for k in ("J", "delta", "mu", "nu"))
    N = get("model", "N", "int")
    phi = get("model", "phi")
    if J is not None:
        check(J > 0, "model", "J", f"must be > 0, got {J}")
    if delta is not None:
        check(abs(delta) <= 1, "model", "delta", f"must satisfy |delta| <= 1, got {delta}")
    if N is not None:
        check(N >= 2, "model", "N", f"must be >= 2, got {N}")

    kind = (get("protocol", "kind", "str") or "").lower()
    check(kind in ("constant", "linear", "gaussian"), "protocol", "kind",
          f"must be constant, linear or gaussian, got {kind!r}")
    proto = {"kind": kind}
    for key in ("phi0", "beta", "sigma", "tau"):
        proto[key] = get("protocol", key)
    proto["direction"] = get("protocol", "direction", "int")
    if kind == "linear" and proto["beta"] is not None:
        check(proto["beta"] != 0, "protocol", "beta", "must be nonzero for a linear sweep")
    if kind == "gaussian":
        if proto["sigma"] is not None:
            check(proto["sigma"] > 0, "protocol", "sigma", "must be > 0")
        if proto["tau"] is not None:
            check(proto["tau"] > 0, "protocol", "tau", "must be > 0")
    if proto["direction"] is not None:
        check(proto["direction"] in (1, -1), "protocol", "direction", "must be 1 or -1")

    grid = {
        "t_end": get("grid", "t_end", required=False),
        "steps": get("grid", "steps", "int", required=False),
        "max_dphi": get("grid", "max_dphi"),
        "max_dt": get("grid", "max_dt", required=False),
        "records": get("grid", "records", "int"),
    }
    if grid["t_end"] is not None:
        check(grid["t_end"] >= 0, "grid", "t_end", "must be >= 0")
    if grid["steps"] is not None:
        check(grid["steps"] >= 1, "grid", "steps", "must be >= 1")
    if grid["max_dphi"] is not None:
        check(grid["max_dphi"] > 0, "grid", "max_dphi", "must be > 0")
    if grid["max_dt"] is not None:
        check(grid["max_dt"] > 0, "grid", "max_dt", "must be > 0")
    if grid["records"] is not None:
        check(grid["records"] >= 1, "grid", "records", "must be >= 1")

    sweep = {key: get("sweep", key) for key in ("phi_start", "phi_end")}
    k_text = get("sweep", "k", "str") or ""
    if k_text.lower() == "all":
        sweep["k"] = "all"
    else:
        try:
            sweep["k"] = _parse_list(k_text)
            check(len(sweep["k"]) > 0, "sweep", "k", "needs at least one momentum")
        except ValueError as exc:
            errors.append((raw["sweep"]["k"][1], "sweep.k", str(exc)))
    band_text = (get("sweep", "band", "str") or "").lower()
    bands = {"1": [1], "+1": [1], "upper": [1], "-1": [-1], "lower": [-1], "both": [1, -1]}
    check(band_text in bands, "sweep", "band", f"must be 1, -1 or both, got {band_text!r}")
    sweep["bands"] = bands.get(band_text, [])
    sweep["samples"] = get("sweep", "samples", "int")
    if sweep["samples"] is not None:
        check(sweep["samples"] >= 2, "sweep", "samples", "must be >= 2")

    wp = {key: get("wavepacket", key) for key in ("k0", "width")}
    wp["center_site"] = get("wavepacket", "center_site", "int")
    wp_band = (get("wavepacket", "band", "str") or "").lower()
    wp_bands = {"none": None, "upper": 1, "1": 1, "+1": 1, "lower": -1, "-1": -1}
    check(wp_band in wp_bands, "wavepacket", "band", f"must be none, upper or lower, got {wp_band!r}")
    wp["band"] = wp_bands.get(wp_band)
    if wp["width"] is not None:
        check(wp["width"] > 0, "wavepacket", "width", "must be > 0")
    if wp["center_site"] is not None and N is not None:
        check(1 <= wp["center_site"] <= 2 * N, "wavepacket", "center_site", f"must lie in [1, {2 * N}]")

    run = {
        "preset": get("run", "preset", "str", required=False) or "",
        "workers": get("run", "workers", "int"),
        "format": (get("run", "format", "str") or "").lower(),
        "out": get("run", "out", "str") or "-",
    }
    check(run["format"] in ("csv", "json"), "run", "format", "must be csv or json")
    if run["preset"]:
        from .presets import PRESETS

        check(run["preset"] in PRESETS, "run", "preset",
              f"unknown preset {run['preset']!r}; available: {', '.join(sorted(PRESETS))}")
    if run["workers"] is not None:
        check(run["workers"] >= 0, "run", "workers", "must be >= 0 (0 = all cores)")

    model = None
    if not errors:
        try:
            model = ModelParams(J=J, delta=delta, mu=mu, nu=nu, N=N)
        except ValueError as exc:
            errors.append((None, "model", str(exc)))
    if errors:
        errors.sort(key=lambda e: (e[0] is None, e[0] or 0, e[1]))
        raise ConfigError(errors)

    cfg = RunConfig(model=model, phi=phi, protocol=proto, grid=grid, sweep=sweep, wavepacket=wp, run=run)
    spec = classify_spectrum(model, resolution="continuum")
    cfg.spectrum = spec.tag
    if spec.tag == "complex_broken":
        cfg.warnings.append(f"broken spectrum: max |Im eps| = {spec.max_imag:.3g} (real-spectrum results do not apply)")
    if spec.exceptional:
        cfg.warnings.append("parameters sit on an exceptional point of the band")
    return cfg
