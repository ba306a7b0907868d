"""Run configuration files.

The format is flat ``key = value`` text.  Keys are dotted paths
(``model.inertia``, ``numerics.domain_guards.exp``); values are Python
literals (numbers, quoted strings, ``[...]`` arrays, ``true``/``false``) or
bare words, which are read as strings (also inside flat lists such as
``[sv, rk4]``).  ``#`` starts a comment.  Example::

    model.id = rigid_body
    model.inertia = [1.0, 2.0, 3.0]
    method = sv
    retraction = exp
    t_span = [0.0, 10.0]
    steps = 1000
    initial.g = [1, 0, 0, 0, 1, 0, 0, 0, 1]
    initial.xi = [1.0, 0.5, -0.2]
    numerics.newton_tol = 1e-12
    output = run.csv

Recognised top-level keys are the fields of :class:`RunConfig`; keys below
``model.`` other than ``model.id`` are passed to the model constructor.
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .config import NumericsConfig, validate as validate_numerics
from .diagnostics import SectionSpec
from .integrators import TABLEAUS, ButcherTableau
from .lie import is_element
from .models import MODELS, make_model


class ConfigError(ValueError):
    """Invalid run configuration; ``errors`` lists every violated rule."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    model: str = "rigid_body"
    model_params: dict = field(default_factory=dict)
    method: str = "sv"
    retraction: str = "exp"
    tableau: dict | None = None  # inline {"a": ..., "b": ...}
    t_span: tuple = (0.0, 1.0)
    steps: int = 100
    initial_g: list | None = None  # row-major; identity when omitted
    initial_xi: list | None = None
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: str | None = None
    section: SectionSpec | None = None
    h_list: list | None = None
    methods: list | None = None

    @property
    def h(self) -> float:
        a, b = self.t_span
        return (b - a) / self.steps

    def build_model(self):
        return make_model(self.model, **self.model_params)

    def build_tableau(self):
        if self.tableau is None:
            return None
        return ButcherTableau.from_arrays(self.tableau["a"], self.tableau["b"])

    def initial_arrays(self, model):
        n, d = model.group.n, model.group.dim
        g = np.eye(n) if self.initial_g is None else np.asarray(self.initial_g, dtype=float).reshape(n, n)
        xi = np.zeros(d) if self.initial_xi is None else np.asarray(self.initial_xi, dtype=float)
        return g, xi


# -- parsing ------------------------------------------------------------------

_BARE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.:/+\-]*$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")
_WORDS = {"true": True, "false": False, "none": None, "null": None}


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def _parse_value(text: str):
    text = text.strip()
    if text.lower() in _WORDS:
        return _WORDS[text.lower()]
    if text.lower() in ("inf", "+inf", "-inf", "nan"):
        return float(text)
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if _BARE.match(text):
            return text
        if text.startswith("[") and text.endswith("]") and "[" not in text[1:-1]:
            # flat list of bare words, e.g. [sv, rk4]
            return [_parse_value(item) for item in text[1:-1].split(",") if item.strip()]
        raise ConfigError(f"cannot parse value {text!r}") from None


def parse_text(text: str) -> dict:
    """Parse config text into a flat ``{dotted_key: value}`` dict."""
    flat = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not _KEY.match(key):
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        if key in flat:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            flat[key] = _parse_value(value)
        except ConfigError as exc:
            errors.append(f"line {lineno}: {exc}")
    if errors:
        raise ConfigError(errors)
    return flat


def _take(flat: dict, prefix: str) -> dict:
    out = {}
    for key in [k for k in flat if k.startswith(prefix + ".")]:
        out[key[len(prefix) + 1 :]] = flat.pop(key)
    return out


def _nest(flat: dict) -> dict:
    out = {}
    for key, value in flat.items():
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def from_flat(flat: dict) -> RunConfig:
    """Build and validate a :class:`RunConfig` from parsed keys."""
    flat = dict(flat)
    errors = []
    model = _take(flat, "model")
    model_id = model.pop("id", RunConfig.model)
    numerics_keys = _nest(_take(flat, "numerics"))
    section_keys = _take(flat, "section")
    tableau_keys = _take(flat, "tableau")
    initial = _take(flat, "initial")

    try:
        numerics = NumericsConfig.from_dict(numerics_keys)
    except (KeyError, TypeError) as exc:
        errors.append(f"numerics: {exc}")
        numerics = NumericsConfig()
    section = None
    if section_keys:
        try:
            section = SectionSpec(**section_keys)
        except (TypeError, ValueError) as exc:
            errors.append(f"section: {exc}")
    tableau = None
    if tableau_keys:
        if set(tableau_keys) - {"a", "b"} or "a" not in tableau_keys or "b" not in tableau_keys:
            errors.append("tableau needs exactly the keys tableau.a and tableau.b")
        else:
            tableau = tableau_keys
    unknown_initial = set(initial) - {"g", "xi"}
    if unknown_initial:
        errors.append(f"unknown initial keys: {sorted(unknown_initial)}")

    kwargs = {}
    for name in ("method", "retraction", "t_span", "steps", "output", "h_list", "methods"):
        if name in flat:
            kwargs[name] = flat.pop(name)
    if flat:
        errors.append(f"unknown keys: {sorted(flat)}")
    if errors:
        raise ConfigError(errors)
    if "t_span" in kwargs:
        kwargs["t_span"] = tuple(kwargs["t_span"]) if isinstance(kwargs["t_span"], (list, tuple)) else kwargs["t_span"]
    config = RunConfig(
        model=model_id,
        model_params=model,
        tableau=tableau,
        initial_g=initial.get("g"),
        initial_xi=initial.get("xi"),
        numerics=numerics,
        section=section,
        **kwargs,
    )
    validate(config)
    return config


def parse(text: str) -> RunConfig:
    return from_flat(parse_text(text))


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def validate(config: RunConfig) -> None:
    """Raise :class:`ConfigError` listing every invariant the config violates."""
    errors = [f"numerics.{msg}" for msg in validate_numerics(config.numerics)]
    model = None
    if config.model not in MODELS:
        errors.append(f"model.id: unknown model {config.model!r}; expected one of {sorted(MODELS)}")
    else:
        try:
            model = config.build_model()
        except (TypeError, ValueError) as exc:
            errors.append(f"model: {exc}")
    if not isinstance(config.steps, int) or isinstance(config.steps, bool) or config.steps < 1:
        errors.append(f"steps must be an integer >= 1 (got {config.steps!r})")
    span = config.t_span
    if not (isinstance(span, tuple) and len(span) == 2 and all(isinstance(v, (int, float)) for v in span)):
        errors.append(f"t_span must be a pair of numbers (got {span!r})")
    elif not (math.isfinite(span[0]) and math.isfinite(span[1]) and span[1] > span[0]):
        errors.append(f"t_span must satisfy a < b (got {span!r})")
    if config.retraction not in ("exp", "cayley", "skew_sqrt"):
        errors.append(f"retraction must be exp, cayley or skew_sqrt (got {config.retraction!r})")
    elif model is not None and config.retraction == "skew_sqrt" and model.group.name != "SO3":
        errors.append("retraction skew_sqrt is only defined on SO3")
    if config.tableau is not None:
        try:
            config.build_tableau()
        except ValueError as exc:
            errors.append(f"tableau: {exc}")
    method_name, _, method_arg = str(config.method).partition(":")
    if method_name not in ("ve_forward", "ve_backward", "sv", "vprk", "ep", "rkmk", "rk4"):
        errors.append(f"method: unknown method {config.method!r}")
    elif method_name in ("vprk", "rkmk") and method_arg != "inline" and method_arg not in TABLEAUS:
        errors.append(f"method {config.method!r}: unknown tableau; expected inline or one of {sorted(TABLEAUS)}")
    elif method_name == "ep" and method_arg not in ("", "exp", "cayley", "skew_sqrt"):
        errors.append(f"method {config.method!r}: unknown retraction {method_arg!r}")
    elif method_arg == "inline" and config.tableau is None:
        errors.append(f"method {config.method!r} needs tableau.a and tableau.b")
    elif method_name == "ep" and model is not None and not model.is_left_invariant:
        errors.append(f"method {config.method!r} needs a left-invariant model")
    if model is not None:
        n, d = model.group.n, model.group.dim
        if config.initial_g is not None:
            g = np.asarray(config.initial_g, dtype=float)
            if g.size != n * n:
                errors.append(f"initial.g must have {n * n} entries (got {g.size})")
            elif not is_element(model.group, g.reshape(n, n)):
                errors.append(f"initial.g is not a valid {model.group.name} element (residual above 1e-9)")
        if config.initial_xi is not None and np.asarray(config.initial_xi).shape != (d,):
            errors.append(f"initial.xi must have {d} entries")
    if errors:
        raise ConfigError(errors)


# -- serialization ------------------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value if _BARE.match(value) and value.lower() not in _WORDS else repr(value)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {value!r}")


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}", item, out)
    else:
        out[prefix] = value


def to_flat(config: RunConfig) -> dict:
    flat = {"model.id": config.model}
    for key, value in config.model_params.items():
        flat[f"model.{key}"] = value
    flat["method"] = config.method
    flat["retraction"] = config.retraction
    if config.tableau is not None:
        flat["tableau.a"] = config.tableau["a"]
        flat["tableau.b"] = config.tableau["b"]
    flat["t_span"] = list(config.t_span)
    flat["steps"] = config.steps
    if config.initial_g is not None:
        flat["initial.g"] = config.initial_g
    if config.initial_xi is not None:
        flat["initial.xi"] = config.initial_xi
    _flatten("numerics", config.numerics.to_dict(), flat)
    if config.output is not None:
        flat["output"] = config.output
    if config.section is not None:
        _flatten("section", config.section.to_dict(), flat)
    if config.h_list is not None:
        flat["h_list"] = config.h_list
    if config.methods is not None:
        flat["methods"] = config.methods
    return flat


def serialize(config: RunConfig) -> str:
    return "".join(f"{key} = {_format_value(value)}\n" for key, value in to_flat(config).items())


def configs_equal(a: RunConfig, b: RunConfig) -> bool:
    """Structural equality after normalising arrays to lists."""
    return _normalise(to_flat(a)) == _normalise(to_flat(b))


def _normalise(value):
    if isinstance(value, dict):
        return {k: _normalise(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_normalise(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value
