"""Experiment configuration files.

A config is an INI file with typed sections.  Unknown sections or keys are
errors, and every error names the offending field and its line.  See the
README for the full schema.
"""

from __future__ import annotations

import ast
import configparser
import functools
import hashlib
import math
import re
from dataclasses import dataclass, replace

from fkdim.estimators import DEFAULT_SEED, MeasureSampler, SamplingPlan
from fkdim.orbit_metrics import KINDS, MistakeFunction
from fkdim.systems import (
    CubeShift,
    DoublingMap,
    FullShiftFinite,
    IdentityMap,
    Product,
    System,
    TentMap,
    format_point,
    parse_point,
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the field and, when known, the line."""


# ---------------------------------------------------------------------------
# system expressions
# ---------------------------------------------------------------------------

_SYSTEMS = {
    "full_shift": (FullShiftFinite, ("k", "base")),
    "cube_shift": (CubeShift, ("D", "base")),
    "doubling": (DoublingMap, ()),
    "tent": (TentMap, ()),
    "identity": (IdentityMap, ()),
    "product": (Product, ("left", "right", "combiner")),
}


def _literal(node):
    if isinstance(node, ast.Call):
        return _build(node)
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub) and isinstance(node.operand, ast.Constant):
        return -node.operand.value
    raise ValueError(f"unsupported argument {ast.unparse(node)!r}")


def _build(call: ast.Call) -> System:
    if not isinstance(call.func, ast.Name) or call.func.id not in _SYSTEMS:
        raise ValueError(f"unknown system {ast.unparse(call.func)!r}; expected one of {sorted(_SYSTEMS)}")
    cls, names = _SYSTEMS[call.func.id]
    if len(call.args) > len(names):
        raise ValueError(f"{call.func.id} takes at most {len(names)} arguments")
    kwargs = dict(zip(names, (_literal(a) for a in call.args)))
    for kw in call.keywords:
        if kw.arg not in names:
            raise ValueError(f"{call.func.id} has no parameter {kw.arg!r}")
        kwargs[kw.arg] = _literal(kw.value)
    if "base" in kwargs:
        kwargs["base"] = float(kwargs["base"])
    return cls(**kwargs)


def _as_config_error(fn):
    @functools.wraps(fn)
    def wrapped(*args):
        try:
            return fn(*args)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
    return wrapped


@_as_config_error
def parse_system(text: str) -> System:
    """Build a system from an expression such as ``cube_shift(D=1, base=32)``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse system expression {text!r}") from exc
    if not isinstance(tree.body, ast.Call):
        raise ValueError(f"system expression must be a call, got {text!r}")
    return _build(tree.body)


@_as_config_error
def parse_mistake(text: str) -> MistakeFunction:
    m = re.fullmatch(r"\s*power\(\s*([0-9.eE+-]+)\s*\)\s*", text)
    if m:
        return MistakeFunction.power(float(m.group(1)))
    if re.fullmatch(r"\s*log\(\s*\)\s*", text):
        return MistakeFunction.logarithmic()
    raise ValueError(f"mistake function must be power(alpha) or log(), got {text!r}")


@_as_config_error
def parse_measure(sys: System, text: str) -> MeasureSampler:
    text = text.strip()
    if text == "uniform":
        return MeasureSampler("uniform", "uniform")
    m = re.fullmatch(r"bernoulli\((.*)\)", text)
    if m:
        weights = tuple(float(w) for w in m.group(1).split(","))
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0):
            raise ValueError(f"bernoulli weights must be non-negative and sum to 1, got {weights}")
        return MeasureSampler(text, "bernoulli", weights)
    m = re.fullmatch(r"point\((.*)\)", text)
    if m:
        return MeasureSampler(text, "point", point=parse_point(sys, m.group(1)))
    raise ValueError(f"measure must be uniform, bernoulli(w0, w1, ...) or point(<point>), got {text!r}")


def format_measure(m: MeasureSampler) -> str:
    if m.kind == "point":
        return f"point({format_point(m.point)})"
    if m.kind == "bernoulli":
        return f"bernoulli({', '.join(repr(w) for w in m.weights)})"
    return "uniform"


# ---------------------------------------------------------------------------
# the config record
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    system: str = "full_shift(k=2, base=2.0)"
    kinds: tuple = KINDS
    mistake: str = "power(0.5)"
    flavor: str = "upper"
    eps: tuple = tuple(2.0 ** -j for j in range(2, 10))
    n_min: int = 8
    n_max: int = 64
    n_step: int = 1
    universe: int = 400
    extra: int = 0
    period: int = 8
    mode: str = "random"
    cover: str = "greedy"
    exact_cap: int = 24
    seed: int = DEFAULT_SEED
    weights: tuple | None = None
    delta: float = 0.1
    measures: tuple = ("uniform",)
    probes: tuple = ()
    radii: tuple = (0.5, 0.25)
    local_eps: float | None = None
    thm11: float = 0.1
    slope_low: float | None = None
    slope_high: float | None = None
    thm12: float = 0.1
    thm13_gap: float | None = 0.15
    out: str = "out"
    gnuplot: bool = False

    def __post_init__(self):
        self.validate()

    # derived objects ------------------------------------------------------

    def build_system(self) -> System:
        return parse_system(self.system)

    def build_mistake(self) -> MistakeFunction:
        return parse_mistake(self.mistake)

    def build_plan(self) -> SamplingPlan:
        return SamplingPlan(self.universe, self.extra, self.period, self.seed, self.mode, self.cover,
                            self.exact_cap, self.n_step, self.weights)

    def build_measures(self) -> list[MeasureSampler]:
        sys = self.build_system()
        return [parse_measure(sys, m) for m in self.measures]

    def build_probes(self) -> list:
        sys = self.build_system()
        return [parse_point(sys, p) for p in self.probes]

    @property
    def n_window(self) -> tuple:
        return (self.n_min, self.n_max)

    # validation -----------------------------------------------------------

    def validate(self):
        def fail(name, msg):
            raise ConfigError(f"{name}: {msg}")

        try:
            sys = self.build_system()
        except (ValueError, TypeError) as exc:
            fail("system.model", str(exc))
        for k in self.kinds:
            if k not in KINDS:
                fail("metrics.kinds", f"unknown metric kind {k!r}")
        if not self.kinds:
            fail("metrics.kinds", "at least one metric kind is required")
        try:
            self.build_mistake()
        except ValueError as exc:
            fail("metrics.mistake", str(exc))
        if self.flavor not in ("upper", "lower"):
            fail("metrics.flavor", "must be upper or lower")
        if not self.eps or any(not (e > 0 and math.isfinite(e)) for e in self.eps):
            fail("grid.eps", "values must be positive and finite")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            fail("grid.eps", "values must be strictly decreasing")
        if not 1 <= self.n_min < self.n_max:
            fail("grid.n_min", f"need 1 <= n_min < n_max, got {self.n_min}, {self.n_max}")
        if self.n_step < 1:
            fail("grid.n_step", "must be >= 1")
        for name in ("universe", "period", "exact_cap"):
            if getattr(self, name) < 1:
                fail(f"sampling.{name}", "must be >= 1")
        if self.extra < 0:
            fail("sampling.extra", "must be >= 0")
        if self.mode not in ("random", "grid"):
            fail("sampling.mode", "must be random or grid")
        if self.cover not in ("greedy", "exact"):
            fail("sampling.cover", "must be greedy or exact")
        if not 0 <= self.seed < 2 ** 64:
            fail("sampling.seed", "must be an unsigned 64-bit integer")
        if not 0.0 < self.delta < 1.0:
            fail("katok.delta", f"must lie in (0, 1), got {self.delta}")
        for m in self.measures:
            try:
                parse_measure(sys, m)
            except (ValueError, TypeError) as exc:
                fail("katok.measures", str(exc))
        for p in self.probes:
            try:
                parse_point(sys, p)
            except (ValueError, TypeError) as exc:
                fail("local.probes", f"{p!r}: {exc}")
        if not self.radii or any(r <= 0 for r in self.radii) or any(b >= a for a, b in zip(self.radii, self.radii[1:])):
            fail("local.radii", "must be positive and strictly decreasing")
        if self.local_eps is not None and not self.local_eps > 0:
            fail("local.eps", "must be positive")
        for name in ("thm11", "thm12"):
            if getattr(self, name) < 0:
                fail(f"tolerances.{name}", "must be non-negative")

    def hash(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()


# ---------------------------------------------------------------------------
# (de)serialisation
# ---------------------------------------------------------------------------


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text):
    return int(text.strip().replace("_", ""), 0)


def _lines(text):
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def _words(text):
    return tuple(w.strip() for w in text.split(",") if w.strip())


# section -> key -> (field, parser, formatter)
_SCHEMA = {
    "system": {
        "model": ("system", str.strip, str),
    },
    "metrics": {
        "kinds": ("kinds", _words, ", ".join),
        "mistake": ("mistake", str.strip, str),
        "flavor": ("flavor", str.strip, str),
    },
    "grid": {
        "eps": ("eps", _floats, lambda v: ", ".join(map(repr, v))),
        "n_min": ("n_min", _int, str),
        "n_max": ("n_max", _int, str),
        "n_step": ("n_step", _int, str),
    },
    "sampling": {
        "universe": ("universe", _int, str),
        "extra": ("extra", _int, str),
        "period": ("period", _int, str),
        "mode": ("mode", str.strip, str),
        "cover": ("cover", str.strip, str),
        "exact_cap": ("exact_cap", _int, str),
        "seed": ("seed", _int, hex),
        "weights": ("weights", lambda t: None if t.strip().lower() in ("", "none") else _floats(t),
                    lambda v: ", ".join(map(repr, v))),
    },
    "katok": {
        "delta": ("delta", float, repr),
        "measures": ("measures", _lines, lambda v: "\n    ".join(("",) + tuple(v))),
    },
    "local": {
        "probes": ("probes", _lines, lambda v: "\n    ".join(("",) + tuple(v))),
        "radii": ("radii", _floats, lambda v: ", ".join(map(repr, v))),
        "eps": ("local_eps", _opt_float, repr),
    },
    "tolerances": {
        "thm11": ("thm11", float, repr),
        "slope_low": ("slope_low", _opt_float, repr),
        "slope_high": ("slope_high", _opt_float, repr),
        "thm12": ("thm12", float, repr),
        "thm13_gap": ("thm13_gap", _opt_float, repr),
    },
    "output": {
        "dir": ("out", str.strip, str),
        "gnuplot": ("gnuplot", _bool, lambda v: "true" if v else "false"),
    },
}


def _line_index(text: str) -> dict:
    """(section, key) -> line number, found by a plain scan of the file."""
    where, section = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), lineno)
            continue
        m = re.match(r"([^=:\s][^=:]*?)\s*[=:]", line)
        if m and section is not None and not line[:1].isspace():
            where.setdefault((section, m.group(1).strip().lower()), lineno)
    return where


def loads(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    where = _line_index(text)

    def at(section, key=None):
        line = where.get((section, key)) or where.get((section, None))
        return f"{source}:{line}" if line else source

    try:
        parser.read_string(text, source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{at(section)}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{at(section, key)}: unknown key {section}.{key}")
            name, parse, _ = _SCHEMA[section][key]
            try:
                values[name] = parse(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{at(section, key)}: {section}.{key}: {exc}") from exc
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        field_name = str(exc).split(":", 1)[0]
        section, _, key = field_name.partition(".")
        raise ConfigError(f"{at(section, key)}: {exc}") from exc


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), str(path))


def dumps(cfg: ExperimentConfig) -> str:
    """Serialise every field; ``loads(dumps(c)) == c``."""
    out = []
    for section, keys in _SCHEMA.items():
        out.append(f"[{section}]")
        for key, (name, _, fmt) in keys.items():
            value = getattr(cfg, name)
            if value is None:
                out.append(f"{key} = none")
            elif isinstance(value, tuple) and not value:
                out.append(f"{key} =")
            else:
                out.append(f"{key} = {fmt(value)}")
        out.append("")
    return "\n".join(out)


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(cfg, **changes) if changes else cfg
