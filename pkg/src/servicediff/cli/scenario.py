"""Scenario files.

A scenario is a UTF-8 text file of ``key = value`` lines grouped under
``[section]`` headers; ``#`` starts a comment. Every key is optional and
unknown sections or keys are rejected::

    [distribution]
    alpha = 1.0

    [quality]
    model = canonical          # canonical | inverse | linear

    [regime]
    kind = fixed               # fixed | variable
    capacity = 0.1
    cost = expansion           # expansion | linear | free
    t = 1.0

    [outputs]
    artifacts = summary, schedule, prices

The parser is hand-rolled rather than built on ``configparser`` so that
every diagnostic can name the offending line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ..exceptions import InvalidParameterError, ServiceDiffError
from ..numerics import NumericsConfig

__all__ = ["Scenario", "ScenarioError", "parse_scenario", "load_scenario", "ARTIFACTS"]

ARTIFACTS = ("summary", "schedule", "prices", "surplus", "capacity", "benchmark")


class ScenarioError(ServiceDiffError):
    """Malformed or invalid scenario input."""

    def __init__(self, message, line=None, source="<scenario>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class Scenario:
    alpha: float = 1.0
    quality: str = "canonical"
    regime: str = "fixed"
    capacity: float = 0.1
    cost: str = "expansion"
    t: float = 1.0
    base: float = 0.1
    price: float = 1.0
    payg: bool = False
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    artifacts: tuple = ("summary", "schedule", "prices")
    sweep_parameter: str = "capacity"
    sweep_values: tuple = (0.05, 0.1, 0.2, 0.3, 0.4)
    menu_prices: tuple = ()
    menu_congestion: tuple = ()
    classes: int = 4
    resolution: int = 64

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _number(text):
    try:
        x = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {text!r}")
    return x


def _positive(text):
    x = _number(text)
    if x <= 0:
        raise ValueError(f"expected a positive number, got {text!r}")
    return x


def _nonnegative(text):
    x = _number(text)
    if x < 0:
        raise ValueError(f"expected a nonnegative number, got {text!r}")
    return x


def _integer(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _numbers(text):
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(_number(x) for x in items)


def _artifacts(text):
    items = tuple(x.strip() for x in text.split(",") if x.strip())
    for x in items:
        if x not in ARTIFACTS:
            raise ValueError(f"unknown artifact {x!r}; choose from {', '.join(ARTIFACTS)}")
    return items


_NUMERIC_KEYS = {
    "quad_tol": _positive, "root_tol": _positive, "capacity_tol": _positive,
    "bracket_limit": _positive, "fd_step": _positive, "ill_conditioned_density": _positive,
    "grid": _integer, "oracle_grid": _integer, "check_grid": _integer,
}

# section -> key -> (parser, Scenario attribute)
SCHEMA = {
    "distribution": {
        "kind": (_choice("power"), None),
        "alpha": (_positive, "alpha"),
    },
    "quality": {"model": (_choice("canonical", "inverse", "linear"), "quality")},
    "regime": {
        "kind": (_choice("fixed", "variable"), "regime"),
        "capacity": (_positive, "capacity"),
        "cost": (_choice("expansion", "linear", "free"), "cost"),
        "t": (_nonnegative, "t"),
        "base": (_nonnegative, "base"),
        "price": (_nonnegative, "price"),
    },
    "pricing": {"mode": (_choice("flat", "payg"), "payg")},
    "numerics": {k: (p, "numerics." + k) for k, p in _NUMERIC_KEYS.items()},
    "outputs": {"artifacts": (_artifacts, "artifacts")},
    "sweep": {
        "parameter": (_choice("capacity", "alpha", "t"), "sweep_parameter"),
        "values": (_numbers, "sweep_values"),
    },
    "menu": {
        "prices": (_numbers, "menu_prices"),
        "congestion": (_numbers, "menu_congestion"),
        "classes": (_integer, "classes"),
        "resolution": (_integer, "resolution"),
    },
}


def _entries(text, source):
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"malformed section header {raw.strip()!r}", lineno, source)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ScenarioError(f"unknown section [{section}]", lineno, source)
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        if section is None:
            raise ScenarioError("key outside of any section", lineno, source)
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ScenarioError(f"unknown key {key!r} in [{section}]", lineno, source)
        if (section, key) in seen:
            raise ScenarioError(f"duplicate key {key!r} in [{section}]", lineno, source)
        seen.add((section, key))
        yield lineno, section, key, value


def parse_scenario(text: str, source: str = "<scenario>", overrides=()) -> Scenario:
    """Parse scenario text; ``overrides`` are ``section.key=value`` strings."""
    lines = []
    for lineno, section, key, value in _entries(text, source):
        lines.append((lineno, source, section, key, value))
    for item in overrides:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ScenarioError(f"override {item!r} must look like section.key=value",
                                source="--set")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ScenarioError(f"unknown setting {name.strip()!r}", source="--set")
        lines.append((None, "--set", section, key, value.strip()))

    values, numerics = {}, {}
    lineof = {}
    for lineno, src, section, key, value in lines:
        parser, attr = SCHEMA[section][key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ScenarioError(f"[{section}] {key}: {exc}", lineno, src) from None
        if attr is None:
            continue
        if attr == "payg":
            parsed = parsed == "payg"
        if attr.startswith("numerics."):
            numerics[attr.split(".", 1)[1]] = parsed
        else:
            values[attr] = parsed
        lineof[attr] = (lineno, src)

    try:
        values["numerics"] = NumericsConfig(**numerics)
    except InvalidParameterError as exc:
        raise ScenarioError(f"[numerics] {exc}", source=source) from None
    scenario = Scenario(**values)
    _check(scenario, lineof, source)
    return scenario


def _check(sc: Scenario, lineof, source):
    def fail(attr, message):
        lineno, src = lineof.get(attr, (None, source))
        raise ScenarioError(message, lineno, src)

    if len(sc.menu_prices) != len(sc.menu_congestion):
        fail("menu_congestion", "[menu] prices and congestion must have the same length")
    if not 1 <= sc.classes <= 8:
        fail("classes", "[menu] classes must be between 1 and 8")
    if not 2 <= sc.resolution <= 64:
        fail("resolution", "[menu] resolution must be between 2 and 64")
    if "sweep_parameter" not in lineof:
        return
    if sc.sweep_parameter == "capacity" and sc.regime != "fixed":
        fail("sweep_parameter", "a capacity sweep needs [regime] kind = fixed")
    if sc.sweep_parameter == "t" and sc.regime != "variable":
        fail("sweep_parameter", "a t sweep needs [regime] kind = variable")


def load_scenario(path=None, overrides=()) -> Scenario:
    """Read a scenario file; ``None`` gives the default scenario."""
    if path is None:
        return parse_scenario("", "<defaults>", overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", source=str(path)) from None
    return parse_scenario(text, str(path), overrides)

