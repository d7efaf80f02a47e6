"""Experiment config files: ``key = value`` lines grouped in ``[case NAME]`` sections.

Example::

    experiment = hom
    M = 0.955

    [case RR]
    a = R:+2
    b = R:+2

    [case PhiPhi]
    a = phi+
    b = H:0 -> qplate(q=1, a0=0)

State descriptors are a mode label (``R:+2``, ``H:0``), a named state
(``phi+``, ``phi-``), or ``LABEL -> elements`` where the element chain uses the
grammar of ``elements.parse_elements``.  A bare element chain acts on ``H:0``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .elements import apply_elements, parse_elements, prepare_vv
from .errors import ConfigParseError
from .modes import DEFAULT_M_MAX, SingleKet, parse_mode_label

EXPERIMENTS = ("hom", "gate", "chsh", "tomo", "budget", "histogram")
STOCHASTIC = ("chsh", "tomo", "histogram")

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
_SECTION_RE = re.compile(r"^\[\s*case\s+([A-Za-z0-9_+\-]+)\s*\]$")

NAMED_STATES = {
    "phi+": lambda m: prepare_vv(math.pi / 2, 0.0, m),
    "phi-": lambda m: prepare_vv(math.pi / 2, math.pi, m),
}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict[str, str] = field(default_factory=dict)
    cases: dict[str, dict[str, str]] = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def number(self, key: str, default: float | None = None) -> float | None:
        raw = self.params.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigParseError(f"{key} = {raw!r} is not a number", *self._where(key)) from None

    def integer(self, key: str, default: int | None = None) -> int | None:
        val = self.number(key)
        if val is None:
            return default
        if val != int(val):
            raise ConfigParseError(f"{key} must be an integer", *self._where(key))
        return int(val)

    def _where(self, key):
        return self.params.get(f"__pos__{key}", (0, 0))

    def as_text(self) -> str:
        lines = [f"experiment = {self.experiment}"]
        lines += [f"{k} = {v}" for k, v in self.params.items() if not k.startswith("__") and k != "experiment"]
        for name, case in self.cases.items():
            lines += ["", f"[case {name}]"] + [f"{k} = {v}" for k, v in case.items() if not k.startswith("__")]
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; errors carry 1-based line and column."""
    params: dict = {}
    cases: dict = {}
    target = params
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            m = _SECTION_RE.match(stripped)
            if not m:
                raise ConfigParseError(f"bad section header {stripped!r}", lineno, col)
            name = m.group(1)
            if name in cases:
                raise ConfigParseError(f"duplicate case {name!r}", lineno, col)
            target = cases[name] = {}
            continue
        if "=" not in stripped:
            raise ConfigParseError("expected key = value", lineno, col)
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        eq = line.index("=")
        value_col = len(line) - len(line[eq + 1:].lstrip()) + 1
        if not _KEY_RE.match(key):
            raise ConfigParseError(f"bad key {key!r}", lineno, col)
        if not value:
            raise ConfigParseError(f"missing value for {key!r}", lineno, eq + 2)
        if key in target:
            raise ConfigParseError(f"duplicate key {key!r}", lineno, col)
        target[key] = value
        target[f"__pos__{key}"] = (lineno, value_col)
    exp = params.get("experiment")
    if exp is None:
        raise ConfigParseError("missing 'experiment' key", 1, 1)
    if exp not in EXPERIMENTS:
        raise ConfigParseError(f"unknown experiment {exp!r}", *params["__pos__experiment"])
    for section in [params, *cases.values()]:
        for key in ("a", "b"):
            if key in section:
                try:
                    resolve_state(section[key])
                except ValueError as err:
                    raise ConfigParseError(f"cannot resolve state {section[key]!r}: {err}", *section[f"__pos__{key}"]) from None
    return ExperimentConfig(exp, params, cases)


def resolve_state(desc: str, m_max: int = DEFAULT_M_MAX) -> SingleKet:
    """Turn a state descriptor into a ket (see module docstring)."""
    desc = desc.strip()
    if desc.lower() in NAMED_STATES:
        return NAMED_STATES[desc.lower()](m_max)
    if "->" in desc:
        start, chain = desc.split("->", 1)
        k = parse_mode_label(start, m_max)
        return apply_elements(parse_elements(chain), k)
    if "(" in desc:
        return apply_elements(parse_elements(desc), parse_mode_label("H:0", m_max))
    return parse_mode_label(desc, m_max)
