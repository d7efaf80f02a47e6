"""Efficiency chain and expected count rates of the photonic platform."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigurationError

FACTOR_NAMES = ("fibered", "connector", "bs", "pol", "qplate", "coupling", "det", "setup")


@dataclass(frozen=True)
class EfficiencyChain:
    """Transmission factors (each in (0, 1]) plus the pump repetition rate in Hz."""

    fibered: float = 0.133
    connector: float = 0.80
    bs: float = 0.75
    pol: float = 0.83
    qplate: float = 0.70
    coupling: float = 0.45
    det: float = 0.38
    setup: float = 0.52
    r_exc: float = 79e6
    connectors_intra: int = 2
    connectors_inter: int = 3

    def __post_init__(self):
        for name in FACTOR_NAMES:
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigurationError(f"efficiency {name}={v} outside (0, 1]")
        if self.r_exc <= 0:
            raise ConfigurationError("excitation rate must be positive")
        if self.connectors_intra < 0 or self.connectors_inter < 0:
            raise ConfigurationError("connector counts must be nonnegative")

    def factors(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in FACTOR_NAMES}


def chain(factors: dict[str, float], exponents: dict[str, int]) -> float:
    """Product of ``factors[name] ** exponent`` over the declared exponents."""
    out = 1.0
    for name, k in exponents.items():
        if name not in factors:
            raise ConfigurationError(f"missing efficiency factor {name!r}")
        out *= factors[name] ** k
    return out


def eta_gen_intra(c: EfficiencyChain) -> float:
    return chain(c.factors(), {"fibered": 1, "connector": c.connectors_intra, "pol": 1, "qplate": 1})


def eta_gen_inter(c: EfficiencyChain) -> float:
    return chain(c.factors(), {"fibered": 1, "connector": c.connectors_inter, "bs": 1, "pol": 1, "qplate": 1})


def eta_tomo(c: EfficiencyChain) -> float:
    return chain(c.factors(), {"qplate": 1, "coupling": 1, "det": 1})


@dataclass(frozen=True)
class Rates:
    """Generated and detected rates in Hz."""

    gen_intra: float
    det_intra: float
    gen_inter: float
    det_inter: float


def rates(c: EfficiencyChain) -> Rates:
    # intra: half lost at the second interferometer BS; inter: 1/4 from the
    # first BS (both photons routed apart) and 1/2 from the second
    gen_intra = eta_gen_intra(c) * c.r_exc / 2
    gen_inter = eta_gen_inter(c) ** 2 * c.r_exc / 8
    t = eta_tomo(c)
    return Rates(gen_intra, t * gen_intra, gen_inter, t * t * gen_inter)


def fibered_brightness(r_det: float, r_exc: float, eta_det: float) -> float:
    """Single-photon rate in the fibre per pump pulse, corrected for detector efficiency."""
    _positive(r_det=r_det, r_exc=r_exc, eta_det=eta_det)
    return r_det / (r_exc * eta_det)


def first_lens_brightness(r_det: float, r_exc: float, eta_det: float, eta_setup: float) -> float:
    _positive(r_det=r_det, r_exc=r_exc, eta_det=eta_det, eta_setup=eta_setup)
    return r_det / (r_exc * eta_det * eta_setup)


def _positive(**kw):
    for k, v in kw.items():
        if v <= 0:
            raise ConfigurationError(f"{k} must be positive, got {v}")


def report(c: EfficiencyChain, r_det: float = 4e6) -> dict:
    r = rates(c)
    return {
        "eta_gen_intra": eta_gen_intra(c),
        "eta_gen_inter": eta_gen_inter(c),
        "eta_tomo": eta_tomo(c),
        "rate_gen_intra_hz": r.gen_intra,
        "rate_det_intra_hz": r.det_intra,
        "rate_gen_inter_hz": r.gen_inter,
        "rate_det_inter_hz": r.det_inter,
        "fibered_brightness": fibered_brightness(r_det, c.r_exc, c.det),
        "first_lens_brightness": first_lens_brightness(r_det, c.r_exc, c.det, c.setup),
        "chain": asdict(c),
    }


def report_json(c: EfficiencyChain, r_det: float = 4e6) -> str:
    return json.dumps(report(c, r_det), indent=2, sort_keys=True)


_ALIASES = {"eta_" + n: n for n in FACTOR_NAMES} | {"eta_q-plate": "qplate", "eta_q_plate": "qplate", "r_exc": "r_exc", "r_exe": "r_exc"}


def parse_chain(text: str, base: EfficiencyChain | None = None) -> tuple[EfficiencyChain, dict]:
    """Parse ``key = value`` lines (``#`` comments).  Returns the chain and unrecognised keys."""
    base = base or EfficiencyChain()
    names = {f.name for f in fields(EfficiencyChain)}
    updates, extra = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key.lower(), key.lower())
        try:
            num = float(value)
        except ValueError:
            raise ConfigurationError(f"line {lineno}: {value!r} is not a number") from None
        if key in names:
            updates[key] = int(num) if key.startswith("connectors") else num
        else:
            extra[key] = num
    return replace(base, **updates), extra
