"""Truncated single-photon mode space: circular polarization x integer OAM.

Storage is always in the circular basis.  Linear polarizations are derived
with the fixed convention

    |H> = (|R> + |L>) / sqrt(2)
    |V> = (|R> - |L>) / (i sqrt(2))

so that every phase-sensitive result in the package is deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DegenerateProjectionError, TruncationError, ZeroVectorError

DEFAULT_M_MAX = 4
NORM_TOL = 1e-12
PRUNE_TOL = 1e-15

POLS = ("R", "L")
SQRT2 = np.sqrt(2.0)

# columns: |H>, |V> expressed in (R, L) amplitudes
LINEAR_TO_CIRCULAR = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / SQRT2


class Mode(NamedTuple):
    pol: str
    oam: int

    def __str__(self):
        return f"{self.pol}:{self.oam:+d}"

    @property
    def sort_key(self):
        return (POLS.index(self.pol), self.oam)


@dataclass(frozen=True)
class ModeSpace:
    """All modes with |m| <= m_max, ordered R before L, then ascending m."""

    m_max: int = DEFAULT_M_MAX

    def __post_init__(self):
        if self.m_max < 2:
            raise ValueError("m_max must be at least 2")

    @property
    def n_oam(self) -> int:
        return 2 * self.m_max + 1

    @property
    def dim(self) -> int:
        return 2 * self.n_oam

    @property
    def modes(self) -> list[Mode]:
        return _modes(self.m_max)

    def contains(self, mode: Mode) -> bool:
        return mode.pol in POLS and abs(mode.oam) <= self.m_max

    def index(self, mode: Mode) -> int:
        if mode.pol not in POLS:
            raise ValueError(f"unknown polarization {mode.pol!r}")
        if abs(mode.oam) > self.m_max:
            raise TruncationError(f"mode {mode} outside truncation m_max={self.m_max}")
        return POLS.index(mode.pol) * self.n_oam + mode.oam + self.m_max

    def basis(self, mode: Mode) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(mode)] = 1.0
        return v

    def oam_projector(self, m: int) -> np.ndarray:
        """Diagonal projector keeping OAM value ``m`` (single-mode fibre coupling for m=0)."""
        d = np.zeros(self.dim)
        for p in POLS:
            d[self.index(Mode(p, m))] = 1.0
        return np.diag(d).astype(complex)

    def pol_operator(self, op2: np.ndarray) -> np.ndarray:
        """Lift a 2x2 operator in the (R, L) basis to the full space (identity on OAM)."""
        return np.kron(op2, np.eye(self.n_oam))

    def polarization_vector(self, vec: np.ndarray, m: int) -> np.ndarray:
        """(R, L) amplitudes of ``vec`` at OAM value ``m``."""
        return np.array([vec[self.index(Mode(p, m))] for p in POLS])


@lru_cache(maxsize=None)
def _modes(m_max: int) -> list[Mode]:
    return [Mode(p, m) for p in POLS for m in range(-m_max, m_max + 1)]


@dataclass(frozen=True)
class SingleKet:
    """Normalized single-photon state.

    ``raw_norm`` keeps the norm of the amplitudes the ket was built from.
    """

    vector: np.ndarray
    space: ModeSpace = field(default_factory=ModeSpace)
    raw_norm: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).copy()
        v[np.abs(v) < PRUNE_TOL] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @classmethod
    def from_vector(cls, vec, space: ModeSpace | None = None) -> "SingleKet":
        space = space or ModeSpace()
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (space.dim,):
            raise ValueError(f"expected vector of length {space.dim}, got {vec.shape}")
        norm = float(np.linalg.norm(vec))
        if norm < PRUNE_TOL:
            raise ZeroVectorError("cannot normalize the zero vector")
        return cls(vec / norm, space, norm)

    @property
    def amplitudes(self) -> dict[Mode, complex]:
        return {
            mode: complex(a)
            for mode, a in zip(self.space.modes, self.vector)
            if abs(a) >= PRUNE_TOL
        }

    def amplitude(self, mode: Mode) -> complex:
        return complex(self.vector[self.space.index(mode)])

    def probability(self, mode: Mode) -> float:
        return abs(self.amplitude(mode)) ** 2

    def normalize(self) -> "SingleKet":
        return SingleKet.from_vector(self.vector, self.space)

    def __str__(self):
        terms = [f"({a.real:+.4f}{a.imag:+.4f}j)|{m}>" for m, a in self.amplitudes.items()]
        return " ".join(terms)


def ket(amplitude_list: Iterable[tuple[Mode | tuple, complex]], m_max: int = DEFAULT_M_MAX) -> SingleKet:
    """Build a normalized ket from ``(mode, amplitude)`` pairs.

    >>> ket([(Mode("R", 2), 1)]).amplitudes
    {Mode(pol='R', oam=2): (1+0j)}
    """
    space = ModeSpace(m_max)
    items = list(amplitude_list)
    if not items:
        raise ZeroVectorError("amplitude list is empty")
    vec = np.zeros(space.dim, dtype=complex)
    for mode, amp in items:
        mode = Mode(*mode)
        vec[space.index(mode)] += amp
    return SingleKet.from_vector(vec, space)


def basis_ket(pol: str, oam: int, m_max: int = DEFAULT_M_MAX) -> SingleKet:
    """Basis ket; ``pol`` may also be a linear label H or V."""
    space = ModeSpace(m_max)
    vec = np.zeros(space.dim, dtype=complex)
    for p, a in zip(POLS, polarization_amplitudes(pol)):
        vec[space.index(Mode(p, oam))] = a
    return SingleKet.from_vector(vec, space)


def polarization_amplitudes(label: str) -> np.ndarray:
    """(R, L) amplitudes of a named polarization."""
    label = label.upper()
    if label == "R":
        return np.array([1.0, 0.0], dtype=complex)
    if label == "L":
        return np.array([0.0, 1.0], dtype=complex)
    if label == "H":
        return LINEAR_TO_CIRCULAR[:, 0].copy()
    if label == "V":
        return LINEAR_TO_CIRCULAR[:, 1].copy()
    if label == "D":
        return (LINEAR_TO_CIRCULAR[:, 0] + LINEAR_TO_CIRCULAR[:, 1]) / SQRT2
    if label == "A":
        return (LINEAR_TO_CIRCULAR[:, 0] - LINEAR_TO_CIRCULAR[:, 1]) / SQRT2
    raise ValueError(f"unknown polarization label {label!r}")


_LABEL_RE = re.compile(r"^\s*([RLHVDA])\s*:\s*([+-]?\d+)\s*$", re.IGNORECASE)


def parse_mode_label(text: str, m_max: int = DEFAULT_M_MAX) -> SingleKet:
    """Parse labels such as ``R:+2``, ``L:-2``, ``H:0``."""
    match = _LABEL_RE.match(text)
    if not match:
        raise ValueError(f"bad mode label {text!r}")
    return basis_ket(match.group(1), int(match.group(2)), m_max)


def inner(a: SingleKet, b: SingleKet) -> complex:
    """<a|b>, antilinear in the first argument."""
    if a.space != b.space:
        raise TruncationError("kets live in different truncations")
    return complex(np.vdot(a.vector, b.vector))


@dataclass(frozen=True)
class LogicalQubitMap:
    """Identifies two modes with the logical qubit states |0> and |1>.

    ``phase`` is the relative phase of the logical |1>, i.e.
    |1>_logical = exp(i*phase) |basis1>.  It represents the orientation of the
    analyser frame and defaults to zero.
    """

    basis0: Mode = Mode("L", -2)
    basis1: Mode = Mode("R", 2)
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "basis0", Mode(*self.basis0))
        object.__setattr__(self, "basis1", Mode(*self.basis1))
        if self.basis0 == self.basis1:
            raise ValueError("logical basis modes must differ")

    def physical_vectors(self, space: ModeSpace) -> np.ndarray:
        """Matrix whose columns are the physical vectors of logical |0> and |1>."""
        cols = np.zeros((space.dim, 2), dtype=complex)
        cols[space.index(self.basis0), 0] = 1.0
        cols[space.index(self.basis1), 1] = np.exp(1j * self.phase)
        return cols

    def physical_ket(self, qubit: np.ndarray, space: ModeSpace | None = None) -> SingleKet:
        space = space or ModeSpace()
        return SingleKet.from_vector(self.physical_vectors(space) @ np.asarray(qubit), space)


DEFAULT_MAP = LogicalQubitMap()


def to_logical(k: SingleKet, qmap: LogicalQubitMap = DEFAULT_MAP) -> tuple[np.ndarray, float]:
    """Project onto the logical span; returns (renormalized qubit amplitudes, leakage)."""
    amps = qmap.physical_vectors(k.space).conj().T @ k.vector
    weight = float(np.sum(np.abs(amps) ** 2))
    leakage = max(0.0, 1.0 - weight)
    if weight < PRUNE_TOL:
        raise DegenerateProjectionError("ket has no weight on the logical span")
    return amps / np.sqrt(weight), leakage
