"""Post-selected two-photon entangling gate and CHSH analysis on logical qubits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elements import mirror
from .errors import DimensionError, PostSelectionError
from .fock2 import bs_scatter, pattern_probabilities
from .modes import DEFAULT_MAP, LogicalQubitMap, ModeSpace, SingleKet

HERMITIAN_TOL = 1e-10

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

TRIPLET = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)
SINGLET = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2)

BELL_STATES = {"triplet": TRIPLET, "psi+": TRIPLET, "psi-": SINGLET, "phi+": PHI_PLUS, "phi-": PHI_MINUS}


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density operator (Hermitian, PSD, unit trace)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionError(f"density matrix must be square, got {d.shape}")
        if np.max(np.abs(d - d.conj().T), initial=0) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        d = (d + d.conj().T) / 2
        if abs(np.trace(d).real - 1) > HERMITIAN_TOL:
            raise ValueError(f"trace is {np.trace(d).real}, expected 1")
        if np.linalg.eigvalsh(d).min() < -HERMITIAN_TOL:
            raise ValueError("density matrix has negative eigenvalues")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @classmethod
    def pure(cls, vec) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def purity(self) -> float:
        return float(np.trace(self.data @ self.data).real)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.data)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.data @ op))


def as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.data
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    return rho


@dataclass(frozen=True)
class GateOutput:
    rho: DensityMatrix
    success_prob: float
    leakage: float
    state: np.ndarray


def port_d_map(qmap: LogicalQubitMap = DEFAULT_MAP) -> LogicalQubitMap:
    """Logical frame used for the photon leaving port d.

    The doubly reflected branch of the post-selected state carries the beam
    splitter's reflection sign; rotating the port-d frame by pi absorbs it, so
    the canonical gate output is exactly (|01> + |10>)/sqrt(2).
    """
    return LogicalQubitMap(qmap.basis0, qmap.basis1, qmap.phase + math.pi)


def entangling_gate(
    input_a: SingleKet,
    input_b: SingleKet,
    qmap: LogicalQubitMap = DEFAULT_MAP,
    relabel_d: bool = True,
) -> GateOutput:
    """Beam-splitter interference followed by coincidence post-selection.

    With ``relabel_d`` the port-d photon takes one more reflection before it is
    mapped to a qubit, and is read in the frame of ``port_d_map``.  Qubit order
    is (c, d).
    """
    space: ModeSpace = input_a.space
    out = bs_scatter(input_a, input_b)
    p_cd = pattern_probabilities(out).p_cd
    if p_cd < 1e-14:
        raise PostSelectionError("no coincidence amplitude: post-selection is empty")
    coinc = np.zeros((space.dim, space.dim), dtype=complex)
    for (cm, dm), a in out.coincidence_terms().items():
        coinc[space.index(cm), space.index(dm)] = a
    coinc /= math.sqrt(p_cd)
    d_map = qmap
    if relabel_d:
        coinc = coinc @ mirror(space).matrix.T
        d_map = port_d_map(qmap)
    bc = qmap.physical_vectors(space)
    bd = d_map.physical_vectors(space)
    logical = bc.conj().T @ coinc @ bd.conj()
    weight = float(np.sum(np.abs(logical) ** 2))
    if weight < 1e-14:
        raise PostSelectionError("post-selected state has no weight on the logical span")
    vec = logical.reshape(4) / math.sqrt(weight)
    return GateOutput(DensityMatrix.pure(vec), p_cd, max(0.0, 1.0 - weight), vec)


def werner(rho, v: float) -> DensityMatrix:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    m = as_matrix(rho)
    return DensityMatrix(v * m + (1 - v) * np.eye(m.shape[0]) / m.shape[0])


def werner_for_fidelity(fidelity: float, dim: int = 4) -> float:
    """Mixing weight v such that werner(pure, v) has the given fidelity to the pure state."""
    return (fidelity - 1.0 / dim) / (1.0 - 1.0 / dim)


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state."""
    m = as_matrix(rho)
    yy = np.kron(PAULI[1], PAULI[1])
    tilde = yy @ m.conj() @ yy
    ev = np.sqrt(np.clip(np.linalg.eigvals(m @ tilde).real, 0, None))
    ev = np.sort(ev)[::-1]
    return float(max(0.0, ev[0] - ev[1] - ev[2] - ev[3]))


def correlation_matrix(rho) -> np.ndarray:
    """T_ij = Tr(rho sigma_i x sigma_j)."""
    m = as_matrix(rho)
    if m.shape != (4, 4):
        raise DimensionError(f"CHSH needs a two-qubit state, got shape {m.shape}")
    return np.array([[np.trace(m @ np.kron(si, sj)).real for sj in PAULI] for si in PAULI])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if abs(n - 1) > 1e-9:
        raise ValueError(f"measurement direction {v} is not a unit vector")
    return v / n


@dataclass(frozen=True)
class ChshSetting:
    """Bloch directions of the two analysers on each side."""

    a: np.ndarray
    a_prime: np.ndarray
    b: np.ndarray
    b_prime: np.ndarray

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            object.__setattr__(self, name, _unit(getattr(self, name)))

    @classmethod
    def from_angles(cls, angles_deg) -> "ChshSetting":
        """Directions from four (polar, azimuth) pairs in degrees."""
        vecs = []
        for theta, phi in angles_deg:
            t, p = np.radians(theta), np.radians(phi)
            vecs.append([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
        return cls(*vecs)

    def angles_deg(self) -> list[tuple[float, float]]:
        out = []
        for v in (self.a, self.a_prime, self.b, self.b_prime):
            theta = math.degrees(math.acos(np.clip(v[2], -1, 1)))
            phi = math.degrees(math.atan2(v[1], v[0])) % 360.0
            out.append((round(theta, 10), round(phi, 10)))
        return out

    def pairs(self):
        """The four analyser pairs with their sign in S."""
        return [(self.a, self.b, 1), (self.a, self.b_prime, -1), (self.a_prime, self.b, 1), (self.a_prime, self.b_prime, 1)]

def spin_operator(n) -> np.ndarray:
    return np.einsum("i,ijk->jk", np.asarray(n, dtype=float), PAULI)


def correlation(rho, a, b) -> float:
    return float(np.real(np.trace(as_matrix(rho) @ np.kron(spin_operator(a), spin_operator(b)))))


def chsh_value(rho, setting: ChshSetting) -> float:
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b')."""
    t = correlation_matrix(rho)
    return float(sum(sign * x @ t @ y for x, y, sign in setting.pairs()))


def chsh_optimal(rho) -> tuple[float, ChshSetting]:
    """Maximal S (Horodecki) and analyser directions that reach it."""
    t = correlation_matrix(rho)
    u, s, vt = np.linalg.svd(t)
    s_max = 2.0 * math.hypot(s[0], s[1])
    # S = a.T(b - b') + a'.T(b + b'); take b +/- b' along the top right singular vectors
    alpha = math.atan2(s[1], s[0])
    v1, v2 = vt[0], vt[1]
    b = math.cos(alpha) * v1 + math.sin(alpha) * v2
    b_prime = math.cos(alpha) * v1 - math.sin(alpha) * v2
    a_prime, a = u[:, 0], u[:, 1]
    return s_max, ChshSetting(a, a_prime, b, b_prime)


TEXTBOOK_TRIPLET_SETTING = ChshSetting(
    a=[1, 0, 0],
    a_prime=[0, 0, 1],
    b=[1 / math.sqrt(2), 0, -1 / math.sqrt(2)],
    b_prime=[-1 / math.sqrt(2), 0, -1 / math.sqrt(2)],
)
