"""Single-photon optical elements acting on the polarization x OAM space.

Phase conventions
-----------------
* Waveplates are defined in the linear (H, V) basis and conjugated into the
  circular storage basis.  ``hwp(theta)`` is [[cos 2t, sin 2t], [sin 2t, -cos 2t]];
  ``qwp(theta)`` is Rot(theta) diag(1, i) Rot(-theta).
* The q-plate maps |R,m> -> exp(+2iq a0)|L,m-2q> and |L,m> -> exp(-2iq a0)|R,m+2q>.
* The mirror maps |R,m> <-> |L,-m> with unit phases, so |H> is even and |V> odd.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.optimize import least_squares, minimize

from .errors import TruncationError
from .modes import (
    LINEAR_TO_CIRCULAR,
    POLS,
    PRUNE_TOL,
    Mode,
    ModeSpace,
    SingleKet,
    basis_ket,
    polarization_amplitudes,
)


@dataclass(frozen=True)
class ElementUnitary:
    """Operator on the truncated space.

    ``valid`` flags the input modes whose image stays inside the truncation;
    applying the element to a ket with weight on an invalid mode raises.
    """

    matrix: np.ndarray
    space: ModeSpace = field(default_factory=ModeSpace)
    name: str = ""
    valid: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.valid is None:
            object.__setattr__(self, "valid", np.ones(self.space.dim, dtype=bool))

    def apply_vector(self, vec: np.ndarray) -> np.ndarray:
        bad = (~self.valid) & (np.abs(vec) >= PRUNE_TOL)
        if bad.any():
            modes = [str(self.space.modes[i]) for i in np.flatnonzero(bad)]
            raise TruncationError(f"{self.name or 'element'} maps {modes} outside m_max={self.space.m_max}")
        return self.matrix @ vec

    def apply(self, k: SingleKet) -> SingleKet:
        return SingleKet.from_vector(self.apply_vector(k.vector), self.space)

    def __call__(self, k: SingleKet) -> SingleKet:
        return self.apply(k)

    def __matmul__(self, other: "ElementUnitary") -> "ElementUnitary":
        # (self @ other) applies ``other`` first
        valid = other.valid & (np.abs(other.matrix[~self.valid]).max(axis=0, initial=0) < PRUNE_TOL)
        return ElementUnitary(self.matrix @ other.matrix, self.space, f"{self.name}*{other.name}", valid)

    @property
    def dagger(self) -> np.ndarray:
        return self.matrix.conj().T


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def linear_to_circular(op_lin: np.ndarray) -> np.ndarray:
    return LINEAR_TO_CIRCULAR @ op_lin @ LINEAR_TO_CIRCULAR.conj().T


def hwp_jones(theta: float) -> np.ndarray:
    """Half-wave plate in the linear basis."""
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_jones(theta: float) -> np.ndarray:
    """Quarter-wave plate (fast axis at ``theta``) in the linear basis."""
    r = _rot(theta)
    return r @ np.diag([1.0, 1.0j]) @ r.T


def hwp(theta: float, space: ModeSpace | None = None) -> ElementUnitary:
    space = space or ModeSpace()
    return ElementUnitary(space.pol_operator(linear_to_circular(hwp_jones(theta))), space, f"hwp({np.degrees(theta):g})")


def qwp(theta: float, space: ModeSpace | None = None) -> ElementUnitary:
    space = space or ModeSpace()
    return ElementUnitary(space.pol_operator(linear_to_circular(qwp_jones(theta))), space, f"qwp({np.degrees(theta):g})")


def qplate(q: float = 1.0, alpha0: float = 0.0, space: ModeSpace | None = None) -> ElementUnitary:
    """Spin-to-orbit converter of topological charge ``q`` (2q must be an integer)."""
    space = space or ModeSpace()
    shift = 2 * q
    if abs(shift - round(shift)) > 1e-12:
        raise ValueError(f"q-plate charge must be half-integer, got {q}")
    shift = int(round(shift))
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    valid = np.zeros(space.dim, dtype=bool)
    for m in range(-space.m_max, space.m_max + 1):
        src_r, src_l = space.index(Mode("R", m)), space.index(Mode("L", m))
        if abs(m - shift) <= space.m_max:
            mat[space.index(Mode("L", m - shift)), src_r] = np.exp(1j * shift * alpha0)
            valid[src_r] = True
        if abs(m + shift) <= space.m_max:
            mat[space.index(Mode("R", m + shift)), src_l] = np.exp(-1j * shift * alpha0)
            valid[src_l] = True
    return ElementUnitary(mat, space, f"qplate(q={q:g},a0={np.degrees(alpha0):g})", valid)


def mirror(space: ModeSpace | None = None) -> ElementUnitary:
    """Reflection: flips the helicity of polarization and OAM."""
    space = space or ModeSpace()
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    for mode in space.modes:
        other = Mode("L" if mode.pol == "R" else "R", -mode.oam)
        mat[space.index(other), space.index(mode)] = 1.0
    return ElementUnitary(mat, space, "mirror")


def identity(space: ModeSpace | None = None) -> ElementUnitary:
    space = space or ModeSpace()
    return ElementUnitary(np.eye(space.dim, dtype=complex), space, "id")


def pol_filter(label: str, space: ModeSpace | None = None) -> np.ndarray:
    """Polarizing-beam-splitter transmission onto ``label`` (H or V) as a projector."""
    space = space or ModeSpace()
    p = polarization_amplitudes(label)
    return space.pol_operator(np.outer(p, p.conj()))


def compose(elements) -> ElementUnitary:
    """Compose elements given in beam order (first element hit first)."""
    elements = list(elements)
    return reduce(lambda acc, el: el @ acc, elements[1:], elements[0])


# --- state preparation -------------------------------------------------------

def prepare_vv(theta: float, psi: float, m_max: int = 4) -> SingleKet:
    """cos(theta/2)|L,-2> + exp(i psi) sin(theta/2)|R,2>."""
    space = ModeSpace(m_max)
    vec = np.zeros(space.dim, dtype=complex)
    vec[space.index(Mode("L", -2))] = np.cos(theta / 2)
    vec[space.index(Mode("R", 2))] = np.exp(1j * psi) * np.sin(theta / 2)
    return SingleKet.from_vector(vec, space)


def prepare_from_waveplates(qwp_angle: float, hwp_angle: float, alpha0: float = 0.0, m_max: int = 4) -> SingleKet:
    """|H,0> through QWP, HWP and a q=1 q-plate."""
    space = ModeSpace(m_max)
    chain = compose([qwp(qwp_angle, space), hwp(hwp_angle, space), qplate(1, alpha0, space)])
    return chain.apply(basis_ket("H", 0, m_max))


def _fidelity2(a, b):
    return abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)


def solve_waveplates(source: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    """QWP and HWP angles (radians) such that HWP @ QWP maps ``source`` onto ``target``.

    Both arguments are (R, L) polarization vectors; equality is up to phase.
    Deterministic multistart local optimization; the map is always reachable.
    """
    src = LINEAR_TO_CIRCULAR.conj().T @ np.asarray(source, dtype=complex)
    tgt = LINEAR_TO_CIRCULAR.conj().T @ np.asarray(target, dtype=complex)

    def loss(x):
        return 1.0 - _fidelity2(tgt, hwp_jones(x[1]) @ qwp_jones(x[0]) @ src)

    best = None
    grid = np.linspace(0, np.pi, 5, endpoint=False)
    for q0, h0 in itertools.product(grid, grid):
        res = minimize(loss, [q0, h0], method="BFGS", options={"gtol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res
        if best.fun < 1e-14:
            break
    # 1 - F is quadratic in the angle error; polish on the projector residual, which is linear
    t = tgt / np.linalg.norm(tgt)
    target_proj = np.outer(t, t.conj())

    def residual(x):
        out = hwp_jones(x[1]) @ qwp_jones(x[0]) @ src
        out = out / np.linalg.norm(out)
        diff = np.outer(out, out.conj()) - target_proj
        return np.concatenate([diff.real.ravel(), diff.imag.ravel()])

    polished = least_squares(residual, best.x, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    q, h = np.mod(polished.x, np.pi)
    return float(q), float(h)


def waveplates_for_vv(theta: float, psi: float, alpha0: float = 0.0) -> tuple[float, float]:
    """Waveplate angles that make ``prepare_from_waveplates`` produce ``prepare_vv(theta, psi)``."""
    # the q-plate sends R -> L,-2 and L -> R,+2, so the pre-q-plate polarization is
    # cos(theta/2) e^{-2i a0}|R> + e^{i psi} sin(theta/2) e^{2i a0}|L>
    target = np.array([np.cos(theta / 2) * np.exp(-2j * alpha0), np.exp(1j * psi) * np.sin(theta / 2) * np.exp(2j * alpha0)])
    return solve_waveplates(polarization_amplitudes("H"), target)


# --- analysis stage ------------------------------------------------------------

@dataclass(frozen=True)
class ProjectorChain:
    """Waveplates (and optionally a q-plate in front) followed by a PBS filter.

    ``operator()`` is the chain's (non-unitary) transfer matrix; with
    ``fiber_coupled`` the final single-mode fibre keeps only m = 0.
    """

    elements: tuple[ElementUnitary, ...]
    filter: str = "H"
    fiber_coupled: bool = False
    label: str = ""

    def __post_init__(self):
        if self.filter not in ("H", "V"):
            raise ValueError(f"PBS filter must be H or V, got {self.filter!r}")

    @property
    def space(self) -> ModeSpace:
        return self.elements[0].space

    def transfer(self, vec: np.ndarray) -> np.ndarray:
        for el in self.elements:
            vec = el.apply_vector(vec)
        vec = pol_filter(self.filter, self.space) @ vec
        if self.fiber_coupled:
            vec = self.space.oam_projector(0) @ vec
        return vec

    def operator(self) -> np.ndarray:
        """Transfer matrix over the full space (columns of invalid q-plate inputs are zero)."""
        mat = np.eye(self.space.dim, dtype=complex)
        for el in self.elements:
            mat = el.matrix @ mat
        mat = pol_filter(self.filter, self.space) @ mat
        if self.fiber_coupled:
            mat = self.space.oam_projector(0) @ mat
        return mat

    def effective(self, span: np.ndarray) -> np.ndarray:
        """Measurement operator K^dagger K restricted to the columns of ``span``."""
        k = np.column_stack([self.transfer(col) for col in span.T])
        return k.conj().T @ k


def analysis_projector(
    pol_qwp: float,
    pol_hwp: float,
    pol_filter: str = "H",
    with_qplate: bool = False,
    alpha0: float = 0.0,
    space: ModeSpace | None = None,
) -> ProjectorChain:
    """Polarization analyser (QWP, HWP, PBS), optionally preceded by a q=1 q-plate.

    With the q-plate the chain analyses OAM and is coupled into a single-mode
    fibre, which transmits only the m = 0 component.
    """
    space = space or ModeSpace()
    els = [qwp(pol_qwp, space), hwp(pol_hwp, space)]
    if with_qplate:
        els.insert(0, qplate(1, alpha0, space))
    tag = "oam" if with_qplate else "pol"
    return ProjectorChain(tuple(els), pol_filter, with_qplate, f"{tag}[qwp={np.degrees(pol_qwp):.3f},hwp={np.degrees(pol_hwp):.3f},{pol_filter}]")


def analyser_for_polarization(pol: np.ndarray, space: ModeSpace | None = None) -> ProjectorChain:
    """Polarization-only chain whose H port transmits exactly ``pol``."""
    q, h = solve_waveplates(pol, polarization_amplitudes("H"))
    return analysis_projector(q, h, "H", False, space=space)


def analyser_for_oam(physical: np.ndarray, alpha0: float = 0.0, space: ModeSpace | None = None) -> ProjectorChain:
    """Q-plate chain whose fibre-coupled H output detects the single-photon state ``physical``.

    ``physical`` is a full-space vector.  Only its m = 0 image after the
    q-plate matters, which is what the analyser can see.
    """
    space = space or ModeSpace()
    converted = qplate(1, alpha0, space).apply_vector(physical)
    pol = space.polarization_vector(converted, 0)
    q, h = solve_waveplates(pol, polarization_amplitudes("H"))
    return analysis_projector(q, h, "H", True, alpha0, space)


# --- config grammar ----------------------------------------------------------

_ELEMENT_RE = re.compile(r"\s*(qwp|hwp|qplate|pbs|mirror)\s*\(([^()]*)\)\s*", re.IGNORECASE)


def parse_elements(text: str, space: ModeSpace | None = None) -> list:
    """Parse ``qwp(<deg>) hwp(<deg>) qplate(q=<val>, a0=<deg>) pbs(<H|V>)`` in beam order.

    Returns a list of ElementUnitary objects and PBS projector matrices.
    """
    space = space or ModeSpace()
    pos, out = 0, []
    while pos < len(text):
        if not text[pos:].strip():
            break
        match = _ELEMENT_RE.match(text, pos)
        if not match:
            raise ValueError(f"cannot parse element at column {pos + 1}: {text[pos:]!r}")
        kind, args = match.group(1).lower(), match.group(2).strip()
        if kind == "qwp":
            out.append(qwp(np.radians(float(args)), space))
        elif kind == "hwp":
            out.append(hwp(np.radians(float(args)), space))
        elif kind == "mirror":
            out.append(mirror(space))
        elif kind == "pbs":
            out.append(pol_filter(args.upper(), space))
        else:
            kw = {"q": 1.0, "a0": 0.0}
            for part in filter(None, (p.strip() for p in args.split(","))):
                key, _, val = part.partition("=")
                key = key.strip().lower()
                if key not in kw:
                    raise ValueError(f"unknown q-plate argument {key!r}")
                kw[key] = float(val)
            out.append(qplate(kw["q"], np.radians(kw["a0"]), space))
        pos = match.end()
    return out


def apply_elements(elements, k: SingleKet) -> SingleKet:
    vec = k.vector
    for el in elements:
        vec = el.apply_vector(vec) if isinstance(el, ElementUnitary) else el @ vec
    return SingleKet.from_vector(vec, k.space)


__all__ = [
    "ElementUnitary",
    "ProjectorChain",
    "POLS",
    "analysis_projector",
    "analyser_for_oam",
    "analyser_for_polarization",
    "apply_elements",
    "compose",
    "hwp",
    "identity",
    "mirror",
    "parse_elements",
    "pol_filter",
    "prepare_from_waveplates",
    "prepare_vv",
    "qplate",
    "qwp",
    "solve_waveplates",
    "waveplates_for_vv",
]
