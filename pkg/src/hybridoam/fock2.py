"""Two-photon interference on a physical beam splitter.

Ports a, b are inputs and c, d outputs.  Creation operators transform as

    a^dag -> (c^dag - M d^dag) / sqrt(2)
    b^dag -> (M c^dag + d^dag) / sqrt(2)

where M is the reflection (``elements.mirror``).  Passing ``reflection_flip=False``
gives the idealized splitter with M = identity.

Two-photon states are stored over unordered port-mode pairs with bosonic
normalization: a doubly occupied port-mode is (x^dag)^2 |0> / sqrt(2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .elements import mirror
from .errors import EstimationError, ParameterError
from .modes import NORM_TOL, PRUNE_TOL, Mode, ModeSpace, SingleKet

PORTS = ("a", "b", "c", "d")


class PortMode(NamedTuple):
    port: str
    mode: Mode

    def __str__(self):
        return f"{self.mode}_{self.port}"

    @property
    def sort_key(self):
        return (PORTS.index(self.port), self.mode.sort_key)


def _pair_key(x: PortMode, y: PortMode) -> tuple[PortMode, PortMode]:
    return (x, y) if x.sort_key <= y.sort_key else (y, x)


@dataclass(frozen=True)
class TwoPhotonState:
    amplitudes: dict = field(default_factory=dict)

    def __post_init__(self):
        amps = {}
        for (x, y), a in self.amplitudes.items():
            if abs(a) >= PRUNE_TOL:
                key = _pair_key(PortMode(*x), PortMode(*y))
                amps[key] = amps.get(key, 0) + complex(a)
        object.__setattr__(self, "amplitudes", dict(sorted(amps.items(), key=lambda kv: (kv[0][0].sort_key, kv[0][1].sort_key))))

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def amplitude(self, x: PortMode, y: PortMode) -> complex:
        return self.amplitudes.get(_pair_key(PortMode(*x), PortMode(*y)), 0j)

    def coincidence_terms(self) -> dict:
        """Terms with one photon in c and one in d, keyed (c-mode, d-mode)."""
        out = {}
        for (x, y), a in self.amplitudes.items():
            if {x.port, y.port} == {"c", "d"}:
                cm, dm = (x.mode, y.mode) if x.port == "c" else (y.mode, x.mode)
                out[(cm, dm)] = a
        return out

    def __str__(self):
        return " ".join(f"({a.real:+.4f}{a.imag:+.4f}j)|{x},{y}>" for (x, y), a in self.amplitudes.items())


def _port_modes(space: ModeSpace, ports) -> list[PortMode]:
    return [PortMode(p, m) for p in ports for m in space.modes]


def _pair_amplitudes(u: np.ndarray, v: np.ndarray) -> dict:
    """{(i, j): amplitude} with i <= j for (sum_x u_x x^dag)(sum_y v_y y^dag)|0>."""
    outer = np.outer(u, v)
    sym = outer + outer.T
    amps = {}
    nz = np.flatnonzero((np.abs(u) >= PRUNE_TOL) | (np.abs(v) >= PRUNE_TOL))
    for i, j in itertools.combinations_with_replacement(nz, 2):
        a = np.sqrt(2.0) * outer[i, i] if i == j else sym[i, j]
        if abs(a) >= PRUNE_TOL:
            amps[(int(i), int(j))] = complex(a)
    return amps


def expand_pair(u: np.ndarray, v: np.ndarray, labels: list) -> TwoPhotonState:
    """Expand the pair product into bosonic basis amplitudes keyed by port-mode labels."""
    return TwoPhotonState({(labels[i], labels[j]): a for (i, j), a in _pair_amplitudes(u, v).items()})


def scattering_matrix(space: ModeSpace | None = None, reflection_flip: bool = True) -> np.ndarray:
    """Single-photon map from port-modes (a, b, c, d) x modes to the same index set.

    Only the (c,d) <- (a,b) block is non-zero; it is unitary.
    """
    space = space or ModeSpace()
    n = space.dim
    m = mirror(space).matrix if reflection_flip else np.eye(n)
    eye = np.eye(n)
    big = np.zeros((4 * n, 4 * n), dtype=complex)
    big[2 * n:3 * n, 0:n] = eye / np.sqrt(2)
    big[3 * n:4 * n, 0:n] = -m / np.sqrt(2)
    big[2 * n:3 * n, n:2 * n] = m / np.sqrt(2)
    big[3 * n:4 * n, n:2 * n] = eye / np.sqrt(2)
    return big


def bs_scatter(input_a: SingleKet, input_b: SingleKet, reflection_flip: bool = True) -> TwoPhotonState:
    """Output state of the beam splitter for one photon in each input port."""
    space = input_a.space
    if input_b.space != space:
        raise ValueError("inputs use different truncations")
    m = mirror(space).matrix if reflection_flip else np.eye(space.dim)
    a, b = input_a.vector, input_b.vector
    u = np.concatenate([a, -(m @ a)]) / np.sqrt(2)
    v = np.concatenate([m @ b, b]) / np.sqrt(2)
    out = expand_pair(u, v, _port_modes(space, "cd"))
    assert abs(out.norm - 1.0) < 1e-9, out.norm
    return out


class PatternProbabilities(NamedTuple):
    p_cc: float
    p_dd: float
    p_cd: float


def pattern_probabilities(state: TwoPhotonState) -> PatternProbabilities:
    p = {"cc": 0.0, "dd": 0.0, "cd": 0.0}
    for (x, y), a in state.amplitudes.items():
        key = "".join(sorted(x.port + y.port))
        p[key] += abs(a) ** 2
    total = sum(p.values())
    if abs(total - 1.0) > NORM_TOL * 1e3:
        raise ValueError(f"state is not normalized (norm^2 = {total})")
    return PatternProbabilities(p["cc"], p["dd"], p["cd"])


@dataclass(frozen=True)
class IndistinguishabilityModel:
    """Scalar overlap ``M`` of the photons' internal (temporal) modes.

    With a delay ``tau`` and coherence width ``tau_c`` (both ns) the overlap
    falls off as M exp(-(tau/tau_c)^2).
    """

    M: float = 1.0
    tau: float = 0.0
    tau_c: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.M <= 1.0:
            raise ParameterError(f"M must lie in [0, 1], got {self.M}")

    @property
    def overlap(self) -> float:
        if self.tau_c is None or self.tau == 0:
            return self.M
        return self.M * math.exp(-((self.tau / self.tau_c) ** 2))

    def at_delay(self, tau: float) -> "IndistinguishabilityModel":
        return IndistinguishabilityModel(self.M, tau, self.tau_c)


def coincidence_probability(input_a: SingleKet, input_b: SingleKet, model: IndistinguishabilityModel | None = None) -> float:
    """p_cd mixed between the interfering and the fully distinguishable case."""
    m = (model or IndistinguishabilityModel()).overlap
    p_ind = pattern_probabilities(bs_scatter(input_a, input_b)).p_cd
    return m * p_ind + (1.0 - m) * 0.5


def hom_visibility(input_a: SingleKet, input_b: SingleKet, model: IndistinguishabilityModel | None = None) -> float:
    return 1.0 - 2.0 * coincidence_probability(input_a, input_b, model)


def hom_dip(input_a: SingleKet, input_b: SingleKet, model: IndistinguishabilityModel, delays_ns) -> np.ndarray:
    """Coincidence probability as a function of delay (needs ``model.tau_c``)."""
    return np.array([coincidence_probability(input_a, input_b, model.at_delay(t)) for t in delays_ns])


# --- permanent oracle -------------------------------------------------------

def permanent(a: np.ndarray) -> complex:
    """Ryser's formula; fine for the small matrices used here."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for r in range(1, n + 1):
        for cols in itertools.combinations(range(n), r):
            total += (-1) ** r * np.prod(a[:, cols].sum(axis=1))
    return (-1) ** n * total


def permanent_oracle(U: np.ndarray, input_pair: tuple[int, int], output_pair: tuple[int, int]) -> complex:
    """<out| U |in> for two photons via the permanent of the 2x2 submatrix.

    ``U[k, i]`` is the single-photon amplitude from index i to index k.
    """
    rows, cols = list(output_pair), list(input_pair)
    norm = math.factorial(2 if cols[0] == cols[1] else 1) * math.factorial(2 if rows[0] == rows[1] else 1)
    return permanent(U[np.ix_(rows, cols)]) / math.sqrt(norm)


def oracle_scatter(input_a: SingleKet, input_b: SingleKet, reflection_flip: bool = True) -> dict:
    """Output amplitudes of ``bs_scatter`` rebuilt independently from permanents.

    Returns {(i, j): amplitude} over sorted index pairs of the (c, d) output block.
    """
    space = input_a.space
    n = space.dim
    U = scattering_matrix(space, reflection_flip)
    ia = np.flatnonzero(np.abs(input_a.vector) >= PRUNE_TOL)
    ib = np.flatnonzero(np.abs(input_b.vector) >= PRUNE_TOL)
    out = {}
    for k, l in itertools.combinations_with_replacement(range(2 * n, 4 * n), 2):
        amp = 0j
        for i in ia:
            for j in ib:
                amp += input_a.vector[i] * input_b.vector[j] * permanent_oracle(U, (i, n + j), (k, l))
        if abs(amp) >= PRUNE_TOL:
            out[(k, l)] = amp
    return out


def expand_with_unitary(U: np.ndarray, input_pair: tuple[int, int]) -> dict:
    """Operator-expansion route for a generic unitary: {(k, l): amplitude}.

    Counterpart of ``permanent_oracle`` used for cross-checks.
    """
    i, j = input_pair
    u, v = U[:, i], U[:, j]
    if i == j:
        # (x^dag)^2/sqrt(2) |0>
        u = u / 2 ** 0.25
        v = v / 2 ** 0.25
    return _pair_amplitudes(u, v)


# --- correlation histograms ---------------------------------------------------

@dataclass(frozen=True)
class Histogram:
    """Coincidence counts integrated over each peak of a pulsed correlation histogram."""

    delays_ns: np.ndarray
    counts: np.ndarray
    kind: str = "hom"

    @property
    def central(self) -> int:
        return int(self.counts[np.argmin(np.abs(self.delays_ns))])

    def side_counts(self) -> np.ndarray:
        return self.counts[np.abs(self.delays_ns) > 1e-9]

    def to_csv(self) -> str:
        lines = ["delay_ns,counts"]
        lines += [f"{d:.6g},{int(c)}" for d, c in zip(self.delays_ns, self.counts)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, kind: str = "hom") -> "Histogram":
        rows = [line.split(",") for line in text.strip().splitlines()[1:]]
        return cls(np.array([float(r[0]) for r in rows]), np.array([int(r[1]) for r in rows]), kind)


def histogram_means(
    side_mean: float,
    visibility: float = 1.0,
    g2: float = 0.0,
    kind: str = "hom",
) -> tuple[float, float]:
    """Expected (central, side) peak counts.

    HOM: the central peak is side*(1 - V)/2 plus the multiphoton term g2*side, so
    the estimator 1 - 2 C0/<C> returns V - 2 g2.  HBT: central = g2 * side.
    """
    if kind == "hom":
        return side_mean * ((1.0 - visibility) / 2.0 + g2), side_mean
    if kind == "hbt":
        return side_mean * g2, side_mean
    raise ParameterError(f"unknown histogram kind {kind!r}")


def raw_visibility(visibility: float, g2: float) -> float:
    """Visibility the HOM estimator returns once the multiphoton term is included."""
    return visibility - 2.0 * g2


def simulate_histogram(
    rate: float,
    rep_period: float,
    duration: float,
    model: IndistinguishabilityModel | None = None,
    g2: float = 0.0,
    rng_seed: int | None = None,
    inputs: tuple[SingleKet, SingleKet] | None = None,
    kind: str = "hom",
    n_side: int = 5,
) -> Histogram:
    """Poisson-sampled peak counts at delays k * rep_period, k = -n_side..n_side.

    ``rate`` (Hz) is the mean coincidence rate in one side peak.  For ``kind="hom"``
    the visibility is ``hom_visibility(*inputs, model)``; without ``inputs`` a
    perfectly interfering pair is assumed (visibility = model overlap).
    """
    if rate <= 0 or duration <= 0 or rep_period <= 0:
        raise ParameterError("rate, duration and rep_period must be positive")
    if not 0.0 <= g2 < 1.0:
        raise ParameterError(f"g2 must lie in [0, 1), got {g2}")
    model = model or IndistinguishabilityModel()
    vis = hom_visibility(*inputs, model) if inputs is not None else model.overlap
    central, side = histogram_means(rate * duration, vis, g2, kind)
    ks = np.arange(-n_side, n_side + 1)
    means = np.where(ks == 0, central, side)
    rng = np.random.default_rng(rng_seed)
    return Histogram(ks * rep_period, rng.poisson(means), kind)


class Estimate(NamedTuple):
    value: float
    std: float


def _peak_stats(hist: Histogram) -> tuple[float, float, int]:
    neg = np.sum(hist.delays_ns < -1e-9)
    pos = np.sum(hist.delays_ns > 1e-9)
    if neg < 3 or pos < 3:
        raise EstimationError("need at least three side peaks on each side")
    side = hist.side_counts()
    mean = float(np.mean(side))
    if mean <= 0:
        raise EstimationError("side peaks are empty")
    return float(hist.central), mean, side.size


def estimate_visibility(hist: Histogram) -> Estimate:
    """V = 1 - 2 C0/<C> with Poisson error propagation."""
    c0, mean, n = _peak_stats(hist)
    v = 1.0 - 2.0 * c0 / mean
    std = 2.0 / mean * math.sqrt(c0 + (c0 / mean) ** 2 * mean / n)
    return Estimate(v, std)


def estimate_g2(hist: Histogram) -> Estimate:
    """g2(0) = C0/<C> with Poisson error propagation."""
    c0, mean, n = _peak_stats(hist)
    g = c0 / mean
    std = math.sqrt(c0 + g ** 2 * mean / n) / mean
    return Estimate(g, std)


def visibility_report(hom: Histogram, hbt: Histogram | None = None) -> dict:
    v = estimate_visibility(hom)
    src = hbt if hbt is not None else hom
    g = estimate_g2(src)
    return {
        "V": v.value,
        "V_std": v.std,
        "g2": g.value,
        "g2_std": g.std,
        "C0": int(hom.central),
        "C_side_mean": float(np.mean(hom.side_counts())),
    }
