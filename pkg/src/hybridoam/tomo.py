"""Tomographic acquisition and reconstruction for the intra- and inter-particle schemes.

Logical qubits
--------------
* ``intra``: one photon, qubit 1 = polarization (|0> = L, |1> = R), qubit 2 =
  OAM (|0> = -2, |1> = +2).  Analysed by a polarization stage followed by a
  q-plate stage coupled into a single-mode fibre.
* ``inter``: two photons leaving ports c and d, each read in its logical frame
  (``modes.DEFAULT_MAP`` for c, ``gate.port_d_map`` for d) by a q-plate stage.

Each scheme uses the 36 products of single-qubit Pauli eigenstates.  Setting
labels look like ``"XZ:01"``: bases, then outcome bits (0 = +1 eigenvalue).
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .elements import ProjectorChain, analyser_for_oam, analyser_for_polarization
from .errors import CompletenessError, DimensionError
from .gate import PAULI, ChshSetting, DensityMatrix, as_matrix, chsh_optimal, port_d_map, spin_operator
from .modes import DEFAULT_MAP, LogicalQubitMap, Mode, ModeSpace, polarization_amplitudes

BASES = "XYZ"
_S = 1 / math.sqrt(2)
EIGENSTATES = {
    ("X", 0): np.array([_S, _S], dtype=complex),
    ("X", 1): np.array([_S, -_S], dtype=complex),
    ("Y", 0): np.array([_S, 1j * _S], dtype=complex),
    ("Y", 1): np.array([_S, -1j * _S], dtype=complex),
    ("Z", 0): np.array([1, 0], dtype=complex),
    ("Z", 1): np.array([0, 1], dtype=complex),
}

PAULI16 = np.array([np.kron(a, b) for a in np.concatenate([[np.eye(2)], PAULI]) for b in np.concatenate([[np.eye(2)], PAULI])])


@dataclass(frozen=True)
class MeasurementSet:
    scheme: str
    labels: tuple[str, ...]
    projectors: np.ndarray
    chains: tuple[tuple[ProjectorChain, ...], ...]

    @property
    def groups(self) -> list[str]:
        return [lab.split(":")[0] for lab in self.labels]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def probabilities(self, rho) -> np.ndarray:
        m = as_matrix(rho)
        return np.einsum("ijk,kj->i", self.projectors, m).real


def _intra_span(space: ModeSpace) -> np.ndarray:
    cols = [space.basis(Mode(p, m)) for p in ("L", "R") for m in (-2, 2)]
    return np.column_stack(cols)


def _intra_pol_chain(t_pol, space):
    # polarization qubit: |0> = L, |1> = R  ->  (R, L) amplitudes (t1, t0)
    return analyser_for_polarization(np.array([t_pol[1], t_pol[0]]), space)


def _intra_oam_chain(t_oam, space):
    # the OAM stage sees an H-polarized photon after the first PBS
    h = polarization_amplitudes("H")
    phys = np.zeros(space.dim, dtype=complex)
    for m, amp in ((-2, t_oam[0]), (2, t_oam[1])):
        phys[space.index(Mode("R", m))] = h[0] * amp
        phys[space.index(Mode("L", m))] = h[1] * amp
    return analyser_for_oam(phys, space=space)


def build_measurements(
    scheme: str = "inter",
    qmap: LogicalQubitMap = DEFAULT_MAP,
    d_map: LogicalQubitMap | None = None,
    m_max: int = 4,
) -> MeasurementSet:
    """36 product Pauli-eigenstate projectors realised by physical analyser chains."""
    space = ModeSpace(m_max)
    labels, projectors, chains = [], [], []
    single = {}
    if scheme == "intra":
        span = _intra_span(space)
        pol = {key: _intra_pol_chain(t, space) for key, t in EIGENSTATES.items()}
        oam = {key: _intra_oam_chain(t, space) for key, t in EIGENSTATES.items()}
        for key1, key2 in itertools.product(EIGENSTATES, EIGENSTATES):
            pc, oc = pol[key1], oam[key2]
            k = np.column_stack([oc.transfer(pc.transfer(col)) for col in span.T])
            projectors.append(k.conj().T @ k)
            chains.append((pc, oc))
            labels.append(f"{key1[0]}{key2[0]}:{key1[1]}{key2[1]}")
    elif scheme == "inter":
        d_map = d_map or port_d_map(qmap)
        for port, m in (("c", qmap), ("d", d_map)):
            span = m.physical_vectors(space)
            for key, t in EIGENSTATES.items():
                chain = analyser_for_oam(span @ t, space=space)
                single[port, key] = (chain, chain.effective(span))
        for key1, key2 in itertools.product(EIGENSTATES, EIGENSTATES):
            c_chain, ec = single["c", key1]
            d_chain, ed = single["d", key2]
            projectors.append(np.kron(ec, ed))
            chains.append((c_chain, d_chain))
            labels.append(f"{key1[0]}{key2[0]}:{key1[1]}{key2[1]}")
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    projectors = np.array(projectors)
    groups = [lab.split(":")[0] for lab in labels]
    # uniform chain losses (e.g. the q-plate on H light in the intra OAM stage) are
    # bookkept in the efficiency budget, not here
    for g in sorted(set(groups)):
        idx = [i for i, x in enumerate(groups) if x == g]
        total = projectors[idx].sum(axis=0)
        scale = np.trace(total).real / 4
        if np.max(np.abs(total - scale * np.eye(4))) > 1e-8:
            raise CompletenessError(f"outcomes of setting {g} do not resolve the identity")
        projectors[idx] /= scale
    return MeasurementSet(scheme, tuple(labels), projectors, tuple(chains))


def logical_projector(direction, outcome: int) -> np.ndarray:
    """(I + s n.sigma)/2 for outcome s = (-1)**outcome."""
    return (np.eye(2) + (-1) ** outcome * spin_operator(direction)) / 2


# --- count records -------------------------------------------------------------

@dataclass(frozen=True)
class CountRecord:
    setting: str
    counts: float
    time_s: float = 1.0
    background: float = 0.0
    provenance: str = "raw"
    exact: bool = False

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be nonnegative")
        if self.time_s <= 0:
            raise ValueError("acquisition time must be positive")


def simulate_counts(
    rho,
    mset: MeasurementSet,
    mean_total: float,
    background_rate: float = 0.0,
    rng_seed: int | None = None,
    time_s: float = 1.0,
    exact: bool = False,
) -> list[CountRecord]:
    """Counts ~ Poisson(mean_total * Tr(rho Pi) + background_rate * T) per setting.

    ``mean_total`` is the expected signal per measurement basis (summed over its
    four outcomes).  ``exact`` returns the means themselves.
    """
    if mean_total <= 0:
        raise ValueError("mean_total must be positive")
    probs = np.clip(mset.probabilities(rho), 0, None)
    means = mean_total * probs + background_rate * time_s
    if exact:
        counts = means
    else:
        counts = np.random.default_rng(rng_seed).poisson(means)
    return [
        CountRecord(lab, float(c) if exact else int(c), time_s, background_rate, "raw", exact)
        for lab, c in zip(mset.labels, counts)
    ]


def subtract_background(records: list[CountRecord], mode: str = "dark") -> list[CountRecord]:
    """counts -> max(0, counts - background * T); ``mode`` is ``dark`` or ``accidental``."""
    if mode not in ("dark", "accidental"):
        raise ValueError(f"unknown background mode {mode!r}")
    return [
        replace(r, counts=max(0.0, r.counts - r.background * r.time_s), provenance=f"{r.provenance}-{mode}")
        for r in records
    ]


def accidental_rate(rate_c: float, rate_d: float, window_s: float) -> float:
    """Accidental coincidence rate R_c R_d tau for a coincidence window tau."""
    return rate_c * rate_d * window_s


def records_to_csv(records: list[CountRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["setting", "counts", "time_s", "background"])
    for r in records:
        w.writerow([r.setting, repr(r.counts), repr(r.time_s), repr(r.background)])
    return buf.getvalue()


def records_from_csv(text: str) -> list[CountRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [CountRecord(r["setting"], float(r["counts"]), float(r["time_s"]), float(r["background"])) for r in rows]


def _counts_vector(records, mset) -> np.ndarray:
    counts = np.zeros(len(mset.labels))
    seen = set()
    for r in records:
        i = mset.index(r.setting)
        counts[i] = r.counts
        seen.add(i)
    if len(seen) != len(mset.labels):
        raise CompletenessError("records do not cover every setting")
    return counts


def frequencies(records, mset) -> np.ndarray:
    """Relative frequencies normalized within each measurement basis."""
    counts = _counts_vector(records, mset)
    groups = np.array(mset.groups)
    freq = np.zeros_like(counts)
    for g in set(mset.groups):
        idx = groups == g
        tot = counts[idx].sum()
        if tot > 0:
            freq[idx] = counts[idx] / tot
    return freq


# --- reconstruction ------------------------------------------------------------

def linear_inversion(records, mset: MeasurementSet) -> np.ndarray:
    """Least-squares solution of Tr(rho Pi_i) = f_i; Hermitian and unit trace, possibly not PSD."""
    f = frequencies(records, mset)
    design = np.einsum("ijk,lkj->il", mset.projectors, PAULI16).real / 4
    if np.linalg.matrix_rank(design) < 16:
        raise CompletenessError("measurement set is not informationally complete")
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    rho = np.einsum("l,ljk->jk", coef, PAULI16) / 4
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


@dataclass(frozen=True)
class MleResult:
    rho: DensityMatrix
    converged: bool
    iterations: int
    log_likelihood: np.ndarray


def _loglik(f, p):
    mask = f > 0
    return float(np.sum(f[mask] * np.log(p[mask])))


def mle_reconstruct(
    records,
    mset: MeasurementSet,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    dilution: float = 0.5,
    rho0=None,
) -> MleResult:
    """Diluted R-rho-R maximum likelihood.

    Each step is rho -> T rho T / Tr with T = (1 - d) I + d R.  If a step would
    lower the likelihood, d is halved for that step, so the recorded
    log-likelihood never decreases.  Stops when the gain drops below ``tol``.
    """
    counts = _counts_vector(records, mset)
    proj = mset.projectors
    dim = proj.shape[1]
    eye = np.eye(dim)
    total = counts.sum()
    if total <= 0:
        warnings.warn("all counts are zero; returning the maximally mixed state", RuntimeWarning, stacklevel=2)
        return MleResult(DensityMatrix.mixed(dim), False, 0, np.array([]))
    f = counts / total
    rho = eye / dim if rho0 is None else as_matrix(rho0).copy()

    def probs(r):
        return np.einsum("ijk,kj->i", proj, r).real

    p = probs(rho)
    history = [_loglik(f, p)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ratio = np.divide(f, p, out=np.zeros_like(f), where=f > 0)
        R = np.einsum("i,ijk->jk", ratio, proj)
        d = dilution
        while True:
            T = (1 - d) * eye + d * R
            new = T @ rho @ T.conj().T
            new = (new + new.conj().T) / 2
            new /= np.trace(new).real
            p_new = probs(new)
            ll = _loglik(f, p_new) if np.all(p_new[f > 0] > 0) else -np.inf
            if ll >= history[-1] or d < 1e-12:
                break
            d /= 2
        if ll < history[-1]:
            # no improving step exists at machine precision
            converged = True
            break
        gain = ll - history[-1]
        rho, p = new, p_new
        history.append(ll)
        if gain < tol:
            converged = True
            break
    return MleResult(DensityMatrix(rho), converged, it, np.array(history))


def _psd_sqrt(m):
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(rho, target) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2; <psi|rho|psi> for a pure target."""
    r = as_matrix(rho)
    t = np.asarray(target.data if isinstance(target, DensityMatrix) else target, dtype=complex)
    if t.ndim == 1:
        if t.shape[0] != r.shape[0]:
            raise DimensionError("state dimensions differ")
        t = t / np.linalg.norm(t)
        return float(np.clip(np.real(t.conj() @ r @ t), 0, 1))
    if t.shape != r.shape:
        raise DimensionError("state dimensions differ")
    s = _psd_sqrt(r)
    val = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(s @ t @ s), 0, None))) ** 2
    return float(np.clip(val, 0, 1))


@dataclass(frozen=True)
class MonteCarloResult:
    F_mean: float
    F_std: float
    S_mean: float
    S_std: float
    n_samples: int
    n_failed: int = 0


def monte_carlo_errors(
    records,
    mset: MeasurementSet,
    target,
    n_samples: int = 100,
    rng_seed: int | None = None,
    method: str = "mle",
) -> MonteCarloResult:
    """Resample each count as Poisson(count), reconstruct again, and collect F and S_max."""
    if n_samples < 50:
        raise ValueError("n_samples must be at least 50")
    reconstruct = _reconstructor(method)
    if all(r.exact for r in records):
        rho = reconstruct(records, mset)
        f, s = fidelity(rho, target), chsh_optimal(rho)[0]
        return MonteCarloResult(f, 0.0, s, 0.0, n_samples)
    children = np.random.SeedSequence(rng_seed).spawn(n_samples)
    fs, ss, failed = [], [], 0
    for child in children:
        rng = np.random.default_rng(child)
        sample = [replace(r, counts=int(rng.poisson(r.counts))) for r in records]
        try:
            rho = reconstruct(sample, mset)
        except (CompletenessError, ValueError):
            failed += 1
            continue
        fs.append(fidelity(rho, target))
        ss.append(chsh_optimal(rho)[0])
    fs, ss = np.array(fs), np.array(ss)
    return MonteCarloResult(float(fs.mean()), float(fs.std(ddof=1)), float(ss.mean()), float(ss.std(ddof=1)), n_samples, failed)


def _reconstructor(method):
    if method == "mle":
        return lambda rec, ms: mle_reconstruct(rec, ms).rho.data
    if method == "linear":
        return linear_inversion
    raise ValueError(f"unknown reconstruction method {method!r}")


def reconstruction_report(records, mset, target, n_samples=100, rng_seed=None) -> dict:
    """Fields of the reconstruction report: MLE estimate plus Monte Carlo spreads."""
    mle = mle_reconstruct(records, mset)
    lin = linear_inversion(records, mset)
    mc = monte_carlo_errors(records, mset, target, n_samples, rng_seed)
    return {
        "fidelity": fidelity(mle.rho, target),
        "fidelity_std": mc.F_std,
        "fidelity_linear": fidelity(lin, target),
        "S": chsh_optimal(mle.rho)[0],
        "S_std": mc.S_std,
        "purity": mle.rho.purity,
        "min_eigenvalue": float(np.linalg.eigvalsh(lin).min()),
        "converged": bool(mle.converged),
    }


def density_matrix_csv(rho) -> str:
    """Row-major entries as ``re,im`` lines."""
    m = as_matrix(rho)
    lines = ["re,im"] + [f"{z.real:.12g},{z.imag:.12g}" for z in m.reshape(-1)]
    return "\n".join(lines) + "\n"


def density_matrix_from_csv(text: str) -> np.ndarray:
    rows = text.strip().splitlines()[1:]
    vals = np.array([complex(float(a), float(b)) for a, b in (r.split(",") for r in rows)])
    n = int(round(math.sqrt(vals.size)))
    return vals.reshape(n, n)


# --- CHSH from counts --------------------------------------------------------------

@dataclass(frozen=True)
class ChshMeasurement:
    S: float
    S_std: float
    setting: ChshSetting
    counts: np.ndarray
    corrected: bool

    def report(self) -> dict:
        return {"S": self.S, "S_std": self.S_std, "angles_deg": [list(a) for a in self.setting.angles_deg()], "corrected": self.corrected}


def simulate_chsh_counts(
    rho,
    setting: ChshSetting,
    mean_per_pair: float,
    background_rate: float = 0.0,
    time_s: float = 1.0,
    rng_seed: int | None = None,
) -> np.ndarray:
    """Poisson counts, shape (4 analyser pairs, 4 outcomes ++, +-, -+, --)."""
    m = as_matrix(rho)
    means = np.zeros((4, 4))
    for k, (x, y, _) in enumerate(setting.pairs()):
        for o, (s1, s2) in enumerate(itertools.product((0, 1), (0, 1))):
            p = np.trace(m @ np.kron(logical_projector(x, s1), logical_projector(y, s2))).real
            means[k, o] = mean_per_pair * max(p, 0.0) + background_rate * time_s
    return np.random.default_rng(rng_seed).poisson(means)


def chsh_from_counts(counts, setting: ChshSetting, background: float = 0.0) -> ChshMeasurement:
    """S with Poisson error propagation; ``background`` counts are removed per outcome."""
    raw = np.asarray(counts, dtype=float)
    c = np.clip(raw - background, 0, None)
    s, var = 0.0, 0.0
    for k, (_, _, sign) in enumerate(setting.pairs()):
        same = c[k, 0] + c[k, 3]
        diff = c[k, 1] + c[k, 2]
        tot = same + diff
        if tot <= 0:
            raise ValueError("an analyser pair recorded no counts")
        s += sign * (same - diff) / tot
        # propagate the Poisson variance of the raw counts
        var += 4 * (diff ** 2 * (raw[k, 0] + raw[k, 3]) + same ** 2 * (raw[k, 1] + raw[k, 2])) / tot ** 4
    return ChshMeasurement(float(s), float(math.sqrt(var)), setting, raw, background > 0)
