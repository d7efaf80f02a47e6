import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridoam.errors import DegenerateProjectionError, TruncationError, ZeroVectorError
from hybridoam.modes import (
    DEFAULT_MAP,
    LogicalQubitMap,
    Mode,
    ModeSpace,
    SingleKet,
    basis_ket,
    inner,
    ket,
    parse_mode_label,
    to_logical,
)

PHI_PLUS = [(("L", -2), 1), (("R", 2), 1)]


def test_single_basis_element():
    k = ket([(("R", 2), 1)])
    assert k.amplitudes == {Mode("R", 2): 1}


def test_superposition_is_normalized():
    k = ket(PHI_PLUS)
    assert k.amplitude(Mode("L", -2)) == pytest.approx(1 / math.sqrt(2))
    assert k.amplitude(Mode("R", 2)) == pytest.approx(1 / math.sqrt(2))
    assert k.raw_norm == pytest.approx(math.sqrt(2))


def test_out_of_truncation_mode_rejected():
    with pytest.raises(TruncationError):
        ket([(("R", 5), 1)], m_max=4)


def test_zero_amplitudes_rejected():
    with pytest.raises(ZeroVectorError):
        ket([(("R", 0), 0)])
    with pytest.raises(ZeroVectorError):
        ket([])


def test_mode_ordering_r_before_l():
    space = ModeSpace(2)
    assert space.modes[0] == Mode("R", -2)
    assert space.modes[space.n_oam] == Mode("L", -2)
    assert [space.index(m) for m in space.modes] == list(range(space.dim))


def test_m_max_lower_bound():
    with pytest.raises(ValueError):
        ModeSpace(1)


def test_tiny_amplitudes_pruned():
    space = ModeSpace()
    vec = space.basis(Mode("R", 0)) + 1e-17 * space.basis(Mode("L", 0))
    assert list(SingleKet.from_vector(vec).amplitudes) == [Mode("R", 0)]


def test_inner_products():
    r2, l2 = parse_mode_label("R:+2"), parse_mode_label("L:-2")
    assert inner(r2, r2) == pytest.approx(1)
    assert inner(r2, l2) == 0
    assert inner(ket(PHI_PLUS), r2) == pytest.approx(1 / math.sqrt(2))


def test_inner_rejects_mixed_truncations():
    with pytest.raises(TruncationError):
        inner(basis_ket("R", 0, 2), basis_ket("R", 0, 4))


def test_linear_polarization_convention():
    h, v = basis_ket("H", 0), basis_ket("V", 0)
    assert h.amplitude(Mode("R", 0)) == pytest.approx(1 / math.sqrt(2))
    assert v.amplitude(Mode("L", 0)) == pytest.approx(1j / math.sqrt(2))
    assert abs(inner(h, v)) < 1e-15


def test_parse_mode_label_errors():
    with pytest.raises(ValueError):
        parse_mode_label("X:+2")
    with pytest.raises(TruncationError):
        parse_mode_label("R:+6")


def test_to_logical_examples():
    amps, leak = to_logical(ket(PHI_PLUS))
    assert np.allclose(amps, [1 / math.sqrt(2), 1 / math.sqrt(2)]) and leak == pytest.approx(0)
    amps, leak = to_logical(parse_mode_label("L:-2"))
    assert np.allclose(amps, [1, 0]) and leak == pytest.approx(0)
    amps, leak = to_logical(ket([(("L", -2), 1), (("L", 0), 1)]))
    assert np.allclose(amps, [1, 0]) and leak == pytest.approx(0.5)


def test_to_logical_full_leakage():
    with pytest.raises(DegenerateProjectionError):
        to_logical(parse_mode_label("R:0"))


def test_logical_map_requires_distinct_modes():
    with pytest.raises(ValueError):
        LogicalQubitMap(Mode("R", 2), Mode("R", 2))


def test_logical_map_phase():
    qmap = LogicalQubitMap(phase=math.pi / 2)
    k = qmap.physical_ket(np.array([0, 1]))
    assert k.amplitude(Mode("R", 2)) == pytest.approx(1j)
    assert DEFAULT_MAP.basis0 == Mode("L", -2)


complex_amp = st.builds(complex, st.floats(-1, 1), st.floats(-1, 1))
vectors = st.lists(complex_amp, min_size=18, max_size=18).filter(lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=1000, deadline=None)
@given(vectors, vectors)
def test_inner_conjugate_symmetry(u, v):
    a, b = SingleKet.from_vector(np.array(u)), SingleKet.from_vector(np.array(v))
    assert inner(a, b) == pytest.approx(np.conj(inner(b, a)), abs=1e-12)
    assert abs(inner(a, b)) <= 1 + 1e-12


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_normalize_idempotent(u):
    k = SingleKet.from_vector(np.array(u))
    assert np.allclose(k.normalize().vector, k.vector, atol=1e-12)
    assert abs(np.linalg.norm(k.vector) - 1) < 1e-12


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_leakage_plus_weight_is_one(u):
    k = SingleKet.from_vector(np.array(u))
    weight = k.probability(Mode("L", -2)) + k.probability(Mode("R", 2))
    if weight < 1e-12:
        return
    _, leak = to_logical(k)
    assert leak + weight == pytest.approx(1, abs=1e-12)
