import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridoam.config import resolve_state
from hybridoam.errors import DimensionError, PostSelectionError
from hybridoam.gate import (
    PHI_PLUS,
    SINGLET,
    TEXTBOOK_TRIPLET_SETTING,
    TRIPLET,
    ChshSetting,
    DensityMatrix,
    chsh_optimal,
    chsh_value,
    concurrence,
    correlation,
    entangling_gate,
    werner,
    werner_for_fidelity,
)
from hybridoam.modes import parse_mode_label
from hybridoam.tomo import fidelity


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(DimensionError):
        DensityMatrix(np.ones(3))
    rho = DensityMatrix.pure(TRIPLET)
    assert rho.purity == pytest.approx(1)
    assert DensityMatrix.mixed(4).purity == pytest.approx(0.25)


@pytest.mark.parametrize("label", ["L:-2", "R:+2"])
def test_canonical_gate(label):
    k = parse_mode_label(label)
    out = entangling_gate(k, k)
    assert fidelity(out.rho, TRIPLET) == pytest.approx(1, abs=1e-10)
    assert out.success_prob == pytest.approx(0.5)
    assert out.leakage == pytest.approx(0, abs=1e-12)
    assert concurrence(out.rho) == pytest.approx(1)


def test_gate_post_selection_empty():
    with pytest.raises(PostSelectionError):
        entangling_gate(parse_mode_label("L:-2"), parse_mode_label("R:+2"))
    with pytest.raises(PostSelectionError):
        entangling_gate(resolve_state("phi+"), resolve_state("phi+"))


def test_gate_phi_plus_phi_minus():
    out = entangling_gate(resolve_state("phi+"), resolve_state("phi-"))
    assert out.success_prob == pytest.approx(0.5)
    # both coincidence terms survive with equal weight, so the output is entangled
    assert concurrence(out.rho) == pytest.approx(1)


def test_gate_without_relabel_is_still_maximally_entangled():
    k = parse_mode_label("R:+2")
    out = entangling_gate(k, k, relabel_d=False)
    assert concurrence(out.rho) == pytest.approx(1)


def test_werner_examples():
    assert np.allclose(werner(TRIPLET, 1).data, DensityMatrix.pure(TRIPLET).data)
    assert np.allclose(werner(TRIPLET, 0).data, np.eye(4) / 4)
    assert chsh_optimal(werner(TRIPLET, 0.9825))[0] == pytest.approx(2.779, abs=5e-4)
    assert fidelity(werner(TRIPLET, werner_for_fidelity(0.935)), TRIPLET) == pytest.approx(0.935)
    with pytest.raises(ValueError):
        werner(TRIPLET, 1.2)


def test_chsh_value_examples():
    assert chsh_value(TRIPLET, TEXTBOOK_TRIPLET_SETTING) == pytest.approx(2 * math.sqrt(2))
    product = np.array([0, 1, 0, 0], dtype=complex)
    rng = np.random.default_rng(3)
    for _ in range(20):
        vecs = rng.normal(size=(4, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        assert abs(chsh_value(product, ChshSetting(*vecs))) <= 2 + 1e-12
    a = np.array([0.6, 0.0, 0.8])
    same = ChshSetting(a, a, a, a)
    assert chsh_value(TRIPLET, same) == pytest.approx(2 * correlation(TRIPLET, a, a))


def test_chsh_optimal_examples():
    s, setting = chsh_optimal(TRIPLET)
    assert s == pytest.approx(2 * math.sqrt(2))
    assert chsh_value(TRIPLET, setting) == pytest.approx(s)
    assert chsh_optimal(np.eye(4) / 4)[0] == pytest.approx(0)
    assert chsh_optimal(werner(TRIPLET, 0.9))[0] == pytest.approx(1.8 * math.sqrt(2))


def test_chsh_rejects_wrong_dimension():
    with pytest.raises(DimensionError):
        chsh_optimal(np.eye(2) / 2)


def test_setting_angles_round_trip():
    s = ChshSetting.from_angles([(90, 0), (0, 0), (135, 0), (135, 180)])
    back = ChshSetting.from_angles(s.angles_deg())
    for u, v in zip((s.a, s.a_prime, s.b, s.b_prime), (back.a, back.a_prime, back.b, back.b_prime)):
        assert np.allclose(u, v)
    with pytest.raises(ValueError):
        ChshSetting([1, 1, 0], [0, 0, 1], [0, 0, 1], [0, 0, 1])


def random_pure(rng):
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return v / np.linalg.norm(v)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_chsh_optimal_closure(seed, v):
    rng = np.random.default_rng(seed)
    rho = werner(random_pure(rng), v)
    s, setting = chsh_optimal(rho)
    assert chsh_value(rho, setting) == pytest.approx(s, abs=1e-9)
    assert s <= 2 * math.sqrt(2) + 1e-12


def test_concurrence_values():
    assert concurrence(SINGLET) == pytest.approx(1)
    assert concurrence(PHI_PLUS) == pytest.approx(1)
    assert concurrence(np.eye(4) / 4) == pytest.approx(0)
