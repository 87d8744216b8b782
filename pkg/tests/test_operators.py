import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cqed_readout.errors import DimensionMismatchError, InvalidLevelError, InvalidSpaceError
from cqed_readout.operators import (
    SpaceLayout,
    annihilation,
    cavity_annihilation,
    creation,
    dagger,
    expectation,
    hermiticity_error,
    is_density_matrix,
    kron,
    level_populations,
    min_eigenvalue,
    transition,
)


def test_annihilation_matrix_elements():
    a = annihilation(5)
    for n in range(1, 5):
        assert a[n - 1, n] == pytest.approx(np.sqrt(n))
    assert np.count_nonzero(a) == 4
    np.testing.assert_allclose(creation(5), a.conj().T)


def test_smallest_ladders():
    np.testing.assert_array_equal(annihilation(2), [[0, 1], [0, 0]])
    assert annihilation(3)[1, 2] == pytest.approx(1.41421356)


@pytest.mark.parametrize("i,j", [(0, 2), (1, 2), (2, 2), (0, 1)])
def test_transition_round_trip_trace(i, j):
    lay = SpaceLayout(3, 5)
    assert np.trace(transition(lay, i, j) @ transition(lay, j, i)).real == pytest.approx(5)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.data())
def test_kron_element_formula(m, n, data):
    a = data.draw(_complex_matrix(m))
    b = data.draw(_complex_matrix(n))
    k = kron(a, b)
    assert k.shape == (m * n, m * n)
    i, j = data.draw(st.integers(0, m - 1)), data.draw(st.integers(0, m - 1))
    r, c = data.draw(st.integers(0, n - 1)), data.draw(st.integers(0, n - 1))
    assert k[i * n + r, j * n + c] == pytest.approx(a[i, j] * b[r, c])


def test_commutator_is_identity_below_cutoff():
    a = annihilation(6)
    comm = a @ dagger(a) - dagger(a) @ a
    np.testing.assert_allclose(np.diag(comm)[:-1], 1.0)
    assert comm[-1, -1] == pytest.approx(-5.0)  # truncation artefact at the top level


def test_annihilation_needs_two_levels():
    with pytest.raises(InvalidSpaceError):
        annihilation(1)


def test_layout_ordering_is_atom_major():
    lay = SpaceLayout(3, 4)
    assert lay.dim == 12
    assert lay.index(2, 1) == 9
    rho = lay.basis_state(1, 3)
    assert rho[7, 7] == 1 and np.trace(rho) == 1


def test_layout_rejects_bad_indices():
    lay = SpaceLayout(3, 4)
    with pytest.raises(InvalidLevelError):
        lay.index(3, 0)
    with pytest.raises(InvalidSpaceError):
        lay.index(0, 4)
    with pytest.raises(InvalidSpaceError):
        SpaceLayout(0, 4)


def test_transition_maps_between_levels():
    lay = SpaceLayout(3, 3)
    up = transition(lay, 0, 2)
    psi = np.zeros(lay.dim)
    psi[lay.index(0, 1)] = 1.0
    out = up @ psi
    assert out[lay.index(2, 1)] == 1.0 and np.count_nonzero(out) == 1
    with pytest.raises(InvalidLevelError):
        transition(lay, 0, 3)


def test_cavity_operator_acts_on_photons_only():
    lay = SpaceLayout(2, 3)
    a = cavity_annihilation(lay)
    np.testing.assert_allclose(a, kron(np.eye(2), annihilation(3)))


def test_expectation_dimension_check():
    with pytest.raises(DimensionMismatchError):
        expectation(np.eye(3), np.eye(4) / 4)


def _complex_matrix(n):
    parts = arrays(np.float64, (2, n, n), elements=st.floats(-3, 3, allow_nan=False))
    return parts.map(lambda x: x[0] + 1j * x[1])


@settings(max_examples=50, deadline=None)
@given(_complex_matrix(5), _complex_matrix(5))
def test_expectation_is_trace_of_product(op, rho):
    assert expectation(op, rho) == pytest.approx(np.trace(op @ rho), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(_complex_matrix(4), st.floats(0.01, 10))
def test_random_states_pass_density_checks(m, scale):
    rho = scale * m @ m.conj().T + 1e-3 * np.eye(4)
    rho = rho / np.trace(rho)
    assert is_density_matrix(rho)
    assert hermiticity_error(rho) < 1e-12
    assert min_eigenvalue(rho) > 0


def test_density_check_catches_negative_eigenvalue():
    rho = np.diag([1.2, -0.2]).astype(complex)
    assert not is_density_matrix(rho)
    assert min_eigenvalue(rho) == pytest.approx(-0.2)


def test_level_populations_batch():
    lay = SpaceLayout(3, 2)
    rhos = np.stack([lay.basis_state(k, 1) for k in range(3)])
    np.testing.assert_allclose(level_populations(rhos, lay), np.eye(3))
