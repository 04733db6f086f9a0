import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsline.chain import (
    DenseOperator,
    InteractionTerm,
    build_hamiltonian,
    chain_energies,
    check_dim,
    embed_term,
    exact_ratio,
    hermitian_expm,
    log_partition_function,
    spectrum,
)
from gibbsline.errors import DimensionCapError, ValidationError
from gibbsline.models import PAULI_X, PAULI_Z, ising, random_term, tfim

from oracles import ising_ratio, log_z_taylor, loop_hamiltonian, random_hermitian, taylor_expm


def test_zero_term_builds_zero_hamiltonian():
    h = InteractionTerm(2, np.zeros((4, 4)))
    assert not np.any(build_hamiltonian(h, 4).matrix)
    assert build_hamiltonian(h, 1).matrix.shape == (2, 2)


def test_norm_above_one_rejected_with_measured_norm():
    with pytest.raises(ValidationError, match="1.3"):
        InteractionTerm(2, 1.3 * np.kron(PAULI_Z, PAULI_Z))


def test_non_hermitian_rejected():
    m = np.zeros((4, 4))
    m[0, 1] = 0.5
    with pytest.raises(ValidationError, match="Hermitian"):
        InteractionTerm(2, m)


def test_near_hermitian_symmetrized_with_warning():
    m = 0.5 * np.kron(PAULI_Z, PAULI_Z).astype(complex)
    m[0, 1] += 1e-11
    with pytest.warns(UserWarning, match="symmetrized"):
        h = InteractionTerm(2, m)
    assert np.allclose(h.matrix, h.matrix.conj().T, atol=0)


def test_wrong_shape_rejected():
    with pytest.raises(ValidationError, match="9x9"):
        InteractionTerm(3, np.zeros((4, 4)))


def test_term_is_read_only():
    h = ising()
    with pytest.raises(ValueError):
        h.matrix[0, 0] = 3.0


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_hamiltonian_matches_basis_loop(N):
    h = random_term(2, seed=N)
    assert np.allclose(build_hamiltonian(h, N).matrix, loop_hamiltonian(h.matrix, 2, N), atol=1e-14)


def test_hamiltonian_matches_basis_loop_qutrit():
    h = random_term(3, seed=1)
    assert np.allclose(build_hamiltonian(h, 3).matrix, loop_hamiltonian(h.matrix, 3, 3), atol=1e-14)


def test_embed_single_bond():
    h = ising()
    op = embed_term(h, 2, 3)
    assert np.allclose(op.matrix, np.kron(np.eye(2), h.matrix))
    with pytest.raises(ValidationError):
        embed_term(h, 3, 3)


def test_two_site_hamiltonian_is_the_term():
    h = random_term(2, seed=3)
    assert np.allclose(build_hamiltonian(h, 2).matrix, h.matrix)


def test_dense_operator_shape_checked():
    with pytest.raises(ValidationError):
        DenseOperator(3, 2, np.eye(4))


def test_dim_cap(monkeypatch):
    monkeypatch.setenv("GIBBSLINE_DIM_CAP", "64")
    check_dim(2, 6)
    with pytest.raises(DimensionCapError, match="64"):
        check_dim(2, 7)


def test_hermitian_expm_matches_taylor():
    rng = np.random.default_rng(0)
    A = random_hermitian(8, rng)
    assert np.allclose(hermitian_expm(A, -1.3).matrix, taylor_expm(A, -1.3), atol=1e-12)


def test_spectrum_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        spectrum(np.array([[0, 1], [0, 0]]))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_log_partition_function_matches_taylor_oracle(seed):
    h = random_term(2, seed=seed)
    for N in (2, 3, 5):
        assert log_partition_function(h, N, 0.7) == pytest.approx(log_z_taylor(h.matrix, 2, N, 0.7), abs=1e-11)


def test_free_chain_log_z():
    h = InteractionTerm(3, np.zeros((9, 9)))
    assert log_partition_function(h, 4, 2.0) == pytest.approx(4 * math.log(3), abs=1e-14)


def test_large_beta_stays_finite():
    # log-sum-exp keeps beta * E far beyond the exp range finite
    assert math.isfinite(log_partition_function(ising(), 6, 2000.0))
    assert log_partition_function(ising(), 6, 2000.0) == pytest.approx(2000.0 * 5 + math.log(2), rel=1e-12)


def test_sector_split_spectrum_matches_dense():
    # N = 9 exceeds the block-search threshold, exercising the rotated basis
    h, _ = tfim()
    e_fast = np.sort(chain_energies(h, 9))
    e_dense = np.linalg.eigvalsh(build_hamiltonian(h, 9).matrix)
    assert np.allclose(e_fast, e_dense, atol=1e-11)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_ising_ratio_is_transfer_matrix_value(beta):
    for l in (1, 4, 7):
        assert exact_ratio(ising(), l, beta) == pytest.approx(ising_ratio(beta), rel=1e-13)


def test_exact_ratio_free_chain():
    assert exact_ratio(InteractionTerm(2, np.zeros((4, 4))), 3, 1.0) == pytest.approx(2.0, rel=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), beta=st.floats(0.05, 3.0), l=st.integers(1, 5))
def test_ratio_envelope(seed, beta, l):
    # Z_{l+1}/Z_l = d <e^{-beta h_{l,l+1}}>-type average, so |log(ratio) - log d| <= beta ||h||
    h = random_term(2, seed=seed, norm=0.9)
    r = exact_ratio(h, l, beta)
    assert abs(math.log(r) - math.log(2)) <= beta * h.norm + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), N=st.integers(2, 5))
def test_hamiltonian_is_hermitian_with_norm_bound(seed, N):
    h = random_term(2, seed=seed)
    H = build_hamiltonian(h, N)
    assert H.is_hermitian()
    assert np.linalg.norm(H.matrix, 2) <= (N - 1) * h.norm + 1e-12


def test_pauli_x_field_term_accepted():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        InteractionTerm(2, 0.5 * np.kron(PAULI_X, np.eye(2)))


def test_block_search_keeps_imaginary_couplings():
    # X (x) Y has purely imaginary entries; they must still connect sectors
    m = 0.5 * np.kron(PAULI_X, np.array([[0, -1j], [1j, 0]])) + 0.3 * np.kron(PAULI_Z, np.eye(2))
    h = InteractionTerm(2, m)
    e_fast = np.sort(chain_energies(h, 10))
    assert np.allclose(e_fast, np.linalg.eigvalsh(build_hamiltonian(h, 10).matrix), atol=1e-11)
