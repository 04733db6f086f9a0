"""Exact finite-chain machinery: interaction terms, dense Hamiltonians, partition functions.

Index convention used throughout the package: a two-site term ``h`` is a
``d**2 x d**2`` matrix whose row index is ``r1 * d + r2`` and column index is
``s1 * d + s2``, i.e. site 1 is the major (slow) index.  Operators on ``N``
sites use the same site-1-major ordering, which is exactly what ``np.kron``
produces when factors are listed left to right from site 1.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from .errors import DimensionCapError, ValidationError

DEFAULT_DIM_CAP = 2**16
DIM_CAP_ENV = "GIBBSLINE_DIM_CAP"

HERMITIAN_TOL = 1e-12
SYMMETRIZE_TOL = 1e-9
NORM_SLACK = 1e-9

# below this dimension the block search costs more than it saves
_BLOCK_SEARCH_MIN_DIM = 512


def dim_cap() -> int:
    """Current cap on ``d**N`` for dense objects (env override honoured)."""
    raw = os.environ.get(DIM_CAP_ENV)
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(float(raw))
    except ValueError as exc:
        raise ValidationError(f"{DIM_CAP_ENV}={raw!r} is not an integer") from exc
    if cap < 1:
        raise ValidationError(f"{DIM_CAP_ENV} must be positive, got {cap}")
    return cap


def check_dim(d: int, n_sites: int, what: str = "operator") -> int:
    dim = d**n_sites
    cap = dim_cap()
    if dim > cap:
        raise DimensionCapError(
            f"{what} on {n_sites} sites has dimension {d}^{n_sites} = {dim}, "
            f"above the cap {cap} (set {DIM_CAP_ENV} to raise it)"
        )
    return dim


def operator_norm(matrix: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


@dataclass(frozen=True, eq=False)
class InteractionTerm:
    """Two-site Hermitian interaction ``h`` with ``||h|| <= 1``.

    Near-Hermitian input (deviation up to ``SYMMETRIZE_TOL``) is replaced by
    ``(h + h^dag) / 2`` with a warning; anything further off is rejected.
    """

    d: int
    matrix: np.ndarray

    def __post_init__(self):
        d = int(self.d)
        if d < 2:
            raise ValidationError(f"local dimension must be >= 2, got {d}")
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (d * d, d * d):
            raise ValidationError(
                f"interaction matrix must be {d * d}x{d * d} for d={d}, got shape {m.shape}"
            )
        if not np.all(np.isfinite(m)):
            raise ValidationError("interaction matrix contains non-finite entries")
        asym = float(np.max(np.abs(m - m.conj().T)))
        if asym > SYMMETRIZE_TOL:
            raise ValidationError(f"interaction matrix is not Hermitian (max |h - h^dag| = {asym:.3e})")
        if asym > HERMITIAN_TOL:
            warnings.warn(
                f"interaction matrix symmetrized (max |h - h^dag| = {asym:.3e})",
                stacklevel=3,
            )
        m = 0.5 * (m + m.conj().T)
        norm = operator_norm(m)
        if norm > 1.0 + NORM_SLACK:
            raise ValidationError(f"interaction norm ||h|| = {norm:.6g} exceeds 1")
        m.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, matrix) -> InteractionTerm:
        matrix = np.asarray(matrix)
        d = int(round(np.sqrt(matrix.shape[0])))
        return cls(d=d, matrix=matrix)

    @property
    def norm(self) -> float:
        return operator_norm(self.matrix)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    @property
    def is_real(self) -> bool:
        return not np.any(self.matrix.imag)

    @property
    def is_diagonal(self) -> bool:
        return not np.any(self.matrix - np.diag(np.diag(self.matrix)))

    def tensor(self) -> np.ndarray:
        """The term as a ``(d, d, d, d)`` array with legs ``r1 r2 s1 s2``."""
        d = self.d
        return self.matrix.reshape(d, d, d, d)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Explicit ``d**n x d**n`` matrix on a chain segment of ``n_sites`` sites."""

    n_sites: int
    d: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = self.d**self.n_sites
        if self.matrix.shape != (dim, dim):
            raise ValidationError(
                f"matrix shape {self.matrix.shape} does not match d^n = {self.d}^{self.n_sites} = {dim}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)))
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol * scale)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigendecomposition ``A = U diag(eigenvalues) U^dag`` of a Hermitian operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def function(self, fn) -> np.ndarray:
        """Matrix function ``U diag(fn(eigenvalues)) U^dag``."""
        u = self.eigenvectors
        return (u * fn(self.eigenvalues)) @ u.conj().T


def _as_matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, DenseOperator) else np.asarray(op)


def _require_hermitian(matrix: np.ndarray, tol: float = 1e-10) -> None:
    scale = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
    dev = float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0))
    if dev > tol * scale:
        raise ValidationError(f"operator is not Hermitian (max |A - A^dag| = {dev:.3e})")


def spectrum(op) -> Spectrum:
    """Diagonalize a Hermitian operator (``DenseOperator`` or array)."""
    m = _as_matrix(op)
    _require_hermitian(m)
    m = 0.5 * (m + m.conj().T)
    w, u = np.linalg.eigh(m)
    return Spectrum(eigenvalues=w, eigenvectors=u)


def embed_term(h: InteractionTerm, i: int, N: int) -> DenseOperator:
    """``I^(i-1) (x) h (x) I^(N-i-1)`` for the bond between sites ``i`` and ``i+1`` (1-based)."""
    if not 1 <= i <= N - 1:
        raise ValidationError(f"bond index i={i} outside 1..{N - 1} for N={N}")
    check_dim(h.d, N)
    left = np.eye(h.d ** (i - 1))
    right = np.eye(h.d ** (N - i - 1))
    return DenseOperator(N, h.d, np.kron(np.kron(left, h.matrix), right))


def hamiltonian_sparse(h: InteractionTerm, N: int) -> sp.csr_matrix:
    """Sparse ``H_[1,N]`` (real dtype when ``h`` is real)."""
    check_dim(h.d, N)
    d = h.d
    hm = h.matrix.real if h.is_real else h.matrix
    hm = sp.csr_matrix(hm)
    H = sp.csr_matrix((d**N, d**N), dtype=hm.dtype)
    for i in range(1, N):
        term = sp.kron(sp.identity(d ** (i - 1), format="csr"), hm, format="csr")
        term = sp.kron(term, sp.identity(d ** (N - i - 1), format="csr"), format="csr")
        H = H + term
    H.eliminate_zeros()
    return H


def build_hamiltonian(h: InteractionTerm, N: int) -> DenseOperator:
    """Open-chain Hamiltonian ``H_[1,N] = sum_i h_{i,i+1}``; zero operator when ``N == 1``."""
    if N < 1:
        raise ValidationError(f"chain length must be >= 1, got {N}")
    check_dim(h.d, N)
    if N == 1:
        return DenseOperator(1, h.d, np.zeros((h.d, h.d), dtype=complex))
    H = hamiltonian_sparse(h, N).toarray().astype(complex)
    return DenseOperator(N, h.d, H)


def hermitian_expm(A, c: float) -> DenseOperator:
    """``exp(c * A)`` for Hermitian ``A`` through its eigendecomposition."""
    spec = spectrum(A)
    out = spec.function(lambda w: np.exp(c * w))
    if isinstance(A, DenseOperator):
        return DenseOperator(A.n_sites, A.d, out)
    n = np.asarray(A).shape[0]
    return DenseOperator(1, n, out)


def block_eigenvalues(H: sp.spmatrix) -> np.ndarray:
    """All eigenvalues of a sparse Hermitian matrix.

    The matrix is split into the connected components of its sparsity graph
    (conserved-quantity sectors show up this way) and each block is
    diagonalized densely.  The result is exact up to LAPACK rounding.
    """
    H = sp.csr_matrix(H)
    n = H.shape[0]
    if n < _BLOCK_SEARCH_MIN_DIM:
        return np.linalg.eigvalsh(H.toarray())
    n_comp, labels = connected_components(abs(H), directed=False)
    if n_comp == 1:
        return np.linalg.eigvalsh(H.toarray())
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(n_comp + 1))
    out = []
    for k in range(n_comp):
        idx = order[bounds[k] : bounds[k + 1]]
        if idx.size == 1:
            out.append(np.atleast_1d(H[idx[0], idx[0]]).real)
            continue
        block = H[idx][:, idx].toarray()
        out.append(np.linalg.eigvalsh(block))
        del block
    return np.concatenate(out)


def _sector_basis_term(h: InteractionTerm) -> InteractionTerm:
    """Rotate ``h`` by ``U (x) U`` so that its one-site part is diagonal.

    The spectrum of ``H_[1,N]`` is unchanged, but conserved quantities such as
    the spin-flip parity of the transverse-field Ising chain become visible as
    disconnected blocks of the sparsity graph.
    """
    d = h.d
    t = h.tensor()
    one_site = np.einsum("abcb->ac", t) + np.einsum("abad->bd", t)
    if np.allclose(one_site, one_site[0, 0] * np.eye(d), atol=1e-12):
        return h
    _, u = np.linalg.eigh(one_site)
    uu = np.kron(u, u)
    m = uu.conj().T @ h.matrix @ uu
    m[np.abs(m) < 1e-15] = 0.0
    return InteractionTerm(d=d, matrix=0.5 * (m + m.conj().T))


def _largest_block(H: sp.spmatrix) -> int:
    _, labels = connected_components(abs(H), directed=False)
    return int(np.bincount(labels).max())


def chain_energies(h: InteractionTerm, N: int) -> np.ndarray:
    """Full spectrum of ``H_[1,N]`` (unsorted across sectors)."""
    if N < 1:
        raise ValidationError(f"chain length must be >= 1, got {N}")
    check_dim(h.d, N)
    if N == 1 or h.is_zero:
        return np.zeros(h.d**N)
    H = hamiltonian_sparse(h, N)
    if H.shape[0] >= _BLOCK_SEARCH_MIN_DIM:
        rotated = _sector_basis_term(h)
        if rotated is not h:
            H_rot = hamiltonian_sparse(rotated, N)
            if _largest_block(H_rot) < _largest_block(H):
                H = H_rot
    return block_eigenvalues(H)


def log_partition_function(h: InteractionTerm, N: int, beta: float) -> float:
    """``log Z_N = log Tr exp(-beta H_[1,N])`` evaluated with log-sum-exp."""
    if beta < 0:
        raise ValidationError(f"beta must be nonnegative, got {beta}")
    if N == 0:
        return 0.0
    energies = chain_energies(h, N)
    return float(logsumexp(-beta * energies))


def exact_ratio(h: InteractionTerm, l: int, beta: float) -> float:
    """``Z_{l+1} / Z_l`` by exact diagonalization."""
    if l < 1:
        raise ValidationError(f"l must be >= 1, got {l}")
    return float(np.exp(log_partition_function(h, l + 1, beta) - log_partition_function(h, l, beta)))
