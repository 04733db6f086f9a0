"""Heisenberg evolution under truncated Hamiltonians and the Lieb-Robinson bound.

The bound controls how much ``e^{itH} A e^{-itH}`` for ``A = h_{L,L+1}``
changes when ``H(s) = H_[1,L] + s h_{L,L+1}`` is replaced by its restriction
to the sites ``[L-l, L+1]``:

    ||Gamma_{H(s)}^t(A) - Gamma_{H_l(s)}^t(A)|| <= 2 ||A|| e^{C|t| - D l},

valid when ``l >= E |t| e^{2D}`` with ``C = 56 beta`` and ``E = 48 beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import DenseOperator, InteractionTerm, build_hamiltonian, check_dim, embed_term, operator_norm, spectrum
from .errors import ValidationError

OMEGA_TAIL_RTOL = 1e-14


@dataclass(frozen=True)
class LRBoundParams:
    beta: float
    D: float
    C: float = field(init=False)
    E: float = field(init=False)

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if self.D <= 0:
            raise ValidationError(f"D must be positive, got {self.D}")
        object.__setattr__(self, "C", 56.0 * self.beta)
        object.__setattr__(self, "E", 48.0 * self.beta)


def heisenberg_evolve(H, A, t: float):
    """``e^{itH} A e^{-itH}`` by exact conjugation in the eigenbasis of ``H``."""
    h = H.matrix if isinstance(H, DenseOperator) else np.asarray(H)
    a = A.matrix if isinstance(A, DenseOperator) else np.asarray(A)
    if h.shape != a.shape:
        raise ValidationError(f"H and A must have equal shapes, got {h.shape} and {a.shape}")
    if t == 0:
        out = np.array(a, dtype=complex)
    else:
        spec = spectrum(h)
        u, e = spec.eigenvectors, spec.eigenvalues
        phase = np.exp(1j * t * (e[:, None] - e[None, :]))
        out = u @ (phase * (u.conj().T @ a @ u)) @ u.conj().T
    if isinstance(H, DenseOperator):
        return DenseOperator(H.n_sites, H.d, out)
    return out


def _perturbed_hamiltonians(h: InteractionTerm, L: int, l: int, s: float):
    n = L + 1
    d = h.d
    check_dim(d, n, "perturbed chain")
    A = embed_term(h, L, n).matrix
    full = np.kron(build_hamiltonian(h, L).matrix, np.eye(d)) + s * A
    left = d ** (L - l - 1)
    local = np.kron(build_hamiltonian(h, l + 1).matrix, np.eye(d)) + s * embed_term(h, l + 1, l + 2).matrix
    truncated = np.kron(np.eye(left), local)
    return full, truncated, A


def truncation_error(h: InteractionTerm, L: int, l: int, s: float = 1.0, t: float = 0.0) -> float:
    """``||Gamma_{H(s)}^t(A) - Gamma_{H_l(s)}^t(A)||`` for ``A = h_{L,L+1}`` (spectral norm)."""
    if L < 2 or not 1 <= l <= L - 1:
        raise ValidationError(f"need L >= 2 and 1 <= l <= L-1, got L={L}, l={l}")
    if not 0.0 <= s <= 1.0:
        raise ValidationError(f"s must lie in [0, 1], got {s}")
    if t == 0:
        return 0.0
    full, truncated, A = _perturbed_hamiltonians(h, L, l, s)
    diff = heisenberg_evolve(full, A, t) - heisenberg_evolve(truncated, A, t)
    return operator_norm(diff)


def lr_bound(A_norm: float, params: LRBoundParams, t: float, l: int) -> tuple[float, bool]:
    """``(2 ||A|| e^{C|t| - D l}, l >= E |t| e^{2D})``; ignore the bound when invalid."""
    bound = 2.0 * A_norm * math.exp(params.C * abs(t) - params.D * l)
    valid = l >= params.E * abs(t) * math.exp(2.0 * params.D)
    return bound, valid


def _log_term(y: float, n: int) -> float:
    return n * math.log(y) - math.lgamma(n + 1)


def omega_star_bound(beta: float, x: float, k: int, n_terms: int = 64) -> float:
    """Partial sum of ``sum_{n >= ceil(k/2)} (6 x beta)^n / n!`` with a certified remainder.

    The neglected tail after ``n_terms`` terms is at most
    ``e^y y^m / m!`` (``y = 6 x beta``, ``m`` the first omitted index); a
    remainder above ``1e-14`` of the sum raises ``ValidationError``.
    """
    if x < 0:
        raise ValidationError(f"x must be >= 0, got {x}")
    if k < 0 or n_terms < 1:
        raise ValidationError(f"need k >= 0 and n_terms >= 1, got k={k}, n_terms={n_terms}")
    y = 6.0 * x * beta
    start = (k + 1) // 2
    if y == 0:
        return 1.0 if start == 0 else 0.0
    total = math.fsum(math.exp(_log_term(y, n)) for n in range(start, start + n_terms))
    remainder = math.exp(y + _log_term(y, start + n_terms))
    if remainder > OMEGA_TAIL_RTOL * total:
        raise ValidationError(
            f"n_terms={n_terms} leaves a remainder up to {remainder:.3e} (sum {total:.3e}); increase n_terms"
        )
    return total


@dataclass(frozen=True)
class DominancePoint:
    t: float
    D: float
    l: int
    error: float
    bound: float
    valid: bool

    @property
    def dominated(self) -> bool:
        return (not self.valid) or self.error <= self.bound


def dominance_table(
    h: InteractionTerm,
    L: int,
    beta: float,
    t_grid,
    D_grid,
    s: float = 1.0,
) -> list[DominancePoint]:
    """Measured truncation error against the bound on a ``(t, D, l)`` grid, ``l = 1 .. L-1``."""
    a_norm = h.norm
    rows = []
    errors = {(t, l): truncation_error(h, L, l, s, t) for t in t_grid for l in range(1, L)}
    for t in t_grid:
        for D in D_grid:
            params = LRBoundParams(beta, D)
            for l in range(1, L):
                bound, valid = lr_bound(a_norm, params, t, l)
                rows.append(DominancePoint(t, D, l, errors[(t, l)], bound, valid))
    return rows
