"""Reference computations that share no code with the package.

They trade speed for transparency: explicit basis loops, truncated Taylor
and commutator series, closed forms and plain quadrature.
"""

import itertools
import math

import numpy as np
from scipy import integrate


def loop_hamiltonian(hmat, d, N):
    """``sum_i h_{i,i+1}`` assembled entry by entry over the product basis."""
    dim = d**N
    H = np.zeros((dim, dim), dtype=complex)
    states = list(itertools.product(range(d), repeat=N))
    index = {s: k for k, s in enumerate(states)}
    for i in range(N - 1):
        for s in states:
            col = index[s]
            a = s[i] * d + s[i + 1]
            for b in range(d * d):
                amp = hmat[b, a]
                if amp == 0:
                    continue
                t = list(s)
                t[i], t[i + 1] = divmod(b, d)
                H[index[tuple(t)], col] += amp
    return H


def taylor_expm(A, c, order=80):
    """``exp(c A)`` by scaling and squaring of a truncated Taylor series."""
    A = np.asarray(A, dtype=complex) * c
    norm = np.abs(A).sum(axis=1).max()
    k = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0.5 else 0
    B = A / 2**k
    out = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for n in range(1, order):
        term = term @ B / n
        out = out + term
    for _ in range(k):
        out = out @ out
    return out


def log_z_taylor(hmat, d, N, beta):
    return math.log(np.trace(taylor_expm(loop_hamiltonian(hmat, d, N), -beta)).real)


def ising_ratio(beta, coupling=1.0):
    """Open-chain transfer-matrix result ``Z_{l+1}/Z_l = 2 cosh(beta coupling)``."""
    return 2.0 * math.cosh(beta * coupling)


def ising_free_energy(beta, coupling=1.0):
    return -math.log(2.0 * math.cosh(beta * coupling)) / beta


def commutator_series(H, A, t, order=30):
    """``sum_k (it)^k ad_H^k(A) / k!``."""
    out = np.array(A, dtype=complex)
    term = np.array(A, dtype=complex)
    for k in range(1, order + 1):
        term = 1j * t * (H @ term - term @ H) / k
        out = out + term
    return out


def kernel_fourier(beta, omega, T=60.0):
    """``int f_beta(t) cos(w t) dt`` by adaptive quadrature of the closed-form time kernel."""

    def f(t):
        x = math.pi * t / beta
        return (2 / (beta * math.pi)) * math.log((math.exp(x) + 1) / (math.exp(x) - 1)) if x < 700 else 0.0

    val, _ = integrate.quad(lambda t: f(t) * math.cos(omega * t), 0, T, limit=400, epsabs=1e-13)
    return 2 * val


def phi_direct(H, V, beta):
    """``Phi^H(V)`` through the gap filter written out element by element."""
    w, u = np.linalg.eigh(H)
    Vt = u.conj().T @ V @ u
    out = np.zeros_like(Vt)
    for j in range(len(w)):
        for k in range(len(w)):
            x = beta * (w[j] - w[k]) / 2
            out[j, k] = Vt[j, k] * (1.0 if x == 0 else math.tanh(x) / x)
    return u @ out @ u.conj().T


def dyson_eta(H0, V, beta, order=3, grid=401):
    """Time-ordered series ``I + sum_k c^k int_{s_1 > ... > s_k} G(s_1)...G(s_k)``, ``c = -beta/2``.

    The nested integrals are built as cumulative Simpson integrals on a grid.
    """
    s = np.linspace(0.0, 1.0, grid)
    G = np.array([phi_direct(H0 + x * V, V, beta) for x in s])
    c = -beta / 2
    dim = H0.shape[0]
    nested = np.broadcast_to(np.eye(dim, dtype=complex), (grid, dim, dim))
    eta = np.eye(dim, dtype=complex)
    for _ in range(order):
        integrand = np.einsum("sij,sjk->sik", G, nested)
        # cumulative_simpson is real-only
        re = integrate.cumulative_simpson(integrand.real, x=s, axis=0, initial=0)
        im = integrate.cumulative_simpson(integrand.imag, x=s, axis=0, initial=0)
        nested = re + 1j * im
        eta = eta + c * nested[-1]
        c *= -beta / 2
    return eta


def random_hermitian(dim, rng, norm=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a + a.conj().T
    return m * norm / np.linalg.norm(m, 2)
