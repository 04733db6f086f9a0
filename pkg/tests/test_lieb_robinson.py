import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsline.errors import ValidationError
from gibbsline.lieb_robinson import (
    LRBoundParams,
    dominance_table,
    heisenberg_evolve,
    lr_bound,
    omega_star_bound,
    truncation_error,
)
from gibbsline.models import heisenberg, random_term, tfim

from oracles import commutator_series, random_hermitian


def test_params_constants():
    p = LRBoundParams(0.5, 1.0)
    assert (p.C, p.E) == (28.0, 24.0)
    with pytest.raises(ValidationError):
        LRBoundParams(1.0, 0.0)


def test_evolve_at_zero_time_is_identity_map():
    rng = np.random.default_rng(0)
    H, A = random_hermitian(8, rng), random_hermitian(8, rng)
    assert np.array_equal(heisenberg_evolve(H, A, 0.0), A)


def test_evolve_matches_commutator_series():
    rng = np.random.default_rng(1)
    H, A = random_hermitian(8, rng), random_hermitian(8, rng)
    assert np.allclose(heisenberg_evolve(H, A, 0.3), commutator_series(H, A, 0.3), atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), t=st.floats(-5.0, 5.0))
def test_evolution_preserves_norm(seed, t):
    rng = np.random.default_rng(seed)
    H, A = random_hermitian(8, rng, 3.0), random_hermitian(8, rng)
    assert np.linalg.norm(heisenberg_evolve(H, A, t), 2) == pytest.approx(np.linalg.norm(A, 2), rel=1e-10)


def test_truncation_error_trivial_cases():
    h = tfim()[0]
    assert truncation_error(h, 5, 2, t=0.0) == 0.0
    assert truncation_error(h, 5, 4, t=0.7) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValidationError):
        truncation_error(h, 5, 5, t=0.1)


def test_truncation_error_decreases_with_radius():
    errs = [truncation_error(tfim()[0], 7, l, t=0.5) for l in range(1, 7)]
    assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))
    assert errs[0] > 1e-3
    assert all(e <= 2 * tfim()[0].norm + 1e-12 for e in errs)


def test_lr_bound_example():
    bound, valid = lr_bound(1.0, LRBoundParams(1.0, 1.0), 0.01, 4)
    assert valid
    assert bound == pytest.approx(2 * math.exp(0.56 - 4))
    assert bound == pytest.approx(0.0642, abs=1e-4)
    _, valid = lr_bound(1.0, LRBoundParams(1.0, 1.0), 0.01, 3)
    assert not valid


def test_lr_bound_at_zero_time():
    for l in range(1, 8):
        assert lr_bound(0.7, LRBoundParams(2.0, 0.5), 0.0, l) == (pytest.approx(1.4 * math.exp(-0.5 * l)), True)


@pytest.mark.parametrize("h", [tfim()[0], heisenberg(), random_term(2, seed=4)], ids=["tfim", "heis", "rand"])
def test_bound_dominates_on_grid(h):
    rows = dominance_table(h, 6, 1.0, [0.0, 0.005, 0.01, 0.02], [0.5, 1.0])
    assert all(r.dominated for r in rows)
    assert any(r.valid and r.t > 0 for r in rows)


def test_omega_star_examples():
    assert omega_star_bound(1.0, 0.1, 0) == pytest.approx(math.exp(0.6), rel=1e-14)
    assert omega_star_bound(1.0, 0.0, 3) == 0.0
    expected = math.exp(0.6) - (1 + 0.6 + 0.18)
    assert omega_star_bound(1.0, 0.1, 6, 20) == pytest.approx(expected, rel=1e-13)


def test_omega_star_needs_enough_terms():
    with pytest.raises(ValidationError, match="n_terms"):
        omega_star_bound(1.0, 2.0, 0, 5)


@settings(max_examples=30)
@given(beta=st.floats(0.1, 2.0), x=st.floats(0.0, 1.0), k=st.integers(0, 12))
def test_omega_star_monotone_and_bounded(beta, x, k):
    a = omega_star_bound(beta, x, k, 120)
    b = omega_star_bound(beta, x, k + 1, 120)
    assert b <= a * (1 + 1e-14)
    assert a <= math.exp(6 * x * beta) * (1 + 1e-14)
