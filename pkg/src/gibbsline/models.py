"""Builtin interaction terms and the JSON model-file format.

A model file is a JSON object::

    {"d": 2, "matrix": [[[re, im], ...], ...]}

where ``matrix`` is the ``d**2 x d**2`` interaction in site-1-major order,
each entry given as a ``[re, im]`` pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain import InteractionTerm, operator_norm
from .errors import ValidationError

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

BUILTIN_MODELS = ("free", "ising", "tfim", "heisenberg")


@dataclass(frozen=True)
class ResolvedModel:
    """An interaction term together with how it was obtained."""

    name: str
    params: dict
    term: InteractionTerm
    scale: float = 1.0  # factor applied to reach ||h|| <= 1


def free(d: int = 2) -> InteractionTerm:
    return InteractionTerm(d=d, matrix=np.zeros((d * d, d * d)))


def ising(coupling: float = 1.0) -> InteractionTerm:
    """Classical Ising bond ``-coupling Z(x)Z`` with ``|coupling| <= 1``."""
    return InteractionTerm(d=2, matrix=-coupling * np.kron(PAULI_Z, PAULI_Z))


def tfim_raw(J: float = 1.0, g: float = 1.0) -> np.ndarray:
    """``-(J ZZ + g (XI + IX)/2)``; the field is split evenly over the two bonds of a site."""
    return -(J * np.kron(PAULI_Z, PAULI_Z) + 0.5 * g * (np.kron(PAULI_X, ID2) + np.kron(ID2, PAULI_X)))


def tfim(J: float = 1.0, g: float = 1.0) -> tuple[InteractionTerm, float]:
    """Transverse-field Ising term rescaled to unit norm when it exceeds 1.

    Returns the term and the scale factor that was applied.
    """
    m = tfim_raw(J, g)
    norm = operator_norm(m)
    scale = 1.0 / norm if norm > 1.0 else 1.0
    return InteractionTerm(d=2, matrix=m * scale), scale


def heisenberg() -> InteractionTerm:
    m = (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y) + np.kron(PAULI_Z, PAULI_Z)) / 3.0
    return InteractionTerm(d=2, matrix=m)


def resolve_builtin(name: str, *, d: int = 2, J: float = 1.0, g: float = 1.0, coupling: float = 1.0) -> ResolvedModel:
    if name == "free":
        return ResolvedModel("free", {"d": d}, free(d))
    if name == "ising":
        return ResolvedModel("ising", {"coupling": coupling}, ising(coupling))
    if name == "tfim":
        term, scale = tfim(J, g)
        return ResolvedModel("tfim", {"J": J, "g": g}, term, scale)
    if name == "heisenberg":
        return ResolvedModel("heisenberg", {}, heisenberg())
    raise ValidationError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")


def random_term(d: int = 2, seed: int = 0, norm: float = 1.0) -> InteractionTerm:
    """Random Hermitian term scaled to the given spectral norm."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    m = a + a.conj().T
    m *= norm / operator_norm(m)
    return InteractionTerm(d=d, matrix=m)


def term_to_json(h: InteractionTerm) -> dict:
    return {
        "d": h.d,
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in h.matrix],
    }


def parse_model_dict(data: dict) -> InteractionTerm:
    if not isinstance(data, dict) or "d" not in data or "matrix" not in data:
        raise ValidationError("model file must be a JSON object with fields 'd' and 'matrix'")
    d = data["d"]
    if not isinstance(d, int) or isinstance(d, bool):
        raise ValidationError(f"'d' must be an integer, got {d!r}")
    try:
        arr = np.asarray(data["matrix"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"'matrix' is not a numeric array of [re, im] pairs: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValidationError(f"'matrix' must be a d^2 x d^2 array of [re, im] pairs, got shape {arr.shape}")
    return InteractionTerm(d=d, matrix=arr[..., 0] + 1j * arr[..., 1])


def parse_model_file(path) -> InteractionTerm:
    """Load and validate an interaction term from a JSON model file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"model file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file {path} is not valid JSON: {exc}") from exc
    return parse_model_dict(data)
