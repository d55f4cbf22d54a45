"""Dense linear algebra for small multi-qubit systems.

Conventions used everywhere in this package:

* Qubit 0 is the MOST significant bit of a computational basis index,
  so for three qubits the basis state |q0 q1 q2> = |110> has index 6.
* States are 1-D complex numpy arrays of length 2**n, density matrices
  are (2**n, 2**n) arrays; n is always inferred from the shape.
"""
from __future__ import annotations

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances


class DimensionMismatch(ValueError):
    """Operands do not have compatible power-of-two shapes."""


class NotHermitian(ValueError):
    """Matrix handed to a Hermitian-only routine fails the symmetry check."""


class TargetOutOfRange(IndexError):
    """Gate target indices repeat or fall outside the register."""


# Single-qubit constants, used all over the test-suite and circuit code.
ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

PAULI_BY_LETTER = {"I": ID2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def num_qubits_of(dim: int) -> int:
    """Return n with 2**n == dim, raising DimensionMismatch otherwise."""
    n = int(dim).bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two")
    return n


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more operators, left factor most significant."""
    if not ops:
        raise DimensionMismatch("kron of zero operators")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def basis_state(num_qubits: int, index: int) -> np.ndarray:
    """Computational basis ket |index> on num_qubits qubits."""
    dim = 2**num_qubits
    if not 0 <= index < dim:
        raise TargetOutOfRange(f"basis index {index} outside register of {num_qubits} qubits")
    state = np.zeros(dim, dtype=complex)
    state[index] = 1.0
    return state


def bitstring_index(bits: str) -> int:
    """Index of |bits>, qubit 0 written first: '101010' -> 42."""
    return int(bits, 2)


def herm_expm(h: np.ndarray, scale: float, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Unitary exp(-i * scale * h) of a Hermitian matrix via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {h.shape}")
    if np.max(np.abs(h - h.conj().T)) > tol.hermiticity:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    evals, evecs = np.linalg.eigh(h)
    phases = np.exp(-1j * scale * evals)
    return (evecs * phases) @ evecs.conj().T


def _check_targets(num_qubits: int, targets: tuple[int, ...]) -> None:
    if len(set(targets)) != len(targets):
        raise TargetOutOfRange(f"repeated gate targets {targets}")
    for t in targets:
        if not 0 <= t < num_qubits:
            raise TargetOutOfRange(f"target {t} outside register of {num_qubits} qubits")


def apply_gate_to_state(state: np.ndarray, gate: np.ndarray, targets: tuple[int, ...]) -> np.ndarray:
    """Apply a 2^k x 2^k gate to the given target qubits of a pure state.

    targets[0] is the most significant qubit of the gate's own basis.
    Never forms the full 2^n operator.
    """
    state = np.asarray(state, dtype=complex)
    n = num_qubits_of(state.shape[0])
    k = len(targets)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2**k, 2**k):
        raise DimensionMismatch(f"gate shape {gate.shape} does not act on {k} qubits")
    _check_targets(n, tuple(targets))

    psi = state.reshape((2,) * n)
    psi = np.moveaxis(psi, targets, range(k))
    psi = gate @ psi.reshape(2**k, -1)
    psi = np.moveaxis(psi.reshape((2,) * n), range(k), targets)
    return np.ascontiguousarray(psi).reshape(2**n)


def overlap_sq(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for two pure states."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"state shapes differ: {a.shape} vs {b.shape}")
    return float(np.abs(np.vdot(a, b)) ** 2)


def phase_aligned(u: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Multiply u by the global phase that best matches ref.

    Uses the largest-magnitude entry of ref as the anchor; if the
    corresponding entry of u vanishes the arrays genuinely differ and u
    is returned unchanged.
    """
    u = np.asarray(u, dtype=complex)
    ref = np.asarray(ref, dtype=complex)
    idx = np.unravel_index(np.argmax(np.abs(ref)), ref.shape)
    if abs(u[idx]) < 1e-300:
        return u
    phase = ref[idx] / u[idx]
    return u * (phase / abs(phase))


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Largest entrywise absolute difference."""
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
