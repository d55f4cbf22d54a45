"""Tests for the dense linear algebra core.

Derived expectations are computed by independent brute-force oracles
defined at the top of this file, never by the functions under test.
"""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqd import linalg


# ---------------------------------------------------------------- oracles


def kron_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Index-formula Kronecker product: out[ip+k, jq+l] = a[i,j] b[k,l]."""
    (m, n), (p, q) = a.shape, b.shape
    out = np.zeros((m * p, n * q), dtype=complex)
    for i in range(m):
        for j in range(n):
            for k in range(p):
                for ell in range(q):
                    out[i * p + k, j * q + ell] = a[i, j] * b[k, ell]
    return out


def taylor_expm_oracle(h: np.ndarray, scale: float, terms: int = 40) -> np.ndarray:
    """Power series for exp(-i*scale*h), valid for small norm."""
    a = -1j * scale * np.asarray(h, dtype=complex)
    out = np.eye(h.shape[0], dtype=complex)
    term = np.eye(h.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def embed_oracle(gate: np.ndarray, targets: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Full 2^n operator for a gate on arbitrary targets, built entry by entry.

    Walks every (row, col) pair, pulls the target bits out of each index
    (qubit 0 = most significant) and multiplies the gate entry with a
    delta on the untouched bits.  Slow and simple on purpose.
    """
    dim = 2**num_qubits
    out = np.zeros((dim, dim), dtype=complex)
    rest = [q for q in range(num_qubits) if q not in targets]

    def bit(index: int, qubit: int) -> int:
        return (index >> (num_qubits - 1 - qubit)) & 1

    for row in range(dim):
        for col in range(dim):
            if any(bit(row, q) != bit(col, q) for q in rest):
                continue
            gr = sum(bit(row, q) << (len(targets) - 1 - a) for a, q in enumerate(targets))
            gc = sum(bit(col, q) << (len(targets) - 1 - a) for a, q in enumerate(targets))
            out[row, col] = gate[gr, gc]
    return out


def random_complex(shape, rng) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ------------------------------------------------------------------ kron


def test_kron_matches_index_formula_oracle():
    rng = np.random.default_rng(7)
    a = random_complex((2, 2), rng)
    b = random_complex((3, 2), rng)
    assert linalg.max_abs_diff(linalg.kron(a, b), kron_oracle(a, b)) < 1e-14


def test_kron_three_factor_associativity():
    rng = np.random.default_rng(8)
    mats = [random_complex((2, 2), rng) for _ in range(3)]
    left = linalg.kron(linalg.kron(mats[0], mats[1]), mats[2])
    assert linalg.max_abs_diff(linalg.kron(*mats), left) < 1e-14


def test_kron_identity_examples():
    assert linalg.max_abs_diff(linalg.kron(linalg.ID2, linalg.ID2), np.eye(4)) == 0.0
    zz = linalg.kron(linalg.PAULI_Z, linalg.PAULI_Z)
    assert linalg.max_abs_diff(zz, np.diag([1, -1, -1, 1])) == 0.0


# ------------------------------------------------------------- herm_expm


def test_herm_expm_pauli_x_quarter_turn():
    # exp(-i pi/2 X) = -i X
    got = linalg.herm_expm(linalg.PAULI_X, np.pi / 2)
    assert linalg.max_abs_diff(got, -1j * linalg.PAULI_X) < 1e-14


def test_herm_expm_zero_scale_is_identity():
    rng = np.random.default_rng(3)
    a = random_complex((8, 8), rng)
    h = a + a.conj().T
    assert linalg.max_abs_diff(linalg.herm_expm(h, 0.0), np.eye(8)) < 1e-14


def test_herm_expm_matches_taylor_oracle():
    rng = np.random.default_rng(11)
    a = random_complex((6, 6), rng)
    h = (a + a.conj().T) / 4
    for scale in (0.05, 0.3, -0.7):
        exact = linalg.herm_expm(h, scale)
        assert linalg.max_abs_diff(exact, taylor_expm_oracle(h, scale)) < 1e-12


def test_herm_expm_rejects_non_hermitian():
    with pytest.raises(linalg.NotHermitian):
        linalg.herm_expm(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


def test_herm_expm_group_property_and_unitarity():
    rng = np.random.default_rng(5)
    a = random_complex((8, 8), rng)
    h = a + a.conj().T
    u1 = linalg.herm_expm(h, 0.4)
    u2 = linalg.herm_expm(h, 0.25)
    u12 = linalg.herm_expm(h, 0.65)
    assert linalg.max_abs_diff(u1 @ u2, u12) < 1e-12
    assert linalg.max_abs_diff(u1 @ u1.conj().T, np.eye(8)) < 1e-12


# --------------------------------------------------- apply_gate_to_state


def test_x_on_qubit0_is_msb():
    # |000> --X(q0)--> |100> = index 4; pins the bit-ordering convention
    out = linalg.apply_gate_to_state(linalg.basis_state(3, 0), linalg.PAULI_X, (0,))
    assert linalg.max_abs_diff(out, linalg.basis_state(3, 4)) == 0.0


def test_bitstring_index_convention():
    assert linalg.bitstring_index("101010") == 42
    assert linalg.bitstring_index("110") == 6


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=4),
    k=st.integers(min_value=1, max_value=2),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_apply_gate_matches_embedding_oracle(n, k, seed):
    k = min(k, n)
    rng = np.random.default_rng(seed)
    targets = tuple(rng.permutation(n)[:k].tolist())
    gate = random_complex((2**k, 2**k), rng)
    state = random_complex(2**n, rng)
    got = linalg.apply_gate_to_state(state, gate, targets)
    want = embed_oracle(gate, targets, n) @ state
    assert linalg.max_abs_diff(got, want) < 1e-12


def test_apply_gate_rejects_bad_targets():
    state = linalg.basis_state(2, 0)
    with pytest.raises(linalg.TargetOutOfRange):
        linalg.apply_gate_to_state(state, np.eye(4), (0, 0))
    with pytest.raises(linalg.TargetOutOfRange):
        linalg.apply_gate_to_state(state, linalg.ID2, (2,))
    with pytest.raises(linalg.DimensionMismatch):
        linalg.apply_gate_to_state(state, np.eye(4), (0,))


def test_apply_gate_norm_preserving_for_unitary():
    rng = np.random.default_rng(21)
    a = random_complex((4, 4), rng)
    u = np.linalg.qr(a)[0]
    state = random_complex(8, rng)
    state /= np.linalg.norm(state)
    out = linalg.apply_gate_to_state(state, u, (2, 0))
    assert abs(np.linalg.norm(out) - 1.0) < 1e-12


# ------------------------------------------------------------- utilities


def test_overlap_sq_bounds_and_symmetry():
    rng = np.random.default_rng(9)
    a = random_complex(8, rng)
    b = random_complex(8, rng)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    f = linalg.overlap_sq(a, b)
    assert 0.0 <= f <= 1.0 + 1e-12
    assert abs(f - linalg.overlap_sq(b, a)) < 1e-12
    assert abs(linalg.overlap_sq(a, a) - 1.0) < 1e-12


def test_overlap_sq_invariant_under_global_phase():
    rng = np.random.default_rng(10)
    a = random_complex(4, rng)
    b = random_complex(4, rng)
    assert abs(linalg.overlap_sq(a, b) - linalg.overlap_sq(a * np.exp(0.37j), b)) < 1e-12


def test_phase_aligned_recovers_reference():
    rng = np.random.default_rng(12)
    ref = random_complex((4, 4), rng)
    rotated = ref * np.exp(1.234j)
    assert linalg.max_abs_diff(linalg.phase_aligned(rotated, ref), ref) < 1e-12


def test_num_qubits_of():
    assert linalg.num_qubits_of(64) == 6
    with pytest.raises(linalg.DimensionMismatch):
        linalg.num_qubits_of(48)
