"""Parameterized ansatz circuits for the restart loop.

Two families: a number-conserving circuit built from two-qubit A blocks
over a fixed brick-wall layout, and a single-parameter propagator gate
exp(-i theta H) used as an idealized reference ansatz.

The brick-wall layout is a versioned constant.  With n qubits and p
particles the circuit carries C(n, p) - 1 A blocks, two angles each,
which matches the real projective dimension of the normalized p-particle
sector (2 C(n, p) - 2), so the family is dimension-exact for the sector
it explores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, make_gate
from .config import DEFAULT_TIMINGS, NS_PER_MS, GateTimings
from .model import PauliHamiltonian, pauli_to_dense
from .scheduler import schedule

NUMBER_CONSERVING = "number_conserving"
ORACLE = "oracle"

BRICK_WALL_V1 = "brick-wall-v1"


class ParameterCountMismatch(ValueError):
    pass


@dataclass(frozen=True)
class AnsatzSpec:
    kind: str
    num_qubits: int
    num_particles: int
    hamiltonian: PauliHamiltonian | None = None
    layout: str = BRICK_WALL_V1

    def __post_init__(self):
        if self.kind not in (NUMBER_CONSERVING, ORACLE):
            raise ValueError(f"unknown ansatz kind {self.kind!r}")
        if not 0 < self.num_particles < self.num_qubits:
            raise ValueError(
                f"need 0 < particles < qubits, got {self.num_particles}/{self.num_qubits}"
            )
        if 2 * (self.num_particles - 1) >= self.num_qubits:
            raise ValueError("alternating preparation needs 2*particles <= qubits + 1")
        if self.kind == ORACLE:
            if self.hamiltonian is None:
                raise ValueError("oracle ansatz needs a Hamiltonian")
            if self.hamiltonian.num_qubits != self.num_qubits:
                raise ValueError("Hamiltonian size does not match qubit count")

    @property
    def num_parameters(self) -> int:
        if self.kind == ORACLE:
            return 1
        return 2 * (math.comb(self.num_qubits, self.num_particles) - 1)


def number_conserving_spec(num_qubits: int, num_particles: int) -> AnsatzSpec:
    return AnsatzSpec(NUMBER_CONSERVING, num_qubits, num_particles)


def oracle_spec(ham: PauliHamiltonian, num_particles: int | None = None) -> AnsatzSpec:
    if num_particles is None:
        num_particles = ham.num_qubits // 2
    return AnsatzSpec(ORACLE, ham.num_qubits, num_particles, hamiltonian=ham)


def cdw_qubits(num_qubits: int, num_particles: int) -> tuple[int, ...]:
    """Qubits flipped to prepare the alternating |1010...> filling."""
    qubits = tuple(range(0, 2 * num_particles, 2))
    if qubits and qubits[-1] >= num_qubits:
        raise ValueError(f"{num_particles} particles do not alternate on {num_qubits} qubits")
    return qubits


def cdw_index(num_qubits: int, num_particles: int) -> int:
    index = 0
    for q in cdw_qubits(num_qubits, num_particles):
        index |= 1 << (num_qubits - 1 - q)
    return index


def brick_wall_pairs(num_qubits: int, num_blocks: int) -> list[tuple[int, int]]:
    """First num_blocks pairs of the alternating even/odd brick pattern."""
    even_row = [(q, q + 1) for q in range(0, num_qubits - 1, 2)]
    odd_row = [(q, (q + 1) % num_qubits) for q in range(1, num_qubits, 2)]
    pairs: list[tuple[int, int]] = []
    row = 0
    while len(pairs) < num_blocks:
        source = even_row if row % 2 == 0 else odd_row
        if not source:
            raise ValueError(f"cannot tile {num_qubits} qubits")
        pairs.extend(source)
        row += 1
    return pairs[:num_blocks]


def build_ansatz_circuit(
    spec: AnsatzSpec,
    params: np.ndarray,
    timings: GateTimings = DEFAULT_TIMINGS,
) -> Circuit:
    params = np.asarray(params, dtype=float)
    if params.shape != (spec.num_parameters,):
        raise ParameterCountMismatch(
            f"{spec.kind} ansatz takes {spec.num_parameters} parameters, got {params.shape}"
        )
    gates: list[Gate] = [
        make_gate("X", (q,), (), timings)
        for q in cdw_qubits(spec.num_qubits, spec.num_particles)
    ]
    if spec.kind == ORACLE:
        dense = pauli_to_dense(spec.hamiltonian)
        gates.append(
            make_gate(
                "ORACLE",
                tuple(range(spec.num_qubits)),
                (float(params[0]),),
                timings,
                hermitian=dense,
            )
        )
    else:
        num_blocks = spec.num_parameters // 2
        for i, (a, b) in enumerate(brick_wall_pairs(spec.num_qubits, num_blocks)):
            theta, phi = float(params[2 * i]), float(params[2 * i + 1])
            gates.append(make_gate("A", (a, b), (theta, phi), timings))
    return Circuit(spec.num_qubits, gates)


def ansatz_duration_ms(spec: AnsatzSpec, timings: GateTimings = DEFAULT_TIMINGS) -> float:
    """Scheduled wall-clock of the ansatz preparation circuit."""
    circuit = build_ansatz_circuit(spec, np.zeros(spec.num_parameters), timings)
    return schedule(circuit).total_duration_ms


def oracle_duration_ms(timings: GateTimings = DEFAULT_TIMINGS) -> float:
    return timings.oracle_ns / NS_PER_MS
