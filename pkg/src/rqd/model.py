"""Interacting Aubry-Andre chain and its qubit encoding.

The model is a 1-D lattice of spinless fermions on a periodic ring:
nearest-neighbour hopping, an incommensurate cosine on-site potential
and a nearest-neighbour density-density interaction.  Sites are
1-indexed; site k maps to qubit k-1 under the Jordan-Wigner transform,
and qubit 0 is the most significant bit of a basis index, so the
half-filled starting product state |101010> occupies the odd sites.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import DEFAULT_TOLERANCES
from . import linalg

ONE_INDEXED = "one_indexed"
ZERO_INDEXED = "zero_indexed"


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the interacting Aubry-Andre ring.

    modulation is the irrational wave ratio of the cosine potential and
    disorder_phase its offset.  site_indexing controls whether the
    cosine argument counts sites from 1 (default) or from 0; the choice
    shifts individual on-site energies but not the statistics over
    random phases.
    """

    num_sites: int
    hopping: float = 1.0
    disorder: float = 4.0
    interaction: float = 4.0
    modulation: float = math.sqrt(2.0)
    disorder_phase: float = 0.0
    site_indexing: str = ONE_INDEXED

    def __post_init__(self) -> None:
        if self.num_sites < 2:
            raise ValueError("need at least two sites")
        if self.site_indexing not in (ONE_INDEXED, ZERO_INDEXED):
            raise ValueError(f"unknown site_indexing {self.site_indexing!r}")

    def onsite_energy(self, site: int) -> float:
        """Cosine potential at 1-indexed site k."""
        k = site if self.site_indexing == ONE_INDEXED else site - 1
        return self.disorder * math.cos(2.0 * math.pi * self.modulation * k + self.disorder_phase)


# A single creation/annihilation factor: (site, True for creation).
FermionOp = tuple[int, bool]


@dataclass(frozen=True)
class FermionTerm:
    coeff: float
    ops: tuple[FermionOp, ...]


@dataclass
class FermionHamiltonian:
    num_sites: int
    terms: list[FermionTerm] = field(default_factory=list)


def build_aubry_andre(params: ModelParams) -> FermionHamiltonian:
    """Second-quantized Hamiltonian of the ring.

    Emits hopping terms bond by bond, then on-site terms, then
    interaction terms; later stages rely on this ordering.  Terms whose
    coefficient is exactly zero are dropped.  On two sites the k=1 and
    k=2 bonds coincide; both are kept and simply add up.
    """
    n = params.num_sites
    ham = FermionHamiltonian(num_sites=n)

    def wrap(site: int) -> int:
        return (site - 1) % n + 1

    def add(coeff: float, ops: tuple[FermionOp, ...]) -> None:
        if coeff != 0.0:
            ham.terms.append(FermionTerm(coeff, ops))

    for k in range(1, n + 1):
        a, b = k, wrap(k + 1)
        add(-params.hopping, ((a, True), (b, False)))
        add(-params.hopping, ((b, True), (a, False)))
    for k in range(1, n + 1):
        add(params.onsite_energy(k), ((k, True), (k, False)))
    for k in range(1, n + 1):
        b = wrap(k + 1)
        add(params.interaction, ((k, True), (k, False), (b, True), (b, False)))
    return ham


# ------------------------------------------------------------ Pauli layer


@dataclass(frozen=True)
class PauliString:
    """Real coefficient times a tensor product of X/Y/Z factors.

    paulis maps qubit index to letter; identity factors are omitted.
    """

    coeff: float
    paulis: tuple[tuple[int, str], ...]

    def factor_map(self) -> dict[int, str]:
        return dict(self.paulis)

    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.paulis)


@dataclass
class PauliHamiltonian:
    num_qubits: int
    strings: list[PauliString] = field(default_factory=list)
    offset: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "strings": [
                {"coeff": s.coeff, "paulis": {str(q): p for q, p in s.paulis}}
                for s in self.strings
            ],
            "offset": self.offset,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json_dict(cls, data: dict) -> "PauliHamiltonian":
        strings = []
        for raw in data["strings"]:
            paulis = tuple(sorted((int(q), p) for q, p in raw["paulis"].items()))
            strings.append(PauliString(float(raw["coeff"]), paulis))
        return cls(int(data["num_qubits"]), strings, float(data.get("offset", 0.0)))

    @classmethod
    def from_json(cls, text: str) -> "PauliHamiltonian":
        return cls.from_json_dict(json.loads(text))


# Single-qubit products: (left, right) -> (phase, letter).
_PAULI_MUL = {
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


def _mul_factor(left: str, right: str) -> tuple[complex, str]:
    if left == "I":
        return 1.0, right
    if right == "I":
        return 1.0, left
    if left == right:
        return 1.0, "I"
    return _PAULI_MUL[(left, right)]


def _mul_strings(a: dict[int, str], b: dict[int, str]) -> tuple[complex, dict[int, str]]:
    """Product of two Pauli factor maps with accumulated phase."""
    phase = 1.0 + 0j
    out = dict(a)
    for q, letter in b.items():
        ph, combined = _mul_factor(out.get(q, "I"), letter)
        phase *= ph
        if combined == "I":
            out.pop(q, None)
        else:
            out[q] = combined
    return phase, out


def _ladder_paulis(site: int, dagger: bool) -> list[tuple[complex, dict[int, str]]]:
    """Jordan-Wigner image of a_k or a_k^dag as two Pauli strings.

    a_k -> (prod_{j<k} Z_j) (X + iY)/2 on qubit k-1; the dagger flips
    the sign of the Y part.
    """
    qubit = site - 1
    tail = {j: "Z" for j in range(qubit)}
    sign = -1j if dagger else 1j
    return [
        (0.5, {**tail, qubit: "X"}),
        (0.5 * sign, {**tail, qubit: "Y"}),
    ]


def jordan_wigner(ham: FermionHamiltonian) -> PauliHamiltonian:
    """Map the fermionic Hamiltonian onto qubits.

    Strings are accumulated in first-encounter order, so the hopping,
    disorder and interaction blocks of build_aubry_andre stay grouped.
    Coefficients must come out real (the input is Hermitian); tiny
    residues below the prune threshold are dropped.
    """
    tol = DEFAULT_TOLERANCES
    acc: dict[tuple[tuple[int, str], ...], complex] = {}
    offset = 0.0 + 0j

    for term in ham.terms:
        expanded: list[tuple[complex, dict[int, str]]] = [(term.coeff, {})]
        for site, dagger in term.ops:
            nxt: list[tuple[complex, dict[int, str]]] = []
            for coeff, factors in expanded:
                for op_coeff, op_factors in _ladder_paulis(site, dagger):
                    phase, combined = _mul_strings(factors, op_factors)
                    nxt.append((coeff * op_coeff * phase, combined))
            expanded = nxt
        for coeff, factors in expanded:
            if not factors:
                offset += coeff
                continue
            key = tuple(sorted(factors.items()))
            acc[key] = acc.get(key, 0.0 + 0j) + coeff

    strings = []
    for key, coeff in acc.items():
        if abs(coeff.imag) > 1e-12:
            raise ValueError(f"non-real Pauli coefficient {coeff} for {key}")
        if abs(coeff.real) < tol.coeff_prune:
            continue
        strings.append(PauliString(float(coeff.real), key))
    if abs(offset.imag) > 1e-12:
        raise ValueError(f"non-real identity offset {offset}")
    return PauliHamiltonian(ham.num_sites, strings, float(offset.real))


def pauli_string_dense(string: PauliString, num_qubits: int) -> np.ndarray:
    """Dense matrix of one weighted Pauli string."""
    factors = string.factor_map()
    mats = [linalg.PAULI_BY_LETTER[factors.get(q, "I")] for q in range(num_qubits)]
    return string.coeff * linalg.kron(*mats)


def pauli_to_dense(ham: PauliHamiltonian) -> np.ndarray:
    """Dense Hermitian matrix of the full Pauli Hamiltonian."""
    dim = 2**ham.num_qubits
    out = ham.offset * np.eye(dim, dtype=complex)
    for s in ham.strings:
        out += pauli_string_dense(s, ham.num_qubits)
    return out


def aubry_andre_dense(params: ModelParams) -> np.ndarray:
    """Dense qubit-basis Hamiltonian for the given couplings."""
    return pauli_to_dense(jordan_wigner(build_aubry_andre(params)))


def total_number_dense(num_qubits: int) -> np.ndarray:
    """Total occupation operator: diagonal popcount matrix."""
    return np.diag([float(bin(i).count("1")) for i in range(2**num_qubits)]).astype(complex)


def with_phase(params: ModelParams, phase: float) -> ModelParams:
    """Copy of params with a different disorder phase."""
    return replace(params, disorder_phase=phase)
