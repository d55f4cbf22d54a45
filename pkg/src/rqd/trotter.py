"""First-order product-formula compilation of a Pauli Hamiltonian.

Each weighted string c * P becomes an exact circuit for exp(-i dt c P):
local basis changes onto Z, a CNOT parity tree, a single RZ(2 c dt)
core, then everything undone.  The identity offset only contributes a
global phase and is dropped.

Term ordering and parity-tree shape are compile-time choices that leave
every per-term exponential exact but change how well the greedy
scheduler can pack the result; the seeded variants exist to mimic the
compilation-quality spread a production transpiler exhibits from one
disorder phase to the next.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, make_gate
from .config import DEFAULT_TIMINGS, GateTimings
from .model import PauliHamiltonian, PauliString

AS_CONSTRUCTED = "as_constructed"
SORTED_BY_SUPPORT = "sorted_by_support"
SEEDED_SHUFFLE = "seeded_shuffle"
TERM_ORDERS = (AS_CONSTRUCTED, SORTED_BY_SUPPORT, SEEDED_SHUFFLE)

CHAIN = "chain"
STAR = "star"
SEEDED = "seeded"
LADDER_STYLES = (CHAIN, STAR, SEEDED)


def phi_compile_seed(phase: float, base_seed: int = 0) -> int:
    """Deterministic 31-bit compile seed derived from a disorder phase.

    Nanoradian resolution keeps distinct phases on distinct seeds while
    staying reproducible across platforms.
    """
    return (int(round(phase * 1e9)) ^ base_seed) & 0x7FFFFFFF


@dataclass(frozen=True)
class TrotterConfig:
    """Step size plus compilation heuristics.

    compile_seed feeds both the seeded term shuffle and the seeded
    parity-tree choices; identical seeds always produce identical
    circuits.
    """

    dt: float
    term_order: str = AS_CONSTRUCTED
    ladder_style: str = CHAIN
    compile_seed: int | None = None

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.term_order not in TERM_ORDERS:
            raise ValueError(f"unknown term_order {self.term_order!r}")
        if self.ladder_style not in LADDER_STYLES:
            raise ValueError(f"unknown ladder_style {self.ladder_style!r}")
        if self.term_order == SEEDED_SHUFFLE and self.compile_seed is None:
            raise ValueError("seeded_shuffle needs a compile_seed")
        if self.ladder_style == SEEDED and self.compile_seed is None:
            raise ValueError("seeded ladder style needs a compile_seed")


_ORDER_STRATEGIES = ("interleave", "shuffle", "blocks", "grouped")


@dataclass(frozen=True)
class _CompileKnobs:
    """Per-circuit heuristic draws for the seeded modes.

    Drawn once per compilation; they trade schedule depth against gate
    locality in ways a fixed heuristic cannot, which is what spreads
    the compiled step durations between disorder phases.
    """

    order_strategy: str = "shuffle"
    star_bias: float = 0.0        # probability a parity tree becomes a star
    y_split_bias: float = 0.0     # probability a Y basis change uses the 2-gate form


def _draw_knobs(config: TrotterConfig, rng) -> _CompileKnobs:
    if config.ladder_style != SEEDED and config.term_order != SEEDED_SHUFFLE:
        return _CompileKnobs()
    return _CompileKnobs(
        order_strategy=_ORDER_STRATEGIES[int(rng.integers(len(_ORDER_STRATEGIES)))],
        star_bias=float(rng.random()),
        y_split_bias=float(rng.random()),
    )


def _support_blocks(strings: list[PauliString]) -> list[list[PauliString]]:
    blocks: list[list[PauliString]] = []
    for s in strings:
        if blocks and blocks[-1][0].support() == s.support():
            blocks[-1].append(s)
        else:
            blocks.append([s])
    return blocks


def _interleave_order(strings: list[PauliString], rng) -> list[PauliString]:
    """Greedy depth-minimizing order via per-qubit busy counters.

    Mirrors the downstream greedy scheduler: each candidate term would
    start at the max counter of its support, so always emit a term with
    the smallest start and advance its qubits by a rough depth estimate
    (basis changes + parity tree down and up + core rotation).
    """
    remaining = list(strings)
    rng.shuffle(remaining)
    counters: dict[int, int] = {}
    out: list[PauliString] = []
    while remaining:
        starts = [max((counters.get(q, 0) for q in s.support())) for s in remaining]
        pick = starts.index(min(starts))
        s = remaining.pop(pick)
        depth = 2 * len(s.support()) + 1
        level = max(counters.get(q, 0) for q in s.support())
        for q in s.support():
            counters[q] = level + depth
        out.append(s)
    return out


def _ordered_strings(
    ham: PauliHamiltonian, config: TrotterConfig, knobs: _CompileKnobs, rng
) -> list[PauliString]:
    strings = list(ham.strings)
    if config.term_order == SORTED_BY_SUPPORT:
        strings.sort(key=lambda s: (len(s.paulis), s.support()))
    elif config.term_order == SEEDED_SHUFFLE:
        if knobs.order_strategy == "interleave":
            strings = _interleave_order(strings, rng)
        elif knobs.order_strategy == "blocks":
            blocks = _support_blocks(strings)
            order = rng.permutation(len(blocks))
            strings = [s for i in order for s in blocks[i]]
        elif knobs.order_strategy == "grouped":
            # Cluster terms qubit by qubit; exposes rotation-merge style
            # locality at the cost of serialization.
            strings.sort(key=lambda s: (min(s.support()), max(s.support()), s.paulis))
        else:
            rng.shuffle(strings)
    return strings


def _parity_tree(
    support: tuple[int, ...], style: str, knobs: _CompileKnobs, rng
) -> tuple[list[tuple[int, int]], int]:
    """CNOT list funneling the joint parity of support onto one pivot.

    Returns (cnots, pivot).  The chain walks the sorted support from
    both ends toward the pivot; the star feeds every qubit straight
    into the pivot.  Both are exact, they just schedule differently:
    a star frees its leaves for neighbouring terms, a chain keeps the
    whole support busy for the depth of the tree.
    """
    qubits = sorted(support)
    if len(qubits) == 1:
        return [], qubits[0]
    if style == SEEDED:
        style = STAR if rng.random() < knobs.star_bias else CHAIN
        pivot_index = int(rng.integers(len(qubits)))
    else:
        pivot_index = len(qubits) - 1
    pivot = qubits[pivot_index]
    cnots: list[tuple[int, int]] = []
    if style == STAR:
        cnots.extend((q, pivot) for q in qubits if q != pivot)
    else:
        for i in range(pivot_index):
            cnots.append((qubits[i], qubits[i + 1]))
        for i in range(len(qubits) - 1, pivot_index, -1):
            cnots.append((qubits[i], qubits[i - 1]))
    return cnots, pivot


def _string_circuit(
    string: PauliString,
    dt: float,
    style: str,
    knobs: _CompileKnobs,
    rng,
    timings: GateTimings,
) -> list[Gate]:
    gates: list[Gate] = []
    factors = string.factor_map()
    # Two exact syntheses of the Y->Z basis change: a single RX(pi/2),
    # or RZ(-pi/2) then H (global phases cancel between the two sides).
    # The split form costs an extra layer on that qubit, so the choice
    # moves the schedule without touching the term unitary.
    split_y = style == SEEDED and bool(rng.random() < knobs.y_split_bias)
    before: list[Gate] = []
    after: list[Gate] = []
    for q, letter in sorted(factors.items()):
        if letter == "X":
            before.append(make_gate("H", (q,), (), timings))
            after.append(make_gate("H", (q,), (), timings))
        elif letter == "Y":
            if split_y:
                before.append(make_gate("RZ", (q,), (-math.pi / 2,), timings))
                before.append(make_gate("H", (q,), (), timings))
                after.append(make_gate("H", (q,), (), timings))
                after.append(make_gate("RZ", (q,), (math.pi / 2,), timings))
            else:
                before.append(make_gate("RX", (q,), (math.pi / 2,), timings))
                after.append(make_gate("RX", (q,), (-math.pi / 2,), timings))
    cnots, pivot = _parity_tree(string.support(), style, knobs, rng)
    gates.extend(before)
    gates.extend(make_gate("CNOT", pair, (), timings) for pair in cnots)
    gates.append(make_gate("RZ", (pivot,), (2.0 * string.coeff * dt,), timings))
    gates.extend(make_gate("CNOT", pair, (), timings) for pair in reversed(cnots))
    gates.extend(after)
    return gates


def trotter_step(
    ham: PauliHamiltonian,
    config: TrotterConfig,
    timings: GateTimings = DEFAULT_TIMINGS,
) -> Circuit:
    """One exact-per-term first-order step circuit for exp(-i dt H)."""
    rng = np.random.default_rng(config.compile_seed)
    knobs = _draw_knobs(config, rng)
    gates: list[Gate] = []
    for string in _ordered_strings(ham, config, knobs, rng):
        gates.extend(
            _string_circuit(string, config.dt, config.ladder_style, knobs, rng, timings)
        )
    return Circuit(ham.num_qubits, gates)
