"""Shared numeric tolerances and hardware timing defaults.

Every module reads its thresholds from one of the records below so a
study can tighten or loosen them in a single place instead of hunting
for magic numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used across the package."""

    hermiticity: float = 1e-10      # max |H - H^dag| entry accepted by herm_expm
    trace_drift: float = 1e-9       # renormalize a density matrix beyond this
    coeff_prune: float = 1e-14      # drop Pauli strings with |coeff| below this
    zero_occupation: float = 1e-12  # imbalance denominator guard


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class GateTimings:
    """Wall-clock gate durations in nanoseconds.

    Defaults were calibrated so a compiled evolution step for the
    6-site model lands in the 0.05-0.5 ms range (the regime where a
    25 ms coherence time kills plain Trotter evolution by t = 5 while
    the restarted strategies survive).  Single-qubit rotations sit at
    the superconducting scale; the two-qubit default is us-scale,
    closer to trapped-ion entangling gates.  The oracle block duration
    is a fixed model constant, not derived from the other two.
    """

    single_qubit_ns: float = 500.0
    two_qubit_ns: float = 6000.0
    oracle_ns: float = 26_000.0

    def for_arity(self, arity: int) -> float:
        if arity <= 1:
            return self.single_qubit_ns
        if arity == 2:
            return self.two_qubit_ns
        return self.oracle_ns


DEFAULT_TIMINGS = GateTimings()

NS_PER_MS = 1e6
