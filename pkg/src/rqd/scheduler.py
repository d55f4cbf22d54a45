"""Greedy as-soon-as-possible layering of circuits.

Every qubit keeps a counter of the next free layer.  A gate lands in
the layer given by the maximum counter over its targets, then bumps
those counters past it.  Gates on disjoint qubits may fill earlier
layers; gates sharing a qubit keep their program order.  A layer lasts
as long as its slowest member, and the circuit lasts the sum of its
layers, which models lockstep hardware where idling qubits wait (and
decohere) for the active ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import Circuit, Gate
from .config import NS_PER_MS


@dataclass
class Layer:
    gates: list[Gate] = field(default_factory=list)

    @property
    def duration_ns(self) -> float:
        return max((g.duration_ns for g in self.gates), default=0.0)

    def qubits(self) -> set[int]:
        out: set[int] = set()
        for g in self.gates:
            out.update(g.targets)
        return out


@dataclass
class LayeredCircuit:
    num_qubits: int
    layers: list[Layer] = field(default_factory=list)

    @property
    def total_duration_ns(self) -> float:
        return sum(layer.duration_ns for layer in self.layers)

    @property
    def total_duration_ms(self) -> float:
        return self.total_duration_ns / NS_PER_MS

    @property
    def gate_count(self) -> int:
        return sum(len(layer.gates) for layer in self.layers)

    @property
    def layer_count(self) -> int:
        return len(self.layers)


def schedule(circ: Circuit) -> LayeredCircuit:
    """Greedy layering with per-qubit next-free-layer counters."""
    counters = [0] * circ.num_qubits
    layers: list[Layer] = []
    for gate in circ.gates:
        slot = max((counters[t] for t in gate.targets), default=0)
        while len(layers) <= slot:
            layers.append(Layer())
        layers[slot].gates.append(gate)
        for t in gate.targets:
            counters[t] = slot + 1
    return LayeredCircuit(circ.num_qubits, layers)


def step_duration_ms(circ: Circuit) -> float:
    """Wall-clock milliseconds of the scheduled circuit."""
    return schedule(circ).total_duration_ms
