"""Scheduler tests against a brute-force earliest-feasible oracle."""
from __future__ import annotations

import numpy as np

from rqd.circuit import Circuit, Gate, make_gate
from rqd import scheduler


# ---------------------------------------------------------------- oracle


def brute_force_layers(circ: Circuit) -> list[int]:
    """Earliest feasible layer per gate, recomputed by scanning history.

    A gate must sit strictly after every earlier gate it shares a qubit
    with; with no such predecessor it goes to layer 0.
    """
    placed: list[tuple[Gate, int]] = []
    out = []
    for gate in circ.gates:
        floor = -1
        for prev, layer in placed:
            if set(prev.targets) & set(gate.targets):
                floor = max(floor, layer)
        out.append(floor + 1)
        placed.append((gate, floor + 1))
    return out


def oracle_duration_ns(circ: Circuit) -> float:
    assignment = brute_force_layers(circ)
    if not assignment:
        return 0.0
    durations = [0.0] * (max(assignment) + 1)
    for gate, layer in zip(circ.gates, assignment):
        durations[layer] = max(durations[layer], gate.duration_ns)
    return sum(durations)


def random_circuit(rng: np.random.Generator) -> Circuit:
    n = int(rng.integers(1, 8))
    length = int(rng.integers(0, 60))
    gates = []
    for _ in range(length):
        arity = int(rng.integers(1, min(n, 3) + 1))
        targets = tuple(rng.permutation(n)[:arity].tolist())
        duration = float(rng.uniform(50, 2000))
        gates.append(Gate("RZ", targets, (0.1,), duration))
    return Circuit(n, gates)


# ----------------------------------------------------------------- tests


def test_200_random_circuits_match_oracle():
    rng = np.random.default_rng(20260815)
    for _ in range(200):
        circ = random_circuit(rng)
        layered = scheduler.schedule(circ)
        got = []
        for idx, layer in enumerate(layered.layers):
            got.extend([idx] * len(layer.gates))
        # same number of gates, same layer assignment, same duration
        assert layered.gate_count == len(circ.gates)
        flat = [g for layer in layered.layers for g in layer.gates]
        want = brute_force_layers(Circuit(circ.num_qubits, flat))
        assert got == want
        assert abs(layered.total_duration_ns - oracle_duration_ns(circ)) < 1e-9


def test_no_layer_reuses_a_qubit():
    rng = np.random.default_rng(7)
    for _ in range(50):
        layered = scheduler.schedule(random_circuit(rng))
        for layer in layered.layers:
            seen: set[int] = set()
            for g in layer.gates:
                assert not (seen & set(g.targets))
                seen.update(g.targets)


def test_program_order_kept_for_overlapping_gates():
    rng = np.random.default_rng(8)
    for _ in range(50):
        circ = random_circuit(rng)
        layered = scheduler.schedule(circ)
        position = {}
        for idx, layer in enumerate(layered.layers):
            for g in layer.gates:
                position[id(g)] = idx
        for i, gi in enumerate(circ.gates):
            for gj in circ.gates[i + 1 :]:
                if set(gi.targets) & set(gj.targets):
                    assert position[id(gi)] < position[id(gj)]


def test_worked_example_three_layers():
    # g0 on (0,1), g1 on (1,2) queues behind it, g2 on (2) queues behind g1,
    # g3 on (0) slots next to g1 in layer 1
    gates = [
        Gate("RZ", (0, 1), (0.1,), 300.0),
        Gate("RZ", (1, 2), (0.1,), 300.0),
        Gate("RZ", (2,), (0.1,), 100.0),
        Gate("RZ", (0,), (0.1,), 100.0),
    ]
    layered = scheduler.schedule(Circuit(3, gates))
    assert layered.layer_count == 3
    assert [len(l.gates) for l in layered.layers] == [1, 2, 1]
    assert layered.total_duration_ns == 300.0 + 300.0 + 100.0


def test_parallel_singles_one_layer():
    gates = [make_gate("X", (q,)) for q in range(5)]
    layered = scheduler.schedule(Circuit(5, gates))
    assert layered.layer_count == 1
    assert layered.total_duration_ns == gates[0].duration_ns


def test_empty_circuit():
    layered = scheduler.schedule(Circuit(4, []))
    assert layered.layer_count == 0
    assert layered.total_duration_ns == 0.0
    assert scheduler.step_duration_ms(Circuit(4, [])) == 0.0
