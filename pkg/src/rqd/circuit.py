"""Gate-level circuit representation.

Gates carry their own wall-clock duration so scheduling never has to
guess.  Rotation parameters are either floats or placeholder names;
binding replaces names with numbers.  The two-qubit A block is the
number-conserving primitive: identity on |00> and |11>, a mixing
rotation on the single-excitation pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import DEFAULT_TIMINGS, GateTimings
from . import linalg

SINGLE_QUBIT_KINDS = {"X", "H", "RX", "RY", "RZ"}
TWO_QUBIT_KINDS = {"CNOT", "RZZ", "A"}
ROTATION_KINDS = {"RX", "RY", "RZ", "RZZ"}
KNOWN_KINDS = SINGLE_QUBIT_KINDS | TWO_QUBIT_KINDS | {"ORACLE"}

Param = float | str


class UnboundParameter(ValueError):
    """Operation needs numeric parameters but found a placeholder name."""


class UnknownGate(ValueError):
    """Gate kind outside the supported set."""


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    params: tuple[Param, ...] = ()
    duration_ns: float = 0.0
    # dense Hermitian generator, only for ORACLE gates
    hermitian: np.ndarray | None = field(default=None, compare=False, repr=False)

    def bound(self) -> bool:
        return all(not isinstance(p, str) for p in self.params)

    def angles(self) -> tuple[float, ...]:
        if not self.bound():
            raise UnboundParameter(f"{self.kind} gate has unbound parameters {self.params}")
        return tuple(float(p) for p in self.params)


def make_gate(
    kind: str,
    targets: tuple[int, ...],
    params: tuple[Param, ...] = (),
    timings: GateTimings = DEFAULT_TIMINGS,
    hermitian: np.ndarray | None = None,
) -> Gate:
    """Construct a gate with its duration taken from the timing model."""
    if kind not in KNOWN_KINDS:
        raise UnknownGate(f"unknown gate kind {kind!r}")
    if kind == "ORACLE":
        duration = timings.oracle_ns
    elif kind == "A":
        duration = a_block_duration(timings)
    elif kind in TWO_QUBIT_KINDS:
        duration = timings.two_qubit_ns
    else:
        duration = timings.single_qubit_ns
    expected = 2 if kind in TWO_QUBIT_KINDS else (len(targets) if kind == "ORACLE" else 1)
    if len(targets) != expected:
        raise UnknownGate(f"{kind} gate expects {expected} targets, got {targets}")
    return Gate(kind, tuple(targets), tuple(params), duration, hermitian)


@dataclass
class Circuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def parameter_names(self) -> list[str]:
        """Unbound placeholder names in gate order, first occurrence only."""
        seen: list[str] = []
        for g in self.gates:
            for p in g.params:
                if isinstance(p, str) and p not in seen:
                    seen.append(p)
        return seen

    def bind(self, values: dict[str, float]) -> "Circuit":
        """Replace placeholder names with numbers; unknown names stay put."""
        gates = []
        for g in self.gates:
            params = tuple(values.get(p, p) if isinstance(p, str) else p for p in g.params)
            gates.append(replace(g, params=params))
        return Circuit(self.num_qubits, gates)

    def bound(self) -> bool:
        return all(g.bound() for g in self.gates)


# ------------------------------------------------------------- matrices


def a_gate_matrix(theta: float, phi: float) -> np.ndarray:
    """4x4 number-conserving block: identity on |00>,|11>, rotation between |01>,|10>."""
    c, s = math.cos(theta), math.sin(theta)
    out = np.eye(4, dtype=complex)
    out[1, 1] = c
    out[1, 2] = np.exp(1j * phi) * s
    out[2, 1] = np.exp(-1j * phi) * s
    out[2, 2] = -c
    return out


def gate_matrix(gate: Gate) -> np.ndarray:
    """Dense matrix of a bound gate in its own target basis."""
    kind = gate.kind
    if kind == "X":
        return linalg.PAULI_X
    if kind == "H":
        return linalg.HADAMARD
    if kind == "CNOT":
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
        )
    angles = gate.angles()
    if kind == "RZ":
        (theta,) = angles
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if kind == "RX":
        (theta,) = angles
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        (theta,) = angles
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZZ":
        (theta,) = angles
        lo, hi = np.exp(-0.5j * theta), np.exp(0.5j * theta)
        return np.diag([lo, hi, hi, lo])
    if kind == "A":
        theta, phi = angles
        return a_gate_matrix(theta, phi)
    if kind == "ORACLE":
        if gate.hermitian is None:
            raise UnboundParameter("ORACLE gate carries no Hermitian generator")
        (theta,) = angles
        return linalg.herm_expm(gate.hermitian, theta)
    raise UnknownGate(f"unknown gate kind {kind!r}")


def invert(circ: Circuit) -> Circuit:
    """Exact inverse circuit: reversed order, rotation angles negated.

    X, H and CNOT are involutions; the A block is Hermitian and unitary,
    hence also self-inverse.  Requires bound parameters.
    """
    gates = []
    for g in reversed(circ.gates):
        if g.kind in ROTATION_KINDS or g.kind == "ORACLE":
            (theta,) = g.angles()
            gates.append(replace(g, params=(-theta,)))
        else:
            gates.append(g)
    return Circuit(circ.num_qubits, gates)


# ------------------------------------------------------------- lowering

# The A block lowers to 4 CNOTs and 6 single-qubit rotations; the gate
# product reproduces the 4x4 matrix only up to this fixed global phase
# (exp(i pi/4)), which no expectation value can observe.
A_LOWER_PHASE = np.exp(1j * math.pi / 4)


def a_block_gates(
    a: int, b: int, theta: Param, phi: Param, timings: GateTimings = DEFAULT_TIMINGS
) -> list[Gate]:
    """CNOT/rotation realization of A(theta, phi) on qubits (a, b).

    Derived from A = CX(a,b) CW CX(a,b) with CW a controlled reflection
    on qubit a, decomposed the standard way.  Requires numeric angles.
    """
    if isinstance(theta, str) or isinstance(phi, str):
        raise UnboundParameter("cannot lower an A gate with unbound parameters")

    def g(kind: str, targets: tuple[int, ...], *params: float) -> Gate:
        return make_gate(kind, targets, tuple(params), timings)

    return [
        g("CNOT", (a, b)),
        g("RZ", (a,), math.pi / 2 + phi),
        g("CNOT", (b, a)),
        g("RZ", (a,), -math.pi / 2),
        g("RY", (a,), -theta),
        g("CNOT", (b, a)),
        g("RY", (a,), theta),
        g("RZ", (a,), -phi),
        g("RZ", (b,), math.pi / 2),
        g("CNOT", (a, b)),
    ]


def a_block_duration(timings: GateTimings = DEFAULT_TIMINGS) -> float:
    """Critical-path duration of the lowered A block.

    Four CNOTs and the five rotations on the first qubit form a single
    dependency chain; the lone rotation on the second qubit hides
    inside it.
    """
    return 4 * timings.two_qubit_ns + 5 * timings.single_qubit_ns


def lower(circ: Circuit, timings: GateTimings = DEFAULT_TIMINGS) -> Circuit:
    """Rewrite RZZ and A gates into {CNOT, single-qubit rotation} blocks.

    RZZ(t) becomes CNOT RZ(t) CNOT on the second qubit.  ORACLE gates
    stay atomic.  Each lowered A block equals the original matrix up to
    the global phase A_LOWER_PHASE.
    """
    gates: list[Gate] = []
    for g in circ.gates:
        if g.kind == "RZZ":
            (theta,) = g.angles()
            c, t = g.targets
            gates.append(make_gate("CNOT", (c, t), (), timings))
            gates.append(make_gate("RZ", (t,), (theta,), timings))
            gates.append(make_gate("CNOT", (c, t), (), timings))
        elif g.kind == "A":
            theta, phi = g.angles()
            gates.extend(a_block_gates(g.targets[0], g.targets[1], theta, phi, timings))
        else:
            gates.append(g)
    return Circuit(circ.num_qubits, gates)


# ------------------------------------------------------------ evaluation


def apply_circuit(state: np.ndarray, circ: Circuit) -> np.ndarray:
    """Run a bound circuit on a pure state."""
    out = np.asarray(state, dtype=complex)
    for g in circ.gates:
        out = linalg.apply_gate_to_state(out, gate_matrix(g), g.targets)
    return out


def circuit_unitary(circ: Circuit) -> np.ndarray:
    """Dense unitary of a bound circuit (column-by-column application)."""
    dim = 2**circ.num_qubits
    out = np.eye(dim, dtype=complex)
    for col in range(dim):
        out[:, col] = apply_circuit(np.ascontiguousarray(out[:, col]), circ)
    return out


# ---------------------------------------------------------- text format


def _format_param(p: Param) -> str:
    return p if isinstance(p, str) else repr(float(p))


def to_text(circ: Circuit) -> str:
    """One gate per line: KIND q0[,q1] [param ...]."""
    lines = []
    for g in circ.gates:
        parts = [g.kind, ",".join(str(t) for t in g.targets)]
        parts.extend(_format_param(p) for p in g.params)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def from_text(
    text: str, num_qubits: int | None = None, timings: GateTimings = DEFAULT_TIMINGS
) -> Circuit:
    """Parse the to_text format; ORACLE generators are not recoverable."""
    gates = []
    max_target = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"line {lineno}: expected 'KIND targets [params]'")
        kind = parts[0]
        targets = tuple(int(t) for t in parts[1].split(","))
        params: list[Param] = []
        for tok in parts[2:]:
            try:
                params.append(float(tok))
            except ValueError:
                params.append(tok)
        gates.append(make_gate(kind, targets, tuple(params), timings))
        max_target = max(max_target, *targets)
    n = num_qubits if num_qubits is not None else max_target + 1
    return Circuit(n, gates)
