"""Fast central-difference gradients for the refit objective.

numeric_gradient evaluates 2*dim bumped parameter vectors one at a
time, re-running the full inverse circuit for each.  A bump changes a
single gate, so almost all of that work is shared.  This module caches
a forward sweep (state before every layer) and a backward sweep (the
readout operator pulled through the adjoint channel of every suffix),
after which each bumped evaluation costs one layer application and a
trace.  The values equal the generic route up to floating-point
reordering; tests pin the agreement.

One caveat: the trace-renormalization guard inside the plain evaluator
is nonlinear and cannot ride along the adjoint sweep.  It only fires on
drifts above 1e-9, orders of magnitude beyond the roundoff this engine
produces, so both routes agree to far tighter tolerance in practice.

The propagator ansatz has a single parameter and gains nothing here, so
it is rejected; the generic gradient handles it.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .ansatz import ORACLE, build_ansatz_circuit
from .circuit import Circuit, gate_matrix, invert
from .config import DEFAULT_TOLERANCES, NS_PER_MS
from .linalg import basis_state
from .noise import (
    NoiseParams,
    _decay_factors,
    _renormalize_if_drifted,
    apply_matrix_to_density,
    decay_rates,
    decohere,
)
from .optimize import (
    GRADIENT_STEP,
    INVERSE_NOISY,
    PURE_OVERLAP,
    FidelityContext,
)
from .scheduler import Layer, schedule


def _param_offsets(circ: Circuit) -> dict[int, int]:
    """Map id(gate) to the index of its first parameter.

    The ansatz builders consume parameters in gate order, and inversion
    keeps self-inverse gates by identity, so offsets survive inversion.
    """
    offsets: dict[int, int] = {}
    cursor = 0
    for g in circ.gates:
        offsets[id(g)] = cursor
        cursor += len(g.params)
    return offsets


def _layer_qubits(layer: Layer, n: int, noise: NoiseParams) -> tuple[int, ...]:
    return tuple(range(n)) if noise.idle_decay else tuple(sorted(layer.qubits()))


def _apply_layer(rho, layer: Layer, n: int, noise: NoiseParams, bumped=None):
    """Unitaries then decay then drift guard, as the plain evaluator does.

    bumped optionally maps id(gate) to a replacement matrix.
    """
    for gate in layer.gates:
        m = None if bumped is None else bumped.get(id(gate))
        if m is None:
            m = gate_matrix(gate)
        rho = apply_matrix_to_density(rho, m, gate.targets)
    if noise.enabled and layer.duration_ns > 0:
        rho = decohere(rho, layer.duration_ns / NS_PER_MS, noise, _layer_qubits(layer, n, noise))
        rho = _renormalize_if_drifted(rho, DEFAULT_TOLERANCES.trace_drift)
    return rho


def _adjoint_layer(op, layer: Layer, n: int, noise: NoiseParams):
    """Heisenberg-picture pullback of an observable through one layer.

    The layer acts as decay after unitaries, so the adjoint applies the
    decay adjoint first, then the conjugated unitaries.  The decay
    adjoint shares the scale factors of the forward channel but
    transfers population upward: P11 gains gamma * P00.
    """
    if noise.enabled and layer.duration_ns > 0:
        gamma, coh = decay_rates(layer.duration_ns / NS_PER_MS, noise)
        qubits = _layer_qubits(layer, n, noise)
        op = op * _decay_factors(n, qubits, gamma, coh)
        for q in qubits:
            lead, trail = 2**q, 2 ** (n - 1 - q)
            r = op.reshape(lead, 2, trail, lead, 2, trail)
            r[:, 1, :, :, 1, :] += gamma * r[:, 0, :, :, 0, :]
    for gate in layer.gates:
        m = gate_matrix(gate)
        op = apply_matrix_to_density(op, m.conj().T, gate.targets)
    return op


def _bump_rows(gate, offset: int, h: float):
    """(row, matrix) pairs for the central-difference bumps of one gate."""
    rows = []
    for local in range(len(gate.params)):
        coord = offset + local
        for sign, row in ((h, 2 * coord), (-h, 2 * coord + 1)):
            angles = list(gate.angles())
            angles[local] += sign
            rows.append((row, gate_matrix(replace(gate, params=tuple(angles)))))
    return rows


def _bump_inverse(ctx: FidelityContext, circ: Circuit, offsets, h: float):
    n = ctx.spec.num_qubits
    layered = schedule(invert(circ))
    noise = ctx.noise if ctx.mode == INVERSE_NOISY else NoiseParams.disabled()

    before = []
    rho = ctx.rho
    for layer in layered.layers:
        before.append(rho)
        rho = _apply_layer(rho, layer, n, noise)

    num_layers = len(layered.layers)
    readout = [None] * num_layers
    op = np.zeros_like(ctx.rho)
    op[0, 0] = 1.0
    for l in range(num_layers - 1, -1, -1):
        readout[l] = op
        if l > 0:
            op = _adjoint_layer(op, layered.layers[l], n, noise)

    out = np.empty(2 * ctx.spec.num_parameters)
    for l, layer in enumerate(layered.layers):
        for gate in layer.gates:
            if not gate.params:
                continue
            for row, matrix in _bump_rows(gate, offsets[id(gate)], h):
                stepped = _apply_layer(before[l], layer, n, noise, bumped={id(gate): matrix})
                out[row] = np.einsum("ij,ji->", readout[l], stepped).real
    return out


def _apply_state(psi, matrix, targets, n):
    t = psi.reshape((2,) * n)
    k = len(targets)
    front = list(range(k))
    moved = np.moveaxis(t, list(targets), front)
    flat = moved.reshape(2**k, -1)
    out = (matrix @ flat).reshape(moved.shape)
    return np.moveaxis(out, front, list(targets)).reshape(psi.shape)


def _bump_pure(ctx: FidelityContext, circ: Circuit, offsets, h: float):
    n = ctx.spec.num_qubits
    gates = circ.gates
    before = []
    psi = basis_state(n, 0)
    for gate in gates:
        before.append(psi)
        psi = _apply_state(psi, gate_matrix(gate), gate.targets, n)

    suffix = [None] * len(gates)
    op = ctx.rho
    for i in range(len(gates) - 1, -1, -1):
        suffix[i] = op
        if i > 0:
            g = gates[i]
            m = gate_matrix(g)
            op = apply_matrix_to_density(op, m.conj().T, g.targets)

    out = np.empty(2 * ctx.spec.num_parameters)
    for i, gate in enumerate(gates):
        if not gate.params:
            continue
        for row, matrix in _bump_rows(gate, offsets[id(gate)], h):
            psi_row = _apply_state(before[i], matrix, gate.targets, n)
            out[row] = np.vdot(psi_row, suffix[i] @ psi_row).real
    return out


def bump_fidelities(ctx: FidelityContext, theta: np.ndarray, h: float) -> np.ndarray:
    """Fidelity at theta +/- h e_c for every coordinate, rows (2c, 2c+1)."""
    if ctx.spec.kind == ORACLE:
        raise ValueError("cached bumps are for multi-parameter circuits")
    theta = np.asarray(theta, dtype=float)
    circ = build_ansatz_circuit(ctx.spec, theta, ctx.timings)
    offsets = _param_offsets(circ)
    if ctx.mode == PURE_OVERLAP:
        return _bump_pure(ctx, circ, offsets, h)
    return _bump_inverse(ctx, circ, offsets, h)


def make_batched_gradient(ctx: FidelityContext, h: float = GRADIENT_STEP):
    """Drop-in replacement for the numeric gradient of the refit objective."""

    def gradient(theta: np.ndarray) -> np.ndarray:
        fids = bump_fidelities(ctx, theta, h)
        objs = (1.0 - fids) ** 2
        return (objs[0::2] - objs[1::2]) / (2.0 * h)

    return gradient
