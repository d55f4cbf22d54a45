"""Fidelity objective and a compact L-BFGS minimizer for the restart loop.

The refit objective is (1 - F)^2 where F measures how well the
parameterized preparation matches a stepped density matrix.  Three
measurement modes are supported:

- inverse_circuit_noisy (default): run the inverted preparation on the
  stepped state under the same decay model and read out the vacuum
  population, which is what a device could actually estimate.
- inverse_circuit_noiseless: same readout with decay switched off.
- pure_overlap: <psi(params)| rho |psi(params)> with no extra circuit.

Gradients are central finite differences with a fixed step.  The
minimizer keeps a bounded curvature history, backtracks with an Armijo
test, and stops on small objective, flat gradient, stalled progress, or
an iteration cap.  Accepted objective values decrease monotonically by
construction.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .ansatz import AnsatzSpec, build_ansatz_circuit
from .circuit import apply_circuit, invert
from .config import DEFAULT_TIMINGS, GateTimings
from .linalg import basis_state
from .noise import NoiseParams, fidelity_state_density, run_noisy_circuit
from .scheduler import schedule

INVERSE_NOISY = "inverse_circuit_noisy"
INVERSE_NOISELESS = "inverse_circuit_noiseless"
PURE_OVERLAP = "pure_overlap"
FIDELITY_MODES = (INVERSE_NOISY, INVERSE_NOISELESS, PURE_OVERLAP)

GRADIENT_STEP = 1e-6
DEFAULT_TOL = 1e-12
MAX_ITERATIONS = 80
HISTORY = 10
STALL_WINDOW = 8
STALL_TOL = 1e-4


class LineSearchFailure(RuntimeError):
    pass


@dataclass
class FidelityContext:
    """Stepped state plus everything needed to score a parameter vector."""

    spec: AnsatzSpec
    rho: np.ndarray
    noise: NoiseParams
    mode: str = INVERSE_NOISY
    timings: GateTimings = DEFAULT_TIMINGS

    def __post_init__(self):
        if self.mode not in FIDELITY_MODES:
            raise ValueError(f"unknown fidelity mode {self.mode!r}")
        dim = 2**self.spec.num_qubits
        if self.rho.shape != (dim, dim):
            raise ValueError(f"density shape {self.rho.shape} does not match {dim}")


def fidelity(ctx: FidelityContext, params: np.ndarray) -> float:
    circ = build_ansatz_circuit(ctx.spec, params, ctx.timings)
    if ctx.mode == PURE_OVERLAP:
        psi = apply_circuit(basis_state(ctx.spec.num_qubits, 0), circ)
        return fidelity_state_density(psi, ctx.rho)
    noise = ctx.noise if ctx.mode == INVERSE_NOISY else NoiseParams.disabled()
    rho = run_noisy_circuit(ctx.rho, schedule(invert(circ)), noise)
    return float(rho[0, 0].real)


def objective(ctx: FidelityContext, params: np.ndarray) -> float:
    return (1.0 - fidelity(ctx, params)) ** 2


@dataclass
class OptResult:
    params: np.ndarray
    objective: float
    gradient_norm: float
    iterations: int
    function_evals: int
    converged: bool
    reason: str


def numeric_gradient(fun, x: np.ndarray, h: float = GRADIENT_STEP) -> np.ndarray:
    """Central differences, two evaluations per coordinate."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.size)
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump[i] = h
        grad[i] = (fun(x + bump) - fun(x - bump)) / (2.0 * h)
    return grad


def _two_loop(grad, s_hist, y_hist):
    """Standard two-loop recursion; returns the quasi-Newton step H g."""
    q = grad.copy()
    pairs = list(zip(s_hist, y_hist))
    rhos = [1.0 / float(s @ y) for s, y in pairs]
    alphas = []
    for (s, y), rho in zip(reversed(pairs), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y), rho, a in zip(pairs, rhos, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def _armijo(fun, x, fx, direction, slope, c1, shrink, max_backtracks):
    alpha = 1.0
    for _ in range(max_backtracks):
        candidate = x + alpha * direction
        f_new = fun(candidate)
        if f_new <= fx + c1 * alpha * slope:
            return candidate, f_new
        alpha *= shrink
    raise LineSearchFailure(f"no Armijo step after {max_backtracks} backtracks")


def minimize(
    fun,
    x0: np.ndarray,
    *,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_ITERATIONS,
    history: int = HISTORY,
    gradient_step: float = GRADIENT_STEP,
    gradient=None,
    armijo_c1: float = 1e-4,
    shrink: float = 0.5,
    max_backtracks: int = 40,
    stall_window: int = STALL_WINDOW,
    stall_tol: float = STALL_TOL,
    trace: list | None = None,
) -> OptResult:
    """L-BFGS with Armijo backtracking and finite-difference gradients.

    Stops when the objective or the max-norm of the gradient drops to
    tol, when the last stall_window iterations together improved the
    objective by less than stall_tol of its value (decay puts a floor
    under the measured objective that tol alone would never reach), or
    after max_iterations.  A failed line search returns the best point
    seen with converged=False rather than raising.

    gradient, when given, replaces the built-in central differences; it
    must approximate them (a batched evaluation of the same formula),
    and each call is booked as the 2*dim evaluations it stands for.
    """
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return float(fun(np.asarray(x, dtype=float)))

    if gradient is None:
        grad_fn = lambda z: numeric_gradient(f, z, gradient_step)
    else:

        def grad_fn(z):
            nonlocal evals
            evals += 2 * z.size
            return gradient(z)

    x = np.array(x0, dtype=float)
    fx = f(x)
    if trace is not None:
        trace.append(fx)
    if fx <= tol:
        return OptResult(x, fx, 0.0, 0, evals, True, "objective")

    s_hist: deque = deque(maxlen=history)
    y_hist: deque = deque(maxlen=history)
    recent: deque = deque([fx], maxlen=stall_window + 1)
    grad = grad_fn(x)
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    iterations = 0
    converged, reason = False, "iterations"

    for _ in range(max_iterations):
        if gnorm <= tol:
            converged, reason = True, "gradient"
            break
        direction = -_two_loop(grad, s_hist, y_hist)
        slope = float(direction @ grad)
        if slope >= 0.0:
            # curvature memory points uphill, fall back to steepest descent
            direction = -grad
            slope = float(direction @ grad)
        try:
            x_new, f_new = _armijo(f, x, fx, direction, slope, armijo_c1, shrink, max_backtracks)
        except LineSearchFailure:
            reason = "line_search"
            break
        iterations += 1
        grad_new = grad_fn(x_new)
        s = x_new - x
        y = grad_new - grad
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
        else:
            # negative curvature along the step: stale memory would keep
            # steering into it, so restart from steepest descent
            s_hist.clear()
            y_hist.clear()
        x, fx, grad = x_new, f_new, grad_new
        gnorm = float(np.max(np.abs(grad)))
        if trace is not None:
            trace.append(fx)
        if fx <= tol:
            converged, reason = True, "objective"
            break
        recent.append(fx)
        if len(recent) == recent.maxlen and recent[0] - fx <= stall_tol * recent[0]:
            converged, reason = True, "stall"
            break

    return OptResult(x, fx, gnorm, iterations, evals, converged, reason)


def minimize_fidelity(ctx: FidelityContext, x0: np.ndarray, **kwargs) -> OptResult:
    return minimize(lambda p: objective(ctx, p), x0, **kwargs)
