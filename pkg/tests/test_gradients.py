"""Checkpointed bump evaluations against the one-at-a-time route.

The fast path shares forward and backward sweeps across bumps; the slow
path re-runs the full circuit per bump.  Fidelities must agree to
floating-point reordering, gradients to that noise amplified by 1/h.
"""

import numpy as np
import pytest

from rqd.ansatz import build_ansatz_circuit, number_conserving_spec, oracle_spec
from rqd.circuit import apply_circuit
from rqd.gradients import bump_fidelities, make_batched_gradient
from rqd.linalg import basis_state
from rqd.model import ModelParams, build_aubry_andre, jordan_wigner
from rqd.noise import NoiseParams, density_from_state
from rqd.optimize import (
    FIDELITY_MODES,
    INVERSE_NOISELESS,
    INVERSE_NOISY,
    FidelityContext,
    fidelity,
    minimize_fidelity,
    numeric_gradient,
    objective,
)

H_STEP = 1e-6


def random_density(rng, n):
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    psi /= np.linalg.norm(psi)
    return density_from_state(psi)


def slow_bumps(ctx, theta, h):
    out = np.empty(2 * theta.size)
    for c in range(theta.size):
        for sign, row in ((h, 2 * c), (-h, 2 * c + 1)):
            bumped = theta.copy()
            bumped[c] += sign
            out[row] = fidelity(ctx, bumped)
    return out


@pytest.mark.parametrize("mode", sorted(FIDELITY_MODES))
def test_bump_fidelities_match_plain_route(mode):
    rng = np.random.default_rng(11)
    spec = number_conserving_spec(4, 2)
    ctx = FidelityContext(
        spec=spec,
        rho=random_density(rng, 4),
        noise=NoiseParams(t1_ms=25.0, t2s_ms=25.0),
        mode=mode,
    )
    theta = rng.normal(scale=0.3, size=spec.num_parameters)
    fast = bump_fidelities(ctx, theta, H_STEP)
    np.testing.assert_allclose(fast, slow_bumps(ctx, theta, H_STEP), atol=1e-12)


@pytest.mark.parametrize("mode", sorted(FIDELITY_MODES))
def test_gradient_matches_generic_route(mode):
    rng = np.random.default_rng(12)
    spec = number_conserving_spec(4, 2)
    ctx = FidelityContext(
        spec=spec,
        rho=random_density(rng, 4),
        noise=NoiseParams(t1_ms=25.0, t2s_ms=25.0),
        mode=mode,
    )
    theta = rng.normal(scale=0.3, size=spec.num_parameters)
    fast = make_batched_gradient(ctx)(theta)
    slow = numeric_gradient(lambda z: objective(ctx, z), theta, H_STEP)
    # fp reordering of ~1e-16 in the fidelities amplifies by 1/h
    np.testing.assert_allclose(fast, slow, atol=1e-8)


def test_gradient_matches_on_six_qubits_noisy():
    rng = np.random.default_rng(13)
    spec = number_conserving_spec(6, 3)
    ctx = FidelityContext(
        spec=spec,
        rho=random_density(rng, 6),
        noise=NoiseParams(t1_ms=25.0, t2s_ms=25.0),
        mode=INVERSE_NOISY,
    )
    theta = rng.normal(scale=0.3, size=spec.num_parameters)
    fast = make_batched_gradient(ctx)(theta)
    slow = numeric_gradient(lambda z: objective(ctx, z), theta, H_STEP)
    np.testing.assert_allclose(fast, slow, atol=1e-8)


def test_single_parameter_circuits_are_rejected():
    model = ModelParams(num_sites=4)
    spec = oracle_spec(jordan_wigner(build_aubry_andre(model)))
    ctx = FidelityContext(
        spec=spec,
        rho=np.eye(16, dtype=complex) / 16.0,
        noise=NoiseParams.disabled(),
    )
    with pytest.raises(ValueError):
        bump_fidelities(ctx, np.zeros(1), H_STEP)


def test_minimize_with_hook_matches_plain_minimize():
    # target inside the particle sector, so the refit can actually reach it
    rng = np.random.default_rng(14)
    spec = number_conserving_spec(4, 2)
    target = rng.normal(scale=0.3, size=spec.num_parameters)
    psi = apply_circuit(basis_state(4, 0), build_ansatz_circuit(spec, target))
    ctx = FidelityContext(
        spec=spec,
        rho=density_from_state(psi),
        noise=NoiseParams.disabled(),
        mode=INVERSE_NOISELESS,
    )
    x0 = target + rng.normal(scale=0.05, size=spec.num_parameters)
    plain = minimize_fidelity(ctx, x0)
    grad_calls = 0

    def counting(theta):
        nonlocal grad_calls
        grad_calls += 1
        return make_batched_gradient(ctx)(theta)

    hooked = minimize_fidelity(ctx, x0, gradient=counting)
    assert grad_calls > 0
    assert hooked.converged and plain.converged
    assert hooked.objective <= 1e-12
    assert plain.objective <= 1e-12


def test_hook_evaluations_are_booked():
    rng = np.random.default_rng(15)
    spec = number_conserving_spec(4, 2)
    ctx = FidelityContext(
        spec=spec,
        rho=random_density(rng, 4),
        noise=NoiseParams(t1_ms=25.0, t2s_ms=25.0),
    )
    x0 = rng.normal(scale=0.1, size=spec.num_parameters)
    direct_calls = 0

    def counted_objective(theta):
        nonlocal direct_calls
        direct_calls += 1
        return objective(ctx, theta)

    grad_calls = 0
    hook = make_batched_gradient(ctx)

    def counting(theta):
        nonlocal grad_calls
        grad_calls += 1
        return hook(theta)

    from rqd.optimize import minimize

    result = minimize(counted_objective, x0, max_iterations=10, gradient=counting)
    dim = spec.num_parameters
    assert result.function_evals == direct_calls + 2 * dim * grad_calls
