"""Trajectory drivers: exact reference, repeated Trotter, restart loop.

Imbalance values are checked against a per-basis-state bit-counting
oracle, the exact reference against an independent eigendecomposition,
and the Trotter driver against the exact reference in the small-dt
limit.  Restart-loop numbers are frozen from measured runs with windows
wide enough to survive benign refactors.
"""

import math
import os

import numpy as np
import pytest

from rqd.driver import (
    CSV_COLUMNS,
    ConfigMismatch,
    RunConfig,
    TooLarge,
    average_over_phi,
    average_trajectories,
    exact_trajectory,
    imbalance,
    read_trajectory_csv,
    run,
    run_trotter,
    write_trajectory_csv,
)
from rqd.linalg import basis_state
from rqd.model import ModelParams, build_aubry_andre, jordan_wigner, pauli_to_dense
from rqd.noise import NoiseParams, density_from_state
from rqd.trotter import TrotterConfig

NOISELESS = NoiseParams.disabled()
NOISY_25MS = NoiseParams(t1_ms=25.0, t2s_ms=25.0)


def imbalance_oracle(probs):
    """Site-by-site recount: site k occupies qubit k - 1, MSB first."""
    n = int(round(math.log2(probs.size)))
    n_even = n_odd = 0.0
    for index, p in enumerate(probs):
        for site in range(1, n + 1):
            bit = (index >> (n - site)) & 1
            if site % 2 == 0:
                n_even += p * bit
            else:
                n_odd += p * bit
    total = n_even + n_odd
    return 0.0 if total < 1e-12 else (n_even - n_odd) / total


def test_cdw_imbalance_pins():
    psi = basis_state(6, 0b101010)
    assert imbalance(psi) == -1.0
    assert imbalance(density_from_state(psi)) == -1.0
    assert imbalance(basis_state(6, 0b010101)) == 1.0


def test_vacuum_imbalance_is_zero():
    assert imbalance(basis_state(4, 0)) == 0.0


def test_imbalance_matches_bit_counting_oracle():
    rng = np.random.default_rng(21)
    for _ in range(10):
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.linalg.norm(psi)
        expected = imbalance_oracle(np.abs(psi) ** 2)
        assert imbalance(psi) == pytest.approx(expected, abs=1e-12)
        assert imbalance(density_from_state(psi)) == pytest.approx(expected, abs=1e-12)


def test_exact_initial_row():
    cfg = RunConfig(model=ModelParams(num_sites=6), strategy="exact", noise=NOISELESS, num_steps=2)
    first = exact_trajectory(cfg).records[0]
    assert first.t == 0.0
    assert first.imbalance == -1.0
    assert first.fidelity_noisy == 1.0 and first.fidelity_pure == 1.0
    assert math.isnan(first.objective)
    assert first.cum_circuit_ms == 0.0


def test_times_are_step_multiples():
    cfg = RunConfig(
        model=ModelParams(num_sites=4), strategy="exact", noise=NOISELESS, dt=0.03, num_steps=7
    )
    times = exact_trajectory(cfg).times
    assert list(times) == [k * 0.03 for k in range(8)]


def test_exact_matches_independent_eigendecomposition():
    model = ModelParams(num_sites=6)
    cfg = RunConfig(model=model, strategy="exact", noise=NOISELESS, num_steps=10)
    traj = exact_trajectory(cfg)

    dense = pauli_to_dense(jordan_wigner(build_aubry_andre(model)))
    evals, evecs = np.linalg.eigh(dense)
    psi0 = basis_state(6, 0b101010)
    number_diag = np.array([bin(i).count("1") for i in range(64)], dtype=float)
    energy0 = float((psi0.conj() @ dense @ psi0).real)
    for k, record in enumerate(traj.records):
        psi = evecs @ (np.exp(-1j * k * cfg.dt * evals) * (evecs.conj().T @ psi0))
        assert record.imbalance == pytest.approx(imbalance(psi), abs=1e-10)
        probs = np.abs(psi) ** 2
        assert probs @ number_diag == pytest.approx(3.0, abs=1e-10)
        assert float((psi.conj() @ dense @ psi).real) == pytest.approx(energy0, abs=1e-10)


def test_exact_rejects_large_registers():
    cfg = RunConfig(model=ModelParams(num_sites=12), strategy="exact", noise=NOISELESS)
    with pytest.raises(TooLarge):
        exact_trajectory(cfg)


def test_trotter_approaches_exact_at_small_dt():
    model = ModelParams(num_sites=4)
    fine = RunConfig(
        model=model, strategy="trotter", noise=NOISELESS, dt=0.005, num_steps=40
    )
    traj = run_trotter(fine)
    reference = exact_trajectory(
        RunConfig(model=model, strategy="exact", noise=NOISELESS, dt=0.005, num_steps=40)
    )
    assert traj.final.fidelity_pure > 0.99995
    np.testing.assert_allclose(traj.imbalances, reference.imbalances, atol=1e-3)


def test_noiseless_trotter_fidelity_window():
    # frozen from the exact-reference oracle: 0.99618 at t = 1, dt = 0.04;
    # the error at fixed t shrinks ~4x when dt halves
    model = ModelParams(num_sites=6)
    coarse = run_trotter(
        RunConfig(model=model, strategy="trotter", noise=NOISELESS, dt=0.04, num_steps=25)
    )
    fine = run_trotter(
        RunConfig(model=model, strategy="trotter", noise=NOISELESS, dt=0.02, num_steps=50)
    )
    f_coarse = coarse.final.fidelity_pure
    f_fine = fine.final.fidelity_pure
    assert 0.9955 < f_coarse < 0.9975
    assert f_fine > 0.999
    assert 3.5 < (1.0 - f_coarse) / (1.0 - f_fine) < 4.5


def test_noisy_trotter_decays():
    model = ModelParams(num_sites=6)
    traj = run_trotter(
        RunConfig(model=model, strategy="trotter", noise=NOISY_25MS, num_steps=25)
    )
    fids = traj.fidelities_noisy
    assert np.all(fids <= 1.0) and np.all(fids >= 0.0)
    assert np.all(np.diff(fids) < 0)
    assert traj.final.fidelity_noisy < 0.6
    assert abs(traj.final.imbalance) < abs(traj.records[0].imbalance)


def test_rqd_oracle_noiseless_refits_each_step():
    cfg = RunConfig(
        model=ModelParams(num_sites=4), strategy="rqd_oracle", noise=NOISELESS, num_steps=5
    )
    traj = run(cfg)
    stepped = traj.records[1:]
    assert all(r.converged for r in stepped)
    assert all(r.iterations >= 1 for r in stepped)
    assert all(r.objective < 1e-7 for r in stepped)
    assert traj.final.fidelity_pure > 0.999


def test_rqd_number_noiseless_stays_accurate():
    # 2(C(4,2) - 1) parameters span the sector, so the refit floor is
    # set by optimizer precision, not expressivity
    cfg = RunConfig(
        model=ModelParams(num_sites=4), strategy="rqd_number", noise=NOISELESS, num_steps=5
    )
    traj = run(cfg)
    stepped = traj.records[1:]
    assert all(r.objective < 1e-5 for r in stepped)
    assert traj.final.fidelity_pure > 0.99


def test_rqd_noisy_records_are_sane():
    cfg = RunConfig(
        model=ModelParams(num_sites=4), strategy="rqd_number", noise=NOISY_25MS, num_steps=2
    )
    traj = run(cfg)
    assert len(traj.records) == 3
    fids = traj.fidelities_noisy
    assert np.all(fids <= 1.0 + 1e-12) and np.all(fids >= 0.0)
    cums = np.array([r.cum_circuit_ms for r in traj.records])
    assert np.all(np.diff(cums) > 0)
    assert traj.final.fidelity_noisy > 0.9


def test_mid_block_rows_carry_no_refit():
    cfg = RunConfig(
        model=ModelParams(num_sites=4),
        strategy="rqd_number",
        noise=NOISELESS,
        num_steps=4,
        steps_per_restart=2,
    )
    traj = run(cfg)
    assert len(traj.records) == 5
    mid = [traj.records[1], traj.records[3]]
    ends = [traj.records[2], traj.records[4]]
    assert all(math.isnan(r.objective) and r.iterations == 0 for r in mid)
    assert all(math.isfinite(r.objective) and r.iterations >= 1 for r in ends)


def test_trailing_partial_block():
    cfg = RunConfig(
        model=ModelParams(num_sites=4),
        strategy="rqd_number",
        noise=NOISELESS,
        num_steps=3,
        steps_per_restart=2,
    )
    traj = run(cfg)
    assert len(traj.records) == 4
    # final block holds a single step and still ends with a refit row
    assert math.isfinite(traj.final.objective)


def test_csv_round_trip(tmp_path):
    cfg = RunConfig(
        model=ModelParams(num_sites=4), strategy="trotter", noise=NOISY_25MS, num_steps=3
    )
    traj = run(cfg)
    path = os.path.join(tmp_path, "traj.csv")
    write_trajectory_csv(traj, path)
    data = read_trajectory_csv(path)
    assert set(data) == set(CSV_COLUMNS)
    np.testing.assert_array_equal(data["t"], traj.times)
    np.testing.assert_array_equal(data["imbalance"], traj.imbalances)
    np.testing.assert_array_equal(data["fidelity_noisy"], traj.fidelities_noisy)
    objectives = np.array([r.objective for r in traj.records])
    np.testing.assert_allclose(data["objective"], objectives, equal_nan=True, rtol=0, atol=0)
    assert data["converged"].tolist() == [1.0] * 4


def test_csv_rejects_foreign_header(tmp_path):
    path = os.path.join(tmp_path, "bad.csv")
    with open(path, "w") as handle:
        handle.write("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_trajectory_csv(path)


def test_repeated_runs_are_bit_identical(tmp_path):
    cfg = RunConfig(
        model=ModelParams(num_sites=4), strategy="rqd_number", noise=NOISY_25MS, num_steps=2
    )
    paths = []
    for tag in ("first", "second"):
        path = os.path.join(tmp_path, f"{tag}.csv")
        write_trajectory_csv(run(cfg), path)
        paths.append(path)
    with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
        assert a.read() == b.read()


def test_average_over_phi():
    def cfg(phi):
        model = ModelParams(num_sites=4, disorder_phase=phi)
        return RunConfig(model=model, strategy="exact", noise=NOISELESS, num_steps=5)

    configs = [cfg(0.3), cfg(2.1)]
    averaged = average_over_phi(configs)
    singles = [run(c) for c in configs]
    np.testing.assert_allclose(
        averaged.imbalance, np.mean([s.imbalances for s in singles], axis=0), atol=1e-15
    )
    assert averaged.num_runs == 2
    assert list(averaged.times) == [k * 0.04 for k in range(6)]


def test_average_rejects_mismatched_grids():
    model = ModelParams(num_sites=4)
    a = run(RunConfig(model=model, strategy="exact", noise=NOISELESS, dt=0.04, num_steps=2))
    b = run(RunConfig(model=model, strategy="exact", noise=NOISELESS, dt=0.02, num_steps=2))
    with pytest.raises(ConfigMismatch):
        average_trajectories([a, b])
    with pytest.raises(ConfigMismatch):
        average_trajectories([])


def test_dispatcher_covers_all_strategies():
    model = ModelParams(num_sites=4)
    for strategy in ("exact", "trotter", "rqd_number", "rqd_oracle"):
        traj = run(
            RunConfig(model=model, strategy=strategy, noise=NOISELESS, num_steps=2)
        )
        assert len(traj.records) == 3
        assert traj.config.strategy == strategy


def test_config_validation():
    model = ModelParams(num_sites=4)
    with pytest.raises(ValueError):
        RunConfig(model=model, strategy="magic", noise=NOISELESS)
    with pytest.raises(ValueError):
        RunConfig(model=model, strategy="exact", noise=NOISELESS, num_steps=0)
    with pytest.raises(ValueError):
        RunConfig(model=model, strategy="exact", noise=NOISELESS, steps_per_restart=0)
    with pytest.raises(ValueError):
        RunConfig(model=model, strategy="exact", noise=NOISELESS, dt=0.0)
    with pytest.raises(ValueError):
        RunConfig(model=model, strategy="exact", noise=NOISELESS, fidelity_mode="psychic")
    with pytest.raises(ValueError):
        RunConfig(
            model=model,
            strategy="trotter",
            noise=NOISELESS,
            dt=0.04,
            trotter=TrotterConfig(dt=0.02),
        )
