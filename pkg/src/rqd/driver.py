"""Propagation strategies and the restart loop.

Four strategies share one per-step record schema:

- exact: eigendecomposition reference, fidelity identically 1.
- trotter: repeated noisy application of one compiled step circuit.
- rqd_number / rqd_oracle: the restart loop.  Each block prepares the
  current ansatz under noise from the all-zeros state, applies
  steps_per_restart noisy Trotter steps, refits the ansatz parameters
  to the stepped density matrix, then records observables from a fresh
  noisy preparation of the refitted ansatz and warm-starts the next
  block from the fitted parameters.

fidelity_noisy is <psi_exact| rho |psi_exact> on the density matrix the
device would hold at that time; fidelity_pure is the noiseless
counterpart |<psi_exact|psi>|^2.  Circuit time accumulates the
scheduled wall-clock of preparation and step circuits; refit
measurement circuits run on repeated fresh shots and do not advance
the propagated state, so they are not counted.

Trajectories start with a t = 0 row describing the ideal initial state;
stepped rows follow at t = k*dt for k = 1..num_steps.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from .ansatz import (
    NUMBER_CONSERVING,
    AnsatzSpec,
    build_ansatz_circuit,
    cdw_index,
    number_conserving_spec,
    oracle_spec,
)
from .gradients import make_batched_gradient
from .circuit import Circuit, apply_circuit
from .config import DEFAULT_TIMINGS, GateTimings
from .linalg import basis_state, overlap_sq
from .model import ModelParams, build_aubry_andre, jordan_wigner, pauli_to_dense
from .noise import NoiseParams, density_from_state, fidelity_state_density, run_noisy_circuit
from .optimize import (
    INVERSE_NOISY,
    FIDELITY_MODES,
    FidelityContext,
    OptResult,
    minimize_fidelity,
)
from .scheduler import schedule
from .trotter import TrotterConfig, trotter_step

EXACT = "exact"
TROTTER = "trotter"
RQD_NUMBER = "rqd_number"
RQD_ORACLE = "rqd_oracle"
STRATEGIES = (EXACT, TROTTER, RQD_NUMBER, RQD_ORACLE)

MAX_EXACT_QUBITS = 10

CSV_COLUMNS = (
    "t",
    "imbalance",
    "fidelity_noisy",
    "fidelity_pure",
    "objective",
    "iterations",
    "converged",
    "cum_circuit_ms",
)


class TooLarge(ValueError):
    pass


class ConfigMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    strategy: str
    noise: NoiseParams
    dt: float = 0.04
    num_steps: int = 125
    steps_per_restart: int = 1
    seed: int = 0
    tol: float = 1e-12
    max_iterations: int = 80
    fidelity_mode: str = INVERSE_NOISY
    log_pure_fidelity: bool = True
    trotter: TrotterConfig | None = None
    timings: GateTimings = DEFAULT_TIMINGS

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.num_steps < 1:
            raise ValueError("num_steps must be at least 1")
        if self.steps_per_restart < 1:
            raise ValueError("steps_per_restart must be at least 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.fidelity_mode not in FIDELITY_MODES:
            raise ValueError(f"unknown fidelity mode {self.fidelity_mode!r}")
        if self.trotter is not None and self.trotter.dt != self.dt:
            raise ValueError("trotter config dt disagrees with run dt")

    @property
    def num_particles(self) -> int:
        return (self.model.num_sites + 1) // 2

    def resolved_trotter(self) -> TrotterConfig:
        return self.trotter if self.trotter is not None else TrotterConfig(dt=self.dt)


@dataclass
class StepRecord:
    t: float
    imbalance: float
    fidelity_noisy: float
    fidelity_pure: float
    objective: float
    iterations: int
    converged: bool
    step_duration_ms: float
    cum_circuit_ms: float


@dataclass
class RqdTrajectory:
    config: RunConfig
    records: list[StepRecord] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def imbalances(self) -> np.ndarray:
        return np.array([r.imbalance for r in self.records])

    @property
    def fidelities_noisy(self) -> np.ndarray:
        return np.array([r.fidelity_noisy for r in self.records])

    @property
    def fidelities_pure(self) -> np.ndarray:
        return np.array([r.fidelity_pure for r in self.records])

    @property
    def final(self) -> StepRecord:
        return self.records[-1]


def _occupations(probs: np.ndarray, num_qubits: int) -> np.ndarray:
    """Per-qubit occupation from a basis-probability vector."""
    tensor = probs.reshape((2,) * num_qubits)
    occ = np.empty(num_qubits)
    for q in range(num_qubits):
        axes = tuple(a for a in range(num_qubits) if a != q)
        occ[q] = tensor.sum(axis=axes)[1]
    return occ


def imbalance(state: np.ndarray) -> float:
    """(N_even - N_odd) / (N_even + N_odd) over 1-indexed sites.

    Site k lives on qubit k - 1, so even sites are the odd qubits.
    Accepts a pure state vector or a density matrix; returns 0 when the
    total occupation is negligible.
    """
    if state.ndim == 1:
        probs = np.abs(state) ** 2
    else:
        probs = np.diag(state).real
    num_qubits = int(round(math.log2(probs.size)))
    occ = _occupations(probs, num_qubits)
    n_even = float(occ[1::2].sum())
    n_odd = float(occ[0::2].sum())
    total = n_even + n_odd
    if total < 1e-12:
        return 0.0
    return (n_even - n_odd) / total


def _dense_hamiltonian(model: ModelParams) -> np.ndarray:
    return pauli_to_dense(jordan_wigner(build_aubry_andre(model)))


def _exact_states(cfg: RunConfig) -> np.ndarray:
    """psi_exact(k*dt) for k = 0..num_steps via one eigendecomposition."""
    n = cfg.model.num_sites
    evals, evecs = np.linalg.eigh(_dense_hamiltonian(cfg.model))
    coeffs = evecs.conj().T @ basis_state(n, cdw_index(n, cfg.num_particles))
    ks = np.arange(cfg.num_steps + 1)
    phases = np.exp(-1j * np.outer(ks * cfg.dt, evals))
    return (phases * coeffs) @ evecs.T


def _initial_record(imb: float) -> StepRecord:
    return StepRecord(0.0, imb, 1.0, 1.0, math.nan, 0, True, 0.0, 0.0)


def exact_trajectory(cfg: RunConfig) -> RqdTrajectory:
    """Noise-free reference trajectory; fidelity columns are 1."""
    if cfg.model.num_sites > MAX_EXACT_QUBITS:
        raise TooLarge(f"exact reference capped at {MAX_EXACT_QUBITS} qubits")
    states = _exact_states(cfg)
    records = [_initial_record(imbalance(states[0]))]
    for k in range(1, cfg.num_steps + 1):
        records.append(
            StepRecord(k * cfg.dt, imbalance(states[k]), 1.0, 1.0, math.nan, 0, True, 0.0, 0.0)
        )
    return RqdTrajectory(replace(cfg, strategy=EXACT), records)


def run_trotter(cfg: RunConfig) -> RqdTrajectory:
    ham = jordan_wigner(build_aubry_andre(cfg.model))
    circ = trotter_step(ham, cfg.resolved_trotter(), cfg.timings)
    layered = schedule(circ)
    step_ms = layered.total_duration_ms
    states = _exact_states(cfg)

    psi0 = basis_state(cfg.model.num_sites, cdw_index(cfg.model.num_sites, cfg.num_particles))
    rho = density_from_state(psi0)
    psi_pure = psi0
    records = [_initial_record(imbalance(rho))]
    cum = 0.0
    for k in range(1, cfg.num_steps + 1):
        rho = run_noisy_circuit(rho, layered, cfg.noise)
        psi_pure = apply_circuit(psi_pure, circ)
        cum += step_ms
        pure_f = overlap_sq(states[k], psi_pure) if cfg.log_pure_fidelity else math.nan
        records.append(
            StepRecord(
                k * cfg.dt,
                imbalance(rho),
                fidelity_state_density(states[k], rho),
                pure_f,
                math.nan,
                0,
                True,
                step_ms,
                cum,
            )
        )
    return RqdTrajectory(cfg, records)


def _ansatz_spec(cfg: RunConfig) -> AnsatzSpec:
    n = cfg.model.num_sites
    if cfg.strategy == RQD_NUMBER:
        return number_conserving_spec(n, cfg.num_particles)
    return oracle_spec(jordan_wigner(build_aubry_andre(cfg.model)), cfg.num_particles)


def _noisy_preparation(spec: AnsatzSpec, theta: np.ndarray, cfg: RunConfig):
    circ = build_ansatz_circuit(spec, theta, cfg.timings)
    layered = schedule(circ)
    zeros = density_from_state(basis_state(spec.num_qubits, 0))
    rho = run_noisy_circuit(zeros, layered, cfg.noise)
    return rho, circ, layered.total_duration_ms


def run_rqd(cfg: RunConfig) -> RqdTrajectory:
    """Restart loop: noisy prepare, noisy step block, refit, re-prepare."""
    if cfg.strategy not in (RQD_NUMBER, RQD_ORACLE):
        raise ValueError(f"run_rqd got strategy {cfg.strategy!r}")
    spec = _ansatz_spec(cfg)
    ham = jordan_wigner(build_aubry_andre(cfg.model))
    step_circ = trotter_step(ham, cfg.resolved_trotter(), cfg.timings)
    layered_step = schedule(step_circ)
    step_ms = layered_step.total_duration_ms
    states = _exact_states(cfg)

    theta = np.zeros(spec.num_parameters)
    records = [_initial_record(imbalance(states[0]))]
    cum = 0.0
    k = 0
    prepared = None  # re-preparation of the previous block doubles as this block's start
    while k < cfg.num_steps:
        if prepared is None:
            rho, prep_circ, prep_ms = _noisy_preparation(spec, theta, cfg)
        else:
            rho, prep_circ, prep_ms = prepared
        cum += prep_ms
        psi_block = apply_circuit(basis_state(spec.num_qubits, 0), prep_circ)

        block = min(cfg.steps_per_restart, cfg.num_steps - k)
        for j in range(1, block + 1):
            rho = run_noisy_circuit(rho, layered_step, cfg.noise)
            psi_block = apply_circuit(psi_block, step_circ)
            cum += step_ms
            k += 1
            if j < block:
                # mid-block rows report the in-flight stepped state
                pure_f = overlap_sq(states[k], psi_block) if cfg.log_pure_fidelity else math.nan
                records.append(
                    StepRecord(
                        k * cfg.dt,
                        imbalance(rho),
                        fidelity_state_density(states[k], rho),
                        pure_f,
                        math.nan,
                        0,
                        True,
                        step_ms,
                        cum,
                    )
                )

        ctx = FidelityContext(spec, rho, cfg.noise, mode=cfg.fidelity_mode, timings=cfg.timings)
        gradient = make_batched_gradient(ctx) if spec.kind == NUMBER_CONSERVING else None
        result: OptResult = minimize_fidelity(
            ctx, theta, tol=cfg.tol, max_iterations=cfg.max_iterations, gradient=gradient
        )
        theta = result.params

        rho_rec, prep_circ, prep_ms = _noisy_preparation(spec, theta, cfg)
        prepared = (rho_rec, prep_circ, prep_ms)
        if cfg.log_pure_fidelity:
            psi_rec = apply_circuit(basis_state(spec.num_qubits, 0), prep_circ)
            pure_f = overlap_sq(states[k], psi_rec)
        else:
            pure_f = math.nan
        records.append(
            StepRecord(
                k * cfg.dt,
                imbalance(rho_rec),
                fidelity_state_density(states[k], rho_rec),
                pure_f,
                result.objective,
                result.iterations,
                result.converged,
                step_ms * block + prep_ms,
                cum,
            )
        )
    return RqdTrajectory(cfg, records)


def run(cfg: RunConfig) -> RqdTrajectory:
    if cfg.strategy == EXACT:
        return exact_trajectory(cfg)
    if cfg.strategy == TROTTER:
        return run_trotter(cfg)
    return run_rqd(cfg)


@dataclass
class AveragedTrajectory:
    times: np.ndarray
    imbalance: np.ndarray
    fidelity_noisy: np.ndarray
    fidelity_pure: np.ndarray
    num_runs: int


def average_trajectories(trajectories: list[RqdTrajectory]) -> AveragedTrajectory:
    if not trajectories:
        raise ConfigMismatch("nothing to average")
    first = trajectories[0]
    for traj in trajectories[1:]:
        if traj.config.dt != first.config.dt or traj.config.num_steps != first.config.num_steps:
            raise ConfigMismatch("trajectories disagree on dt or num_steps")
    return AveragedTrajectory(
        times=first.times,
        imbalance=np.mean([t.imbalances for t in trajectories], axis=0),
        fidelity_noisy=np.mean([t.fidelities_noisy for t in trajectories], axis=0),
        fidelity_pure=np.mean([t.fidelities_pure for t in trajectories], axis=0),
        num_runs=len(trajectories),
    )


def average_over_phi(configs: list[RunConfig], runner=run) -> AveragedTrajectory:
    """Run each config (they differ in disorder phase) and average."""
    if not configs:
        raise ConfigMismatch("nothing to run")
    for cfg in configs[1:]:
        if cfg.dt != configs[0].dt or cfg.num_steps != configs[0].num_steps:
            raise ConfigMismatch("configs disagree on dt or num_steps")
    return average_trajectories([runner(cfg) for cfg in configs])


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trajectory_csv(traj: RqdTrajectory, path: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for r in traj.records:
                writer.writerow(
                    [
                        _format_value(r.t),
                        _format_value(r.imbalance),
                        _format_value(r.fidelity_noisy),
                        _format_value(r.fidelity_pure),
                        _format_value(r.objective),
                        _format_value(r.iterations),
                        _format_value(r.converged),
                        _format_value(r.cum_circuit_ms),
                    ]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_trajectory_csv(path: str) -> dict[str, np.ndarray]:
    """Columns back as arrays; converged as 0/1 floats."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns in {path}: {reader.fieldnames}")
        rows = list(reader)
    out: dict[str, np.ndarray] = {}
    for col in CSV_COLUMNS:
        if col == "converged":
            out[col] = np.array([1.0 if r[col] == "true" else 0.0 for r in rows])
        else:
            out[col] = np.array([float(r[col]) for r in rows])
    return out
