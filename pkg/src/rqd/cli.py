"""Experiment harness: config parsing, presets, sweeps, reports.

One JSON document describes a sweep over (strategy, disorder phase,
coherence time); every run writes one trajectory CSV plus a manifest
echoing the fully resolved configuration.  Re-running the echoed config
reproduces the CSVs byte for byte.

Each disorder phase gets its own compile seed, so the Trotter step is
recompiled with per-phase heuristics and the scheduled durations spread
the way a production transpiler spreads them across configurations.

Exit codes: 0 success, 1 configuration problem, 2 runtime failure with
whatever partial results completed left on disk.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import importlib.resources
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace

import jsonschema
import numpy as np

from . import __version__
from .config import DEFAULT_TIMINGS
from .driver import (
    STRATEGIES,
    RunConfig,
    run,
    write_trajectory_csv,
    read_trajectory_csv,
)
from .model import ModelParams, build_aubry_andre, jordan_wigner
from .noise import NoiseParams
from .scheduler import schedule
from .trotter import SEEDED, SEEDED_SHUFFLE, TrotterConfig, phi_compile_seed, trotter_step

PHI_TABLE = (
    1.93146731,
    5.64240529,
    1.57973617,
    0.08769829,
    4.42879993,
    1.59366522,
    1.69972758,
    3.26279226,
    6.09740422,
    3.34460202,
    3.26276960,
    4.52159699,
    2.94545992,
    4.71502552,
    1.08255072,
    4.85940981,
)

PRESET_FIG2 = "paper-fig2"
PRESET_FIG3 = "paper-fig3"
PRESETS = (PRESET_FIG2, PRESET_FIG3)

MANIFEST_NAME = "manifest.json"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    text = importlib.resources.files("rqd").joinpath("config_schema.json").read_text()
    return json.loads(text)


def resolve_phi_list(value) -> tuple[float, ...]:
    """A literal list passes through; `random:k:seed` draws k phases."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3 or parts[0] != "random":
            raise ConfigError(f"bad phi spec {value!r}, expected random:k:seed")
        try:
            count, seed = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad phi spec {value!r}") from exc
        if count < 1:
            raise ConfigError("phi count must be positive")
        rng = np.random.default_rng(seed)
        return tuple(float(p) for p in rng.uniform(0.0, 2.0 * math.pi, count))
    return tuple(float(p) for p in value)


@dataclass(frozen=True)
class ExperimentConfig:
    num_sites: int = 6
    hopping: float = 1.0
    disorder: float = 4.0
    interaction: float = 4.0
    modulation: float = math.sqrt(2.0)
    phi_list: tuple[float, ...] = PHI_TABLE
    dt: float = 0.04
    t_max: float = 5.0
    coherence_list: tuple[float, ...] = (25.0,)
    strategies: tuple[str, ...] = STRATEGIES
    output_dir: str | None = None
    parallelism: int = 1
    steps_per_restart: int = 1
    seed: int = 0

    @property
    def num_steps(self) -> int:
        steps = round(self.t_max / self.dt)
        if steps < 1:
            raise ConfigError("t_max shorter than one step")
        return steps


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected by schema: {exc.message}") from exc
    fields = dict(data)
    if "phi_list" in fields:
        fields["phi_list"] = resolve_phi_list(fields["phi_list"])
    for key in ("coherence_list", "strategies"):
        if key in fields:
            fields[key] = tuple(fields[key])
    return ExperimentConfig(**fields)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Fully resolved echo; feeding it back reproduces identical runs."""
    out = {
        "num_sites": cfg.num_sites,
        "hopping": cfg.hopping,
        "disorder": cfg.disorder,
        "interaction": cfg.interaction,
        "modulation": cfg.modulation,
        "phi_list": list(cfg.phi_list),
        "dt": cfg.dt,
        "t_max": cfg.t_max,
        "coherence_list": list(cfg.coherence_list),
        "strategies": list(cfg.strategies),
        "parallelism": cfg.parallelism,
        "steps_per_restart": cfg.steps_per_restart,
        "seed": cfg.seed,
    }
    if cfg.output_dir:
        out["output_dir"] = cfg.output_dir
    return out


def preset_config(name: str) -> ExperimentConfig:
    if name == PRESET_FIG2:
        return ExperimentConfig()
    if name == PRESET_FIG3:
        coherences = np.logspace(math.log10(0.25), math.log10(2500.0), 9)
        return ExperimentConfig(
            coherence_list=tuple(float(c) for c in coherences),
            strategies=("trotter", "rqd_number", "rqd_oracle"),
        )
    raise ConfigError(f"unknown preset {name!r}, expected one of {PRESETS}")


def apply_smoke(cfg: ExperimentConfig) -> ExperimentConfig:
    """Shrink to a 4-site, 5-step, 2-phase sanity sweep."""
    return replace(
        cfg,
        num_sites=4,
        phi_list=cfg.phi_list[:2],
        t_max=5 * cfg.dt,
    )


@dataclass(frozen=True)
class RunTask:
    strategy: str
    phi_index: int
    phi: float
    coherence_ms: float

    @property
    def filename(self) -> str:
        tag = f"{self.coherence_ms:g}".replace(".", "p")
        return f"traj_{self.strategy}_phi{self.phi_index:02d}_T{tag}.csv"


def expand_tasks(cfg: ExperimentConfig) -> list[RunTask]:
    return [
        RunTask(strategy, index, phi, coherence)
        for strategy in cfg.strategies
        for index, phi in enumerate(cfg.phi_list)
        for coherence in cfg.coherence_list
    ]


def _model(cfg: ExperimentConfig, phi: float) -> ModelParams:
    return ModelParams(
        num_sites=cfg.num_sites,
        hopping=cfg.hopping,
        disorder=cfg.disorder,
        interaction=cfg.interaction,
        modulation=cfg.modulation,
        disorder_phase=phi,
    )


def _trotter_config(cfg: ExperimentConfig, phi: float) -> TrotterConfig:
    return TrotterConfig(
        dt=cfg.dt,
        term_order=SEEDED_SHUFFLE,
        ladder_style=SEEDED,
        compile_seed=phi_compile_seed(phi, cfg.seed),
    )


def run_config_for_task(cfg: ExperimentConfig, task: RunTask) -> RunConfig:
    return RunConfig(
        model=_model(cfg, task.phi),
        strategy=task.strategy,
        noise=NoiseParams(t1_ms=task.coherence_ms, t2s_ms=task.coherence_ms),
        dt=cfg.dt,
        num_steps=cfg.num_steps,
        steps_per_restart=cfg.steps_per_restart,
        seed=phi_compile_seed(task.phi, cfg.seed),
        trotter=_trotter_config(cfg, task.phi),
    )


def _execute_task(payload: tuple[dict, dict, str]) -> dict:
    """Worker body: one run, one atomically written CSV, one status row."""
    cfg_dict, task_dict, output_dir = payload
    task = RunTask(**task_dict)
    row = {
        "file": task.filename,
        "strategy": task.strategy,
        "phi_index": task.phi_index,
        "phi": task.phi,
        "coherence_ms": task.coherence_ms,
        "status": "ok",
    }
    try:
        cfg = config_from_dict(cfg_dict)
        trajectory = run(run_config_for_task(cfg, task))
        write_trajectory_csv(trajectory, os.path.join(output_dir, task.filename))
    except Exception as exc:  # noqa: BLE001 - worker reports, orchestrator decides
        row["status"] = f"error: {exc}"
    return row


def _write_json_atomic(data: dict, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")
    os.replace(tmp, path)


def _resolve_output_dir(cfg: ExperimentConfig) -> str:
    out = cfg.output_dir or os.environ.get("RQD_OUTPUT_DIR")
    if not out:
        raise ConfigError("no output_dir in config and RQD_OUTPUT_DIR unset")
    return out


def cmd_run(config_path: str | None, preset: str | None, smoke: bool, workers: int | None) -> int:
    try:
        if preset is not None and config_path is not None:
            raise ConfigError("give a config file or a preset, not both")
        if preset is not None:
            # presets go through the same schema gate as files
            cfg = config_from_dict(config_to_dict(preset_config(preset)))
        elif config_path is not None:
            with open(config_path) as handle:
                cfg = config_from_dict(json.load(handle))
        else:
            raise ConfigError("need a config file or --preset")
        if smoke:
            cfg = apply_smoke(cfg)
        if workers is not None:
            if workers < 1:
                raise ConfigError("workers must be positive")
            cfg = replace(cfg, parallelism=workers)
        output_dir = _resolve_output_dir(cfg)
        os.makedirs(output_dir, exist_ok=True)
    except (ConfigError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    tasks = expand_tasks(cfg)
    cfg_dict = config_to_dict(cfg)
    payloads = [(cfg_dict, vars(task), output_dir) for task in tasks]
    started = time.monotonic()
    if cfg.parallelism > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            rows = list(pool.map(_execute_task, payloads))
    else:
        rows = [_execute_task(p) for p in payloads]

    manifest = {
        "config": cfg_dict,
        "version": __version__,
        "wall_time_s": time.monotonic() - started,
        "runs": rows,
    }
    _write_json_atomic(manifest, os.path.join(output_dir, MANIFEST_NAME))

    failures = [r for r in rows if r["status"] != "ok"]
    print(f"completed {len(rows) - len(failures)}/{len(rows)} runs -> {output_dir}")
    for row in failures:
        print(f"  failed {row['file']}: {row['status']}", file=sys.stderr)
    return EXIT_RUNTIME if failures else EXIT_OK


def _format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_report_csv(path: str, header: list[str], rows: list[list]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_format_cell(v) for v in row) + "\n")
    os.replace(tmp, path)


def circuit_table(cfg: ExperimentConfig) -> list[tuple[int, float, float, int, int]]:
    """(index, phi, total_time_ms, layers, gates) per disorder phase."""
    table = []
    for index, phi in enumerate(cfg.phi_list):
        ham = jordan_wigner(build_aubry_andre(_model(cfg, phi)))
        circ = trotter_step(ham, _trotter_config(cfg, phi), DEFAULT_TIMINGS)
        layered = schedule(circ)
        table.append(
            (index, phi, layered.total_duration_ms, len(layered.layers), len(circ.gates))
        )
    return table


def _coherence_tag(coherence: float) -> str:
    return f"{coherence:g}".replace(".", "p")


def cmd_report(results_dir: str) -> int:
    manifest_path = os.path.join(results_dir, MANIFEST_NAME)
    try:
        with open(manifest_path) as handle:
            manifest = json.load(handle)
        cfg = config_from_dict(manifest["config"])
    except (OSError, json.JSONDecodeError, KeyError, ConfigError, TypeError) as exc:
        print(f"cannot read manifest in {results_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    runs = [r for r in manifest.get("runs", []) if r["status"] == "ok"]
    if not runs:
        print(f"no successful runs recorded in {manifest_path}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        data = {r["file"]: read_trajectory_csv(os.path.join(results_dir, r["file"])) for r in runs}
    except (OSError, ValueError) as exc:
        print(f"malformed results: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    written = []

    # imbalance vs t, per phase plus the phase average, per (strategy, coherence)
    for strategy in cfg.strategies:
        for coherence in cfg.coherence_list:
            group = [
                r for r in runs
                if r["strategy"] == strategy and r["coherence_ms"] == coherence
            ]
            if not group:
                continue
            group.sort(key=lambda r: r["phi_index"])
            times = data[group[0]["file"]]["t"]
            columns = [data[r["file"]]["imbalance"] for r in group]
            mean = np.mean(columns, axis=0)
            header = ["t"] + [f"phi{r['phi_index']:02d}" for r in group] + ["mean"]
            rows = [
                [times[i]] + [c[i] for c in columns] + [mean[i]]
                for i in range(len(times))
            ]
            name = f"report_imbalance_{strategy}_T{_coherence_tag(coherence)}.csv"
            _write_report_csv(os.path.join(results_dir, name), header, rows)
            written.append(name)

    # end-time fidelity against coherence time, one column per strategy
    fid_rows = []
    for coherence in cfg.coherence_list:
        row = [coherence]
        for strategy in cfg.strategies:
            group = [
                r for r in runs
                if r["strategy"] == strategy and r["coherence_ms"] == coherence
            ]
            finals = [data[r["file"]]["fidelity_noisy"][-1] for r in group]
            row.append(float(np.mean(finals)) if finals else math.nan)
        fid_rows.append(row)
    name = "report_fidelity_vs_coherence.csv"
    _write_report_csv(
        os.path.join(results_dir, name),
        ["coherence_ms"] + list(cfg.strategies),
        fid_rows,
    )
    written.append(name)

    # fidelity vs t at each coherence, phase-averaged per strategy
    for coherence in cfg.coherence_list:
        per_strategy = {}
        times = None
        for strategy in cfg.strategies:
            group = [
                r for r in runs
                if r["strategy"] == strategy and r["coherence_ms"] == coherence
            ]
            if not group:
                continue
            times = data[group[0]["file"]]["t"]
            per_strategy[strategy] = np.mean(
                [data[r["file"]]["fidelity_noisy"] for r in group], axis=0
            )
        if not per_strategy:
            continue
        header = ["t"] + list(per_strategy)
        rows = [
            [times[i]] + [per_strategy[s][i] for s in per_strategy]
            for i in range(len(times))
        ]
        name = f"report_fidelity_vs_time_T{_coherence_tag(coherence)}.csv"
        _write_report_csv(os.path.join(results_dir, name), header, rows)
        written.append(name)

    # compiled-step shape per phase, no dynamics involved
    table = circuit_table(cfg)
    name = "report_circuits.csv"
    _write_report_csv(
        os.path.join(results_dir, name),
        ["phi_index", "phi", "total_time_ms", "layers", "gates"],
        [list(row) for row in table],
    )
    written.append(name)

    for name in written:
        print(f"wrote {os.path.join(results_dir, name)}")
    return EXIT_OK


def cmd_circuits(config_path: str) -> int:
    try:
        with open(config_path) as handle:
            cfg = config_from_dict(json.load(handle))
    except (OSError, json.JSONDecodeError, ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{'idx':>3}  {'phi':>12}  {'time_ms':>10}  {'layers':>6}  {'gates':>6}")
    for index, phi, total_ms, layers, gates in circuit_table(cfg):
        print(f"{index:>3}  {phi:>12.8f}  {total_ms:>10.6f}  {layers:>6}  {gates:>6}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="rqd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a sweep")
    p_run.add_argument("config", nargs="?", default=None, help="JSON config path")
    p_run.add_argument("--preset", choices=PRESETS, default=None)
    p_run.add_argument("--smoke", action="store_true", help="4 sites, 5 steps, 2 phases")
    p_run.add_argument("--workers", type=int, default=None)

    p_report = sub.add_parser("report", help="aggregate a results directory")
    p_report.add_argument("results_dir")

    p_circ = sub.add_parser("circuits", help="compile and time the step circuits")
    p_circ.add_argument("config")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.preset, args.smoke, args.workers)
    if args.command == "report":
        return cmd_report(args.results_dir)
    return cmd_circuits(args.config)


if __name__ == "__main__":
    sys.exit(main())
