#!/usr/bin/env python3
"""Side-by-side strategy comparison at a single disorder phase.

Runs each requested strategy once and prints final imbalance and
fidelity, plus cumulative circuit time for the noisy runs.  Handy for
eyeballing the noise-resilience gap without the full sweep.
"""

import argparse
import time

from rqd.cli import PHI_TABLE
from rqd.driver import STRATEGIES, RunConfig, run
from rqd.model import ModelParams
from rqd.noise import NoiseParams
from rqd.trotter import SEEDED, SEEDED_SHUFFLE, TrotterConfig, phi_compile_seed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sites", type=int, default=6)
    parser.add_argument("--steps", type=int, default=125)
    parser.add_argument("--dt", type=float, default=0.04)
    parser.add_argument("--phi", type=float, default=PHI_TABLE[0])
    parser.add_argument("--coherence", type=float, default=25.0,
                        help="T1 = T2* in ms")
    parser.add_argument("--strategies", nargs="+", default=list(STRATEGIES),
                        choices=list(STRATEGIES))
    args = parser.parse_args()

    model = ModelParams(num_sites=args.sites, disorder_phase=args.phi)
    noise = NoiseParams(t1_ms=args.coherence, t2s_ms=args.coherence)
    trotter = TrotterConfig(
        dt=args.dt,
        term_order=SEEDED_SHUFFLE,
        ladder_style=SEEDED,
        compile_seed=phi_compile_seed(args.phi, 0),
    )

    print(f"sites={args.sites}  steps={args.steps}  dt={args.dt}  "
          f"phi={args.phi:.8f}  T={args.coherence:g} ms")
    print(f"{'strategy':<12} {'imbalance':>10} {'fid_noisy':>10} "
          f"{'fid_pure':>10} {'circ_ms':>10} {'wall_s':>8}")
    for strategy in args.strategies:
        cfg = RunConfig(model=model, strategy=strategy, noise=noise,
                        dt=args.dt, num_steps=args.steps, trotter=trotter)
        start = time.perf_counter()
        traj = run(cfg)
        wall = time.perf_counter() - start
        rec = traj.final
        print(f"{strategy:<12} {rec.imbalance:>10.4f} "
              f"{rec.fidelity_noisy:>10.4f} {rec.fidelity_pure:>10.4f} "
              f"{rec.cum_circuit_ms:>10.4f} {wall:>8.1f}")


if __name__ == "__main__":
    main()
