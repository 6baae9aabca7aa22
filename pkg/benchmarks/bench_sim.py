"""Compare the compiled and pure-Python simulation backends.

Runs the same closed-loop scenario through both steppers and reports
steps per second and the speedup.  Usage:

    python benchmarks/bench_sim.py [--T 30] [--dt 0.001] [--repeat 5]
"""

import argparse
import time

import numpy as np

from adrckit.plant import CanonicalPlant
from adrckit.sim import DisturbanceModel, SimConfig, simulate
from adrckit.synthesis import DesiredSpectrum, synthesize


def best_rate(plant, gains, dist, cfg, backend, repeat):
    steps = int(round(cfg.T / cfg.dt))
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        simulate(plant, gains, dist, cfg, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return steps / best, best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=30.0, help="horizon [s]")
    ap.add_argument("--dt", type=float, default=1e-3, help="step size [s]")
    ap.add_argument("--repeat", type=int, default=5,
                    help="timed repetitions; the best one counts")
    args = ap.parse_args()

    plant = CanonicalPlant([4.0, 1.0, 2.0], -1.0)
    poles = [-2.0, -2.2, -2.4, -2.6, -2.8, -3.0, -3.2]
    gains = synthesize(plant, 1.0, DesiredSpectrum.from_poles(poles),
                       policy=[3, 4, 5]).gains
    dist = DisturbanceModel(d_ss=1.0,
                            A_d=np.array([[0.0, 0.5], [-0.5, 0.0]]),
                            C_d=np.array([1.0, 0.0]),
                            chi0=np.array([1.0, 0.0]))
    cfg = SimConfig(T=args.T, dt=args.dt, x0=[1.0, 0.0, 0.0])

    results = {}
    for backend in ("python", "compiled"):
        rate, wall = best_rate(plant, gains, dist, cfg, backend, args.repeat)
        results[backend] = rate
        print(f"{backend:>9}: {rate:12.0f} steps/s   ({wall * 1e3:8.2f} ms "
              f"for {int(round(args.T / args.dt))} steps)")
    print(f"  speedup: {results['compiled'] / results['python']:.1f}x")


if __name__ == "__main__":
    main()
