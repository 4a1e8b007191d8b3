"""Median angular error of sampled frame recovery against shots per query."""

import argparse
import math

import numpy as np

from qspacetime.frames import CorrelationOracle, build_triad, random_rotation, recover_frame, rotation_angle
from qspacetime.rng import spawn


def median_error(method, shots, trials, seed):
    errs, queries = [], []
    for g in spawn(seed, trials):
        r = random_rotation(g)
        oracle = CorrelationOracle(r, "sampled", shots, rng=g)
        est = method(oracle)
        errs.append(rotation_angle(est.rotation, r))
        queries.append(est.queries_used)
    return float(np.median(errs)), float(np.mean(queries))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    for name, method, trials in (("matrix", recover_frame, args.trials), ("triad", build_triad, args.trials // 4)):
        print(f"{name} recovery")
        prev = None
        for k, shots in enumerate((250, 1_000, 4_000, 16_000, 64_000)):
            err, q = median_error(method, shots, trials, args.seed + k)
            ratio = "" if prev is None else f"  ratio {prev / err:.2f}"
            print(f"  N={shots:>6}  median error {math.degrees(err):8.4f} deg  queries {q:6.1f}{ratio}")
            prev = err


if __name__ == "__main__":
    main()
