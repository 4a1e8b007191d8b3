"""Classical versus quantum values of every CHSH-type facet and a few random functionals."""

import argparse

import numpy as np

from qspacetime.polytope import (
    CHSH_SCENARIO,
    CorrelationFunctional,
    classical_bound,
    enumerate_vertices,
    hull_facets,
    operator_norm_ceiling,
    quantum_maximize,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--random", type=int, default=5, help="number of random integer functionals")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'functional':>22} {'classical':>9} {'quantum':>12} {'ceiling':>12}")
    functionals = [CorrelationFunctional(f.coefficients) for f in hull_facets(enumerate_vertices(CHSH_SCENARIO))]
    rng = np.random.default_rng(args.seed)
    functionals += [CorrelationFunctional(tuple(rng.integers(-3, 4, size=4))) for _ in range(args.random)]
    for f in functionals:
        q = quantum_maximize(f, CHSH_SCENARIO)
        coeffs = "(" + ", ".join(f"{c:+.0f}" for c in f.coefficients) + ")"
        print(f"{coeffs:>22} {classical_bound(f, CHSH_SCENARIO):>9.0f} {q.value:>12.8f} "
              f"{operator_norm_ceiling(f, CHSH_SCENARIO):>12.8f}")


if __name__ == "__main__":
    main()
