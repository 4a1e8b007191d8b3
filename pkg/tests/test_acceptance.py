"""Exit criteria, one test per criterion.

Each test records a one-line verdict; ``conftest.py`` prints them at the end
of the session, and ``python tests/test_acceptance.py`` prints them directly.
"""

import math
import time

import numpy as np
import pytest

from qspacetime import frames, polytope, swap, sync
from qspacetime.hilbert import BELL_ORDER, Direction, Z_AXIS, bell_state, sample_spin_pairs, tensor
from qspacetime.rng import spawn
from qspacetime.spacetime import SpacetimeLabel

pytestmark = pytest.mark.acceptance

VERDICTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    VERDICTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, VERDICTS[n]


def test_criterion_1_swap_identities():
    start = time.perf_counter()
    std = swap.verify_swap_identities("standard")
    magic = swap.verify_swap_identities("magic")
    elapsed = time.perf_counter() - start
    table_ok = set(magic.phase_table) == {b.value for b in BELL_ORDER} and all(
        len(v) == 4 for v in magic.phase_table.values()
    )
    ok = std.max_residual < 1e-12 and std.offdiagonal_max < 1e-12 and table_ok and elapsed < 1.0
    record(1, ok, f"max residual {std.max_residual:.2e}, magic table emitted={table_ok}, {elapsed:.3f}s")


def test_criterion_2_entanglement_swapping():
    singlets = tensor(bell_state("PsiMinus"), bell_state("PsiMinus"))
    fid = min(swap.bell_measure_and_postselect(singlets, (1, 2), k).fidelity for k in BELL_ORDER)
    worst_dev, worst_order = 0.0, 0.0
    for k, theta in enumerate((math.pi / 6, math.pi / 3, 2 * math.pi / 3)):
        b = Direction.from_angles(theta)
        now = swap.run_timeline(swap.swapping_timeline(Z_AXIS, b), 100_000, rng=100 + k)
        later = swap.run_timeline(swap.swapping_timeline(Z_AXIS, b, delayed=True), 100_000, rng=200 + k)
        s1, s2 = now.statistic(0, 3), later.statistic(0, 3)
        worst_dev = max(worst_dev, abs(s1.conditional + math.cos(theta)), abs(s2.conditional + math.cos(theta)))
        se = math.hypot(s1.conditional_se, s2.conditional_se)
        worst_order = max(worst_order, abs(s1.conditional - s2.conditional) / se)
        # fraction kept is also a statistic of the run
        pk1, pk2 = now.kept_runs / now.runs, later.kept_runs / later.runs
        se_k = math.sqrt(0.25 * 0.75 * 2 / now.runs)
        worst_order = max(worst_order, abs(pk1 - pk2) / se_k)
    ok = abs(fid - 1) < 1e-12 and worst_dev < 0.02 and worst_order < 3
    record(2, ok, f"min fidelity {fid:.15f}, max |E+cos| {worst_dev:.4f}, delayed-order shift {worst_order:.2f} SE")


def test_criterion_3_polytope():
    start = time.perf_counter()
    sc = polytope.CHSH_SCENARIO
    vertices = polytope.enumerate_vertices(sc)
    facets = polytope.hull_facets(vertices)
    chsh_type = {f.coefficients for f in facets if f.bound == 2}
    expected = {
        tuple(s * c for c in base)
        for s in (1, -1)
        for base in [(1, 1, 1, -1), (1, 1, -1, 1), (1, -1, 1, 1), (-1, 1, 1, 1)]
    }
    classical = polytope.classical_bound(polytope.CHSH, sc)
    q = polytope.quantum_maximize(polytope.CHSH, sc)
    ceiling = polytope.operator_norm_ceiling(polytope.CHSH, sc)
    elapsed = time.perf_counter() - start
    ok = (
        len(vertices) == 8
        and chsh_type == expected
        and classical == 2
        and abs(q.value - 2 * math.sqrt(2)) < 1e-6
        and abs(q.value - ceiling) < 1e-6
        and elapsed < 10
    )
    record(
        3,
        ok,
        f"{len(vertices)} vertices, {len(chsh_type)} CHSH facets (+{len(facets) - len(chsh_type)} trivial), "
        f"classical {classical}, quantum {q.value:.10f}, {elapsed:.2f}s",
    )


def _median_sampled_error(n: int, seed: int, trials: int = 200) -> float:
    errs = []
    for g in spawn(seed, trials):
        r = frames.random_rotation(g)
        est = frames.recover_frame(frames.CorrelationOracle(r, "sampled", n, rng=g))
        errs.append(frames.rotation_angle(est.rotation, r))
    return float(np.median(errs))


def test_criterion_4_frame_recovery():
    worst = 0.0
    for g in spawn(4, 100):
        r = frames.random_rotation(g)
        est = frames.recover_frame(frames.CorrelationOracle(r))
        worst = max(worst, float(np.linalg.norm(est.rotation - r)))
    ratios = [_median_sampled_error(n, 40 + k) / _median_sampled_error(4 * n, 50 + k) for k, n in enumerate((1_000, 10_000))]
    # halving within a factor 1.5: ratio in [2/1.5, 2*1.5]
    ok = worst < 1e-9 and all(2 / 1.5 <= x <= 3 for x in ratios)
    record(4, ok, f"exact max error {worst:.2e}, sampled N->4N median error ratios {[round(x, 3) for x in ratios]}")


def test_criterion_5_radar():
    line = sync.World(1, {"a": (0.0,), "b": (2.0,), "c": (-5.0,), "d": (7.5,)})
    space = sync.World(3, {"o": (0.0, 0.0, 0.0), "p": (1.0, 2.0, 2.0), "q": (-3.0, 4.0, 0.0), "r": (0.5, -0.25, 7.0)})
    worst = 0.0
    for world, origin in ((line, "a"), (space, "o")):
        o = np.array(SpacetimeLabel.at(world.observers[origin], 0.0).spatial)
        events = [SpacetimeLabel.at(p, 3.0 + 2.5 * k) for k, p in enumerate(world.observers.values())]
        labels = sync.assign_radar_coordinates(world, origin, events)
        for got, ev in zip(labels, events):
            worst = max(worst, abs(got.x4 - ev.x4), float(np.max(np.abs(np.array(got.spatial) - (np.array(ev.spatial) - o)))))
    r = sync.radar_synchronize(line, "a", "b")
    ok = worst <= 1e-12 and (r.coordinate.t, r.distance) == (2.0, 2.0)
    record(5, ok, f"max deviation from ground truth {worst:.1e} (1D and 3D)")


def test_criterion_6_audit():
    verdicts = {}
    for k, kind in enumerate(("classical_linear", "quantum_singlet", "heaviside")):
        verdicts[kind] = sync.nosignaling_audit(sync.CorrelationBox(kind), samples=100_000, significance=0.01, rng=60 + k).verdict
    sig = sync.nosignaling_audit(sync.CorrelationBox("signaling", 0.2), samples=10_000, significance=0.01, rng=66)
    ok = all(v == "PASS" for v in verdicts.values()) and sig.verdict == "FAIL" and abs(sig.effect_size - 0.2) <= 0.02
    record(6, ok, f"{verdicts}, signaling {sig.verdict} with bias {sig.effect_size:.4f}")


def test_criterion_7_signaling_attempt():
    worst = 0.0
    seeds = iter(range(700, 1000))
    for kind in ("classical_linear", "quantum_singlet", "heaviside"):
        for enc in sync.ENCODERS:
            for dec in sync.DECODERS:
                rep = sync.entangled_sync_attempt(sync.CorrelationBox(kind), enc, dec, 100_000, rng=next(seeds))
                worst = max(worst, rep.mutual_information)
    sig = sync.entangled_sync_attempt(sync.CorrelationBox("signaling", 0.2), "flip_z", "majority_z", 10_000, rng=77)
    ok = worst < 1e-3 and sig.mutual_information > 0.01
    record(7, ok, f"max non-signaling MI {worst:.2e} bits, signaling MI {sig.mutual_information:.4f} bits")


def test_criterion_8_cross_validation():
    box = sync.CorrelationBox("quantum_singlet")
    singlet = bell_state("PsiMinus")
    n = 20_000
    gen = np.random.default_rng(8)
    worst = 0.0
    for _ in range(20):
        a = Direction.normalize(gen.normal(size=3))
        b = Direction.normalize(gen.normal(size=3))
        l, r = box.sample(a, b, n, gen)
        pairs = sample_spin_pairs(singlet, a, b, n, gen)
        for x, y in ((l * r, pairs[:, 0] * pairs[:, 1]), (l, pairs[:, 0]), (r, pairs[:, 1])):
            se = math.sqrt(x.var(ddof=1) / n + y.var(ddof=1) / n)
            worst = max(worst, abs(x.mean() - y.mean()) / se)
    ok = worst < 3
    record(8, ok, f"max deviation {worst:.2f} combined SE over 20 setting pairs (E and both marginals)")


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failures += 1
    for n in sorted(VERDICTS):
        print(VERDICTS[n])
    sys.exit(1 if failures else 0)
