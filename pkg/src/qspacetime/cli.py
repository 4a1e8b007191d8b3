"""Command-line entry point.

    qspacetime <command> [--scenario FILE] [--seed N] [--samples N] [--out-dir DIR]

Exit status: 0 on success (an audit FAIL verdict is a result, not an error),
1 when a verification check fails, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import frames, polytope, swap, sync
from .hilbert import BELL_ORDER, Direction
from .report import build_report, emit_report
from .spacetime import SpacetimeLabel

COMMANDS = (
    "swap-verify",
    "timeline",
    "polytope",
    "tsirelson",
    "frame-recover",
    "radar",
    "audit",
    "signal-attempt",
)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    scenario: dict
    seed: int
    samples: int | None
    out_dir: Path


@dataclass
class Outcome:
    results: dict
    checks: dict
    tables: dict


def _directions(values, default):
    if values is None:
        return list(default)
    return [Direction.normalize(v) for v in values]


def _samples(config: RunConfig, default: int) -> int:
    if config.samples is not None:
        return int(config.samples)
    return int(config.scenario.get("N", config.scenario.get("samples", default)))


# --- command pipelines ---------------------------------------------------------


def run_swap_verify(config: RunConfig) -> Outcome:
    tol = float(config.scenario.get("tolerance", 1e-12))
    std = swap.verify_swap_identities("standard")
    magic = swap.verify_swap_identities("magic")
    rows = []
    for rep in (std, magic):
        for lhs, coeffs in rep.phase_table.items():
            for label, c in zip(BELL_ORDER, coeffs):
                rows.append((rep.convention, lhs, f"{label.value}(0,3){label.value}(1,2)", c.real, c.imag))
    return Outcome(
        results={"standard": std.to_dict(), "magic": magic.to_dict(), "tolerance": tol},
        checks={
            "standard_residuals_below_tolerance": std.max_residual < tol,
            "magic_reconstruction_below_tolerance": magic.max_residual < tol,
        },
        tables={"phase_table": (["convention", "lhs", "term", "re", "im"], rows)},
    )


def _timeline_from_scenario(scenario: dict) -> swap.Timeline:
    if "timeline" in scenario:
        return swap.Timeline.from_records(scenario["timeline"])
    a = Direction.normalize(scenario.get("a", [0.0, 0.0, 1.0]))
    b = Direction.normalize(scenario.get("b", [math.sin(math.pi / 3), 0.0, math.cos(math.pi / 3)]))
    return swap.swapping_timeline(a, b, scenario.get("keep", "PsiMinus"), bool(scenario.get("delayed", False)))


def run_timeline(config: RunConfig) -> Outcome:
    timeline = _timeline_from_scenario(config.scenario)
    runs = _samples(config, 10_000)
    result = swap.run_timeline(timeline, runs, rng=config.seed)
    checks = {}
    for st in result.pair_statistics:
        key = f"conditional_within_4se_{st.particles[0]}_{st.particles[1]}"
        checks[key] = abs(st.conditional - st.conditional_exact) <= 4 * st.conditional_se
    return Outcome(
        results={"timeline": timeline.to_records(), **result.summary()},
        checks=checks,
        tables={"log": (["run_id", "event_index", "x1", "x2", "x3", "x4", "action", "outcome"], result.records())},
    )


def _scenario_and_functional(scenario: dict):
    sc = polytope.Scenario(int(scenario.get("settings_a", 2)), int(scenario.get("settings_b", 2)))
    coeffs = scenario.get("functional")
    functional = polytope.CHSH if coeffs is None else polytope.CorrelationFunctional(tuple(coeffs))
    functional.matrix(sc)
    return sc, functional


def run_polytope(config: RunConfig) -> Outcome:
    sc, functional = _scenario_and_functional(config.scenario)
    report = polytope.polytope_report(sc, functional, polytope.OptimizerConfig(seed=config.seed))
    facets = [polytope.FacetInequality(tuple(f["coefficients"]), f["bound"]) for f in report["facets"]]
    roundtrip = polytope.vertices_from_facets(facets, sc.dimension) == polytope.enumerate_vertices(sc)
    rows = [(*f["coefficients"], f["bound"]) for f in report["facets"]]
    header = [f"E{i + 1}{j + 1}" for i in range(sc.settings_a) for j in range(sc.settings_b)] + ["bound"]
    return Outcome(
        results=report,
        checks={
            "facets_valid": all(f.satisfied_by(v) for f in facets for v in report["vertices"]),
            "vertex_roundtrip": roundtrip,
            "quantum_below_ceiling": report["quantum_value"] <= report["quantum_ceiling"] + 1e-9,
        },
        tables={"facets": (header, rows)},
    )


def run_tsirelson(config: RunConfig) -> Outcome:
    sc, functional = _scenario_and_functional(config.scenario)
    q = polytope.quantum_maximize(functional, sc, polytope.OptimizerConfig(seed=config.seed))
    classical = polytope.classical_bound(functional, sc)
    results = {"scenario": sc.to_dict(), "functional": list(functional.coefficients), "classical_bound": classical}
    results.update(q.to_dict())
    results["quantum_value"] = q.value
    checks = {"below_ceiling": q.value <= q.ceiling + 1e-9, "converged": q.converged}
    if q.scan_value is not None:
        checks["scan_agrees"] = abs(q.scan_value - q.value) <= 1e-6 or q.scan_value < q.value
    return Outcome(results, checks, {"trace": (["start", "value"], list(enumerate(q.trace)))})


def _rotation_from_scenario(scenario: dict, seed: int) -> np.ndarray:
    given = scenario.get("rotation", "random")
    if given == "random":
        return frames.random_rotation(seed)
    if isinstance(given, dict):
        return frames.rotation_about(Direction.normalize(given["axis"]), math.radians(float(given["angle_degrees"])))
    return np.asarray(given, dtype=float)


def run_frame_recover(config: RunConfig) -> Outcome:
    scenario = config.scenario
    mode = scenario.get("mode", "exact")
    n = _samples(config, 10_000)
    truth = _rotation_from_scenario(scenario, config.seed)
    oracle = frames.CorrelationOracle(truth, mode, n, rng=config.seed)
    method = scenario.get("method", "matrix")
    est = frames.recover_frame(oracle) if method == "matrix" else frames.build_triad(oracle)
    est.angular_errors = frames.axis_errors(est.rotation, frames.reveal_rotation(oracle))
    error = float(np.linalg.norm(est.rotation - truth))
    results = {"mode": mode, "N": n if mode == "sampled" else None, "method": method, **est.to_dict(), "frobenius_error": error}
    tol = 1e-9 if mode == "exact" and method == "matrix" else (1e-6 if mode == "exact" else math.inf)
    checks = {
        "proper_rotation": bool(
            np.allclose(est.rotation.T @ est.rotation, np.eye(3), atol=1e-9) and np.linalg.det(est.rotation) > 0
        ),
        "recovery_within_tolerance": error < tol,
    }
    rows = [(*a, *b, e) for a, b, e in oracle.log]
    return Outcome(results, checks, {"queries": (["a1", "a2", "a3", "b1", "b2", "b3", "E"], rows)})


DEFAULT_WORLD = {
    "dimension": 3,
    "observers": [
        {"id": "alice", "position": [0.0, 0.0, 0.0]},
        {"id": "bob", "position": [1.0, 2.0, 2.0]},
        {"id": "carol", "position": [-3.0, 4.0, 0.0]},
    ],
}


def run_radar(config: RunConfig) -> Outcome:
    scenario = config.scenario
    world = sync.World.from_dict(scenario.get("world", DEFAULT_WORLD))
    names = list(world.observers)
    origin = scenario.get("origin", names[0])
    t_emit = float(scenario.get("t_emit", 0.0))
    events = scenario.get("events")
    if events is None:
        events = [SpacetimeLabel.at(world.observers[n], 10.0 + k) for k, n in enumerate(names)]
    else:
        events = [SpacetimeLabel(*e) for e in events]
    labels, log = sync.assign_radar_coordinates(world, origin, events, return_log=True)
    o = np.array(SpacetimeLabel.at(world.observers[origin], 0.0).spatial)
    deviations = [
        max(abs(l.x4 - e.x4), float(np.max(np.abs(np.array(l.spatial) - (np.array(e.spatial) - o)))))
        for l, e in zip(labels, events)
    ]
    pairs = {}
    for other in names:
        if other != origin:
            r = sync.radar_synchronize(world, origin, other, t_emit)
            pairs[other] = {"t": r.coordinate.t, "distance": r.distance, "true_distance": world.distance(origin, other)}
    results = {
        "world": world.to_dict(),
        "origin": origin,
        "events": [list(e.as_tuple()) for e in events],
        "labels": [list(l.as_tuple()) for l in labels],
        "max_deviation": max(deviations, default=0.0),
        "synchronizations": pairs,
    }
    checks = {
        "labels_match_ground_truth": max(deviations, default=0.0) <= 1e-12,
        "kernel_causality": sync.check_causality(log, world),
        "distances_match": all(abs(p["distance"] - p["true_distance"]) <= 1e-12 for p in pairs.values()),
    }
    return Outcome(
        results, checks, {"events": (["event_id", "observer", "x1", "x2", "x3", "x4", "kind", "payload"], [r.row() for r in log])}
    )


def run_audit(config: RunConfig) -> Outcome:
    scenario = config.scenario
    box = sync.CorrelationBox.from_dict(scenario.get("box", "quantum_singlet"))
    report = sync.nosignaling_audit(
        box,
        _directions(scenario.get("settings_l"), sync.DEFAULT_SETTINGS),
        _directions(scenario.get("settings_r"), sync.DEFAULT_SETTINGS),
        samples=_samples(config, 100_000),
        significance=float(scenario.get("significance", 0.01)),
        rng=config.seed,
    )
    rows = [
        (c.side, c.local_setting, c.remote_pair[0], c.remote_pair[1], c.p_first, c.p_second, c.z, c.p_value)
        for c in report.comparisons
    ]
    header = ["side", "local_setting", "remote_a", "remote_b", "p_plus_a", "p_plus_b", "z", "p_value"]
    return Outcome(report.to_dict(), {}, {"comparisons": (header, rows)})


def run_signal_attempt(config: RunConfig) -> Outcome:
    scenario = config.scenario
    box = sync.CorrelationBox.from_dict(scenario.get("box", "quantum_singlet"))
    encoder = scenario.get("encoder", "flip_z")
    decoder = scenario.get("decoder", "majority_z")
    if encoder not in sync.ENCODERS or decoder not in sync.DECODERS:
        raise UsageError(f"encoder must be one of {sorted(sync.ENCODERS)}, decoder one of {sorted(sync.DECODERS)}")
    report = sync.entangled_sync_attempt(
        box, encoder, decoder, _samples(config, 100_000), rng=config.seed, block=int(scenario.get("block", 1))
    )
    world = sync.World.from_dict(scenario.get("world", {"dimension": 1, "observers": {"L": [0.0], "R": [1.0]}}))
    left, right = list(world.observers)[:2]
    dec = sync.DECODERS[decoder]
    settings = [(sync.ENCODERS[encoder](k % 2), dec.setting) for k in range(int(scenario.get("log_rounds", 20)))]
    log = sync.record_box_rounds(world, box, left, right, settings, rng=config.seed)
    return Outcome(
        report.to_dict(),
        {},
        {"events": (["event_id", "observer", "x1", "x2", "x3", "x4", "kind", "payload"], [r.row() for r in log])},
    )


PIPELINES = {
    "swap-verify": run_swap_verify,
    "timeline": run_timeline,
    "polytope": run_polytope,
    "tsirelson": run_tsirelson,
    "frame-recover": run_frame_recover,
    "radar": run_radar,
    "audit": run_audit,
    "signal-attempt": run_signal_attempt,
}


def run(config: RunConfig) -> int:
    """Execute one command; writes the report files and returns the exit status."""
    try:
        outcome = PIPELINES[config.command](config)
    except (KeyError, TypeError, ValueError, UsageError) as exc:
        print(f"error: malformed scenario for {config.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = build_report(config.command, config.seed, _recorded_config(config), outcome.results, outcome.checks)
    try:
        paths = emit_report(report, config.out_dir, outcome.tables)
    except OSError as exc:
        print(f"error: cannot write to {config.out_dir}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(paths[0])
    return EXIT_OK if report["status"] == "ok" else EXIT_VERIFY


def _recorded_config(config: RunConfig) -> dict:
    return {"scenario": config.scenario, "samples": config.samples}


def parse_args(argv=None) -> RunConfig:
    parser = argparse.ArgumentParser(prog="qspacetime", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", type=Path, help="JSON scenario file")
    parser.add_argument("--seed", type=int, help="64-bit seed (default: scenario seed or 0)")
    parser.add_argument("--samples", type=int, help="sample count, overrides the scenario's N")
    parser.add_argument("--out-dir", type=Path, default=Path("out"))
    args = parser.parse_args(argv)
    scenario = {}
    if args.scenario is not None:
        try:
            scenario = json.loads(args.scenario.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.exit(EXIT_USAGE, f"error: cannot read scenario {args.scenario}: {exc}\n")
        if not isinstance(scenario, dict):
            parser.exit(EXIT_USAGE, "error: scenario must be a JSON object\n")
    seed = args.seed if args.seed is not None else int(scenario.get("seed", 0))
    if not 0 <= seed < 2**64:
        parser.exit(EXIT_USAGE, "error: seed must be a 64-bit unsigned integer\n")
    return RunConfig(args.command, scenario, seed, args.samples, args.out_dir)


def main(argv=None) -> int:
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
