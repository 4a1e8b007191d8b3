"""Entanglement swapping on four qubits, and timelines of swapping experiments.

Particle indices are zero-based: the outer pair of a standard swapping run is
``(0, 3)`` and the inner pair is ``(1, 2)``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .hilbert import (
    BELL_ORDER,
    Bell,
    StateVector,
    as_direction,
    bell_basis_matrix,
    bell_state,
    embed_operator,
    permute_subsystems,
    spin_observable,
    tensor,
    tensor_all,
    MAX_QUBITS,
    Direction,
)
from .rng import RngLike, make_rng
from .spacetime import SpacetimeLabel

POSTSELECT_FLOOR = 1e-12

# Signs of the diagonal terms (Psi+Psi+, Psi-Psi-, Phi+Phi+, Phi-Phi-) in the
# outer(0,3)/inner(1,2) expansion of |B_01 B_23>, standard phases, each times 1/2.
SWAP_SIGN_TABLE: dict[Bell, tuple[int, int, int, int]] = {
    Bell.PSI_MINUS: (+1, -1, -1, +1),
    Bell.PSI_PLUS: (+1, -1, +1, -1),
    Bell.PHI_MINUS: (-1, -1, +1, +1),
    Bell.PHI_PLUS: (+1, +1, +1, +1),
}


class EmptyPostselectionError(RuntimeError):
    pass


class TimelineError(ValueError):
    pass


def _pair_permutation(outer: Sequence[int], inner: Sequence[int]) -> list[int]:
    order = [int(q) for q in (*outer, *inner)]
    if sorted(order) != [0, 1, 2, 3]:
        raise ValueError(f"outer {tuple(outer)} and inner {tuple(inner)} must partition (0, 1, 2, 3)")
    perm = [0] * 4
    for pos, q in enumerate(order):
        perm[q] = pos
    return perm


@dataclass(frozen=True)
class PairBasisExpansion:
    coefficients: np.ndarray  # (outer label, inner label), rows/cols in BELL_ORDER
    convention: str
    outer: tuple[int, int]
    inner: tuple[int, int]

    def coefficient(self, outer_label, inner_label) -> complex:
        i = BELL_ORDER.index(Bell.parse(outer_label))
        j = BELL_ORDER.index(Bell.parse(inner_label))
        return complex(self.coefficients[i, j])

    def total_weight(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def nonzero(self, tol: float = 1e-12) -> dict[tuple[Bell, Bell], complex]:
        out = {}
        for i, j in itertools.product(range(4), range(4)):
            c = self.coefficients[i, j]
            if abs(c) > tol:
                out[(BELL_ORDER[i], BELL_ORDER[j])] = complex(c)
        return out


def expand_in_pair_bases(
    state4: StateVector, outer: Sequence[int], inner: Sequence[int], convention: str = "standard"
) -> PairBasisExpansion:
    """Coefficients ``<B_i(outer) B_j(inner)|psi>`` of a four-qubit state."""
    if state4.num_qubits != 4:
        raise ValueError("expansion needs a four-qubit state")
    perm = _pair_permutation(outer, inner)
    psi = permute_subsystems(state4, perm).amplitudes.reshape(4, 4)
    basis = bell_basis_matrix(convention)
    coeffs = basis @ psi @ basis.T
    coeffs.setflags(write=False)
    return PairBasisExpansion(coeffs, convention, tuple(outer), tuple(inner))


def outer_inner_product(outer_label, inner_label, convention: str = "standard") -> StateVector:
    """``|B(0,3) B(1,2)>`` placed back into natural qubit order."""
    built = tensor(bell_state(outer_label, convention), bell_state(inner_label, convention))
    # built has qubit order (0, 3, 1, 2)
    return permute_subsystems(built, [0, 3, 1, 2])


def bell_pair_product(label, convention: str = "standard") -> StateVector:
    """``|B_01 B_23>`` for the same label on both pairs."""
    return tensor(bell_state(label, convention), bell_state(label, convention))


@dataclass
class SwapIdentityReport:
    convention: str
    residuals: dict[str, float]
    phase_table: dict[str, list[complex]]
    offdiagonal_max: float
    tabulated_sign_residuals: dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "residuals": dict(self.residuals),
            "max_residual": self.max_residual,
            "offdiagonal_max": self.offdiagonal_max,
            "phase_table": {
                k: [[float(c.real), float(c.imag)] for c in v] for k, v in self.phase_table.items()
            },
            "tabulated_sign_residuals": dict(self.tabulated_sign_residuals),
        }


def _reconstruct(coeffs: Sequence[complex], convention: str) -> np.ndarray:
    rhs = np.zeros(16, dtype=complex)
    for c, label in zip(coeffs, BELL_ORDER):
        rhs += c * outer_inner_product(label, label, convention).amplitudes
    return rhs


def verify_swap_identities(convention: str = "standard") -> SwapIdentityReport:
    """Check the four outer/inner decompositions of ``|B_01 B_23>``.

    In the standard convention each left-hand side is rebuilt from
    :data:`SWAP_SIGN_TABLE`. In the magic convention the relative phases are
    not tabulated; they are computed by expansion, the state is rebuilt from
    them, and the residual of naively reusing the standard signs is reported
    alongside.
    """
    residuals, table, tabulated = {}, {}, {}
    off = 0.0
    for label in SWAP_SIGN_TABLE:
        lhs = bell_pair_product(label, convention).amplitudes
        expansion = expand_in_pair_bases(StateVector(4, lhs), (0, 3), (1, 2), convention)
        diag = [complex(expansion.coefficients[k, k]) for k in range(4)]
        mask = ~np.eye(4, dtype=bool)
        off = max(off, float(np.max(np.abs(expansion.coefficients[mask]))))
        signed = [0.5 * s for s in SWAP_SIGN_TABLE[label]]
        tabulated[label.value] = float(np.max(np.abs(lhs - _reconstruct(signed, convention))))
        coeffs = signed if convention == "standard" else diag
        residuals[label.value] = float(np.max(np.abs(lhs - _reconstruct(coeffs, convention))))
        table[label.value] = diag
    return SwapIdentityReport(convention, residuals, table, off, tabulated)


@dataclass
class PostselectionResult:
    outer: tuple[int, int]
    inner: tuple[int, int]
    keep: Bell
    probabilities: dict[Bell, float]
    counts: dict[Bell, int]
    outer_state: StateVector
    fidelity: float


def bell_measure_and_postselect(
    state4: StateVector,
    inner: Sequence[int],
    keep,
    rng: RngLike = None,
    shots: int = 0,
    convention: str = "standard",
) -> PostselectionResult:
    """Bell measurement on ``inner``, conditioned on outcome ``keep``.

    ``shots`` Bell-basis outcomes are sampled for the ensemble counts; the
    returned outer state and its fidelity to the Bell state with label
    ``keep`` are exact.
    """
    if state4.num_qubits != 4:
        raise ValueError("postselection needs a four-qubit state")
    inner = tuple(int(q) for q in inner)
    outer = tuple(q for q in range(4) if q not in inner)
    if len(inner) != 2 or len(outer) != 2:
        raise ValueError(f"inner pair {inner} must be two distinct qubits of four")
    keep = Bell.parse(keep)
    perm = _pair_permutation(outer, inner)
    psi = permute_subsystems(state4, perm).amplitudes.reshape(4, 4)
    basis = bell_basis_matrix(convention)
    branches = psi @ basis.T  # column k: unnormalized outer state for inner outcome k
    probs = np.sum(np.abs(branches) ** 2, axis=0)
    k = BELL_ORDER.index(keep)
    if probs[k] < POSTSELECT_FLOOR:
        raise EmptyPostselectionError(f"inner outcome {keep.value} has probability {probs[k]:.3g}")
    outer_state = StateVector(2, branches[:, k] / np.sqrt(probs[k]))
    fidelity = abs(bell_state(keep, convention).inner(outer_state)) ** 2
    counts = {label: 0 for label in BELL_ORDER}
    if shots:
        drawn = make_rng(rng).multinomial(shots, probs / probs.sum())
        counts = {label: int(c) for label, c in zip(BELL_ORDER, drawn)}
    return PostselectionResult(
        outer=outer,
        inner=inner,
        keep=keep,
        probabilities={label: float(p) for label, p in zip(BELL_ORDER, probs)},
        counts=counts,
        outer_state=outer_state,
        fidelity=float(fidelity),
    )


# --- timelines -------------------------------------------------------------


@dataclass(frozen=True)
class PreparePair:
    i: int
    j: int
    state: Bell = Bell.PSI_MINUS
    name = "prepare_pair"


@dataclass(frozen=True)
class BellMeasure:
    i: int
    j: int
    name = "bell_measure"


@dataclass(frozen=True)
class LocalMeasure:
    i: int
    direction: Direction
    name = "local_measure"


@dataclass(frozen=True)
class Postselect:
    label: Bell
    name = "postselect"


Action = Union[PreparePair, BellMeasure, LocalMeasure, Postselect]


@dataclass(frozen=True)
class TimelineEvent:
    label: SpacetimeLabel
    action: Action


@dataclass(frozen=True)
class Timeline:
    events: tuple[TimelineEvent, ...]

    def __post_init__(self):
        events = tuple(self.events)
        for prev, cur in zip(events, events[1:]):
            if cur.label.x4 < prev.label.x4:
                raise TimelineError("event times must be nondecreasing in sequence order")
        object.__setattr__(self, "events", events)

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "Timeline":
        events = []
        for rec in records:
            label = SpacetimeLabel(*rec.get("x", (0.0, 0.0, 0.0, 0.0)))
            kind = rec["action"]
            if kind == "prepare_pair":
                i, j = rec["particles"]
                action = PreparePair(int(i), int(j), Bell.parse(rec.get("state", "PsiMinus")))
            elif kind == "bell_measure":
                i, j = rec["particles"]
                action = BellMeasure(int(i), int(j))
            elif kind == "local_measure":
                action = LocalMeasure(int(rec["particle"]), Direction.normalize(rec["direction"]))
            elif kind == "postselect":
                action = Postselect(Bell.parse(rec["label"]))
            else:
                raise TimelineError(f"unknown action {kind!r}")
            events.append(TimelineEvent(label, action))
        return cls(tuple(events))

    def to_records(self) -> list[dict]:
        out = []
        for ev in self.events:
            rec: dict = {"x": list(ev.label.as_tuple()), "action": ev.action.name}
            a = ev.action
            if isinstance(a, PreparePair):
                rec.update(particles=[a.i, a.j], state=a.state.value)
            elif isinstance(a, BellMeasure):
                rec.update(particles=[a.i, a.j])
            elif isinstance(a, LocalMeasure):
                rec.update(particle=a.i, direction=list(a.direction.components))
            else:
                rec.update(label=a.label.value)
            out.append(rec)
        return out


def swapping_timeline(a, b, keep=Bell.PSI_MINUS, delayed: bool = False) -> Timeline:
    """The standard swapping run: two singlets, inner Bell measurement, outer spin measurements.

    With ``delayed`` the outer particles are measured before the inner Bell
    measurement happens.
    """
    a, b = as_direction(a), as_direction(b)
    prep = [
        TimelineEvent(SpacetimeLabel(0.0, 0.0, 0.0, 0.0), PreparePair(0, 1)),
        TimelineEvent(SpacetimeLabel(1.0, 0.0, 0.0, 0.0), PreparePair(2, 3)),
    ]
    bell = [
        TimelineEvent(SpacetimeLabel(0.5, 0.0, 0.0, 2.0 if not delayed else 5.0), BellMeasure(1, 2)),
        TimelineEvent(SpacetimeLabel(0.5, 0.0, 0.0, 2.0 if not delayed else 5.0), Postselect(Bell.parse(keep))),
    ]
    local = [
        TimelineEvent(SpacetimeLabel(-1.0, 0.0, 0.0, 3.0), LocalMeasure(0, a)),
        TimelineEvent(SpacetimeLabel(2.0, 0.0, 0.0, 3.0), LocalMeasure(3, b)),
    ]
    return Timeline(tuple(prep + (local + bell if delayed else bell + local)))


@dataclass
class PairStatistic:
    particles: tuple[int, int]
    conditional: float
    conditional_se: float
    conditional_exact: float
    unconditional: float
    unconditional_se: float
    unconditional_exact: float

    def to_dict(self) -> dict:
        return {
            "particles": list(self.particles),
            "conditional": self.conditional,
            "conditional_se": self.conditional_se,
            "conditional_exact": self.conditional_exact,
            "unconditional": self.unconditional,
            "unconditional_se": self.unconditional_se,
            "unconditional_exact": self.unconditional_exact,
        }


@dataclass
class TimelineResult:
    timeline: Timeline
    runs: int
    outcomes: np.ndarray  # (runs, n_events); Bell index, +-1, kept flag, or 0 for prepare
    kept: np.ndarray
    keep_probability: float
    pair_statistics: list[PairStatistic]
    bell_frequencies: dict[int, dict[str, float]]

    @property
    def kept_runs(self) -> int:
        return int(self.kept.sum())

    def statistic(self, i: int, j: int) -> PairStatistic:
        for st in self.pair_statistics:
            if set(st.particles) == {i, j}:
                return st
        raise KeyError((i, j))

    def records(self) -> Iterator[tuple]:
        """(run_id, event_index, x1, x2, x3, x4, action, outcome) rows."""
        for run in range(self.runs):
            for k, ev in enumerate(self.timeline.events):
                yield (run, k, *ev.label.as_tuple(), ev.action.name, self._outcome_text(ev.action, self.outcomes[run, k]))

    @staticmethod
    def _outcome_text(action, value) -> str:
        if isinstance(action, BellMeasure):
            return BELL_ORDER[int(value)].value
        if isinstance(action, LocalMeasure):
            return "+1" if value > 0 else "-1"
        if isinstance(action, Postselect):
            return "kept" if value else "discarded"
        return ""

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run_id", "event_index", "x1", "x2", "x3", "x4", "action", "outcome"])
            w.writerows(self.records())

    def summary(self) -> dict:
        return {
            "runs": self.runs,
            "kept_runs": self.kept_runs,
            "keep_probability": self.keep_probability,
            "pair_statistics": [s.to_dict() for s in self.pair_statistics],
            "bell_frequencies": {str(k): v for k, v in self.bell_frequencies.items()},
        }


def _eigen_rows(direction) -> np.ndarray:
    """Rows <+d|, <-d| for a spin measurement along ``direction``."""
    vals, vecs = np.linalg.eigh(spin_observable(direction))
    order = np.argsort(vals)[::-1]
    return vecs[:, order].conj().T


def _validate(timeline: Timeline) -> tuple[list[PreparePair], int]:
    prepared: set[int] = set()
    measured: set[int] = set()
    pairs: list[PreparePair] = []
    last_bell = None
    for k, ev in enumerate(timeline.events):
        a = ev.action
        if isinstance(a, PreparePair):
            if a.i == a.j or {a.i, a.j} & prepared:
                raise TimelineError(f"event {k}: particles {a.i},{a.j} already prepared or repeated")
            prepared |= {a.i, a.j}
            pairs.append(a)
        elif isinstance(a, (BellMeasure, LocalMeasure)):
            targets = {a.i, a.j} if isinstance(a, BellMeasure) else {a.i}
            if isinstance(a, BellMeasure) and a.i == a.j:
                raise TimelineError(f"event {k}: Bell measurement needs two particles")
            missing = targets - prepared
            if missing:
                raise TimelineError(f"event {k}: action on unprepared particle(s) {sorted(missing)}")
            if targets & measured:
                raise TimelineError(f"event {k}: particle(s) {sorted(targets & measured)} already measured")
            measured |= targets
            if isinstance(a, BellMeasure):
                last_bell = k
        elif isinstance(a, Postselect):
            if last_bell is None:
                raise TimelineError(f"event {k}: postselection before any Bell measurement")
    n = len(prepared)
    if prepared != set(range(n)):
        raise TimelineError(f"particles must be numbered 0..{n - 1}, got {sorted(prepared)}")
    if n > MAX_QUBITS:
        raise TimelineError(f"{n} particles exceeds capacity {MAX_QUBITS}")
    return pairs, n


def run_timeline(timeline: Timeline, runs: int, rng: RngLike = None) -> TimelineResult:
    """Execute ``runs`` repetitions of ``timeline``.

    The joint outcome distribution comes from the state algebra; all
    measurements act on distinct particles and commute, so the order in
    which the timeline lists them only affects the event log.
    """
    pairs, n = _validate(timeline)
    order = [q for p in pairs for q in (p.i, p.j)]
    state = tensor_all(bell_state(p.state) for p in pairs)
    perm = [0] * n
    for pos, q in enumerate(order):
        perm[pos] = q
    state = permute_subsystems(state, perm)

    measurements = [
        (k, ev.action)
        for k, ev in enumerate(timeline.events)
        if isinstance(ev.action, (BellMeasure, LocalMeasure))
    ]
    psi = state.amplitudes
    axes: list[list[int]] = []
    for _, a in measurements:
        if isinstance(a, BellMeasure):
            psi = embed_operator(bell_basis_matrix(), [a.i, a.j], n) @ psi
            axes.append([a.i, a.j])
        else:
            psi = embed_operator(_eigen_rows(a.direction), [a.i], n) @ psi
            axes.append([a.i])
    probs = (np.abs(psi) ** 2).reshape((2,) * n)
    measured = [q for ax in axes for q in ax]
    unmeasured = tuple(q for q in range(n) if q not in measured)
    probs = probs.sum(axis=unmeasured) if unmeasured else probs
    # remaining axes are measured qubits in ascending order; reorder to measurement order
    remaining = sorted(measured)
    probs = np.transpose(probs, [remaining.index(q) for q in measured])
    shape = [4 if len(ax) == 2 else 2 for ax in axes]
    joint = probs.reshape(shape)
    joint = joint / joint.sum()

    # outcome codes per measurement axis
    codes = [np.arange(4) if s == 4 else np.array([1, -1]) for s in shape]
    meas_index = {k: m for m, (k, _) in enumerate(measurements)}

    # postselection mask on the exact table
    keep_mask = np.ones(shape, dtype=bool)
    post_targets = []
    last = None
    for k, ev in enumerate(timeline.events):
        if isinstance(ev.action, BellMeasure):
            last = meas_index[k]
        elif isinstance(ev.action, Postselect):
            idx = BELL_ORDER.index(ev.action.label)
            sel = [slice(None)] * len(shape)
            cond = np.zeros(shape, dtype=bool)
            sel[last] = idx
            cond[tuple(sel)] = True
            keep_mask &= cond
            post_targets.append((k, last, idx))
    keep_probability = float(joint[keep_mask].sum())
    if post_targets and keep_probability < POSTSELECT_FLOOR:
        raise EmptyPostselectionError("postselection condition has zero probability")

    flat = make_rng(rng).choice(joint.size, size=runs, p=joint.reshape(-1))
    drawn = np.unravel_index(flat, shape)
    outcomes = np.zeros((runs, len(timeline.events)), dtype=np.int64)
    for m, (k, _) in enumerate(measurements):
        outcomes[:, k] = codes[m][drawn[m]]
    kept = np.ones(runs, dtype=bool)
    for k, m, idx in post_targets:
        hit = drawn[m] == idx
        outcomes[:, k] = hit.astype(np.int64)
        kept &= hit
    if post_targets and not kept.any():
        raise EmptyPostselectionError("no run survived postselection")

    local = [(m, a) for m, (_, a) in enumerate(measurements) if isinstance(a, LocalMeasure)]
    stats = []
    for (m1, a1), (m2, a2) in itertools.combinations(local, 2):
        product = codes[m1][drawn[m1]] * codes[m2][drawn[m2]]
        sign = np.multiply.outer(codes[m1], codes[m2])
        marginal = joint.sum(axis=tuple(x for x in range(len(shape)) if x not in (m1, m2)))
        if m1 > m2:
            marginal = marginal.T
        uncond_exact = float(np.sum(marginal * sign))
        cond_table = np.where(keep_mask, joint, 0.0)
        cond_marg = cond_table.sum(axis=tuple(x for x in range(len(shape)) if x not in (m1, m2)))
        cond_exact = float(np.sum(cond_marg * sign) / keep_probability)
        sub = product[kept]
        e_c = float(sub.mean())
        e_u = float(product.mean())
        stats.append(
            PairStatistic(
                particles=(a1.i, a2.i),
                conditional=e_c,
                conditional_se=float(np.sqrt(max(1.0 - e_c**2, 1.0 / sub.size) / sub.size)),
                conditional_exact=cond_exact,
                unconditional=e_u,
                unconditional_se=float(np.sqrt(max(1.0 - e_u**2, 1.0 / runs) / runs)),
                unconditional_exact=uncond_exact,
            )
        )

    bell_freq = {}
    for m, (k, a) in enumerate(measurements):
        if isinstance(a, BellMeasure):
            counts = np.bincount(drawn[m], minlength=4)
            bell_freq[k] = {label.value: float(c / runs) for label, c in zip(BELL_ORDER, counts)}

    return TimelineResult(timeline, runs, outcomes, kept, keep_probability, stats, bell_freq)
