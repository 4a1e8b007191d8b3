"""Classical correlation polytopes and their quantum (singlet) values.

Correlator vectors are indexed row-major: entry ``i * settings_b + j`` is
``E(A_i B_j)``. Hull computations are exact (integers and fractions); only
the quantum optimization is floating point.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .hilbert import Bell, Direction, bell_state, correlation_tensor, singlet_correlation, spin_observable
from .rng import make_rng
from .spacetime import SpacetimeLabel

MAX_CORRELATORS = 16
MAX_HULL_CANDIDATES = 500_000


class ScenarioTooLarge(ValueError):
    pass


class DegenerateHull(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    settings_a: int
    settings_b: int

    def __post_init__(self):
        if self.settings_a < 1 or self.settings_b < 1:
            raise ValueError("each party needs at least one setting")

    @property
    def dimension(self) -> int:
        return self.settings_a * self.settings_b

    def to_dict(self) -> dict:
        return {"settings_a": self.settings_a, "settings_b": self.settings_b, "outcomes": 2}


CHSH_SCENARIO = Scenario(2, 2)


@dataclass(frozen=True)
class FacetInequality:
    """``coefficients . E <= bound`` with integer data, coefficients of gcd 1."""

    coefficients: tuple[int, ...]
    bound: int

    def value(self, point) -> Fraction | float:
        return sum(c * x for c, x in zip(self.coefficients, point))

    def satisfied_by(self, point) -> bool:
        return self.value(point) <= self.bound

    def to_dict(self) -> dict:
        return {"coefficients": list(self.coefficients), "bound": self.bound}


@dataclass(frozen=True)
class CorrelationFunctional:
    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("functional coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    def matrix(self, scenario: Scenario) -> np.ndarray:
        if len(self.coefficients) != scenario.dimension:
            raise ValueError(
                f"functional has {len(self.coefficients)} coefficients, scenario needs {scenario.dimension}"
            )
        return np.array(self.coefficients).reshape(scenario.settings_a, scenario.settings_b)


CHSH = CorrelationFunctional((1, 1, 1, -1))


@dataclass(frozen=True)
class AnnotatedScenario:
    """A scenario whose measurement slots carry space-time labels (A slots first, then B)."""

    scenario: Scenario
    labels_a: tuple[SpacetimeLabel, ...]
    labels_b: tuple[SpacetimeLabel, ...]


def _unwrap(scenario) -> Scenario:
    return scenario.scenario if isinstance(scenario, AnnotatedScenario) else scenario


def relabel_temporal(scenario: Scenario, labels: Sequence[SpacetimeLabel]) -> AnnotatedScenario:
    scenario = _unwrap(scenario)
    labels = tuple(labels)
    slots = scenario.settings_a + scenario.settings_b
    if len(labels) != slots:
        raise ValueError(f"expected {slots} labels (one per measurement slot), got {len(labels)}")
    return AnnotatedScenario(scenario, labels[: scenario.settings_a], labels[scenario.settings_a :])


# --- vertices and facets ---------------------------------------------------


def enumerate_vertices(scenario) -> list[tuple[int, ...]]:
    """Distinct correlator vectors of all deterministic +-1 assignments, sorted."""
    scenario = _unwrap(scenario)
    if scenario.dimension > MAX_CORRELATORS:
        raise ScenarioTooLarge(f"{scenario.dimension} correlators exceeds desk-scale limit {MAX_CORRELATORS}")
    found = set()
    for a in itertools.product((1, -1), repeat=scenario.settings_a):
        for b in itertools.product((1, -1), repeat=scenario.settings_b):
            found.add(tuple(x * y for x in a for y in b))
    return sorted(found, reverse=True)


def _row_reduce(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    ncols = len(m[0]) if m else 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def _nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    reduced, pivots = _row_reduce(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(reduced, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def _integerize(v: Sequence[Fraction]) -> tuple[int, ...]:
    lcm = 1
    for x in v:
        lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
    ints = [int(x * lcm) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x))
    return tuple(x // g for x in ints) if g else tuple(ints)


def affine_dimension(vertices: Sequence[Sequence[int]]) -> int:
    v0 = vertices[0]
    diffs = [[Fraction(x - y) for x, y in zip(v, v0)] for v in vertices[1:]]
    if not diffs:
        return 0
    reduced, _ = _row_reduce(diffs)
    return len(reduced)


def hull_facets(vertices: Sequence[Sequence[int]]) -> list[FacetInequality]:
    """Exact facet list of the convex hull of integer points.

    Candidates are hyperplanes through ``d`` affinely independent vertices
    (``d`` the affine dimension), with normals restricted to the direction
    space of the affine hull so that lower-dimensional hulls still get a
    unique description. A candidate is kept when every vertex lies on one
    side. The result is sorted and duplicate-free.
    """
    verts = [tuple(int(x) for x in v) for v in dict.fromkeys(tuple(v) for v in vertices)]
    if not verts:
        raise DegenerateHull("no vertices")
    n = len(verts[0])
    v0 = verts[0]
    diffs = [[Fraction(x - y) for x, y in zip(v, v0)] for v in verts[1:]]
    span, _ = _row_reduce(diffs) if diffs else ([], [])
    d = len(span)
    if d == 0:
        raise DegenerateHull("vertex set has affine dimension 0")
    n_candidates = math.comb(len(verts), d)
    if n_candidates > MAX_HULL_CANDIDATES:
        raise ScenarioTooLarge(f"{n_candidates} facet candidates exceeds limit {MAX_HULL_CANDIDATES}")

    facets = set()
    for subset in itertools.combinations(range(len(verts)), d):
        base = verts[subset[0]]
        edges = [[Fraction(x - y) for x, y in zip(verts[k], base)] for k in subset[1:]]
        # normal = span^T y with edges . normal = 0
        system = [[sum(e[c] * s[c] for c in range(n)) for s in span] for e in edges]
        null = _nullspace(system, d)
        if len(null) != 1:
            continue
        normal = [sum(y * s[c] for y, s in zip(null[0], span)) for c in range(n)]
        normal = _integerize(normal)
        values = [sum(c * x for c, x in zip(normal, v)) for v in verts]
        level = sum(c * x for c, x in zip(normal, base))
        if all(val <= level for val in values):
            facets.add(FacetInequality(normal, level))
        elif all(val >= level for val in values):
            facets.add(FacetInequality(tuple(-c for c in normal), -level))
    return sorted(facets, key=lambda f: (f.coefficients, f.bound), reverse=True)


def vertices_from_facets(facets: Sequence[FacetInequality], dimension: int) -> list[tuple]:
    """Vertices of ``{x : a.x <= b for all facets}`` by exact brute force.

    Each vertex is the unique solution of ``dimension`` tight inequalities
    that satisfies all the others. Only meaningful for full-dimensional
    polytopes.
    """
    found = set()
    rows = [[Fraction(c) for c in f.coefficients] + [Fraction(f.bound)] for f in facets]
    for subset in itertools.combinations(range(len(rows)), dimension):
        reduced, pivots = _row_reduce([rows[k] for k in subset])
        if len(pivots) != dimension or dimension in pivots:
            continue
        point = [Fraction(0)] * dimension
        for row, p in zip(reduced, pivots):
            point[p] = row[dimension]
        if all(sum(c * x for c, x in zip(f.coefficients, point)) <= f.bound for f in facets):
            found.add(tuple(int(x) if x.denominator == 1 else x for x in point))
    return sorted(found, reverse=True)


def classical_bound(functional: CorrelationFunctional, scenario) -> float:
    scenario = _unwrap(scenario)
    c = functional.matrix(scenario).reshape(-1)
    return float(max(np.dot(c, v) for v in enumerate_vertices(scenario)))


# --- quantum values ----------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 24
    seed: int = 20231
    max_iterations: int = 500
    gtol: float = 1e-12
    scan_step_degrees: float = 1.0


@dataclass
class QuantumResult:
    value: float
    settings_a: list[Direction]
    settings_b: list[Direction]
    ceiling: float
    trace: list[float] = field(default_factory=list)
    converged: bool = True
    warning: str | None = None
    scan_value: float | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "ceiling": self.ceiling,
            "argmax_settings": {
                "a": [list(d.components) for d in self.settings_a],
                "b": [list(d.components) for d in self.settings_b],
            },
            "trace": list(self.trace),
            "converged": self.converged,
            "warning": self.warning,
            "scan_value": self.scan_value,
            "state": "singlet",
        }


def operator_norm_ceiling(functional: CorrelationFunctional, scenario) -> float:
    """Upper bound ``sigma_max(C) * sqrt(m_a * m_b)`` on ``sum c_ij a_i.b_j`` over unit vectors.

    With ``X`` and ``Y`` the stacked setting vectors,
    ``sum_i a_i.(C Y)_i <= sqrt(m_a) ||C Y||_F <= sqrt(m_a) sigma_max(C) sqrt(m_b)``.
    It is tight for CHSH (2 sqrt 2).
    """
    scenario = _unwrap(scenario)
    c = functional.matrix(scenario)
    return float(np.linalg.norm(c, 2) * math.sqrt(scenario.settings_a * scenario.settings_b))


def _unit(angles: np.ndarray) -> np.ndarray:
    theta, phi = angles[0::2], angles[1::2]
    return np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1
    )


def _unit_grad(angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    theta, phi = angles[0::2], angles[1::2]
    d_theta = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], axis=1)
    d_phi = np.stack([-np.sin(theta) * np.sin(phi), np.sin(theta) * np.cos(phi), np.zeros_like(theta)], axis=1)
    return d_theta, d_phi


def quantum_maximize(
    functional: CorrelationFunctional, scenario, config: OptimizerConfig | None = None
) -> QuantumResult:
    """Maximize ``sum c_ij E(a_i, b_j)`` over unit settings for the singlet.

    ``E(a, b) = a^T T b`` with ``T`` the singlet correlation tensor computed
    from the state. Deterministic multi-start BFGS over polar angles; for
    2x2 a planar scan on a fixed angular grid is also run and reported.
    """
    scenario = _unwrap(scenario)
    config = config or OptimizerConfig()
    cmat = functional.matrix(scenario)
    ma, mb = scenario.settings_a, scenario.settings_b
    tcorr = correlation_tensor(bell_state(Bell.PSI_MINUS))
    ceiling = operator_norm_ceiling(functional, scenario)

    def negative(angles):
        u = _unit(angles)
        x, y = u[:ma], u[ma:]
        val = float(np.sum(cmat * (x @ tcorr @ y.T)))
        gx = cmat @ (y @ tcorr.T)  # d val / d x_i
        gy = cmat.T @ (x @ tcorr)
        g = np.vstack([gx, gy])
        dth, dph = _unit_grad(angles)
        grad = np.empty_like(angles)
        grad[0::2] = np.sum(g * dth, axis=1)
        grad[1::2] = np.sum(g * dph, axis=1)
        return -val, -grad

    if not np.any(cmat):
        dirs = [Direction((0.0, 0.0, 1.0))]
        return QuantumResult(0.0, dirs * ma, dirs * mb, ceiling, trace=[0.0])

    gen = make_rng(config.seed)
    best_val, best_x, trace = -np.inf, None, []
    converged = False
    for _ in range(config.starts):
        x0 = np.empty(2 * (ma + mb))
        x0[0::2] = np.arccos(gen.uniform(-1.0, 1.0, ma + mb))
        x0[1::2] = gen.uniform(0.0, 2 * np.pi, ma + mb)
        res = minimize(
            negative, x0, jac=True, method="BFGS",
            options={"maxiter": config.max_iterations, "gtol": config.gtol},
        )
        val = -float(res.fun)
        trace.append(val)
        if val > best_val:
            best_val, best_x = val, res.x
        converged = converged or bool(res.success) or np.linalg.norm(res.jac) < 1e-8

    u = _unit(best_x)
    settings_a = [Direction.normalize(v) for v in u[:ma]]
    settings_b = [Direction.normalize(v) for v in u[ma:]]
    value = float(
        sum(cmat[i, j] * singlet_correlation(settings_a[i], settings_b[j]) for i in range(ma) for j in range(mb))
    )
    warning = None
    if not converged:
        warning = "optimizer did not converge within the iteration budget; best value so far returned"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    scan = planar_scan(functional, scenario, config.scan_step_degrees) if (ma, mb) == (2, 2) else None
    if scan is not None and scan > value:
        warning = (warning or "") + " planar scan exceeded local search"
    return QuantumResult(value, settings_a, settings_b, ceiling, trace, converged, warning, scan)


def planar_scan(functional: CorrelationFunctional, scenario, step_degrees: float = 1.0) -> float:
    """Best value over coplanar settings on a regular angular grid, cosine law ``E = -cos(a - b)``.

    Settings are measured relative to ``a_1 = 0``. For fixed ``a_2`` the
    objective separates into a ``b_1`` term and a ``b_2`` term, each maximized
    over the grid independently.
    """
    scenario = _unwrap(scenario)
    if (scenario.settings_a, scenario.settings_b) != (2, 2):
        raise ValueError("planar scan is implemented for 2x2 scenarios")
    c = functional.matrix(scenario)
    grid = np.deg2rad(np.arange(0.0, 360.0, step_degrees))
    a2 = grid[:, None]
    b = grid[None, :]
    term_b1 = -c[0, 0] * np.cos(b) - c[1, 0] * np.cos(a2 - b)
    term_b2 = -c[0, 1] * np.cos(b) - c[1, 1] * np.cos(a2 - b)
    return float(np.max(term_b1.max(axis=1) + term_b2.max(axis=1)))


def bell_operator(functional: CorrelationFunctional, scenario, settings_a, settings_b) -> np.ndarray:
    """``sum c_ij (a_i.sigma) (x) (b_j.sigma)`` as a 4x4 matrix."""
    scenario = _unwrap(scenario)
    c = functional.matrix(scenario)
    op = np.zeros((4, 4), dtype=complex)
    for i, a in enumerate(settings_a):
        for j, b in enumerate(settings_b):
            op += c[i, j] * np.kron(spin_observable(a), spin_observable(b))
    return op


def polytope_report(scenario, functional: CorrelationFunctional | None = None, config=None) -> dict:
    scenario = _unwrap(scenario)
    vertices = enumerate_vertices(scenario)
    facets = hull_facets(vertices)
    report = {
        "scenario": scenario.to_dict(),
        "vertices": [list(v) for v in vertices],
        "facets": [f.to_dict() for f in facets],
    }
    if functional is not None:
        q = quantum_maximize(functional, scenario, config)
        report.update(
            functional=list(functional.coefficients),
            classical_bound=classical_bound(functional, scenario),
            quantum_value=q.value,
            quantum_ceiling=q.ceiling,
            argmax_settings=q.to_dict()["argmax_settings"],
        )
    return report
