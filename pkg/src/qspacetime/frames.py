"""Recovering the relative orientation of two observers' frames from singlet statistics.

Observer A measures along directions written in its own frame, observer B
along directions written in B's frame. B's frame is rotated by a hidden
rotation ``R`` relative to A's, so B's direction ``b`` is ``R b`` in A's
frame and the singlet correlation is ``-a . R b``. Estimators only see
correlation values returned by a :class:`CorrelationOracle`; the hidden
rotation is read only by the harness helpers at the bottom of the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .hilbert import X_AXIS, Y_AXIS, Direction, as_direction, singlet_correlation
from .rng import RngLike, make_rng

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class AmbiguousFitError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


class CorrelationOracle:
    """Answers ``E(a, b)`` queries for a singlet shared between two rotated frames.

    ``mode="exact"`` returns the expectation value; ``mode="sampled"`` returns
    the mean of ``samples`` +-1 outcome products drawn with probability
    ``(1 + E) / 2`` of a +1 product.
    """

    def __init__(self, hidden_rotation, mode: str = "exact", samples: int = 10_000, rng: RngLike = None):
        if mode not in ("exact", "sampled"):
            raise ValueError(f"unknown oracle mode {mode!r}")
        r = np.asarray(hidden_rotation, dtype=float)
        if r.shape != (3, 3) or not np.allclose(r.T @ r, np.eye(3), atol=1e-9) or np.linalg.det(r) < 0:
            raise ValueError("hidden_rotation must be a proper 3x3 rotation")
        self._hidden_rotation = r
        self.mode = mode
        self.samples = int(samples)
        self._rng = make_rng(rng)
        self.queries = 0
        self.log: list[tuple[tuple[float, ...], tuple[float, ...], float]] = []

    def exact_value(self, a, b) -> float:
        rb = Direction.normalize(self._hidden_rotation @ as_direction(b).vector)
        return singlet_correlation(as_direction(a), rb)

    def query(self, a, b) -> float:
        a, b = as_direction(a), as_direction(b)
        e = self.exact_value(a, b)
        if self.mode == "sampled":
            p_equal = min(max((1.0 + e) / 2.0, 0.0), 1.0)
            k = self._rng.binomial(self.samples, p_equal)
            e = (2.0 * k - self.samples) / self.samples
        self.queries += 1
        self.log.append((a.components, b.components, float(e)))
        return float(e)


@dataclass
class FrameEstimate:
    rotation: np.ndarray
    residual: float
    queries_used: int = 0
    angular_errors: list[float] | None = None
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "residual": self.residual,
            "queries_used": self.queries_used,
            "angular_errors": self.angular_errors,
            "converged": self.converged,
        }


@dataclass
class AxisSearch:
    direction: Direction
    correlation: float
    queries_used: int
    converged: bool = True
    trace: list[float] = field(default_factory=list)


def probe_correlation_matrix(oracle: CorrelationOracle, basis=None) -> np.ndarray:
    """``M_ij = E(q_i, q_j)`` for the columns ``q`` of ``basis`` (identity by default).

    Both observers probe along the same nominal basis in their own frames,
    so ``M = -Q^T R Q``.
    """
    q = np.eye(3) if basis is None else np.asarray(basis, dtype=float)
    cols = [Direction.normalize(q[:, i]) for i in range(3)]
    return np.array([[oracle.query(cols[i], cols[j]) for j in range(3)] for i in range(3)])


def fit_rotation(m) -> FrameEstimate:
    """Proper rotation nearest to ``-M`` in Frobenius norm."""
    target = -np.asarray(m, dtype=float)
    if target.shape != (3, 3) or not np.all(np.isfinite(target)):
        raise ValueError("correlation matrix must be a finite 3x3 array")
    u, s, vt = np.linalg.svd(target)
    if s[0] == 0.0 or s[1] <= 1e-9 * s[0]:
        raise AmbiguousFitError(f"correlation matrix has rank below 2 (singular values {s})")
    d = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vt)) or 1.0])
    rot = u @ d @ vt
    return FrameEstimate(rot, float(np.linalg.norm(target - rot)))


def recover_frame(oracle: CorrelationOracle, basis=None) -> FrameEstimate:
    """Probe the 3x3 correlation matrix and fit a rotation to it."""
    start = oracle.queries
    est = fit_rotation(probe_correlation_matrix(oracle, basis))
    est.queries_used = oracle.queries - start
    return est


# --- axis-by-axis search ------------------------------------------------------


class _Objective:
    def __init__(self, oracle, fixed, budget, transform=lambda e: e):
        self.oracle = oracle
        self.fixed = fixed
        self.budget = budget
        self.used = 0
        self.transform = transform

    def __call__(self, b: np.ndarray) -> float:
        if self.used >= self.budget:
            raise BudgetExhausted
        self.used += 1
        return self.transform(self.oracle.query(self.fixed, Direction.normalize(b)))


def _circle(b, t, s):
    return b * math.cos(s) + t * math.sin(s)


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _sinusoid_fit(f, points: int = 8) -> tuple[float, float]:
    """Fit ``f(s) = alpha cos s + beta sin s`` from evaluations on a uniform grid over a full turn."""
    s = np.arange(points) * 2.0 * np.pi / points
    vals = np.array([f(x) for x in s])
    design = np.stack([np.cos(s), np.sin(s)], axis=1)
    (alpha, beta), *_ = np.linalg.lstsq(design, vals, rcond=None)
    return float(alpha), float(beta)


def _tangent(b: np.ndarray) -> np.ndarray:
    helper = np.eye(3)[int(np.argmin(np.abs(b)))]
    t = helper - np.dot(helper, b) * b
    return t / np.linalg.norm(t)


def _line_minimum(obj, b, t, method, tol):
    """Move ``b`` along the great circle spanned with tangent ``t`` to the minimum of ``obj``."""
    f = lambda s: obj(_circle(b, t, s))
    if method == "golden":
        # coarse scan over the full turn, then golden section in the best bracket
        grid = np.arange(8) * (2.0 * math.pi / 8) - math.pi
        vals = [f(x) for x in grid]
        k = int(np.argmin(vals))
        h = 2.0 * math.pi / 8
        s, val = _golden_section(f, grid[k] - h, grid[k] + h, tol)
        if vals[k] <= val:
            s, val = float(grid[k]), vals[k]
    else:
        alpha, beta = _sinusoid_fit(f)
        s = math.atan2(-beta, -alpha)
        val = -math.hypot(alpha, beta)
    nb = _circle(b, t, s)
    return nb / np.linalg.norm(nb), s, val


def _default_method(oracle: CorrelationOracle, line_search: str | None) -> str:
    if line_search is not None:
        if line_search not in ("golden", "sinusoid"):
            raise ValueError(f"unknown line search {line_search!r}")
        return line_search
    return "golden" if oracle.mode == "exact" else "sinusoid"


def align_axis(
    oracle: CorrelationOracle,
    fixed,
    initial=None,
    budget: int = 4000,
    restarts: int = 3,
    line_search: str | None = None,
    tol: float = 1e-10,
    step_tol: float = 1e-7,
) -> AxisSearch:
    """Find B's direction most anti-correlated with A's fixed direction.

    Great-circle coordinate descent on ``E(fixed, b)``: along a tangent
    ``t``, then along ``b x t``, repeated until both steps are below ``step_tol``.
    In sampled mode the line minimum comes from a sinusoid fit, since
    comparing two noisy evaluations close to the optimum carries no signal.
    """
    fixed = as_direction(fixed)
    method = _default_method(oracle, line_search)
    starts = [np.asarray(as_direction(initial).vector if initial is not None else [0.0, 0.0, 1.0])]
    starts += [np.roll(starts[0], k) for k in (1, 2)][: max(restarts - 1, 0)]
    starts = [s / np.linalg.norm(s) for s in starts[:restarts]]
    obj = _Objective(oracle, fixed, budget)
    max_sweeps = 40 if method == "golden" else 2
    best: tuple[float, np.ndarray] | None = None
    trace: list[float] = []
    converged = False
    try:
        for b in starts:
            for _ in range(max_sweeps):
                t = _tangent(b)
                n = np.cross(b, t)
                b, s1, _ = _line_minimum(obj, b, t, method, tol)
                b, s2, val = _line_minimum(obj, b, n, method, tol)
                trace.append(val)
                if best is None or val < best[0]:
                    best = (val, b)
                # below ~1e-8 rad the objective is flat to double precision
                if method == "golden" and abs(s1) < step_tol and abs(s2) < step_tol:
                    converged = True
                    break
            else:
                converged = converged or method == "sinusoid"
    except BudgetExhausted:
        if best is None:
            best = (math.nan, b)
    direction = Direction.normalize(best[1])
    return AxisSearch(direction, best[0], obj.used, converged, trace)


def orthogonal_axis(
    oracle: CorrelationOracle,
    fixed,
    initial=None,
    budget: int = 2000,
    line_search: str | None = None,
    tol: float = 1e-12,
) -> AxisSearch:
    """Find a direction of B uncorrelated with A's fixed direction (``|E| -> 0``).

    Exact mode: coarse scan of ``|E|`` along a great circle, then golden
    section inside the best bracket. Sampled mode: sinusoid fit and its zero.
    """
    fixed = as_direction(fixed)
    method = _default_method(oracle, line_search)
    b = as_direction(initial).vector if initial is not None else np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
    t = _tangent(b)
    obj = _Objective(oracle, fixed, budget)
    f = lambda s: obj(_circle(b, t, s))
    converged = True
    try:
        if method == "golden":
            grid = np.linspace(-math.pi / 2, math.pi / 2, 17)
            vals = [abs(f(s)) for s in grid]
            k = int(np.argmin(vals))
            h = grid[1] - grid[0]
            s, val = _golden_section(lambda x: abs(f(x)), grid[k] - h, grid[k] + h, tol)
            if vals[k] < val:
                s, val = grid[k], vals[k]
        else:
            alpha, beta = _sinusoid_fit(f)
            s = math.atan2(-alpha, beta)
            val = abs(f(s))
    except BudgetExhausted:
        converged = False
        s, val = 0.0, math.nan
    nb = _circle(b, t, s)
    return AxisSearch(Direction.normalize(nb), float(val), obj.used, converged)


def build_triad(oracle: CorrelationOracle, budget: int = 4000, line_search: str | None = None) -> FrameEstimate:
    """Axis-by-axis frame recovery.

    1. align B's first axis with A's x axis (maximal anti-correlation);
    2. find a B direction uncorrelated with A's x axis;
    3. rotate it about the first axis into maximal anti-correlation with A's y axis;
    4. complete with the cross product.
    The rows of the returned rotation are the recovered B axes.
    """
    start = oracle.queries
    method = _default_method(oracle, line_search)
    first = align_axis(oracle, X_AXIS, budget=budget, line_search=method)
    b1 = first.direction.vector
    ortho = orthogonal_axis(oracle, X_AXIS, initial=_tangent(b1), budget=budget, line_search=method)
    b2 = ortho.direction.vector
    b2 = b2 - np.dot(b2, b1) * b1
    b2 /= np.linalg.norm(b2)
    obj = _Objective(oracle, Y_AXIS, budget)
    b2, _, val = _line_minimum(obj, b2, np.cross(b1, b2), method, 1e-11)
    b3 = np.cross(b1, b2)
    rotation = np.vstack([b1, b2, b3])
    residual = abs(first.correlation + 1.0) + abs(val + 1.0)
    return FrameEstimate(
        rotation,
        float(residual),
        queries_used=oracle.queries - start,
        converged=first.converged and ortho.converged,
    )


# --- harness (reads the hidden rotation) ---------------------------------------


def reveal_rotation(oracle: CorrelationOracle) -> np.ndarray:
    return oracle._hidden_rotation.copy()


def rotation_angle(r1, r2) -> float:
    """Angle of the relative rotation ``r1^T r2``."""
    c = (np.trace(np.asarray(r1).T @ np.asarray(r2)) - 1.0) / 2.0
    return float(math.acos(min(1.0, max(-1.0, c))))


def axis_errors(estimate, truth) -> list[float]:
    """Angles between corresponding columns of two rotations."""
    est, tru = np.asarray(estimate), np.asarray(truth)
    out = []
    for i in range(3):
        c = float(np.dot(est[:, i], tru[:, i]) / (np.linalg.norm(est[:, i]) * np.linalg.norm(tru[:, i])))
        out.append(math.acos(min(1.0, max(-1.0, c))))
    return out


def random_rotation(rng: RngLike = None) -> np.ndarray:
    """Haar-random proper rotation."""
    return Rotation.random(random_state=make_rng(rng)).as_matrix()


def rotation_about(axis, angle: float) -> np.ndarray:
    axis = as_direction(axis).vector
    return Rotation.from_rotvec(axis * angle).as_matrix()
