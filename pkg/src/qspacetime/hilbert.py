"""Exact state-vector algebra for a handful of qubits.

Qubit ordering is big-endian throughout: the leftmost ket symbol is the most
significant bit of the amplitude index, so ``|q0 q1 ... q_{n-1}>`` lives at
index ``q0 * 2**(n-1) + ... + q_{n-1}``.

Bell states carry the normalization 1/sqrt(2). With a prefactor of 1/2 the
four states would have squared norm 1/2 and the swapping identities in
:mod:`qspacetime.swap` would only hold up to a global factor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .rng import RngLike, make_rng

MAX_QUBITS = 8
NORM_TOL = 1e-12
COMPOSED_TOL = 1e-10


class CapacityError(ValueError):
    """Raised when an operation would exceed :data:`MAX_QUBITS`."""


class ProjectorError(ValueError):
    """Raised for incomplete or non-orthogonal projector sets."""


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        if self.num_qubits > MAX_QUBITS:
            raise CapacityError(f"{self.num_qubits} qubits exceeds capacity {MAX_QUBITS}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2**self.num_qubits:
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes for {self.num_qubits} qubits, got {amps.shape[0]}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.shape[0]))) if amps.shape[0] > 0 else 0
        return cls(n, amps)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def normalized(self) -> bool:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0) <= NORM_TOL

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.num_qubits != self.num_qubits:
            raise ValueError("qubit counts differ")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def scaled(self, factor: complex) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes * factor)

    def renormalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot renormalize the zero vector")
        return StateVector(self.num_qubits, self.amplitudes / n)

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per qubit (axis k is qubit k)."""
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def to_record(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_record(cls, record: dict) -> "StateVector":
        amps = [complex(re, im) for re, im in record["amplitudes"]]
        return cls(int(record["num_qubits"]), np.array(amps))


class Bell(enum.Enum):
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"

    @classmethod
    def parse(cls, value) -> "Bell":
        if isinstance(value, Bell):
            return value
        for member in cls:
            if value in (member.value, member.name):
                return member
        raise ValueError(f"unknown Bell label {value!r}")


# Row/column order for every 4x4 pair-basis table in the package.
BELL_ORDER = (Bell.PSI_PLUS, Bell.PSI_MINUS, Bell.PHI_PLUS, Bell.PHI_MINUS)

CONVENTIONS = ("standard", "magic")

_MAGIC_FACTORS = {Bell.PSI_MINUS: 1j, Bell.PHI_PLUS: 1j}


@dataclass(frozen=True)
class BellLabel:
    kind: Bell
    phase_convention: str = "standard"

    def __post_init__(self):
        object.__setattr__(self, "kind", Bell.parse(self.kind))
        if self.phase_convention not in CONVENTIONS:
            raise ValueError(f"unknown phase convention {self.phase_convention!r}")


@dataclass(frozen=True)
class Direction:
    """Unit vector in three dimensions."""

    components: tuple[float, float, float]

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if len(comps) != 3:
            raise ValueError("a direction has three components")
        if not np.all(np.isfinite(comps)):
            raise ValueError("direction components must be finite")
        if abs(np.linalg.norm(comps) - 1.0) > NORM_TOL:
            raise ValueError(f"direction {comps} is not a unit vector")
        object.__setattr__(self, "components", comps)

    @classmethod
    def normalize(cls, vector) -> "Direction":
        v = np.asarray(vector, dtype=float)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(tuple(v / n))

    @classmethod
    def from_angles(cls, theta: float, phi: float = 0.0) -> "Direction":
        """Polar angle ``theta`` from +z, azimuth ``phi`` from +x."""
        return cls.normalize(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
        )

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.components)

    def __neg__(self) -> "Direction":
        return Direction(tuple(-c for c in self.components))


X_AXIS = Direction((1.0, 0.0, 0.0))
Y_AXIS = Direction((0.0, 1.0, 0.0))
Z_AXIS = Direction((0.0, 0.0, 1.0))

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def as_direction(d) -> Direction:
    return d if isinstance(d, Direction) else Direction(tuple(d))


def basis_ket(bits: Sequence[int]) -> StateVector:
    bits = list(bits)
    if not bits:
        raise ValueError("empty bitstring")
    if len(bits) > MAX_QUBITS:
        raise CapacityError(f"{len(bits)} qubits exceeds capacity {MAX_QUBITS}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    index = int("".join(str(b) for b in bits), 2)
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[index] = 1.0
    return StateVector(len(bits), amps)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    n = a.num_qubits + b.num_qubits
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds capacity {MAX_QUBITS}")
    return StateVector(n, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[StateVector]) -> StateVector:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def bell_state(label, convention: str | None = None) -> StateVector:
    """Two-qubit Bell state for ``label`` (a :class:`Bell`, its name, or a :class:`BellLabel`)."""
    if isinstance(label, BellLabel):
        kind = label.kind
        convention = convention or label.phase_convention
    else:
        kind = Bell.parse(label)
    convention = convention or "standard"
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown phase convention {convention!r}")
    s = 1.0 / np.sqrt(2.0)
    amps = {
        Bell.PSI_PLUS: [0, s, s, 0],
        Bell.PSI_MINUS: [0, s, -s, 0],
        Bell.PHI_PLUS: [s, 0, 0, s],
        Bell.PHI_MINUS: [s, 0, 0, -s],
    }[kind]
    amps = np.array(amps, dtype=complex)
    if convention == "magic":
        amps = amps * _MAGIC_FACTORS.get(kind, 1.0)
    return StateVector(2, amps)


def bell_basis_matrix(convention: str = "standard") -> np.ndarray:
    """4x4 matrix whose rows are ``<B_k|`` in :data:`BELL_ORDER`."""
    return np.array([bell_state(k, convention).amplitudes.conj() for k in BELL_ORDER])


def permute_subsystems(state: StateVector, permutation: Sequence[int]) -> StateVector:
    """Move qubit ``i`` of ``state`` to position ``permutation[i]``."""
    n = state.num_qubits
    perm = [int(p) for p in permutation]
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{permutation!r} is not a permutation of 0..{n - 1}")
    inverse = [0] * n
    for i, p in enumerate(perm):
        inverse[p] = i
    moved = np.transpose(state.tensor_view(), inverse)
    return StateVector(n, moved.reshape(-1))


def embed_operator(op: np.ndarray, qubits: Sequence[int], num_qubits: int) -> np.ndarray:
    """Full-space matrix of ``op`` acting on ``qubits`` (in that order), identity elsewhere."""
    qubits = list(qubits)
    k = len(qubits)
    if op.shape != (2**k, 2**k):
        raise ValueError("operator size does not match qubit count")
    rest = [q for q in range(num_qubits) if q not in qubits]
    full = np.kron(op, np.eye(2 ** len(rest)))
    # full acts on ordering qubits+rest; conjugate into natural order
    order = qubits + rest
    dim = 2**num_qubits
    t = full.reshape((2,) * (2 * num_qubits))
    inverse = [order.index(q) for q in range(num_qubits)]
    t = np.transpose(t, inverse + [num_qubits + i for i in inverse])
    return t.reshape(dim, dim)


def spin_observable(direction) -> np.ndarray:
    """``d . sigma`` for a unit direction ``d``."""
    d = as_direction(direction).vector
    return d[0] * PAULI_X + d[1] * PAULI_Y + d[2] * PAULI_Z


def spin_projectors(direction) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the +1 and -1 eigenspaces of ``d . sigma``."""
    obs = spin_observable(direction)
    eye = np.eye(2)
    return (eye + obs) / 2.0, (eye - obs) / 2.0


def expectation(state: StateVector, operator: np.ndarray) -> complex:
    return complex(np.vdot(state.amplitudes, operator @ state.amplitudes))


def check_projectors(projectors: Sequence[np.ndarray], dim: int, tol: float = COMPOSED_TOL) -> None:
    if not projectors:
        raise ProjectorError("empty projector set")
    total = np.zeros((dim, dim), dtype=complex)
    for i, p in enumerate(projectors):
        p = np.asarray(p)
        if p.shape != (dim, dim):
            raise ProjectorError(f"projector {i} has shape {p.shape}, expected {(dim, dim)}")
        if not np.allclose(p, p.conj().T, atol=tol) or not np.allclose(p @ p, p, atol=tol):
            raise ProjectorError(f"matrix {i} is not an orthogonal projector")
        total += p
    if not np.allclose(total, np.eye(dim), atol=tol):
        raise ProjectorError("projectors do not sum to the identity")
    for i in range(len(projectors)):
        for j in range(i + 1, len(projectors)):
            if not np.allclose(projectors[i] @ projectors[j], 0.0, atol=tol):
                raise ProjectorError(f"projectors {i} and {j} are not mutually orthogonal")


def born_probabilities(state: StateVector, projectors: Sequence[np.ndarray]) -> np.ndarray:
    check_projectors(projectors, state.dim)
    probs = np.array([np.vdot(state.amplitudes, p @ state.amplitudes).real for p in projectors])
    return np.clip(probs, 0.0, None)


def measure_projective(
    state: StateVector, projectors: Sequence[np.ndarray], rng: RngLike = None
) -> tuple[int, StateVector, float]:
    """Sample one outcome of a projective measurement.

    Returns ``(outcome_index, post_state, probability)``; the post-measurement
    state is the renormalized projection.
    """
    probs = born_probabilities(state, projectors)
    gen = make_rng(rng)
    k = int(gen.choice(len(probs), p=probs / probs.sum()))
    projected = StateVector(state.num_qubits, projectors[k] @ state.amplitudes)
    return k, projected.renormalized(), float(probs[k])


def computational_projectors(num_qubits: int, qubit: int) -> list[np.ndarray]:
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    return [embed_operator(p, [qubit], num_qubits) for p in (p0, p1)]


def local_spin_projectors(num_qubits: int, qubit: int, direction) -> list[np.ndarray]:
    """Full-space projectors for outcomes (+1, -1) of a spin measurement on one qubit."""
    return [embed_operator(p, [qubit], num_qubits) for p in spin_projectors(direction)]


def correlation_tensor(state: StateVector) -> np.ndarray:
    """``T_kl = <psi| sigma_k (x) sigma_l |psi>`` for a two-qubit state."""
    if state.num_qubits != 2:
        raise ValueError("correlation tensor needs a two-qubit state")
    return np.array(
        [[expectation(state, np.kron(sk, sl)).real for sl in PAULIS] for sk in PAULIS]
    )


def spin_correlation(state: StateVector, a, b) -> float:
    """``<psi| (a.sigma) (x) (b.sigma) |psi>`` for a two-qubit state."""
    if state.num_qubits != 2:
        raise ValueError("spin correlation needs a two-qubit state")
    op = np.kron(spin_observable(a), spin_observable(b))
    return float(expectation(state, op).real)


def singlet_correlation(a, b) -> float:
    """Spin correlation of the singlet along ``a`` and ``b``; analytically ``-a.b``."""
    return spin_correlation(bell_state(Bell.PSI_MINUS), as_direction(a), as_direction(b))


def joint_spin_distribution(state: StateVector, a, b) -> np.ndarray:
    """Born probabilities of outcome pairs (++, +-, -+, --) for spin measurements on both qubits."""
    pa = spin_projectors(a)
    pb = spin_projectors(b)
    projectors = [np.kron(x, y) for x in pa for y in pb]
    return born_probabilities(state, projectors)


def sample_spin_pairs(state: StateVector, a, b, shots: int, rng: RngLike = None) -> np.ndarray:
    """Draw ``shots`` outcome pairs from Born probabilities; returns an (shots, 2) array of +-1."""
    probs = joint_spin_distribution(state, a, b)
    gen = make_rng(rng)
    idx = gen.choice(4, size=shots, p=probs / probs.sum())
    table = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    return table[idx]
