"""Dense state-vector algebra over small labeled composites of qubits.

States are immutable: every operation returns a new :class:`StateVector`.
Subsystems are addressed by name; the first entry of a layout is the most
significant index of the amplitude vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, NamedTuple, Sequence, Union

import numpy as np

if TYPE_CHECKING:
    from qeraser.optics import BasisPair

SUBSYSTEM_NAMES = (
    "signal_path",
    "signal_pol",
    "idler_pol",
    "detector_register",
    "ww_detector",
)

_tolerance = 1e-12


def tolerance() -> float:
    """Absolute tolerance used by every comparison in the package."""
    return _tolerance


def set_tolerance(value: float) -> None:
    global _tolerance
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"tolerance must be positive and finite, got {value!r}")
    _tolerance = float(value)


class StageError(ValueError):
    """An operator was applied to a state at the wrong pipeline stage."""


@dataclass(frozen=True)
class Subsystem:
    name: str
    dim: int = 2

    def __post_init__(self):
        if self.name not in SUBSYSTEM_NAMES:
            raise ValueError(f"unknown subsystem {self.name!r}; expected one of {SUBSYSTEM_NAMES}")
        if self.dim != 2:
            raise ValueError(f"subsystem {self.name!r} must be a qubit, got dim={self.dim}")

    def __str__(self):
        return self.name


Label = Union[str, Subsystem]


def _name(label: Label) -> str:
    return label.name if isinstance(label, Subsystem) else str(label)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on an ordered tuple of subsystems.

    ``stage`` is a free-form tag naming how the basis labels of the
    subsystems should be read (e.g. a path register reads as arms before
    the recombining beam splitter and as detectors after it).
    """

    layout: tuple[Subsystem, ...]
    amps: np.ndarray
    stage: str | None = None

    def __post_init__(self):
        layout = tuple(s if isinstance(s, Subsystem) else Subsystem(s) for s in self.layout)
        names = [s.name for s in layout]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate subsystem labels in layout {names}")
        amps = _frozen(self.amps).reshape(-1)
        expected = int(np.prod([s.dim for s in layout], dtype=int))
        if amps.size != expected:
            raise ValueError(f"layout {names} needs {expected} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > _tolerance:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amplitudes(cls, layout: Iterable[Label], amps, stage: str | None = None,
                        normalize: bool = False) -> StateVector:
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / norm
        layout = tuple(s if isinstance(s, Subsystem) else Subsystem(s) for s in layout)
        return cls(layout, amps, stage)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.layout)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.layout)

    def axis(self, label: Label) -> int:
        name = _name(label)
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"subsystem {name!r} not in layout {self.names}") from None

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem."""
        return self.amps.reshape(self.dims) if self.layout else self.amps.reshape(())

    def with_stage(self, stage: str | None) -> StateVector:
        return StateVector(self.layout, self.amps, stage)

    def overlap(self, other: StateVector) -> complex:
        if self.names != other.names:
            raise ValueError("overlap needs identical layouts")
        return complex(np.vdot(self.amps, other.amps))


def basis_state(label: Label, index: int, stage: str | None = None) -> StateVector:
    sub = label if isinstance(label, Subsystem) else Subsystem(label)
    amps = np.zeros(sub.dim, dtype=complex)
    amps[index] = 1.0
    return StateVector((sub,), amps, stage)


def ket(label: Label, vector, stage: str | None = None) -> StateVector:
    """Single-subsystem state from an explicit 2-vector (normalized here)."""
    return StateVector.from_amplitudes((label,), vector, stage, normalize=True)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    overlap = set(a.names) & set(b.names)
    if overlap:
        raise ValueError(f"cannot tensor states sharing subsystems {sorted(overlap)}")
    stage = a.stage if a.stage is not None else b.stage
    return StateVector(a.layout + b.layout, np.kron(a.amps, b.amps), stage)


def is_unitary(matrix: np.ndarray, tol: float | None = None) -> bool:
    tol = _tolerance if tol is None else tol
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=tol))


@dataclass(frozen=True)
class LocalOperator:
    """A unitary acting on the named subsystems, in the order given.

    ``stage_in``/``stage_out`` optionally guard and advance the stage tag of
    the state it is applied to.
    """

    targets: tuple[str, ...]
    matrix: np.ndarray
    name: str = "U"
    stage_in: str | None = None
    stage_out: str | None = None

    def __post_init__(self):
        targets = tuple(_name(t) for t in self.targets)
        matrix = _frozen(self.matrix)
        dim = 2 ** len(targets)
        if matrix.shape != (dim, dim):
            raise ValueError(f"{self.name}: matrix shape {matrix.shape} does not match targets {targets}")
        if not is_unitary(matrix):
            raise ValueError(f"{self.name}: matrix is not unitary")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "matrix", matrix)

    def dagger(self) -> LocalOperator:
        return LocalOperator(self.targets, self.matrix.conj().T, self.name + "^dag",
                             self.stage_out, self.stage_in)


def apply_local(op: LocalOperator, s: StateVector, check_stage: bool = True) -> StateVector:
    """Return ``(I ⊗ U ⊗ I)|s>``, moving the stage tag if the operator declares one."""
    axes = [s.axis(t) for t in op.targets]
    if check_stage and op.stage_in is not None and s.stage != op.stage_in:
        raise StageError(f"{op.name} expects stage {op.stage_in!r}, state is at {s.stage!r}")
    psi = np.moveaxis(s.tensor(), axes, range(len(axes)))
    moved_shape = psi.shape
    psi = (op.matrix @ psi.reshape(op.matrix.shape[0], -1)).reshape(moved_shape)
    psi = np.moveaxis(psi, range(len(axes)), axes)
    stage = op.stage_out if op.stage_out is not None else s.stage
    return StateVector(s.layout, psi.reshape(-1), stage)


def _check_outcome_vector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > _tolerance:
        raise ValueError(f"outcome state is not normalized: {v}")
    return v


def _contract(s: StateVector, outcome: Sequence[tuple[Label, object]]) -> tuple[tuple[Subsystem, ...], np.ndarray]:
    """Apply <outcome| on the listed subsystems; returns the remaining layout and the
    (unnormalized) partner tensor."""
    names = [_name(lbl) for lbl, _ in outcome]
    if len(set(names)) != len(names):
        raise ValueError(f"outcome repeats a subsystem: {names}")
    psi = s.tensor()
    axes = [s.axis(n) for n in names]
    for ax, (_, vec) in sorted(zip(axes, outcome), key=lambda t: -t[0]):
        v = _check_outcome_vector(vec)
        psi = np.tensordot(v.conj(), psi, axes=([0], [ax]))
    remaining = tuple(sub for sub in s.layout if sub.name not in names)
    return remaining, psi.reshape(-1)


def born_probability(s: StateVector, outcome: Sequence[tuple[Label, object]]) -> float:
    """Probability of the joint outcome ``[(subsystem, state), ...]``."""
    _, partner = _contract(s, outcome)
    return float(min(1.0, np.vdot(partner, partner).real))


class PostSelection(NamedTuple):
    prob: float
    state: StateVector | None

    @property
    def defined(self) -> bool:
        return self.state is not None


def post_select(s: StateVector, sub: Label, onto) -> PostSelection:
    """Project ``sub`` onto ``onto`` and drop it from the layout.

    Below a probability of 1e-14 the collapsed state is undefined and
    ``state`` is None.
    """
    remaining, partner = _contract(s, [(sub, onto)])
    prob = float(min(1.0, np.vdot(partner, partner).real))
    if prob < 1e-14:
        return PostSelection(prob, None)
    return PostSelection(prob, StateVector(remaining, partner / np.sqrt(prob), s.stage))


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.entries)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if not np.allclose(rho, rho.conj().T, rtol=0, atol=_tolerance):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > _tolerance:
            raise ValueError("density matrix trace is not 1")
        if np.linalg.eigvalsh(rho).min() < -_tolerance:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.entries, self.entries).real)


def reduced_density_matrix(s: StateVector, keep: Label) -> DensityMatrix:
    ax = s.axis(keep)
    m = np.moveaxis(s.tensor(), ax, 0).reshape(s.dims[ax], -1)
    return DensityMatrix(m @ m.conj().T)


def reduced_purity(s: StateVector, keep: Label) -> float:
    """Tr(rho^2) of the single-subsystem reduced state."""
    return reduced_density_matrix(s, keep).purity()


@dataclass(frozen=True)
class Expansion:
    """``s = sum_k |b_k> ⊗ partners[k]`` for a basis ``b`` on one subsystem."""

    subsystem: Subsystem
    basis: BasisPair
    layout: tuple[Subsystem, ...]
    partners: dict[str, np.ndarray] = field(default_factory=dict)
    stage: str | None = None

    def weight(self, label: str) -> float:
        p = self.partners[label]
        return float(np.vdot(p, p).real)

    def recombine(self, original_layout: Sequence[Label]) -> StateVector:
        """Rebuild the full state, subsystem placed back where ``original_layout`` has it."""
        names = [_name(l) for l in original_layout]
        ax = names.index(self.subsystem.name)
        rest_dims = [sub.dim for sub in self.layout]
        total = np.zeros([self.subsystem.dim] + rest_dims, dtype=complex)
        for label, vec in zip(self.basis.labels, self.basis.states):
            total += np.multiply.outer(vec, self.partners[label].reshape(rest_dims))
        total = np.moveaxis(total, 0, ax)
        return StateVector.from_amplitudes(original_layout, total.reshape(-1), self.stage)


def expand_in_basis(s: StateVector, sub: Label, basis: BasisPair) -> Expansion:
    """Conditional (unnormalized) partner states of ``s`` for each basis outcome on ``sub``."""
    states = np.asarray(basis.states, dtype=complex)
    gram = states.conj() @ states.T
    if not np.allclose(gram, np.eye(len(states)), rtol=0, atol=_tolerance):
        raise ValueError(f"basis {basis.family} is not orthonormal")
    subsystem = s.layout[s.axis(sub)]
    partners = {}
    remaining: tuple[Subsystem, ...] = ()
    for label, vec in zip(basis.labels, states):
        remaining, partner = _contract(s, [(subsystem, vec)])
        partner.setflags(write=False)
        partners[label] = partner
    return Expansion(subsystem, basis, remaining, partners, s.stage)
