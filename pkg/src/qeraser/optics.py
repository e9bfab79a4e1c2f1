"""Optical elements of the interferometer and the phase-parameterized qubit bases.

Register conventions (index 0 / index 1):

* ``signal_pol``, ``idler_pol``: H / V
* ``signal_path``: source mode / unused at stage ``"source"``; arm 1 / arm 2
  at stage ``"arms"``; D1 / D2 at stage ``"detectors"``
* ``ww_detector``: d1 / d2
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from qeraser.hilbert import LocalOperator

SQRT1_2 = 1.0 / math.sqrt(2.0)
TWO_PI = 2.0 * math.pi

STAGE_SOURCE = "source"
STAGE_ARMS = "arms"
STAGE_DETECTORS = "detectors"


def canonical_angle(theta: float) -> float:
    """Map an angle to [0, 2pi)."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


class Family(str, enum.Enum):
    LINEAR_HV = "linear_HV"
    CIRCULAR_RL = "circular_RL"
    POLARIZATION_PQ = "polarization_PQ"
    DETECTOR_PM = "detector_pm"


FAMILY_LABELS = {
    Family.LINEAR_HV: ("H", "V"),
    Family.CIRCULAR_RL: ("R", "L"),
    Family.POLARIZATION_PQ: ("P", "Q"),
    Family.DETECTOR_PM: ("plus", "minus"),
}


@dataclass(frozen=True)
class BasisPair:
    family: Family
    theta: float
    states: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=complex)
        if states.shape != (2, 2):
            raise ValueError("a basis pair holds two 2-vectors")
        gram = states.conj() @ states.T
        if not np.allclose(gram, np.eye(2), rtol=0, atol=1e-12):
            raise ValueError(f"{self.family} basis is not orthonormal")
        states.setflags(write=False)
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "theta", canonical_angle(self.theta))
        object.__setattr__(self, "states", states)

    @property
    def labels(self) -> tuple[str, str]:
        return FAMILY_LABELS[self.family]

    def state(self, outcome: str | int) -> np.ndarray:
        return self.states[self.index(outcome)]

    def index(self, outcome: str | int) -> int:
        if isinstance(outcome, (int, np.integer)):
            if outcome not in (0, 1):
                raise ValueError(f"outcome index must be 0 or 1, got {outcome}")
            return int(outcome)
        try:
            return self.labels.index(outcome)
        except ValueError:
            raise ValueError(f"{outcome!r} is not an outcome of {self.family.value}; "
                             f"expected one of {self.labels}") from None

    def same_as(self, other: BasisPair, tol: float = 1e-12) -> bool:
        """Equal up to a phase on each state, outcome by outcome."""
        return all(abs(abs(np.vdot(a, b)) - 1.0) < tol for a, b in zip(self.states, other.states))


def mub_pair(family: Family | str, theta: float = 0.0) -> BasisPair:
    """Basis pair of the given family.

    ``polarization_PQ``: P = (e^{i theta} H + i V)/sqrt2, Q = (e^{i theta} H - i V)/sqrt2.
    ``detector_pm``: d+ = (e^{i theta} d1 + d2)/sqrt2, d- = (e^{i theta} d1 - d2)/sqrt2.
    ``circular_RL`` is ``polarization_PQ`` at theta = 0; it and ``linear_HV``
    ignore ``theta``.
    """
    family = Family(family)
    theta = canonical_angle(theta)
    if family is Family.LINEAR_HV:
        return BasisPair(family, 0.0, np.eye(2))
    if family is Family.CIRCULAR_RL:
        return BasisPair(family, 0.0, SQRT1_2 * np.array([[1, 1j], [1, -1j]]))
    phase = np.exp(1j * theta)
    if family is Family.POLARIZATION_PQ:
        return BasisPair(family, theta, SQRT1_2 * np.array([[phase, 1j], [phase, -1j]]))
    return BasisPair(family, theta, SQRT1_2 * np.array([[phase, 1], [phase, -1]]))


class ElementKind(str, enum.Enum):
    PBS_ROUTE = "pbs_route"
    CONDITIONAL_POL_FLIP = "conditional_pol_flip"
    PATH_PHASE = "path_phase"
    BEAM_SPLITTER = "beam_splitter"


def pbs_route() -> LocalOperator:
    """Polarizing beam splitter on (signal_pol, signal_path): H -> arm 1, V -> arm 2.

    Acts on the source mode (path index 0); the unused input port is mapped
    so the operator stays unitary on the joint space.
    """
    m = np.zeros((4, 4))
    # basis order |pol, path>: H0, H1, V0, V1
    m[0, 0] = m[1, 1] = 1.0
    m[3, 2] = m[2, 3] = 1.0
    return LocalOperator(("signal_pol", "signal_path"), m, "PBS1", STAGE_SOURCE, STAGE_ARMS)


def conditional_pol_flip() -> LocalOperator:
    """90 degree rotator in arm 1: swaps H and V of the signal there, identity in arm 2."""
    x = np.array([[0, 1], [1, 0]])
    m = np.zeros((4, 4))
    m[:2, :2] = x
    m[2:, 2:] = np.eye(2)
    return LocalOperator(("signal_path", "signal_pol"), m, "rotator", STAGE_ARMS, STAGE_ARMS)


def path_phase(x: float, lam: float) -> LocalOperator:
    """Phase e^{2 pi i x / lam} on arm 2 (displacement ``x`` of BS1)."""
    if not lam > 0:
        raise ValueError(f"wavelength must be positive, got {lam!r}")
    phi = TWO_PI * x / lam
    if not math.isfinite(phi):
        raise ValueError("path phase is not finite")
    return LocalOperator(("signal_path",), np.diag([1.0, np.exp(1j * phi)]), "phase",
                         STAGE_ARMS, STAGE_ARMS)


def beam_splitter() -> LocalOperator:
    """Recombining 50/50 splitter: arm 1 -> (D1 + i D2)/sqrt2, arm 2 -> (i D1 + D2)/sqrt2."""
    m = SQRT1_2 * np.array([[1, 1j], [1j, 1]])
    return LocalOperator(("signal_path",), m, "BS2", STAGE_ARMS, STAGE_DETECTORS)


def element(kind: ElementKind | str, **params) -> LocalOperator:
    kind = ElementKind(kind)
    if kind is ElementKind.PATH_PHASE:
        return path_phase(params["x"], params["lam"])
    return {
        ElementKind.PBS_ROUTE: pbs_route,
        ElementKind.CONDITIONAL_POL_FLIP: conditional_pol_flip,
        ElementKind.BEAM_SPLITTER: beam_splitter,
    }[kind]()
