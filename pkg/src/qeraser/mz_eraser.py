"""Mach-Zehnder quantum eraser with a polarization-entangled signal/idler pair.

The signal photon goes PBS1 -> 90 degree rotator in arm 1 -> movable-BS1
phase on arm 2 -> BS2 -> D1/D2.  The idler polarization is the which-way
marker.  Everything is exact on an 8-amplitude register
``(signal_path, signal_pol, idler_pol)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from qeraser import hilbert
from qeraser.hilbert import StateVector, apply_local, post_select, reduced_purity
from qeraser.optics import (
    SQRT1_2,
    TWO_PI,
    STAGE_SOURCE,
    BasisPair,
    Family,
    beam_splitter,
    canonical_angle,
    conditional_pol_flip,
    mub_pair,
    path_phase,
    pbs_route,
)

LAYOUT = ("signal_path", "signal_pol", "idler_pol")
DETECTORS = ("D1", "D2")


@dataclass(frozen=True)
class MzConfig:
    """BS1 displacement ``x`` and wavelength ``lam`` in the same length unit."""

    x: float
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"wavelength must be positive and finite, got {self.lam!r}")
        if not math.isfinite(self.phase):
            raise ValueError(f"phase 2*pi*x/lambda is not finite for x={self.x!r}")

    @property
    def phase(self) -> float:
        return TWO_PI * self.x / self.lam


class MeasurementOrder(str, enum.Enum):
    SIGNAL_FIRST = "signal_first"  # delayed mode
    IDLER_FIRST = "idler_first"


def _detector_index(detector) -> int:
    if isinstance(detector, (int, np.integer)):
        if detector not in (0, 1):
            raise ValueError(f"detector index must be 0 or 1, got {detector}")
        return int(detector)
    try:
        return DETECTORS.index(str(detector).upper())
    except ValueError:
        raise ValueError(f"unknown detector {detector!r}; expected D1 or D2") from None


def detector_ket(detector) -> np.ndarray:
    return np.eye(2, dtype=complex)[_detector_index(detector)]


@dataclass(frozen=True)
class JointTable:
    """P(detector, idler outcome); rows are D1, D2, columns follow ``basis.labels``."""

    basis: BasisPair
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.shape != (2, 2):
            raise ValueError("joint table must be 2x2")
        if p.min() < -hilbert.tolerance() or p.max() > 1 + hilbert.tolerance():
            raise ValueError("joint probabilities must lie in [0, 1]")
        if abs(p.sum() - 1.0) > hilbert.tolerance():
            raise ValueError(f"joint probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def entry(self, detector, outcome) -> float:
        return float(self.probs[_detector_index(detector), self.basis.index(outcome)])

    def detector_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def outcome_marginals(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def rows(self) -> list[dict]:
        return [
            {"detector": det, "outcome": lab, "probability": float(self.probs[i, j])}
            for i, det in enumerate(DETECTORS)
            for j, lab in enumerate(self.basis.labels)
        ]


def initial_state() -> StateVector:
    """(|V_s H_i> + |H_s V_i>)/sqrt2 with the signal in its source mode."""
    pair = np.array([0.0, SQRT1_2, SQRT1_2, 0.0])
    source_mode = np.array([1.0, 0.0])
    return StateVector.from_amplitudes(LAYOUT, np.kron(source_mode, pair), STAGE_SOURCE)


def evolve_pre_bs2(cfg: MzConfig) -> StateVector:
    s = initial_state()
    for op in (pbs_route(), conditional_pol_flip(), path_phase(cfg.x, cfg.lam)):
        s = apply_local(op, s)
    return s


def evolve_final(cfg: MzConfig) -> StateVector:
    return apply_local(beam_splitter(), evolve_pre_bs2(cfg))


def joint_probability(cfg: MzConfig, detector, basis: BasisPair, outcome) -> float:
    s = evolve_final(cfg)
    return hilbert.born_probability(
        s, [("signal_path", detector_ket(detector)), ("idler_pol", basis.state(outcome))]
    )


def detector_probability(cfg: MzConfig, detector) -> float:
    return hilbert.born_probability(evolve_final(cfg), [("signal_path", detector_ket(detector))])


def mub_for_position(cfg: MzConfig) -> float:
    """Idler basis angle that restores perfect detector correlation at this BS1 position."""
    return canonical_angle(cfg.phase)


def adaptive_basis(cfg: MzConfig) -> BasisPair:
    return mub_pair(Family.POLARIZATION_PQ, mub_for_position(cfg))


def correlation_table(cfg: MzConfig, basis: BasisPair) -> JointTable:
    s = evolve_final(cfg)
    probs = np.array([
        [hilbert.born_probability(s, [("signal_path", detector_ket(d)), ("idler_pol", b)])
         for b in basis.states]
        for d in DETECTORS
    ])
    return JointTable(basis, probs)


def ordered_joint(cfg: MzConfig, basis: BasisPair, order: MeasurementOrder | str) -> np.ndarray:
    """Joint distribution built by sequential projective measurement in the given order."""
    order = MeasurementOrder(order)
    s = evolve_final(cfg)
    probs = np.zeros((2, 2))
    if order is MeasurementOrder.IDLER_FIRST:
        for j, b in enumerate(basis.states):
            first = post_select(s, "idler_pol", b)
            if not first.defined:
                continue
            for i, d in enumerate(DETECTORS):
                probs[i, j] = first.prob * hilbert.born_probability(
                    first.state, [("signal_path", detector_ket(d))])
    else:
        for i, d in enumerate(DETECTORS):
            first = post_select(s, "signal_path", detector_ket(d))
            if not first.defined:
                continue
            for j, b in enumerate(basis.states):
                probs[i, j] = first.prob * hilbert.born_probability(first.state, [("idler_pol", b)])
    return probs


def mode_equivalence_check(cfg: MzConfig, basis: BasisPair) -> float:
    """Sup-norm gap between the idler-first and signal-first joint distributions."""
    a = ordered_joint(cfg, basis, MeasurementOrder.IDLER_FIRST)
    b = ordered_joint(cfg, basis, MeasurementOrder.SIGNAL_FIRST)
    return float(np.max(np.abs(a - b)))


class CheckResult(NamedTuple):
    name: str
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def invariant_report(xs, lam: float, thetas=None, tol: float | None = None) -> list[CheckResult]:
    """Run the analytic invariants over the BS1 positions ``xs``.

    ``thetas`` (same length as ``xs``) supplies arbitrary PQ angles for the
    measurement-order check; it defaults to the adaptive angle.
    """
    tol = hilbert.tolerance() if tol is None else tol
    xs = np.asarray(xs, dtype=float)
    thetas = None if thetas is None else np.asarray(thetas, dtype=float)
    rl = mub_pair(Family.CIRCULAR_RL)
    hv = mub_pair(Family.LINEAR_HV)
    dev = {k: 0.0 for k in ("marginals", "circular_zeros_x0", "adaptive_zeros",
                            "linear_flatness", "signal_purity", "idler_purity", "mode_order")}

    t0 = correlation_table(MzConfig(0.0, lam), rl)
    dev["circular_zeros_x0"] = float(np.max(np.abs(t0.probs - np.array([[0, 0.5], [0.5, 0]]))))

    for k, x in enumerate(xs):
        cfg = MzConfig(float(x), lam)
        t_rl = correlation_table(cfg, rl)
        dev["marginals"] = max(dev["marginals"], float(np.max(np.abs(t_rl.detector_marginals() - 0.5))))
        t_ad = correlation_table(cfg, adaptive_basis(cfg))
        dev["adaptive_zeros"] = max(
            dev["adaptive_zeros"], float(np.max(np.abs(t_ad.probs - np.array([[0, 0.5], [0.5, 0]])))))
        t_hv = correlation_table(cfg, hv)
        dev["linear_flatness"] = max(dev["linear_flatness"], float(np.max(np.abs(t_hv.probs - 0.25))))
        pre = evolve_pre_bs2(cfg)
        dev["signal_purity"] = max(dev["signal_purity"], abs(reduced_purity(pre, "signal_pol") - 1.0))
        dev["idler_purity"] = max(dev["idler_purity"], abs(reduced_purity(pre, "idler_pol") - 0.5))
        theta = mub_for_position(cfg) if thetas is None else float(thetas[k])
        for basis in (rl, hv, mub_pair(Family.POLARIZATION_PQ, theta)):
            dev["mode_order"] = max(dev["mode_order"], mode_equivalence_check(cfg, basis))
    return [CheckResult(name, value, tol) for name, value in dev.items()]
