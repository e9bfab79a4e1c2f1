"""Two-slit interference with a two-state which-way detector.

Far-field model: the slit amplitudes on the screen are
``sqrt(A(x)) * exp(+/- i pi x d / (lam D))`` with a Gaussian envelope
``A(x) = exp(-x^2 / (2 sigma^2))``.  Coincidence patterns with the rotated
detector basis ``d_+/-(theta)`` are reported as probabilities
``p_+/-(x) = A(x) [1 +/- cos(2 pi x d / (lam D) - theta)]`` (unnormalized,
in units of A).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from qeraser import hilbert
from qeraser.optics import TWO_PI, Family, canonical_angle, mub_pair

DEFAULT_SIGMA_PERIODS = 5.0
DEFAULT_GRID_STEPS = 1001


class InvariantViolation(RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


@dataclass(frozen=True)
class TwoSlitConfig:
    d: float
    D: float
    lam: float
    envelope_sigma: float
    grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("d", "D", "lam", "envelope_sigma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        grid = np.array(self.grid, dtype=float).reshape(-1)
        if grid.size == 0 or not np.all(np.isfinite(grid)):
            raise ValueError("grid must be a non-empty array of finite positions")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def build(cls, d: float, D: float, lam: float, sigma: float | None = None,
              grid_min: float | None = None, grid_max: float | None = None,
              grid_steps: int = DEFAULT_GRID_STEPS) -> TwoSlitConfig:
        """Config with defaults: sigma = 5 fringe periods, grid = +/-3 sigma."""
        period = lam * D / d
        sigma = DEFAULT_SIGMA_PERIODS * period if sigma is None else sigma
        lo = -3.0 * sigma if grid_min is None else grid_min
        hi = 3.0 * sigma if grid_max is None else grid_max
        if grid_steps < 2:
            raise ValueError("grid needs at least two points")
        return cls(d, D, lam, sigma, np.linspace(lo, hi, grid_steps))

    @property
    def fringe_period(self) -> float:
        return self.lam * self.D / self.d

    @property
    def wavenumber(self) -> float:
        """Fringe angular frequency 2 pi d / (lam D)."""
        return TWO_PI * self.d / (self.lam * self.D)


class PatternSample(NamedTuple):
    x: float
    p_plus: float
    p_minus: float


def envelope(cfg: TwoSlitConfig, x):
    return np.exp(-np.square(x) / (2.0 * cfg.envelope_sigma ** 2))


def slit_amplitudes(cfg: TwoSlitConfig, x):
    """Screen amplitudes (psi_1(x), psi_2(x)); works elementwise on arrays."""
    half = 0.5 * cfg.wavenumber * np.asarray(x, dtype=float)
    root = np.sqrt(envelope(cfg, x))
    return root * np.exp(1j * half), root * np.exp(-1j * half)


def pattern_closed_form(cfg: TwoSlitConfig, theta: float, x=None) -> tuple[np.ndarray, np.ndarray]:
    x = cfg.grid if x is None else np.asarray(x, dtype=float)
    a = envelope(cfg, x)
    c = np.cos(cfg.wavenumber * x - theta)
    return a * (1 + c), a * (1 - c)


def pattern_amplitude_form(cfg: TwoSlitConfig, theta: float, x=None) -> tuple[np.ndarray, np.ndarray]:
    """|<d_+/-(theta)| (psi_1 d1 + psi_2 d2)>|^2, from the amplitudes."""
    x = cfg.grid if x is None else np.asarray(x, dtype=float)
    basis = mub_pair(Family.DETECTOR_PM, theta)
    amps = np.stack(slit_amplitudes(cfg, x), axis=-1)
    overlaps = amps @ basis.states.conj().T
    p = np.abs(overlaps) ** 2
    return p[..., 0], p[..., 1]


def pattern(cfg: TwoSlitConfig, theta: float) -> list[PatternSample]:
    """Coincidence patterns on the grid; raises if the two evaluation routes disagree."""
    plus, minus = pattern_closed_form(cfg, theta)
    plus_a, minus_a = pattern_amplitude_form(cfg, theta)
    gap = max(np.max(np.abs(plus - plus_a)), np.max(np.abs(minus - minus_a)))
    if gap > hilbert.tolerance():
        raise InvariantViolation(f"closed and amplitude patterns differ by {gap:.3e}")
    return [PatternSample(float(x), float(p), float(m)) for x, p, m in zip(cfg.grid, plus, minus)]


def theta_star(cfg: TwoSlitConfig, x: float) -> float:
    """Detector basis angle for which a hit at ``x`` forces the ``plus`` outcome."""
    return canonical_angle(cfg.wavenumber * x)


class ErasureCheck(NamedTuple):
    theta: float
    p_minus_at_x: float
    plus_probability: float
    forced_outcome: str | None


def which_way_state(cfg: TwoSlitConfig, x: float) -> hilbert.StateVector:
    """Detector state conditioned on a hit at ``x``."""
    psi1, psi2 = slit_amplitudes(cfg, x)
    return hilbert.StateVector.from_amplitudes(("ww_detector",), [psi1, psi2], normalize=True)


def erased_basis_check(cfg: TwoSlitConfig, x: float) -> ErasureCheck:
    theta = theta_star(cfg, x)
    _, p_minus = pattern_amplitude_form(cfg, theta, np.array([x]))
    basis = mub_pair(Family.DETECTOR_PM, theta)
    p_plus = hilbert.born_probability(which_way_state(cfg, x), [("ww_detector", basis.states[0])])
    forced = None
    if p_plus > 1.0 - hilbert.tolerance():
        forced = "plus"
    elif p_plus < hilbert.tolerance():
        forced = "minus"
    return ErasureCheck(theta, float(p_minus[0]), p_plus, forced)
