"""Seeded sampling of coincidence events and BS1-position scans.

Random streams: PCG64 seeded through ``numpy.random.SeedSequence``.  The
scan step ``k`` draws from ``SeedSequence(seed, spawn_key=(k,))``, so a
step's events depend only on (seed, k) and never on how many steps the
scan has.  Outcomes are drawn by inverse CDF over the explicit outcome
table; cells whose probability is below the global tolerance are treated
as exact zeros and can never be drawn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from qeraser import hilbert
from qeraser.mz_eraser import DETECTORS, MzConfig, adaptive_basis, correlation_table
from qeraser.optics import BasisPair, Family, mub_pair
from qeraser.two_slit import TwoSlitConfig, envelope, pattern_amplitude_form, theta_star

MAX_SEED = 2 ** 64 - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def substream(seed: int, key: int | None = None) -> np.random.Generator:
    """Generator for the master ``seed``, or for its ``key``-th substream."""
    seed = _check_seed(seed)
    spawn_key = () if key is None else (int(key),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


def clean_distribution(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float).reshape(-1).copy()
    p[p < hilbert.tolerance()] = 0.0
    total = p.sum()
    if total <= 0:
        raise ValueError("distribution has no support")
    return p / total


def draw_cells(probs, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n`` inverse-CDF draws from the distribution ``probs``."""
    p = clean_distribution(probs)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    # a zero cell has an empty interval [cdf[k-1], cdf[k]) and is never chosen
    return np.searchsorted(cdf, rng.random(n), side="right")


@dataclass(frozen=True)
class EventRecord:
    trial: int
    x: float
    detector: str
    idler_outcome: str
    basis_theta: float
    family: str


def sample_joint(cfg: MzConfig, basis: BasisPair, n: int, seed: int) -> list[EventRecord]:
    if n < 1:
        raise ValueError("need at least one event")
    table = correlation_table(cfg, basis)
    cells = draw_cells(table.probs, n, substream(seed))
    labels = basis.labels
    return [
        EventRecord(t, cfg.x, DETECTORS[c // 2], labels[c % 2], basis.theta, basis.family.value)
        for t, c in enumerate(cells.tolist())
    ]


@dataclass(frozen=True)
class BasisPolicy:
    """Idler basis per scan point: a fixed pair, or PQ at the adaptive angle."""

    family: Family | None = Family.CIRCULAR_RL
    theta: float = 0.0
    adaptive: bool = False

    @classmethod
    def fixed(cls, family: Family | str, theta: float = 0.0) -> BasisPolicy:
        return cls(Family(family), theta, False)

    @classmethod
    def adaptive_mub(cls) -> BasisPolicy:
        return cls(Family.POLARIZATION_PQ, 0.0, True)

    def basis_for(self, cfg: MzConfig) -> BasisPair:
        if self.adaptive:
            return adaptive_basis(cfg)
        return mub_pair(self.family, self.theta)

    @property
    def labels(self) -> tuple[str, str]:
        return mub_pair(self.family).labels


@dataclass(frozen=True)
class ScanSpec:
    x_min: float
    x_max: float
    steps: int
    shots: int
    policy: BasisPolicy = BasisPolicy()
    poisson: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max) and self.x_min < self.x_max):
            raise ValueError("scan needs finite x_min < x_max")
        if self.steps < 2:
            raise ValueError("scan needs at least two steps")
        if self.shots < 1:
            raise ValueError("scan needs at least one shot per step")

    def positions(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.steps)


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Per-position counts, ``counts[k, detector, outcome]``."""

    x: np.ndarray
    theta: np.ndarray
    labels: tuple[str, str]
    counts: np.ndarray
    shots: np.ndarray
    expected: np.ndarray

    def __post_init__(self):
        if not np.array_equal(self.counts.sum(axis=(1, 2)), self.shots):
            raise ValueError("cell counts do not add up to the shots at every position")

    def frequencies(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            f = self.counts / self.shots[:, None, None]
        return np.nan_to_num(f)

    def series(self, detector: str, outcome: str) -> np.ndarray:
        return self.counts[:, DETECTORS.index(detector), self.labels.index(outcome)]

    def rows(self) -> list[dict]:
        freq = self.frequencies()
        out = []
        for k in range(len(self.x)):
            for i, det in enumerate(DETECTORS):
                for j, lab in enumerate(self.labels):
                    out.append({
                        "x": float(self.x[k]),
                        "theta": float(self.theta[k]),
                        "detector": det,
                        "outcome": lab,
                        "count": int(self.counts[k, i, j]),
                        "shots": int(self.shots[k]),
                        "frequency": float(freq[k, i, j]),
                        "probability": float(self.expected[k, i, j]),
                    })
        return out


def scan(lam: float, spec: ScanSpec, seed: int) -> CoincidenceHistogram:
    """Coincidence scan over BS1 positions; step ``k`` uses substream ``k``."""
    xs = spec.positions()
    counts = np.zeros((spec.steps, 2, 2), dtype=np.int64)
    shots = np.zeros(spec.steps, dtype=np.int64)
    thetas = np.zeros(spec.steps)
    expected = np.zeros((spec.steps, 2, 2))
    for k, x in enumerate(xs):
        cfg = MzConfig(float(x), lam)
        basis = spec.policy.basis_for(cfg)
        table = correlation_table(cfg, basis)
        rng = substream(seed, k)
        n = int(rng.poisson(spec.shots)) if spec.poisson else spec.shots
        if n:
            cells = draw_cells(table.probs, n, rng)
            counts[k] = np.bincount(cells, minlength=4).reshape(2, 2)
        shots[k] = n
        thetas[k] = basis.theta
        expected[k] = table.probs
    return CoincidenceHistogram(xs, thetas, spec.policy.labels, counts, shots, expected)


class ScreenEvent(NamedTuple):
    x: float
    theta_star: float
    outcome: str


def screen_distribution(cfg: TwoSlitConfig) -> np.ndarray:
    """Grid-discretized screen marginal, proportional to 2 A(x)."""
    w = 2.0 * envelope(cfg, cfg.grid)
    return w / w.sum()


def sample_two_slit(cfg: TwoSlitConfig, n: int, seed: int) -> list[ScreenEvent]:
    """Screen hits with the which-way outcome measured in the adaptive basis.

    The outcome is drawn from the conditional Born probabilities
    p_+/-(x; theta*) / 2A(x), so it is a measured result, not an assumption.
    """
    if n < 1:
        raise ValueError("need at least one event")
    rng = substream(seed)
    idx = draw_cells(screen_distribution(cfg), n, rng)
    u = rng.random(n)
    per_point = {}
    for i in np.unique(idx).tolist():
        x = float(cfg.grid[i])
        th = theta_star(cfg, x)
        plus, minus = pattern_amplitude_form(cfg, th, np.array([x]))
        per_point[i] = (x, th, clean_distribution([plus[0], minus[0]])[0])
    events = []
    for i, r in zip(idx.tolist(), u.tolist()):
        x, th, p_plus = per_point[i]
        events.append(ScreenEvent(x, th, "plus" if r < p_plus else "minus"))
    return events


class CellCheck(NamedTuple):
    cell: tuple
    count: int
    frequency: float
    probability: float
    z: float
    violation: bool


class FrequencyReport(NamedTuple):
    n: int
    cells: list[CellCheck]

    @property
    def max_abs_z(self) -> float:
        return max(abs(c.z) for c in self.cells)

    def ok(self, z_limit: float = 4.0) -> bool:
        return not any(c.violation for c in self.cells) and self.max_abs_z < z_limit


def frequency_check(events: Sequence, expected: Mapping[tuple, float]) -> FrequencyReport:
    """Binomial z-score per cell, ``z = (freq - p) / sqrt(p (1 - p) / n)``.

    ``events`` may be :class:`EventRecord` objects (cell = (detector,
    idler_outcome)) or plain hashable cell keys.  A cell with p = 0 (or 1)
    has no spread; any deviation there is a violation.
    """
    if not expected:
        raise ValueError("expected table is empty")
    total = sum(expected.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"expected probabilities sum to {total!r}, not 1")
    if not events:
        raise ValueError("no events to check")
    tally: dict = {}
    for ev in events:
        key = (ev.detector, ev.idler_outcome) if isinstance(ev, EventRecord) else ev
        tally[key] = tally.get(key, 0) + 1
    unknown = set(tally) - set(expected)
    if unknown:
        raise ValueError(f"events fall in cells missing from the expected table: {sorted(unknown)}")
    n = len(events)
    cells = []
    for key, p in expected.items():
        count = tally.get(key, 0)
        freq = count / n
        sd = math.sqrt(p * (1 - p) / n)
        if sd == 0:
            z = 0.0 if freq == p else math.inf
        else:
            z = (freq - p) / sd
        cells.append(CellCheck(key, count, freq, p, z, math.isinf(z)))
    return FrequencyReport(n, cells)
