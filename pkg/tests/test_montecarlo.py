import math

import numpy as np
import pytest

from qeraser.montecarlo import (
    BasisPolicy,
    EventRecord,
    ScanSpec,
    draw_cells,
    frequency_check,
    sample_joint,
    sample_two_slit,
    scan,
    screen_distribution,
    substream,
)
from qeraser.mz_eraser import MzConfig, correlation_table
from qeraser.optics import Family, mub_pair
from qeraser.two_slit import TwoSlitConfig, envelope

RL = mub_pair(Family.CIRCULAR_RL)


def closed_form_r(phi):
    """(D1 & R, D2 & R) probabilities."""
    return (1 - np.cos(phi)) / 4, (1 + np.cos(phi)) / 4


class TestStreams:
    def test_substreams_are_independent_of_step_count(self):
        a = substream(7, 3).random(5)
        b = substream(7, 3).random(5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, substream(7, 4).random(5))
        assert not np.array_equal(a, substream(8, 3).random(5))

    @pytest.mark.parametrize("seed", [-1, 2 ** 64])
    def test_seed_range(self, seed):
        with pytest.raises(ValueError):
            substream(seed)

    def test_zero_cells_never_drawn(self):
        cells = draw_cells([0.0, 0.5, 0.0, 0.5, 0.0], 100_000, substream(1))
        assert set(np.unique(cells).tolist()) == {1, 3}

    def test_tiny_cells_treated_as_zero(self):
        cells = draw_cells([1e-30, 1.0 - 1e-30], 10_000, substream(2))
        assert np.all(cells == 1)


class TestSampleJoint:
    def test_eq7_zero_cell(self):
        events = sample_joint(MzConfig(0.0, 1.0), RL, 10_000, seed=11)
        assert not any(e.detector == "D1" and e.idler_outcome == "R" for e in events)

    def test_eq7_frequency_binomial(self):
        n = 10_000
        events = sample_joint(MzConfig(0.0, 1.0), RL, n, seed=11)
        freq = sum(e.detector == "D2" and e.idler_outcome == "R" for e in events) / n
        assert abs(freq - 0.5) < 4 * math.sqrt(0.25 / n)

    def test_deterministic(self):
        a = sample_joint(MzConfig(0.3, 1.0), RL, 500, seed=5)
        b = sample_joint(MzConfig(0.3, 1.0), RL, 500, seed=5)
        assert a == b

    def test_record_fields(self):
        basis = mub_pair(Family.POLARIZATION_PQ, 1.0)
        ev = sample_joint(MzConfig(0.3, 1.0), basis, 3, seed=5)
        assert [e.trial for e in ev] == [0, 1, 2]
        assert all(e.family == "polarization_PQ" and e.basis_theta == pytest.approx(1.0) for e in ev)
        assert all(e.idler_outcome in ("P", "Q") for e in ev)

    def test_rejects_zero_events(self):
        with pytest.raises(ValueError):
            sample_joint(MzConfig(0.0, 1.0), RL, 0, seed=1)

    @pytest.mark.parametrize("x", [0.1, 0.37, 0.8])
    def test_self_consistent_frequencies(self, x):
        basis = mub_pair(Family.POLARIZATION_PQ, 2.2)
        table = correlation_table(MzConfig(x, 1.0), basis)
        expected = {(r["detector"], r["outcome"]): r["probability"] for r in table.rows()}
        report = frequency_check(sample_joint(MzConfig(x, 1.0), basis, 10_000, seed=3), expected)
        assert report.ok(4.0), report


class TestScan:
    def test_fig2_circular(self):
        spec = ScanSpec(0.0, 1.0, 41, 10_000, BasisPolicy.fixed(Family.CIRCULAR_RL))
        hist = scan(1.0, spec, seed=7)
        phi = 2 * np.pi * hist.x
        p1, p2 = closed_form_r(phi)
        f1 = hist.series("D1", "R") / hist.shots
        f2 = hist.series("D2", "R") / hist.shots
        for f, p in ((f1, p1), (f2, p2)):
            sd = np.sqrt(p * (1 - p) / hist.shots)
            zero = p < 1e-12
            assert np.all(np.abs(f - p)[~zero] < 4 * sd[~zero])
            assert np.all(f[zero] == 0)
        assert hist.series("D1", "R")[0] == 0 and hist.series("D2", "R")[0] == hist.series("D2", "R").max()

    def test_adaptive_zero_cells(self):
        spec = ScanSpec(-0.7, 1.3, 25, 2_000, BasisPolicy.adaptive_mub())
        hist = scan(1.0, spec, seed=9)
        assert np.all(hist.series("D1", "P") == 0)
        assert np.all(hist.series("D2", "Q") == 0)
        np.testing.assert_allclose(hist.theta, np.mod(2 * np.pi * hist.x, 2 * np.pi), atol=1e-12)

    def test_single_shot_rows(self):
        hist = scan(1.0, ScanSpec(0.0, 1.0, 5, 1), seed=1)
        np.testing.assert_array_equal(hist.counts.sum(axis=(1, 2)), 1)

    def test_shots_must_be_positive(self):
        with pytest.raises(ValueError):
            ScanSpec(0.0, 1.0, 5, 0)

    @pytest.mark.parametrize("kw", [dict(x_min=1.0, x_max=0.0), dict(steps=1)])
    def test_spec_validation(self, kw):
        args = dict(x_min=0.0, x_max=1.0, steps=5, shots=10)
        args.update(kw)
        with pytest.raises(ValueError):
            ScanSpec(**args)

    def test_deterministic(self):
        spec = ScanSpec(0.0, 1.0, 11, 300, BasisPolicy.fixed("polarization_PQ", 1.0), poisson=True)
        a, b = scan(1.0, spec, 42), scan(1.0, spec, 42)
        np.testing.assert_array_equal(a.counts, b.counts)
        np.testing.assert_array_equal(a.shots, b.shots)

    def test_step_streams_stable_under_refinement(self):
        # step k of a scan only depends on (seed, k)
        coarse = scan(1.0, ScanSpec(0.0, 1.0, 3, 500), 4)
        fine = scan(1.0, ScanSpec(0.0, 2.0, 5, 500), 4)
        np.testing.assert_array_equal(coarse.counts[0], fine.counts[0])

    def test_poisson_conservation(self):
        hist = scan(1.0, ScanSpec(0.0, 1.0, 9, 50, poisson=True), 3)
        np.testing.assert_array_equal(hist.counts.sum(axis=(1, 2)), hist.shots)
        assert len(set(hist.shots.tolist())) > 1

    def test_rows_shape(self):
        hist = scan(1.0, ScanSpec(0.0, 1.0, 41, 10), 1)
        rows = hist.rows()
        assert len(rows) == 41 * 4
        assert set(rows[0]) == {"x", "theta", "detector", "outcome", "count", "shots",
                                "frequency", "probability"}


class TestTwoSlitSampling:
    @pytest.fixture
    def cfg(self):
        return TwoSlitConfig.build(d=1.0, D=1000.0, lam=0.001)

    def test_all_plus(self, cfg):
        assert all(e.outcome == "plus" for e in sample_two_slit(cfg, 20_000, seed=5))

    def test_envelope_histogram(self, cfg):
        n = 100_000
        events = sample_two_slit(cfg, n, seed=5)
        idx = np.searchsorted(cfg.grid, [e.x for e in events])
        counts = np.bincount(idx, minlength=len(cfg.grid))
        # oracle: marginal density 2A(x) on the grid, normalized independently
        w = 2 * np.exp(-cfg.grid ** 2 / (2 * 5.0 ** 2))
        p = w / w.sum()
        z = (counts / n - p) / np.sqrt(p * (1 - p) / n)
        assert np.max(np.abs(z)) < 4

    def test_distribution_matches_envelope(self, cfg):
        w = envelope(cfg, cfg.grid)
        np.testing.assert_allclose(screen_distribution(cfg), w / w.sum(), rtol=1e-12)

    def test_deterministic(self, cfg):
        assert sample_two_slit(cfg, 200, 8) == sample_two_slit(cfg, 200, 8)

    def test_theta_star_reported(self, cfg):
        for e in sample_two_slit(cfg, 50, 8):
            assert e.theta_star == pytest.approx(np.mod(2 * np.pi * e.x, 2 * np.pi), abs=1e-9)


class TestFrequencyCheck:
    def test_zero_cell_violation(self):
        ev = [("a",), ("b",)]
        report = frequency_check(ev, {("a",): 1.0, ("b",): 0.0})
        assert any(c.violation for c in report.cells)
        assert not report.ok()

    def test_empty_expected(self):
        with pytest.raises(ValueError, match="empty"):
            frequency_check([("a",)], {})

    def test_expected_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum"):
            frequency_check([("a",)], {("a",): 0.5})

    def test_no_events(self):
        with pytest.raises(ValueError):
            frequency_check([], {("a",): 1.0})

    def test_unknown_cells(self):
        with pytest.raises(ValueError, match="missing"):
            frequency_check([("c",)], {("a",): 1.0})

    def test_z_score(self):
        ev = [EventRecord(i, 0.0, "D1", "R", 0.0, "circular_RL") for i in range(60)]
        ev += [EventRecord(i, 0.0, "D2", "R", 0.0, "circular_RL") for i in range(40)]
        report = frequency_check(ev, {("D1", "R"): 0.5, ("D2", "R"): 0.5})
        z = {c.cell: c.z for c in report.cells}
        assert z[("D1", "R")] == pytest.approx(0.1 / math.sqrt(0.25 / 100))
