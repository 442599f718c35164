"""Unit tests for the Monte Carlo harness."""

import math

import numpy as np
import pytest

from relaygap import harness
from relaygap.codes import repetition_phenom_problem, repetition_problem
from relaygap.f2core import SparseBitMatrix
from relaygap.harness import (
    DecodeAuditError,
    ExperimentConfig,
    ShotRecord,
    decode_shot,
    per_round_ler,
    run_experiment,
    sample_shot,
    summarize,
    sweep_thresholds,
    threshold_for_rejection,
    wilson_ci,
)
from relaygap.problem import DecodingProblem, LogicalClass, save_dem
from relaygap.relaybp import RelayConfig, make_rng

ZERO = LogicalClass((0,))
ONE = LogicalClass((1,))


def record(index, gap, success, erasure=False):
    return ShotRecord(
        shot_index=index,
        shot_seed=index,
        true_class=ZERO,
        gap=gap,
        erasure=erasure,
        decoded_class=None if erasure else (ZERO if success else ONE),
        success=success,
        forced_converged_count=0 if erasure else 1,
    )


@pytest.fixture
def records():
    """An erasure, an exact-zero gap, two finite gaps and an infinite gap."""
    return [
        record(0, 0.0, False, erasure=True),
        record(1, 0.0, True),
        record(2, 1.5, False),
        record(3, 3.0, True),
        record(4, math.inf, True),
    ]


@pytest.fixture
def experiment(rep3, small_config):
    return ExperimentConfig(
        source=rep3,
        baseline=small_config,
        forced=small_config.for_forced_runs(),
        n_shots=30,
        master_seed=7,
    )


class TestSampling:
    """Fault sampling."""

    @pytest.mark.unit
    def test_zero_priors(self):
        prob = DecodingProblem(
            SparseBitMatrix.from_dense([[1, 1, 0], [0, 1, 1]]),
            SparseBitMatrix.from_dense([[1, 0, 0]]),
            np.zeros(3),
        )
        f, sigma, cls = sample_shot(prob, make_rng(1))
        assert not f.any()
        assert not sigma.any()
        assert cls == ZERO

    @pytest.mark.unit
    def test_mean_weight(self, rep3):
        """Mean fault weight at p=0.1 on 3 bits is 0.3 within three standard errors."""
        rng = make_rng(99)
        shots = 20_000
        total = sum(int(sample_shot(rep3, rng)[0].sum()) for _ in range(shots))
        stderr = math.sqrt(3 * 0.1 * 0.9 / shots)
        assert abs(total / shots - 0.3) < 3 * stderr


class TestExperimentConfig:
    """Validation and problem resolution."""

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_shots": 0},
            {"rounds": 0},
            {"worker_count": 0},
            {"statistic": "median"},
            {"master_seed": -1},
        ],
    )
    def test_invalid(self, rep3, kwargs):
        with pytest.raises(ValueError):
            ExperimentConfig(source=rep3, **kwargs)

    @pytest.mark.unit
    def test_preset_source(self):
        prob = ExperimentConfig(source="rep5", p=0.05).resolve_problem()
        assert prob.same_as(repetition_problem(5, 0.05))
        with pytest.raises(ValueError, match="needs a prior"):
            ExperimentConfig(source="rep5").resolve_problem()

    @pytest.mark.unit
    def test_dem_source(self, tmp_path, rep3):
        path = save_dem(rep3, tmp_path / "rep3.dem")
        assert ExperimentConfig(source=path).resolve_problem().same_as(rep3)
        overridden = ExperimentConfig(source=str(path), p=0.2).resolve_problem()
        np.testing.assert_array_equal(overridden.priors, np.full(3, 0.2))


class TestRunExperiment:
    """Decoding batches of shots."""

    @pytest.mark.unit
    def test_records_and_progress(self, experiment):
        lines = []
        records = run_experiment(experiment, echo=lines.append)
        assert [r.shot_index for r in records] == list(range(30))
        assert lines[0].startswith("[1/3]")
        assert lines[-1].startswith("[3/3]")
        for r in records:
            assert r.gap >= 0
            assert r.success == (r.decoded_class == r.true_class)

    @pytest.mark.unit
    def test_deterministic(self, experiment):
        first = run_experiment(experiment, echo=lambda _: None)
        second = run_experiment(experiment, echo=lambda _: None)
        assert first == second

    @pytest.mark.integration
    def test_worker_count_does_not_matter(self, experiment):
        """Records are identical for one and several workers."""
        sequential = run_experiment(experiment, echo=lambda _: None)
        parallel = run_experiment(
            ExperimentConfig(
                source=experiment.source,
                baseline=experiment.baseline,
                forced=experiment.forced,
                n_shots=experiment.n_shots,
                master_seed=experiment.master_seed,
                worker_count=2,
            ),
            echo=lambda _: None,
        )
        assert sequential == parallel

    @pytest.mark.unit
    def test_exact_statistic(self, rep3):
        """The oracle statistic gives finite gaps on rep3 and never erases."""
        cfg = ExperimentConfig(source=rep3, n_shots=50, statistic="exact", master_seed=3)
        records = run_experiment(cfg, echo=lambda _: None)
        assert not any(r.erasure for r in records)
        assert all(0 < r.gap < math.inf for r in records)
        assert {round(r.gap, 9) for r in records} <= {
            round(math.log(9), 9),
            round(3 * math.log(9), 9),
        }

    @pytest.mark.unit
    def test_audit_failure_raises(self, experiment, monkeypatch):
        monkeypatch.setattr(harness, "audit_outcome", lambda *args: ["broken"])
        with pytest.raises(DecodeAuditError, match="broken"):
            decode_shot(experiment.resolve_problem(), experiment, 0)

    @pytest.mark.slow
    def test_forced_constraint_on_phenomenological_rep5(self):
        """Every shot of a multi-round problem passes the validity audit."""
        prob = repetition_phenom_problem(5, 3, 0.03, 0.03)
        cfg = ExperimentConfig(
            source=prob,
            baseline=RelayConfig(num_sets=50, stop_nconv=10),
            forced=RelayConfig(num_sets=10, stop_nconv=10),
            n_shots=10_000,
            rounds=3,
            master_seed=5,
            worker_count=2,
        )
        records = run_experiment(cfg, echo=lambda _: None)
        assert len(records) == 10_000

    @pytest.mark.slow
    def test_post_selection_lowers_error_rate(self):
        """Rejecting about 1% of 100k rep-5 shots beats no post-selection."""
        cfg = ExperimentConfig(
            source="rep5",
            p=0.08,
            baseline=RelayConfig(num_sets=50),
            forced=RelayConfig(num_sets=10),
            n_shots=100_000,
            master_seed=11,
            worker_count=4,
        )
        records = run_experiment(cfg, echo=lambda _: None)
        threshold = threshold_for_rejection(records, 0.01)
        assert threshold is not None
        baseline, selected = sweep_thresholds(records, [0.0, threshold])
        assert selected.ps_rate >= 0.01
        assert selected.ci_high < baseline.ci_low

    @pytest.mark.slow
    def test_exact_gap_selection_lowers_error_rate(self):
        """Post-selecting on the exact gap beats no post-selection on rep-5.

        At p=0.08 every rep-5 gap is an odd multiple of ln(0.92/0.08), about
        2.44, so T=2 keeps every shot and T=3 is the first threshold that
        drops the two-flip and three-flip syndromes.
        """
        cfg = ExperimentConfig(
            source="rep5",
            p=0.08,
            statistic="exact",
            n_shots=100_000,
            master_seed=13,
            worker_count=4,
        )
        records = run_experiment(cfg, echo=lambda _: None)
        smallest = min(r.gap for r in records)
        assert smallest == pytest.approx(math.log(0.92 / 0.08), abs=1e-9)
        baseline, at_two, selected = sweep_thresholds(records, [0.0, 2.0, 3.0])
        assert at_two.n_accepted == baseline.n_accepted
        assert selected.ps_rate > 0.0
        assert selected.ler < baseline.ler
        assert selected.ci_high < baseline.ci_low


class TestStatistics:
    """Per-round rates and Wilson intervals."""

    @pytest.mark.unit
    def test_per_round_ler(self):
        assert per_round_ler(0.0, 6) == 0.0
        assert per_round_ler(0.25, 1) == pytest.approx(0.25)
        assert per_round_ler(1.0, 3) == 1.0
        x = per_round_ler(0.006, 6)
        assert x == pytest.approx(1.0025e-3, abs=1e-7)
        assert 1 - (1 - x) ** 6 == pytest.approx(0.006, abs=1e-12)

    @pytest.mark.unit
    @pytest.mark.parametrize(("p", "rounds"), [(-0.1, 1), (1.1, 1), (0.1, 0)])
    def test_per_round_ler_invalid(self, p, rounds):
        with pytest.raises(ValueError):
            per_round_ler(p, rounds)

    @pytest.mark.unit
    def test_wilson(self):
        low, high = wilson_ci(0, 100)
        assert low == 0.0
        assert high == pytest.approx(0.0370, abs=1e-4)
        low, high = wilson_ci(50, 100)
        assert low + high == pytest.approx(1.0, abs=1e-12)
        assert wilson_ci(20, 20)[1] == 1.0

    @pytest.mark.unit
    def test_wilson_invalid(self):
        with pytest.raises(ValueError):
            wilson_ci(0, 0)
        with pytest.raises(ValueError):
            wilson_ci(5, 4)


class TestSweep:
    """Post-selection curves."""

    @pytest.mark.unit
    def test_curve(self, records):
        points = sweep_thresholds(records, [0.0, 1e-9, 2.0, math.inf])
        assert [p.n_accepted for p in points] == [5, 3, 2, 1]
        assert [p.ps_rate for p in points] == [0.0, 0.4, 0.6, 0.8]
        assert points[0].ler == pytest.approx(2 / 5)
        assert points[1].ler == pytest.approx(1 / 3)
        assert points[2].ler == 0.0
        assert points[3].threshold == math.inf

    @pytest.mark.unit
    def test_per_round_column(self, records):
        (point,) = sweep_thresholds(records, [0.0], rounds=6)
        assert point.ler_per_round == pytest.approx(per_round_ler(0.4, 6))

    @pytest.mark.unit
    def test_nothing_accepted(self):
        (point,) = sweep_thresholds([record(0, 1.0, True)], [math.inf])
        assert point.n_accepted == 0
        assert (point.ler, point.ci_low, point.ci_high) == (0.0, 0.0, 1.0)

    @pytest.mark.unit
    def test_nesting(self):
        """Accepted sets shrink as the threshold grows."""
        rng = np.random.default_rng(17)
        gaps = np.where(rng.random(10_000) < 0.05, math.inf, rng.exponential(3.0, 10_000))
        gaps[rng.random(10_000) < 0.02] = 0.0
        batch = [record(i, float(g), bool(rng.random() < 0.9)) for i, g in enumerate(gaps)]
        thresholds = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, math.inf]
        previous = None
        for t in thresholds:
            accepted = {r.shot_index for r in batch if r.gap >= t}
            if previous is not None:
                assert accepted <= previous
            previous = accepted
        points = sweep_thresholds(batch, thresholds)
        assert all(a.n_accepted >= b.n_accepted for a, b in zip(points, points[1:]))
        assert all(a.ps_rate <= b.ps_rate for a, b in zip(points, points[1:]))

    @pytest.mark.unit
    @pytest.mark.parametrize("thresholds", [[1.0, 0.5], [-1.0], [math.nan]])
    def test_invalid_thresholds(self, records, thresholds):
        with pytest.raises(ValueError):
            sweep_thresholds(records, thresholds)

    @pytest.mark.unit
    def test_empty_records(self):
        with pytest.raises(ValueError, match="empty"):
            sweep_thresholds([], [0.0])


class TestSummaries:
    """Breakdowns and threshold selection."""

    @pytest.mark.unit
    def test_summarize(self, records):
        summary = summarize(records)
        assert summary == {
            "shots": 5,
            "erasures": 1,
            "zero_gap": 1,
            "finite_gap": 2,
            "infinite_gap": 1,
            "failures_at_zero": 2,
            "ler_at_zero": 0.4,
        }

    @pytest.mark.unit
    def test_threshold_for_rejection(self, records):
        assert threshold_for_rejection(records, 0.0) == 0.0
        assert threshold_for_rejection(records, 0.2) == 1.5
        assert threshold_for_rejection(records, 0.4) == 1.5
        assert threshold_for_rejection(records, 0.8) == math.inf
        assert threshold_for_rejection(records, 0.9) is None
