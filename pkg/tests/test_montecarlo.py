"""
Tests for the Monte Carlo module.

This module contains unit tests for count simulation, the Poisson likelihood,
the maximum-likelihood estimator and the Cramér-Rao experiment.
"""

import logging
import math

import numpy as np
import pytest

from ..core.constants import X_FLOOR
from ..core.exceptions import DomainError, EstimationError
from ..core.rng import make_stream
from ..measurements.crosstalk_demux import CrosstalkDemux
from ..measurements.ideal import IdealDemux
from ..physics.crosstalk import uniform_crosstalk
from ..physics.modes import SceneParams
from ..physics.montecarlo import (
    CountRecord,
    LikelihoodGrid,
    crb_experiment,
    log_likelihood,
    mle_estimate,
    simulate_counts,
)
from ..physics.resolution import dmin_ideal


@pytest.fixture
def ideal():
    """Create the ideal Q = 1 sorter at θ = 0.3."""
    return IdealDemux(q_measured=1, theta=0.3)


class TestCountRecord:
    """Test cases for CountRecord."""

    def test_counts_frozen(self):
        """Test that counts are copied to a read-only float array."""
        record = CountRecord([1, 2, 3], SceneParams(x=0.1))
        assert record.counts.dtype == float
        assert record.total == 6.0
        with pytest.raises(ValueError):
            record.counts[0] = 5

    def test_negative_rejected(self):
        """Test that negative counts are rejected."""
        with pytest.raises(DomainError):
            CountRecord([1, -1], SceneParams(x=0.1))


class TestSimulateCounts:
    """Test cases for simulate_counts."""

    def test_shape_and_values(self, ideal):
        """Test one count per measured mode, non-negative integers."""
        scene = SceneParams(x=0.4, theta=0.3, n_photons=1e4)
        record = simulate_counts(ideal.probabilities(scene), 1e4, make_stream(1, 3, 0), {"model": "ideal"})
        assert record.counts.shape == (4,)
        assert np.all(record.counts >= 0)
        assert np.all(record.counts == np.round(record.counts))
        assert record.descriptor == {"model": "ideal"}

    def test_reproducible(self, ideal):
        """Test that the same stream reproduces the dataset."""
        model = ideal.probabilities(SceneParams(x=0.4, theta=0.3))
        first = simulate_counts(model, 1e3, make_stream(5, 3, 7))
        second = simulate_counts(model, 1e3, make_stream(5, 3, 7))
        np.testing.assert_array_equal(first.counts, second.counts)

    def test_dark_modes_stay_dark(self):
        """Test that zero-probability modes never register counts."""
        model = IdealDemux(1, theta=0.0).probabilities(SceneParams(x=0.4))
        record = simulate_counts(model, 1e6, make_stream(2, 3, 0))
        # modes with m = 1 vanish at θ = 0
        assert record.counts[1] == 0
        assert record.counts[3] == 0

    def test_photon_number_validated(self, ideal):
        """Test that N must be positive."""
        with pytest.raises(DomainError):
            simulate_counts(ideal.probabilities(SceneParams(x=0.4)), 0.0, make_stream(1, 3, 0))


class TestLikelihood:
    """Test cases for log_likelihood and the estimator."""

    def test_counts_in_dark_mode(self):
        """Test -inf when a zero-probability mode has counts."""
        model = IdealDemux(1, theta=0.0)
        scene = SceneParams(x=0.4, n_photons=100.0)
        assert math.isfinite(log_likelihood(CountRecord([80, 0, 15, 0], scene), model.probabilities, 0.4))
        assert log_likelihood(CountRecord([80, 1, 15, 0], scene), model.probabilities, 0.4) == -math.inf

    def test_mode_count_mismatch(self, ideal):
        """Test that the record must cover the measured modes."""
        record = CountRecord([10, 2], SceneParams(x=0.4, theta=0.3, n_photons=100.0))
        with pytest.raises(DomainError):
            log_likelihood(record, ideal.probabilities, 0.4)

    def test_expectation_fixed_point(self, ideal):
        """Test that the expected counts are maximized at the true separation."""
        scene = SceneParams(x=0.4, theta=0.3, n_photons=1e4)
        expected = scene.n_photons * ideal.probabilities(scene).probs
        result = mle_estimate(CountRecord(expected, scene), ideal.probabilities)
        assert result.x_hat == pytest.approx(0.4, abs=1e-6)
        assert not result.at_boundary

    def test_all_zero_counts(self, ideal):
        """Test that an empty dataset has no estimate."""
        record = CountRecord([0, 0, 0, 0], SceneParams(x=0.4, theta=0.3))
        with pytest.raises(EstimationError, match="zero"):
            mle_estimate(record, ideal.probabilities)

    def test_boundary_flag(self, ideal, caplog):
        """Test that counts only in the fundamental mode push the estimate to the lower edge."""
        record = CountRecord([100, 0, 0, 0], SceneParams(x=0.4, theta=0.3, n_photons=100.0))
        with caplog.at_level(logging.WARNING, logger="montecarlo"):
            result = mle_estimate(record, ideal.probabilities)
        assert result.at_boundary
        assert result.x_hat < 1e-6
        assert "boundary" in caplog.text

    def test_grid_search_interval(self, ideal):
        """Test that the search interval is validated."""
        with pytest.raises(DomainError):
            LikelihoodGrid(ideal.probabilities, SceneParams(x=0.4), search=(0.5, 0.1))


class TestCrbExperiment:
    """Test cases for crb_experiment."""

    def test_independent_of_threads(self, ideal):
        """Test that the per-trial estimates do not depend on the thread count."""
        scene = SceneParams(x=0.4, theta=0.3, n_photons=1e3)
        serial = crb_experiment(ideal.probabilities, scene, trials=12, seed=3)
        parallel = crb_experiment(ideal.probabilities, scene, trials=12, seed=3, threads=4)
        assert [t["x_hat"] for t in serial.per_trial] == [t["x_hat"] for t in parallel.per_trial]
        assert serial.ratio == parallel.ratio

    def test_report_fields(self, ideal, caplog):
        """Test the bound, standard errors and the small-sample warning."""
        scene = SceneParams(x=0.4, theta=0.3, n_photons=1e3)
        with caplog.at_level(logging.WARNING, logger="montecarlo"):
            report = crb_experiment(ideal.probabilities, scene, trials=10, seed=1)
        assert "at least 100" in caplog.text
        assert report.crb_std == pytest.approx(1 / (2 * math.sqrt(1e3 * report.w2F)))
        assert report.ratio == pytest.approx(report.std / report.crb_std)
        assert report.ratio_se == pytest.approx(report.ratio / math.sqrt(18))
        assert report.bias == pytest.approx(report.mean - 0.4)
        assert report.false_resolution_rate is None
        assert "per_trial" not in report.to_dict()
        assert len(report.to_dict(include_trials=True)["per_trial"]) == 10

    def test_too_few_trials(self, ideal):
        """Test that at least two trials are needed."""
        with pytest.raises(DomainError):
            crb_experiment(ideal.probabilities, SceneParams(x=0.4), trials=1, seed=1)

    def test_failing_trial_reported(self, ideal):
        """Test that an estimation failure names its trial."""
        scene = SceneParams(x=0.4, theta=0.3, n_photons=1e-9)
        with pytest.raises(EstimationError) as exc_info:
            crb_experiment(ideal.probabilities, scene, trials=3, seed=1)
        assert exc_info.value.trial == 0

    def test_false_resolution_ideal(self, ideal):
        """Test that unseparated sources are never resolved by the ideal sorter."""
        scene = SceneParams(x=0.4, theta=0.3, n_photons=1e3)
        dmin = dmin_ideal(1e3).dmin_over_2w
        report = crb_experiment(ideal.probabilities, scene, trials=10, seed=2, dmin_over_2w=dmin)
        assert report.false_resolution_rate == 0.0
        assert report.false_resolution_se == 0.0
        assert report.dmin_over_2w == dmin

    def test_ideal_saturates_bound(self):
        """Test std/CRB in [0.9, 1.1] for the ideal Q = 1 sorter at x = 0.1, N = 1e4, 1000 trials."""
        model = IdealDemux(q_measured=1)
        scene = SceneParams(x=0.1, n_photons=1e4)
        report = crb_experiment(model.probabilities, scene, trials=1000, seed=1, threads=4)
        assert 0.9 <= report.ratio <= 1.1
        assert report.boundary_hits == 0

    def test_estimator_consistency(self):
        """Test that the mean absolute error shrinks as N grows."""
        model = IdealDemux(q_measured=1)
        errors = []
        for n_photons in (1e3, 1e4, 1e5):
            report = crb_experiment(model.probabilities, SceneParams(x=0.1, n_photons=n_photons),
                                    trials=200, seed=4, threads=4)
            errors.append(np.mean([abs(t["x_hat"] - 0.1) for t in report.per_trial]))
        assert errors[0] > errors[1] > errors[2]

    def test_asymptotically_unbiased(self):
        """Test |bias| < 0.1 std at N = 1e6."""
        model = IdealDemux(q_measured=1)
        report = crb_experiment(model.probabilities, SceneParams(x=0.1, n_photons=1e6),
                                trials=1000, seed=1, threads=4)
        assert abs(report.bias) < 0.1 * report.std

    @pytest.mark.slow
    def test_uniform_crosstalk_saturates_bound(self):
        """Test std/CRB ≈ 1 behind a uniform crosstalk matrix."""
        model = CrosstalkDemux(uniform_crosstalk(9, math.sqrt(0.0017)), q_measured=1)
        scene = SceneParams(x=0.1, n_photons=1e5)
        report = crb_experiment(model.probabilities, scene, trials=400, seed=12, threads=4)
        assert report.ratio == pytest.approx(1.0, abs=0.15)
        assert report.x_true == 0.1
        assert X_FLOOR < report.mean
