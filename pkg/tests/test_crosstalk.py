"""
Tests for the crosstalk module.

This module contains unit tests for the Gell-Mann basis, random and uniform
crosstalk matrices, their statistics, calibration and file persistence.
"""

import logging
import math
from unittest.mock import patch

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ..core.constants import UNITARITY_TOL
from ..core.exceptions import CalibrationError, DomainError, ParsingError
from ..core.rng import make_stream
from ..physics import crosstalk as crosstalk_module
from ..physics.crosstalk import (
    CrosstalkMatrix,
    Provenance,
    calibrate_mu,
    crosstalk_stats,
    ensemble_stats,
    gell_mann_basis,
    identity_crosstalk,
    load_matrix,
    mu_scan,
    nearest_unitary,
    sample_ensemble,
    sample_random_crosstalk,
    scattering_probability,
    store_matrix,
    uniform_crosstalk,
)


class TestGellMannBasis:
    """Test cases for gell_mann_basis."""

    @pytest.mark.parametrize("dim", [2, 3, 9])
    def test_generators(self, dim):
        """Test that the basis holds D² - 1 traceless Hermitian matrices."""
        basis = gell_mann_basis(dim)
        assert basis.shape == (dim * dim - 1, dim, dim)
        for g in basis:
            np.testing.assert_allclose(g, g.conj().T, atol=0)
            assert abs(np.trace(g)) < 1e-14

    def test_orthogonality(self):
        """Test Tr(G_a G_b) = 2 δ_ab."""
        basis = gell_mann_basis(4)
        gram = np.einsum("aij,bji->ab", basis, basis)
        np.testing.assert_allclose(gram, 2 * np.eye(15), atol=1e-14)

    def test_dimension_one_rejected(self):
        """Test that su(1) is rejected."""
        with pytest.raises(DomainError):
            gell_mann_basis(1)


class TestCrosstalkMatrix:
    """Test cases for the CrosstalkMatrix type."""

    def test_copy_is_read_only(self):
        """Test that the matrix copies and freezes its entries."""
        source = np.eye(4, dtype=complex)
        matrix = CrosstalkMatrix(source, Provenance("identity"))
        source[0, 0] = 5.0
        assert matrix.entries[0, 0] == 1.0
        with pytest.raises(ValueError):
            matrix.entries[0, 0] = 2.0

    def test_square_required(self):
        """Test that non-square entries are rejected."""
        with pytest.raises(DomainError, match="square"):
            CrosstalkMatrix(np.zeros((2, 3)), Provenance("loaded"))

    def test_identity(self):
        """Test the identity matrix and its statistics."""
        matrix = identity_crosstalk(9)
        stats = crosstalk_stats(matrix)
        assert matrix.unitarity_deviation() == 0.0
        assert (stats.avg_diag, stats.avg_offdiag) == (1.0, 0.0)
        assert matrix.provenance.describe() == {"kind": "identity"}


class TestRandomCrosstalk:
    """Test cases for random crosstalk sampling."""

    @pytest.mark.parametrize("mu", [0.05, 0.26, 2.0])
    def test_unitary(self, mu):
        """Test that sampled matrices are unitary to 1e-12."""
        matrix = sample_random_crosstalk(9, mu, make_stream(3, 1, 0))
        assert matrix.unitarity_deviation() < UNITARITY_TOL

    def test_zero_coupling_is_identity(self):
        """Test that mu = 0 gives exactly the identity."""
        matrix = sample_random_crosstalk(9, 0.0, make_stream(3, 1, 0))
        np.testing.assert_array_equal(matrix.entries, np.eye(9))

    def test_negative_coupling_rejected(self):
        """Test that mu < 0 is rejected."""
        with pytest.raises(DomainError):
            sample_random_crosstalk(4, -0.1, make_stream(3, 1, 0))

    def test_ensemble_deterministic(self):
        """Test that the same seed reproduces the ensemble."""
        first = sample_ensemble(9, 0.3, 6, seed=11)
        second = sample_ensemble(9, 0.3, 6, seed=11)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.entries, b.entries)

    def test_ensemble_independent_of_threads(self):
        """Test that parallel sampling returns the same matrices in the same order."""
        serial = sample_ensemble(9, 0.3, 8, seed=5, threads=1)
        parallel = sample_ensemble(9, 0.3, 8, seed=5, threads=4)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.entries, b.entries)
        assert [c.provenance.details["sample_index"] for c in parallel] == list(range(8))

    def test_seeds_differ(self):
        """Test that different seeds give different matrices."""
        a = sample_ensemble(9, 0.3, 1, seed=1)[0]
        b = sample_ensemble(9, 0.3, 1, seed=2)[0]
        assert not np.allclose(a.entries, b.entries)

    def test_closure(self):
        """Test avg_diag + (D - 1) avg_offdiag = 1 for unitary samples."""
        for matrix in sample_ensemble(9, 0.8, 10, seed=4):
            assert crosstalk_stats(matrix).closure == pytest.approx(1.0, abs=1e-12)

    @given(
        dim=st.sampled_from([2, 4, 9]),
        mu=st.floats(min_value=0.0, max_value=math.pi),
        index=st.integers(min_value=0, max_value=10_000),
    )
    def test_unitary_and_closed_everywhere(self, dim, mu, index):
        """Test unitarity and closure over the whole coupling range."""
        matrix = sample_random_crosstalk(dim, mu, make_stream(17, 1, index))
        assert matrix.unitarity_deviation() < UNITARITY_TOL
        assert crosstalk_stats(matrix).closure == pytest.approx(1.0, abs=1e-12)

    def test_weak_coupling_level(self):
        """Test <|c_ij|²> ≈ 2 mu² / (D² - 1) for small mu."""
        mu, dim = 0.01, 9
        stats = ensemble_stats(sample_ensemble(dim, mu, 200, seed=8))
        assert stats["mean_avg_offdiag"] == pytest.approx(2 * mu ** 2 / (dim ** 2 - 1), rel=0.03)

    def test_mu_scan(self):
        """Test the ensemble-mean crosstalk table over mu."""
        rows = mu_scan(9, [0.0, 0.1, 0.3], samples=50, seed=2)
        assert rows[0]["mean_avg_offdiag"] == 0.0
        assert rows[0]["mean_avg_diag"] == 1.0
        assert rows[1]["mean_avg_offdiag"] < rows[2]["mean_avg_offdiag"]
        for row in rows:
            assert row["mean_avg_diag"] + 8 * row["mean_avg_offdiag"] == pytest.approx(1.0)


class TestCalibration:
    """Test cases for calibrate_mu."""

    def test_reaches_target(self):
        """Test that the calibrated mu reproduces the target level."""
        mu = calibrate_mu(9, 0.0017, samples=100, seed=1)
        assert 0.22 < mu < 0.30
        achieved = mu_scan(9, [mu], samples=100, seed=1)[0]["mean_avg_offdiag"]
        assert achieved == pytest.approx(0.0017, rel=1e-5)

    def test_zero_target(self):
        """Test that a zero target needs no coupling."""
        assert calibrate_mu(9, 0.0, samples=10, seed=1) == 0.0

    def test_unconverged_bisection(self):
        """Test that a calibration ending away from the target raises CalibrationError."""
        def step(self, mu):
            return 0.0 if mu < 1.0 else 0.05

        with patch.object(crosstalk_module._CalibrationEnsemble, "mean_offdiag", step):
            with pytest.raises(CalibrationError, match="not within 2%"):
                calibrate_mu(9, 0.0017, samples=4, seed=1)

    def test_target_outside_domain(self):
        """Test that targets at or above 1/(D-1) are rejected."""
        with pytest.raises(DomainError):
            calibrate_mu(9, 0.125, samples=10, seed=1)

    def test_unreachable_target(self):
        """Test that a target beyond the mu <= π range fails."""
        with pytest.raises(CalibrationError, match="unreachable"):
            calibrate_mu(9, 0.124, samples=50, seed=1)

    @pytest.mark.slow
    def test_ratio_between_levels(self):
        """Test the coupling ratio between a tenfold crosstalk step."""
        weak = calibrate_mu(9, 0.0017, samples=200, seed=3)
        strong = calibrate_mu(9, 0.017, samples=200, seed=3)
        assert 2.5 < strong / weak < 3.6

    @pytest.mark.slow
    def test_ensemble_spread(self):
        """Test that avg_offdiag clusters within 30% relative spread at the calibrated mu."""
        mu = calibrate_mu(9, 0.0017, samples=500, seed=6)
        stats = ensemble_stats(sample_ensemble(9, mu, 500, seed=6))
        assert stats["mean_avg_offdiag"] == pytest.approx(0.0017, rel=0.05)
        assert stats["std_avg_offdiag"] / stats["mean_avg_offdiag"] < 0.3


class TestUniformCrosstalk:
    """Test cases for uniform_crosstalk."""

    @pytest.fixture
    def r(self):
        """Return |r| for |r|² = 0.0017."""
        return math.sqrt(0.0017)

    def test_entries(self, r):
        """Test t on the diagonal and r elsewhere."""
        matrix = uniform_crosstalk(9, r)
        t = math.sqrt(1 - 8 * 0.0017)
        np.testing.assert_allclose(np.diag(matrix.entries), t)
        assert matrix.entries[0, 5] == pytest.approx(r)

    def test_statistics(self, r):
        """Test that the averages equal |t|² and |r|²."""
        stats = crosstalk_stats(uniform_crosstalk(9, r))
        assert stats.avg_offdiag == pytest.approx(0.0017, rel=1e-12)
        assert stats.avg_diag == pytest.approx(1 - 8 * 0.0017, rel=1e-12)
        assert stats.closure == pytest.approx(1.0)

    def test_phase_conventions(self, r):
        """Test the imaginary and alternating phase conventions."""
        imaginary = uniform_crosstalk(9, r, "imaginary")
        alternating = uniform_crosstalk(9, r, "alternating")
        assert imaginary.entries[0, 1] == pytest.approx(1j * r)
        assert alternating.entries[0, 1] == pytest.approx(-r)
        assert alternating.entries[0, 2] == pytest.approx(r)

    def test_unknown_convention(self, r):
        """Test that an unknown convention is rejected."""
        with pytest.raises(DomainError):
            uniform_crosstalk(9, r, "random")

    def test_too_strong(self):
        """Test that (D-1)|r|² >= 1 is rejected."""
        with pytest.raises(DomainError):
            uniform_crosstalk(9, math.sqrt(1 / 8))

    def test_scattering_probability(self, r):
        """Test P_scat = (D-1)|r|²."""
        assert scattering_probability(9, r) == pytest.approx(8 * 0.0017)

    def test_not_exactly_unitary(self, r):
        """Test that the uniform matrix is used verbatim, with small unitarity defect."""
        deviation = uniform_crosstalk(9, r).unitarity_deviation()
        t = math.sqrt(1 - 8 * 0.0017)
        assert 0 < deviation <= 2 * t * r + 7 * r ** 2 + 1e-15

    def test_nearest_unitary(self, r):
        """Test the polar-decomposition unitary factor."""
        unitary = nearest_unitary(uniform_crosstalk(9, r))
        assert unitary.unitarity_deviation() < UNITARITY_TOL
        assert unitary.provenance.details["unitarized"] is True
        assert unitary.provenance.kind == "uniform"


class TestPersistence:
    """Test cases for store_matrix and load_matrix."""

    @pytest.fixture
    def matrix(self):
        """Create a random D = 4 crosstalk matrix."""
        return sample_random_crosstalk(4, 0.4, make_stream(9, 1, 0))

    @pytest.mark.parametrize("name", ["matrix.txt", "matrix.csv"])
    def test_round_trip(self, tmp_path, matrix, name):
        """Test that stored matrices load back exactly."""
        path = tmp_path / name
        store_matrix(matrix, path)
        loaded = load_matrix(path)
        np.testing.assert_array_equal(loaded.entries, matrix.entries)
        assert loaded.provenance.kind == "loaded"
        assert loaded.provenance.details["non_unitary"] is False

    def test_text_format(self, tmp_path):
        """Test the header and row layout of the text format."""
        path = tmp_path / "identity.txt"
        store_matrix(identity_crosstalk(4), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "D 4"
        assert lines[1] == "0 0 1 0"
        assert len(lines) == 17

    def test_dimension_mismatch(self, tmp_path):
        """Test that the header must match the number of rows."""
        path = tmp_path / "bad.txt"
        path.write_text("D 3\n" + "".join(f"{i // 2} {i % 2} 0 0\n" for i in range(8)))
        with pytest.raises(ParsingError, match="dimension mismatch"):
            load_matrix(path)

    def test_non_numeric(self, tmp_path):
        """Test that non-numeric entries are rejected."""
        path = tmp_path / "bad.txt"
        path.write_text("D 1\n0 0 one 0\n")
        with pytest.raises(ParsingError, match="not numeric"):
            load_matrix(path)

    def test_field_count(self, tmp_path):
        """Test that every row needs four fields."""
        path = tmp_path / "bad.txt"
        path.write_text("D 1\n0 0 1\n")
        with pytest.raises(ParsingError, match="fields"):
            load_matrix(path)

    def test_row_major_order(self, tmp_path):
        """Test that rows must be in row-major order."""
        path = tmp_path / "bad.txt"
        path.write_text("D 2\n0 0 1 0\n1 0 0 0\n0 1 0 0\n1 1 1 0\n")
        with pytest.raises(ParsingError, match="row-major"):
            load_matrix(path)

    def test_bad_header(self, tmp_path):
        """Test that an unknown header is rejected."""
        path = tmp_path / "bad.txt"
        path.write_text("size 2\n")
        with pytest.raises(ParsingError, match="header"):
            load_matrix(path)

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises ParsingError."""
        with pytest.raises(ParsingError):
            load_matrix(tmp_path / "missing.txt")

    def test_non_unitary_flagged(self, tmp_path, caplog):
        """Test that lossy matrices load with a warning and a provenance flag."""
        path = tmp_path / "lossy.txt"
        store_matrix(CrosstalkMatrix(0.9 * np.eye(2), Provenance("loaded")), path)
        with caplog.at_level(logging.WARNING, logger="crosstalk"):
            loaded = load_matrix(path)
        assert loaded.provenance.details["non_unitary"] is True
        assert loaded.provenance.details["unitarity_deviation"] == pytest.approx(0.19)
        assert "not unitary" in caplog.text
