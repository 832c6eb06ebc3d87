import numpy as np
import pytest
from qstate import bloch_to_density, geodesic_distance
from tomography import (
    PauliCounts,
    estimate_bloch,
    noiseless_pauli_counts,
    project_physical,
    reconstruct_state,
    sample_pauli_counts,
)
from utils import derive_stream


def counts_of(n_plus, shots):
    n_plus = np.asarray(n_plus)
    return PauliCounts(shots_per_basis=shots, counts=np.stack([n_plus, shots - n_plus], axis=1))


class TestPauliCounts:
    def test_valid(self):
        counts = counts_of([3, 5, 7], 10)
        assert counts.total_shots == 30

    @pytest.mark.parametrize('counts, shots', [
        ([[5, 5], [5, 5]], 10),  # missing basis
        ([[5, 4], [5, 5], [5, 5]], 10),  # row does not sum to S
        ([[11, -1], [5, 5], [5, 5]], 10),  # negative count
    ])
    def test_invalid(self, counts, shots):
        with pytest.raises(AssertionError):
            PauliCounts(shots_per_basis=shots, counts=np.array(counts))


class TestSampling:
    @pytest.mark.parametrize('shots', [1, 10, 1000, 10 ** 6])
    def test_eigenstate_is_deterministic(self, shots):
        rho = bloch_to_density((0, 0, 1))
        for i in range(50):
            counts = sample_pauli_counts(rho, shots, derive_stream(0, 1, i))
            np.testing.assert_array_equal(counts.counts[2], [shots, 0])
            assert np.all(counts.counts.sum(axis=1) == shots)

    def test_same_stream_same_counts(self):
        rho = bloch_to_density((0.1, -0.2, 0.3))
        a = sample_pauli_counts(rho, 1000, derive_stream(42, 3, 7))
        b = sample_pauli_counts(rho, 1000, derive_stream(42, 3, 7))
        np.testing.assert_array_equal(a.counts, b.counts)
        c = sample_pauli_counts(rho, 1000, derive_stream(42, 3, 8))
        assert not np.array_equal(a.counts, c.counts)

    def test_maximally_mixed_is_fair(self):
        rho = bloch_to_density((0, 0, 0))
        n_plus = np.array([sample_pauli_counts(rho, 100, derive_stream(1, 1, i)).counts[:, 0] for i in range(2000)])
        # Binomial(100, 1/2): mean 50, standard error of the mean 5 / sqrt(2000)
        assert np.all(np.abs(n_plus.mean(axis=0) - 50) < 4 * 5 / np.sqrt(2000))

    def test_mean_z_at_large_shots(self):
        rho = bloch_to_density((0, 0, 1 / 3))
        z = np.array([estimate_bloch(sample_pauli_counts(rho, 10 ** 6, derive_stream(2, 1, i)))[2] for i in range(1000)])
        assert abs(z.mean() - 1 / 3) < 3e-3

    def test_raw_estimate_unbiased(self):
        truth = np.array([0.3, -0.5, 0.6])
        shots = 10 ** 4
        rho = bloch_to_density(truth)
        raw = np.array([estimate_bloch(sample_pauli_counts(rho, shots, derive_stream(3, 1, i))) for i in range(2000)])
        standard_error = np.sqrt((1 - truth ** 2) / shots) / np.sqrt(2000)
        assert np.all(np.abs(raw.mean(axis=0) - truth) < 4 * standard_error)

    def test_noiseless_counts(self):
        counts = noiseless_pauli_counts(bloch_to_density((0, 0, 0.5)), 100)
        np.testing.assert_array_equal(counts.counts, [[50, 50], [50, 50], [75, 25]])


class TestEstimation:
    def test_all_plus(self):
        np.testing.assert_allclose(estimate_bloch(counts_of([10, 10, 10], 10)), (1, 1, 1))

    def test_balanced(self):
        np.testing.assert_allclose(estimate_bloch(counts_of([50, 50, 50], 100)), (0, 0, 0))

    def test_z_bias(self):
        np.testing.assert_allclose(estimate_bloch(counts_of([2, 2, 3], 4)), (0, 0, 0.5))


class TestProjection:
    def test_interior_unchanged(self):
        result = project_physical((0.2, 0, 0))
        assert not result.was_projected
        np.testing.assert_array_equal(result.projected, result.raw)

    def test_outside_projected(self):
        result = project_physical((1, 1, 1))
        assert result.was_projected
        np.testing.assert_allclose(result.projected, np.ones(3) / np.sqrt(3), atol=1e-15)

    def test_boundary_unchanged(self):
        result = project_physical((0, 0, 1))
        assert not result.was_projected

    def test_idempotent_and_never_grows(self):
        rng = np.random.default_rng(14)
        for raw in rng.uniform(-1.5, 1.5, (500, 3)):
            first = project_physical(raw)
            second = project_physical(first.projected)
            np.testing.assert_allclose(second.projected, first.projected, atol=1e-15)
            assert np.linalg.norm(first.projected) <= min(np.linalg.norm(raw), 1 + 1e-12)

    def test_reconstruct_composes(self):
        result = reconstruct_state(counts_of([10, 10, 10], 10))
        assert result.was_projected
        np.testing.assert_allclose(result.raw, (1, 1, 1))
        np.testing.assert_allclose(result.projected, np.ones(3) / np.sqrt(3), atol=1e-15)


def test_error_scaling_in_clone_regime():
    truth = np.ones(3) / np.sqrt(3) / 3
    rho = bloch_to_density(truth)
    shots_grid = [10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5]
    means = []
    for shots in shots_grid:
        errors = [geodesic_distance(truth, reconstruct_state(sample_pauli_counts(rho, shots, derive_stream(4, 1, i))).projected)
                  for i in range(300)]
        means.append(np.mean(errors))
    slope = np.polyfit(np.log(shots_grid), np.log(means), 1)[0]
    assert -0.6 <= slope <= -0.4
