import numpy as np
import pytest
import cloning
from cloning import (
    CloneParams,
    GisinMassarWeights,
    emulate_clone_state,
    gisin_massar_single_clone_marginal,
    gisin_massar_weights,
    optimal_fidelity,
    shrinking_factor,
)
from qstate import bloch_to_density, density_to_bloch, fidelity, random_pure_bloch
from utils import DomainError


class TestShrinkingFactor:
    def test_examples(self):
        assert shrinking_factor(1, 2) == pytest.approx(2 / 3, abs=1e-15)
        for n in range(1, 20):
            assert shrinking_factor(n, n) == 1.0
        assert abs(shrinking_factor(1, 10 ** 9) - 1 / 3) < 1e-8

    @pytest.mark.parametrize('n_in, m_out', [(2, 1), (0, 3), (-1, 2), (1.5, 3)])
    def test_invalid_counts(self, n_in, m_out):
        with pytest.raises(DomainError):
            shrinking_factor(n_in, m_out)
        with pytest.raises(DomainError):
            optimal_fidelity(n_in, m_out)


class TestOptimalFidelity:
    def test_examples(self):
        assert optimal_fidelity(1, 2) == pytest.approx(5 / 6, abs=1e-15)
        for n in range(1, 20):
            assert optimal_fidelity(n, n) == pytest.approx(1.0, abs=1e-15)
        assert abs(optimal_fidelity(1, 10 ** 9) - 2 / 3) < 1e-8

    def test_decreasing_in_m_and_bounded(self):
        values = np.array([optimal_fidelity(1, m) for m in range(1, 2001)])
        assert np.all(np.diff(values) < 0)
        assert np.all(values > 2 / 3)

    @pytest.mark.parametrize('n_in', [1, 2, 5, 17, 100])
    def test_fidelity_from_shrinking_factor(self, n_in):
        for m_out in range(n_in, 1001):
            assert abs((1 + shrinking_factor(n_in, m_out)) / 2 - optimal_fidelity(n_in, m_out)) < 1e-12


class TestCloneParams:
    def test_create(self):
        params = CloneParams.create(1, 2)
        assert params.eta == shrinking_factor(1, 2)
        assert CloneParams.create(3, 3).eta == 1.0
        assert CloneParams.create(1, 3).eta < 1.0

    def test_mismatched_eta_rejected(self):
        with pytest.raises(DomainError):
            CloneParams(n_in=1, m_out=2, eta=0.5)

    def test_invalid_counts_rejected(self):
        with pytest.raises(DomainError):
            CloneParams.create(3, 2)


class TestGisinMassarWeights:
    @pytest.mark.parametrize('m_out', [1, 2, 3, 10, 64, 1000])
    def test_normalized_and_decreasing(self, m_out):
        result = gisin_massar_weights(m_out)
        assert result.m_out == m_out
        assert len(result.weights) == m_out
        assert abs(np.sum(result.weights) - 1) < 1e-12
        assert np.all(result.weights > 0)
        assert np.all(np.diff(result.weights) < 0)

    def test_two_clones(self):
        np.testing.assert_allclose(gisin_massar_weights(2).weights, [2 / 3, 1 / 3], atol=1e-15)


class TestEmulation:
    def test_two_clones_of_zero(self):
        rho = emulate_clone_state((0, 0, 1), CloneParams.create(1, 2))
        np.testing.assert_allclose(rho, [[5 / 6, 0], [0, 1 / 6]], atol=1e-15)
        np.testing.assert_allclose(density_to_bloch(rho), (0, 0, 2 / 3), atol=1e-15)

    def test_identity_channel(self):
        rho = emulate_clone_state((0, 0, 1), CloneParams.create(4, 4))
        np.testing.assert_allclose(rho, [[1, 0], [0, 0]], atol=1e-15)

    def test_fidelity_is_optimal(self):
        rng = np.random.default_rng(11)
        for n_in in (1, 2, 3):
            for m_out in (n_in, n_in + 1, 10, 100, 10 ** 5):
                message = random_pure_bloch(rng)
                rho = emulate_clone_state(message, CloneParams.create(n_in, m_out))
                assert abs(fidelity(bloch_to_density(message), rho) - optimal_fidelity(n_in, m_out)) < 1e-12

    def test_output_is_valid_state(self):
        rng = np.random.default_rng(12)
        for m_out in (2, 3, 10, 10 ** 6):
            rho = emulate_clone_state(random_pure_bloch(rng), CloneParams.create(1, m_out))
            np.testing.assert_allclose(np.trace(rho), 1.0, atol=1e-12)
            assert np.linalg.eigvalsh(rho)[0] >= -1e-12

    @pytest.mark.parametrize('message', [(0, 0, 0.5), (1, 1, 0), (0, 0, 0)])
    def test_mixed_message_rejected(self, message):
        with pytest.raises(DomainError):
            emulate_clone_state(message, CloneParams.create(1, 2))


class TestSymmetricSubspaceOracle:
    def test_two_clones_of_zero(self):
        rho = gisin_massar_single_clone_marginal((0, 0, 1), 2)
        np.testing.assert_allclose(rho, [[5 / 6, 0], [0, 1 / 6]], atol=1e-12)

    @pytest.mark.parametrize('m_out', [2, 3, 7, 64, 1000, 10 ** 6])
    def test_marginal_parallel_to_message(self, m_out):
        rng = np.random.default_rng(m_out)
        message = random_pure_bloch(rng)
        marginal = density_to_bloch(gisin_massar_single_clone_marginal(message, m_out))
        assert np.linalg.norm(np.cross(marginal, message)) < 1e-12

    def test_matches_emulation(self):
        rng = np.random.default_rng(13)
        messages = [random_pure_bloch(rng) for _ in range(100)]
        for m_out in range(2, 65):
            params = CloneParams.create(1, m_out)
            for message in messages:
                oracle = gisin_massar_single_clone_marginal(message, m_out)
                emulated = emulate_clone_state(message, params)
                assert np.max(np.abs(oracle - emulated)) <= 1e-12

    @pytest.mark.parametrize('m_out', [2, 10, 1000])
    def test_populations_follow_weights(self, m_out):
        weights = gisin_massar_weights(m_out).weights
        j = np.arange(m_out)
        rho = gisin_massar_single_clone_marginal((0, 0, 1), m_out)
        assert abs(rho[0, 0].real - np.sum(weights * (m_out - j) / m_out)) < 1e-12
        assert abs(rho[1, 1].real - np.sum(weights * j / m_out)) < 1e-12

    def test_marginal_is_built_from_weights_record(self, monkeypatch):
        # all weight on the j = 0 term leaves the message untouched
        monkeypatch.setattr(cloning, 'gisin_massar_weights',
                            lambda m_out: GisinMassarWeights(m_out=m_out, weights=np.eye(m_out)[0]))
        rho = gisin_massar_single_clone_marginal((0, 0, 1), 5)
        np.testing.assert_allclose(rho, [[1, 0], [0, 0]], atol=1e-15)

    @pytest.mark.parametrize('m_out', [0, 1, 10 ** 6 + 1])
    def test_out_of_range_m_rejected(self, m_out):
        with pytest.raises(DomainError):
            gisin_massar_single_clone_marginal((0, 0, 1), m_out)

    def test_mixed_message_rejected(self):
        with pytest.raises(DomainError):
            gisin_massar_single_clone_marginal((0, 0, 0.9), 2)
