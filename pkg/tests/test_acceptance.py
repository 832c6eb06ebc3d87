"""Desk-scale reproduction of the headline results (200 instances per grid point)."""

import numpy as np
import pytest
from cloning import (
    CloneParams,
    emulate_clone_state,
    gisin_massar_single_clone_marginal,
    optimal_fidelity,
    shrinking_factor,
)
from experiments import compute_breakeven, converge_in_m, default_error_grid, error_distribution, sweep
from main import main
from qstate import random_pure_bloch
from utils import log_spaced_ints

SEED = 20240521
INSTANCES = 200


def test_fidelity_identity_exhaustive():
    for n_in in range(1, 1001):
        for m_out in range(n_in, 1001):
            assert abs((1 + shrinking_factor(n_in, m_out)) / 2 - optimal_fidelity(n_in, m_out)) < 1e-12
    assert abs(optimal_fidelity(1, 10 ** 9) - 2 / 3) < 1e-8


def test_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    messages = [random_pure_bloch(rng) for _ in range(100)]
    worst = 0.0
    for m_out in range(2, 65):
        params = CloneParams.create(1, m_out)
        for message in messages:
            deviation = np.max(np.abs(gisin_massar_single_clone_marginal(message, m_out) - emulate_clone_state(message, params)))
            worst = max(worst, deviation)
    assert worst <= 1e-12


def test_direct_error_scaling():
    shots_grid = [10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5]
    records = sweep('direct', [1], shots_grid, INSTANCES, SEED)
    slope = np.polyfit(np.log(shots_grid), np.log([r.mean_geodesic for r in records]), 1)[0]
    assert -0.6 <= slope <= -0.4


def test_clone_curves_converge_and_direct_is_below():
    shots_grid = log_spaced_ints(1, 6, 1)
    direct = sweep('direct', [1], shots_grid, INSTANCES, SEED)
    clone = sweep('clone', [100, 10 ** 5], shots_grid, INSTANCES, SEED)
    at_max = {r.m_out: r.mean_geodesic for r in clone if r.shots_per_basis == 10 ** 6}
    assert abs(at_max[100] - at_max[10 ** 5]) / at_max[10 ** 5] < 0.05
    for c in clone:
        d = next(r for r in direct if r.shots_per_basis == c.shots_per_basis)
        assert d.mean_geodesic < c.mean_geodesic


def test_error_plateaus_in_m():
    records = converge_in_m([2, 10, 100, 10 ** 4, 10 ** 6], 10 ** 6, INSTANCES, SEED)
    means = [r.mean_geodesic for r in records]
    assert abs(means[-1] - means[-2]) / means[-2] < 0.02
    assert means[0] < means[-1]


def test_breakeven():
    shots_grid = log_spaced_ints(1, 6, 4)
    m_values = [2, 3, 10, 100, 1000, 10 ** 5]
    direct = sweep('direct', [1], shots_grid, INSTANCES, SEED, stream_name='breakeven')
    clone = sweep('clone', m_values, shots_grid, INSTANCES, SEED, stream_name='breakeven')
    error_grid = {metric: default_error_grid(direct, clone, 8, metric) for metric in ('geodesic', 'infidelity')}
    records = compute_breakeven(direct, clone, error_grid)
    for r in records:
        if r.reachable:
            assert 2 <= r.breakeven_m <= 40
        if r.reachable and not r.below_grid:
            assert r.shots_clone_at_eps == pytest.approx(r.breakeven_m * r.shots_direct_at_eps, rel=0.01)
    for metric in ('geodesic', 'infidelity'):
        reachable = [r for r in records if r.metric == metric and r.reachable]
        smallest = next(r for r in records if r.metric == metric)
        # in the large-S regime the cost ratio is 3 / (2 eta^2) - 1/2, which meets M near 8
        assert smallest.reachable
        assert 5 <= smallest.breakeven_m <= 12
        # M* grows as the target error shrinks; flat to within noise once S is large
        assert smallest.breakeven_m > reachable[-1].breakeven_m
        for finer, coarser in zip(reachable, reachable[1:]):
            assert finer.breakeven_m >= coarser.breakeven_m * 0.98


def test_error_distribution():
    shots_grid = [10, 100, 1000, 10000]
    samples = error_distribution(10, shots_grid, 10 * 100, SEED)
    assert all(d.sample.geodesic <= np.pi and d.sample.infidelity <= 1.0 for d in samples)
    p95 = [np.quantile([d.sample.geodesic for d in samples if d.shots_per_basis == s], 0.95) for s in shots_grid]
    assert np.all(np.diff(p95) < 0)


def test_outputs_independent_of_workers(tmp_path):
    argv = ['--quiet', '--experiment', 'sweep-clone', '--seed', str(SEED), '--m', '2,100', '--shots', '10,1000,100000', '--instances', '50']
    assert main(argv + ['--workers', '1', '--out', str(tmp_path / 'serial.csv')]) == 0
    assert main(argv + ['--workers', '3', '--out', str(tmp_path / 'parallel.csv')]) == 0
    assert (tmp_path / 'serial.csv').read_bytes() == (tmp_path / 'parallel.csv').read_bytes()
