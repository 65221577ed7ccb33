import numpy as np
import pytest

from collections import Counter

from estimators import oracle_level, select_level_for
from experiment_data import get_flagship_config, get_rate_config, with_overrides
from harness import (ExperimentConfig, ExperimentResult, MethodSpec, config_hash, fit_rate,
                     is_reproducible, replication_seed, rmse, run_monte_carlo)
from operators import KernelSpec, build_operator
from simulate import SignalSpec, observe, power_law_coefficients, synthesize_signal
from wavelet import CoeffVector, MultiIndex, get_filter


def _diagonal_config(methods, delta_grid=(1e-3,), epsilon_grid=(1e-3,), replications=3,
                     max_level=5, **kwargs):
    return ExperimentConfig(
        kernel=KernelSpec(kind='diagonal', t=1.0),
        signal=SignalSpec(kind='power_law', smoothness=1.5),
        max_level=max_level,
        delta_grid=delta_grid,
        epsilon_grid=epsilon_grid,
        methods=methods,
        replications=replications,
        **kwargs,
    )


def _without_timing(result):
    return [{k: v for k, v in cell.items() if k != 'wall_ms'} for cell in result.cells]


@pytest.fixture(scope='module')
def rate_result():
    return run_monte_carlo(get_rate_config())


@pytest.fixture(scope='module')
def flagship_result():
    return run_monte_carlo(get_flagship_config())


def test_rmse_examples(db8):
    zeros = CoeffVector.zeros(10)
    assert rmse(zeros, zeros) == 0.0
    tent = synthesize_signal(SignalSpec(kind='tent'), 10, db8)
    assert rmse(zeros, tent) == pytest.approx(0.1491, abs=1e-3)
    first, second = CoeffVector.unit(MultiIndex(2, 1), 4), CoeffVector.unit(MultiIndex(3, 0), 4)
    assert rmse(first, second) == pytest.approx(np.sqrt(2.0))
    with pytest.raises(ValueError):
        rmse(zeros, CoeffVector.zeros(9))


def test_replication_seeds_are_distinct():
    seeds = {replication_seed(0, cell, rep) for cell in range(5) for rep in range(20)}
    assert len(seeds) == 100
    assert replication_seed(3, 1, 2) == replication_seed(3, 1, 2)


def test_method_spec_validation():
    with pytest.raises(ValueError):
        MethodSpec(name='a', method='tikhonov', level=3)
    with pytest.raises(ValueError):
        MethodSpec(name='a', method='linear')
    with pytest.raises(ValueError):
        MethodSpec(name='a', method='linear', level_choice='oracle')
    with pytest.raises(ValueError):
        MethodSpec(name='a', method='linear', level_choice='oracle', oracle_levels=(5, 2))


def test_config_validation():
    linear = MethodSpec(name='linear', method='linear', level=2)
    with pytest.raises(ValueError):
        _diagonal_config([linear], delta_grid=(1.5,))
    with pytest.raises(ValueError):
        _diagonal_config([linear, linear])
    with pytest.raises(ValueError):
        _diagonal_config([])
    with pytest.raises(ValueError):
        _diagonal_config([linear], replications=0)
    tied = _diagonal_config([linear], delta_grid=(0.1, 0.01), epsilon_grid=(), tie_epsilon=True)
    assert tied.cells() == [(0.1, 0.1), (0.01, 0.01)]


def test_noiseless_projection_bias():
    config = _diagonal_config([MethodSpec(name='linear', method='linear', level=3)],
                              delta_grid=(0.0,), epsilon_grid=(0.0,), replications=1)
    cell = run_monte_carlo(config).cells[0]
    expected = np.linalg.norm(power_law_coefficients(1.5, 5)[16:])
    assert cell['rmse_mean'] == pytest.approx(expected, rel=1e-10)
    assert cell['rmse_std'] == 0.0
    assert cell['chosen_j_histogram'] == {3: 1}
    assert cell['failure_count'] == 0


def test_monte_carlo_is_deterministic():
    methods = [MethodSpec(name='linear', method='linear', level=3),
               MethodSpec(name='nl2', method='nl2', level_choice='rule')]
    config = _diagonal_config(methods, base_seed=11)
    first, second = run_monte_carlo(config), run_monte_carlo(config)
    assert _without_timing(first) == _without_timing(second)
    assert first.provenance == second.provenance
    assert first.provenance['config_hash'] == config_hash(config)

    reseeded = run_monte_carlo(with_overrides(config, base_seed=12))
    assert _without_timing(reseeded) != _without_timing(first)


def test_methods_share_replication_seeds():
    methods = [MethodSpec(name='linear', method='linear', level=3),
               MethodSpec(name='nl1', method='nl1', level=4, j0=1)]
    result = run_monte_carlo(_diagonal_config(methods, delta_grid=(1e-3, 1e-2)))
    assert len(result.cells) == 4
    by_cell = {}
    for cell in result.cells:
        by_cell.setdefault(cell['delta'], []).append(tuple(cell['seeds']))
    for seeds in by_cell.values():
        assert len(set(seeds)) == 1
    assert by_cell[1e-3][0] != by_cell[1e-2][0]


def test_failures_are_counted_not_raised():
    method = MethodSpec(name='nl2_rule', method='nl2', level_choice='rule')
    config = _diagonal_config([method], delta_grid=(0.0,), epsilon_grid=(1e-3,))
    cell = run_monte_carlo(config).cells[0]
    assert cell['failure_count'] == 3
    assert cell['rmse_mean'] is None
    assert cell['rmse_per_replication'] == [None, None, None]
    assert cell['chosen_j_mode'] is None


def test_oracle_picks_best_level():
    method = MethodSpec(name='oracle', method='linear', level_choice='oracle',
                        oracle_levels=(0, 4))
    cell = run_monte_carlo(_diagonal_config([method], delta_grid=(1e-2,),
                                            epsilon_grid=(1e-2,))).cells[0]
    assert sorted(cell['level_errors']) == [0, 1, 2, 3, 4]
    best = min(cell['level_errors'], key=cell['level_errors'].get)
    assert cell['rmse_mean'] == pytest.approx(cell['level_errors'][best])
    assert cell['chosen_j_histogram'] == {best: 3}


def test_cutoff_rate_is_reported():
    method = MethodSpec(name='cut', method='linear', level=4, tau=1e-6)
    cell = run_monte_carlo(_diagonal_config([method])).cells[0]
    assert cell['cutoff_rate'] == 1.0
    truth_norm = np.linalg.norm(power_law_coefficients(1.5, 5))
    assert cell['rmse_mean'] == pytest.approx(truth_norm)


def test_small_log_potential_sweep():
    methods = [
        MethodSpec(name='linear', method='linear', level=4),
        MethodSpec(name='nl1', method='nl1', level_choice='rule', j0=2,
                   threshold_mode='empirical_decay'),
        MethodSpec(name='nl2', method='nl2', level_choice='rule'),
        MethodSpec(name='linear_oracle', method='linear', level_choice='oracle',
                   oracle_levels=(2, 5)),
    ]
    config = ExperimentConfig(kernel=KernelSpec(kind='log_potential'),
                              signal=SignalSpec(kind='tent'), max_level=6,
                              delta_grid=(1e-3,), epsilon_grid=(1e-5,), methods=methods,
                              replications=2, base_seed=5)
    result = run_monte_carlo(config)
    assert result.methods() == ['linear', 'nl1', 'nl2', 'linear_oracle']
    for cell in result.cells:
        assert cell['failure_count'] == 0
        assert np.isfinite(cell['rmse_mean'])
        assert len(cell['rmse_per_replication']) == 2


def test_result_dict_round_trip():
    config = _diagonal_config([MethodSpec(name='oracle', method='linear',
                                          level_choice='oracle', oracle_levels=(1, 3))])
    result = run_monte_carlo(config)
    assert ExperimentResult.from_dict(result.to_dict()).to_dict() == result.to_dict()


def _synthetic_result(noise, errors, method='m'):
    return ExperimentResult(cells=[{'delta': x, 'epsilon': x, 'method': method,
                                    'rmse_mean': e} for x, e in zip(noise, errors)])


def test_fit_rate_recovers_synthetic_slope():
    noise = 2.0 ** -np.arange(4, 10)
    fit = fit_rate(_synthetic_result(noise, 3.0 * noise ** 0.4), 'm', s=1.0, t=1.0)
    assert fit.slope == pytest.approx(0.4)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.theoretical_exponent == pytest.approx(0.4)
    assert fit.n_points == 6
    assert not fit.is_degenerate


def test_fit_rate_needs_enough_points():
    noise = [1e-2, 1e-3, 1e-4]
    with pytest.raises(ValueError):
        fit_rate(_synthetic_result(noise, noise), 'm', s=1.0, t=1.0)
    with pytest.raises(ValueError):
        fit_rate(_synthetic_result(noise + [1e-5], [0.1, None, 0.01, 0.001]), 'm', s=1.0, t=1.0)


def test_fit_rate_flags_flat_errors():
    noise = 2.0 ** -np.arange(4, 10)
    fit = fit_rate(_synthetic_result(noise, np.tile([0.05, 0.06], 3)), 'm', s=1.0, t=1.0)
    assert fit.is_degenerate


def test_linear_oracle_attains_theoretical_rate(rate_result):
    fit = fit_rate(rate_result, 'linear_oracle', s=1.5, t=1.0)
    assert fit.theoretical_exponent == pytest.approx(0.5)
    assert abs(fit.slope - 0.5) <= 0.15


def test_errors_shrink_with_noise(rate_result):
    for method in ('linear_oracle', 'linear_rate'):
        errors = [cell['rmse_mean'] for cell in rate_result.cells_for(method)]
        assert len(errors) == 7
        inversions = sum(b > a for a, b in zip(errors, errors[1:]))
        assert inversions <= 1
        assert errors[-1] < errors[0]


def test_rate_levels_follow_the_oracle(rate_result):
    deltas = [2.0 ** -k for k in range(6, 13)]
    expected = [1, 1, 2, 2, 2, 3, 3]
    assert [oracle_level(d, d, 1.5, 1.0, constant=0.5) for d in deltas] == expected
    rate_modes = [cell['chosen_j_mode'] for cell in rate_result.cells_for('linear_rate')]
    oracle_modes = [cell['chosen_j_mode'] for cell in rate_result.cells_for('linear_oracle')]
    assert rate_modes == expected
    assert oracle_modes == expected


def test_level_constant_must_be_positive():
    with pytest.raises(ValueError):
        _diagonal_config([MethodSpec(name='a', method='linear', level=2)], level_constant=0.0)


def test_custom_signal_provenance():
    base = _diagonal_config([MethodSpec(name='linear', method='linear', level=2)],
                            wavelet='haar', max_level=3, replications=1)
    sine = with_overrides(base, signal=SignalSpec(kind='custom', samples=np.sin))
    cosine = with_overrides(base, signal=SignalSpec(kind='custom', samples=np.cos))
    assert not is_reproducible(sine)
    assert config_hash(sine) == config_hash(cosine)
    assert run_monte_carlo(sine).provenance['reproducible'] is False

    ones = with_overrides(base, signal=SignalSpec(kind='custom', samples=np.ones(16)))
    zeros = with_overrides(base, signal=SignalSpec(kind='custom', samples=np.zeros(16)))
    assert is_reproducible(ones)
    assert config_hash(ones) != config_hash(zeros)

    assert is_reproducible(base)
    assert run_monte_carlo(base).provenance['reproducible'] is True
    custom_kernel = KernelSpec(kind='custom', kernel=lambda x, y: np.exp(-abs(x - y)))
    assert not is_reproducible(with_overrides(base, kernel=custom_kernel))


@pytest.mark.slow
def test_flagship_linear_and_oracle_sweep(flagship_result):
    cells = {cell['method']: cell for cell in flagship_result.cells}
    assert cells['linear']['rmse_mean'] == pytest.approx(0.049, abs=0.015)
    assert cells['linear']['failure_count'] == 0

    sweep = cells['linear_oracle']['level_errors']
    assert sorted(sweep) == [3, 4, 5, 6, 7]
    assert all(np.isfinite(error) for error in sweep.values())
    assert min(sweep, key=sweep.get) == 4
    assert sweep[7] > sweep[6] > sweep[4]


@pytest.mark.slow
def test_flagship_nonlinear_estimators(flagship_result):
    cells = {cell['method']: cell for cell in flagship_result.cells}
    for name in ('nl1', 'nl2'):
        assert cells[name]['failure_count'] == 0
        assert cells[name]['chosen_j_histogram'] == {2: 20}
        assert cells[name]['rmse_mean'] == pytest.approx(0.117, abs=0.02)


@pytest.mark.slow
def test_flagship_level_rule():
    config = get_flagship_config(replications=10)
    wavelet_filter = get_filter(config.wavelet, config.wavelet_order)
    operator = build_operator(config.kernel, config.max_level, wavelet_filter)
    truth = synthesize_signal(config.signal, config.max_level, wavelet_filter)

    chosen = {}
    for rep in range(config.replications):
        observation = observe(truth, operator, 1e-3, 1e-5,
                              replication_seed(config.base_seed, 0, rep))
        for c in (1.0, 5.0, 20.0):
            for sqrt_dim in (False, True):
                level = select_level_for(observation, c=c, sqrt_dim=sqrt_dim)
                chosen.setdefault((c, sqrt_dim), []).append(level)

    assert set(chosen[(5.0, False)]) == {2}
    assert Counter(chosen[(1.0, False)]).most_common(1)[0][0] == 3
    assert Counter(chosen[(20.0, False)]).most_common(1)[0][0] == 1
    for c in (1.0, 5.0, 20.0):
        assert all(2 <= level <= 5 for level in chosen[(c, True)])


@pytest.mark.slow
def test_operator_noise_costs_less_than_data_noise():
    config = with_overrides(
        get_flagship_config(replications=10),
        methods=(MethodSpec(name='nl2', method='nl2', level_choice='rule', kappa_op=1.5,
                            kappa_data=1.5),),
        delta_grid=(1e-3, 1e-5),
        epsilon_grid=(1e-5, 1e-3),
    )
    errors = {(cell['delta'], cell['epsilon']): cell['rmse_mean']
              for cell in run_monte_carlo(config).cells}
    assert errors[(1e-3, 1e-5)] <= 1.5 * errors[(1e-5, 1e-3)]
