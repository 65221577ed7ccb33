import json

import pandas as pd
import pytest

from experiment_data import save_config
from harness import ExperimentConfig, MethodSpec
from main import main
from operators import KernelSpec
from simulate import SignalSpec


def _small_config(**kwargs):
    options = dict(
        kernel=KernelSpec(kind='diagonal', t=1.0),
        signal=SignalSpec(kind='power_law', smoothness=1.5),
        max_level=5,
        delta_grid=(1e-3,),
        epsilon_grid=(1e-3,),
        methods=[MethodSpec(name='linear', method='linear', level=3),
                 MethodSpec(name='nl2', method='nl2', level_choice='rule')],
        replications=2,
        name='small',
    )
    options.update(kwargs)
    return ExperimentConfig(**options)


@pytest.fixture
def bundle(tmp_path):
    path = tmp_path / 'bundle'
    status = main(['simulate', '--kernel', 'diagonal', '--signal', 'power_law',
                   '--max-level', '5', '--delta', '1e-3', '--epsilon', '1e-3',
                   '--seed', '3', '--out', str(path)])
    assert status == 0
    return path


def test_simulate_writes_bundle(bundle):
    assert (bundle / 'operator.bin').exists()
    metadata = json.loads((bundle / 'metadata.json').read_text())
    assert metadata['kernel'] == 'diagonal'
    assert metadata['seed'] == 3
    assert len(pd.read_csv(bundle / 'coefficients.csv')) == 64


@pytest.mark.parametrize("method,extra", [
    ('linear', ['--j', '3']),
    ('nl1', ['--j1', '4', '--j0', '1']),
    ('nl2', []),
])
def test_estimate_from_bundle(bundle, tmp_path, method, extra):
    out = tmp_path / 'estimate'
    status = main(['estimate', '--bundle', str(bundle), '--method', method,
                   '--out', str(out)] + extra)
    assert status == 0
    table = pd.read_csv(out / 'estimate.csv')
    assert list(table.columns) == ['index', 'level', 'position', 'estimate']
    diagnostics = json.loads((out / 'diagnostics.json').read_text())
    assert diagnostics['method'] == method
    assert diagnostics['rmse'] < 0.5
    if method == 'nl2':
        assert diagnostics['chosen_level'] == 2


def test_linear_estimate_needs_level(bundle, capsys):
    assert main(['estimate', '--bundle', str(bundle), '--method', 'linear']) == 1
    assert 'ERROR: estimate failed' in capsys.readouterr().out


def test_estimate_missing_bundle(tmp_path):
    assert main(['estimate', '--bundle', str(tmp_path / 'nowhere')]) == 1


def test_experiment_from_config(tmp_path, capsys):
    config_path = tmp_path / 'config.json'
    save_config(_small_config(), config_path)
    report = tmp_path / 'report.csv'
    assert main(['experiment', '--config', str(config_path), '--out', str(report)]) == 0
    table = pd.read_csv(report)
    assert table['method'].tolist() == ['linear', 'nl2']
    assert 'RECOMMENDATION' in capsys.readouterr().out


def test_experiment_seed_override(tmp_path):
    config_path = tmp_path / 'config.json'
    save_config(_small_config(), config_path)
    report = tmp_path / 'report.json'
    assert main(['experiment', '--config', str(config_path), '--seed', '99',
                 '--replications', '1', '--format', 'json', '--out', str(report)]) == 0
    data = json.loads(report.read_text())
    assert data['provenance']['seed'] == 99
    assert all(len(cell['seeds']) == 1 for cell in data['cells'])


def test_experiment_rejects_bad_config(tmp_path):
    config_path = tmp_path / 'config.json'
    config_path.write_text(json.dumps({'kernel': 'diagonal'}))
    assert main(['experiment', '--config', str(config_path)]) == 1


def test_experiment_needs_a_source():
    with pytest.raises(SystemExit):
        main(['experiment'])


def test_rates_from_config(tmp_path, capsys):
    config = _small_config(
        delta_grid=tuple(2.0 ** -k for k in range(4, 9)), epsilon_grid=(), tie_epsilon=True,
        methods=[MethodSpec(name='linear_oracle', method='linear', level_choice='oracle',
                            oracle_levels=(0, 4))],
        replications=3,
    )
    config_path = tmp_path / 'config.json'
    save_config(config, config_path)
    report = tmp_path / 'rates.csv'
    assert main(['rates', '--config', str(config_path), '--out', str(report)]) == 0
    assert len(pd.read_csv(report)) == 5
    assert 'Fitted slope' in capsys.readouterr().out


def test_rates_unknown_method(tmp_path):
    config_path = tmp_path / 'config.json'
    save_config(_small_config(), config_path)
    assert main(['rates', '--config', str(config_path), '--method', 'nl2',
                 '--out', str(tmp_path / 'rates.csv')]) == 1
