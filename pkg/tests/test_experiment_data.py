import json

import pytest

from experiment_data import (PRESETS, config_from_dict, get_flagship_config,
                             get_known_operator_config, get_preset, get_rate_config,
                             load_config, save_config, signal_from_params, with_overrides)
from harness import config_hash
from wavelet import MultiIndex


def test_flagship_preset():
    config = get_flagship_config()
    assert config.kernel.kind == 'log_potential'
    assert config.signal.kind == 'tent'
    assert config.max_level == 10
    assert config.cells() == [(1e-3, 1e-5)]
    assert [m.name for m in config.methods] == ['linear', 'nl1', 'nl2', 'linear_oracle']
    assert config.methods[3].oracle_levels == (3, 7)


def test_rate_preset_ties_noise_levels():
    config = get_rate_config()
    assert config.tie_epsilon
    assert config.cells()[0] == (2.0 ** -6, 2.0 ** -6)
    assert len(config.cells()) == 7
    assert config.replications == 50
    assert config.level_constant == 0.5
    assert config_from_dict(config.to_dict()).level_constant == 0.5


def test_known_operator_preset():
    config = get_known_operator_config()
    assert config.cells() == [(0.0, 2e-4)]
    assert all(m.level_choice == 'fixed' for m in config.methods)


def test_get_preset():
    for name in PRESETS:
        assert get_preset(name).name == name
    with pytest.raises(ValueError):
        get_preset('nonexistent')


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_config_round_trip(tmp_path, preset):
    config = get_preset(preset)
    path = tmp_path / 'config.json'
    save_config(config, path)
    loaded = load_config(path)
    assert loaded == config
    assert config_hash(loaded) == config_hash(config)


def test_config_from_minimal_dict():
    config = config_from_dict({
        'kernel': 'diagonal',
        'kernel_t': 2.0,
        'signal': 'single_wavelet',
        'signal_params': {'level': 2, 'position': 3},
        'max_level': 4,
        'delta_grid': [0.01],
        'epsilon_grid': [0.001],
        'methods': [{'name': 'linear', 'method': 'linear', 'level': 3}],
    })
    assert config.kernel.t == 2.0
    assert config.signal.index == MultiIndex(2, 3)
    assert config.replications == 20
    assert config.methods[0].level == 3


@pytest.mark.parametrize("change", [
    {'colour': 'red'},
    {'kernel': 'custom'},
    {'signal': 'custom'},
    {'methods': [{'name': 'linear', 'method': 'linear', 'level': 3, 'alpha': 1.0}]},
    {'methods': [{'name': 'linear', 'method': 'linear'}]},
])
def test_invalid_config_entries(change):
    data = get_rate_config().to_dict()
    data.update(change)
    with pytest.raises(ValueError):
        config_from_dict(data)


def test_missing_config_keys():
    data = get_rate_config().to_dict()
    del data['methods']
    with pytest.raises(ValueError):
        config_from_dict(data)


def test_bad_json(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text('{"kernel": ')
    with pytest.raises(ValueError):
        load_config(path)


def test_signal_from_params():
    assert signal_from_params('smooth', {'frequency': 4}).frequency == 4
    assert signal_from_params('power_law').smoothness == 1.5
    assert signal_from_params('tent').kind == 'tent'


def test_with_overrides():
    config = get_rate_config()
    changed = with_overrides(config, replications=3, base_seed=None)
    assert changed.replications == 3
    assert changed.base_seed == config.base_seed
    assert with_overrides(config) == config
    with pytest.raises(ValueError):
        with_overrides(config, replications=0)


def test_saved_config_is_plain_json(tmp_path):
    path = tmp_path / 'config.json'
    save_config(get_flagship_config(), path)
    data = json.loads(path.read_text())
    assert data['methods'][3]['oracle_levels'] == [3, 7]
    assert data['kernel'] == 'log_potential'
