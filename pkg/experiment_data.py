"""
experiment_data.py - Ready-made experiment configurations and config file parsing
"""

import json
from dataclasses import replace

from harness import ExperimentConfig, MethodSpec
from operators import KernelSpec
from simulate import SignalSpec
from wavelet import MultiIndex

CONFIG_KEYS = {
    'name', 'kernel', 'kernel_t', 'signal', 'signal_params', 'max_level', 'wavelet',
    'wavelet_order', 'delta_grid', 'epsilon_grid', 'tie_epsilon', 'methods',
    'replications', 'base_seed', 'rule_c', 'sqrt_dim', 'smoothness', 'level_constant',
}
REQUIRED_KEYS = {'kernel', 'signal', 'max_level', 'delta_grid', 'methods'}


def get_flagship_config(replications=20, base_seed=2024):
    """
    Log-potential operator, tent signal, Daubechies-8, delta = 1e-3, epsilon = 1e-5

    Returns:
        ExperimentConfig: the three estimators plus a linear oracle sweep over j = 3..7
    """
    methods = [
        MethodSpec(name='linear', method='linear', level_choice='fixed', level=5),
        MethodSpec(name='nl1', method='nl1', level_choice='rule', j0=3, kappa=0.4,
                   threshold_mode='empirical_decay'),
        MethodSpec(name='nl2', method='nl2', level_choice='rule', kappa_op=1.5,
                   kappa_data=1.5),
        MethodSpec(name='linear_oracle', method='linear', level_choice='oracle',
                   oracle_levels=(3, 7)),
    ]
    return ExperimentConfig(
        kernel=KernelSpec(kind='log_potential', t=1.0),
        signal=SignalSpec(kind='tent'),
        max_level=10,
        delta_grid=(1e-3,),
        epsilon_grid=(1e-5,),
        methods=methods,
        replications=replications,
        base_seed=base_seed,
        rule_c=5.0,
        name='flagship',
    )


def get_rate_config(replications=50, base_seed=7):
    """
    Diagonal fixture (t = 1) with a power-law signal of smoothness 1.5, epsilon tied to delta.
    The rate formula runs at half the nominal 2^j so its levels line up with the oracle's.

    Returns:
        ExperimentConfig: delta over 2^-6 ... 2^-12
    """
    methods = [
        MethodSpec(name='linear_oracle', method='linear', level_choice='oracle',
                   oracle_levels=(0, 5)),
        MethodSpec(name='linear_rate', method='linear', level_choice='rate'),
    ]
    return ExperimentConfig(
        kernel=KernelSpec(kind='diagonal', t=1.0),
        signal=SignalSpec(kind='power_law', smoothness=1.5),
        max_level=7,
        delta_grid=tuple(2.0 ** -k for k in range(6, 13)),
        epsilon_grid=(),
        tie_epsilon=True,
        methods=methods,
        replications=replications,
        base_seed=base_seed,
        smoothness=1.5,
        level_constant=0.5,
        name='rates',
    )


def get_known_operator_config(replications=20, base_seed=2024):
    """
    Exactly known operator (delta = 0) and epsilon = 2e-4 on the flagship problem

    Returns:
        ExperimentConfig: linear, NL-I and NL-II at fixed levels
    """
    methods = [
        MethodSpec(name='linear', method='linear', level_choice='fixed', level=5),
        MethodSpec(name='nl1', method='nl1', level_choice='fixed', level=8, j0=3,
                   kappa=0.4, threshold_mode='empirical_decay'),
        MethodSpec(name='nl2', method='nl2', level_choice='fixed', level=7,
                   kappa_data=1.5),
    ]
    return ExperimentConfig(
        kernel=KernelSpec(kind='log_potential', t=1.0),
        signal=SignalSpec(kind='tent'),
        max_level=10,
        delta_grid=(0.0,),
        epsilon_grid=(2e-4,),
        methods=methods,
        replications=replications,
        base_seed=base_seed,
        name='known_operator',
    )


PRESETS = {
    'flagship': get_flagship_config,
    'rates': get_rate_config,
    'known_operator': get_known_operator_config,
}


def get_preset(name):
    if name not in PRESETS:
        raise ValueError(f"Unknown preset '{name}', expected one of {sorted(PRESETS)}")
    return PRESETS[name]()


def signal_from_params(kind, params=None):
    """
    Build a SignalSpec from a kind and a flat parameter dict.

    Args:
        kind (str): signal kind
        params (dict): level/position, frequency or smoothness

    Returns:
        SignalSpec: the signal description
    """
    params = params or {}
    if kind == 'single_wavelet':
        index = MultiIndex(int(params.get('level', 0)), int(params.get('position', 0)))
        return SignalSpec(kind=kind, index=index)
    if kind == 'smooth':
        return SignalSpec(kind=kind, frequency=int(params.get('frequency', 1)))
    if kind == 'power_law':
        return SignalSpec(kind=kind, smoothness=float(params.get('smoothness', 1.5)))
    if kind == 'custom':
        raise ValueError("Custom signals cannot be given in a config file")
    return SignalSpec(kind=kind)


def config_from_dict(data):
    """
    Build an ExperimentConfig from its plain-JSON form.

    Args:
        data (dict): keys mirroring the ExperimentConfig fields

    Returns:
        ExperimentConfig: validated config
    """
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"Unknown config keys: {sorted(unknown)}")
    missing = REQUIRED_KEYS - set(data)
    if missing:
        raise ValueError(f"Missing config keys: {sorted(missing)}")
    if data['kernel'] == 'custom':
        raise ValueError("Custom kernels cannot be given in a config file")

    methods = []
    for record in data['methods']:
        record = dict(record)
        if record.get('oracle_levels') is not None:
            record['oracle_levels'] = tuple(record['oracle_levels'])
        try:
            methods.append(MethodSpec(**record))
        except TypeError as e:
            raise ValueError(f"Invalid method entry {record}: {e}") from e

    optional = {key: data[key] for key in ('name', 'wavelet', 'wavelet_order', 'tie_epsilon',
                                           'replications', 'base_seed', 'rule_c', 'sqrt_dim',
                                           'smoothness', 'level_constant') if key in data}
    return ExperimentConfig(
        kernel=KernelSpec(kind=data['kernel'], t=float(data.get('kernel_t', 1.0))),
        signal=signal_from_params(data['signal'], data.get('signal_params')),
        max_level=int(data['max_level']),
        delta_grid=data['delta_grid'],
        epsilon_grid=data.get('epsilon_grid', []),
        methods=methods,
        **optional,
    )


def load_config(path):
    """Read an experiment config file (JSON)."""
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"Config file {path} is not valid JSON: {e}") from e
    return config_from_dict(data)


def save_config(config, path):
    with open(path, 'w') as f:
        json.dump(config.to_dict(), f, indent=2)


def with_overrides(config, **overrides):
    """Copy of a config with some fields replaced; None values are ignored."""
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
