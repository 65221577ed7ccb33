"""
simulate.py - Ground-truth signals and noisy observations (g_eps, K_delta)
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from operators import GalerkinMatrix, add_operator_noise, load_operator, save_operator
from wavelet import CoeffVector, MultiIndex, dwt, grid_points, level_array, sample_function

logger = logging.getLogger(__name__)

SIGNAL_KINDS = ('tent', 'single_wavelet', 'smooth', 'power_law', 'custom')
OPERATOR_FILE = 'operator.bin'
COEFFICIENT_FILE = 'coefficients.csv'
METADATA_FILE = 'metadata.json'


@dataclass(frozen=True)
class SignalSpec:
    """
    Test signal description.

    Attributes:
        kind (str): one of SIGNAL_KINDS
        index (MultiIndex): wavelet label for 'single_wavelet'
        frequency (int): n in cos(2 pi n x) for 'smooth'
        smoothness (float): s for 'power_law'
        samples (array-like or callable): grid values or a function for 'custom'
    """
    kind: str = 'tent'
    index: Optional[MultiIndex] = None
    frequency: int = 1
    smoothness: float = 1.5
    samples: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"Unknown signal kind '{self.kind}', expected one of {SIGNAL_KINDS}")
        if self.kind == 'single_wavelet' and self.index is None:
            raise ValueError("A single-wavelet signal needs an index")
        if self.kind == 'custom' and self.samples is None:
            raise ValueError("A custom signal needs samples or a function")
        if self.kind == 'power_law' and self.smoothness <= 0:
            raise ValueError(f"Power-law smoothness must be positive, got {self.smoothness}")


@dataclass(frozen=True, eq=False)
class Observation:
    """
    The observable pair plus bookkeeping.

    Attributes:
        g (CoeffVector): noisy data coefficients
        k_delta (GalerkinMatrix): noisy operator
        delta (float): operator noise level
        epsilon (float): data noise level
        seed (int): seed both noise streams derive from
        truth (CoeffVector): the signal, kept for scoring only
    """
    g: CoeffVector
    k_delta: GalerkinMatrix
    delta: float
    epsilon: float
    seed: int
    truth: Optional[CoeffVector] = None

    @property
    def max_level(self):
        return self.g.max_level


def tent(x):
    return np.maximum(1.0 - 30.0 * np.abs(np.asarray(x) - 0.5), 0.0)


def power_law_coefficients(s, max_level):
    """
    Coefficients 2^(-|lambda|(s+1/2)) (-1)^k, with 1 at the scaling index.

    Args:
        s (float): Sobolev smoothness the per-level energy decays with
        max_level (int): finest level J_max

    Returns:
        np.ndarray: level-major coefficients
    """
    levels = level_array(max_level)
    positions = np.arange(levels.size) - np.where(levels >= 0, 2 ** np.maximum(levels, 0), 0)
    values = 2.0 ** (-np.maximum(levels, 0) * (s + 0.5)) * (-1.0) ** positions
    values[0] = 1.0
    return values


def synthesize_signal(spec, max_level, wavelet_filter):
    """
    L2-normalized wavelet coefficients of a test signal.

    Args:
        spec (SignalSpec): what to synthesize
        max_level (int): finest level J_max
        wavelet_filter (WaveletFilter): orthogonal filter

    Returns:
        CoeffVector: coefficients at level J_max
    """
    if spec.kind == 'tent':
        if max_level < 5:
            raise ValueError(f"The tent needs max_level >= 5 to be resolved, got {max_level}")
        return dwt(sample_function(tent, max_level), wavelet_filter)

    if spec.kind == 'single_wavelet':
        if spec.index.level > max_level:
            raise ValueError(f"Index {spec.index} is finer than max_level {max_level}")
        return CoeffVector.unit(spec.index, max_level)

    if spec.kind == 'smooth':
        n = spec.frequency
        if 2 * abs(n) >= 2 ** (max_level + 1):
            raise ValueError(f"Frequency {n} is not resolved at max_level {max_level}")
        return dwt(sample_function(lambda x: np.cos(2.0 * np.pi * n * x), max_level),
                   wavelet_filter)

    if spec.kind == 'power_law':
        return CoeffVector(max_level, power_law_coefficients(spec.smoothness, max_level))

    # custom
    if callable(spec.samples):
        return dwt(sample_function(spec.samples, max_level), wavelet_filter)
    values = np.asarray(spec.samples, dtype=float)
    if values.shape != grid_points(max_level).shape:
        raise ValueError(
            f"Custom samples have shape {values.shape}, expected {2 ** (max_level + 1)} values"
        )
    return dwt(values / np.sqrt(values.size), wavelet_filter)


def observe(f, operator, delta, epsilon, seed):
    """
    Draw one realization of the statistical model.

    Args:
        f (CoeffVector): true signal
        operator (GalerkinMatrix): exact operator K
        delta (float): operator noise level, >= 0
        epsilon (float): data noise level, >= 0
        seed (int): master seed, split into operator and data streams

    Returns:
        Observation: (g_eps, K_delta) with the truth attached
    """
    if f.max_level != operator.max_level:
        raise ValueError(
            f"Signal level {f.max_level} does not match operator level {operator.max_level}"
        )
    if delta < 0 or epsilon < 0:
        raise ValueError(f"Noise levels must be nonnegative, got delta={delta}, epsilon={epsilon}")

    operator_seed, data_seed = np.random.SeedSequence(seed).spawn(2)
    k_delta = add_operator_noise(operator, delta, operator_seed)

    g = operator.apply(f.values)
    if epsilon > 0:
        g = g + epsilon * np.random.default_rng(data_seed).standard_normal(g.size)

    return Observation(g=CoeffVector(f.max_level, g), k_delta=k_delta, delta=float(delta),
                       epsilon=float(epsilon), seed=seed, truth=f)


def save_observation(observation, directory, metadata=None):
    """
    Write an Observation bundle to a directory.

    Args:
        observation (Observation): what to write
        directory (str or Path): output directory, created if needed
        metadata (dict): extra fields (kernel, signal, ...) for metadata.json

    Returns:
        Path: the bundle directory
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    save_operator(observation.k_delta, directory / OPERATOR_FILE)

    indices = [MultiIndex.from_flat(i) for i in range(observation.g.values.size)]
    truth = (observation.truth.values if observation.truth is not None
             else np.full(observation.g.values.size, np.nan))
    pd.DataFrame({
        'index': np.arange(len(indices)),
        'level': [idx.level for idx in indices],
        'position': [idx.position for idx in indices],
        'g': observation.g.values,
        'truth': truth,
    }).to_csv(directory / COEFFICIENT_FILE, index=False, float_format='%.17g')

    record = dict(metadata or {})
    record.update({
        'delta': observation.delta,
        'epsilon': observation.epsilon,
        'seed': observation.seed,
        'max_level': observation.max_level,
    })
    with open(directory / METADATA_FILE, 'w') as f:
        json.dump(record, f, indent=2)

    logger.info("Saved observation bundle to %s", directory)
    return directory


def load_observation(directory):
    """
    Read an Observation bundle.

    Args:
        directory (str or Path): bundle directory

    Returns:
        tuple: (Observation, metadata dict)
    """
    directory = Path(directory)
    with open(directory / METADATA_FILE) as f:
        metadata = json.load(f)

    k_delta = load_operator(directory / OPERATOR_FILE)
    table = pd.read_csv(directory / COEFFICIENT_FILE, float_precision='round_trip').sort_values('index')
    max_level = int(metadata['max_level'])

    truth = None
    if not table['truth'].isna().any():
        truth = CoeffVector(max_level, table['truth'].to_numpy())

    observation = Observation(
        g=CoeffVector(max_level, table['g'].to_numpy()),
        k_delta=k_delta,
        delta=float(metadata['delta']),
        epsilon=float(metadata['epsilon']),
        seed=metadata['seed'],
        truth=truth,
    )
    return observation, metadata
