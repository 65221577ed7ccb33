"""
harness.py - Monte Carlo experiments over noise levels and estimators
"""

import hashlib
import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import linregress
from tqdm import tqdm

from estimators import (LinearSpec, NL1Spec, NL2Spec, linear_galerkin, nl1_estimate,
                        nl1_levels, nl2_estimate, nl2_level, oracle_level,
                        rate_exponent_dense, select_level_for)
from operators import KernelSpec, SingularOperatorError, build_operator
from simulate import SignalSpec, observe, synthesize_signal
from wavelet import get_filter

logger = logging.getLogger(__name__)

VERSION = '1.0.0'
METHODS = ('linear', 'nl1', 'nl2')
LEVEL_CHOICES = ('fixed', 'rule', 'rate', 'oracle')
DEGENERATE_R_SQUARED = 0.5
MIN_RATE_POINTS = 4


@dataclass(frozen=True)
class MethodSpec:
    """
    One estimator configuration of an experiment.

    Attributes:
        name (str): label used in reports
        method (str): 'linear', 'nl1' or 'nl2'
        level_choice (str): 'fixed' (use `level`), 'rule' (data-driven J),
            'rate' (theory level for the config smoothness) or 'oracle'
            (candidate level with the smallest RMSE over the replications)
        level (int): j for linear, j1 for nl1, J for nl2 when fixed
        j0 (int): nl1 unconditional level (defaults from the rate helper)
        oracle_levels (tuple): inclusive (low, high) candidate range for 'oracle'
    """
    name: str
    method: str
    level_choice: str = 'fixed'
    level: Optional[int] = None
    j0: Optional[int] = None
    kappa: float = 0.4
    kappa_op: float = 1.5
    kappa_data: float = 1.5
    tau: Optional[float] = None
    t: float = 1.0
    threshold_mode: str = 'theoretical'
    oracle_levels: Optional[tuple] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown method '{self.method}', expected one of {METHODS}")
        if self.level_choice not in LEVEL_CHOICES:
            raise ValueError(
                f"Unknown level choice '{self.level_choice}', expected one of {LEVEL_CHOICES}"
            )
        if self.level_choice == 'fixed' and self.level is None:
            raise ValueError(f"Method '{self.name}' uses a fixed level but none is given")
        if self.level_choice == 'oracle':
            if self.oracle_levels is None or len(self.oracle_levels) != 2:
                raise ValueError(f"Method '{self.name}' needs oracle_levels=(low, high)")
            if self.oracle_levels[0] > self.oracle_levels[1]:
                raise ValueError(f"Empty oracle range {self.oracle_levels}")
            object.__setattr__(self, 'oracle_levels', tuple(int(v) for v in self.oracle_levels))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a Monte Carlo sweep depends on.

    With tie_epsilon the cells are (delta, delta) for every delta in delta_grid and
    epsilon_grid is ignored; otherwise every (delta, epsilon) pair is a cell.
    level_constant scales 2^j in the theory-driven ('rate') level formulas.
    """
    kernel: KernelSpec
    signal: SignalSpec
    max_level: int
    delta_grid: tuple
    epsilon_grid: tuple
    methods: tuple
    replications: int = 20
    base_seed: int = 0
    wavelet: str = 'daubechies'
    wavelet_order: int = 8
    tie_epsilon: bool = False
    rule_c: float = 5.0
    sqrt_dim: bool = False
    smoothness: float = 1.5
    level_constant: float = 1.0
    name: str = 'custom'

    def __post_init__(self):
        object.__setattr__(self, 'delta_grid', tuple(float(v) for v in self.delta_grid))
        object.__setattr__(self, 'epsilon_grid', tuple(float(v) for v in self.epsilon_grid))
        object.__setattr__(self, 'methods', tuple(self.methods))
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.level_constant <= 0:
            raise ValueError(f"level_constant must be positive, got {self.level_constant}")
        if not self.delta_grid or (not self.tie_epsilon and not self.epsilon_grid):
            raise ValueError("Noise grids must be nonempty")
        for value in self.delta_grid + self.epsilon_grid:
            if not 0 <= value < 1:
                raise ValueError(f"Noise levels must lie in (0, 1) or be 0, got {value}")
        if not self.methods:
            raise ValueError("At least one method is required")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError(f"Method names must be unique, got {names}")

    def cells(self):
        """(delta, epsilon) pairs in sweep order."""
        if self.tie_epsilon:
            return [(d, d) for d in self.delta_grid]
        return [(d, e) for d in self.delta_grid for e in self.epsilon_grid]

    def to_dict(self):
        """Plain-JSON form of the config; custom kernels and signals keep only their kind."""
        signal_params = {}
        if self.signal.kind == 'single_wavelet':
            signal_params = {'level': self.signal.index.level,
                             'position': self.signal.index.position}
        elif self.signal.kind == 'smooth':
            signal_params = {'frequency': self.signal.frequency}
        elif self.signal.kind == 'power_law':
            signal_params = {'smoothness': self.signal.smoothness}

        methods = []
        for m in self.methods:
            record = {k: getattr(m, k) for k in MethodSpec.__dataclass_fields__}
            if record['oracle_levels'] is not None:
                record['oracle_levels'] = list(record['oracle_levels'])
            methods.append(record)

        return {
            'name': self.name,
            'kernel': self.kernel.kind,
            'kernel_t': self.kernel.t,
            'signal': self.signal.kind,
            'signal_params': signal_params,
            'max_level': self.max_level,
            'wavelet': self.wavelet,
            'wavelet_order': self.wavelet_order,
            'delta_grid': list(self.delta_grid),
            'epsilon_grid': list(self.epsilon_grid),
            'tie_epsilon': self.tie_epsilon,
            'methods': methods,
            'replications': self.replications,
            'base_seed': self.base_seed,
            'rule_c': self.rule_c,
            'sqrt_dim': self.sqrt_dim,
            'smoothness': self.smoothness,
            'level_constant': self.level_constant,
        }


@dataclass
class ExperimentResult:
    """
    Per-cell records plus provenance.

    Attributes:
        cells (list): one dict per (delta, epsilon, method)
        provenance (dict): config_hash, seed, version, reproducible
    """
    cells: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {'provenance': dict(self.provenance),
                'cells': [dict(cell) for cell in self.cells]}

    @classmethod
    def from_dict(cls, data):
        cells = []
        for cell in data.get('cells', []):
            cell = dict(cell)
            # JSON object keys are strings
            cell['chosen_j_histogram'] = {int(k): v for k, v in
                                          cell.get('chosen_j_histogram', {}).items()}
            if cell.get('level_errors') is not None:
                cell['level_errors'] = {int(k): v for k, v in cell['level_errors'].items()}
            cells.append(cell)
        return cls(cells=cells, provenance=dict(data.get('provenance', {})))

    def methods(self):
        return list(dict.fromkeys(cell['method'] for cell in self.cells))

    def cells_for(self, method):
        return [cell for cell in self.cells if cell['method'] == method]


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    theoretical_exponent: float
    n_points: int

    @property
    def is_degenerate(self):
        return self.r_squared < DEGENERATE_R_SQUARED


def rmse(estimate, truth):
    """
    L2 distance between two coefficient vectors (the L2 function distance by Parseval).

    Args:
        estimate (CoeffVector): estimated coefficients
        truth (CoeffVector): true coefficients

    Returns:
        float: ||estimate - truth||_2
    """
    if estimate.max_level != truth.max_level:
        raise ValueError(
            f"Level mismatch: estimate {estimate.max_level}, truth {truth.max_level}"
        )
    return float(np.linalg.norm(estimate.values - truth.values))


def is_reproducible(config):
    """False when a custom kernel or signal function is invisible to config_hash."""
    if config.kernel.kind == 'custom':
        return False
    return not (config.signal.kind == 'custom' and callable(config.signal.samples))


def config_hash(config):
    """
    SHA-256 of the canonical JSON form of a config.

    Custom signal samples given as arrays are hashed by value. Custom functions
    cannot be, so two configs differing only in such a function share a hash;
    is_reproducible flags them.
    """
    data = config.to_dict()
    if config.signal.kind == 'custom' and not callable(config.signal.samples):
        samples = np.ascontiguousarray(config.signal.samples, dtype=float)
        data['signal_samples'] = hashlib.sha256(samples.tobytes()).hexdigest()
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def replication_seed(base_seed, cell_index, replication):
    """Integer seed of one replication, derived from (base_seed, cell, replication)."""
    state = np.random.SeedSequence([base_seed, cell_index, replication]).generate_state(1)
    return int(state[0])


def _clip(level, low, high):
    return int(min(max(level, low), high))


def _resolve_level(method, observation, config):
    """The level the estimator runs at for one observation (not used for 'oracle')."""
    top = observation.max_level
    if method.level_choice == 'fixed':
        return method.level
    if method.level_choice == 'rule':
        return select_level_for(observation, c=config.rule_c, sqrt_dim=config.sqrt_dim)

    delta, epsilon = observation.delta, observation.epsilon
    if method.method == 'linear':
        return _clip(oracle_level(delta, epsilon, config.smoothness, method.t,
                                  constant=config.level_constant), -1, top)
    if method.method == 'nl1':
        return _clip(nl1_levels(delta, epsilon, config.smoothness, method.t)[1], 0, top)
    return _clip(nl2_level(delta, epsilon, method.t, constant=config.level_constant), 0, top)


def _run_estimator(method, observation, level, config):
    if method.method == 'linear':
        return linear_galerkin(observation, LinearSpec(j=level, t=method.t, tau=method.tau))

    if method.method == 'nl1':
        j0 = method.j0
        if j0 is None:
            j0 = nl1_levels(observation.delta, observation.epsilon, config.smoothness,
                            method.t, constant=config.level_constant)[0]
        # the pilot level may come out at or below the requested j0
        j0 = min(j0, level - 1)
        spec = NL1Spec(j0=j0, j1=level, kappa=method.kappa, t=method.t, tau=method.tau,
                       threshold_mode=method.threshold_mode)
        return nl1_estimate(observation, spec)

    spec = NL2Spec(J=level, kappa_op=method.kappa_op, kappa_data=method.kappa_data,
                   t=method.t, tau=method.tau)
    return nl2_estimate(observation, spec)


class _MethodAccumulator:
    """Per-cell bookkeeping for one method."""

    def __init__(self, method, replications):
        self.method = method
        self.errors = [None] * replications
        self.cutoffs = 0
        self.failures = 0
        self.levels = Counter()
        self.wall = 0.0
        self.oracle_errors = {}
        self.oracle_cutoffs = {}
        if method.level_choice == 'oracle':
            low, high = method.oracle_levels
            for level in range(low, high + 1):
                self.oracle_errors[level] = [None] * replications
                self.oracle_cutoffs[level] = [False] * replications

    def record(self, observation, rep, config):
        start = time.perf_counter()
        try:
            if self.method.level_choice == 'oracle':
                for level in self.oracle_errors:
                    estimate = _run_estimator(self.method, observation, level, config)
                    self.oracle_errors[level][rep] = rmse(estimate.f, observation.truth)
                    self.oracle_cutoffs[level][rep] = estimate.cutoff_triggered
            else:
                level = _resolve_level(self.method, observation, config)
                estimate = _run_estimator(self.method, observation, level, config)
                self.errors[rep] = rmse(estimate.f, observation.truth)
                self.levels[int(estimate.diagnostics.get('used_level', level))] += 1
                self.cutoffs += int(estimate.cutoff_triggered)
        except (SingularOperatorError, ValueError, np.linalg.LinAlgError) as e:
            self.failures += 1
            logger.warning("%s failed on replication %d: %s", self.method.name, rep, e)
        self.wall += time.perf_counter() - start

    def finalize(self, delta, epsilon, seeds, base_seed):
        level_errors = None
        if self.method.level_choice == 'oracle':
            level_errors = {level: _root_mean_square(errs)
                            for level, errs in self.oracle_errors.items()}
            finite = {k: v for k, v in level_errors.items() if v is not None}
            if finite:
                best = min(finite, key=finite.get)
                self.errors = list(self.oracle_errors[best])
                self.cutoffs = int(sum(self.oracle_cutoffs[best]))
                succeeded = sum(e is not None for e in self.errors)
                self.levels = Counter({best: succeeded})

        succeeded = [e for e in self.errors if e is not None]
        histogram = {int(k): int(v) for k, v in sorted(self.levels.items())}
        mode = max(histogram, key=lambda k: (histogram[k], -k)) if histogram else None

        return {
            'delta': float(delta),
            'epsilon': float(epsilon),
            'method': self.method.name,
            'rmse_mean': _root_mean_square(self.errors),
            'rmse_std': float(np.std(succeeded)) if succeeded else None,
            'cutoff_rate': self.cutoffs / len(succeeded) if succeeded else 0.0,
            'chosen_j_histogram': histogram,
            'chosen_j_mode': mode,
            'wall_ms': 1000.0 * self.wall,
            'seed': int(base_seed),
            'rmse_per_replication': [None if e is None else float(e) for e in self.errors],
            'seeds': list(seeds),
            'failure_count': int(self.failures),
            'level_errors': level_errors,
        }


def _root_mean_square(errors):
    values = [e for e in errors if e is not None]
    if not values:
        return None
    return float(np.sqrt(np.mean(np.square(values))))


def run_monte_carlo(config, progress=False):
    """
    Run every (delta, epsilon, method) cell of an experiment.

    All methods of a cell see the same observations. Estimator failures are
    counted per cell and never abort the sweep.

    Args:
        config (ExperimentConfig): the experiment
        progress (bool): show a tqdm progress bar

    Returns:
        ExperimentResult: cell records and provenance
    """
    wavelet_filter = get_filter(config.wavelet, config.wavelet_order)
    operator = build_operator(config.kernel, config.max_level, wavelet_filter)
    truth = synthesize_signal(config.signal, config.max_level, wavelet_filter)
    logger.info("Running '%s': %d cells x %d methods x %d replications",
                config.name, len(config.cells()), len(config.methods), config.replications)

    cells = []
    total = len(config.cells()) * config.replications
    with tqdm(total=total, desc=config.name, disable=not progress) as bar:
        for cell_index, (delta, epsilon) in enumerate(config.cells()):
            accumulators = [_MethodAccumulator(m, config.replications) for m in config.methods]
            seeds = []
            for rep in range(config.replications):
                seed = replication_seed(config.base_seed, cell_index, rep)
                seeds.append(seed)
                observation = observe(truth, operator, delta, epsilon, seed)
                for acc in accumulators:
                    acc.record(observation, rep, config)
                bar.update(1)
            cells.extend(acc.finalize(delta, epsilon, seeds, config.base_seed)
                         for acc in accumulators)

    provenance = {
        'config_hash': config_hash(config),
        'seed': int(config.base_seed),
        'version': VERSION,
        'name': config.name,
        'reproducible': is_reproducible(config),
    }
    if not provenance['reproducible']:
        logger.warning("Config '%s' uses a custom function; its hash does not pin the experiment",
                       config.name)
    return ExperimentResult(cells=cells, provenance=provenance)


def fit_rate(result, method, s, t, d=1):
    """
    Least-squares slope of log(rmse_mean) against log(max(delta, epsilon)).

    Args:
        result (ExperimentResult): sweep over noise levels
        method (str): method name to fit
        s (float): smoothness of the signal
        t (float): degree of ill-posedness
        d (int): dimension

    Returns:
        RateFit: fitted slope with r(s, t, d) as the theoretical exponent
    """
    points = [(max(cell['delta'], cell['epsilon']), cell['rmse_mean'])
              for cell in result.cells_for(method)
              if cell['rmse_mean'] is not None and cell['rmse_mean'] > 0
              and max(cell['delta'], cell['epsilon']) > 0]
    if len(points) < MIN_RATE_POINTS:
        raise ValueError(
            f"Rate fit for '{method}' needs at least {MIN_RATE_POINTS} noise levels "
            f"with positive RMSE, got {len(points)}"
        )

    noise, errors = np.array(points).T
    fit = linregress(np.log(noise), np.log(errors))
    rate_fit = RateFit(slope=float(fit.slope), intercept=float(fit.intercept),
                       r_squared=float(fit.rvalue ** 2),
                       theoretical_exponent=rate_exponent_dense(s, t, d),
                       n_points=len(points))
    if rate_fit.is_degenerate:
        logger.warning("Rate fit for '%s' is degenerate (r^2 = %.3f)", method, rate_fit.r_squared)
    return rate_fit
