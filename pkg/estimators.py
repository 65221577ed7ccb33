"""
estimators.py - Linear Galerkin and nonlinear thresholding estimators

Three estimators for f from (g_eps, K_delta):
    - linear Galerkin: invert K_delta on V_j
    - NL-I: linear Galerkin at a fine level j1, then level-dependent hard thresholding
    - NL-II: threshold the operator entries and the data, then invert on V_J
plus the data-driven choice of J and the theoretical rate exponents.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pywt
from scipy.linalg import eigvalsh, solve, svdvals

from operators import (SINGULAR_RTOL, GalerkinMatrix, SingularOperatorError,
                       galerkin_submatrix, operator_norms)
from wavelet import CoeffVector, level_array, project_level

logger = logging.getLogger(__name__)

THRESHOLD_MODES = ('theoretical', 'empirical_decay')


@dataclass(frozen=True)
class LinearSpec:
    j: int
    t: float = 1.0
    tau: Optional[float] = None

    def __post_init__(self):
        if self.j < -1:
            raise ValueError(f"Projection level must be >= -1, got {self.j}")
        if self.tau is not None and self.tau <= 0:
            raise ValueError(f"Cut-off tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class NL1Spec:
    """
    Nonlinear Estimation I.

    Attributes:
        j0 (int): coarsest thresholded level is j0 + 1
        j1 (int): level the linear pilot estimate is computed at
        kappa (float): threshold constant
        t (float): degree of ill-posedness
        tau (float): optional cut-off
        threshold_mode (str): 'theoretical' or 'empirical_decay'
    """
    j0: int
    j1: int
    kappa: float = 0.4
    t: float = 1.0
    tau: Optional[float] = None
    threshold_mode: str = 'theoretical'

    def __post_init__(self):
        if not -1 <= self.j0 < self.j1:
            raise ValueError(f"Need -1 <= j0 < j1, got j0={self.j0}, j1={self.j1}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(
                f"Unknown threshold mode '{self.threshold_mode}', expected one of {THRESHOLD_MODES}"
            )
        if self.tau is not None and self.tau <= 0:
            raise ValueError(f"Cut-off tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class NL2Spec:
    """
    Nonlinear Estimation II.

    Attributes:
        J (int): level of the multiresolution space the system is inverted on
        kappa_op (float): operator threshold constant
        kappa_data (float): data threshold constant
        t (float): degree of ill-posedness
        tau (float): optional cut-off on the H^t -> L2 inverse norm
    """
    J: int
    kappa_op: float = 1.5
    kappa_data: float = 1.5
    t: float = 1.0
    tau: Optional[float] = None

    def __post_init__(self):
        if self.J < 0:
            raise ValueError(f"J must be >= 0, got {self.J}")
        if self.kappa_op <= 0 or self.kappa_data <= 0:
            raise ValueError("Threshold constants must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ValueError(f"Cut-off tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class Estimate:
    """
    Estimator output.

    Attributes:
        f (CoeffVector): estimated coefficients (zero when the cut-off fired)
        cutoff_triggered (bool): True when the zero branch was taken
        diagnostics (dict): used_level, kept_coefficient_count,
            kept_operator_entry_count, inv_norm
    """
    f: CoeffVector
    cutoff_triggered: bool = False
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Rate exponents and theory level choices
# ---------------------------------------------------------------------------

def rate_exponent_dense(s, t, d=1):
    """r(s, t, d) = 2s / (2s + 2t + d)."""
    if s <= 0 or t <= 0:
        raise ValueError(f"s and t must be positive, got s={s}, t={t}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return 2.0 * s / (2.0 * s + 2.0 * t + d)


def rate_exponent_sparse(s, p, t, d=1):
    """(s + d/2 - d/p) / (s + t + d/2 - d/p), defined when s - d/p + d/2 >= 0."""
    if p <= 0 or t <= 0 or d < 1:
        raise ValueError(f"Invalid parameters p={p}, t={t}, d={d}")
    effective = s + d / 2.0 - d / p
    if effective < 0:
        raise ValueError(
            f"B^{s}_{p},{p} does not embed into L2 (s - d/p + d/2 = {effective:.3g} < 0)"
        )
    return effective / (effective + t)


def classify_region(s, p, t, d=1):
    """'sparse' when 1/p >= 1/2 + s/(2t + d), else 'dense'."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    return 'sparse' if 1.0 / p >= 0.5 + s / (2.0 * t + d) else 'dense'


def threshold_value(x, kappa):
    """
    Noise-calibrated threshold kappa * x * sqrt(|ln x|).

    Args:
        x (float): noise level in (0, 1)
        kappa (float): threshold constant

    Returns:
        float: the threshold
    """
    if not 0 < x < 1:
        raise ValueError(f"Threshold noise level must lie in (0, 1), got {x}")
    return kappa * x * np.sqrt(abs(np.log(x)))


def _noise_scale(delta, epsilon):
    x = max(delta, epsilon)
    if x <= 0:
        raise ValueError("At least one of delta, epsilon must be positive")
    return x


def oracle_level(delta, epsilon, s, t, d=1, constant=1.0):
    """Level j with 2^j ~ constant * max(delta, epsilon)^(-2/(2s+2t+d))."""
    x = _noise_scale(delta, epsilon)
    exponent = 2.0 / (2.0 * s + 2.0 * t + d)
    return max(int(np.round(np.log2(constant) - exponent * np.log2(x))), 0)


def nl1_levels(delta, epsilon, s, t, d=1, constant=1.0):
    """
    Level pair (j0, j1) for Nonlinear Estimation I.

    Returns:
        tuple: j0 from the linear oracle rate, j1 with 2^j1 ~ max(delta, epsilon)^(-1/t)
    """
    j0 = oracle_level(delta, epsilon, s, t, d, constant=constant)
    x = _noise_scale(delta, epsilon)
    j1 = int(np.round(-np.log2(x) / t))
    return j0, max(j1, j0 + 1)


def nl2_level(delta, epsilon, t, d=1, constant=1.0):
    """Level J with 2^J ~ constant * min(eps^(-1/t), (delta sqrt|log delta|)^(-1/(t+d)))."""
    candidates = []
    if epsilon > 0:
        candidates.append(-np.log2(epsilon) / t)
    if delta > 0:
        candidates.append(-np.log2(delta * np.sqrt(abs(np.log(delta)))) / (t + d))
    if not candidates:
        raise ValueError("At least one of delta, epsilon must be positive")
    return max(int(np.round(np.log2(constant) + min(candidates))), 0)


def predicted_rate(method, s, p, t, d, delta, epsilon):
    """
    Order of magnitude of the RMSE bound of an estimator.

    Args:
        method (str): 'linear', 'nl1' or 'nl2'
        s, p, t, d: smoothness, integrability, ill-posedness, dimension
        delta, epsilon: noise levels

    Returns:
        float: the bound without constants
    """
    x = _noise_scale(delta, epsilon)

    def log_scaled(v):
        return v * np.sqrt(abs(np.log(v))) if 0 < v < 1 else 0.0

    if method == 'linear':
        return x ** rate_exponent_dense(s, t, d)
    if method == 'nl1':
        if classify_region(s, p, t, d) == 'dense':
            return x ** rate_exponent_dense(s, t, d)
        return max(log_scaled(delta), log_scaled(epsilon)) ** rate_exponent_sparse(s, p, t, d)
    if method == 'nl2':
        if classify_region(s, p, t, d) == 'dense':
            r = rate_exponent_dense(s, t, d)
        else:
            r = rate_exponent_sparse(s, p, t, d)
        return log_scaled(epsilon) ** r + log_scaled(delta) ** r
    raise ValueError(f"Unknown method '{method}'")


# ---------------------------------------------------------------------------
# Thresholding
# ---------------------------------------------------------------------------

def threshold_level_dependent(coeffs, x, kappa, t, j0, j1, level_factors=None,
                              correction=True):
    """
    Level-dependent hard thresholding S_x.

    Keeps <h, psi_lambda> iff |<h, psi_lambda>| >= kappa * w(|lambda|) * x * c(|lambda|),
    where w(j) = 2^(jt) (or level_factors[j]) and c(j) = sqrt((j - j0)_+) when
    correction is on, 1 otherwise. Levels <= j0 are always kept, levels > j1 dropped.

    Args:
        coeffs (CoeffVector): coefficients to threshold
        x (float): noise level
        kappa (float): threshold constant
        t (float): degree of ill-posedness
        j0 (int): finest level kept unconditionally
        j1 (int): finest level kept at all
        level_factors (dict): optional level -> factor replacing 2^(jt)
        correction (bool): apply the sqrt((j - j0)_+) factor

    Returns:
        CoeffVector: thresholded coefficients
    """
    if not j0 < j1 <= coeffs.max_level:
        raise ValueError(f"Need j0 < j1 <= {coeffs.max_level}, got j0={j0}, j1={j1}")

    levels = coeffs.levels
    if level_factors is None:
        weights = 2.0 ** (levels * t)
    else:
        tested = {int(lev) for lev in np.unique(levels) if j0 < lev <= j1}
        missing = sorted(tested - set(level_factors))
        if missing:
            raise ValueError(f"level_factors has no entry for levels {missing}")
        weights = np.array([level_factors.get(int(lev), 0.0) for lev in levels])
    if correction:
        weights = weights * np.sqrt(np.maximum(levels - j0, 0))

    thresholds = np.where(levels <= j0, 0.0, kappa * x * weights)
    thresholds = np.where(levels <= j1, thresholds, np.inf)
    return CoeffVector(coeffs.max_level,
                       pywt.threshold(coeffs.values, thresholds, mode='hard'))


def threshold_operator_entries(k_delta, delta, kappa):
    """
    Hard-threshold the wavelet entries of a noisy operator.

    Args:
        k_delta (GalerkinMatrix): noisy matrix
        delta (float): operator noise level in (0, 1)
        kappa (float): threshold constant

    Returns:
        tuple: (thresholded GalerkinMatrix, number of kept entries)
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    cutoff = threshold_value(delta, kappa)
    entries = pywt.threshold(k_delta.entries, cutoff, mode='hard')
    kept = int(np.count_nonzero(np.abs(k_delta.entries) >= cutoff))
    logger.debug("Operator threshold %.3e kept %d of %d entries", cutoff, kept, entries.size)
    return (GalerkinMatrix(k_delta.max_level, entries, illposedness=k_delta.illposedness,
                           kind=k_delta.kind), kept)


def threshold_data(g, epsilon, kappa, J):
    """
    Classical hard thresholding of data coefficients, restricted to |lambda| <= J.

    Args:
        g (CoeffVector): noisy data
        epsilon (float): data noise level in (0, 1)
        kappa (float): threshold constant
        J (int): finest level kept

    Returns:
        CoeffVector: thresholded data
    """
    cutoff = threshold_value(epsilon, kappa)
    cutoffs = np.where(g.levels <= J, cutoff, np.inf)
    return CoeffVector(g.max_level, pywt.threshold(g.values, cutoffs, mode='hard'))


def empirical_level_factors(k_delta, j0):
    """
    Per-level threshold factors from the observed singular-value decay.

    Singular values are sorted in decreasing order and handed out to the level
    bands by dimension (1 for level -1, 2^j for level j). Each factor is the
    inverse geometric mean of its band, normalized to 1 at level j0.

    Args:
        k_delta (GalerkinMatrix): noisy Galerkin matrix at the pilot level
        j0 (int): normalization level

    Returns:
        dict: level -> factor
    """
    if not -1 <= j0 <= k_delta.max_level:
        raise ValueError(f"j0={j0} outside [-1, {k_delta.max_level}]")
    singular_values = np.sort(svdvals(k_delta.entries))[::-1]
    levels = level_array(k_delta.max_level)
    if singular_values[-1] <= 0:
        raise SingularOperatorError(singular_values[-1], singular_values[0])

    log_means = {int(lev): float(np.mean(np.log(singular_values[levels == lev])))
                 for lev in np.unique(levels)}
    return {lev: float(np.exp(log_means[j0] - m)) for lev, m in log_means.items()}


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _zero_estimate(max_level, diagnostics):
    return Estimate(f=CoeffVector.zeros(max_level), cutoff_triggered=True,
                    diagnostics=diagnostics)


def _embed(solution, max_level):
    values = np.zeros(2 ** (max_level + 1))
    values[:solution.size] = solution
    return CoeffVector(max_level, values)


def linear_galerkin(observation, spec):
    """
    Linear Galerkin estimator K_{delta,j}^-1 P_j g_eps with optional cut-off.

    Args:
        observation (Observation): the data pair
        spec (LinearSpec): level, t and cut-off

    Returns:
        Estimate: zero with cutoff_triggered when ||K_{delta,j}^-1|| > tau 2^(jt)

    Raises:
        SingularOperatorError: if K_{delta,j} is singular and no cut-off is set
    """
    max_level = observation.max_level
    if spec.j > max_level:
        raise ValueError(f"Level {spec.j} exceeds the observation level {max_level}")

    sub = galerkin_submatrix(observation.k_delta, spec.j)
    singular_values = svdvals(sub.entries)
    spec_norm, min_sv = float(singular_values.max()), float(singular_values.min())
    inv_norm = np.inf if min_sv == 0 else 1.0 / min_sv

    diagnostics = {
        'used_level': spec.j,
        'kept_coefficient_count': 0,
        'kept_operator_entry_count': int(np.count_nonzero(sub.entries)),
        'inv_norm': float(inv_norm),
    }

    singular = spec_norm == 0 or min_sv <= SINGULAR_RTOL * spec_norm
    if spec.tau is not None and (singular or inv_norm > spec.tau * 2.0 ** (spec.j * spec.t)):
        return _zero_estimate(max_level, diagnostics)
    if singular:
        raise SingularOperatorError(min_sv, spec_norm)

    rhs = project_level(observation.g, spec.j).values[:sub.size]
    solution = solve(sub.entries, rhs)
    diagnostics['kept_coefficient_count'] = int(np.count_nonzero(solution))
    return Estimate(f=_embed(solution, max_level), diagnostics=diagnostics)


def nl1_estimate(observation, spec):
    """
    Nonlinear Estimation I: threshold the linear estimate at level j1.

    Args:
        observation (Observation): the data pair
        spec (NL1Spec): estimator parameters

    Returns:
        Estimate: thresholded estimate
    """
    pilot = linear_galerkin(observation, LinearSpec(j=spec.j1, t=spec.t, tau=spec.tau))
    if pilot.cutoff_triggered:
        return pilot

    x = max(observation.delta, observation.epsilon)
    if spec.threshold_mode == 'empirical_decay':
        sub = galerkin_submatrix(observation.k_delta, spec.j1)
        factors = empirical_level_factors(sub, spec.j0)
        thresholded = threshold_level_dependent(pilot.f, x, spec.kappa, spec.t, spec.j0,
                                                spec.j1, level_factors=factors,
                                                correction=False)
    else:
        thresholded = threshold_level_dependent(pilot.f, x, spec.kappa, spec.t, spec.j0,
                                                spec.j1)

    diagnostics = dict(pilot.diagnostics)
    diagnostics['kept_coefficient_count'] = int(np.count_nonzero(thresholded.values))
    return Estimate(f=thresholded, diagnostics=diagnostics)


def nl2_estimate(observation, spec):
    """
    Nonlinear Estimation II: threshold operator and data, then invert on V_J.

    Args:
        observation (Observation): the data pair
        spec (NL2Spec): estimator parameters

    Returns:
        Estimate: zero with cutoff_triggered when ||K_hat^-1||_{H^t -> L2} > tau

    Raises:
        SingularOperatorError: if the thresholded matrix is singular and no cut-off is set
    """
    max_level = observation.max_level
    if spec.J > max_level:
        raise ValueError(f"Level {spec.J} exceeds the observation level {max_level}")

    sub = galerkin_submatrix(observation.k_delta, spec.J)
    if observation.delta > 0:
        k_hat, kept_entries = threshold_operator_entries(sub, observation.delta, spec.kappa_op)
    else:
        k_hat, kept_entries = sub, int(np.count_nonzero(sub.entries))

    if observation.epsilon > 0:
        g_hat = threshold_data(observation.g, observation.epsilon, spec.kappa_data, spec.J)
    else:
        g_hat = project_level(observation.g, spec.J)

    diagnostics = {
        'used_level': spec.J,
        'kept_coefficient_count': int(np.count_nonzero(g_hat.values)),
        'kept_operator_entry_count': kept_entries,
        'inv_norm': float('inf'),
    }

    try:
        norms = operator_norms(k_hat, spec.t)
    except SingularOperatorError:
        if spec.tau is not None:
            return _zero_estimate(max_level, diagnostics)
        raise
    diagnostics['inv_norm'] = norms['inv_norm']

    if spec.tau is not None and norms['inv_ht_norm'] > spec.tau:
        return _zero_estimate(max_level, diagnostics)

    solution = solve(k_hat.entries, g_hat.values[:k_hat.size])
    return Estimate(f=_embed(solution, max_level), diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Data-driven level choice
# ---------------------------------------------------------------------------

def select_level(kd_builder, delta, c, j_cap, sqrt_dim=False):
    """
    Sequential rule J = min{j >= 0 : lambda_min(K_{delta,j+1}) < c delta dim(V_{j+1})}.

    Args:
        kd_builder (callable): j -> GalerkinMatrix of the noisy operator on V_j
        delta (float): operator noise level, > 0
        c (float): rule constant, > 0
        j_cap (int): returned when no level triggers below it
        sqrt_dim (bool): compare against c delta sqrt(dim) instead

    Returns:
        int: the chosen level J
    """
    if delta <= 0 or c <= 0:
        raise ValueError(f"Rule needs delta > 0 and c > 0, got delta={delta}, c={c}")

    for j in range(max(j_cap, 0)):
        entries = kd_builder(j + 1).entries
        lambda_min = eigvalsh(0.5 * (entries + entries.T))[0]
        dim = 2.0 ** (j + 2)
        bound = c * delta * (np.sqrt(dim) if sqrt_dim else dim)
        if lambda_min < bound:
            logger.debug("Level rule stopped at J=%d (lambda_min=%.3e < %.3e)",
                         j, lambda_min, bound)
            return j
    return j_cap


def select_level_for(observation, c=5.0, j_cap=None, sqrt_dim=False):
    """Apply select_level to the noisy operator of an observation."""
    if j_cap is None:
        j_cap = observation.max_level
    if j_cap > observation.max_level:
        raise ValueError(f"j_cap {j_cap} exceeds the observation level {observation.max_level}")
    return select_level(lambda j: galerkin_submatrix(observation.k_delta, j),
                        observation.delta, c, j_cap, sqrt_dim=sqrt_dim)
