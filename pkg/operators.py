"""
operators.py - Galerkin matrices of integral operators in the wavelet basis

Matrices are stored so that entries[i, k] = <T psi_k, psi_i> with i, k running
over the level-major flat index; `entries @ f.values` gives the coefficients of Tf.
"""

import json
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import circulant, eigvalsh, svdvals

from wavelet import dwt_matrix, grid_points, level_array, sobolev_weights

logger = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-12
KERNEL_KINDS = ('log_potential', 'diagonal', 'custom')


class SingularOperatorError(RuntimeError):
    """Raised when a Galerkin matrix is numerically singular."""

    def __init__(self, min_sv, spec, message=None):
        self.min_sv = float(min_sv)
        self.spec = float(spec)
        super().__init__(
            message or f"Matrix is numerically singular "
                       f"(min singular value {self.min_sv:.3e}, norm {self.spec:.3e})"
        )


@dataclass(frozen=True)
class KernelSpec:
    """
    Integral kernel description.

    Attributes:
        kind (str): 'log_potential', 'diagonal' or 'custom'
        t (float): degree of ill-posedness (decay exponent for 'diagonal')
        kernel (callable): k(x, y) on arrays, only for 'custom'
    """
    kind: str = 'log_potential'
    t: float = 1.0
    kernel: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"Unknown kernel kind '{self.kind}', expected one of {KERNEL_KINDS}")
        if self.kind == 'custom' and self.kernel is None:
            raise ValueError("A custom kernel needs a kernel function")
        if self.kind == 'diagonal' and self.t <= 0:
            raise ValueError(f"Diagonal kernels need t > 0, got {self.t}")


@dataclass(frozen=True, eq=False)
class GalerkinMatrix:
    """
    Stiffness matrix of an operator on V_J.

    Attributes:
        max_level (int): J, the matrix has 2^(J+1) rows
        entries (np.ndarray): read-only square matrix in flat index order
        illposedness (float): degree t the operator is declared to have
        kind (str): where the matrix came from
    """
    max_level: int
    entries: np.ndarray
    illposedness: float = 0.0
    kind: str = 'custom'

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        n = 2 ** (self.max_level + 1)
        if entries.shape != (n, n):
            raise ValueError(
                f"Expected a {n}x{n} matrix for level {self.max_level}, got {entries.shape}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @property
    def size(self):
        return self.entries.shape[0]

    def apply(self, coeffs):
        return self.entries @ np.asarray(coeffs, dtype=float)


def log_potential_kernel(x, y):
    """k(x, y) = -log(|sin(pi (x - y))| / 2)."""
    return -np.log(0.5 * np.abs(np.sin(np.pi * (np.asarray(x) - np.asarray(y)))))


def _check_max_level(max_level, wavelet_filter, minimum=0):
    if max_level < minimum:
        raise ValueError(f"max_level must be >= {minimum}, got {max_level}")
    if 2 ** (max_level + 1) < wavelet_filter.support:
        raise ValueError(
            f"max_level {max_level} gives {2 ** (max_level + 1)} grid cells, fewer than "
            f"the support {wavelet_filter.support} of {wavelet_filter.name}"
        )


def build_log_potential(max_level, wavelet_filter):
    """
    Single-layer logarithmic potential on the periodic interval.

    Args:
        max_level (int): finest level J_max (>= 3)
        wavelet_filter (WaveletFilter): orthogonal filter

    Returns:
        GalerkinMatrix: symmetric stiffness matrix, t = 1
    """
    _check_max_level(max_level, wavelet_filter, minimum=3)
    n = 2 ** (max_level + 1)
    h = 1.0 / n

    # Midpoint rule off the diagonal, analytic cell integral on it
    column = np.empty(n)
    column[1:] = h * log_potential_kernel(np.arange(1, n) * h, 0.0)
    column[0] = h * (1.5 - np.log(np.pi * h / 2.0))
    fine = circulant(column)

    entries = dwt_matrix(fine, wavelet_filter)
    entries = 0.5 * (entries + entries.T)
    logger.debug("Built log-potential operator at J_max=%d (%dx%d)", max_level, n, n)
    return GalerkinMatrix(max_level, entries, illposedness=1.0, kind='log_potential')


def build_diagonal(t, max_level):
    """
    Diagonal fixture K0 = diag(2^(-(|lambda|+1) t)).

    Args:
        t (float): degree of ill-posedness, t > 0
        max_level (int): finest level J_max

    Returns:
        GalerkinMatrix: diagonal matrix
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if max_level < -1:
        raise ValueError(f"max_level must be >= -1, got {max_level}")
    levels = level_array(max_level)
    entries = np.diag(2.0 ** (-(levels + 1) * t))
    return GalerkinMatrix(max_level, entries, illposedness=t, kind='diagonal')


def build_kernel_matrix(kernel, max_level, wavelet_filter, t=0.0):
    """
    Midpoint-rule discretization h * k(x_m, x_n) of an arbitrary kernel.

    Args:
        kernel (callable): k(x, y), vectorized over numpy arrays
        max_level (int): finest level J_max
        wavelet_filter (WaveletFilter): orthogonal filter
        t (float): declared degree of ill-posedness

    Returns:
        GalerkinMatrix: stiffness matrix in wavelet coordinates
    """
    _check_max_level(max_level, wavelet_filter)
    x = grid_points(max_level)
    fine = np.asarray(kernel(x[:, None], x[None, :]), dtype=float) / x.size
    if not np.all(np.isfinite(fine)):
        raise ValueError("Kernel produced non-finite values on the midpoint grid")
    return GalerkinMatrix(max_level, dwt_matrix(fine, wavelet_filter),
                          illposedness=t, kind='custom')


def build_operator(kernel_spec, max_level, wavelet_filter):
    """Dispatch on the kernel kind."""
    if kernel_spec.kind == 'log_potential':
        return build_log_potential(max_level, wavelet_filter)
    if kernel_spec.kind == 'diagonal':
        return build_diagonal(kernel_spec.t, max_level)
    return build_kernel_matrix(kernel_spec.kernel, max_level, wavelet_filter,
                               t=kernel_spec.t)


def add_operator_noise(operator, delta, seed):
    """
    Blur an operator with Gaussian operator white noise.

    Args:
        operator (GalerkinMatrix): exact matrix K
        delta (float): noise level, >= 0
        seed (int or np.random.SeedSequence): noise seed

    Returns:
        GalerkinMatrix: K + delta * Xi with i.i.d. N(0, 1) entries
    """
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if delta == 0:
        return operator
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(operator.entries.shape)
    return GalerkinMatrix(operator.max_level, operator.entries + delta * noise,
                          illposedness=operator.illposedness, kind=operator.kind)


def galerkin_submatrix(operator, j):
    """
    Galerkin projection P_j K restricted to V_j.

    Args:
        operator (GalerkinMatrix): matrix at level J
        j (int): target level, -1 <= j <= J

    Returns:
        GalerkinMatrix: the leading 2^(j+1) block
    """
    if not -1 <= j <= operator.max_level:
        raise ValueError(f"Level {j} outside [-1, {operator.max_level}]")
    if j == operator.max_level:
        return operator
    n = 2 ** (j + 1)
    return GalerkinMatrix(j, operator.entries[:n, :n],
                          illposedness=operator.illposedness, kind=operator.kind)


def _check_invertible(singular_values):
    spec = float(singular_values.max())
    min_sv = float(singular_values.min())
    if spec == 0.0 or min_sv <= SINGULAR_RTOL * spec:
        raise SingularOperatorError(min_sv, spec)
    return spec, min_sv


def operator_norms(operator, t):
    """
    Spectral quantities of a Galerkin matrix.

    Args:
        operator (GalerkinMatrix): square matrix
        t (float): smoothing degree for the H^t -> L2 inverse norm

    Returns:
        dict: spec, min_sv, min_eig, inv_norm, inv_ht_norm

    Raises:
        SingularOperatorError: if the matrix is numerically singular
    """
    entries = operator.entries
    spec, min_sv = _check_invertible(svdvals(entries))
    min_eig = float(eigvalsh(0.5 * (entries + entries.T))[0])

    # ||K^-1 D_-t|| = 1 / sigma_min(D_t K)
    weights = sobolev_weights(operator.max_level, t)
    weighted = svdvals(weights[:, None] * entries)
    inv_ht_norm = 1.0 / float(weighted.min())

    return {
        'spec': spec,
        'min_sv': min_sv,
        'min_eig': min_eig,
        'inv_norm': 1.0 / min_sv,
        'inv_ht_norm': inv_ht_norm,
    }


def mapping_constant(operator, t):
    """
    Finite-level mapping constant max_{0<=j<=J} 2^(-jt) ||K_j^-1||.

    Args:
        operator (GalerkinMatrix): matrix at level J
        t (float): degree of ill-posedness

    Returns:
        float: the mapping constant

    Raises:
        SingularOperatorError: if any Galerkin submatrix is singular
    """
    constant = 0.0
    for j in range(operator.max_level + 1):
        sub = galerkin_submatrix(operator, j)
        _, min_sv = _check_invertible(svdvals(sub.entries))
        constant = max(constant, 2.0 ** (-j * t) / min_sv)
    return constant


def save_operator(operator, path):
    """
    Write a matrix as one JSON header line followed by row-major float64 bytes.

    Args:
        operator (GalerkinMatrix): matrix to write
        path (str or Path): destination file
    """
    header = {
        'max_level': operator.max_level,
        't': operator.illposedness,
        'kind': operator.kind,
        'shape': list(operator.entries.shape),
    }
    with open(path, 'wb') as f:
        f.write((json.dumps(header) + '\n').encode('utf-8'))
        f.write(np.ascontiguousarray(operator.entries, dtype='<f8').tobytes())


def load_operator(path):
    """Read a matrix written by save_operator."""
    with open(path, 'rb') as f:
        header = json.loads(f.readline().decode('utf-8'))
        payload = f.read()
    shape = tuple(header['shape'])
    entries = np.frombuffer(payload, dtype='<f8')
    if entries.size != shape[0] * shape[1]:
        raise ValueError(
            f"Operator file {path} holds {entries.size} values, header says {shape}"
        )
    return GalerkinMatrix(header['max_level'], entries.reshape(shape),
                          illposedness=header['t'], kind=header['kind'])
