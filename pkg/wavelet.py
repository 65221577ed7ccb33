"""
wavelet.py - Periodized orthogonal wavelet machinery on [0, 1)

Coefficient vectors are stored level-major: the single scaling coefficient
(level -1) first, then level 0 (one wavelet), level 1 (two wavelets), ...
so that the first 2^(j+1) entries span V_j.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pywt

ORTHONORMALITY_TOL = 1e-12


@dataclass(frozen=True)
class MultiIndex:
    """Wavelet label lambda = (j, k); level -1 is the scaling function."""
    level: int
    position: int = 0

    def __post_init__(self):
        if self.level < -1:
            raise ValueError(f"Level must be >= -1, got {self.level}")
        if self.level == -1 and self.position != 0:
            raise ValueError("The scaling coefficient only has position 0")
        if not 0 <= self.position < 2 ** max(self.level, 0):
            raise ValueError(
                f"Position {self.position} out of range for level {self.level}"
            )

    def flat(self):
        """Index of this label in the level-major coefficient layout."""
        if self.level == -1:
            return 0
        return 2 ** self.level + self.position

    @classmethod
    def from_flat(cls, index):
        if index < 0:
            raise ValueError(f"Flat index must be nonnegative, got {index}")
        if index == 0:
            return cls(-1, 0)
        level = int(index).bit_length() - 1
        return cls(level, index - 2 ** level)


@dataclass(frozen=True)
class WaveletFilter:
    """
    Orthogonal wavelet filter.

    Attributes:
        family (str): 'daubechies' or 'haar'
        order (int): number of vanishing moments (1 for Haar)
        taps (tuple): lowpass decomposition taps
    """
    family: str
    order: int
    taps: tuple

    @property
    def name(self):
        return 'haar' if self.family == 'haar' else f"db{self.order}"

    @property
    def support(self):
        return len(self.taps)

    @property
    def wavelet(self):
        return pywt.Wavelet(self.name)


def check_orthonormality(taps, tol=ORTHONORMALITY_TOL):
    """
    Check sum_n h_n h_{n-2m} = delta_{m,0} and sum_n h_n = sqrt(2).

    Args:
        taps (array-like): lowpass filter taps
        tol (float): absolute tolerance

    Returns:
        bool: True when both conditions hold
    """
    h = np.asarray(taps, dtype=float)
    if abs(h.sum() - np.sqrt(2.0)) > tol:
        return False
    for m in range(len(h) // 2 + 1):
        inner = np.dot(h[2 * m:], h[:len(h) - 2 * m])
        target = 1.0 if m == 0 else 0.0
        if abs(inner - target) > tol:
            return False
    return True


def get_filter(family='daubechies', order=8):
    """
    Build a WaveletFilter from the PyWavelets tables.

    Args:
        family (str): 'daubechies' or 'haar'
        order (int): Daubechies order (ignored for Haar)

    Returns:
        WaveletFilter: validated filter
    """
    family = family.lower()
    if family == 'haar':
        order = 1
    elif family != 'daubechies':
        raise ValueError(f"Unknown wavelet family '{family}'")
    if order < 1:
        raise ValueError(f"Daubechies order must be >= 1, got {order}")

    name = 'haar' if family == 'haar' else f"db{order}"
    try:
        taps = tuple(float(x) for x in pywt.Wavelet(name).dec_lo)
    except ValueError as e:
        raise ValueError(f"Wavelet '{name}' is not available: {e}") from e

    if not check_orthonormality(taps):
        raise ValueError(f"Taps of '{name}' fail the orthonormality check")
    return WaveletFilter(family=family, order=order, taps=taps)


@lru_cache(maxsize=None)
def _level_array(max_level):
    levels = np.empty(2 ** (max_level + 1), dtype=int)
    levels[0] = -1
    for j in range(max_level + 1):
        levels[2 ** j:2 ** (j + 1)] = j
    levels.setflags(write=False)
    return levels


def level_array(max_level):
    """Level |lambda| of every flattened index up to max_level."""
    if max_level < -1:
        raise ValueError(f"max_level must be >= -1, got {max_level}")
    return _level_array(int(max_level))


def sobolev_weights(max_level, s):
    """Per-index weights 2^(max(|lambda|, 0) s); level -1 is weighted as level 0."""
    return 2.0 ** (np.maximum(level_array(max_level), 0) * s)


@dataclass(frozen=True, eq=False)
class CoeffVector:
    """
    Function on [0, 1) given by its L2-normalized wavelet coefficients.

    Attributes:
        max_level (int): finest level J_max held in the vector
        values (np.ndarray): 2^(J_max+1) coefficients, level-major, read-only
    """
    max_level: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != 2 ** (self.max_level + 1):
            raise ValueError(
                f"Expected {2 ** (self.max_level + 1)} coefficients for level "
                f"{self.max_level}, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __eq__(self, other):
        if not isinstance(other, CoeffVector):
            return NotImplemented
        return (self.max_level == other.max_level
                and np.array_equal(self.values, other.values))

    @property
    def levels(self):
        return level_array(self.max_level)

    def level_values(self, j):
        """Coefficients of a single level (level -1 is the scaling coefficient)."""
        if j == -1:
            return self.values[:1]
        return self.values[2 ** j:2 ** (j + 1)]

    def norm(self):
        return float(np.linalg.norm(self.values))

    def __getitem__(self, index):
        if isinstance(index, MultiIndex):
            index = index.flat()
        return float(self.values[index])

    @classmethod
    def zeros(cls, max_level):
        return cls(max_level, np.zeros(2 ** (max_level + 1)))

    @classmethod
    def unit(cls, index, max_level):
        values = np.zeros(2 ** (max_level + 1))
        values[index.flat()] = 1.0
        return cls(max_level, values)


def grid_points(max_level):
    """Cell midpoints (m + 1/2) h of the finest grid, h = 2^-(J_max+1)."""
    n = 2 ** (max_level + 1)
    return (np.arange(n) + 0.5) / n


def sample_function(func, max_level):
    """Evaluate func on the midpoint grid and pre-scale by sqrt(h)."""
    x = grid_points(max_level)
    return np.sqrt(1.0 / x.size) * np.asarray(func(x), dtype=float)


def _check_length(n, wavelet_filter):
    if n < 2 or n & (n - 1):
        raise ValueError(f"Length must be a power of two, got {n}")
    if n < wavelet_filter.support:
        raise ValueError(
            f"Length {n} is smaller than the filter support {wavelet_filter.support}"
        )


def _split_levels(values, axis=-1):
    """Cut a level-major array into the list pywt.waverec expects."""
    n = values.shape[axis]
    return np.split(values, [2 ** j for j in range(int(np.log2(n)))], axis=axis)


def _wavedec(data, wavelet_filter, axis=-1):
    n = data.shape[axis]
    with warnings.catch_warnings():
        # level exceeds pywt.dwt_max_level for long filters; periodization allows it
        warnings.simplefilter('ignore', UserWarning)
        coeffs = pywt.wavedec(data, wavelet_filter.wavelet, mode='periodization',
                              level=int(np.log2(n)), axis=axis)
    return np.concatenate(coeffs, axis=axis)


def _waverec(values, wavelet_filter, axis=-1):
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', UserWarning)
        return pywt.waverec(_split_levels(values, axis=axis), wavelet_filter.wavelet,
                            mode='periodization', axis=axis)


def dwt(samples, wavelet_filter):
    """
    Periodized Mallat pyramid down to the single scaling coefficient.

    Args:
        samples (array-like): 2^(J_max+1) grid values already scaled by sqrt(h)
        wavelet_filter (WaveletFilter): orthogonal filter

    Returns:
        CoeffVector: coefficients at max level J_max
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1:
        raise ValueError(f"Samples must be one-dimensional, got shape {samples.shape}")
    _check_length(samples.size, wavelet_filter)
    max_level = int(np.log2(samples.size)) - 1
    return CoeffVector(max_level, _wavedec(samples, wavelet_filter))


def idwt(coeffs, wavelet_filter):
    """
    Inverse pyramid: coefficients back to sqrt(h)-scaled grid samples.

    Args:
        coeffs (CoeffVector): wavelet coefficients
        wavelet_filter (WaveletFilter): the filter used by dwt

    Returns:
        np.ndarray: 2^(J_max+1) samples
    """
    _check_length(coeffs.values.size, wavelet_filter)
    return np.asarray(_waverec(coeffs.values, wavelet_filter))


def dwt_matrix(entries, wavelet_filter):
    """
    Transform a fine-grid matrix to wavelet coordinates (rows, then columns).

    Args:
        entries (np.ndarray): square matrix on the finest scaling basis
        wavelet_filter (WaveletFilter): orthogonal filter

    Returns:
        np.ndarray: T A T^T where T is the orthogonal DWT matrix
    """
    entries = np.asarray(entries, dtype=float)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {entries.shape}")
    _check_length(entries.shape[0], wavelet_filter)
    rows = _wavedec(entries, wavelet_filter, axis=1)
    return _wavedec(rows, wavelet_filter, axis=0)


def basis_functions(max_level, wavelet_filter):
    """
    Sampled basis functions: row i holds sqrt(h) * psi_i on the midpoint grid.

    Args:
        max_level (int): finest level J_max
        wavelet_filter (WaveletFilter): orthogonal filter

    Returns:
        np.ndarray: (2^(J_max+1), 2^(J_max+1)) array
    """
    n = 2 ** (max_level + 1)
    _check_length(n, wavelet_filter)
    return np.asarray(_waverec(np.eye(n), wavelet_filter, axis=1))


def project_level(coeffs, j):
    """
    Orthogonal projection P_j onto V_j: zero every coefficient with |lambda| > j.

    Args:
        coeffs (CoeffVector): coefficients
        j (int): target level, -1 <= j <= max_level

    Returns:
        CoeffVector: projected coefficients at the same max level
    """
    if not -1 <= j <= coeffs.max_level:
        raise ValueError(f"Level {j} outside [-1, {coeffs.max_level}]")
    values = coeffs.values.copy()
    values[2 ** (j + 1):] = 0.0
    return CoeffVector(coeffs.max_level, values)


def besov_norm(coeffs, s, p, d=1):
    """
    Equivalent B^s_{p,p} norm through weighted l^p sums of coefficients.

    Args:
        coeffs (CoeffVector): coefficients
        s (float): smoothness
        p (float): integrability, p >= 1
        d (int): dimension (only d = 1 is represented)

    Returns:
        float: (sum_j 2^(j(s + d/2 - d/p)p) sum_k |c_jk|^p)^(1/p)
    """
    if p < 1:
        raise ValueError(f"Besov norms need p >= 1, got {p}")
    if d != 1:
        raise ValueError(f"Only d = 1 is supported, got d = {d}")
    if not np.all(np.isfinite(coeffs.values)):
        raise ValueError("Coefficients must be finite")

    levels = np.maximum(coeffs.levels, 0)
    exponent = levels * (s + d / 2.0 - d / p) * p
    total = np.sum(2.0 ** exponent * np.abs(coeffs.values) ** p)
    return float(total ** (1.0 / p))
