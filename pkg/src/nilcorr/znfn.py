"""Windowed complex sequences, functions on Z_N, and Cesaro averaging.

Everything downstream (uniformity norms, correlation sequences, the
decomposition experiments) consumes the two containers defined here:
``ZnFunction`` for cyclic-group data and ``SampledSequence`` for a complex
sequence sampled on an integer window.  The averaging estimators treat the
"uniform Cesaro limit" (limit of window averages as the window length grows,
uniformly in the offset) as a finite family of window averages whose spread
is reported as ``fluctuation``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError, WindowError

# Default window ladder used when estimating uniform Cesaro limits:
# geometric lengths, several staggered offsets per length.
DEFAULT_LADDER_LENGTHS = (2**10, 2**12, 2**14)
DEFAULT_OFFSETS_PER_LENGTH = 4


def _as_complex_vector(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValidationError("values must be one-dimensional")
    if arr.size == 0:
        raise ValidationError("values must be nonempty")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValidationError("values must be finite (no NaN/Inf)")
    return arr


@dataclass(frozen=True)
class ZnFunction:
    """A function Z_N -> C stored as values at residues 0..N-1."""

    modulus: int
    values: np.ndarray

    def __post_init__(self):
        if self.modulus < 1:
            raise ValidationError("modulus must be a positive integer")
        arr = _as_complex_vector(self.values)
        if arr.size != self.modulus:
            raise ValidationError(
                f"expected {self.modulus} values, got {arr.size}"
            )
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_function(cls, modulus: int, fn) -> "ZnFunction":
        ns = np.arange(modulus)
        return cls(modulus, np.asarray([fn(int(n)) for n in ns]))


@dataclass(frozen=True)
class SampledSequence:
    """Samples of a complex sequence at positions start..start+len-1."""

    start: int
    values: np.ndarray

    def __post_init__(self):
        if self.start < 0:
            raise ValidationError("start must be >= 0")
        object.__setattr__(self, "values", _as_complex_vector(self.values))

    @property
    def end(self) -> int:
        """One past the last sampled position."""
        return self.start + self.values.size

    def covers(self, lo: int, hi: int) -> bool:
        """Whether every position in [lo, hi) is sampled."""
        return lo >= self.start and hi <= self.end and hi > lo

    def window(self, lo: int, hi: int) -> np.ndarray:
        if not self.covers(lo, hi):
            raise WindowError(
                f"window [{lo}, {hi}) outside sampled range "
                f"[{self.start}, {self.end})"
            )
        return self.values[lo - self.start : hi - self.start]

    def value_at(self, n: int) -> complex:
        if not (self.start <= n < self.end):
            raise WindowError(f"position {n} outside [{self.start}, {self.end})")
        return complex(self.values[n - self.start])

    @classmethod
    def from_function(cls, fn, start: int, length: int) -> "SampledSequence":
        ns = np.arange(start, start + length)
        return cls(start, np.asarray([fn(int(n)) for n in ns]))


@dataclass(frozen=True)
class AverageEstimate:
    """A window-averaged estimate of a uniform Cesaro limit.

    ``fluctuation`` is the largest pairwise deviation among the tested
    window averages; a limit that exists forces it to zero as windows grow.
    """

    value: complex
    fluctuation: float
    windows_tested: list = field(default_factory=list)

    def __post_init__(self):
        if self.fluctuation < 0:
            raise ValidationError("fluctuation must be nonnegative")
        if not self.windows_tested:
            raise ValidationError("windows_tested must be nonempty")


def cesaro_average(seq: SampledSequence, window: tuple[int, int]) -> complex:
    """Average of seq over [M, N): (1/(N-M)) * sum_{n=M}^{N-1} seq(n)."""
    lo, hi = window
    if hi <= lo:
        raise WindowError(f"empty window [{lo}, {hi})")
    return complex(np.mean(seq.window(lo, hi)))


def _estimate_from_windows(seq, windows) -> AverageEstimate:
    averages = [cesaro_average(seq, w) for w in windows]
    arr = np.asarray(averages)
    fluct = 0.0
    if arr.size > 1:
        fluct = float(np.max(np.abs(arr[:, None] - arr[None, :])))
    return AverageEstimate(
        value=complex(np.mean(arr)),
        fluctuation=fluct,
        windows_tested=list(windows),
    )


def uniform_cesaro_estimate(
    seq: SampledSequence, min_len: int, num_windows: int
) -> AverageEstimate:
    """Probe the uniform Cesaro limit with staggered windows of one length.

    ``num_windows`` windows of length ``min_len`` are placed at evenly
    staggered offsets across the sampled range.  The value is the mean of
    the window averages and the fluctuation their maximal spread.
    """
    if min_len < 1 or num_windows < 1:
        raise ValidationError("min_len and num_windows must be >= 1")
    total = seq.values.size
    slack = total - min_len
    if slack < 0 or (num_windows > 1 and slack < num_windows - 1):
        raise WindowError(
            f"sequence of length {total} too short for {num_windows} "
            f"staggered windows of length {min_len}"
        )
    if num_windows == 1:
        starts = [0]
    else:
        starts = [(i * slack) // (num_windows - 1) for i in range(num_windows)]
    windows = [(seq.start + s, seq.start + s + min_len) for s in starts]
    return _estimate_from_windows(seq, windows)


def uniform_cesaro_ladder(
    seq: SampledSequence,
    lengths: tuple[int, ...] = DEFAULT_LADDER_LENGTHS,
    offsets_per_length: int = DEFAULT_OFFSETS_PER_LENGTH,
) -> AverageEstimate:
    """Pool window averages across a geometric ladder of window lengths.

    Ladder levels longer than the available data are dropped; at least one
    level must fit.  Used by the decomposition reports, where large
    fluctuation flags a Cesaro average that has not settled.
    """
    total = seq.values.size
    usable = [L for L in lengths if L <= total]
    if not usable:
        usable = [total]
    windows = []
    for L in usable:
        slack = total - L
        k = min(offsets_per_length, slack + 1)
        if k <= 1:
            starts = [0]
        else:
            starts = sorted({(i * slack) // (k - 1) for i in range(k)})
        windows.extend((seq.start + s, seq.start + s + L) for s in starts)
    return _estimate_from_windows(seq, windows)


def l1_window_distance(
    a: SampledSequence, b: SampledSequence, window: tuple[int, int]
) -> float:
    """Mean of |a(n) - b(n)| over [M, N)."""
    lo, hi = window
    if hi <= lo:
        raise WindowError(f"empty window [{lo}, {hi})")
    return float(np.mean(np.abs(a.window(lo, hi) - b.window(lo, hi))))
