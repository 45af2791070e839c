"""Gowers uniformity norms on Z_N and truncated seminorms on N.

The exact U^k norm is evaluated by iterated multiplicative differencing,
which reproduces the parallelepiped-average definition algebraically while
costing O(N^k) instead of O(N^{k+1}); a brute-force expansion of the
definition is kept in the test suite as an independent oracle.  The U^2
norm also has an O(N log N) fast path through the fourth moment of the
Fourier coefficients, used as a cross-check oracle for the exact path.

Truncated interval versions (``uniformity_seminorm_n``) stand in for the
double-limit seminorm of a sequence on N; truncation parameters are always
explicit arguments, never hidden defaults.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    NumericsError,
    ResourceError,
    ShapeError,
    ValidationError,
)
from .znfn import SampledSequence, ZnFunction

DEFAULT_EXACT_BUDGET = 10**9

#: Below this magnitude a negative real part of a structurally nonnegative
#: average is treated as rounding noise and clamped to zero.
ROUNDING_TOL = 1e-9


@dataclass(frozen=True)
class GowersConfig:
    """Degree and evaluation policy for Gowers norms on Z_N."""

    k: int = 2
    mode: str = "exact"  # "exact" | "sampled"
    sample_count: int = 10_000
    rng_seed: int = 0
    budget: int = DEFAULT_EXACT_BUDGET

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("degree k must be >= 1")
        if self.mode not in ("exact", "sampled"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled" and self.sample_count < 1:
            raise ValidationError("sample_count must be >= 1 in sampled mode")


def _root_nonneg(inner: float, k: int, strict: bool) -> float:
    """2^k-th root of an average that should be nonnegative.

    strict=True: a real part below -ROUNDING_TOL indicates a bug, not
    rounding, and raises.  strict=False: finite truncation legitimately
    produces small negatives; clamp silently.
    """
    if strict and inner < -ROUNDING_TOL:
        raise NumericsError(
            f"structurally nonnegative average came out {inner}"
        )
    return float(max(inner, 0.0) ** (1.0 / 2**k))


def _shift_index(n: int) -> np.ndarray:
    """idx[h, j] = (h + j) mod n, so values[idx][h] is the h-shift."""
    r = np.arange(n)
    return (r[:, None] + r[None, :]) % n


def _cyclic_power(values: np.ndarray, k: int) -> float:
    """E_{n,h} prod_eta C^{|eta|} f(n+eta.h) via multiplicative derivatives.

    Uses ||f||^{2^k} = E_h ||D_h f||^{2^{k-1}} with D_h f(n) = f(n+h)conj(f(n)).
    """
    n = values.size
    if k == 1:
        return float(abs(np.mean(values)) ** 2)
    if k == 2:
        shifted = values[_shift_index(n)]  # rows: h-shifts of f
        corr = (shifted @ np.conj(values)) / n  # corr[h] = E_n f(n+h)conj f(n)
        return float(np.mean(np.abs(corr) ** 2))
    rows = values[_shift_index(n)] * np.conj(values)[None, :]
    return float(np.mean([_cyclic_power(rows[h], k - 1) for h in range(n)]))


def gowers_norm_zn(f: ZnFunction, cfg: GowersConfig) -> float:
    """U^k(Z_N) norm of f (k=1 gives the seminorm |mean f|)."""
    if cfg.mode == "sampled":
        value, _ = gowers_norm_zn_sampled(f, cfg)
        return value
    if f.modulus ** (cfg.k + 1) > cfg.budget:
        raise ResourceError(
            f"exact U^{cfg.k} on Z_{f.modulus} needs ~N^(k+1)="
            f"{f.modulus ** (cfg.k + 1)} operations, over budget {cfg.budget}"
        )
    return _root_nonneg(_cyclic_power(f.values, cfg.k), cfg.k, strict=True)


def gowers_norm_zn_sampled(
    f: ZnFunction, cfg: GowersConfig
) -> tuple[float, float]:
    """Monte-Carlo estimate of the U^k norm: (value, stderr of inner mean)."""
    n = f.modulus
    rng = np.random.default_rng(cfg.rng_seed)
    base = rng.integers(0, n, size=cfg.sample_count)
    shifts = rng.integers(0, n, size=(cfg.sample_count, cfg.k))
    prod = np.ones(cfg.sample_count, dtype=np.complex128)
    for eta in itertools.product((0, 1), repeat=cfg.k):
        idx = (base + shifts @ np.asarray(eta)) % n
        term = f.values[idx]
        if sum(eta) % 2:
            term = np.conj(term)
        prod *= term
    inner = prod.real  # exact inner average is real; imag part is MC noise
    mean = float(np.mean(inner))
    stderr = 0.0
    if cfg.sample_count > 1:
        stderr = float(np.std(inner, ddof=1) / np.sqrt(cfg.sample_count))
    return _root_nonneg(mean, cfg.k, strict=False), stderr


def gowers_norm_u2_fft(f: ZnFunction) -> float:
    """U^2(Z_N) norm through the identity ||f||_{U^2}^4 = sum |fhat|^4."""
    coeffs = np.fft.fft(f.values) / f.modulus
    return float(np.sum(np.abs(coeffs) ** 4) ** 0.25)


@dataclass(frozen=True)
class CsgResult:
    lhs: float
    rhs: float
    holds: bool


def _family_values(family, k: int) -> tuple[int, dict]:
    keys = set(itertools.product((0, 1), repeat=k))
    if set(family.keys()) != keys:
        raise ShapeError(f"family must be indexed by all of {{0,1}}^{k}")
    moduli = {fn.modulus for fn in family.values()}
    if len(moduli) != 1:
        raise ShapeError(f"mixed moduli in family: {sorted(moduli)}")
    return moduli.pop(), {eta: family[eta].values for eta in keys}


def _csg_lhs(vals: dict, n: int, k: int) -> complex:
    """E_{n,h} prod_eta f_eta(n + eta.h), no conjugations.

    The average over the last shift coordinate factors: with A(n) the
    product of the eta_k=0 block and B(n) of the eta_k=1 block at fixed
    h_1..h_{k-1}, E_{n,h_k} A(n) B(n+h_k) = (E A)(E B).
    """
    if k == 1:
        return np.mean(vals[(0,)]) * np.mean(vals[(1,)])
    idx = _shift_index(n)
    if k == 2:
        a = (vals[(1, 0)][idx] @ vals[(0, 0)]) / n
        b = (vals[(1, 1)][idx] @ vals[(0, 1)]) / n
        return complex(np.mean(a * b))
    if k == 3:
        total = 0.0 + 0.0j
        for h1 in range(n):
            u = vals[(0, 0, 0)] * np.roll(vals[(1, 0, 0)], -h1)
            v = vals[(0, 1, 0)] * np.roll(vals[(1, 1, 0)], -h1)
            w = vals[(0, 0, 1)] * np.roll(vals[(1, 0, 1)], -h1)
            z = vals[(0, 1, 1)] * np.roll(vals[(1, 1, 1)], -h1)
            a = (v[idx] @ u) / n
            b = (z[idx] @ w) / n
            total += np.mean(a * b)
        return total / n
    # generic fallback: explicit loop over the first k-1 shifts
    total = 0.0 + 0.0j
    for hs in itertools.product(range(n), repeat=k - 1):
        a = np.ones(n, dtype=np.complex128)
        b = np.ones(n, dtype=np.complex128)
        for eta in itertools.product((0, 1), repeat=k - 1):
            shift = -int(np.dot(eta, hs))
            a *= np.roll(vals[eta + (0,)], shift)
            b *= np.roll(vals[eta + (1,)], shift)
        total += np.mean(a) * np.mean(b)
    return total / n ** (k - 1)


def csg_check(family, cfg: GowersConfig) -> CsgResult:
    """Check the Cauchy-Schwarz-Gowers inequality for a cube-indexed family.

    lhs = |E_{n,h} prod_eta f_eta(n + eta.h)|,
    rhs = prod_eta ||f_eta||_{U^k(Z_N)}.
    """
    n, vals = _family_values(family, cfg.k)
    if cfg.k >= 4 and n ** (cfg.k + 1) > cfg.budget:
        raise ResourceError("CSG family average over budget")
    lhs = float(abs(_csg_lhs(vals, n, cfg.k)))
    rhs = 1.0
    for fn in family.values():
        rhs *= gowers_norm_zn(fn, cfg)
    return CsgResult(lhs=lhs, rhs=float(rhs), holds=lhs <= rhs + ROUNDING_TOL)


def _interval_cube_average(
    values: np.ndarray, k: int, h_cap: int, n_len: int
) -> complex:
    """E_{h in [1,H]^k} E_{n in [0,N)} prod_eta C^{|eta|} seq(n + eta.h)."""
    if k == 0:
        return complex(np.mean(values[:n_len]))
    acc = 0.0 + 0.0j
    for h in range(1, h_cap + 1):
        g = values[:-h] * np.conj(values[h:])
        acc += _interval_cube_average(g, k - 1, h_cap, n_len)
    return acc / h_cap


def uniformity_seminorm_n(
    seq: SampledSequence, k: int, H: int, N: int
) -> float:
    """Truncated k-uniformity seminorm of a sequence on N.

    The double limit (shifts then window) is replaced by the finite average
    over h in [1,H]^k, n in [0,N); the caller owns the truncation schedule.
    Small negative or complex leakage of the inner average is truncation
    noise and is clamped before the 2^k-th root.
    """
    if k < 1 or H < 1 or N < 1:
        raise ValidationError("k, H, N must all be >= 1")
    values = seq.window(0, N + k * H)
    inner = _interval_cube_average(values, k, H, N)
    return _root_nonneg(inner.real, k, strict=False)


@dataclass(frozen=True)
class PairingResult:
    pairing: float
    b_norm: float
    ratio: float


def anti_uniformity_pairing(
    phi: SampledSequence,
    b: SampledSequence,
    k: int,
    window: tuple[int, int],
    H: int,
) -> PairingResult:
    """Correlation of phi against b, relative to b's uniformity seminorm.

    A sequence that correlates with b while ||b||_{U^k} is small is
    k-anti-uniform with a large constant; the reported ratio lower-bounds
    that constant.
    """
    lo, hi = window
    pairing = float(abs(np.mean(phi.window(lo, hi) * b.window(lo, hi))))
    b_norm = uniformity_seminorm_n(b, k, H, hi)
    if b_norm >= 1e-12:
        ratio = pairing / b_norm
    elif pairing <= 1e-12:
        ratio = 0.0
    else:
        ratio = float("inf")
    return PairingResult(pairing=pairing, b_norm=b_norm, ratio=ratio)
