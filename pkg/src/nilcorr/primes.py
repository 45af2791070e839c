"""Prime sieve, von Mangoldt weights, and prime-vs-weighted comparisons.

The modified von Mangoldt weight puts log m on primes and 0 elsewhere, so
the weighted average E_{n<=N} L(n) b(n) tracks the plain average of b over
primes up to N; ``prime_vs_weighted_gap`` measures how closely, at finite
N.  The W-trick restricts to a residue b coprime to a primorial W and
renormalizes by totient(W)/W, which equidistributes the prime weights
across the coprime residue classes.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ResourceError, ValidationError, WindowError
from .znfn import SampledSequence

_SELF_CHECK_LIMIT = 10**4
_SIEVE_MAGIC = b"NCSV"
_SIEVE_VERSION = 1

CACHE_ENV_VAR = "NILCORR_CACHE"


@dataclass(frozen=True)
class PrimeTable:
    """Primality of 1..limit plus prefix counts.

    is_prime[n] indexes directly by n (index 0 unused, False); counts[n]
    is the number of primes <= n.
    """

    limit: int
    is_prime: np.ndarray
    counts: np.ndarray

    def primes(self) -> np.ndarray:
        return np.flatnonzero(self.is_prime)

    def count_upto(self, n: int) -> int:
        if n > self.limit:
            raise WindowError(f"{n} beyond sieve limit {self.limit}")
        return int(self.counts[n])


def _trial_division_check(is_prime: np.ndarray, upto: int) -> None:
    for n in range(2, upto + 1):
        expected = all(n % d for d in range(2, int(math.isqrt(n)) + 1))
        if bool(is_prime[n]) != expected:
            raise AssertionError(f"sieve self-check failed at {n}")


def sieve(N: int) -> PrimeTable:
    """Eratosthenes sieve with prefix counts; self-checked against trial
    division on the initial segment."""
    if N < 2:
        raise ValidationError("sieve needs N >= 2")
    if N > 2 * 10**8:
        raise ResourceError(f"sieve limit {N} too large")
    flags = np.ones(N + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, int(math.isqrt(N)) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    _trial_division_check(flags, min(N, _SELF_CHECK_LIMIT))
    counts = np.cumsum(flags).astype(np.int64)
    return PrimeTable(limit=N, is_prime=flags, counts=counts)


def lambda_prime(m: int, table: PrimeTable) -> float:
    """Modified von Mangoldt weight: log m on primes, 0 elsewhere."""
    if m < 1 or m > table.limit:
        raise WindowError(f"{m} outside table range 1..{table.limit}")
    return math.log(m) if table.is_prime[m] else 0.0


def lambda_prime_array(table: PrimeTable, N: int | None = None) -> np.ndarray:
    """Vector of weights for n = 1..N (index 0 corresponds to n=1)."""
    N = table.limit if N is None else N
    if N > table.limit:
        raise WindowError(f"{N} beyond sieve limit {table.limit}")
    ns = np.arange(1, N + 1, dtype=np.float64)
    return np.where(table.is_prime[1 : N + 1], np.log(ns), 0.0)


def primorial(w: int) -> int:
    """Product of the primes strictly below w (exact integer)."""
    if w < 2:
        raise ValidationError("primorial needs w >= 2")
    result = 1
    for p in range(2, w):
        if all(p % d for d in range(2, int(math.isqrt(p)) + 1)):
            result *= p
    return result


def is_primorial(W: int) -> bool:
    if W < 1:
        return False
    rest = W
    p = 2
    while rest > 1:
        if rest % p:
            return False
        rest //= p
        if rest % p == 0:
            return False
        p = _next_prime(p)
    return True


def _next_prime(p: int) -> int:
    q = p + 1
    while not all(q % d for d in range(2, int(math.isqrt(q)) + 1)):
        q += 1
    return q


def totient_of_primorial(W: int) -> int:
    """Euler totient of a primorial: product of (p - 1) over p | W."""
    if not is_primorial(W):
        raise ValidationError(f"{W} is not a primorial")
    result = 1
    rest = W
    p = 2
    while rest > 1:
        if rest % p == 0:
            result *= p - 1
            rest //= p
        p = _next_prime(p)
    return result


@dataclass(frozen=True)
class WTrickParams:
    """Residue setup for the renormalized prime weights.

    W is the primorial of the threshold w; b in 1..W must be coprime to W.
    """

    w: int
    b: int

    def __post_init__(self):
        if self.w < 2:
            raise ValidationError("w must be >= 2")
        W = primorial(self.w)
        if not (1 <= self.b <= W):
            raise ValidationError(f"residue b={self.b} outside 1..{W}")
        if math.gcd(self.b, W) != 1:
            raise ValidationError(f"gcd({self.b}, {W}) != 1")

    @property
    def W(self) -> int:
        return primorial(self.w)

    @property
    def totient(self) -> int:
        return totient_of_primorial(self.W)


def lambda_Wb(n: int, params: WTrickParams, table: PrimeTable) -> float:
    """(totient(W)/W) * Lambda'(W n + b)."""
    W = params.W
    m = W * n + params.b
    return params.totient / W * lambda_prime(m, table)


def lambda_Wb_mean(params: WTrickParams, N: int, table: PrimeTable) -> float:
    """E_{n in [1,N]} of the W-tricked weight, with compensated summation."""
    W = params.W
    ms = W * np.arange(1, N + 1, dtype=np.int64) + params.b
    if ms[-1] > table.limit:
        raise WindowError(
            f"need sieve up to {int(ms[-1])}, have {table.limit}"
        )
    weights = np.where(table.is_prime[ms], np.log(ms.astype(np.float64)), 0.0)
    return params.totient / W * math.fsum(weights) / N


@dataclass(frozen=True)
class GapResult:
    prime_avg: complex
    weighted_avg: complex
    gap: float


def prime_vs_weighted_gap(
    seq: SampledSequence, N: int, table: PrimeTable
) -> GapResult:
    """Prime average of seq vs its Lambda'-weighted full average on [1, N].

    The prime number theorem makes the gap vanish as N grows for bounded
    sequences; sums are compensated so the gap is not summation noise.
    """
    if N > table.limit:
        raise WindowError(f"{N} beyond sieve limit {table.limit}")
    values = seq.window(1, N + 1)
    mask = table.is_prime[1 : N + 1]
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise ValidationError("no primes in range")
    prime_avg = complex(
        math.fsum(values.real[mask]) / count,
        math.fsum(values.imag[mask]) / count,
    )
    weights = lambda_prime_array(table, N)
    weighted = values * weights
    weighted_avg = complex(
        math.fsum(weighted.real) / N, math.fsum(weighted.imag) / N
    )
    return GapResult(
        prime_avg=prime_avg,
        weighted_avg=weighted_avg,
        gap=float(abs(prime_avg - weighted_avg)),
    )


# --- sieve cache file -------------------------------------------------------
# Layout: magic "NCSV" | uint32 version | uint64 N | packed bits of
# is_prime[0..N] (little-endian bit order), all little-endian.

def save_table(table: PrimeTable, path) -> None:
    packed = np.packbits(table.is_prime, bitorder="little")
    with open(path, "wb") as fh:
        fh.write(_SIEVE_MAGIC)
        fh.write(struct.pack("<IQ", _SIEVE_VERSION, table.limit))
        fh.write(packed.tobytes())


def load_table(path) -> PrimeTable:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SIEVE_MAGIC:
            raise ValidationError(f"bad sieve cache magic {magic!r}")
        version, limit = struct.unpack("<IQ", fh.read(12))
        if version != _SIEVE_VERSION:
            raise ValidationError(f"unsupported sieve cache version {version}")
        packed = np.frombuffer(fh.read(), dtype=np.uint8)
    flags = np.unpackbits(packed, bitorder="little")[: limit + 1].astype(bool)
    counts = np.cumsum(flags).astype(np.int64)
    return PrimeTable(limit=int(limit), is_prime=flags, counts=counts)


def cached_sieve(N: int, cache_dir=None) -> PrimeTable:
    """Sieve with a binary cache under $NILCORR_CACHE (or cache_dir)."""
    root = cache_dir or os.environ.get(CACHE_ENV_VAR)
    if root is None:
        return sieve(N)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"sieve_{N}.bits"
    if path.exists():
        table = load_table(path)
        if table.limit >= N:
            return table
    table = sieve(N)
    save_table(table, path)
    return table
