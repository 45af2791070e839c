"""nilcorr: desk-scale numerics for uniformity norms, nilsequences, and
decompositions of correlation sequences in Cesaro mean and along primes."""

from . import (
    correlation,
    decomp,
    errors,
    gowers,
    nilseq,
    phases,
    primes,
    systems,
    znfn,
)

__all__ = [
    "correlation",
    "decomp",
    "errors",
    "gowers",
    "nilseq",
    "phases",
    "primes",
    "systems",
    "znfn",
]

__version__ = "0.1.0"
