"""Extended-precision phase reduction against an arbitrary-precision oracle."""

import mpmath
import numpy as np
import pytest

from nilcorr.phases import frac_multiple, unit_phase

mpmath.mp.dps = 40


def _oracle_frac(a: int, theta: float) -> float:
    return float(mpmath.frac(mpmath.mpf(a) * mpmath.mpf(theta)))


def test_matches_mpmath_on_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(500):
        a = int(rng.integers(0, 2**52))
        theta = float(rng.random())
        got = float(frac_multiple(a, theta))
        want = _oracle_frac(a, theta)
        # compare on the circle: 0 and 1 are the same point
        assert min(abs(got - want), 1.0 - abs(got - want)) < 1e-12


def test_large_quadratic_phases_stay_accurate():
    theta = float(np.sqrt(2) - 1)
    ns = np.arange(99_000, 100_000, dtype=np.int64)
    got = frac_multiple(ns * ns, theta)
    for n, g in zip(ns[::100], got[::100]):
        want = _oracle_frac(int(n) ** 2, theta)
        assert min(abs(float(g) - want), 1 - abs(float(g) - want)) < 1e-10


def test_plain_float_product_would_fail_here():
    # the motivating case: naive (a * theta) % 1 drifts at a ~ 1e10
    theta = float(np.sqrt(2) - 1)
    a = 10_000_000_019
    naive = (a * theta) % 1.0
    want = _oracle_frac(a, theta)
    accurate = float(frac_multiple(a, theta))
    assert abs(naive - want) > 1e-8
    assert abs(accurate - want) < 1e-12


def test_vectorized_and_scalar_agree():
    theta = 0.437193857
    arr = np.asarray([3, 5, 7**9], dtype=np.int64)
    vec = frac_multiple(arr, theta)
    for a, v in zip(arr, vec):
        assert float(frac_multiple(int(a), theta)) == float(v)


def test_unit_phase_modulus_one():
    vals = unit_phase(np.arange(100, dtype=np.int64), 0.123456789)
    assert np.allclose(np.abs(vals), 1.0, atol=1e-15)


def test_rejects_values_beyond_exact_range():
    with pytest.raises(OverflowError):
        frac_multiple(2**60, 0.5)
