"""Gowers norms: brute-force oracles, fast paths, and truncated seminorms."""

import itertools

import numpy as np
import pytest

from nilcorr.errors import ResourceError, ShapeError, ValidationError
from nilcorr.gowers import (
    GowersConfig,
    anti_uniformity_pairing,
    csg_check,
    gowers_norm_u2_fft,
    gowers_norm_zn,
    gowers_norm_zn_sampled,
    uniformity_seminorm_n,
)
from nilcorr.phases import frac_multiple
from nilcorr.znfn import SampledSequence, ZnFunction

SQRT2_FRAC = float(np.sqrt(2) - 1)


def random_unimodular(n, rng):
    return ZnFunction(n, np.exp(2j * np.pi * rng.random(n)))


# --- independent oracles ------------------------------------------------------

def brute_norm(values, k):
    """U^k(Z_N) norm straight from the parallelepiped-average definition."""
    n = len(values)
    total = 0.0 + 0.0j
    for base in range(n):
        for hs in itertools.product(range(n), repeat=k):
            prod = 1.0 + 0.0j
            for eta in itertools.product((0, 1), repeat=k):
                v = values[(base + int(np.dot(eta, hs))) % n]
                prod *= np.conj(v) if sum(eta) % 2 else v
            total += prod
    return float((total.real / n ** (k + 1)) ** (1 / 2**k))


def brute_csg_lhs(vals, n, k):
    total = 0.0 + 0.0j
    for base in range(n):
        for hs in itertools.product(range(n), repeat=k):
            prod = 1.0 + 0.0j
            for eta in itertools.product((0, 1), repeat=k):
                prod *= vals[eta][(base + int(np.dot(eta, hs))) % n]
            total += prod
    return abs(total) / n ** (k + 1)


def brute_interval_average(values, k, H, N):
    total = 0.0 + 0.0j
    for hs in itertools.product(range(1, H + 1), repeat=k):
        for base in range(N):
            prod = 1.0 + 0.0j
            for eta in itertools.product((0, 1), repeat=k):
                v = values[base + int(np.dot(eta, hs))]
                prod *= np.conj(v) if sum(eta) % 2 else v
            total += prod
    return total / (H**k * N)


# --- gowers_norm_zn -----------------------------------------------------------

def test_constant_norm_is_one():
    f = ZnFunction(8, np.ones(8))
    assert gowers_norm_zn(f, GowersConfig(k=2)) == pytest.approx(1.0)
    assert gowers_norm_zn(f, GowersConfig(k=3)) == pytest.approx(1.0)


def test_character_u2_norm_is_one():
    n = 16
    f = ZnFunction(n, np.exp(2j * np.pi * 3 * np.arange(n) / n))
    # independent oracle: fourth moment of the Fourier coefficients
    coeffs = np.fft.fft(f.values) / n
    assert np.sum(np.abs(coeffs) ** 4) == pytest.approx(1.0)
    assert gowers_norm_zn(f, GowersConfig(k=2)) == pytest.approx(1.0)


def test_delta_norm_counts_degenerate_boxes():
    n = 8
    f = ZnFunction(n, np.eye(n)[0].astype(complex))
    # only h = (0,0) with base 0 survives: 1 of n^3 terms
    assert gowers_norm_zn(f, GowersConfig(k=2)) == pytest.approx(n ** (-3 / 4))


def test_exact_matches_brute_force_oracle():
    rng = np.random.default_rng(11)
    for n, k in [(6, 2), (8, 2), (5, 3), (6, 3)]:
        f = random_unimodular(n, rng)
        assert gowers_norm_zn(f, GowersConfig(k=k)) == pytest.approx(
            brute_norm(f.values, k), abs=1e-10
        )


def test_k1_is_absolute_mean():
    rng = np.random.default_rng(3)
    f = random_unimodular(16, rng)
    assert gowers_norm_zn(f, GowersConfig(k=1)) == pytest.approx(
        abs(np.mean(f.values))
    )


def test_budget_gates_exact_mode():
    f = ZnFunction(64, np.ones(64))
    with pytest.raises(ResourceError):
        gowers_norm_zn(f, GowersConfig(k=4, budget=10**6))


def test_sampled_mode_tracks_exact():
    rng = np.random.default_rng(4)
    f = random_unimodular(32, rng)
    exact = gowers_norm_zn(f, GowersConfig(k=2))
    value, stderr = gowers_norm_zn_sampled(
        f, GowersConfig(k=2, mode="sampled", sample_count=200_000, rng_seed=9)
    )
    assert stderr < 0.01
    assert value == pytest.approx(exact, abs=0.05)
    # determinism given the seed
    again = gowers_norm_zn(
        f, GowersConfig(k=2, mode="sampled", sample_count=1000, rng_seed=9)
    )
    assert again == gowers_norm_zn(
        f, GowersConfig(k=2, mode="sampled", sample_count=1000, rng_seed=9)
    )


def test_scaling_homogeneity():
    rng = np.random.default_rng(6)
    f = random_unimodular(16, rng)
    for c in (0.5, 2.0, 1j, 0.3 - 0.4j):
        scaled = ZnFunction(16, c * f.values)
        for k in (2, 3):
            assert gowers_norm_zn(scaled, GowersConfig(k=k)) == pytest.approx(
                abs(c) * gowers_norm_zn(f, GowersConfig(k=k)), abs=1e-9
            )


def test_modulation_invariance_u2():
    rng = np.random.default_rng(8)
    n = 32
    f = random_unimodular(n, rng)
    base = gowers_norm_zn(f, GowersConfig(k=2))
    for a in (1, 5, 17):
        chi = np.exp(2j * np.pi * a * np.arange(n) / n)
        mod = ZnFunction(n, f.values * chi)
        assert gowers_norm_zn(mod, GowersConfig(k=2)) == pytest.approx(
            base, abs=1e-9
        )


def test_monotonicity_u2_u3_sample():
    rng = np.random.default_rng(12)
    for _ in range(50):
        f = random_unimodular(16, rng)
        u2 = gowers_norm_zn(f, GowersConfig(k=2))
        u3 = gowers_norm_zn(f, GowersConfig(k=3))
        assert u2 <= u3 + 1e-9


# --- fft fast path -------------------------------------------------------------

def test_fft_constant_and_delta():
    assert gowers_norm_u2_fft(ZnFunction(32, np.ones(32))) == pytest.approx(1.0)
    delta = ZnFunction(32, np.eye(32)[0].astype(complex))
    assert gowers_norm_u2_fft(delta) == pytest.approx(32 ** (-3 / 4))


def test_fft_agrees_with_exact_on_random_inputs():
    rng = np.random.default_rng(13)
    for _ in range(100):
        f = random_unimodular(64, rng)
        exact = gowers_norm_zn(f, GowersConfig(k=2))
        assert abs(exact - gowers_norm_u2_fft(f)) <= 1e-9 * exact


# --- csg_check ------------------------------------------------------------------

def full_family(f, k):
    return {eta: f for eta in itertools.product((0, 1), repeat=k)}


def test_csg_constant_family_equality():
    f = ZnFunction(8, np.ones(8))
    res = csg_check(full_family(f, 2), GowersConfig(k=2))
    assert res.lhs == pytest.approx(1.0)
    assert res.rhs == pytest.approx(1.0)
    assert res.holds


def test_csg_zero_function_gives_zero_sides():
    zero = ZnFunction(8, np.zeros(8) + 0j)
    rng = np.random.default_rng(0)
    family = full_family(random_unimodular(8, rng), 2)
    family[(0, 1)] = zero
    res = csg_check(family, GowersConfig(k=2))
    assert res.lhs == pytest.approx(0.0, abs=1e-12)
    assert res.rhs == pytest.approx(0.0, abs=1e-12)
    assert res.holds


def test_csg_lhs_matches_brute_force():
    rng = np.random.default_rng(14)
    for k in (1, 2, 3):
        family = {
            eta: random_unimodular(5, rng)
            for eta in itertools.product((0, 1), repeat=k)
        }
        res = csg_check(family, GowersConfig(k=k))
        vals = {eta: fn.values for eta, fn in family.items()}
        assert res.lhs == pytest.approx(brute_csg_lhs(vals, 5, k), abs=1e-10)


def test_csg_random_trials_hold():
    rng = np.random.default_rng(15)
    for trial in range(200):
        k = 2 if trial % 2 == 0 else 3
        n = (8, 16)[trial % 2]
        family = {
            eta: random_unimodular(n, rng)
            for eta in itertools.product((0, 1), repeat=k)
        }
        assert csg_check(family, GowersConfig(k=k)).holds


def test_csg_modulus_mismatch_rejected():
    rng = np.random.default_rng(16)
    family = full_family(random_unimodular(8, rng), 2)
    family[(1, 1)] = random_unimodular(16, rng)
    with pytest.raises(ShapeError):
        csg_check(family, GowersConfig(k=2))


def test_csg_incomplete_family_rejected():
    rng = np.random.default_rng(17)
    family = full_family(random_unimodular(8, rng), 2)
    del family[(0, 1)]
    with pytest.raises(ShapeError):
        csg_check(family, GowersConfig(k=2))


# --- uniformity_seminorm_n -------------------------------------------------------

def test_seminorm_constant_is_one():
    seq = SampledSequence(0, np.ones(1000))
    assert uniformity_seminorm_n(seq, 2, 8, 900) == pytest.approx(1.0)
    assert uniformity_seminorm_n(seq, 1, 8, 900) == pytest.approx(1.0)


def test_seminorm_linear_character_is_exactly_one():
    # the cube product of a linear phase cancels exactly at every (h, n)
    ns = np.arange(0, 2**14 + 2 * 64, dtype=np.int64)
    seq = SampledSequence(0, np.exp(2j * np.pi * frac_multiple(ns, SQRT2_FRAC)))
    value = uniformity_seminorm_n(seq, 2, 64, 2**14)
    assert value == pytest.approx(1.0, abs=1e-12)


def test_seminorm_random_signs_small():
    rng = np.random.default_rng(0)
    vals = rng.choice([-1.0, 1.0], size=2**14 + 2 * 64).astype(complex)
    seq = SampledSequence(0, vals)
    assert uniformity_seminorm_n(seq, 2, 64, 2**14) <= 0.15


def test_seminorm_matches_brute_force():
    rng = np.random.default_rng(19)
    vals = np.exp(2j * np.pi * rng.random(40))
    seq = SampledSequence(0, vals)
    for k, H, N in [(1, 3, 10), (2, 4, 8), (3, 2, 6)]:
        brute = brute_interval_average(vals, k, H, N)
        got = uniformity_seminorm_n(seq, k, H, N)
        assert got == pytest.approx(
            max(brute.real, 0.0) ** (1 / 2**k), abs=1e-10
        )


def test_seminorm_requires_enough_data():
    seq = SampledSequence(0, np.ones(100))
    with pytest.raises(ValidationError):
        uniformity_seminorm_n(seq, 2, 64, 2**14)


# --- anti_uniformity_pairing ------------------------------------------------------

def test_pairing_constants():
    n_len = 512 + 2 * 16
    ones = SampledSequence(0, np.ones(n_len))
    res = anti_uniformity_pairing(ones, ones, 2, (0, 512), 16)
    assert res.pairing == pytest.approx(1.0)
    assert res.b_norm == pytest.approx(1.0)
    assert res.ratio == pytest.approx(1.0)


def test_pairing_alternating_cancels():
    n_len = 512 + 2 * 16
    ones = SampledSequence(0, np.ones(n_len))
    alt = SampledSequence(
        0, np.asarray([(-1.0) ** n for n in range(n_len)])
    )
    res = anti_uniformity_pairing(ones, alt, 2, (0, 512), 16)
    assert res.pairing == pytest.approx(0.0, abs=1e-12)


def test_pairing_rotation_correlation_ratio_near_one():
    # alpha(n) = e(n theta) paired against its conjugate: the pairing is 1
    # and the truncated seminorm of the conjugate character is exactly 1
    N, H = 2**14, 64
    ns = np.arange(0, N + 2 * H, dtype=np.int64)
    phi = SampledSequence(0, np.exp(2j * np.pi * frac_multiple(ns, SQRT2_FRAC)))
    b = SampledSequence(0, np.conj(phi.values))
    res = anti_uniformity_pairing(phi, b, 2, (0, N), H)
    assert res.ratio <= 1.0 + 0.1


def test_pairing_sentinel_for_vanishing_norm():
    # uniform and tiny: zero against zero has ratio 0 by convention
    n_len = 256 + 2 * 8
    zeros = SampledSequence(0, np.zeros(n_len) + 0j)
    res = anti_uniformity_pairing(zeros, zeros, 2, (0, 256), 8)
    assert res.ratio == 0.0
