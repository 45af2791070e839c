"""Orbits, invariant integrals, and cube-average seminorms of the systems."""

import itertools

import numpy as np
import pytest

from nilcorr.errors import (
    ConfigError,
    DomainError,
    ShapeError,
    ValidationError,
)
from nilcorr.systems import (
    MpSystemSpec,
    ObservableSpec,
    QuadratureGrid,
    hk_seminorm_estimate,
    integrate,
    observable_sup_norm,
    orbit_point,
    orbit_points,
)

SQRT2_FRAC = float(np.sqrt(2) - 1)


# --- orbits -------------------------------------------------------------------

def test_rotation_zero_angle_is_identity():
    sys = MpSystemSpec.rotation(0.0)
    assert orbit_point(sys, (0.37,), 7) == pytest.approx([0.37])


def test_skew_closed_form_matches_iteration():
    theta = 0.25
    sys = MpSystemSpec.skew(theta)
    # T(x, y) = (x + theta, y + 2x + theta), iterated by hand
    def step(p):
        x, y = p
        return ((x + theta) % 1.0, (y + 2 * x + theta) % 1.0)

    pt = (0.0, 0.0)
    for n in range(1, 9):
        pt = step(pt)
        assert orbit_point(sys, (0.0, 0.0), n) == pytest.approx(list(pt))
    assert orbit_point(sys, (0.0, 0.0), 2) == pytest.approx([0.5, 0.0])


def test_skew_negative_power_inverts():
    sys = MpSystemSpec.skew(SQRT2_FRAC)
    fwd = orbit_point(sys, (0.2, 0.7), 5)
    back = orbit_point(sys, tuple(fwd), -5)
    assert back == pytest.approx([0.2, 0.7], abs=1e-12)


def test_doubling_rational_orbit_and_domain_error():
    sys = MpSystemSpec.doubling()
    assert orbit_point(sys, (1 / 3,), 2) == pytest.approx([1 / 3])
    with pytest.raises(DomainError):
        orbit_point(sys, (0.5,), -1)
    pts = orbit_points(sys, (1 / 3,), np.asarray([0, 1, 2, 3]))
    assert pts[:, 0] == pytest.approx([1 / 3, 2 / 3, 1 / 3, 2 / 3])


def _circle_dist(u, v):
    d = np.abs(np.asarray(u) - np.asarray(v)) % 1.0
    return float(np.max(np.minimum(d, 1.0 - d)))


def test_heisenberg_orbit_matches_matrix_power_oracle():
    a, b, c = 0.31, 0.47, 0.13
    sys = MpSystemSpec.heisenberg(a, b, c)
    g = np.array([[1.0, a, c], [0.0, 1.0, b], [0.0, 0.0, 1.0]])
    x0 = (0.21, 0.55, 0.9)
    X = np.array([[1.0, x0[0], x0[2]], [0.0, 1.0, x0[1]], [0.0, 0.0, 1.0]])
    gn = np.eye(3)
    for n in range(1, 8):
        gn = gn @ g
        M = gn @ X
        gx, gy, gz = M[0, 1], M[1, 2], M[0, 2]
        want = [gx % 1, gy % 1, (gz - gx * np.floor(gy)) % 1]
        assert _circle_dist(orbit_point(sys, x0, n), want) < 1e-12


def test_heisenberg_group_law_additivity():
    sys = MpSystemSpec.heisenberg(0.3, 0.45, 0.1)
    x0 = (0.0, 0.0, 0.0)
    via_7 = orbit_point(sys, x0, 7)
    via_34 = orbit_point(sys, tuple(orbit_point(sys, x0, 3)), 4)
    assert via_7 == pytest.approx(list(via_34), abs=1e-12)


def test_commuting_family_exact_commutation_on_dyadic_points():
    # dyadic angles and points make every float operation exact
    sys = MpSystemSpec.commuting_rotations([(0.25, 0.5), (0.375, 0.125)])
    x0 = np.asarray([0.125, 0.75])
    a = orbit_point(sys, orbit_point(sys, x0, 3, which=0), 2, which=1)
    b = orbit_point(sys, orbit_point(sys, x0, 2, which=1), 3, which=0)
    assert np.array_equal(a, b)


def test_transformation_index_validated():
    sys = MpSystemSpec.rotation(0.3)
    with pytest.raises(ValidationError):
        orbit_point(sys, (0.0,), 1, which=1)


def test_system_spec_validation():
    with pytest.raises(ValidationError):
        MpSystemSpec(kind="mystery")
    with pytest.raises(ValidationError):
        MpSystemSpec.rotation()
    with pytest.raises(ShapeError):
        MpSystemSpec.commuting_rotations([(0.1,), (0.2, 0.3)])
    with pytest.raises(ValidationError):
        MpSystemSpec(kind="heisenberg", translation=(0.1, 0.2))


# --- integration -----------------------------------------------------------------

def test_integrate_symbolic_rules():
    sys = MpSystemSpec.rotation(SQRT2_FRAC)
    one = ObservableSpec.constant(1.0, dim=1)
    char = ObservableSpec.character((1,))
    assert integrate(sys, one) == 1.0
    assert integrate(sys, char) == 0.0
    assert integrate(sys, char * char.conjugate()) == pytest.approx(1.0)


def test_integrate_quadrature_matches_symbolic():
    sys = MpSystemSpec.rotation(SQRT2_FRAC)
    obs = ObservableSpec(terms=(((0,), 0.5), ((2,), 0.25), ((-1,), 0.1j)))
    grid = QuadratureGrid(points_per_dim=5, dimension=1)
    assert integrate(sys, obs, grid) == pytest.approx(integrate(sys, obs))


def test_integrate_nyquist_guard():
    sys = MpSystemSpec.rotation(SQRT2_FRAC)
    obs = ObservableSpec.character((4,))
    with pytest.raises(ConfigError):
        integrate(sys, obs, QuadratureGrid(points_per_dim=8, dimension=1))


def test_measure_preservation_under_composition():
    # a character composed with T^m integrates to the same symbolic value
    from nilcorr.systems import compose_term_with_power

    for sys in (
        MpSystemSpec.rotation(SQRT2_FRAC),
        MpSystemSpec.skew(SQRT2_FRAC),
        MpSystemSpec.doubling(),
        MpSystemSpec.heisenberg(0.3, 0.45, 0.1),
    ):
        freq = (1,) * sys.dim if sys.kind != "heisenberg" else (1, 1, 0)
        for m in (1, 2, 5):
            comp = compose_term_with_power(sys, freq, 1.0, m)
            assert comp is not None
            new_freq, coeff = comp
            # nonzero frequency stays nonzero: both integrals are 0
            assert any(f != 0 for f in new_freq)
            assert abs(coeff) == pytest.approx(1.0)


def test_observable_sup_norm():
    sys = MpSystemSpec.rotation(0.3)
    obs = ObservableSpec(terms=(((1,), 0.5), ((-1,), 0.5)))
    grid = QuadratureGrid(points_per_dim=64, dimension=1)
    assert observable_sup_norm(sys, obs, grid) <= 1.0 + 1e-9


# --- hk seminorm ------------------------------------------------------------------

def brute_hk_inner(sys, F, k, caps):
    """Direct truncated cube average via orbit evaluation on a fine grid."""
    grid = QuadratureGrid(points_per_dim=129, dimension=sys.dim)
    nodes = grid.nodes()
    total = 0.0 + 0.0j
    count = 0
    for hs in itertools.product(*[range(1, c + 1) for c in caps]):
        prod = np.ones(nodes.shape[0], dtype=np.complex128)
        for eta in itertools.product((0, 1), repeat=k):
            m = int(np.dot(eta, hs))
            pts = np.asarray([orbit_point(sys, p, m) for p in nodes])
            vals = F.evaluate(pts)
            prod *= np.conj(vals) if sum(eta) % 2 else vals
        total += np.mean(prod)
        count += 1
    return (total / count).real


def test_hk_constant_is_one():
    sys = MpSystemSpec.rotation(SQRT2_FRAC)
    one = ObservableSpec.constant(1.0, dim=1)
    assert hk_seminorm_estimate(sys, one, 2, (8, 8)) == pytest.approx(1.0)


def test_hk_rotation_character_is_one():
    # an eigenfunction has full seminorm; the cube integrand is constant
    sys = MpSystemSpec.rotation(SQRT2_FRAC)
    char = ObservableSpec.character((1,))
    value = hk_seminorm_estimate(sys, char, 2, (64, 64))
    assert value == pytest.approx(1.0, abs=0.05)


def test_hk_doubling_character_vanishes():
    # correlations of e(x) with e(2^a x) vanish exactly unless a = 0
    sys = MpSystemSpec.doubling()
    char = ObservableSpec.character((1,))
    value = hk_seminorm_estimate(sys, char, 2, (64, 64))
    assert value <= 0.1
    assert value == pytest.approx(0.0, abs=1e-12)


def test_hk_matches_brute_force_on_rotation():
    sys = MpSystemSpec.rotation(0.3141)
    F = ObservableSpec(terms=(((1,), 0.6), ((0,), 0.4)))
    caps = (3, 4)
    got = hk_seminorm_estimate(sys, F, 2, caps)
    want = max(brute_hk_inner(sys, F, 2, caps), 0.0) ** 0.25
    assert got == pytest.approx(want, abs=1e-9)


def test_hk_matches_brute_force_on_skew():
    sys = MpSystemSpec.skew(0.3141)
    F = ObservableSpec.character((0, 1))
    caps = (3, 3)
    got = hk_seminorm_estimate(sys, F, 2, caps)
    want = max(brute_hk_inner(sys, F, 2, caps), 0.0) ** 0.25
    assert got == pytest.approx(want, abs=1e-6)


def test_hk_monotone_in_k_for_rotations():
    sys = MpSystemSpec.rotation(SQRT2_FRAC)
    for F in (
        ObservableSpec.character((1,)),
        ObservableSpec(terms=(((1,), 0.5), ((0,), 0.5))),
    ):
        k1 = hk_seminorm_estimate(sys, F, 1, (64,))
        k2 = hk_seminorm_estimate(sys, F, 2, (64, 64))
        k3 = hk_seminorm_estimate(sys, F, 3, (16, 16, 16))
        assert k1 <= k2 + 0.05
        assert k2 <= k3 + 0.05


def test_hk_validates_caps():
    sys = MpSystemSpec.rotation(0.1)
    F = ObservableSpec.character((1,))
    with pytest.raises(ValidationError):
        hk_seminorm_estimate(sys, F, 2, (4,))
    with pytest.raises(ValidationError):
        hk_seminorm_estimate(sys, F, 0, ())
