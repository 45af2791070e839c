"""Multicorrelation sequences of explicit systems.

alpha(n) = integral of f_0 * prod_j (prod_i T_i^{q_{i,j}(n)}) f_j, with
integer-valued exponent polynomials.  For character observables the value
is exact: composing a character with a closed-form iterate is again a
character, so the integral reduces to frequency bookkeeping (a term
combination survives iff its total frequency vector vanishes).  Uniform
grid quadrature over sampled orbits provides an independent cross-check
route.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    ShapeError,
    ValidationError,
)
from .phases import frac_multiple
from .systems import (
    MpSystemSpec,
    ObservableSpec,
    QuadratureGrid,
    compose_term_with_power,
    orbit_point,
)
from .znfn import SampledSequence


def _binom_int(n: int, j: int) -> int:
    """binom(n, j) for any integer n, via reflection for negative n."""
    if j < 0:
        return 0
    if n >= 0:
        return math.comb(n, j)
    return (-1) ** j * math.comb(j - n - 1, j)


@dataclass(frozen=True)
class IntPolynomial:
    """Integer-valued polynomial stored in the binomial basis.

    q(n) = sum_j coeffs[j] * binom(n, j).  Integer-valuedness on N is
    certified at construction by evaluating at n = 0..deg (equivalent, in
    this basis, to all coefficients being integers); evaluation is exact
    integer arithmetic.
    """

    coeffs: tuple  # binomial-basis coefficients, Fractions

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.coeffs)
        if not coeffs:
            raise ValidationError("polynomial needs at least one coefficient")
        for n in range(len(coeffs)):
            value = sum(c * _binom_int(n, j) for j, c in enumerate(coeffs))
            if value.denominator != 1:
                raise ValidationError(f"not integer-valued: q({n}) = {value}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_binomial(cls, coeffs) -> "IntPolynomial":
        return cls(coeffs=tuple(coeffs))

    @classmethod
    def from_monomial(cls, coeffs) -> "IntPolynomial":
        """From monomial coefficients (c_0 + c_1 n + ...).

        Exact conversion: binomial-basis coefficients are the finite
        differences of the value sequence at 0.
        """
        mono = [Fraction(c) for c in coeffs]
        deg = len(mono) - 1
        values = [
            sum(c * Fraction(n) ** j for j, c in enumerate(mono))
            for n in range(deg + 1)
        ]
        binom_coeffs = []
        diffs = values[:]
        for _ in range(deg + 1):
            binom_coeffs.append(diffs[0])
            diffs = [b - a for a, b in zip(diffs, diffs[1:])]
        return cls(coeffs=tuple(binom_coeffs))

    @classmethod
    def identity(cls) -> "IntPolynomial":
        return cls(coeffs=(Fraction(0), Fraction(1)))

    @classmethod
    def monomial(cls, degree: int, scale: int = 1) -> "IntPolynomial":
        mono = [Fraction(0)] * degree + [Fraction(scale)]
        return cls.from_monomial(mono)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


def poly_eval(q: IntPolynomial, n: int) -> int:
    """Exact integer value q(n); Python integers cannot overflow."""
    total = Fraction(0)
    for j, c in enumerate(q.coeffs):
        total += c * _binom_int(int(n), j)
    if total.denominator != 1:
        raise ValidationError(f"q({n}) is not an integer: {total}")
    return int(total)


def poly_eval_window(q: IntPolynomial, ns: np.ndarray) -> np.ndarray:
    """q over an integer window, as int64.

    Prefix products binom(n, r) stay integer at every step, so the float
    evaluation is exact while below 2^53; beyond that the fast path bails.
    """
    out = np.zeros(ns.shape, dtype=np.int64)
    nsf = ns.astype(np.float64)
    for j, c in enumerate(q.coeffs):
        cj = int(c)  # certified integral => integer binomial coefficients
        if cj == 0:
            continue
        binom = np.ones(ns.shape, dtype=np.float64)
        for r in range(j):
            binom = binom * (nsf - r) / (r + 1)
        contrib = cj * binom
        if np.any(np.abs(contrib) > 2**53):
            raise ValidationError(
                "polynomial values exceed the exact fast-path range"
            )
        out += np.rint(contrib).astype(np.int64)
    return out


@dataclass(frozen=True)
class CorrelationSpec:
    """System, observables f_0..f_k, and the exponent table.

    exponents[j-1] lists (transformation index, IntPolynomial) pairs for
    slot j; the plain one-parameter commuting case uses q(n) = n with one
    transformation per slot.
    """

    system: MpSystemSpec
    observables: tuple  # (f_0, ..., f_k)
    exponents: tuple  # per slot j=1..k: ((which, IntPolynomial), ...)

    def __post_init__(self):
        obs = tuple(self.observables)
        if len(obs) < 2:
            raise ValidationError("need f_0 and at least one further slot")
        for f in obs:
            if f.dim != self.system.dim:
                raise ShapeError("observable/system dimension mismatch")
        exps = tuple(tuple(slot) for slot in self.exponents)
        if len(exps) != len(obs) - 1:
            raise ShapeError("need one exponent slot per observable f_1..f_k")
        for slot in exps:
            for which, poly in slot:
                if not (0 <= which < self.system.num_transformations):
                    raise ValidationError(
                        f"transformation index {which} out of range"
                    )
                if not isinstance(poly, IntPolynomial):
                    raise ValidationError("exponents must be IntPolynomial")
        object.__setattr__(self, "observables", obs)
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def single_transformation(cls, system, observables) -> "CorrelationSpec":
        """alpha(n) = int f_0 . T^n f_1 . T^{2n} f_2 ... T^{kn} f_k."""
        k = len(observables) - 1
        exps = tuple(
            ((0, IntPolynomial.monomial(1, scale=j)),) for j in range(1, k + 1)
        )
        return cls(system=system, observables=tuple(observables), exponents=exps)

    @classmethod
    def commuting(cls, system, observables) -> "CorrelationSpec":
        """alpha(n) = int f_0 . T_1^n f_1 ... T_k^n f_k."""
        k = len(observables) - 1
        exps = tuple(
            ((j - 1, IntPolynomial.identity()),) for j in range(1, k + 1)
        )
        return cls(system=system, observables=tuple(observables), exponents=exps)

    @property
    def k(self) -> int:
        return len(self.observables) - 1


def _composed_slot_terms(spec: CorrelationSpec, j: int, n: int):
    """Character terms of f_j composed with its slot's iterates, or None."""
    terms = list(spec.observables[j].terms)
    for which, poly in spec.exponents[j - 1]:
        m = poly_eval(poly, n)
        if spec.system.kind == "doubling" and m < 0:
            raise DomainError(
                f"negative exponent {m} for the non-invertible doubling map"
            )
        new_terms = []
        for freq, coeff in terms:
            comp = compose_term_with_power(spec.system, freq, coeff, m, which)
            if comp is None:
                return None
            new_terms.append(comp)
        terms = new_terms
    return terms


def multicorrelation(
    spec: CorrelationSpec, n: int, grid: QuadratureGrid | None = None
) -> complex:
    """alpha(n), exact for character observables.

    Falls back to grid-orbit quadrature when a composition has no character
    form (Heisenberg characters with nonzero z-frequency); that path needs
    an explicit grid.
    """
    slot_terms = [list(spec.observables[0].terms)]
    symbolic = True
    for j in range(1, spec.k + 1):
        terms = _composed_slot_terms(spec, j, n)
        if terms is None:
            symbolic = False
            break
        slot_terms.append(terms)
    if symbolic:
        total = 0.0 + 0.0j
        for combo in itertools.product(*slot_terms):
            coeff = 1.0 + 0.0j
            freq_sum = [0] * spec.system.dim
            for freq, c in combo:
                coeff *= c
                for d, f in enumerate(freq):
                    freq_sum[d] += f
            if all(f == 0 for f in freq_sum):
                total += coeff
        return complex(total)
    return _multicorrelation_quadrature(spec, n, grid)


def _multicorrelation_quadrature(
    spec: CorrelationSpec, n: int, grid: QuadratureGrid | None
) -> complex:
    if grid is None:
        raise ConfigError(
            "no symbolic form for this spec; supply a quadrature grid"
        )
    if grid.dimension != spec.system.dim:
        raise ShapeError("grid/system dimension mismatch")
    nodes = grid.nodes()
    prod = spec.observables[0].evaluate(nodes)
    for j in range(1, spec.k + 1):
        pts = nodes
        for which, poly in spec.exponents[j - 1]:
            m = poly_eval(poly, n)
            pts = np.asarray(
                [orbit_point(spec.system, p, m, which) for p in pts]
            )
        prod = prod * spec.observables[j].evaluate(pts)
    return complex(np.mean(prod))


def multicorrelation_sequence(
    spec: CorrelationSpec,
    window: tuple[int, int],
    grid: QuadratureGrid | None = None,
) -> SampledSequence:
    """alpha over [M, N) as a SampledSequence.

    Torus-type systems take a vectorized path (one pass per term
    combination); the doubling map uses exact power-of-two cancellation
    tests per position.
    """
    lo, hi = window
    if hi <= lo or lo < 0:
        raise ValidationError(f"bad window [{lo}, {hi})")
    kind = spec.system.kind
    if kind == "doubling":
        values = _sequence_doubling(spec, lo, hi)
    else:
        try:
            values = _sequence_symbolic_torus(spec, lo, hi)
        except _NoSymbolicForm:
            values = np.asarray(
                [multicorrelation(spec, n, grid) for n in range(lo, hi)]
            )
    return SampledSequence(start=lo, values=values)


class _NoSymbolicForm(Exception):
    pass


def _slot_total_exponents(spec, ns):
    """Summed exponent array per slot for single-transformation systems."""
    out = []
    for slot in spec.exponents:
        total = np.zeros(ns.shape, dtype=np.int64)
        for _, poly in slot:
            total += poly_eval_window(poly, ns)
        out.append(total)
    return out


def _sequence_symbolic_torus(spec, lo, hi) -> np.ndarray:
    """Vectorized combination expansion for rotation/skew/Heisenberg.

    Per term combination, the total frequency vector and the phase are
    integer polynomials in n; the combination contributes exactly where
    the frequency vanishes.
    """
    ns = np.arange(lo, hi, dtype=np.int64)
    sys = spec.system
    dim = sys.dim
    if sys.kind in ("rotation", "commuting_family"):
        slot_pairs = [
            [(which, poly_eval_window(poly, ns)) for which, poly in slot]
            for slot in spec.exponents
        ]
    else:
        slot_sums = _slot_total_exponents(spec, ns)

    term_lists = [list(f.terms) for f in spec.observables]
    total = np.zeros(ns.shape, dtype=np.complex128)
    for combo in itertools.product(*[range(len(t)) for t in term_lists]):
        coeff = 1.0 + 0.0j
        freq_const = np.zeros(dim, dtype=np.int64)
        freq_var = None  # n-dependent component of the x-frequency (skew)
        phase = np.zeros(ns.size, dtype=np.float64)
        for j, t_idx in enumerate(combo):
            base_freq, base_coeff = term_lists[j][t_idx]
            coeff *= base_coeff
            f = np.asarray(base_freq, dtype=np.int64)
            if j == 0:
                freq_const += f
                continue
            if sys.kind in ("rotation", "commuting_family"):
                for which, ms in slot_pairs[j - 1]:
                    angles = (
                        sys.angles
                        if sys.kind == "rotation"
                        else sys.angles[which]
                    )
                    for d in range(dim):
                        if f[d]:
                            phase += frac_multiple(ms * int(f[d]), angles[d])
                freq_const += f
            elif sys.kind == "skew":
                ms = slot_sums[j - 1]
                c1, c2 = int(f[0]), int(f[1])
                if np.any(np.abs(ms) > 2**26):
                    raise _NoSymbolicForm()
                phase += frac_multiple(c1 * ms + c2 * ms * ms, sys.theta)
                if c2:
                    if freq_var is None:
                        freq_var = np.zeros(ns.size, dtype=np.int64)
                    freq_var = freq_var + 2 * ms * c2
                freq_const += f
            elif sys.kind == "heisenberg":
                if f[2] != 0:
                    raise _NoSymbolicForm()
                ms = slot_sums[j - 1]
                a, b, _ = sys.translation
                if f[0]:
                    phase += frac_multiple(ms * int(f[0]), a)
                if f[1]:
                    phase += frac_multiple(ms * int(f[1]), b)
                freq_const += f
            else:
                raise _NoSymbolicForm()
        if freq_var is None:
            if np.all(freq_const == 0):
                total += coeff * np.exp(2j * np.pi * phase)
        elif np.all(freq_const[1:] == 0):
            mask = (freq_var + freq_const[0]) == 0
            if np.any(mask):
                total += np.where(
                    mask, coeff * np.exp(2j * np.pi * phase), 0.0
                )
    return total


def _pow2_combination_is_zero(pairs) -> bool:
    """Whether sum_i c_i * 2^{e_i} = 0, without building huge integers.

    Exponent groups are processed smallest-first with a bounded carry; a
    gap the carry cannot bridge forces the carry to vanish.
    """
    groups: dict = {}
    for c, e in pairs:
        groups[e] = groups.get(e, 0) + c
    items = sorted((e, s) for e, s in groups.items() if s != 0)
    if not items:
        return True
    carry = 0
    prev_e = items[0][0]
    for e, s in items:
        gap = e - prev_e
        if gap > 0:
            if gap > 128:
                if carry != 0:
                    return False
                # carry == 0: nothing to bridge
            else:
                if carry % (1 << gap) != 0:
                    return False
                carry >>= gap
        carry += s
        prev_e = e
    return carry == 0


def _sequence_doubling(spec, lo, hi) -> np.ndarray:
    ns = np.arange(lo, hi, dtype=np.int64)
    slot_sums = _slot_total_exponents(spec, ns)
    for e in slot_sums:
        if np.any(e < 0):
            raise DomainError("negative exponent for the doubling map")
    term_lists = [list(f.terms) for f in spec.observables]
    values = np.zeros(ns.size, dtype=np.complex128)
    for combo in itertools.product(*[range(len(t)) for t in term_lists]):
        coeff = 1.0 + 0.0j
        freqs = []
        for j, t_idx in enumerate(combo):
            freq, c = term_lists[j][t_idx]
            coeff *= c
            freqs.append(int(freq[0]))
        if len(freqs) == 2:
            # single correlation: c0 + c1*2^e = 0 has a vectorized test
            c0, c1 = freqs
            e = slot_sums[0]
            if c0 == 0 and c1 == 0:
                values += coeff
            elif c1 != 0:
                small = e <= 50
                shifted = np.where(small, c1 * (1 << np.minimum(e, 50)), 0)
                mask = small & (shifted == -c0)
                values += np.where(mask, coeff, 0.0)
            continue
        for i in range(ns.size):
            pairs = [(freqs[0], 0)]
            pairs += [
                (freqs[j], int(slot_sums[j - 1][i]))
                for j in range(1, len(freqs))
            ]
            if _pow2_combination_is_zero(pairs):
                values[i] += coeff
    return values
