"""Nilsequences as sampled orbits, their dual sequences, and residue gluing.

A nilsequence here is F(T^n x0) for one of the coordinate systems
(rotation, skew, Heisenberg).  The degree-k dual sequence averages the
conjugation-twisted product of the sequence over the nonzero vertices of a
k-cube of shifts; the averaging boxes are products [outer]^{k-1} x [inner],
matching the split whose uniform-in-n convergence the diagnostics probe.
For character observables on rotations the limit object has a closed form,
kept as the exact reference value for convergence checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    ResourceError,
    ShapeError,
    ValidationError,
)
from .phases import frac_multiple
from .systems import (
    MpSystemSpec,
    ObservableSpec,
    QuadratureGrid,
    observable_sup_norm,
    orbit_point,
)
from .znfn import SampledSequence

_NIL_KINDS = ("rotation", "skew", "heisenberg")

_BOX_BUDGET = 5 * 10**7

#: Truncation slacks fixed by the committed convergence scan
#: (tools/convergence_scan.py); do not retune per experiment.
DUAL_CONSISTENCY_SLACK = 0.05
DUAL_L1_SLACK = 0.05
SEMINORM_BRIDGE_SLACK = 0.1


@dataclass(frozen=True)
class NilsequenceSpec:
    system: MpSystemSpec
    observable: ObservableSpec
    basepoint: tuple

    def __post_init__(self):
        if self.system.kind not in _NIL_KINDS:
            raise ValidationError(
                f"{self.system.kind!r} is not a nilsystem-in-coordinates"
            )
        if self.observable.dim != self.system.dim:
            raise ShapeError("observable/system dimension mismatch")
        pt = tuple(float(x) % 1.0 for x in self.basepoint)
        if len(pt) != self.system.dim:
            raise ShapeError("basepoint/system dimension mismatch")
        object.__setattr__(self, "basepoint", pt)


@dataclass(frozen=True)
class DualTruncation:
    """Box sides: outer for shifts h_1..h_{k-1}, inner for the last shift."""

    outer: int
    inner: int

    def __post_init__(self):
        if self.outer < 1 or self.inner < 1:
            raise ValidationError("box sides must be >= 1")


def nilsequence_eval(spec: NilsequenceSpec, n: int) -> complex:
    point = orbit_point(spec.system, spec.basepoint, n)
    return complex(spec.observable.evaluate(point))


def nilsequence_sample(
    spec: NilsequenceSpec, start: int, length: int
) -> SampledSequence:
    """Vectorized orbit samples F(T^n x0) for n in [start, start+length)."""
    ns = np.arange(start, start + length, dtype=np.int64)
    sys = spec.system
    x0 = np.asarray(spec.basepoint)
    values = np.zeros(ns.size, dtype=np.complex128)
    if sys.kind == "rotation":
        for freq, coeff in spec.observable.terms:
            phase = np.full(ns.size, float(np.dot(freq, x0)) % 1.0)
            for d, f in enumerate(freq):
                if f:
                    phase += frac_multiple(ns * int(f), sys.angles[d])
            values += coeff * np.exp(2j * np.pi * phase)
    elif sys.kind == "skew":
        x, y = x0
        for (c1, c2), coeff in spec.observable.terms:
            # c1 x_n + c2 y_n = const + n(2 c2 x) + (c1 n + c2 n^2) theta
            phase = np.full(ns.size, (c1 * x + c2 * y) % 1.0)
            if c1:
                phase += frac_multiple(ns * c1, sys.theta)
            if c2:
                phase += frac_multiple(ns * ns * c2, sys.theta)
                phase += frac_multiple(ns, (2 * c2 * x) % 1.0)
            values += coeff * np.exp(2j * np.pi * phase)
    else:  # heisenberg
        a, b, c = sys.translation
        x, y, z = x0
        gx = x + ns * a
        gy = y + ns * b
        gz = z + ns * c + (ns * (ns - 1) / 2.0) * a * b + ns * a * y
        pts = np.stack(
            [gx % 1.0, gy % 1.0, (gz - gx * np.floor(gy)) % 1.0], axis=-1
        )
        values = spec.observable.evaluate(pts)
    return SampledSequence(start=start, values=values)


def _box_ranges(k: int, trunc: DualTruncation) -> list:
    sides = [trunc.outer] * (k - 1) + [trunc.inner]
    return [np.arange(1, s + 1) for s in sides]


def dual_sequence(
    spec: NilsequenceSpec, k: int, trunc: DualTruncation, n: int
) -> complex:
    """Truncated box average of the degree-k dual sequence at n.

    k=1 reduces to the conjugated mean over the inner side.  Character
    observables also admit an exact limit value; see
    ``dual_sequence_exact``.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    ranges = _box_ranges(k, trunc)
    volume = int(np.prod([r.size for r in ranges]))
    if volume * (2**k) > _BOX_BUDGET:
        raise ResourceError(f"dual box of volume {volume} over budget")
    max_shift = sum(int(r[-1]) for r in ranges)
    window = nilsequence_sample(spec, n, max_shift + 1).values
    grids = np.meshgrid(*ranges, indexing="ij")
    prod = np.ones(grids[0].shape, dtype=np.complex128)
    for eta in itertools.product((0, 1), repeat=k):
        if not any(eta):
            continue
        shift = sum(g for g, bit in zip(grids, eta) if bit)
        term = window[shift]
        prod *= np.conj(term) if sum(eta) % 2 else term
    return complex(np.mean(prod))


def _exact_dual_rotation(spec: NilsequenceSpec, k: int) -> ObservableSpec:
    """Exact limit dual of a character sum on a rotation, as a trig poly.

    An assignment of terms to the nonzero cube vertices survives the box
    limit iff each shift direction's accumulated angle multiple is an
    integer; surviving assignments contribute a character with the
    alternating-sign frequency sum.
    """
    angles = np.asarray(spec.system.angles)
    etas = [e for e in itertools.product((0, 1), repeat=k) if any(e)]
    terms = spec.observable.terms
    if len(terms) ** len(etas) > 10**6:
        raise ResourceError("too many assignments in exact dual expansion")
    merged: dict = {}
    for assign in itertools.product(range(len(terms)), repeat=len(etas)):
        freq_sum = np.zeros(spec.system.dim, dtype=np.int64)
        coeff = 1.0 + 0.0j
        betas = np.zeros(k)
        for eta, t_idx in zip(etas, assign):
            freq, a = terms[t_idx]
            sign = -1 if sum(eta) % 2 else 1
            freq_sum += sign * np.asarray(freq, dtype=np.int64)
            coeff *= np.conj(a) if sign < 0 else a
            beta = sign * float(np.dot(freq, angles))
            for i, bit in enumerate(eta):
                if bit:
                    betas[i] += beta
        fr = betas % 1.0
        if np.all(np.minimum(fr, 1.0 - fr) < 1e-9):
            key = tuple(int(f) for f in freq_sum)
            merged[key] = merged.get(key, 0.0) + coeff
    if not merged:
        merged[(0,) * spec.system.dim] = 0.0
    return ObservableSpec(terms=tuple(merged.items()))


def dual_sequence_exact(spec: NilsequenceSpec, k: int, n: int) -> complex:
    """Exact limit value of the degree-k dual sequence at n.

    Supported closed forms: character sums on rotations, and single
    characters on the skew system (where the k-th difference of the
    quadratic phase either vanishes, giving the conjugate pattern, or
    equidistributes, giving 0 for irrational angle).
    """
    return dual_sequence_exact_window(spec, k, n, 1).values[0]


def dual_sequence_exact_window(
    spec: NilsequenceSpec, k: int, start: int, length: int
) -> SampledSequence:
    if k < 1:
        raise ValidationError("k must be >= 1")
    sys = spec.system
    if sys.kind == "rotation":
        dual_obs = _exact_dual_rotation(spec, k)
        dual_spec = NilsequenceSpec(
            system=sys, observable=dual_obs, basepoint=spec.basepoint
        )
        return nilsequence_sample(dual_spec, start, length)
    if sys.kind == "skew" and len(spec.observable.terms) == 1:
        (c1, c2), a = spec.observable.terms[0]
        ns = np.arange(start, start + length, dtype=np.int64)
        if c2 == 0:
            pass  # linear phase: the conjugate rule below applies
        elif k == 2:
            # degree-2 phase meets a 2-cube: the mixed difference
            # equidistributes for irrational angle, so the limit is 0
            return SampledSequence(
                start=start, values=np.zeros(ns.size, dtype=np.complex128)
            )
        # k exceeds the phase degree: the cube differences kill the phase
        # and only the conjugate survives, with the coefficient pattern
        # a^{2^{k-1}-1} conj(a)^{2^{k-1}}
        x, y = spec.basepoint
        phase = np.full(ns.size, (c1 * x + c2 * y) % 1.0)
        if c1:
            phase += frac_multiple(ns * c1, sys.theta)
        if c2:
            phase += frac_multiple(ns * ns * c2, sys.theta)
            phase += frac_multiple(ns, (2 * c2 * x) % 1.0)
        coeff = a ** (2 ** (k - 1) - 1) * np.conj(a) ** (2 ** (k - 1))
        values = coeff * np.exp(-2j * np.pi * phase)
        return SampledSequence(start=start, values=values)
    raise ValidationError(
        "exact dual value is only available for rotation character sums "
        "and single skew characters"
    )


@dataclass(frozen=True)
class ConvergenceReport:
    max_deviation_per_level: tuple
    monotone_decreasing: bool


def dual_uniform_convergence_check(
    spec: NilsequenceSpec,
    k: int,
    ladder,
    probe_ns,
) -> ConvergenceReport:
    """Deviation of truncated duals along a ladder of box sizes.

    With an exact closed form available, deviations are measured against
    it; otherwise against the finest ladder level.  Deviations are maxima
    over the probe positions.
    """
    ladder = list(ladder)
    if len(ladder) < 2:
        raise ValidationError("ladder needs at least two levels")
    for a, b in zip(ladder, ladder[1:]):
        if not (b.outer > a.outer and b.inner > a.inner):
            raise ValidationError("ladder must be strictly increasing")
    probes = list(probe_ns)
    truncated = np.asarray(
        [[dual_sequence(spec, k, t, n) for n in probes] for t in ladder]
    )
    try:
        reference = np.asarray(
            [dual_sequence_exact(spec, k, n) for n in probes]
        )
    except ValidationError:
        reference = truncated[-1]
    deviations = tuple(
        float(np.max(np.abs(level - reference))) for level in truncated
    )
    monotone = all(
        b <= a + 1e-12 for a, b in zip(deviations, deviations[1:])
    )
    return ConvergenceReport(
        max_deviation_per_level=deviations, monotone_decreasing=monotone
    )


@dataclass(frozen=True)
class StabilityResult:
    lhs: float
    rhs: float
    holds: bool


def _geo_mean(H: int, beta: float) -> complex:
    hs = np.arange(1, H + 1)
    return complex(np.mean(np.exp(2j * np.pi * beta * hs)))


def _truncated_dual_function_rotation(
    sys: MpSystemSpec, F: ObservableSpec, k: int, trunc: DualTruncation
) -> ObservableSpec:
    """Box-averaged dual function on a rotation, as an explicit trig poly.

    Identical to the exact expansion except that each shift direction
    contributes its finite geometric mean instead of the 0/1 limit.
    """
    angles = np.asarray(sys.angles)
    sides = [trunc.outer] * (k - 1) + [trunc.inner]
    etas = [e for e in itertools.product((0, 1), repeat=k) if any(e)]
    terms = F.terms
    if len(terms) ** len(etas) > 10**6:
        raise ResourceError("too many assignments in dual expansion")
    merged: dict = {}
    for assign in itertools.product(range(len(terms)), repeat=len(etas)):
        freq_sum = np.zeros(sys.dim, dtype=np.int64)
        coeff = 1.0 + 0.0j
        betas = np.zeros(k)
        for eta, t_idx in zip(etas, assign):
            freq, a = terms[t_idx]
            sign = -1 if sum(eta) % 2 else 1
            freq_sum += sign * np.asarray(freq, dtype=np.int64)
            coeff *= np.conj(a) if sign < 0 else a
            beta = sign * float(np.dot(freq, angles))
            for i, bit in enumerate(eta):
                if bit:
                    betas[i] += beta
        for i in range(k):
            coeff *= _geo_mean(sides[i], betas[i] % 1.0)
        key = tuple(int(f) for f in freq_sum)
        merged[key] = merged.get(key, 0.0) + coeff
    return ObservableSpec(terms=tuple(merged.items()))


def _truncated_dual_on_grid(
    sys, F: ObservableSpec, k: int, trunc: DualTruncation, nodes: np.ndarray
) -> np.ndarray:
    """Generic per-node box average (orbit evaluation); budget-guarded."""
    ranges = _box_ranges(k, trunc)
    volume = int(np.prod([r.size for r in ranges]))
    if volume * nodes.shape[0] > _BOX_BUDGET:
        raise ResourceError("dual grid evaluation over budget")
    max_shift = sum(int(r[-1]) for r in ranges)
    out = np.empty(nodes.shape[0], dtype=np.complex128)
    grids = np.meshgrid(*ranges, indexing="ij")
    for i in range(nodes.shape[0]):
        orbit = np.asarray(
            [orbit_point(sys, nodes[i], m) for m in range(max_shift + 1)]
        )
        window = F.evaluate(orbit)
        prod = np.ones(grids[0].shape, dtype=np.complex128)
        for eta in itertools.product((0, 1), repeat=k):
            if not any(eta):
                continue
            shift = sum(g for g, bit in zip(grids, eta) if bit)
            term = window[shift]
            prod *= np.conj(term) if sum(eta) % 2 else term
        out[i] = np.mean(prod)
    return out


def dual_l1_stability_check(
    sys: MpSystemSpec,
    F: ObservableSpec,
    G: ObservableSpec,
    k: int,
    trunc: DualTruncation,
    grid: QuadratureGrid,
) -> StabilityResult:
    """L^1 stability of the dual operator for sup-norm-bounded observables.

    lhs = ||D_k F - D_k G||_{L^1}, rhs = (2^k - 1) ||F - G||_{L^1}; the
    telescoping bound lhs <= rhs must hold up to the fixed truncation
    slack.  Requires ||F||_inf, ||G||_inf <= 1, validated on the grid.
    """
    for name, obs in (("F", F), ("G", G)):
        sup = observable_sup_norm(sys, obs, grid)
        if sup > 1.0 + 1e-9:
            raise ValidationError(
                f"||{name}||_inf = {sup:.6f} exceeds 1 on the grid"
            )
    nodes = grid.nodes()
    if sys.kind in ("rotation", "commuting_family"):
        dual_f = _truncated_dual_function_rotation(sys, F, k, trunc)
        dual_g = _truncated_dual_function_rotation(sys, G, k, trunc)
        lhs_vals = dual_f.evaluate(nodes) - dual_g.evaluate(nodes)
    else:
        lhs_vals = _truncated_dual_on_grid(
            sys, F, k, trunc, nodes
        ) - _truncated_dual_on_grid(sys, G, k, trunc, nodes)
    lhs = float(np.mean(np.abs(lhs_vals)))
    rhs = (2**k - 1) * float(np.mean(np.abs((F - G).evaluate(nodes))))
    return StabilityResult(
        lhs=lhs, rhs=rhs, holds=lhs <= rhs + DUAL_L1_SLACK
    )


def glue_by_residue(parts, W: int) -> SampledSequence:
    """Interleave residue-class parts: output(Wn + b) = parts[b-1](n).

    Residues b run over 1..W (b = W standing for the residue 0); ``None``
    entries are zero parts.  All given parts must share a common length L
    and start at 0; the output covers positions 1..W*L.
    """
    if W < 1:
        raise ValidationError("W must be >= 1")
    if len(parts) != W:
        raise ShapeError(f"need exactly {W} parts, got {len(parts)}")
    lengths = set()
    for part in parts:
        if part is None:
            continue
        if part.start != 0:
            raise ShapeError("parts must start at position 0")
        lengths.add(part.values.size)
    if not lengths:
        raise ValidationError("at least one part must be non-None")
    if len(lengths) != 1:
        raise ShapeError(f"parts have mixed lengths {sorted(lengths)}")
    L = lengths.pop()
    out = np.zeros(W * L, dtype=np.complex128)
    for idx, part in enumerate(parts):
        if part is None:
            continue
        out[idx::W] = part.values  # positions m = Wn + (idx+1), stored at m-1
    return SampledSequence(start=1, values=out)


def extract_residue(
    seq: SampledSequence, W: int, b: int, length: int | None = None
) -> SampledSequence:
    """Sub-sequence at positions m = Wn + b, n = 0, 1, ..., as start-0."""
    if not (1 <= b <= W):
        raise ValidationError(f"residue {b} outside 1..{W}")
    if seq.start > b:
        raise ShapeError(f"sequence does not cover position {b}")
    available = (seq.end - 1 - b) // W + 1 if seq.end > b else 0
    L = available if length is None else length
    if L < 1 or L > available:
        raise ShapeError(f"cannot extract {L} values at residue {b}")
    idx = b - seq.start + W * np.arange(L)
    return SampledSequence(start=0, values=seq.values[idx])
