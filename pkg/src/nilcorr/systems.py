"""Explicit measure-preserving systems in coordinates.

Every system ships a closed form for its n-th iterate, so orbits need no
step-by-step iteration (except the doubling map, whose float dynamics *is*
exact doubling).  Supported kinds:

- ``rotation``: translation by a vector of angles on the d-torus;
- ``commuting_family``: several commuting torus translations sharing a torus;
- ``skew``: (x, y) -> (x + theta, y + 2x + theta) on the 2-torus, with
  T^n(x, y) = (x + n theta, y + 2nx + n^2 theta);
- ``doubling``: x -> 2x mod 1 (the only non-invertible kind);
- ``heisenberg``: left translation by group element (a, b, c) on the
  quotient of the 3-dimensional upper-triangular unipotent group by its
  integer lattice, in fundamental-domain coordinates [0,1)^3.

Observables are finite character combinations; integrals of such
combinations against the invariant measure reduce to an exact symbolic
rule (a character integrates to its coefficient iff its frequency vector
vanishes).  Uniform-grid quadrature is provided as an independent route
and is exact for trigonometric polynomials on Nyquist-sized grids.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    ResourceError,
    ShapeError,
    ValidationError,
)
from .phases import frac_multiple, unit_phase

_KINDS = ("rotation", "skew", "doubling", "heisenberg", "commuting_family")


@dataclass(frozen=True)
class MpSystemSpec:
    kind: str
    angles: tuple = ()  # rotation: angles; commuting_family: angle vectors
    theta: float = 0.0  # skew
    translation: tuple = ()  # heisenberg (a, b, c)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown system kind {self.kind!r}")
        if self.kind == "rotation":
            if not self.angles:
                raise ValidationError("rotation needs at least one angle")
            object.__setattr__(
                self, "angles", tuple(float(a) % 1.0 for a in self.angles)
            )
        elif self.kind == "commuting_family":
            vecs = tuple(tuple(float(a) % 1.0 for a in v) for v in self.angles)
            if not vecs:
                raise ValidationError("commuting_family needs >= 1 vector")
            dims = {len(v) for v in vecs}
            if len(dims) != 1:
                raise ShapeError("family vectors must share the torus dimension")
            object.__setattr__(self, "angles", vecs)
        elif self.kind == "skew":
            object.__setattr__(self, "theta", float(self.theta) % 1.0)
        elif self.kind == "heisenberg":
            if len(self.translation) != 3:
                raise ValidationError("heisenberg translation needs (a, b, c)")
            object.__setattr__(
                self,
                "translation",
                tuple(float(t) % 1.0 for t in self.translation),
            )

    # --- constructors -----------------------------------------------------
    @classmethod
    def rotation(cls, *angles: float) -> "MpSystemSpec":
        return cls(kind="rotation", angles=tuple(angles))

    @classmethod
    def commuting_rotations(cls, vectors) -> "MpSystemSpec":
        return cls(kind="commuting_family", angles=tuple(map(tuple, vectors)))

    @classmethod
    def skew(cls, theta: float) -> "MpSystemSpec":
        return cls(kind="skew", theta=theta)

    @classmethod
    def doubling(cls) -> "MpSystemSpec":
        return cls(kind="doubling")

    @classmethod
    def heisenberg(cls, a: float, b: float, c: float) -> "MpSystemSpec":
        return cls(kind="heisenberg", translation=(a, b, c))

    # --- structure --------------------------------------------------------
    @property
    def dim(self) -> int:
        if self.kind == "rotation":
            return len(self.angles)
        if self.kind == "commuting_family":
            return len(self.angles[0])
        return {"skew": 2, "doubling": 1, "heisenberg": 3}[self.kind]

    @property
    def num_transformations(self) -> int:
        return len(self.angles) if self.kind == "commuting_family" else 1

    @property
    def invertible(self) -> bool:
        return self.kind != "doubling"

    @property
    def angle_parameters(self) -> tuple:
        """Flat tuple of every angle in the system (dictionary seeds)."""
        if self.kind == "rotation":
            return self.angles
        if self.kind == "commuting_family":
            return tuple(a for v in self.angles for a in v)
        if self.kind == "skew":
            return (self.theta,)
        if self.kind == "heisenberg":
            return self.translation
        return ()


@dataclass(frozen=True)
class ObservableSpec:
    """Finite combination sum_t coeff_t * e(freq_t . x) of characters.

    Frequencies are integer vectors matching the system dimension.  On the
    Heisenberg quotient the third coordinate refers to the fundamental-
    domain z coordinate; characters with nonzero z-frequency are honest
    bounded observables but are discontinuous at the gluing.
    """

    terms: tuple  # ((freq tuple[int,...], coeff complex), ...)

    def __post_init__(self):
        cleaned = []
        dims = set()
        for freq, coeff in self.terms:
            freq = tuple(int(f) for f in freq)
            dims.add(len(freq))
            cleaned.append((freq, complex(coeff)))
        if not cleaned:
            raise ValidationError("observable needs at least one term")
        if len(dims) != 1:
            raise ShapeError("mixed frequency dimensions in observable")
        if not np.all(np.isfinite([c for _, c in cleaned])):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "terms", tuple(cleaned))

    @classmethod
    def character(cls, freq, coeff=1.0) -> "ObservableSpec":
        return cls(terms=((tuple(freq), coeff),))

    @classmethod
    def constant(cls, value, dim: int) -> "ObservableSpec":
        return cls(terms=(((0,) * dim, value),))

    @property
    def dim(self) -> int:
        return len(self.terms[0][0])

    @property
    def max_abs_freq(self) -> int:
        return max(max(abs(f) for f in freq) for freq, _ in self.terms)

    def conjugate(self) -> "ObservableSpec":
        return ObservableSpec(
            terms=tuple(
                (tuple(-f for f in freq), np.conj(c)) for freq, c in self.terms
            )
        )

    def scaled(self, factor) -> "ObservableSpec":
        return ObservableSpec(
            terms=tuple((freq, c * factor) for freq, c in self.terms)
        )

    def __add__(self, other: "ObservableSpec") -> "ObservableSpec":
        if self.dim != other.dim:
            raise ShapeError("dimension mismatch")
        merged: dict = {}
        for freq, c in self.terms + other.terms:
            merged[freq] = merged.get(freq, 0.0) + c
        return ObservableSpec(terms=tuple(merged.items()))

    def __sub__(self, other: "ObservableSpec") -> "ObservableSpec":
        return self + other.scaled(-1.0)

    def __mul__(self, other: "ObservableSpec") -> "ObservableSpec":
        if self.dim != other.dim:
            raise ShapeError("dimension mismatch")
        merged: dict = {}
        for (f1, c1), (f2, c2) in itertools.product(self.terms, other.terms):
            freq = tuple(a + b for a, b in zip(f1, f2))
            merged[freq] = merged.get(freq, 0.0) + c1 * c2
        return ObservableSpec(terms=tuple(merged.items()))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (..., dim)."""
        pts = np.asarray(points, dtype=np.float64)
        out = np.zeros(pts.shape[:-1], dtype=np.complex128)
        for freq, coeff in self.terms:
            out += coeff * np.exp(2j * np.pi * (pts @ np.asarray(freq)))
        return out


@dataclass(frozen=True)
class QuadratureGrid:
    points_per_dim: int
    dimension: int

    def __post_init__(self):
        if self.points_per_dim < 2:
            raise ValidationError("points_per_dim must be >= 2")
        if self.dimension < 1:
            raise ValidationError("dimension must be >= 1")

    def nodes(self) -> np.ndarray:
        """Uniform grid (j_1, ..., j_d)/P, shape (P^d, d)."""
        axis = np.arange(self.points_per_dim) / self.points_per_dim
        mesh = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def _binom2(n) -> np.ndarray:
    """n(n-1)/2, elementwise, exact for integer input arrays."""
    n = np.asarray(n, dtype=np.float64)
    return n * (n - 1.0) / 2.0


def orbit_point(sys: MpSystemSpec, x0, n: int, which: int = 0):
    """Coordinates of T_which^n x0, via the closed-form n-th iterate."""
    if which < 0 or which >= sys.num_transformations:
        raise ValidationError(f"transformation index {which} out of range")
    x = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x.size != sys.dim:
        raise ShapeError(f"point has dim {x.size}, system has dim {sys.dim}")
    if sys.kind == "rotation":
        return (x + n * np.asarray(sys.angles)) % 1.0
    if sys.kind == "commuting_family":
        return (x + n * np.asarray(sys.angles[which])) % 1.0
    if sys.kind == "skew":
        return np.array(
            [
                (x[0] + n * sys.theta) % 1.0,
                (x[1] + 2 * n * x[0] + n * n * sys.theta) % 1.0,
            ]
        )
    if sys.kind == "doubling":
        if n < 0:
            raise DomainError("doubling map is not invertible; need n >= 0")
        v = float(x[0])
        for _ in range(n):
            v = (2.0 * v) % 1.0  # exact in binary64
        return np.array([v])
    # heisenberg: g^n (x,y,z) = (x+na, y+nb, z+nc+C(n,2)ab+na*y), reduced
    a, b, c = sys.translation
    gx = x[0] + n * a
    gy = x[1] + n * b
    gz = x[2] + n * c + _binom2(n) * a * b + n * a * x[1]
    return _heisenberg_reduce(gx, gy, gz)


def _heisenberg_reduce(gx, gy, gz):
    """Unique fundamental-domain representative in [0,1)^3.

    Right-multiplying by the lattice element (p, q, r) sends (x, y, z) to
    (x+p, y+q, z+xq+r); choosing q = -floor(y), then p, r gives
    (frac x, frac y, frac(z - x*floor(y))).
    """
    return np.array([gx % 1.0, gy % 1.0, (gz - gx * np.floor(gy)) % 1.0])


def orbit_points(sys: MpSystemSpec, x0, ns: np.ndarray, which: int = 0):
    """Vectorized orbit: array of shape (len(ns), dim)."""
    ns = np.asarray(ns)
    if sys.kind == "doubling":
        if np.any(ns < 0):
            raise DomainError("doubling map is not invertible; need n >= 0")
        out = np.empty((ns.size, 1))
        order = np.argsort(ns)
        v = float(np.atleast_1d(x0)[0])
        step = 0
        for pos in order:
            target = int(ns[pos])
            while step < target:
                v = (2.0 * v) % 1.0
                step += 1
            out[pos, 0] = v
        return out
    stacked = [orbit_point(sys, x0, int(n), which) for n in ns]
    return np.asarray(stacked)


def _interval_character_integral(freqs: np.ndarray) -> complex:
    """Integral over [0,1)^d of e(freq . x) for real frequency vectors."""
    total = 1.0 + 0.0j
    for f in np.atleast_1d(freqs):
        if f == 0:
            continue
        if float(f).is_integer():
            return 0.0
        total *= (np.exp(2j * np.pi * f) - 1.0) / (2j * np.pi * f)
    return complex(total)


def integrate(
    sys: MpSystemSpec, F: ObservableSpec, grid: QuadratureGrid | None = None
) -> complex:
    """Integral of F against the invariant measure.

    Without a grid the exact symbolic rule applies (characters of nonzero
    frequency vanish).  With a grid, uniform quadrature is used instead and
    must satisfy the Nyquist condition P >= 2*max|freq| + 1, which makes it
    exact for the trigonometric polynomial F.
    """
    if F.dim != sys.dim:
        raise ShapeError("observable/system dimension mismatch")
    if grid is None:
        total = 0.0 + 0.0j
        for freq, coeff in F.terms:
            if all(f == 0 for f in freq):
                total += coeff
        return complex(total)
    if grid.dimension != sys.dim:
        raise ShapeError("grid/system dimension mismatch")
    if grid.points_per_dim < 2 * F.max_abs_freq + 1:
        raise ConfigError(
            f"grid with P={grid.points_per_dim} too coarse for max frequency "
            f"{F.max_abs_freq}; need P >= {2 * F.max_abs_freq + 1}"
        )
    return complex(np.mean(F.evaluate(grid.nodes())))


def observable_sup_norm(
    sys: MpSystemSpec, F: ObservableSpec, grid: QuadratureGrid
) -> float:
    return float(np.max(np.abs(F.evaluate(grid.nodes()))))


# --- symbolic composition of characters with iterates ----------------------

def compose_term_with_power(
    sys: MpSystemSpec, freq: tuple, coeff: complex, m: int, which: int = 0
):
    """Exact form of coeff*e(freq.x) composed with T_which^m.

    Returns (freq', coeff') when the composition is again a character, or
    None when it is not expressible this way (Heisenberg characters with
    nonzero z-frequency).  For the doubling map the returned frequency is a
    Python int scaled by 2^m; callers must treat it exactly.
    """
    if sys.kind in ("rotation", "commuting_family"):
        angles = (
            sys.angles if sys.kind == "rotation" else sys.angles[which]
        )
        phase = 0.0
        for f, ang in zip(freq, angles):
            if f:
                phase += float(frac_multiple(m * f, ang))
        return freq, coeff * np.exp(2j * np.pi * phase)
    if sys.kind == "skew":
        c1, c2 = freq
        phase_coeff = c1 * m + c2 * m * m
        new_freq = (c1 + 2 * m * c2, c2)
        return new_freq, coeff * complex(unit_phase(phase_coeff, sys.theta))
    if sys.kind == "doubling":
        if m < 0:
            raise DomainError("doubling map needs nonnegative exponents")
        (c,) = freq
        return (c * (2**m),), coeff
    if sys.kind == "heisenberg":
        c1, c2, c3 = freq
        if c3 != 0:
            return None
        a, b, _ = sys.translation
        phase = float(frac_multiple(m * c1, a)) + float(frac_multiple(m * c2, b))
        return freq, coeff * np.exp(2j * np.pi * phase)
    raise ValidationError(f"unsupported kind {sys.kind!r}")


def _geometric_mean_phase(H: int, beta: float) -> complex:
    """(1/H) sum_{h=1}^{H} e(h beta)."""
    hs = np.arange(1, H + 1)
    return complex(np.mean(np.exp(2j * np.pi * beta * hs)))


_HK_COMBO_BUDGET = 10**6
_HK_TUPLE_BUDGET = 10**7


def _hk_rotation_factored(
    sys: MpSystemSpec, F: ObservableSpec, k: int, H_caps
) -> float:
    """Cube average for torus translations, factored over shift coordinates.

    For a translation, each assignment of a character term to a cube vertex
    contributes a product of one-dimensional geometric means; vertices with
    an odd number of marked directions carry the conjugated term.
    """
    angles = np.asarray(
        sys.angles if sys.kind == "rotation" else sys.angles[0], dtype=float
    )
    etas = list(itertools.product((0, 1), repeat=k))
    nterms = len(F.terms)
    if nterms ** len(etas) > _HK_COMBO_BUDGET:
        raise ResourceError("too many term assignments in cube average")
    total = 0.0 + 0.0j
    for assign in itertools.product(range(nterms), repeat=len(etas)):
        freq_sum = np.zeros(sys.dim, dtype=np.int64)
        coeff = 1.0 + 0.0j
        betas = np.zeros(k)
        for eta, t_idx in zip(etas, assign):
            freq, c = F.terms[t_idx]
            sign = -1 if sum(eta) % 2 else 1
            freq_sum += sign * np.asarray(freq, dtype=np.int64)
            coeff *= np.conj(c) if sign < 0 else c
            beta_term = sign * float(np.dot(freq, angles))
            for i, bit in enumerate(eta):
                if bit:
                    betas[i] += beta_term
        if np.any(freq_sum != 0):
            continue
        value = coeff
        for i in range(k):
            value *= _geometric_mean_phase(int(H_caps[i]), betas[i] % 1.0)
        total += value
    return float(total.real)


def _hk_generic(sys, F, k, H_caps, grid) -> float:
    """Cube average via per-tuple symbolic composition (or grid orbits)."""
    tuples = 1
    for cap in H_caps:
        tuples *= int(cap)
    if tuples * len(F.terms) ** (2**k) > _HK_TUPLE_BUDGET:
        raise ResourceError("cube average over tuple budget")
    etas = list(itertools.product((0, 1), repeat=k))
    total = 0.0 + 0.0j
    nodes = grid.nodes() if grid is not None else None
    for h in itertools.product(*[range(1, int(c) + 1) for c in H_caps]):
        factors = []
        symbolic_ok = True
        for eta in etas:
            m = int(np.dot(eta, h))
            base = F if sum(eta) % 2 == 0 else F.conjugate()
            comp_terms = []
            for freq, c in base.terms:
                comp = compose_term_with_power(sys, freq, c, m)
                if comp is None:
                    symbolic_ok = False
                    break
                comp_terms.append(comp)
            if not symbolic_ok:
                break
            factors.append(comp_terms)
        if symbolic_ok:
            for assign in itertools.product(*factors):
                freq_groups: dict = {}
                coeff = 1.0 + 0.0j
                for freq, c in assign:
                    coeff *= c
                    for d, f in enumerate(freq):
                        freq_groups[d] = freq_groups.get(d, 0) + f
                if all(v == 0 for v in freq_groups.values()):
                    total += coeff
        else:
            if grid is None:
                raise ConfigError(
                    "system/observable pair needs a quadrature grid for the "
                    "cube average"
                )
            prod = np.ones(nodes.shape[0], dtype=np.complex128)
            for eta in etas:
                m = int(np.dot(eta, h))
                pts = np.asarray(
                    [
                        orbit_point(sys, nodes[i], m)
                        for i in range(nodes.shape[0])
                    ]
                )
                vals = F.evaluate(pts)
                prod *= np.conj(vals) if sum(eta) % 2 else vals
            total += np.mean(prod)
    return float((total / tuples).real)


def hk_seminorm_estimate(
    sys: MpSystemSpec,
    F: ObservableSpec,
    k: int,
    H_caps,
    grid: QuadratureGrid | None = None,
) -> float:
    """Truncated k-step Host-Kra seminorm of F in the given system.

    The iterated limits over shift parameters are replaced by finite caps
    H_caps = (H_1, ..., H_k); the integral over the space is evaluated by
    the exact character rule wherever the composition of F with iterates is
    symbolically available, and by grid-orbit quadrature otherwise.  For a
    commuting family the seminorm refers to the first transformation.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if len(H_caps) != k or any(int(c) < 1 for c in H_caps):
        raise ValidationError("H_caps must be k integers >= 1")
    if F.dim != sys.dim:
        raise ShapeError("observable/system dimension mismatch")
    if sys.kind in ("rotation", "commuting_family"):
        inner = _hk_rotation_factored(sys, F, k, H_caps)
    else:
        inner = _hk_generic(sys, F, k, H_caps, grid)
    return float(max(inner, 0.0) ** (1.0 / 2**k))
