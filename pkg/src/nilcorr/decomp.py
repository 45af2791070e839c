"""Decomposition experiments: fit a structured part to a correlation
sequence and measure the leftover in Cesaro mean and along primes.

The structured part is a combination of dictionary atoms e(theta * n^d)
(polynomial-phase characters, each realizable as an orbit observable of a
rotation or skew system) and their dual-sequence companions.  The dual of
the degree-(d<=k) phase atom under a (k+1)-cube is its conjugate times the
coefficient pattern, so dual atoms are sampled in closed form.  Least
squares fits use character atoms; convex-combination fits are restricted
to dual atoms with nonnegative weights summing to at most 1.

A fit failure never falsifies the underlying decomposition statements,
which quantify over all nilsequences; it only exhausts this dictionary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .correlation import CorrelationSpec, multicorrelation_sequence
from .errors import ShapeError, ValidationError, WindowError
from .nilseq import glue_by_residue
from .phases import frac_multiple
from .primes import PrimeTable, is_primorial, sieve
from .znfn import SampledSequence, uniform_cesaro_ladder

RIDGE = 1e-10


@dataclass(frozen=True)
class DictionaryAtom:
    """Polynomial-phase atom n -> e(theta * n^degree), or its dual flavor.

    degree 0 is the constant atom.  The dual flavor is the degree-(k+1)
    dual sequence of the atom, which for phase degree <= k is exactly the
    conjugate atom.
    """

    degree: int
    theta: float = 0.0
    dual: bool = False
    description: str = ""

    def __post_init__(self):
        if self.degree < 0:
            raise ValidationError("degree must be >= 0")
        object.__setattr__(self, "theta", float(self.theta) % 1.0)
        if not self.description:
            kind = "dual" if self.dual else "char"
            object.__setattr__(
                self,
                "description",
                f"{kind}:n^{self.degree}*{self.theta:.12f}",
            )

    @property
    def step(self) -> int:
        return self.degree

    def sample(self, positions: np.ndarray) -> np.ndarray:
        if self.degree == 0:
            return np.ones(len(positions), dtype=np.complex128)
        ms = np.asarray(positions, dtype=np.int64)
        values = np.exp(
            2j * np.pi * frac_multiple(ms**self.degree, self.theta)
        )
        return np.conj(values) if self.dual else values


@dataclass(frozen=True)
class NilDictionary:
    """Atoms sampled on one shared window of positions."""

    atoms: tuple
    step_bound: int
    positions: np.ndarray  # absolute positions, strictly increasing
    matrix: np.ndarray  # (len(positions), len(atoms))

    def __post_init__(self):
        if not self.atoms:
            raise ValidationError("dictionary needs at least one atom")
        for atom in self.atoms:
            if atom.step > self.step_bound:
                raise ValidationError(
                    f"atom {atom.description} exceeds step bound "
                    f"{self.step_bound}"
                )
        if self.matrix.shape != (len(self.positions), len(self.atoms)):
            raise ShapeError("matrix shape does not match atoms/positions")

    @classmethod
    def build(cls, atoms, step_bound: int, positions) -> "NilDictionary":
        positions = np.asarray(positions, dtype=np.int64)
        matrix = np.column_stack([a.sample(positions) for a in atoms])
        return cls(
            atoms=tuple(atoms),
            step_bound=step_bound,
            positions=positions,
            matrix=matrix,
        )

    def combine(self, coefficients: np.ndarray) -> np.ndarray:
        """Atom combination evaluated on every dictionary position."""
        return self.matrix @ np.asarray(coefficients)


def default_atoms(
    step_bound: int,
    system_angles=(),
    rational_denominator: int = 8,
    include_duals: bool = True,
):
    """Character atoms over a rational grid plus system-derived angles.

    Degree-1 atoms cover j/Q and +-m*theta (m <= step_bound) for every
    system angle, so correlation phases built from integer combinations of
    system angles are exactly representable.  Rational angles appear only
    at degree 1: a rational-angle polynomial phase is periodic, hence
    already in the span of the degree-1 rational characters, and keeping
    it would make the dictionary rank-deficient by construction.
    """
    derived = set()
    for theta in system_angles:
        for m in range(1, step_bound + 1):
            derived.add((m * theta) % 1.0)
            derived.add((-m * theta) % 1.0)
    rational = {
        (j / rational_denominator) % 1.0 for j in range(rational_denominator)
    }
    atoms = [DictionaryAtom(degree=0, description="char:constant")]
    for theta in sorted(a for a in rational | derived if a != 0.0):
        atoms.append(DictionaryAtom(degree=1, theta=theta))
    for d in range(2, step_bound + 1):
        for theta in sorted(a for a in derived if a != 0.0):
            atoms.append(DictionaryAtom(degree=d, theta=theta))
    if include_duals:
        duals = [
            DictionaryAtom(
                degree=a.degree,
                theta=a.theta,
                dual=True,
                description="dual:" + a.description.split(":", 1)[1],
            )
            for a in atoms
        ]
        atoms.extend(duals)
    return atoms


def default_dict_builder(
    step_bound: int,
    system_angles=(),
    rational_denominator: int = 8,
    include_duals: bool = True,
):
    """Builder (W, b, length) -> dictionary sampled at positions W*n + b."""
    atoms = default_atoms(
        step_bound, system_angles, rational_denominator, include_duals
    )

    def build(W: int, b: int, length: int) -> NilDictionary:
        positions = W * np.arange(length, dtype=np.int64) + b
        return NilDictionary.build(atoms, step_bound, positions)

    return build


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray  # aligned with dictionary.atoms (inactive: 0)
    active_indices: tuple  # atom indices the mode made available
    positions: np.ndarray  # fit-window positions
    fitted_values: np.ndarray  # combination on the fit window
    residual_l2: float
    regularized: bool
    mode: str

    def psi_sequence(self) -> SampledSequence:
        """Fitted values as a sequence (contiguous fit windows only)."""
        diffs = np.diff(self.positions)
        if self.positions.size > 1 and not np.all(diffs == 1):
            raise ShapeError("fit positions are strided, not contiguous")
        return SampledSequence(
            start=int(self.positions[0]), values=self.fitted_values
        )


def _solve_least_squares(A, y):
    coeffs, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    regularized = False
    if rank < A.shape[1]:
        gram = A.conj().T @ A + RIDGE * np.eye(A.shape[1])
        coeffs = np.linalg.solve(gram, A.conj().T @ y)
        regularized = True
    return coeffs, regularized


def _solve_convex(A, y):
    """Minimize ||A c - y||^2 over real c >= 0 with sum(c) <= 1."""
    p = A.shape[1]
    gram = (A.conj().T @ A).real
    lin = (A.conj().T @ y).real
    const = float(np.vdot(y, y).real)

    def objective(c):
        return float(0.5 * c @ gram @ c - lin @ c + 0.5 * const)

    def gradient(c):
        return gram @ c - lin

    result = scipy.optimize.minimize(
        objective,
        np.zeros(p),
        jac=gradient,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * p,
        constraints=[
            {
                "type": "ineq",
                "fun": lambda c: 1.0 - float(np.sum(c)),
                "jac": lambda c: -np.ones(p),
            }
        ],
        options={"maxiter": 500, "ftol": 1e-14},
    )
    coeffs = np.clip(result.x, 0.0, None)
    total = float(np.sum(coeffs))
    if total > 1.0:
        coeffs = coeffs / total  # project back onto the simplex face
    return coeffs


def fit_nilsequence(
    alpha: SampledSequence,
    dictionary: NilDictionary,
    window: tuple[int, int],
    constraint: str = "least_squares",
) -> FitResult:
    """Fit a dictionary combination to alpha on the window.

    least_squares uses the character atoms; convex_combination uses the
    dual atoms with nonnegative weights of total at most 1.
    """
    if constraint not in ("least_squares", "convex_combination"):
        raise ValidationError(f"unknown constraint {constraint!r}")
    lo, hi = window
    mask = (dictionary.positions >= lo) & (dictionary.positions < hi)
    if not np.any(mask):
        raise WindowError("window selects no dictionary rows")
    positions = dictionary.positions[mask]
    if positions[0] < alpha.start or positions[-1] >= alpha.end:
        raise WindowError("alpha does not cover the fit window")
    y = alpha.values[positions - alpha.start]
    want_dual = constraint == "convex_combination"
    active = [
        i for i, atom in enumerate(dictionary.atoms) if atom.dual == want_dual
    ]
    if not active:
        raise ValidationError(
            f"no {'dual' if want_dual else 'character'} atoms in dictionary"
        )
    A = dictionary.matrix[np.ix_(mask, active)]
    if want_dual:
        sub_coeffs = _solve_convex(A, y)
        regularized = False
    else:
        sub_coeffs, regularized = _solve_least_squares(A, y)
    coeffs = np.zeros(len(dictionary.atoms), dtype=np.complex128)
    coeffs[active] = sub_coeffs
    fitted = A @ sub_coeffs
    return FitResult(
        coefficients=coeffs,
        active_indices=tuple(active),
        positions=positions,
        fitted_values=fitted,
        residual_l2=float(np.linalg.norm(fitted - y)),
        regularized=regularized,
        mode=constraint,
    )


@dataclass(frozen=True)
class DecompositionReport:
    """Quantitative outcome of one decomposition experiment."""

    cesaro_l1: float
    prime_l1: float
    window: tuple
    N: int
    epsilon_target: float
    achieved: bool
    cesaro_fluctuation: float = 0.0
    coefficients: dict | None = None
    excluded_primes: tuple = ()
    step_bound: int | None = None
    mode: str = ""

    def __post_init__(self):
        if self.cesaro_l1 < 0 or self.prime_l1 < 0:
            raise ValidationError("errors must be nonnegative")


def _prime_l1(diff_values: np.ndarray, N: int, table: PrimeTable, excluded):
    """Average of the diff over primes <= N, skipping excluded primes."""
    mask = table.is_prime[1 : N + 1].copy()
    for p in excluded:
        if p <= N:
            mask[p - 1] = False
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise ValidationError("no usable primes in range")
    return math.fsum(diff_values[mask]) / count


def decomposition_report(
    alpha: SampledSequence,
    psi: SampledSequence,
    N: int,
    table: PrimeTable,
    epsilon_target: float,
    coefficients=None,
    excluded_primes=(),
    step_bound=None,
    mode="",
) -> DecompositionReport:
    """Cesaro and prime-averaged L^1 errors of psi against alpha on [1, N]."""
    if N > table.limit:
        raise WindowError(f"sieve covers {table.limit} < N = {N}")
    diff_values = np.abs(alpha.window(1, N + 1) - psi.window(1, N + 1))
    diff = SampledSequence(start=1, values=diff_values.astype(np.complex128))
    estimate = uniform_cesaro_ladder(diff)
    cesaro = float(estimate.value.real)
    prime = float(_prime_l1(diff_values, N, table, excluded_primes))
    return DecompositionReport(
        cesaro_l1=cesaro,
        prime_l1=prime,
        window=(1, N + 1),
        N=N,
        epsilon_target=float(epsilon_target),
        achieved=bool(cesaro <= epsilon_target and prime <= epsilon_target),
        cesaro_fluctuation=float(estimate.fluctuation),
        coefficients=coefficients,
        excluded_primes=tuple(int(p) for p in excluded_primes),
        step_bound=step_bound,
        mode=mode,
    )


def _coeff_jsonable(coeffs: np.ndarray) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(coeffs)]


def fit_and_report(
    alpha: SampledSequence,
    dict_builder,
    N: int,
    table: PrimeTable,
    epsilon_target: float,
    mode: str = "least_squares",
) -> tuple[DecompositionReport, FitResult]:
    """Plain pipeline: fit on [1, N], then report both errors."""
    dictionary = dict_builder(1, 1, N)
    fit = fit_nilsequence(alpha, dictionary, (1, N + 1), mode)
    psi = fit.psi_sequence()
    report = decomposition_report(
        alpha,
        psi,
        N,
        table,
        epsilon_target,
        coefficients={"1": _coeff_jsonable(fit.coefficients)},
        step_bound=dictionary.step_bound,
        mode=mode,
    )
    return report, fit


def _prime_factors(W: int):
    rest, p, out = W, 2, []
    while rest > 1:
        if rest % p == 0:
            out.append(p)
            while rest % p == 0:
                rest //= p
        p += 1
    return tuple(out)


def wtrick_decompose(
    alpha: SampledSequence,
    W: int,
    table: PrimeTable,
    dict_builder,
    epsilon_target: float,
    N: int,
    mode: str = "least_squares",
) -> DecompositionReport:
    """Per-residue fits glued back along residue classes mod W.

    Each coprime residue b gets its own fit of n -> alpha(Wn + b); the
    glued candidate is zero on non-coprime residues, so its prime-average
    error ignores exactly the primes dividing W, which are excluded from
    the average and reported.  W = 1 reduces to the plain pipeline on
    identical arithmetic.
    """
    if not is_primorial(W):
        raise ValidationError(f"W = {W} is not a primorial")
    if N < W:
        raise ValidationError("need N >= W")
    L = -(-N // W)  # ceil(N / W)
    parts = []
    per_residue: dict = {}
    step_bound = None
    for b in range(1, W + 1):
        if math.gcd(b, W) != 1:
            parts.append(None)
            continue
        dictionary = dict_builder(W, b, L)
        step_bound = dictionary.step_bound
        fit = fit_nilsequence(alpha, dictionary, (1, N + 1), mode)
        # same column subset and shapes as the fit itself, so the W=1 path
        # reproduces the plain pipeline bit for bit
        act = list(fit.active_indices)
        part_values = dictionary.matrix[:, act] @ fit.coefficients[act]
        parts.append(SampledSequence(start=0, values=part_values))
        per_residue[str(b)] = _coeff_jsonable(fit.coefficients)
    glued = glue_by_residue(parts, W)
    psi = SampledSequence(start=1, values=glued.values[:N])
    excluded = tuple(p for p in _prime_factors(W) if p <= N)
    return decomposition_report(
        alpha,
        psi,
        N,
        table,
        epsilon_target,
        coefficients=per_residue,
        excluded_primes=excluded,
        step_bound=step_bound,
        mode=mode,
    )


def product_system_experiment(
    nil_part: CorrelationSpec,
    mixing_part: CorrelationSpec,
    epsilon_target: float,
    N: int,
    table: PrimeTable | None = None,
    dict_builder=None,
    mode: str = "least_squares",
) -> DecompositionReport:
    """Correlation of a product system: structured factor times mixing factor.

    The product-system correlation of product observables factorizes
    termwise (exact for characters), so alpha = alpha_nil * alpha_mix.
    The fit uses the structured factor's dictionary; the mixing factor
    drives alpha to zero away from n = 0.
    """
    if mixing_part.system.kind != "doubling":
        raise ValidationError("mixing part must be a doubling-map spec")
    alpha_nil = multicorrelation_sequence(nil_part, (1, N + 1))
    alpha_mix = multicorrelation_sequence(mixing_part, (1, N + 1))
    alpha = SampledSequence(start=1, values=alpha_nil.values * alpha_mix.values)
    if table is None:
        table = sieve(N)
    if dict_builder is None:
        dict_builder = default_dict_builder(
            max(nil_part.k, 1), nil_part.system.angle_parameters
        )
    report, _ = fit_and_report(
        alpha, dict_builder, N, table, epsilon_target, mode
    )
    return report


# --- report serialization ---------------------------------------------------

REPORT_CSV_FIELDS = (
    "experiment",
    "N",
    "epsilon_target",
    "cesaro_l1",
    "prime_l1",
    "cesaro_fluctuation",
    "achieved",
    "excluded_prime_count",
    "mode",
)


def report_json_dict(report: DecompositionReport) -> dict:
    return {
        "cesaro_l1": report.cesaro_l1,
        "prime_l1": report.prime_l1,
        "cesaro_fluctuation": report.cesaro_fluctuation,
        "window": list(report.window),
        "N": report.N,
        "epsilon_target": report.epsilon_target,
        "achieved": report.achieved,
        "coefficients": report.coefficients,
        "excluded_primes": list(report.excluded_primes),
        "step_bound": report.step_bound,
        "mode": report.mode,
    }


def report_csv_row(report: DecompositionReport, experiment: str) -> dict:
    return {
        "experiment": experiment,
        "N": report.N,
        "epsilon_target": report.epsilon_target,
        "cesaro_l1": report.cesaro_l1,
        "prime_l1": report.prime_l1,
        "cesaro_fluctuation": report.cesaro_fluctuation,
        "achieved": report.achieved,
        "excluded_prime_count": len(report.excluded_primes),
        "mode": report.mode,
    }
