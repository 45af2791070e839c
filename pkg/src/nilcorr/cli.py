"""Experiment runner: reproducible configs in, JSON report + CSV series out.

Subcommands: ``run`` (execute one experiment from a config file or from the
shipped catalog), ``list`` (catalog of named experiments), ``validate``
(check a config without running).  Configs are flat JSON with a versioned
schema and strict key checking; identical (config, seed) runs produce
byte-identical reports except for the timestamp field.

Exit codes: 0 success, 2 validation error, 3 resource-budget error,
1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import decomp, gowers, nilseq, primes, systems, znfn
from .correlation import (
    CorrelationSpec,
    IntPolynomial,
    multicorrelation_sequence,
)
from .errors import ResourceError, ValidationError
from .primes import cached_sieve
from .systems import MpSystemSpec, ObservableSpec, QuadratureGrid
from .znfn import SampledSequence

SCHEMA_VERSION = 1

_SQRT2_FRAC = math.sqrt(2.0) - 1.0
_GOLDEN_FRAC = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    params: dict

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "kind": self.kind,
               "seed": self.seed}
        out.update(self.params)
        return out


# Per-kind schema: {key: (type, default)}; None default means required.
_COMMON_KEYS = {"schema_version", "kind", "seed"}

_SCHEMAS: dict = {
    "gowers-norm": {
        "n": (int, 8),
        "k": (int, 2),
        "function": (str, "constant"),
        "char_freq": (int, 1),
        "mode": (str, "exact"),
        "sample_count": (int, 10000),
        "budget": (int, gowers.DEFAULT_EXACT_BUDGET),
        "oracle_trials": (int, 0),
        "monotonicity_trials": (int, 0),
        "sizes": (list, [8, 16, 32, 64]),
    },
    "csg": {
        "trials": (int, 100),
        "k_values": (list, [2]),
        "sizes": (list, [16]),
        "slack": (float, 1e-9),
        "threads": (int, 0),
    },
    "seminorm": {
        "sequence": (str, "character"),
        "theta": (float, _SQRT2_FRAC),
        "k": (int, 2),
        "H": (int, 64),
        "N": (int, 2**14),
        "compare_hk": (bool, False),
        "caps": (list, [64, 64]),
    },
    "correlation": {
        "system": (str, None),
        "theta": (float, 0.0),
        "angles": (list, []),
        "observables": (list, None),
        "exponents": (list, []),
        "M": (int, 0),
        "N": (int, None),
    },
    "dual": {
        "mode": (str, "convergence"),
        "system": (str, "rotation"),
        "theta": (float, _SQRT2_FRAC),
        "freq": (list, [1]),
        "basepoint": (list, [0.0]),
        "k": (int, 2),
        "ladder": (list, [[16, 256], [64, 1024], [256, 4096]]),
        "probes": (list, list(range(16))),
        "H": (int, 64),
        "N": (int, 2**14),
        "outer": (int, 256),
        "inner": (int, 4096),
        "grid_p": (int, 256),
        "pair_count": (int, 20),
    },
    "primes-gap": {
        "N": (int, None),
        "w": (int, 0),
        "b": (int, 1),
        "ladder": (bool, False),
    },
    "decompose": {
        "alpha": (str, None),
        "theta": (float, _SQRT2_FRAC),
        "N": (int, None),
        "epsilon_target": (float, 0.01),
        "mode": (str, "least_squares"),
        "rational_denominator": (int, 8),
        "step_bound": (int, 0),
    },
    "wtrick": {
        "alpha": (str, None),
        "theta": (float, _SQRT2_FRAC),
        "N": (int, None),
        "epsilon_target": (float, 0.01),
        "mode": (str, "least_squares"),
        "rational_denominator": (int, 8),
        "step_bound": (int, 0),
        "W": (int, None),
    },
    "product": {
        "theta": (float, _SQRT2_FRAC),
        "N": (int, None),
        "epsilon_target": (float, 0.01),
    },
}


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config dict against the schema (strict keys)."""
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
    kind = raw.get("kind")
    if kind not in _SCHEMAS:
        raise ValidationError(
            f"unknown kind {kind!r}; expected one of {sorted(_SCHEMAS)}"
        )
    schema = _SCHEMAS[kind]
    for key in raw:
        if key not in _COMMON_KEYS and key not in schema:
            raise ValidationError(
                f"unknown field {key!r} for kind {kind!r}"
            )
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ValidationError("seed must be an integer")
    params = {}
    for key, (typ, default) in schema.items():
        if key in raw:
            value = raw[key]
            if typ in (int, float) and isinstance(value, bool):
                raise ValidationError(f"field {key!r} must be {typ.__name__}")
            if typ is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, typ):
                raise ValidationError(
                    f"field {key!r} must be {typ.__name__}"
                )
            params[key] = value
        elif default is None:
            raise ValidationError(f"missing required field {key!r}")
        else:
            params[key] = default
    return ExperimentConfig(kind=kind, seed=seed, params=params)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)


# --- shipped experiments ----------------------------------------------------

EXPERIMENTS: dict = {
    "gowers-oracle-sweep": (
        "Exact U^2 norm vs Fourier fourth-moment fast path on seeded inputs",
        {"kind": "gowers-norm", "oracle_trials": 1000,
         "sizes": [8, 16, 32, 64]},
    ),
    "norm-monotonicity": (
        "U^2 <= U^3 on seeded random inputs over Z_N, N <= 32",
        {"kind": "gowers-norm", "monotonicity_trials": 1000, "sizes": [8, 16, 32]},
    ),
    "csg-random-sweep": (
        "Cube-product inequality on seeded random families, k in {2,3}",
        {"kind": "csg", "trials": 10000, "k_values": [2, 3],
         "sizes": [8, 16, 32]},
    ),
    "seminorm-character": (
        "Truncated uniformity seminorm of a linear character",
        {"kind": "seminorm", "sequence": "character"},
    ),
    "seminorm-bridge-rotation": (
        "System seminorm vs sequence seminorm along a rotation orbit",
        {"kind": "seminorm", "compare_hk": True},
    ),
    "dual-ladder-rotation": (
        "Dual box averages converge along a ladder (rotation character)",
        {"kind": "dual", "mode": "convergence"},
    ),
    "dual-identities-rotation": (
        "Window correlation with the dual equals the fourth seminorm power",
        {"kind": "dual", "mode": "identity"},
    ),
    "dual-l1-stability-family": (
        "Telescoping L^1 bound for dual functions on 20 character pairs",
        {"kind": "dual", "mode": "stability"},
    ),
    "lemma-von-mangoldt-gap": (
        "Prime average vs weighted average gap, plus renormalized residue mean",
        {"kind": "primes-gap", "N": 100000, "w": 4, "b": 1},
    ),
    "thmA-rotation-primes": (
        "Linear-phase correlation: fitted part leaves ~0 error on primes",
        {"kind": "decompose", "alpha": "rotation-linear", "N": 100000,
         "epsilon_target": 1e-8},
    ),
    "thmA-skew-primes": (
        "Quadratic-phase correlation: fit from quadratic dictionary",
        {"kind": "decompose", "alpha": "skew-quadratic", "N": 100000,
         "epsilon_target": 0.01},
    ),
    "wtrick-rotation-sweep": (
        "Per-residue fits glued mod W=30; primes dividing W excluded",
        {"kind": "wtrick", "alpha": "rotation-linear", "N": 100000,
         "epsilon_target": 1e-8, "W": 30},
    ),
    "mixing-product-doubling": (
        "Doubling-map factor kills the correlation away from n=0",
        {"kind": "product", "N": 100000, "epsilon_target": 2e-5},
    ),
}


def list_experiments() -> dict:
    """Catalog of shipped experiments: id -> (description, config dict)."""
    out = {}
    for exp_id, (desc, partial) in EXPERIMENTS.items():
        raw = {"schema_version": SCHEMA_VERSION, "seed": 0}
        raw.update(partial)
        out[exp_id] = (desc, parse_config(raw).to_dict())
    return out


# --- experiment runners -----------------------------------------------------

def _make_zn_function(params, rng) -> znfn.ZnFunction:
    n = params["n"]
    kind = params["function"]
    if kind == "constant":
        values = np.ones(n, dtype=np.complex128)
    elif kind == "character":
        values = np.exp(2j * np.pi * params["char_freq"] * np.arange(n) / n)
    elif kind == "delta":
        values = np.zeros(n, dtype=np.complex128)
        values[0] = 1.0
    elif kind == "random":
        values = np.exp(2j * np.pi * rng.random(n))
    else:
        raise ValidationError(f"unknown function {kind!r}")
    return znfn.ZnFunction(n, values)


def _run_gowers_norm(config: ExperimentConfig):
    p = config.params
    rng = np.random.default_rng(config.seed)
    results: dict = {}
    series = []
    if p["oracle_trials"]:
        worst = 0.0
        cfg = gowers.GowersConfig(k=2, budget=p["budget"])
        for trial in range(p["oracle_trials"]):
            n = int(p["sizes"][trial % len(p["sizes"])])
            f = znfn.ZnFunction(n, np.exp(2j * np.pi * rng.random(n)))
            exact = gowers.gowers_norm_zn(f, cfg)
            fast = gowers.gowers_norm_u2_fft(f)
            rel = abs(exact - fast) / max(exact, 1e-300)
            worst = max(worst, rel)
            series.append({"n": trial, "modulus": n, "exact": exact,
                           "fft": fast, "rel_dev": rel})
        results["max_relative_deviation"] = worst
        results["trials"] = p["oracle_trials"]
        return results, series, ["n", "modulus", "exact", "fft", "rel_dev"]
    if p["monotonicity_trials"]:
        worst = -1.0
        violations = 0
        for trial in range(p["monotonicity_trials"]):
            n = int(p["sizes"][trial % len(p["sizes"])])
            f = znfn.ZnFunction(n, np.exp(2j * np.pi * rng.random(n)))
            u2 = gowers.gowers_norm_zn(f, gowers.GowersConfig(k=2))
            u3 = gowers.gowers_norm_zn(f, gowers.GowersConfig(k=3))
            margin = u2 - u3
            worst = max(worst, margin)
            if margin > 1e-9:
                violations += 1
            series.append({"n": trial, "modulus": n, "u2": u2, "u3": u3,
                           "margin": margin})
        results["violations"] = violations
        results["worst_margin"] = worst
        return results, series, ["n", "modulus", "u2", "u3", "margin"]
    f = _make_zn_function(p, rng)
    cfg = gowers.GowersConfig(
        k=p["k"], mode=p["mode"], sample_count=p["sample_count"],
        rng_seed=config.seed, budget=p["budget"],
    )
    if p["mode"] == "sampled":
        value, stderr = gowers.gowers_norm_zn_sampled(f, cfg)
        results["stderr"] = stderr
    else:
        value = gowers.gowers_norm_zn(f, cfg)
    results["value"] = value
    if p["k"] == 2:
        results["fft_value"] = gowers.gowers_norm_u2_fft(f)
    series = [
        {"n": i, "f_re": float(v.real), "f_im": float(v.imag)}
        for i, v in enumerate(f.values)
    ]
    return results, series, ["n", "f_re", "f_im"]


def _csg_trial(args):
    seed, n, k, slack = args
    rng = np.random.default_rng(seed)
    family = {}
    for eta in itertools.product((0, 1), repeat=k):
        family[eta] = znfn.ZnFunction(n, np.exp(2j * np.pi * rng.random(n)))
    res = gowers.csg_check(family, gowers.GowersConfig(k=k))
    return res.lhs, res.rhs, res.lhs - res.rhs <= slack


def _run_csg(config: ExperimentConfig):
    p = config.params
    jobs = []
    trial = 0
    for k in p["k_values"]:
        per_k = p["trials"] // len(p["k_values"])
        for i in range(per_k):
            n = int(p["sizes"][i % len(p["sizes"])])
            jobs.append((config.seed * 1_000_003 + trial, n, int(k), p["slack"]))
            trial += 1
    threads = p["threads"] or min(os.cpu_count() or 1, 8)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_csg_trial, jobs))
    else:
        outcomes = [_csg_trial(j) for j in jobs]
    worst = max((lhs - rhs for lhs, rhs, _ in outcomes), default=0.0)
    violations = sum(0 if ok else 1 for _, _, ok in outcomes)
    series = [
        {"n": i, "lhs": lhs, "rhs": rhs, "margin": lhs - rhs}
        for i, (lhs, rhs, _) in enumerate(outcomes)
    ]
    results = {
        "trials": len(outcomes),
        "violations": violations,
        "worst_margin": worst,
        "holds": violations == 0,
    }
    return results, series, ["n", "lhs", "rhs", "margin"]


def _seminorm_sequence(p, rng, length: int) -> SampledSequence:
    kind = p["sequence"]
    ns = np.arange(length, dtype=np.int64)
    if kind == "character":
        from .phases import frac_multiple

        values = np.exp(2j * np.pi * frac_multiple(ns, p["theta"]))
    elif kind == "quadratic":
        from .phases import frac_multiple

        values = np.exp(2j * np.pi * frac_multiple(ns * ns, p["theta"]))
    elif kind == "random_signs":
        values = rng.choice([-1.0, 1.0], size=length).astype(np.complex128)
    else:
        raise ValidationError(f"unknown sequence {kind!r}")
    return SampledSequence(start=0, values=values)


def _run_seminorm(config: ExperimentConfig):
    p = config.params
    rng = np.random.default_rng(config.seed)
    k, H, N = p["k"], p["H"], p["N"]
    seq = _seminorm_sequence(p, rng, N + k * H)
    value = gowers.uniformity_seminorm_n(seq, k, H, N)
    results = {"value": value, "k": k, "H": H, "N": N}
    series = []
    h_level = 4
    while h_level <= H:
        series.append(
            {"n": h_level,
             "value": gowers.uniformity_seminorm_n(seq, k, h_level, N)}
        )
        h_level *= 2
    if p["compare_hk"]:
        sysspec = MpSystemSpec.rotation(p["theta"])
        F = ObservableSpec.character((1,))
        hk = systems.hk_seminorm_estimate(sysspec, F, k, p["caps"])
        results["hk_value"] = hk
        results["bridge_gap"] = abs(hk - value)
    return results, series, ["n", "value"]


def _build_correlation_spec(p) -> CorrelationSpec:
    name = p["system"]
    if name == "rotation":
        sysspec = MpSystemSpec.rotation(*(p["angles"] or [p["theta"]]))
    elif name == "commuting":
        sysspec = MpSystemSpec.commuting_rotations([(a,) for a in p["angles"]])
    elif name == "skew":
        sysspec = MpSystemSpec.skew(p["theta"])
    elif name == "doubling":
        sysspec = MpSystemSpec.doubling()
    else:
        raise ValidationError(f"unknown system {name!r}")
    observables = []
    for slot in p["observables"]:
        terms = []
        for entry in slot:
            freq, re, im = entry[0], entry[1], entry[2]
            terms.append((tuple(int(f) for f in freq), complex(re, im)))
        observables.append(ObservableSpec(terms=tuple(terms)))
    if p["exponents"]:
        exps = []
        for which, scale, degree in p["exponents"]:
            exps.append(
                ((int(which),
                  IntPolynomial.monomial(int(degree), scale=int(scale))),)
            )
        spec = CorrelationSpec(
            system=sysspec, observables=tuple(observables),
            exponents=tuple(exps),
        )
    elif name == "commuting":
        spec = CorrelationSpec.commuting(sysspec, observables)
    else:
        spec = CorrelationSpec.single_transformation(sysspec, observables)
    return spec


def _run_correlation(config: ExperimentConfig):
    p = config.params
    spec = _build_correlation_spec(p)
    seq = multicorrelation_sequence(spec, (p["M"], p["N"]))
    series = [
        {"n": int(n), "alpha_re": float(v.real), "alpha_im": float(v.imag)}
        for n, v in zip(range(p["M"], p["N"]), seq.values)
    ]
    results = {
        "window": [p["M"], p["N"]],
        "max_abs": float(np.max(np.abs(seq.values))),
        "mean_re": float(np.mean(seq.values.real)),
        "mean_im": float(np.mean(seq.values.imag)),
    }
    return results, series, ["n", "alpha_re", "alpha_im"]


def _dual_nilspec(p) -> nilseq.NilsequenceSpec:
    if p["system"] == "rotation":
        sysspec = MpSystemSpec.rotation(p["theta"])
    elif p["system"] == "skew":
        sysspec = MpSystemSpec.skew(p["theta"])
    else:
        raise ValidationError(f"unsupported dual system {p['system']!r}")
    basepoint = tuple(p["basepoint"]) if len(p["basepoint"]) == sysspec.dim \
        else (0.0,) * sysspec.dim
    return nilseq.NilsequenceSpec(
        system=sysspec,
        observable=ObservableSpec.character(tuple(p["freq"])),
        basepoint=basepoint,
    )


def shipped_stability_pairs(theta: float, count: int = 20):
    """Character pairs on the circle rotation for the L^1 stability check.

    Half are (e(cx), scaled e(cx)); half are two-term combinations against
    their damped versions.  All sup norms are <= 1 by construction.
    """
    pairs = []
    for i in range(count):
        c = (i % 5) + 1
        if i % 2 == 0:
            scale = 1.0 - 0.1 * ((i // 2) % 5 + 1) / 5.0
            pairs.append(
                (ObservableSpec.character((c,)),
                 ObservableSpec.character((c,), coeff=scale))
            )
        else:
            F = ObservableSpec(terms=(((c,), 0.5), ((-c,), 0.5)))
            G = ObservableSpec(terms=(((c,), 0.45), ((-c,), 0.45)))
            pairs.append((F, G))
    return pairs


def _run_dual(config: ExperimentConfig):
    p = config.params
    mode = p["mode"]
    if mode == "convergence":
        spec = _dual_nilspec(p)
        ladder = [nilseq.DualTruncation(int(a), int(b)) for a, b in p["ladder"]]
        report = nilseq.dual_uniform_convergence_check(
            spec, p["k"], ladder, p["probes"]
        )
        results = {
            "max_deviation_per_level": list(report.max_deviation_per_level),
            "monotone_decreasing": report.monotone_decreasing,
        }
        series = [
            {"n": i, "outer": t.outer, "inner": t.inner, "deviation": d}
            for i, (t, d) in enumerate(zip(ladder,
                                           report.max_deviation_per_level))
        ]
        return results, series, ["n", "outer", "inner", "deviation"]
    if mode == "identity":
        spec = _dual_nilspec(p)
        k, H, N = p["k"], p["H"], p["N"]
        phi = nilseq.nilsequence_sample(spec, 0, N + k * H)
        dual_exact = nilseq.dual_sequence_exact_window(spec, k, 0, N)
        correlation_value = complex(
            np.mean(phi.values[:N] * dual_exact.values)
        )
        seminorm = gowers.uniformity_seminorm_n(phi, k, H, N)
        identity_gap = abs(correlation_value - seminorm ** (2**k))
        trunc = nilseq.DualTruncation(p["outer"], p["inner"])
        box_vals = np.asarray(
            [nilseq.dual_sequence(spec, k, trunc, n) for n in p["probes"]]
        )
        exact_vals = np.asarray(
            [nilseq.dual_sequence_exact(spec, k, n) for n in p["probes"]]
        )
        box_dev = float(np.max(np.abs(box_vals - exact_vals)))
        results = {
            "correlation_with_dual": [correlation_value.real,
                                      correlation_value.imag],
            "seminorm": seminorm,
            "identity_gap": identity_gap,
            "box_vs_exact_max_dev": box_dev,
        }
        series = [
            {"n": int(n), "box_re": float(b.real), "box_im": float(b.imag),
             "exact_re": float(e.real), "exact_im": float(e.imag)}
            for n, b, e in zip(p["probes"], box_vals, exact_vals)
        ]
        return results, series, ["n", "box_re", "box_im", "exact_re",
                                 "exact_im"]
    if mode == "stability":
        sysspec = MpSystemSpec.rotation(p["theta"])
        grid = QuadratureGrid(points_per_dim=p["grid_p"], dimension=1)
        trunc = nilseq.DualTruncation(p["outer"], p["inner"])
        series = []
        all_hold = True
        worst = -np.inf
        for i, (F, G) in enumerate(
            shipped_stability_pairs(p["theta"], p["pair_count"])
        ):
            res = nilseq.dual_l1_stability_check(
                sysspec, F, G, p["k"], trunc, grid
            )
            all_hold = all_hold and res.holds
            worst = max(worst, res.lhs - res.rhs)
            series.append({"n": i, "lhs": res.lhs, "rhs": res.rhs,
                           "holds": res.holds})
        results = {"all_hold": all_hold, "worst_margin": worst,
                   "pairs": len(series)}
        return results, series, ["n", "lhs", "rhs", "holds"]
    raise ValidationError(f"unknown dual mode {mode!r}")


def _run_primes_gap(config: ExperimentConfig):
    p = config.params
    N = p["N"]
    limit = N
    if p["w"]:
        limit = max(limit, primes.primorial(p["w"]) * N + p["b"])
    table = cached_sieve(limit)
    ones = SampledSequence(start=1, values=np.ones(N))
    gap = primes.prime_vs_weighted_gap(ones, N, table)
    results = {
        "N": N,
        "prime_avg": gap.prime_avg.real,
        "weighted_avg": gap.weighted_avg.real,
        "gap": gap.gap,
        "prime_count": table.count_upto(N),
    }
    series = []
    if p["ladder"]:
        n_level = 1000
        while n_level <= N:
            g = primes.prime_vs_weighted_gap(
                SampledSequence(start=1, values=np.ones(n_level)),
                n_level, table,
            )
            series.append({"n": n_level, "gap": g.gap})
            n_level *= 10
    else:
        series.append({"n": N, "gap": gap.gap})
    if p["w"]:
        params = primes.WTrickParams(w=p["w"], b=p["b"])
        results["lambda_Wb_mean"] = primes.lambda_Wb_mean(params, N, table)
        results["W"] = params.W
    return results, series, ["n", "gap"]


def _alpha_and_builder(p):
    """Shipped correlation presets for the decomposition experiments."""
    theta = p["theta"]
    N = p["N"]
    if p["alpha"] == "rotation-linear":
        sysspec = MpSystemSpec.rotation(theta)
        spec = CorrelationSpec.single_transformation(
            sysspec,
            (ObservableSpec.character((-1,)), ObservableSpec.character((1,))),
        )
        step = p["step_bound"] or 1
    elif p["alpha"] == "skew-quadratic":
        sysspec = MpSystemSpec.skew(theta)
        spec = CorrelationSpec(
            system=sysspec,
            observables=(
                ObservableSpec.character((0, 1)),
                ObservableSpec.character((0, -2)),
                ObservableSpec.character((0, 1)),
            ),
            exponents=(
                ((0, IntPolynomial.identity()),),
                ((0, IntPolynomial.monomial(1, scale=2)),),
            ),
        )
        step = p["step_bound"] or 2
    else:
        raise ValidationError(f"unknown alpha preset {p['alpha']!r}")
    alpha = multicorrelation_sequence(spec, (1, N + 1))
    builder = decomp.default_dict_builder(
        step, sysspec.angle_parameters, p["rational_denominator"]
    )
    return alpha, builder, step


def _report_results(report) -> dict:
    out = decomp.report_json_dict(report)
    return out


def _decomp_series(alpha, N):
    # sampled down so series files stay plottable at large N
    stride = max(1, N // 4096)
    rows = []
    for n in range(1, N + 1, stride):
        rows.append({"n": n,
                     "alpha_re": float(alpha.value_at(n).real),
                     "alpha_im": float(alpha.value_at(n).imag)})
    return rows


def _run_decompose(config: ExperimentConfig):
    p = config.params
    alpha, builder, _ = _alpha_and_builder(p)
    table = cached_sieve(p["N"])
    report, fit = decomp.fit_and_report(
        alpha, builder, p["N"], table, p["epsilon_target"], p["mode"]
    )
    results = _report_results(report)
    results["residual_l2"] = fit.residual_l2
    results["regularized"] = fit.regularized
    return results, _decomp_series(alpha, p["N"]), [
        "n", "alpha_re", "alpha_im"]


def _run_wtrick(config: ExperimentConfig):
    p = config.params
    alpha, builder, _ = _alpha_and_builder(p)
    table = cached_sieve(p["N"])
    report = decomp.wtrick_decompose(
        alpha, p["W"], table, builder, p["epsilon_target"], p["N"], p["mode"]
    )
    return (_report_results(report),
            _decomp_series(alpha, p["N"]), ["n", "alpha_re", "alpha_im"])


def _run_product(config: ExperimentConfig):
    p = config.params
    theta, N = p["theta"], p["N"]
    nil_part = CorrelationSpec.single_transformation(
        MpSystemSpec.rotation(theta),
        (ObservableSpec.character((-1,)), ObservableSpec.character((1,))),
    )
    norm = 1.0 / math.sqrt(2.0)
    mix_obs = ObservableSpec(terms=(((1,), norm), ((-1,), norm)))
    mixing_part = CorrelationSpec.single_transformation(
        MpSystemSpec.doubling(), (mix_obs, mix_obs)
    )
    table = cached_sieve(N)
    report = decomp.product_system_experiment(
        nil_part, mixing_part, p["epsilon_target"], N, table
    )
    series = [{"n": 1, "cesaro_l1": report.cesaro_l1,
               "prime_l1": report.prime_l1}]
    return _report_results(report), series, ["n", "cesaro_l1", "prime_l1"]


_RUNNERS = {
    "gowers-norm": _run_gowers_norm,
    "csg": _run_csg,
    "seminorm": _run_seminorm,
    "correlation": _run_correlation,
    "dual": _run_dual,
    "primes-gap": _run_primes_gap,
    "decompose": _run_decompose,
    "wtrick": _run_wtrick,
    "product": _run_product,
}


def run(config: ExperimentConfig, out_dir) -> int:
    """Execute one experiment; write report.json and series.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results, series, fields = _RUNNERS[config.kind](config)
    report = {
        "config": config.to_dict(),
        "results": results,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    csv_path = out / "series.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in series:
            writer.writerow(row)
    print(f"wrote {report_path} and {csv_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nilcorr",
        description="Uniformity-norm and correlation-decomposition experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", type=str, help="path to a JSON config")
    p_run.add_argument("--id", type=str, help="shipped experiment id")
    p_run.add_argument("--out", type=str, default="nilcorr-out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--budget", type=int, default=None)

    p_list = sub.add_parser("list", help="list shipped experiments")
    p_list.add_argument("--json", action="store_true")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("--config", type=str, required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            catalog = list_experiments()
            if args.json:
                print(json.dumps(
                    {k: {"description": d, "config": c}
                     for k, (d, c) in catalog.items()},
                    sort_keys=True, indent=2))
            else:
                for exp_id, (desc, _) in sorted(catalog.items()):
                    print(f"{exp_id:28s} {desc}")
            return 0
        if args.command == "validate":
            load_config(args.config)
            print("config ok")
            return 0
        # run
        if (args.config is None) == (args.id is None):
            raise ValidationError("run needs exactly one of --config / --id")
        if args.config is not None:
            config = load_config(args.config)
        else:
            catalog = list_experiments()
            if args.id not in catalog:
                raise ValidationError(f"unknown experiment id {args.id!r}")
            config = parse_config(catalog[args.id][1])
        raw = config.to_dict()
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.threads is not None and "threads" in _SCHEMAS[config.kind]:
            raw["threads"] = args.threads
        if args.budget is not None and "budget" in _SCHEMAS[config.kind]:
            raw["budget"] = args.budget
        config = parse_config(raw)
        return run(config, args.out)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
