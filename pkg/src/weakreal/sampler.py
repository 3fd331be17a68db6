"""Finite-shot sampling, the contrast estimator and its error bars."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib.resources import files
from typing import Iterable, Sequence

import numpy as np

from .counts_io import CountsTable, Run
from .protocol import (
    BITSTRINGS,
    CONTRAST_SIGN,
    SIGN_SETTINGS,
    ExpectationSet,
    ProtocolConfig,
    bit_values,
    combine_settings,
    exact_expectations,
)

QUANTITIES = ("c", "a", "b", "ac", "bc", "ab", "abc")
_ORDER_INDEX = {"AB": 0, "BA": 1}

# per-bitstring value of each quantity
_VALUES = {
    q: np.array([f(*bit_values(bits)) for bits in BITSTRINGS], dtype=float)
    for q, f in {
        "c": lambda za, zb, c: c,
        "a": lambda za, zb, c: za,
        "b": lambda za, zb, c: zb,
        "ac": lambda za, zb, c: za * c,
        "bc": lambda za, zb, c: zb * c,
        "ab": lambda za, zb, c: za * zb,
        "abc": lambda za, zb, c: za * zb * c,
    }.items()
}


def substream(seed: int, job: int, repetition: int, setting: int, order: str) -> np.random.Generator:
    """Counter-based generator for one (job, repetition, setting, order) cell."""
    ss = np.random.SeedSequence(seed, spawn_key=(job, repetition, setting, _ORDER_INDEX[order]))
    return np.random.Generator(np.random.Philox(ss))


def sample_counts(
    config: ProtocolConfig,
    shots: int,
    repetitions: int = 1,
    jobs: int = 1,
    seed: int = 0,
    orders: Sequence[str] = ("AB", "BA"),
) -> list[CountsTable]:
    """Multinomial shot counts for every sign setting, repetition, job and order.

    Returns one table per (job, order). Within a table runs appear in the
    shuffled execution order; each run records its repetition index.
    """
    if min(shots, repetitions, jobs) < 1:
        raise ValueError("shots, repetitions and jobs must be >= 1")
    tables = []
    for order in orders:
        probs = {}
        for i, (sa, sb) in enumerate(SIGN_SETTINGS):
            dist = exact_expectations(ProtocolConfig(config.psi, config.theta, order, sa, sb, config.noise_a, config.noise_b))
            p = np.clip(np.array([dist[b] for b in BITSTRINGS]), 0, None)
            probs[i] = p / p.sum()
        for job in range(jobs):
            runs = []
            for rep in range(repetitions):
                for i, (sa, sb) in enumerate(SIGN_SETTINGS):
                    draw = substream(seed, job, rep, i, order).multinomial(shots, probs[i])
                    runs.append(Run(sa, sb, {b: int(n) for b, n in zip(BITSTRINGS, draw)}, rep))
            perm = substream(seed, job, repetitions, len(SIGN_SETTINGS), order).permutation(len(runs))
            runs = [runs[k] for k in perm]
            tables.append(CountsTable(config.psi, config.theta, order, shots, tuple(runs), "simulated", seed, job))
    return tables


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    sigma: float
    n_effective: int

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class EstimatedExpectations:
    c: EstimateWithError
    a: EstimateWithError
    b: EstimateWithError
    ac: EstimateWithError
    bc: EstimateWithError
    ab: EstimateWithError
    abc: EstimateWithError
    psi: float
    theta: float
    order: str

    @property
    def lam(self) -> float:
        return math.sin(self.theta)

    def values(self) -> ExpectationSet:
        return ExpectationSet(**{q: getattr(self, q).value for q in QUANTITIES})

    def rows(self) -> list[tuple[str, float, float]]:
        return [(q, getattr(self, q).value, getattr(self, q).sigma) for q in QUANTITIES]


def pooled_counts(tables: Iterable[CountsTable]) -> tuple[dict, tuple]:
    """Sum counts per sign setting; checks that metadata agree."""
    tables = list(tables)
    if not tables:
        raise ValueError("no counts tables given")
    key = (tables[0].psi, tables[0].theta, tables[0].order)
    pooled = {s: np.zeros(len(BITSTRINGS), dtype=np.int64) for s in SIGN_SETTINGS}
    for t in tables:
        if (t.psi, t.theta, t.order) != key:
            raise ValueError(f"inconsistent metadata: {(t.psi, t.theta, t.order)} vs {key}")
        for r in t.runs:
            pooled[(r.sign_a, r.sign_b)] += np.array([r.counts.get(b, 0) for b in BITSTRINGS], dtype=np.int64)
    return pooled, key


def _estimate_from_pooled(pooled: dict) -> tuple[dict, dict, dict]:
    means, variances, n = {}, {}, {}
    for s, cnt in pooled.items():
        N = int(cnt.sum())
        if N == 0:
            raise ValueError(f"no shots for sign setting {s}")
        p = cnt / N
        n[s] = N
        means[s] = {q: float(v @ p) for q, v in _VALUES.items()}
        variances[s] = {q: float((v**2) @ p - means[s][q] ** 2) for q, v in _VALUES.items()}
    return means, variances, n


def estimate(tables: Iterable[CountsTable]) -> EstimatedExpectations:
    """Contrast estimator with Bernoulli-type error bars.

    The triple correlation uses sqrt(<c> - <c>^2) / (2 sqrt(N)) with N shots
    per sign setting; the other entries use the plug-in per-setting
    variances.
    """
    pooled, (psi, theta, order) = pooled_counts(tables)
    means, variances, n = _estimate_from_pooled(pooled)
    point = combine_settings(means)
    out = {}
    for q, w in CONTRAST_SIGN.items():
        var = sum((w(*s) / 4) ** 2 * variances[s][q] / n[s] for s in SIGN_SETTINGS)
        out[q] = EstimateWithError(getattr(point, q), math.sqrt(max(var, 0.0)), min(n.values()))
    c = point.c
    inv_n = sum(1 / n[s] for s in SIGN_SETTINGS) / 4
    out["abc"] = EstimateWithError(point.abc, math.sqrt(max(c - c * c, 0.0) * inv_n) / 2, min(n.values()))
    return EstimatedExpectations(**out, psi=psi, theta=theta, order=order)


@dataclass(frozen=True)
class Significance:
    lhs: EstimateWithError
    z_score: float
    exact: bool = False


def violation_significance(est) -> Significance:
    """Plug-in ratio with delta-method error from the abc and c terms only."""
    if isinstance(est, ExpectationSet):
        vals, s_abc, s_c, n = est, 0.0, 0.0, 0
    else:
        vals, s_abc, s_c, n = est.values(), est.abc.sigma, est.c.sigma, est.abc.n_effective
    if vals.c <= 0:
        raise ValueError("conditioning probability must be positive")
    den = 4 * vals.abc * vals.c
    if abs(den) < 1e-14:
        raise ValueError("indeterminate ratio")
    L = (vals.ac + vals.bc) ** 2 / den
    sigma = abs(L) * math.sqrt((s_abc / vals.abc) ** 2 + (s_c / vals.c) ** 2)
    if sigma == 0:
        return Significance(EstimateWithError(L, 0.0, n), math.inf if L > 1 else -math.inf, exact=True)
    return Significance(EstimateWithError(L, sigma, n), (L - 1) / sigma)


def bootstrap_sigma(tables: Iterable[CountsTable], n_resamples: int = 200, seed: int = 0) -> EstimateWithError:
    """Run-level bootstrap of the violation ratio.

    Runs of each sign setting are resampled with replacement across all
    tables; the spread of the recomputed ratio is returned.
    """
    if n_resamples < 100:
        raise ValueError("n_resamples must be >= 100")
    tables = list(tables)
    pooled_counts(tables)  # metadata check
    per_setting = {s: [] for s in SIGN_SETTINGS}
    for t in tables:
        for r in t.runs:
            per_setting[(r.sign_a, r.sign_b)].append([r.counts.get(b, 0) for b in BITSTRINGS])
    arrays = {s: np.array(v, dtype=np.int64) for s, v in per_setting.items()}
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    def lhs(pooled):
        means, _, _ = _estimate_from_pooled(pooled)
        e = combine_settings(means)
        return (e.ac + e.bc) ** 2 / (4 * e.abc * e.c)

    base = lhs({s: a.sum(axis=0) for s, a in arrays.items()})
    samples = []
    for _ in range(n_resamples):
        pooled = {s: a[rng.integers(0, len(a), len(a))].sum(axis=0) for s, a in arrays.items()}
        samples.append(lhs(pooled))
    return EstimateWithError(float(base), float(np.std(samples, ddof=1)), n_resamples)


def write_estimates_csv(est: EstimatedExpectations, path, version: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if version:
            fh.write(f"# {version}\n")
        w = csv.writer(fh)
        w.writerow(["quantity", "value", "sigma"])
        for q, v, s in est.rows():
            w.writerow([q, repr(v), repr(s)])


def setting_distribution(e: ExpectationSet, sign_a: int, sign_b: int) -> dict:
    """Bitstring distribution of one sign setting whose moments flip with the signs.

    The contrast combination of the four resulting settings returns ``e``.
    """
    out = {}
    for bits in BITSTRINGS:
        za, zb, c = bit_values(bits)
        ua, ub = sign_a * za, sign_b * zb
        if c:
            p = e.c + ua * e.ac + ub * e.bc + ua * ub * e.abc
        else:
            p = (1 - e.c) + ua * (e.a - e.ac) + ub * (e.b - e.bc) + ua * ub * (e.ab - e.abc)
        out[bits] = p / 4
    if min(out.values()) < -1e-12:
        raise ValueError("moments do not define a probability distribution")
    return out


def _round_counts(probs: dict, shots: int) -> dict:
    # largest-remainder rounding keeps the total exact
    raw = {k: max(v, 0.0) * shots for k, v in probs.items()}
    counts = {k: int(math.floor(v)) for k, v in raw.items()}
    short = shots - sum(counts.values())
    for k in sorted(raw, key=lambda k: raw[k] - counts[k], reverse=True)[:short]:
        counts[k] += 1
    return counts


def counts_from_expectations(
    e: ExpectationSet,
    psi: float,
    theta: float,
    order: str,
    shots: int,
    repetitions: int = 1,
    jobs: int = 1,
    source: str = "synthetic",
) -> list[CountsTable]:
    """Deterministic counts whose contrast estimate reproduces ``e`` up to rounding."""
    runs = tuple(
        Run(sa, sb, _round_counts(setting_distribution(e, sa, sb), shots), rep)
        for rep in range(repetitions)
        for sa, sb in SIGN_SETTINGS
    )
    return [CountsTable(psi, theta, order, shots, runs, source, None, job) for job in range(jobs)]


def load_ionq_table() -> dict:
    return json.loads(files("weakreal").joinpath("data/ionq_table.json").read_text())


def ionq_expectations(order: str, table: dict | None = None) -> ExpectationSet:
    """Table values rescaled back by the appropriate powers of lambda."""
    table = table or load_ionq_table()
    lam = math.sin(table["theta"])
    row = table["orders"][order]
    power = {"c": 0, "a": 1, "b": 1, "ac": 1, "bc": 1, "ab": 2, "abc": 2}
    return ExpectationSet(**{q: row[q][0] * lam ** power[q] for q in QUANTITIES})


def ionq_synthetic_counts(order: str, table: dict | None = None) -> list[CountsTable]:
    table = table or load_ionq_table()
    lay = table["layout"]
    return counts_from_expectations(
        ionq_expectations(order, table), table["psi"], table["theta"], order,
        lay["shots"], lay["repetitions"], lay["jobs"], source="ionq-synthetic",
    )
