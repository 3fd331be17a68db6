"""Three-qubit objective-realism circuit: exact evaluation, inequality, sweeps.

Register layout (qubit 0 leftmost, also in bitstrings): meter A, meter B,
system C. Meter bit 0 means outcome +1; system bit 0 means the condition
is met (c = 1).
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import qcore
from .constants import INDETERMINATE_TOL, VIOLATION_TOL
from .imperfect import IDEAL, NoiseParams, meter_effects, meter_state
from .instrument import anticommutator_map

A, B, C = 0, 1, 2
BITSTRINGS = tuple("".join(b) for b in itertools.product("01", repeat=3))
SIGN_SETTINGS = ((+1, +1), (+1, -1), (-1, +1), (-1, -1))


@dataclass(frozen=True)
class ProtocolConfig:
    psi: float
    theta: float
    order: str = "AB"
    sign_a: int = +1
    sign_b: int = +1
    noise_a: NoiseParams = IDEAL
    noise_b: NoiseParams = IDEAL
    use_fractional_zz: bool = field(default=True, init=False)

    def __post_init__(self):
        if abs(self.theta) > np.pi / 2 + 1e-15:
            raise ValueError("|theta| must not exceed pi/2")
        if not 0 <= self.psi < np.pi:
            raise ValueError("psi must lie in [0, pi)")
        if self.order not in ("AB", "BA"):
            raise ValueError("order must be 'AB' or 'BA'")
        if self.sign_a not in (1, -1) or self.sign_b not in (1, -1):
            raise ValueError("signs must be +1 or -1")

    @property
    def lam(self) -> float:
        return float(np.sin(self.theta))

    def with_signs(self, sign_a: int, sign_b: int) -> "ProtocolConfig":
        return replace(self, sign_a=sign_a, sign_b=sign_b)


def system_rotation(psi: float) -> np.ndarray:
    """Y_{pi - psi}: prepares |psi_+> from |0> and, applied again, maps |psi_-> to |0>."""
    return qcore.rotation(qcore.pauli("Y"), np.pi - psi)


def system_state(psi: float) -> np.ndarray:
    u = system_rotation(psi) @ qcore.KET0
    return np.outer(u, u.conj())


def condition_operator(psi: float) -> np.ndarray:
    """C = U^dag P0 U = |psi_-><psi_-|."""
    U = system_rotation(psi)
    return U.conj().T @ qcore.P0 @ U


def final_state(config: ProtocolConfig) -> qcore.DensityState:
    """Register state just before the three Z-basis readouts (readout rotations not applied)."""
    rho = np.kron(np.kron(meter_state(config.noise_a, config.sign_a), meter_state(config.noise_b, config.sign_b)), system_state(config.psi))
    st = qcore.DensityState.from_matrix(rho)
    coupling = qcore.zz_coupling(config.theta)
    meters = (A, B) if config.order == "AB" else (B, A)
    for m in meters:
        st = qcore.apply_unitary(st, coupling, [C, m])
    return qcore.apply_unitary(st, system_rotation(config.psi), [C])


def exact_expectations(config: ProtocolConfig) -> dict[str, float]:
    """Outcome distribution p(abc) over the 8 bitstrings for one sign setting."""
    st = final_state(config)
    ea = meter_effects(config.noise_a)
    eb = meter_effects(config.noise_b)
    out = {}
    for bits in BITSTRINGS:
        op = np.kron(np.kron(ea[+1 if bits[0] == "0" else -1], eb[+1 if bits[1] == "0" else -1]), qcore.P0 if bits[2] == "0" else qcore.P1)
        out[bits] = float(np.trace(op @ st.mat).real)
    return out


def bit_values(bits: str) -> tuple[int, int, int]:
    """(z_a, z_b, c) for a bitstring."""
    return (1 if bits[0] == "0" else -1, 1 if bits[1] == "0" else -1, 1 if bits[2] == "0" else 0)


@dataclass(frozen=True)
class ExpectationSet:
    c: float
    a: float
    b: float
    ac: float
    bc: float
    ab: float
    abc: float

    def scaled(self, lam: float) -> "ExpectationSet":
        """Divide first-order quantities by lam and second-order ones by lam^2."""
        return ExpectationSet(self.c, self.a / lam, self.b / lam, self.ac / lam, self.bc / lam, self.ab / lam**2, self.abc / lam**2)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("c", "a", "b", "ac", "bc", "ab", "abc")}


def setting_moments(dist: dict[str, float]) -> dict[str, float]:
    """Raw moments E[c], E[z_a], ... of one sign setting."""
    m = dict.fromkeys(("c", "a", "b", "ac", "bc", "ab", "abc"), 0.0)
    for bits, p in dist.items():
        za, zb, c = bit_values(bits)
        m["c"] += c * p
        m["a"] += za * p
        m["b"] += zb * p
        m["ac"] += za * c * p
        m["bc"] += zb * c * p
        m["ab"] += za * zb * p
        m["abc"] += za * zb * c * p
    return m


# contrast weight of each quantity as a function of (sign_a, sign_b), before the 1/4
CONTRAST_SIGN = {
    "c": lambda sa, sb: 1,
    "a": lambda sa, sb: sa,
    "b": lambda sa, sb: sb,
    "ac": lambda sa, sb: sa,
    "bc": lambda sa, sb: sb,
    "ab": lambda sa, sb: sa * sb,
    "abc": lambda sa, sb: sa * sb,
}


def combine_settings(moments: dict[tuple[int, int], dict[str, float]]) -> ExpectationSet:
    missing = [s for s in SIGN_SETTINGS if s not in moments]
    if missing:
        raise ValueError(f"missing sign settings {missing}")
    vals = {}
    for q, w in CONTRAST_SIGN.items():
        vals[q] = sum(w(sa, sb) * moments[(sa, sb)][q] for sa, sb in SIGN_SETTINGS) / 4
    return ExpectationSet(**vals)


def contrast_expectations(config: ProtocolConfig) -> ExpectationSet:
    """Contrast-combined correlations over the four sign settings of ``config``."""
    moments = {(sa, sb): setting_moments(exact_expectations(config.with_signs(sa, sb))) for sa, sb in SIGN_SETTINGS}
    return combine_settings(moments)


def limit_expectations(psi: float) -> ExpectationSet:
    """lam -> 0 limit of the contrast correlations, normalized by lam powers.

    Evaluated with the informative map Zhat on the system alone.
    """
    zh = anticommutator_map(qcore.pauli("Z"))
    rho = system_state(psi)
    Cop = condition_operator(psi)
    z1 = zh(rho)
    z2 = zh(z1)
    tr = lambda op, m: float(np.trace(op @ m).real)
    one = np.eye(2)
    return ExpectationSet(
        c=tr(Cop, rho), a=tr(one, z1), b=tr(one, z1), ac=tr(Cop, z1), bc=tr(Cop, z1), ab=tr(one, z2), abc=tr(Cop, z2)
    )


@dataclass(frozen=True)
class ViolationReport:
    lhs: float
    components: ExpectationSet
    indeterminate: bool = False
    classical_bound: float = 1.0

    @property
    def violated(self) -> bool:
        return not self.indeterminate and self.lhs > self.classical_bound + VIOLATION_TOL


def violation_lhs(e: ExpectationSet) -> ViolationReport:
    """<a+b|c>^2 / (4 <ab|c>) = (ac + bc)^2 / (4 abc c)."""
    den = 4 * e.abc * e.c
    if abs(den) < INDETERMINATE_TOL or e.c <= 0:
        return ViolationReport(math.nan, e, indeterminate=True)
    return ViolationReport((e.ac + e.bc) ** 2 / den, e)


def predict(psi: float, theta: float, order: str = "AB", noise_a: NoiseParams = IDEAL, noise_b: NoiseParams = IDEAL) -> ViolationReport:
    """Exact prediction; theta == 0 switches to the weak-limit evaluation."""
    if theta == 0:
        if noise_a != IDEAL or noise_b != IDEAL:
            raise ValueError("the weak-limit mode has no noise model")
        return violation_lhs(limit_expectations(psi))
    return violation_lhs(contrast_expectations(ProtocolConfig(psi, theta, order, noise_a=noise_a, noise_b=noise_b)))


def finite_strength_c(psi: float, lam: float) -> float:
    """<C>_lam = cos^2 psi + lam^2 sin^2 psi / 2."""
    return float(np.cos(psi) ** 2 + lam**2 * np.sin(psi) ** 2 / 2)


def lhs_closed_form(psi: float, lam: float) -> float:
    """2 cos^2 psi / (<C>_lam (1 + cos^2 psi))."""
    c2 = np.cos(psi) ** 2
    return float(2 * c2 / (finite_strength_c(psi, lam) * (1 + c2)))


@dataclass(frozen=True)
class SweepRow:
    psi: float
    lam: float
    lhs: float
    indeterminate: bool


def _threads() -> int:
    import os

    try:
        return max(1, int(os.environ.get("WEAKREAL_THREADS", "1")))
    except ValueError:
        return 1


def sweep(psi_grid: Iterable[float], lambda_grid: Iterable[float], threads: int | None = None) -> list[SweepRow]:
    psi_grid = [float(p) for p in psi_grid]
    lambda_grid = [float(l) for l in lambda_grid]
    if not psi_grid or not lambda_grid:
        raise ValueError("grids must be nonempty")
    cells = [(p, l) for p in psi_grid for l in lambda_grid]

    def run(cell):
        p, l = cell
        rep = predict(p, float(np.arcsin(l)))
        return SweepRow(p, l, rep.lhs, rep.indeterminate)

    n = threads or _threads()
    if n == 1:
        return [run(c) for c in cells]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(run, cells))


def write_sweep_csv(rows: Sequence[SweepRow], path, version: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if version:
            fh.write(f"# {version}\n")
        w = csv.writer(fh)
        w.writerow(["psi", "lambda", "lhs", "indeterminate"])
        for r in rows:
            w.writerow([repr(r.psi), repr(r.lam), "" if r.indeterminate else repr(r.lhs), str(r.indeterminate).lower()])


# ---------------------------------------------------------------------------
# classical objective-realism baseline


@dataclass(frozen=True)
class BaselineEstimate:
    value: float
    sigma: float
    n_effective: int


def _ratio_with_error(u: np.ndarray, v: np.ndarray, c: np.ndarray) -> BaselineEstimate:
    """Plug-in (mean u)^2 / (4 mean v mean c) with a delta-method standard error.

    u, v, c are per-sample values of (a+b)c, abc and c (weights allowed).
    """
    n = len(c)
    X = np.vstack([u, v, c])
    mu = X.mean(axis=1)
    cov = np.cov(X) / n
    U, V, Cm = mu
    val = U**2 / (4 * V * Cm)
    grad = np.array([2 * U / (4 * V * Cm), -val / V, -val / Cm])
    return BaselineEstimate(float(val), float(np.sqrt(max(grad @ cov @ grad, 0.0))), int(n))


def classical_baseline(
    z_sampler: Callable[[np.random.Generator, int], np.ndarray],
    noise_sampler: Callable[[np.random.Generator, int], np.ndarray],
    condition: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    n_samples: int,
    seed: int = 0,
) -> BaselineEstimate:
    """Monte-Carlo ratio for noisy readouts a = z + xi_a, b = z + xi_b.

    ``condition`` may depend on z and its own randomness but never on the
    readout noise, so objective realism bounds the ratio by 1.
    """
    rng = np.random.default_rng(seed)
    z = z_sampler(rng, n_samples)
    a = z + noise_sampler(rng, n_samples)
    b = z + noise_sampler(rng, n_samples)
    c = np.asarray(condition(z, rng), dtype=float)
    if c.sum() == 0:
        raise ValueError("condition never met")
    return _ratio_with_error((a + b) * c, a * b * c, c)


def classical_contrast_baseline(
    hidden_sampler: Callable[[np.random.Generator, int], np.ndarray],
    readouts: Sequence[Callable[[np.ndarray], np.ndarray]],
    weights: Sequence[float],
    noise_sampler: Callable[[np.random.Generator, int], np.ndarray],
    condition: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    n_per_setting: int,
    seed: int = 0,
) -> float:
    """Ratio for combinations of detector states j with readouts z_j + noise.

    Each (j, k) preparation pair is a separate run; averages are weighted by
    pbar_j (meter A) and pbar_k (meter B) as in the contrast notation.
    """
    rng = np.random.default_rng(seed)
    J = len(readouts)
    ac = bc = abc = cc = 0.0
    for j in range(J):
        for k in range(J):
            h = hidden_sampler(rng, n_per_setting)
            a = readouts[j](h) + noise_sampler(rng, n_per_setting)
            b = readouts[k](h) + noise_sampler(rng, n_per_setting)
            c = np.asarray(condition(h, rng), dtype=float)
            wj, wk = weights[j], weights[k]
            # the weight of the other meter enters through its sum over preparations
            ac += wj * np.mean(a * c) * (1.0 / J)
            bc += wk * np.mean(b * c) * (1.0 / J)
            abc += wj * wk * np.mean(a * b * c)
            cc += np.mean(c) / J**2
    return float((ac + bc) ** 2 / (4 * abc * cc))
