"""Calibration of an informative weak measurement on a qubit detector.

From the outcome matrix w (no coupling) and its first-order shift v (weak
coupling to an unknown system) we build contrast weights pbar over three
preparations and mbar over four outcomes such that the combined operators
Pbar = sum_j pbar_j P_j and Mbar = sum_k mbar_k M_k anticommute. Neither
the Bloch vectors nor the system state need to be known.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import CALIBRATION_NORM_TOL, RANK_RTOL
from .qcore import pauli

SIGMA = np.array([pauli("X"), pauli("Y"), pauli("Z")])
ONES3 = np.ones(3)


class CalibrationError(ValueError):
    """Raised when the probability matrices are degenerate."""


class RetryableCalibrationError(CalibrationError):
    """An intermediate vector vanished for the current auxiliary vectors."""


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    @classmethod
    def of(cls, v) -> "BlochVector":
        x, y, z = (float(t) for t in v)
        return cls(x, y, z)

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.array()))

    def density(self) -> np.ndarray:
        """Qubit state (1 + r.sigma)/2; requires norm <= 1."""
        if self.norm > 1 + 1e-12:
            raise ValueError("preparation Bloch vector must have norm <= 1")
        return (np.eye(2) + np.tensordot(self.array(), SIGMA, 1)) / 2


@dataclass(frozen=True)
class POVMElement:
    mu0: float
    mu: BlochVector

    def __post_init__(self):
        if self.mu0 < self.mu.norm - 1e-12:
            raise ValueError("POVM element needs mu0 >= |mu|")

    def matrix(self) -> np.ndarray:
        return self.mu0 * np.eye(2) + np.tensordot(self.mu.array(), SIGMA, 1)


def validate_povm(povm) -> None:
    if len(povm) != 4:
        raise ValueError("calibration needs a 4-outcome POVM")
    if abs(sum(m.mu0 for m in povm) - 1) > 1e-12:
        raise ValueError("POVM weights must sum to 1")
    if np.linalg.norm(sum(m.mu.array() for m in povm)) > 1e-12:
        raise ValueError("POVM Bloch vectors must sum to 0")


@dataclass(frozen=True)
class ProbMatrices:
    """w_kj = mu0_k + mu_k.rho_j and v_kj = 2 lambda [mu_k, q, rho_j]."""

    w: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        w, v = np.asarray(self.w, float), np.asarray(self.v, float)
        if w.shape != (4, 3) or v.shape != (4, 3):
            raise ValueError("w and v must be 4x3")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)


def prob_matrices(preparations, povm, q: BlochVector, lam: float) -> ProbMatrices:
    validate_povm(povm)
    if len(preparations) != 3:
        raise ValueError("calibration needs 3 preparations")
    rho = np.array([p.array() for p in preparations])
    for p in preparations:
        p.density()  # norm check
    mu = np.array([m.mu.array() for m in povm])
    mu0 = np.array([m.mu0 for m in povm])
    w = mu0[:, None] + mu @ rho.T
    v = 2 * lam * np.einsum("ka,ja->kj", mu, np.cross(q.array()[None, :], rho))
    return ProbMatrices(w, v)


@dataclass(frozen=True)
class CalibrationResult:
    pbar: np.ndarray
    mbar: np.ndarray
    mu0prime: float
    intermediates: dict = field(default_factory=dict, repr=False)
    aux: dict = field(default_factory=dict, repr=False)
    bounds: dict = field(default_factory=dict)

    def contrast_operators(self, preparations, povm) -> tuple[np.ndarray, np.ndarray]:
        """Mbar and Pbar given the (normally unknown) true devices."""
        P = sum(c * p.density() for c, p in zip(self.pbar, preparations))
        M = sum(c * m.matrix() for c, m in zip(self.mbar, povm))
        return M, P

    def to_dict(self) -> dict:
        out = {
            "pbar": self.pbar.tolist(),
            "mbar": self.mbar.tolist(),
            "mu0prime": self.mu0prime,
            "intermediates": {k: np.asarray(v).tolist() for k, v in self.intermediates.items()},
            "aux": {k: np.asarray(v).tolist() for k, v in self.aux.items()},
            "bounds": {k: list(v) for k, v in self.bounds.items()},
        }
        return out


def _rank(v3: np.ndarray) -> int:
    s = np.linalg.svd(v3, compute_uv=False)
    if s[0] == 0 or s[1] < RANK_RTOL * s[0]:
        return 1 if s[0] > 0 else 0
    return 3 if s[2] >= RANK_RTOL * s[0] else 2


def _vanishes(x: np.ndarray, *operands: np.ndarray) -> bool:
    scale = np.prod([max(np.linalg.norm(o), 1e-300) for o in operands])
    return np.linalg.norm(x) < CALIBRATION_NORM_TOL * scale


def calibrate_with(pm: ProbMatrices, a, b, c, d) -> CalibrationResult:
    """One pass of the construction with fixed auxiliary vectors."""
    w3, v3 = pm.w[:3], pm.v[:3]
    r = _rank(v3)
    if r < 2:
        raise CalibrationError("v is degenerate (rank < 2): all Bloch vectors parallel to q")
    if r == 3:
        raise CalibrationError("v has full rank: detector is not a qubit or the channel is not unital")
    a, b, c, d = (np.asarray(x, float) for x in (a, b, c, d))

    m_par = np.cross(v3 @ a, v3 @ b)
    p_par = np.cross(v3.T @ c, v3.T @ d)
    if _vanishes(m_par, v3, a, v3, b) or _vanishes(p_par, v3, c, v3, d):
        raise RetryableCalibrationError("parallel vectors vanish for these auxiliary vectors")
    rho_par0 = p_par.sum()
    if abs(rho_par0) < CALIBRATION_NORM_TOL * np.linalg.norm(p_par):
        raise RetryableCalibrationError("sum of p_parallel vanishes")

    cols = w3.T
    m_perp = np.cross(cols[0], cols[1]) + np.cross(cols[1], cols[2]) + np.cross(cols[2], cols[0])
    if _vanishes(m_perp, w3, w3):
        raise CalibrationError("preparations are collinear")
    pbar = np.cross(m_perp @ v3, ONES3)
    p_perp = np.cross(m_par @ w3, ONES3)
    if _vanishes(pbar, m_perp, v3) or _vanishes(p_perp, m_par, w3):
        raise CalibrationError("degenerate preparation geometry")
    m_prime = np.cross(v3 @ p_perp, w3 @ pbar)
    if _vanishes(m_prime, v3, p_perp, w3, pbar):
        raise CalibrationError("degenerate measurement geometry")
    mu0p = float(m_prime @ w3 @ p_par / rho_par0)
    mbar = np.append(m_prime - mu0p, -mu0p)

    inter = {
        "m_parallel": np.append(m_par, 0.0),
        "p_parallel": p_par,
        "rho_parallel0": rho_par0,
        "m_perp": np.append(m_perp, 0.0),
        "p_perp": p_perp,
        "m_prime": np.append(m_prime, 0.0),
    }
    res = CalibrationResult(pbar, mbar, mu0p, inter, {"a": a, "b": b, "c": c, "d": d})
    return CalibrationResult(pbar, mbar, mu0p, inter, res.aux, magnitude_bounds(res, pm.w))


def default_aux() -> tuple:
    e = np.eye(3)
    return e[0], e[1], e[0], e[2]


def calibrate(pm: ProbMatrices, aux=None, max_tries: int = 32, seed: int = 12345) -> CalibrationResult:
    """Run the construction, redrawing auxiliary vectors when one vanishes."""
    rng = np.random.default_rng(seed)
    aux = tuple(aux) if aux is not None else default_aux()
    for _ in range(max_tries):
        try:
            return calibrate_with(pm, *aux)
        except RetryableCalibrationError:
            aux = tuple(rng.standard_normal((4, 3)))
    raise CalibrationError(f"no usable auxiliary vectors after {max_tries} draws")


def magnitude_bounds(result: CalibrationResult, w: np.ndarray) -> dict:
    """Intervals for |mubar| and |rhobar| implied by |mu_k|, |rho_j| <= 1."""
    w = np.asarray(w, float)
    mu_lo = float(np.max(np.abs(result.mbar @ w)))
    mu_hi = float(np.sum(np.abs(result.mbar)))
    rho_lo = float(np.max(np.abs(w @ result.pbar)))
    rho_hi = float(np.sum(np.abs(result.pbar)))
    return {"mu": (mu_lo, mu_hi), "rho": (rho_lo, rho_hi)}


def tetrahedron_povm() -> list[POVMElement]:
    signs = [(1, -1, -1), (-1, 1, -1), (-1, -1, 1), (1, 1, 1)]
    return [POVMElement(0.25, BlochVector.of(np.array(s) / (4 * np.sqrt(3)))) for s in signs]


def random_instance(rng: np.random.Generator, lam: float = 0.01):
    """Generic preparations, 4-outcome POVM and system direction."""
    def ball(n):
        x = rng.standard_normal((n, 3))
        x /= np.linalg.norm(x, axis=1)[:, None]
        return x * rng.uniform(0.3, 1.0, size=(n, 1))

    preps = [BlochVector.of(r) for r in ball(3)]
    mu = ball(4)
    mu[3] = -mu[:3].sum(axis=0)
    mu0 = np.linalg.norm(mu, axis=1) * rng.uniform(1.0, 1.5, size=4)
    scale = mu0.sum()
    povm = [POVMElement(m0 / scale, BlochVector.of(m / scale)) for m0, m in zip(mu0, mu)]
    q = BlochVector.of(ball(1)[0])
    return preps, povm, q, lam


def anticommutation_residual(M: np.ndarray, P: np.ndarray) -> float:
    """Norm of {M, P} after scaling M and P to unit Frobenius norm."""
    M = M / np.linalg.norm(M)
    P = P / np.linalg.norm(P)
    return float(np.linalg.norm(M @ P + P @ M))


def load_fixture(path) -> tuple:
    d = json.loads(Path(path).read_text())
    preps = [BlochVector.of(r) for r in d["preparations"]]
    povm = [POVMElement(float(m["mu0"]), BlochVector.of(m["mu"])) for m in d["povm"]]
    return preps, povm, BlochVector.of(d["q"]), float(d["lambda"])


def write_result(result: CalibrationResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n")
