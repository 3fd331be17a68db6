"""Quantum instruments, superoperators and the informative/responsive split.

Superoperators act on column-stacked density matrices:
``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from . import qcore
from .constants import (
    HERMITIAN_TOL,
    KRAUS_COMPLETENESS_TOL,
    MAX_WEAK_LAMBDA,
    WEAK_LAMBDAS,
)


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


@dataclass(frozen=True)
class SuperOp:
    """Linear map on d x d matrices stored as a d^2 x d^2 matrix."""

    dim: int
    mat: np.ndarray

    def __post_init__(self):
        m = np.array(self.mat, dtype=complex)
        if m.shape != (self.dim**2, self.dim**2):
            raise ValueError("superoperator shape mismatch")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = rho.mat if isinstance(rho, qcore.DensityState) else rho
        return unvec(self.mat @ vec(rho), self.dim)

    def __matmul__(self, other: "SuperOp") -> "SuperOp":
        return SuperOp(self.dim, self.mat @ other.mat)

    def __add__(self, other: "SuperOp") -> "SuperOp":
        return SuperOp(self.dim, self.mat + other.mat)

    def __sub__(self, other: "SuperOp") -> "SuperOp":
        return SuperOp(self.dim, self.mat - other.mat)

    def __mul__(self, k: complex) -> "SuperOp":
        return SuperOp(self.dim, k * self.mat)

    __rmul__ = __mul__

    def __neg__(self) -> "SuperOp":
        return SuperOp(self.dim, -self.mat)

    @classmethod
    def identity(cls, dim: int) -> "SuperOp":
        return cls(dim, np.eye(dim * dim))

    @classmethod
    def zero(cls, dim: int) -> "SuperOp":
        return cls(dim, np.zeros((dim * dim, dim * dim)))

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "SuperOp":
        d = kraus[0].shape[0]
        return cls(d, sum(np.kron(K.conj(), K) for K in kraus))

    def allclose(self, other: "SuperOp", atol: float = 1e-12) -> bool:
        return self.dim == other.dim and bool(np.allclose(self.mat, other.mat, rtol=0, atol=atol))


def _require_hermitian(A: np.ndarray, what: str = "operator") -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if not qcore.is_hermitian(A, 1e-10):
        raise ValueError(f"{what} must be Hermitian")
    return A


def left(A: np.ndarray) -> SuperOp:
    d = A.shape[0]
    return SuperOp(d, np.kron(np.eye(d), A))


def right(A: np.ndarray) -> SuperOp:
    d = A.shape[0]
    return SuperOp(d, np.kron(A.T, np.eye(d)))


def anticommutator_map(A: np.ndarray) -> SuperOp:
    """B -> {A, B}/2."""
    A = _require_hermitian(A)
    return 0.5 * (left(A) + right(A))


def commutator_map(A: np.ndarray) -> SuperOp:
    """B -> i[B, A]."""
    A = _require_hermitian(A)
    return 1j * (right(A) - left(A))


@dataclass(frozen=True)
class Instrument:
    """Outcome-labelled family of CP maps in Kraus form."""

    outcomes: tuple
    kraus: dict = field(repr=False)

    def __post_init__(self):
        if set(self.kraus) != set(self.outcomes):
            raise ValueError("every outcome needs a Kraus list")
        total = sum(K.conj().T @ K for ks in self.kraus.values() for K in ks)
        if not np.allclose(total, np.eye(total.shape[0]), rtol=0, atol=KRAUS_COMPLETENESS_TOL):
            raise ValueError("instrument is not trace preserving")

    @property
    def dim(self) -> int:
        return next(iter(self.kraus.values()))[0].shape[0]

    def superop(self, outcome) -> SuperOp:
        return SuperOp.from_kraus(self.kraus[outcome])

    def channel(self) -> SuperOp:
        return SuperOp.from_kraus([K for ks in self.kraus.values() for K in ks])

    def completeness_error(self) -> float:
        total = sum(K.conj().T @ K for ks in self.kraus.values() for K in ks)
        return float(np.abs(total - np.eye(self.dim)).max())

    def probabilities(self, rho: np.ndarray) -> dict:
        rho = rho.mat if isinstance(rho, qcore.DensityState) else rho
        return {o: float(sum(np.trace(K @ rho @ K.conj().T).real for K in self.kraus[o])) for o in self.outcomes}

    def average_map(self, values: dict | None = None) -> SuperOp:
        """sum_a a K(a) with outcome values (default: the labels themselves)."""
        values = values or {o: o for o in self.outcomes}
        return sum((values[o] * self.superop(o) for o in self.outcomes), SuperOp.zero(self.dim))


def dilation_instrument(meter_state: np.ndarray, coupling: np.ndarray, effects: dict) -> Instrument:
    """Instrument rho -> Tr' M(a) U (rho (x) P) U^dag for a single-qubit meter.

    ``coupling`` acts on system (x) meter with the system first; ``effects``
    maps outcome labels to meter effects (already including any readout
    rotation, i.e. Heisenberg-picture effects).
    """
    meter_state = np.asarray(meter_state, dtype=complex)
    dm = meter_state.shape[0]
    ds = coupling.shape[0] // dm
    w, vecs = np.linalg.eigh(meter_state)
    kraus = {}
    for label, E in effects.items():
        ew, ev = np.linalg.eigh(np.asarray(E, dtype=complex))
        ks = []
        for pi, mi in zip(w, vecs.T):
            if pi <= 1e-15:
                continue
            for ej, fj in zip(ew, ev.T):
                if ej <= 1e-15:
                    continue
                # K = sqrt(p e) (I (x) <f|) U (I (x) |m>)
                bra = np.kron(np.eye(ds), fj.conj().reshape(1, dm))
                ketm = np.kron(np.eye(ds), mi.reshape(dm, 1))
                ks.append(np.sqrt(pi * ej) * bra @ coupling @ ketm)
        if not ks:
            ks.append(np.zeros((ds, ds), dtype=complex))
        kraus[label] = ks
    return Instrument(tuple(effects), kraus)


def meter_readout_effects(readout: np.ndarray) -> dict:
    """Effects for outcomes +1/-1 when ``readout`` precedes a Z measurement.

    Bit 0 maps to +1 and bit 1 to -1.
    """
    R = np.asarray(readout, dtype=complex)
    return {+1: R.conj().T @ qcore.P0 @ R, -1: R.conj().T @ qcore.P1 @ R}


def weak_z_instrument(lam: float, sign: int = +1) -> Instrument:
    """Weak Z measurement of strength ``lam`` = sin(theta) by a qubit meter.

    Meter prepared by Y_{sign pi/2} on |0>, coupled by (ZZ)_theta, rotated by
    X_{pi/2} and read out in Z.
    """
    if abs(lam) > 1:
        raise ValueError("|lambda| must not exceed 1")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    theta = float(np.arcsin(lam))
    Y = qcore.pauli("Y")
    m = qcore.rotation(Y, sign * np.pi / 2) @ qcore.KET0
    effects = meter_readout_effects(qcore.rotation(qcore.pauli("X"), np.pi / 2))
    return dilation_instrument(np.outer(m, m.conj()), qcore.zz_coupling(theta), effects)


def dichotomic_closed_form(lam: float, sign: int, z: int) -> SuperOp:
    """K_s(z) = (z s lam Zhat + 1 + (1 - sqrt(1 - lam^2)) Ztilde^2 / 4) / 2."""
    Z = qcore.pauli("Z")
    zt = commutator_map(Z)
    total = SuperOp.identity(2) + (1 - np.sqrt(1 - lam**2)) / 4 * (zt @ zt)
    return 0.5 * (z * sign * lam * anticommutator_map(Z) + total)


def contrast_kbar(lam: float) -> SuperOp:
    """Sign-contrast average map of the weak Z instrument (weights +-1/2)."""
    if abs(lam) > 1:
        raise ValueError("|lambda| must not exceed 1")
    out = SuperOp.zero(2)
    for s in (+1, -1):
        inst = weak_z_instrument(lam, s)
        out = out + (s / 2) * inst.average_map()
    return out


@dataclass(frozen=True)
class ContrastScheme:
    """Meter preparations P_j with weights pbar_j and outcome weights mbar_k."""

    preparations: tuple
    weights: tuple
    effect_weights: tuple = ()

    @property
    def is_contrast(self) -> bool:
        return abs(sum(self.weights)) < 1e-12

    def pbar(self) -> np.ndarray:
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        return sum(w * np.asarray(P, dtype=complex) for w, P in zip(self.weights, self.preparations))

    def mbar(self, effects: Sequence[np.ndarray]) -> np.ndarray:
        return sum(m * np.asarray(E, dtype=complex) for m, E in zip(self.effect_weights, effects))


def averaging_map(Mbar: np.ndarray, Pbar: np.ndarray, U: np.ndarray) -> SuperOp:
    """rho -> Tr' Mbar U (rho (x) Pbar) U^dag with the system as first factor."""
    Mbar = np.asarray(Mbar, dtype=complex)
    Pbar = np.asarray(Pbar, dtype=complex)
    dm = Mbar.shape[0]
    ds = U.shape[0] // dm
    cols = []
    for j in range(ds * ds):
        basis = np.zeros(ds * ds, dtype=complex)
        basis[j] = 1
        E = unvec(basis, ds)
        out = U @ np.kron(E, Pbar) @ U.conj().T @ np.kron(np.eye(ds), Mbar)
        cols.append(vec(_trace_second(out, ds, dm)))
    return SuperOp(ds, np.array(cols).T)


def _trace_second(m: np.ndarray, ds: int, dm: int) -> np.ndarray:
    return np.einsum("ajbj->ab", m.reshape(ds, dm, ds, dm))


def decompose_weak(Mbar: np.ndarray, Pbar: np.ndarray, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First-order operators of the weak averaging map.

    Returns ``(A, A_prime)`` with A = i Tr'([Mbar, Pbar] H) and
    A' = Tr'({Mbar, Pbar} H) / 2, so that the averaging map is
    lam (Ahat + A'tilde) + O(lam^2). ``H`` acts on system (x) meter.
    """
    Mbar = _require_hermitian(Mbar, "Mbar")
    Pbar = _require_hermitian(Pbar, "Pbar")
    H = _require_hermitian(H, "H")
    dm = Mbar.shape[0]
    if Pbar.shape != Mbar.shape or H.shape[0] % dm:
        raise ValueError("dimension mismatch between meter operators and H")
    ds = H.shape[0] // dm
    comm = Mbar @ Pbar - Pbar @ Mbar
    anti = Mbar @ Pbar + Pbar @ Mbar
    A = 1j * _trace_second(H @ np.kron(np.eye(ds), comm), ds, dm)
    Ap = 0.5 * _trace_second(H @ np.kron(np.eye(ds), anti), ds, dm)
    # symmetrize away round-off
    return (A + A.conj().T) / 2, (Ap + Ap.conj().T) / 2


def weak_slope(f: Callable[[float], np.ndarray], lambdas: Sequence[float] = WEAK_LAMBDAS):
    """d f / d lam at 0 from central differences at +-lam, Richardson-combined.

    With lambdas (h, h/2) the error is O(h^4).
    """
    lams = [float(x) for x in lambdas]
    if any(l <= 0 for l in lams):
        raise ValueError("lambdas must be positive")
    if max(lams) > MAX_WEAK_LAMBDA:
        raise ValueError(f"lambda above {MAX_WEAK_LAMBDA} is not weak")
    d = [(np.asarray(f(h)) - np.asarray(f(-h))) / (2 * h) for h in lams]
    if len(d) == 1:
        return d[0]
    h1, h2 = lams[0], lams[1]
    r = (h1 / h2) ** 2
    return (r * d[1] - d[0]) / (r - 1)


def weak_slope_superop(Mbar, Pbar, H, lambdas: Sequence[float] = WEAK_LAMBDAS) -> SuperOp:
    H = _require_hermitian(H, "H")
    ds = H.shape[0] // np.asarray(Mbar).shape[0]
    mat = weak_slope(lambda l: averaging_map(Mbar, Pbar, expm(-1j * l * H)).mat, lambdas)
    return SuperOp(ds, mat)


def classify_measurement(Mbar: np.ndarray, Pbar: np.ndarray, tol: float = 1e-8) -> str:
    """Return 'informative', 'responsive', 'mixed' or 'null'.

    Informative: {Mbar, Pbar} vanishes while i[Mbar, Pbar] does not;
    responsive is the reverse. Norm: largest singular value.
    """
    Mbar = np.asarray(Mbar, dtype=complex)
    Pbar = np.asarray(Pbar, dtype=complex)
    anti = np.linalg.norm(Mbar @ Pbar + Pbar @ Mbar, 2)
    comm = np.linalg.norm(Mbar @ Pbar - Pbar @ Mbar, 2)
    small_a, small_c = anti < tol, comm < tol
    if small_a and small_c:
        return "null"
    if small_a:
        return "informative"
    if small_c:
        return "responsive"
    return "mixed"


@dataclass(frozen=True)
class PairSlopes:
    da: float
    db: float
    dab: float


def theorem1_limits(Mbar_A, Pbar_A, Mbar_B, Pbar_B, H, lambda_list: Sequence[float] = WEAK_LAMBDAS) -> PairSlopes:
    """Weak-limit slopes <a>/lam, <b>/lam, <ab>/lam for two coupled meters.

    ``H`` acts on A (x) B. Each expectation is Tr(M U^lam (Pa (x) Pb) U^lam^dag)
    with U^lam = exp(-i lam H).
    """
    MA, PA, MB, PB = (np.asarray(x, dtype=complex) for x in (Mbar_A, Pbar_A, Mbar_B, Pbar_B))
    H = _require_hermitian(H, "H")
    if H.shape[0] != MA.shape[0] * MB.shape[0]:
        raise ValueError("H must act on the product of both meter spaces")
    rho0 = np.kron(PA, PB)
    ops = (np.kron(MA, np.eye(MB.shape[0])), np.kron(np.eye(MA.shape[0]), MB), np.kron(MA, MB))

    def values(lam):
        U = expm(-1j * lam * H)
        r = U @ rho0 @ U.conj().T
        return np.array([np.trace(o @ r).real for o in ops])

    da, db, dab = weak_slope(values, lambda_list)
    return PairSlopes(float(da), float(db), float(dab))
