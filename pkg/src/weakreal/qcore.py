"""Dense small-dimension linear algebra and the fixed gate set.

Qubit 0 is the leftmost tensor factor and the leftmost character of every
outcome bitstring. Matrices are plain complex ``numpy`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import (
    HERMITIAN_TOL,
    INVOLUTION_TOL,
    MAX_QUBITS,
    PSD_TOL,
    TRACE_TOL,
    UNITARY_TOL,
)

_PAULI = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
P0 = np.outer(KET0, KET0.conj())
P1 = np.outer(KET1, KET1.conj())


def pauli(name: str) -> np.ndarray:
    """Return a fresh copy of the Pauli matrix ``name`` (one of I, X, Y, Z)."""
    try:
        return _PAULI[name].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli name {name!r}; expected one of I, X, Y, Z") from None


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.allclose(m, m.conj().T, rtol=0, atol=tol))


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m @ m.conj().T, np.eye(m.shape[0]), rtol=0, atol=tol))


def is_psd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    if not is_hermitian(m, max(tol, HERMITIAN_TOL)):
        return False
    return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -tol)


def trace(m: np.ndarray) -> complex:
    return complex(np.trace(m))


def rotation(V: np.ndarray, theta: float) -> np.ndarray:
    """exp(-i theta V / 2) = cos(theta/2) I - i sin(theta/2) V for an involution V."""
    V = np.asarray(V, dtype=complex)
    eye = np.eye(V.shape[0])
    if not is_hermitian(V, INVOLUTION_TOL) or not np.allclose(V @ V, eye, rtol=0, atol=INVOLUTION_TOL):
        raise ValueError("rotation generator must be a Hermitian involution (V^2 = I)")
    return np.cos(theta / 2) * eye - 1j * np.sin(theta / 2) * V


def rzz(theta: float) -> np.ndarray:
    """Two-qubit RZZ matrix diag(e^{i t/2}, e^{-i t/2}, e^{-i t/2}, e^{i t/2}).

    Note the sign: ``rzz(theta) == rotation(Z (x) Z, -theta)``. The weak
    coupling gate of the protocol is ``rotation(Z (x) Z, theta)``, i.e.
    ``rzz(-theta)``; see :func:`zz_coupling`.
    """
    a = np.exp(0.5j * theta)
    b = np.exp(-0.5j * theta)
    return np.diag([a, b, b, a])


def zz_coupling(theta: float) -> np.ndarray:
    """The fractional (ZZ)_theta gate in the exp(theta V / 2i) convention."""
    return rzz(-theta)


def kron(*mats: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def ket(bits: str) -> np.ndarray:
    """Computational basis vector for a bitstring, qubit 0 leftmost."""
    return kron(*[(KET0 if b == "0" else KET1).reshape(2, 1) for b in bits]).ravel()


@dataclass(frozen=True)
class DensityState:
    """Density matrix over ``n_qubits`` qubits.

    ``mat`` is stored read-only; operations return new states.
    """

    n_qubits: int
    mat: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must lie in [0, {MAX_QUBITS}]")
        m = np.array(self.mat, dtype=complex)
        d = 2**self.n_qubits
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match {self.n_qubits} qubits")
        if not is_hermitian(m, 1e-10):
            raise ValueError("density matrix must be Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @classmethod
    def from_matrix(cls, mat: np.ndarray, normalized: bool = True) -> "DensityState":
        mat = np.asarray(mat, dtype=complex)
        n = int(round(np.log2(mat.shape[0])))
        st = cls(n, mat)
        if normalized and abs(st.trace() - 1) > TRACE_TOL:
            raise ValueError("prepared state must have unit trace")
        return st

    @classmethod
    def pure(cls, psi: np.ndarray) -> "DensityState":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls.from_matrix(np.outer(psi, psi.conj()))

    @classmethod
    def zero(cls, n_qubits: int) -> "DensityState":
        return cls.pure(ket("0" * n_qubits))

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)

    def is_valid(self) -> bool:
        return is_psd(self.mat) and abs(self.trace() - 1) <= TRACE_TOL

    def expect(self, op: np.ndarray) -> float:
        return float(np.trace(op @ self.mat).real)

    def tensor(self, other: "DensityState") -> "DensityState":
        return DensityState(self.n_qubits + other.n_qubits, np.kron(self.mat, other.mat))


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets) or any(t < 0 or t >= n for t in targets):
        raise ValueError(f"invalid qubit targets {targets} for {n} qubits")
    return targets


def embed(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift an operator on ``targets`` (in that order) to the full register."""
    targets = _check_targets(targets, n_qubits)
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise ValueError("operator dimension does not match number of targets")
    rest = [q for q in range(n_qubits) if q not in targets]
    full = np.kron(op, np.eye(2 ** len(rest)))
    # axes of `full` are ordered (targets..., rest...); move them back into place
    order = targets + rest
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(list(perm) + [n_qubits + p for p in perm])
    return t.reshape(2**n_qubits, 2**n_qubits)


def apply_unitary(rho: DensityState, U: np.ndarray, targets: Sequence[int]) -> DensityState:
    U = np.asarray(U, dtype=complex)
    if not is_unitary(U):
        raise ValueError("operator is not unitary")
    full = embed(U, targets, rho.n_qubits)
    return DensityState(rho.n_qubits, full @ rho.mat @ full.conj().T)


def apply_operator(rho: DensityState, op: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Return op rho op^dagger as a bare matrix (no normalization checks)."""
    full = embed(np.asarray(op, dtype=complex), targets, rho.n_qubits)
    return full @ rho.mat @ full.conj().T


def partial_trace_matrix(mat: np.ndarray, keep: Sequence[int], n_qubits: int) -> np.ndarray:
    keep = _check_targets(keep, n_qubits)
    if not keep:
        raise ValueError("keep must be nonempty")
    t = np.asarray(mat).reshape([2] * (2 * n_qubits))
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n_qubits])
    col = list(letters[n_qubits : 2 * n_qubits])
    for q in range(n_qubits):
        if q not in keep:
            col[q] = row[q]
    out = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = 2 ** len(keep)
    return res.reshape(d, d)


def partial_trace(rho: DensityState, keep: Sequence[int]) -> DensityState:
    """Trace out every qubit not in ``keep``; kept qubits stay in the given order."""
    return DensityState(len(keep), partial_trace_matrix(rho.mat, keep, rho.n_qubits))


def random_density(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityState:
    d = 2**n_qubits
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    return DensityState.from_matrix(m / np.trace(m).real)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2
