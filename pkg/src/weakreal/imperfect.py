"""Imperfect meters: noisy preparation, over-rotated gates, noisy readout.

The meter preparation Y_{+-} is realized natively as Z_{+-} X_{pi/2} Z_{-+}.
Over-rotation replaces X_{pi/2} by X_{pi/2 + alpha} there and by
X_{pi/2 + beta} before readout.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import qcore
from .instrument import (
    Instrument,
    SuperOp,
    anticommutator_map,
    commutator_map,
    dilation_instrument,
)


@dataclass(frozen=True)
class NoiseParams:
    """Meter imperfections.

    epsilon: preparation flip probability; alpha, beta: over-rotation of the
    preparation and readout X_{pi/2} gates (radians); eta, omega: readout
    offset/contrast with bit-0 effect eta + (1 - omega)|0><0|.
    """

    epsilon: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    eta: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not 0 <= self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in [0, 1/2]")
        if self.eta < 0 or self.eta + (1 - self.omega) > 1 + 1e-15 or self.omega > 1:
            raise ValueError("readout requires eta >= 0 and eta + (1 - omega) <= 1")
        ev = np.linalg.eigvalsh(self.effect_plus())
        if ev.min() < -1e-12 or ev.max() > 1 + 1e-12:
            raise ValueError("readout effect must satisfy 0 <= M+ <= I")

    def effect_plus(self) -> np.ndarray:
        return self.eta * np.eye(2) + (1 - self.omega) * qcore.P0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "NoiseParams":
        return cls(**(d or {}))


IDEAL = NoiseParams()


@dataclass(frozen=True)
class FGParams:
    """Disturbance parameters of one meter: K = 1 - (f/2) Ztilde + g Ztilde^2."""

    f: float
    g: float

    @classmethod
    def from_noise(cls, params: NoiseParams, theta: float) -> "FGParams":
        return cls(
            f=(1 - 2 * params.epsilon) * np.sin(params.alpha) * np.sin(theta),
            g=(1 - np.cos(theta)) / 4,
        )


def meter_state(params: NoiseParams, sign: int) -> np.ndarray:
    Z, X = qcore.pauli("Z"), qcore.pauli("X")
    P = (1 - params.epsilon) * qcore.P0 + params.epsilon * qcore.P1
    G = qcore.rotation(Z, sign * np.pi / 2) @ qcore.rotation(X, np.pi / 2 + params.alpha) @ qcore.rotation(Z, -sign * np.pi / 2)
    return G @ P @ G.conj().T


def meter_effects(params: NoiseParams) -> dict:
    """Heisenberg-picture meter effects for outcomes +1 (bit 0) and -1 (bit 1)."""
    R = qcore.rotation(qcore.pauli("X"), np.pi / 2 + params.beta)
    Mp = params.effect_plus()
    plus = R.conj().T @ Mp @ R
    return {+1: plus, -1: np.eye(2) - plus}


def noisy_instrument(theta: float, sign: int, params: NoiseParams = IDEAL) -> Instrument:
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if not isinstance(params, NoiseParams):
        raise TypeError("params must be NoiseParams")
    return dilation_instrument(meter_state(params, sign), qcore.zz_coupling(theta), meter_effects(params))


def rescale_factor(params: NoiseParams, theta: float) -> float:
    """Coefficient of Zhat in the sign-contrast average map."""
    return (1 - 2 * params.epsilon) * (1 - params.omega) * np.cos(params.alpha) * np.cos(params.beta) * np.sin(theta)


def contrast_map(theta: float, params: NoiseParams = IDEAL) -> SuperOp:
    out = SuperOp.zero(2)
    for s in (+1, -1):
        out = out + (s / 2) * noisy_instrument(theta, s, params).average_map()
    return out


def disturbance_map(fg: FGParams) -> SuperOp:
    """Total channel 1 - (f/2) Ztilde + g Ztilde^2 of a noisy weak Z meter."""
    zt = commutator_map(qcore.pauli("Z"))
    return SuperOp.identity(2) - (fg.f / 2) * zt + fg.g * (zt @ zt)


def zhat_coefficient(op: SuperOp) -> float:
    """Projection of a qubit superoperator onto Zhat (Hilbert-Schmidt)."""
    zh = anticommutator_map(qcore.pauli("Z")).mat
    return float((np.vdot(zh, op.mat) / np.vdot(zh, zh)).real)


def corrected_c(psi: float, fg_a: FGParams, fg_b: FGParams) -> float:
    """Perturbative prediction of <C> behind two noisy weak Z meters.

    cos^2 psi + 2 (g_A + g_B - 4 g_A g_B + f_A f_B) sin^2 psi.
    """
    s2 = np.sin(psi) ** 2
    return float(np.cos(psi) ** 2 + 2 * (fg_a.g + fg_b.g - 4 * fg_a.g * fg_b.g + fg_a.f * fg_b.f) * s2)


def exact_c(psi: float, fg_a: FGParams, fg_b: FGParams) -> float:
    """<C> from the exact disturbance channels (f enters as f/2 per meter)."""
    half_a = FGParams(fg_a.f / 2, fg_a.g)
    half_b = FGParams(fg_b.f / 2, fg_b.g)
    return corrected_c(psi, half_a, half_b)


def device_noise(row: dict) -> NoiseParams:
    """Heuristic, non-normative map of a device calibration row to NoiseParams.

    The readout error (units of 1e-2) becomes ``omega``; preparation and
    gates are treated as ideal.
    """
    return NoiseParams(omega=float(row["readout_error"]) / 100.0)
