"""Continuous-variable counterparts: position/momentum and phase space.

Units are dimensionless with hbar = 1. Wavefunctions live on a uniform
grid; derivatives use 5-point central stencils.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import BarycentricInterpolator

GRID_LIMIT = 12.0
GRID_POINTS = 4096


def default_grid(limit: float = GRID_LIMIT, n: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(-limit, limit, n)


def fd5(f: np.ndarray, dx: float, order: int = 1) -> np.ndarray:
    """First or second derivative with 5-point stencils (2nd order at the two edge cells)."""
    f = np.asarray(f)
    out = np.empty_like(f)
    if order == 1:
        out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dx)
        edge = np.gradient(f, dx, edge_order=2)
    elif order == 2:
        out[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * dx * dx)
        edge = np.gradient(np.gradient(f, dx, edge_order=2), dx, edge_order=2)
    else:
        raise ValueError("order must be 1 or 2")
    out[:2], out[-2:] = edge[:2], edge[-2:]
    return out


def spectral_derivative(f: np.ndarray, dx: float, order: int = 1) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(len(f), dx)
    return np.fft.ifft((1j * k) ** order * np.fft.fft(f))


def _at(x: np.ndarray, values: np.ndarray, z: float, width: int = 6):
    """Local polynomial interpolation of grid data at z."""
    if not x[width] <= z <= x[-width - 1]:
        raise ValueError(f"z={z} outside the grid interior")
    i = int(np.searchsorted(x, z))
    lo = max(i - width // 2, 0)
    sl = slice(lo, lo + width)
    return BarycentricInterpolator(x[sl], values[sl])(z)


@dataclass(frozen=True)
class WaveFunction1D:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        v = np.asarray(self.values, complex)
        if g.shape != v.shape or g.ndim != 1:
            raise ValueError("grid and values must be 1-D of equal length")
        if not np.allclose(np.diff(g), g[1] - g[0], rtol=1e-9, atol=0):
            raise ValueError("grid must be uniform")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def norm(self) -> float:
        return float(integrate.trapezoid(np.abs(self.values) ** 2, self.grid))

    def is_normalized(self, tol: float = 1e-8) -> bool:
        return abs(self.norm() - 1) < tol

    @classmethod
    def from_function(cls, fn: Callable, grid: np.ndarray | None = None) -> "WaveFunction1D":
        grid = default_grid() if grid is None else grid
        return cls(grid, fn(grid))


@dataclass(frozen=True)
class CatParams:
    a: float

    def amplitude(self, x):
        a = self.a
        x = np.asarray(x, float)
        norm = np.sqrt(2 * np.sqrt(np.pi) * (1 + np.exp(-a * a)))
        return (np.exp(-((x - a) ** 2) / 2) + np.exp(-((x + a) ** 2) / 2)) / norm

    def wavefunction(self, grid: np.ndarray | None = None) -> WaveFunction1D:
        return WaveFunction1D.from_function(self.amplitude, grid)


@dataclass(frozen=True)
class LogAmplitude:
    """Polar form psi = exp(alpha + i beta) on the grid points with |psi| above a floor."""

    grid: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    mask: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return np.where(self.mask, np.exp(self.alpha + 1j * self.beta), 0)


def polar_decomposition(psi: WaveFunction1D, floor: float = 1e-8) -> LogAmplitude:
    mag = np.abs(psi.values)
    mask = mag > floor
    alpha = np.log(np.where(mask, mag, 1.0))
    beta = np.unwrap(np.angle(psi.values))
    return LogAmplitude(psi.grid, alpha, beta, mask)


@dataclass(frozen=True)
class PMMoments:
    """<C>, <C Qhat>, <C Qhat^2> for the position projector C at z."""

    c: float
    cq: float
    cq2: float

    @property
    def violated(self) -> bool:
        # <Q|c>^2 <= <Q^2|c> fails
        return self.cq**2 > self.c * self.cq2


def quantum_pm_moments(psi: WaveFunction1D, z: float) -> PMMoments:
    """Moments from the polar form: e^{2a}, b' e^{2a}, (b'^2 - a''/2) e^{2a}."""
    pol = polar_decomposition(psi)
    dx = psi.dx
    a = _at(psi.grid, pol.alpha, z)
    b1 = _at(psi.grid, fd5(pol.beta, dx), z)
    a2 = _at(psi.grid, fd5(pol.alpha, dx, 2), z)
    w = np.exp(2 * a)
    return PMMoments(float(w), float(b1 * w), float((b1 * b1 - a2 / 2) * w))


def quantum_pm_moments_direct(psi: WaveFunction1D) -> Callable[[float], PMMoments]:
    """Moments from the kernel form |psi|^2, Im psi' psi*, (|psi'|^2 - Re psi'' psi*)/2.

    Derivatives are spectral, independent of the stencils above.
    """
    v, dx = psi.values, psi.dx
    d1 = spectral_derivative(v, dx, 1)
    d2 = spectral_derivative(v, dx, 2)
    c = np.abs(v) ** 2
    cq = (d1 * v.conj()).imag
    cq2 = (np.abs(d1) ** 2 - (d2 * v.conj()).real) / 2

    def at(z: float) -> PMMoments:
        return PMMoments(*(float(_at(psi.grid, arr, z)) for arr in (c, cq, cq2)))

    return at


def cat_alpha_second(a: float, x):
    """Curvature of log|psi| for the cat state: a^2 sech^2(ax) - 1."""
    return a * a / np.cosh(a * np.asarray(x, float)) ** 2 - 1


def wigner_cat(x, q, a: float):
    x, q = np.asarray(x, float), np.asarray(q, float)
    ea = np.exp(-a * a)
    return np.exp(-x * x - q * q) / (1 + ea) * (ea * np.cosh(2 * a * x) + np.cos(2 * a * q)) / np.pi


def wigner_conditional_integrals(a: float) -> tuple[float, float]:
    """sqrt(pi) times the integrals of W(0,q) and q^2 W(0,q) over q."""
    e = np.exp(a * a) + 1
    return 2 / e, (1 - a * a) / e


def wigner_conditional_ratio(a: float) -> float:
    i0, i2 = wigner_conditional_integrals(a)
    return i2 / i0


def wigner_conditional_ratio_quadrature(a: float) -> float:
    i0 = integrate.quad(lambda q: wigner_cat(0.0, q, a), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    i2 = integrate.quad(lambda q: q * q * wigner_cat(0.0, q, a), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    return i2 / i0


def wigner_x_marginal(x: float, a: float) -> float:
    return integrate.quad(lambda q: wigner_cat(x, q, a), -np.inf, np.inf, epsabs=1e-13)[0]


# --- Fock states -----------------------------------------------------------


def hermite_table(n: int, x) -> np.ndarray:
    """Physicists' Hermite H_0..H_n at x by the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = np.asarray(x, float)
    H = np.empty((n + 1,) + x.shape)
    H[0] = 1.0
    if n >= 1:
        H[1] = 2 * x
    for k in range(1, n):
        H[k + 1] = 2 * x * H[k] - 2 * k * H[k - 1]
    return H


@dataclass(frozen=True)
class FockCheck:
    max_alpha_second: float
    violates: bool
    skipped: int


def fock_alpha_second(n: int, x) -> np.ndarray:
    H = hermite_table(n, x)
    h = H[n]
    h1 = 2 * n * H[n - 1] if n >= 1 else np.zeros_like(h)
    h2 = 4 * n * (n - 1) * H[n - 2] if n >= 2 else np.zeros_like(h)
    return h2 / h - (h1 / h) ** 2 - 1


def fock_check(n: int, grid: np.ndarray | None = None) -> FockCheck:
    if not 0 <= n <= 12:
        raise ValueError("n must lie in [0, 12]")
    grid = default_grid(6.0, 2001) if grid is None else np.asarray(grid, float)
    H = hermite_table(n, grid)
    if n >= 1:
        # distance to the nearest zero ~ |H_n / H_n'|
        near_zero = np.abs(H[n]) < 1e-6 * np.abs(2 * n * H[n - 1])
    else:
        near_zero = np.zeros(grid.shape, bool)
    x = grid[~near_zero]
    a2 = fock_alpha_second(n, x)
    m = float(np.max(a2))
    return FockCheck(m, m > 1e-9, int(near_zero.sum()))


def turan_residual(n: int, x) -> np.ndarray:
    """H_{n-1}^2 - H_n H_{n-2}, non-negative for real x."""
    if n < 2:
        raise ValueError("n must be >= 2")
    H = hermite_table(n, x)
    return H[n - 1] ** 2 - H[n] * H[n - 2]


# --- classical phase space -------------------------------------------------


@dataclass(frozen=True)
class MeterGrid:
    xbar: np.ndarray
    qbar: np.ndarray

    @classmethod
    def square(cls, limit: float = 8.0, n: int = 801) -> "MeterGrid":
        g = np.linspace(-limit, limit, n)
        return cls(g, g)

    def mesh(self):
        return np.meshgrid(self.xbar, self.qbar, indexing="ij")

    @property
    def spacing(self) -> tuple[float, float]:
        return float(self.xbar[1] - self.xbar[0]), float(self.qbar[1] - self.qbar[0])


def poisson_bracket(A: np.ndarray, B: np.ndarray, dx: float, dq: float) -> np.ndarray:
    """(A, B) = dA/dx dB/dq - dA/dq dB/dx on a mesh indexed (x, q)."""
    Ax, Aq = np.apply_along_axis(fd5, 0, A, dx), np.apply_along_axis(fd5, 1, A, dq)
    Bx, Bq = np.apply_along_axis(fd5, 0, B, dx), np.apply_along_axis(fd5, 1, B, dq)
    return Ax * Bq - Aq * Bx


def _integrate2(f: np.ndarray, grid: MeterGrid) -> float:
    return float(integrate.trapezoid(integrate.trapezoid(f, grid.qbar, axis=1), grid.xbar))


def classical_decompose(Mbar: Callable, Pbar: Callable, H: dict, grid: MeterGrid | None = None) -> tuple[dict, dict]:
    """Informative part A = int (Pbar, Mbar) H and responsive part A' = int Mbar Pbar H.

    ``H`` maps a system-observable label to its meter-space coefficient
    function, H = sum_label h_label(xbar, qbar) * label. Returns the
    coefficients of each label in A and A'.
    """
    grid = grid or MeterGrid.square()
    X, Q = grid.mesh()
    M, P = Mbar(X, Q) * np.ones_like(X), Pbar(X, Q) * np.ones_like(X)
    br = poisson_bracket(P, M, *grid.spacing)
    A, Ap = {}, {}
    for label, h in H.items():
        hv = h(X, Q) * np.ones_like(X)
        A[label] = _integrate2(br * hv, grid)
        Ap[label] = _integrate2(M * P * hv, grid)
    return A, Ap


@dataclass(frozen=True)
class ResponsiveRatio:
    lhs: float
    rhs: float

    @property
    def violated(self) -> bool:
        return self.lhs > self.rhs


def classical_responsive_ratio(alpha_fn: Callable[[float], float], z: float, h: float = 1e-3) -> ResponsiveRatio:
    """(alpha'^2, alpha'^2 + alpha'') for log-marginal alpha at z."""
    f = np.array([alpha_fn(z + k * h) for k in (-2, -1, 0, 1, 2)], dtype=float)
    d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
    d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
    return ResponsiveRatio(d1 * d1, d1 * d1 + d2)


def quantum_violates(alpha_second: float) -> bool:
    """Position/momentum informative criterion: log-convex amplitude."""
    return alpha_second > 0


def classical_responsive_violates(alpha_second: float) -> bool:
    """Classical responsive criterion: log-concave marginal."""
    return alpha_second < 0


@dataclass(frozen=True)
class ResponsiveSimulation:
    a: float
    ab: float
    a_sigma: float
    ab_sigma: float
    n_conditioned: int


def simulate_classical_responsive(
    lam: float, z: float, n_samples: int, seed: int = 0, half_width: float = 0.05, chunk: int = 1_000_000
) -> ResponsiveSimulation:
    """Two responsive meters on a Gaussian phase-space state, conditioned at x ~ z.

    State e^{-x^2-q^2}/pi, meters e^{-xbar^2-qbar^2}/pi, H = 2 xbar q, readout
    M = xbar. The flow shifts x by 2 lam xbar per meter; readouts are unchanged.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    s = np.sqrt(0.5)
    acc_a, acc_ab, acc_a2, acc_ab2, n = 0.0, 0.0, 0.0, 0.0, 0
    left = n_samples
    while left > 0:
        m = min(chunk, left)
        left -= m
        x = rng.normal(0, s, m)
        xa = rng.normal(0, s, m)
        xb = rng.normal(0, s, m)
        xf = x + 2 * lam * (xa + xb)
        sel = np.abs(xf - z) < half_width
        a, b = xa[sel], xb[sel]
        u, ab = (a + b) / 2, a * b
        acc_a += u.sum()
        acc_a2 += (u * u).sum()
        acc_ab += ab.sum()
        acc_ab2 += (ab * ab).sum()
        n += int(sel.sum())
    if n < 2:
        raise ValueError("condition never met")
    ma, mab = acc_a / n, acc_ab / n
    sa = np.sqrt(max(acc_a2 / n - ma * ma, 0) / n)
    sab = np.sqrt(max(acc_ab2 / n - mab * mab, 0) / n)
    return ResponsiveSimulation(ma, mab, sa, sab, n)


def responsive_gaussian_exact(lam: float, z: float) -> tuple[float, float]:
    """Exact Gaussian conditioning for the simulation above: (E[a|x_f=z], E[ab|x_f=z])."""
    var = 0.5 + 4 * lam * lam
    k = lam / var
    return k * z, -lam * lam / var + (k * z) ** 2


@dataclass(frozen=True)
class NoninvasiveReadout:
    readouts: np.ndarray
    system_before: np.ndarray
    system_after: np.ndarray


def classical_noninvasive_demo(A_fn: Callable, samples: np.ndarray, steps: int = 16) -> NoninvasiveReadout:
    """Meter P = delta(xbar) delta(qbar), H = qbar A(x, q), readout xbar at unit strength.

    Hamilton's equations are integrated in ``steps`` Euler steps; with qbar = 0
    the system never moves and xbar accumulates A(x, q) exactly.
    """
    samples = np.asarray(samples, float)
    x, q = samples[:, 0].copy(), samples[:, 1].copy()
    xbar = np.zeros(len(x))
    qbar = np.zeros(len(x))
    dt = 1.0 / steps
    eps = 1e-6
    for _ in range(steps):
        A = A_fn(x, q)
        dA_dx = (A_fn(x + eps, q) - A_fn(x - eps, q)) / (2 * eps)
        dA_dq = (A_fn(x, q + eps) - A_fn(x, q - eps)) / (2 * eps)
        x, q, xbar, qbar = x + dt * qbar * dA_dq, q - dt * qbar * dA_dx, xbar + dt * A, qbar
    return NoninvasiveReadout(xbar, samples, np.column_stack([x, q]))


def cat_ratio_table(a_values) -> list[tuple[float, float]]:
    """(a, conditional Wigner ratio) rows; the ratio changes sign at a = 1."""
    return [(float(a), float(wigner_conditional_ratio(a))) for a in a_values]
