"""Named initial-data families shared by scenarios, scripts and tests."""

from __future__ import annotations

import math

import numpy as np

from oldrlab.oldroyd import OldroydState, RelaxationlessState
from oldrlab.spectral import Grid, SpectralField, dealias, random_field


def equilibrium_state(grid: Grid, rho_bar: float = 1.0) -> OldroydState:
    z = SpectralField.constant(grid, 0.0)
    return OldroydState(z, z, SpectralField.constant(grid, 2.0 * rho_bar), SpectralField.constant(grid, rho_bar))


def random_state(
    grid: Grid,
    rng: np.random.Generator,
    amplitude: float = 0.1,
    modes: int = 4,
    mean: float = 1.0,
    rho_amplitude: float | None = None,
    trace_margin: float | None = None,
) -> OldroydState:
    """Band-limited positive data: sup|a| = sup|b| = amplitude, rho = mean + fluctuation.

    The trace is 2 rho + 2 sqrt(a^2 + b^2) + margin followed by the 2/3 projection,
    so the determinant is positive up to the projection error.
    """
    ra = 0.2 * mean if rho_amplitude is None else rho_amplitude
    margin = amplitude if trace_margin is None else trace_margin
    a = dealias(random_field(grid, rng, kmax=modes, amplitude=amplitude))
    b = dealias(random_field(grid, rng, kmax=modes, amplitude=amplitude))
    rho = dealias(random_field(grid, rng, kmax=modes, amplitude=ra, mean=mean))
    c = dealias(2.0 * rho + SpectralField(grid, 2.0 * np.sqrt(a.values**2 + b.values**2)) + margin)
    return OldroydState(a, b, c, rho)


def small_data_state(
    grid: Grid, rng: np.random.Generator, target: float, deborah: float, modes: int = 3
) -> OldroydState:
    """Data whose D * M_inf equals ``target`` (M_inf = sup rho + sup|tau|)."""
    budget = target / deborah
    amp = 0.25 * budget
    a = dealias(random_field(grid, rng, kmax=modes, amplitude=amp))
    b = dealias(random_field(grid, rng, kmax=modes, amplitude=amp))
    rho = dealias(random_field(grid, rng, kmax=modes, amplitude=0.1 * budget, mean=0.3 * budget))
    e = dealias(random_field(grid, rng, kmax=modes, amplitude=amp))
    c = 2.0 * rho + e
    state = OldroydState(a, b, c, rho)
    tau = state.tau()
    m_inf = float(np.abs(rho.values).max()) + max(f.sup() for f in (tau.s11, tau.s12, tau.s22))
    s = target / (deborah * m_inf)
    return OldroydState(s * a, s * b, s * c, s * rho)


def random_relaxationless_state(
    grid: Grid, rng: np.random.Generator, amplitude: float = 0.3, modes: int = 4, mean: float = 1.0
) -> RelaxationlessState:
    a = dealias(random_field(grid, rng, kmax=modes, amplitude=amplitude))
    b = dealias(random_field(grid, rng, kmax=modes, amplitude=amplitude))
    d0 = dealias(random_field(grid, rng, kmax=modes, amplitude=0.2 * mean, mean=mean))
    return RelaxationlessState(a, b, d0)


def poisson_kernel(x, r: float):
    """(1 - r^2) / (1 - 2 r cos x + r^2): Fourier coefficients r^|k|."""
    return (1.0 - r * r) / (1.0 - 2.0 * r * np.cos(x) + r * r)


def poisson_fields(x1, x2, r: float = math.exp(-0.5), amplitude: float = 0.3, mean: float = 1.0):
    """Analytic (a, b, c, rho) with geometrically decaying spectra, defined at any points."""
    peak = ((1.0 + r) / (1.0 - r)) ** 2
    a = amplitude * poisson_kernel(x1 - 0.4, r) * poisson_kernel(x2 + 1.0, r) / peak
    b = amplitude * poisson_kernel(x1 + 1.3, r) * poisson_kernel(x2 - 0.2, r) / peak * np.cos(x1)
    rho = mean * (1.0 + 0.3 * np.sin(x1 + 2.0 * x2))
    c = 2.0 * rho + 2.0 * np.sqrt(a * a + b * b + 0.25 * mean**2)
    return a, b, c, rho


def poisson_state(grid: Grid, **kw) -> OldroydState:
    X1, X2 = grid.coords
    return OldroydState(*[SpectralField(grid, v) for v in poisson_fields(X1, X2, **kw)])


def stress_matrices(a, b, c) -> np.ndarray:
    s = np.empty(np.shape(a) + (2, 2))
    s[..., 0, 0] = 0.5 * c + a
    s[..., 1, 1] = 0.5 * c - a
    s[..., 0, 1] = s[..., 1, 0] = b
    return s


def vanishing_profile(x, beta: float = 1.0):
    """(1 - cos x)(1 - beta sin x): nonnegative for beta <= 1, zero at x = 0, H sigma(0) = beta/2."""
    return (1.0 - np.cos(x)) * (1.0 - beta * np.sin(x))
