"""Steady Stokes inversion: stress -> velocity, velocity gradient and (lambda, mu, omega)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oldrlab.spectral import (
    A_SYMBOL,
    B_SYMBOL,
    Grid,
    SpectralField,
    inverse,
)


@dataclass(frozen=True, eq=False)
class StressField2D:
    """Symmetric 2x2 stress stored as (s11, s12, s22)."""

    s11: SpectralField
    s12: SpectralField
    s22: SpectralField

    def __post_init__(self):
        if not (self.s11.grid == self.s12.grid == self.s22.grid):
            raise ValueError("stress components must share one grid")
        if self.s11.grid.dim != 2:
            raise ValueError("StressField2D needs a 2D grid")

    @property
    def grid(self) -> Grid:
        return self.s11.grid

    @classmethod
    def from_abc(cls, a: SpectralField, b: SpectralField, c: SpectralField) -> "StressField2D":
        return cls(0.5 * c + a, b, 0.5 * c - a)

    @property
    def a(self) -> SpectralField:
        return 0.5 * (self.s11 - self.s22)

    @property
    def b(self) -> SpectralField:
        return self.s12

    @property
    def c(self) -> SpectralField:
        return self.s11 + self.s22

    def coeff_stack(self) -> np.ndarray:
        return np.stack([self.s11.coeffs, self.s12.coeffs, self.s22.coeffs])

    def value_stack(self) -> np.ndarray:
        return np.stack([self.s11.values, self.s12.values, self.s22.values])

    def __add__(self, other: "StressField2D") -> "StressField2D":
        return StressField2D(self.s11 + other.s11, self.s12 + other.s12, self.s22 + other.s22)

    def scaled(self, factor: float) -> "StressField2D":
        return StressField2D(factor * self.s11, factor * self.s12, factor * self.s22)


@dataclass(frozen=True, eq=False)
class VelocityField2D:
    u1: SpectralField
    u2: SpectralField

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    def divergence(self) -> SpectralField:
        g = self.grid
        k1, k2 = g.wavenumbers
        d = 1j * k1 * self.u1.coeffs + 1j * k2 * self.u2.coeffs
        d[g.nyquist] = 0.0
        return SpectralField.from_coeffs(g, d)

    def gradient(self) -> list[list[SpectralField]]:
        """Entries [i][j] = d_j u^i."""
        g = self.grid
        ks = g.wavenumbers
        out = []
        for u in (self.u1, self.u2):
            row = []
            for k in ks:
                c = 1j * k * u.coeffs
                c[g.nyquist] = 0.0
                row.append(SpectralField.from_coeffs(g, c))
            out.append(row)
        return out

    def sup(self) -> float:
        return float(np.max(np.hypot(self.u1.values, self.u2.values)))


def _symbols(grid: Grid):
    k1, k2 = grid.wavenumbers
    ksq = grid.ksq
    safe = np.where(ksq == 0, 1.0, ksq)
    mod = np.sqrt(safe)
    r1 = 1j * k1 / mod + np.zeros(grid.coeff_shape)
    r2 = 1j * k2 / mod + np.zeros(grid.coeff_shape)
    for r in (r1, r2):
        r[grid.nyquist] = 0.0
        r[0, 0] = 0.0
    inv_mod = 1.0 / mod
    inv_mod[0, 0] = 0.0
    return (r1, r2), inv_mod


def _w(grid: Grid, t11, t12, t22):
    """W_i = R_l tau^{il} + R_i R_m R_n tau^{mn}, so that u^i = k Lambda^-1 W_i."""
    (r1, r2), _ = _symbols(grid)
    rr = r1 * r1 * t11 + 2.0 * r1 * r2 * t12 + r2 * r2 * t22
    w1 = r1 * t11 + r2 * t12 + r1 * rr
    w2 = r1 * t12 + r2 * t22 + r2 * rr
    return w1, w2


def velocity_coeffs(grid: Grid, t11, t12, t22, k: float):
    """Velocity coefficients from stress coefficients (leading batch axes allowed)."""
    _, inv_mod = _symbols(grid)
    w1, w2 = _w(grid, t11, t12, t22)
    return k * inv_mod * w1, k * inv_mod * w2


def gradient_coeffs(grid: Grid, t11, t12, t22, k: float):
    """Coefficients of d_j u^i = k R_j W_i, returned as [[g11, g12], [g21, g22]]."""
    (r1, r2), _ = _symbols(grid)
    w1, w2 = _w(grid, t11, t12, t22)
    return [[k * r1 * w1, k * r2 * w1], [k * r1 * w2, k * r2 * w2]]


def lmo_coeffs(grid: Grid, a_hat, b_hat, k: float):
    """(lambda, mu, omega) coefficients from a, b coefficients."""
    A = A_SYMBOL.on(grid)
    B = B_SYMBOL.on(grid)
    lam = 2.0 * k * (-B * B * a_hat + A * B * b_hat)
    mu = 2.0 * k * (A * B * a_hat - A * A * b_hat)
    om = 2.0 * k * (A * b_hat - B * a_hat)
    return lam, mu, om


def velocity_from_stress(tau: StressField2D, k: float) -> VelocityField2D:
    g = tau.grid
    u1, u2 = velocity_coeffs(g, tau.s11.coeffs, tau.s12.coeffs, tau.s22.coeffs, k)
    return VelocityField2D(SpectralField.from_coeffs(g, u1), SpectralField.from_coeffs(g, u2))


def gradient_from_stress(tau: StressField2D, k: float) -> list[list[SpectralField]]:
    g = tau.grid
    G = gradient_coeffs(g, tau.s11.coeffs, tau.s12.coeffs, tau.s22.coeffs, k)
    return [[SpectralField.from_coeffs(g, G[i][j]) for j in range(2)] for i in range(2)]


def lambda_mu_omega(a: SpectralField, b: SpectralField, k: float):
    if a.grid != b.grid:
        raise ValueError("a and b must share one grid")
    lam, mu, om = lmo_coeffs(a.grid, a.coeffs, b.coeffs, k)
    g = a.grid
    return (
        SpectralField.from_coeffs(g, lam),
        SpectralField.from_coeffs(g, mu),
        SpectralField.from_coeffs(g, om),
    )


def gradient_from_lmo(lam: SpectralField, mu: SpectralField, om: SpectralField):
    """Assemble [[lambda, mu - omega/2], [mu + omega/2, -lambda]]."""
    return [[lam, mu - 0.5 * om], [mu + 0.5 * om, -lam]]


def stokes_residual(tau: StressField2D, u: VelocityField2D, k: float) -> float:
    """sup |-Delta u + grad p - k div tau| with the pressure p = -k R_m R_n tau^{mn}."""
    g = tau.grid
    if u.grid != g:
        raise ValueError("velocity and stress grids differ")
    k1, k2 = g.wavenumbers
    (r1, r2), _ = _symbols(g)
    t11, t12, t22 = tau.s11.coeffs, tau.s12.coeffs, tau.s22.coeffs
    p = -k * (r1 * r1 * t11 + 2.0 * r1 * r2 * t12 + r2 * r2 * t22)
    res = []
    for uh, kk, (ta, tb) in ((u.u1.coeffs, k1, (t11, t12)), (u.u2.coeffs, k2, (t12, t22))):
        div = 1j * k1 * ta + 1j * k2 * tb
        r = g.ksq * uh + 1j * kk * p - k * div
        r[g.nyquist] = 0.0
        res.append(np.max(np.abs(inverse(r, g))))
    return float(max(res))
