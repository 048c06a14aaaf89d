"""Periodic grids, spectral fields and the Fourier-multiplier calculus.

Every field lives on the torus [0, 2pi)^dim sampled at n points per axis.
Coefficients use the real half-spectrum layout of ``scipy.fft.rfftn`` and are
normalized so that the zero coefficient equals the spatial mean.

Nyquist lines (any wavenumber component equal to -n/2) cannot carry odd
content of a real field, so multipliers that are odd in some coordinate
discard them.  Band-limited fields (all modes strictly below n/2) are exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi


def fft_workers() -> int:
    """Worker count for FFTs, capped by OLDRLAB_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("OLDRLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with period 2pi per axis."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def length(self) -> float:
        return TWO_PI

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return TWO_PI**self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def coeff_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.spacing
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavevector components, broadcastable to ``coeff_shape``."""
        ks = []
        for ax in range(self.dim):
            if ax == self.dim - 1:
                k = np.arange(self.n // 2 + 1, dtype=float)
            else:
                k = np.fft.fftfreq(self.n, 1.0 / self.n)
            shape = [1] * self.dim
            shape[ax] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    @cached_property
    def ksq(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers) + np.zeros(self.coeff_shape)

    @cached_property
    def nyquist(self) -> np.ndarray:
        mask = np.zeros(self.coeff_shape, dtype=bool)
        for k in self.wavenumbers:
            mask |= np.abs(k) == self.n // 2
        return mask

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.ones(self.coeff_shape, dtype=bool)
        for k in self.wavenumbers:
            keep &= np.abs(k) <= self.n / 3.0
        return keep

    @cached_property
    def hermitian_weight(self) -> np.ndarray:
        """Multiplicity of each stored half-spectrum coefficient in the full spectrum."""
        kl = self.wavenumbers[-1]
        w = np.where((kl == 0) | (kl == self.n // 2), 1.0, 2.0)
        return np.broadcast_to(w, self.coeff_shape)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.n * factor)


def forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Mean-normalized half-spectrum coefficients; leading axes are batch axes."""
    return sfft.rfftn(values, axes=grid.axes, workers=fft_workers()) / grid.size


def inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.irfftn(coeffs * grid.size, s=grid.shape, axes=grid.axes, workers=fft_workers())


def inverse_band(coeffs: np.ndarray, grid: Grid, band: int, work: np.ndarray | None = None) -> np.ndarray:
    """Inverse transform of 2D coefficients that vanish for k2 > band (skips the zero columns).

    ``work`` is an optional full-width complex buffer whose columns beyond
    ``band`` are zero; reusing it avoids re-padding on every call.
    """
    if grid.dim != 2:
        return inverse(coeffs, grid)
    w = fft_workers()
    x = sfft.ifft(coeffs[..., : band + 1], axis=-2, workers=w)
    if work is None:
        return sfft.irfft(x * grid.size, n=grid.n, axis=-1, overwrite_x=True, workers=w)
    work[..., : band + 1] = x
    work[..., : band + 1] *= grid.size
    return sfft.irfft(work, n=grid.n, axis=-1, workers=w)


def forward_band(values: np.ndarray, grid: Grid, band: int, width: int | None = None) -> np.ndarray:
    """Forward transform that fills only the columns k2 <= band; the others are zero.

    With ``width <= band + 1`` the result keeps just the first ``width`` columns.
    """
    if grid.dim != 2:
        return forward(values, grid)
    w = fft_workers()
    width = grid.coeff_shape[-1] if width is None else width
    x = sfft.rfft(values, axis=-1, workers=w)[..., : min(band + 1, width)]
    x = sfft.fft(x, axis=-2, overwrite_x=True, workers=w)
    x /= grid.size
    if width <= band + 1:
        return x
    out = np.zeros(values.shape[:-2] + grid.shape[:-1] + (width,), dtype=complex)
    out[..., : band + 1] = x
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real samples on a grid together with their (lazily computed) coefficients."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs: np.ndarray) -> "SpectralField":
        field = cls(grid, inverse(coeffs, grid))
        c = np.array(coeffs, dtype=complex)
        c.setflags(write=False)
        field.__dict__["coeffs"] = c
        return field

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "SpectralField":
        return cls(grid, np.broadcast_to(fn(*grid.coords), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "SpectralField":
        return cls(grid, np.full(grid.shape, float(value)))

    @cached_property
    def coeffs(self) -> np.ndarray:
        c = forward(self.values, self.grid)
        c.setflags(write=False)
        return c

    def mean(self) -> float:
        return float(self.coeffs.flat[0].real)

    def integral(self) -> float:
        return self.mean() * self.grid.volume

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean_free(self) -> "SpectralField":
        return SpectralField(self.grid, self.values - self.mean())

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values + other.values)
        return SpectralField(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values - other.values)
        return SpectralField(self.grid, self.values - other)

    def __rsub__(self, other):
        return SpectralField(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values * other.values)
        return SpectralField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.values)

    def __repr__(self):
        return f"SpectralField(dim={self.grid.dim}, n={self.grid.n}, mean={self.mean():.6g})"


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier multiplier: ``rule(*wavevector_components)`` evaluated off the zero mode.

    ``odd`` symbols are odd in some coordinate and are zeroed on Nyquist lines.
    """

    name: str
    rule: Callable[..., np.ndarray]
    zero_value: complex = 0.0
    odd: bool = False
    dim: int | None = None

    def on(self, grid: Grid) -> np.ndarray:
        if self.dim is not None and self.dim != grid.dim:
            raise ValueError(f"{self.name} symbol is defined for dim={self.dim}, not {grid.dim}")
        ks = grid.wavenumbers
        ksq = grid.ksq
        safe = np.where(ksq == 0, 1.0, ksq)
        with np.errstate(divide="ignore", invalid="ignore"):
            sym = np.asarray(self.rule(*ks, safe), dtype=complex) + np.zeros(grid.coeff_shape)
        sym[(0,) * grid.dim] = self.zero_value
        if self.odd:
            sym[grid.nyquist] = 0.0
        return sym


A_SYMBOL = MultiplierSymbol("A", lambda k1, k2, ksq: (k2**2 - k1**2) / (2.0 * ksq), dim=2)
B_SYMBOL = MultiplierSymbol("B", lambda k1, k2, ksq: -k1 * k2 / ksq, odd=True, dim=2)
HILBERT_SYMBOL = MultiplierSymbol("H", lambda k, ksq: -1j * np.sign(k), odd=True, dim=1)
INVERSE_LAPLACIAN_SYMBOL = MultiplierSymbol("(-Delta)^-1", lambda *args: 1.0 / args[-1])
INVERSE_LAMBDA_SYMBOL = MultiplierSymbol("Lambda^-1", lambda *args: 1.0 / np.sqrt(args[-1]))


def riesz_symbol(axis: int) -> MultiplierSymbol:
    """R_j = Lambda^-1 d_j, symbol i xi_j / |xi|."""
    return MultiplierSymbol(
        f"R{axis + 1}", lambda *args: 1j * args[axis] / np.sqrt(args[-1]), odd=True
    )


def derivative_symbol(axis: int) -> MultiplierSymbol:
    return MultiplierSymbol(f"d{axis + 1}", lambda *args: 1j * args[axis], odd=True)


def apply_multiplier(f: SpectralField, m: MultiplierSymbol) -> SpectralField:
    out = f.coeffs * m.on(f.grid)
    return SpectralField.from_coeffs(f.grid, out)


def derivative(f: SpectralField, axis: int) -> SpectralField:
    """Spectral derivative along ``axis`` (0 for x1, 1 for x2)."""
    if not 0 <= axis < f.grid.dim:
        raise ValueError(f"axis {axis} out of range for dim={f.grid.dim}")
    return apply_multiplier(f, derivative_symbol(axis))


def inverse_laplacian(f: SpectralField) -> SpectralField:
    """(-Delta)^-1 with the mean projected out."""
    return apply_multiplier(f, INVERSE_LAPLACIAN_SYMBOL)


def hilbert(f: SpectralField) -> SpectralField:
    if f.grid.dim != 1:
        raise ValueError("the Hilbert transform is only defined for 1D fields")
    return apply_multiplier(f, HILBERT_SYMBOL)


def op_A(f: SpectralField) -> SpectralField:
    return apply_multiplier(f, A_SYMBOL)


def op_B(f: SpectralField) -> SpectralField:
    return apply_multiplier(f, B_SYMBOL)


def dealias(f: SpectralField) -> SpectralField:
    """2/3 rule: drop every mode with some |xi_axis| > n/3."""
    return SpectralField.from_coeffs(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    kmax: int | None = None,
    amplitude: float = 1.0,
    mean: float = 0.0,
    slope: float = 0.0,
) -> SpectralField:
    """Random band-limited real field with modes |k_axis| <= kmax.

    Coefficient magnitudes decay like (1 + |k|)^-slope.
    """
    kmax = grid.n // 2 - 1 if kmax is None else min(kmax, grid.n // 2 - 1)
    c = rng.standard_normal(grid.coeff_shape) + 1j * rng.standard_normal(grid.coeff_shape)
    keep = np.ones(grid.coeff_shape, dtype=bool)
    for k in grid.wavenumbers:
        keep &= np.abs(k) <= kmax
    c = np.where(keep, c * (1.0 + np.sqrt(grid.ksq)) ** (-slope), 0.0)
    c[(0,) * grid.dim] = 0.0
    f = SpectralField.from_coeffs(grid, c)
    # re-transform so coefficients are exactly Hermitian-consistent
    vals = f.values / max(f.sup(), 1e-300) * amplitude + mean
    return SpectralField(grid, vals)


def active_band(coeffs: np.ndarray, grid: Grid, rtol: float = 1e-17) -> int:
    """Smallest K such that modes with some |k_axis| > K carry < rtol of the coefficient mass."""
    mag = np.abs(coeffs).reshape((-1,) + grid.coeff_shape).max(axis=0)
    total = mag.sum() * 2.0
    if total == 0.0:
        return 0
    kinf = np.zeros(grid.coeff_shape)
    for k in grid.wavenumbers:
        kinf = np.maximum(kinf, np.abs(k))
    order = np.argsort(kinf, axis=None)
    kflat = kinf.ravel()[order]
    mflat = (mag * grid.hermitian_weight).ravel()[order]
    tail = np.cumsum(mflat[::-1])[::-1]
    for K in range(grid.n // 2 + 1):
        idx = np.searchsorted(kflat, K, side="right")
        rest = tail[idx] if idx < tail.size else 0.0
        if rest <= rtol * total:
            return K
    return grid.n // 2


def _phases(x: np.ndarray, K: int, block: int = 16) -> np.ndarray:
    """exp(i k x) for k = 0..K, shape (P, K+1), from two short exponential tables."""
    lo = np.exp(1j * x[:, None] * np.arange(block))
    hi = np.exp(1j * x[:, None] * (block * np.arange(K // block + 1)))
    return (hi[:, :, None] * lo[:, None, :]).reshape(x.size, -1)[:, : K + 1]


def evaluate_at(
    coeffs: np.ndarray, grid: Grid, points: np.ndarray, band: int | None = None
) -> np.ndarray:
    """Evaluate band-limited fields at arbitrary points by direct Fourier summation.

    ``coeffs`` has shape ``(..., *grid.coeff_shape)``; ``points`` has shape
    ``(P, dim)`` (or ``(P,)`` in 1D).  Nyquist modes are ignored.  ``band``
    restricts the sum to |k_axis| <= band (use :func:`active_band`).
    Returns shape ``(..., P)``.
    """
    coeffs = np.asarray(coeffs)
    batch = coeffs.shape[: coeffs.ndim - grid.dim]
    c = coeffs.reshape((-1,) + coeffs.shape[coeffs.ndim - grid.dim :])
    K = grid.n // 2 - 1 if band is None else min(band, grid.n // 2 - 1)
    pts = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    kl = np.arange(K + 1)
    wl = np.where(kl == 0, 1.0, 2.0)
    El = _phases(pts[:, -1], K) * wl[None, :]
    if grid.dim == 1:
        out = (c[:, : K + 1] @ El.T).real
    else:
        rows = np.concatenate([np.arange(K + 1), np.arange(grid.n - K, grid.n)])
        cc = c[:, rows, : K + 1]
        G = cc.reshape(-1, K + 1) @ El.T
        G = G.reshape(c.shape[0], rows.size, pts.shape[0])
        P1 = _phases(pts[:, 0], K)
        E1 = np.concatenate([P1, np.conj(P1[:, K:0:-1])], axis=1)  # k1 = 0..K, -K..-1
        out = np.einsum("pa,fap->fp", E1, G).real
    return out.reshape(batch + (pts.shape[0],))


def evaluate_field(f: SpectralField, points: np.ndarray) -> np.ndarray:
    return evaluate_at(f.coeffs, f.grid, points)


def refine_extremum(
    coeffs: np.ndarray, grid: Grid, values: np.ndarray, kind: str = "max", candidates: int = 4
) -> float:
    """Continuum max (or min) of a band-limited field, polished from the best grid samples."""
    from scipy.optimize import minimize

    sign = 1.0 if kind == "max" else -1.0
    flat = sign * values.ravel()
    idx = np.argsort(flat)[-candidates:]
    best = flat.max()
    h = grid.spacing
    for i in idx:
        start = np.array([c.ravel()[i] for c in grid.coords])

        def obj(x):
            return -sign * evaluate_at(coeffs, grid, x[None, :])[0]

        res = minimize(obj, start, method="L-BFGS-B",
                       bounds=[(s - h, s + h) for s in start],
                       options={"ftol": 1e-16, "gtol": 1e-14, "maxiter": 200})
        best = max(best, -res.fun)
    return float(sign * best)
