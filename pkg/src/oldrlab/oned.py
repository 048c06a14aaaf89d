"""One-dimensional stress model with Hilbert-transform velocity coupling.

    sigma_t + u sigma_x = 2k sigma H sigma - 2 kappa0 sigma + 2 kappa0 rho,   u_x = k H sigma,

with rho = 1 by default.  Along characteristics the complex variable
z = H sigma + i sigma obeys the Riccati equation dz/dt = k z^2 - 2 kappa0 z + 2i kappa0
whenever the advection commutator can be neglected; ``riccati_exact`` is its
closed-form solution.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from oldrlab.oldroyd import CFLError, ModelParams
from oldrlab.spectral import (
    HILBERT_SYMBOL,
    Grid,
    SpectralField,
    evaluate_at,
    forward,
    inverse,
)


@dataclass(frozen=True, eq=False)
class OneDState:
    sigma: SpectralField
    time: float = 0.0
    flag: str | None = None

    def __post_init__(self):
        if self.sigma.grid.dim != 1:
            raise ValueError("OneDState needs a 1D grid")

    @property
    def grid(self) -> Grid:
        return self.sigma.grid


@dataclass(frozen=True)
class OneDConfig:
    dt: float
    t_end: float
    dealias: bool = True
    cfl_guard: float = 0.5
    record_every: int = 1
    max_norm: float = 1e8

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class OneDEngine:
    def __init__(self, grid: Grid, params: ModelParams, dealias: bool = True, source: SpectralField | None = None):
        if grid.dim != 1:
            raise ValueError("OneDEngine needs a 1D grid")
        self.grid = grid
        self.params = params
        (kw,) = grid.wavenumbers
        self.ik = np.where(grid.nyquist, 0.0, 1j * kw)
        self.H = HILBERT_SYMBOL.on(grid)
        absk = np.abs(kw)
        # u = -k Lambda^{-1}(sigma - mean): u_x = k H sigma, mean of u is zero
        self.U = np.where(absk == 0, 0.0, -params.k / np.where(absk == 0, 1.0, absk))
        self.U = np.where(grid.nyquist, 0.0, self.U)
        self.mask = grid.dealias_mask.astype(float) if dealias else np.ones(grid.coeff_shape)
        self.source = np.zeros(grid.coeff_shape, dtype=complex)
        if source is None:
            self.source[0] = 1.0
        else:
            self.source[:] = source.coeffs

    def rhs(self, s_hat: np.ndarray):
        p = self.params
        ph = inverse(np.stack([s_hat, self.ik * s_hat, self.H * s_hat, self.U * s_hat]), self.grid)
        sig, sx, hs, u = ph
        N = -u * sx + 2.0 * p.k * sig * hs
        d = forward(N, self.grid) * self.mask
        kap = p.kappa0
        d += -2.0 * kap * s_hat + 2.0 * kap * self.source
        return d, {"umax": float(np.abs(u).max()), "u_hat": self.U * s_hat}


def rhs_1d(state: OneDState, params: ModelParams, dealias: bool = True, source: SpectralField | None = None):
    """(d sigma/dt, u) as SpectralFields."""
    eng = OneDEngine(state.grid, params, dealias, source)
    d, info = eng.rhs(state.sigma.coeffs)
    g = state.grid
    return SpectralField.from_coeffs(g, d), SpectralField.from_coeffs(g, info["u_hat"])


def hilbert_coeffs(s_hat: np.ndarray, grid: Grid) -> np.ndarray:
    return HILBERT_SYMBOL.on(grid) * s_hat


# ------------------------------------------------------------------ Cotlar


def cotlar_residual(sigma: SpectralField) -> float:
    """sup |H(sigma H sigma) - ((H sigma)^2 - sigma^2)/2| after removing means.

    Products are formed on a grid of twice the size so they are alias-free.
    """
    g = sigma.grid
    fine = g.refined(2)
    c = np.zeros(fine.coeff_shape, dtype=complex)
    c[: g.n // 2] = sigma.coeffs[: g.n // 2]
    Hf = HILBERT_SYMBOL.on(fine)
    s, hs = inverse(np.stack([c, Hf * c]), fine)
    lhs = inverse(Hf * forward(s * hs, fine), fine)
    rhs = 0.5 * (hs**2 - s**2)
    r = (lhs - lhs.mean()) - (rhs - rhs.mean())
    return float(np.abs(r).max())


# ----------------------------------------------------------------- Riccati


def riccati_roots(k: float, kappa0: float) -> tuple[complex, complex]:
    """Roots r+ and r- of k z^2 - 2 kappa0 z + 2i kappa0 = 0."""
    if k == 0:
        raise ValueError("k must be nonzero")
    disc = cmath.sqrt(4.0 * kappa0**2 - 8j * k * kappa0)
    return (2.0 * kappa0 + disc) / (2.0 * k), (2.0 * kappa0 - disc) / (2.0 * k)


def riccati_blowup_time(z0: complex, k: float, kappa0: float) -> float:
    """First positive time at which the closed-form solution is infinite (inf if none)."""
    z0 = complex(z0)
    if kappa0 == 0.0:
        if abs(z0.imag) <= 1e-300 and z0.real * k > 0:
            return 1.0 / (k * z0.real)
        return math.inf
    rp, rm = riccati_roots(k, kappa0)
    if z0 == rp:
        return math.inf
    w = k * (rp - rm)
    q = (z0 - rm) / (z0 - rp)
    if q == 0:
        return math.inf
    L = math.log(abs(q))
    base = cmath.phase(q)
    # need (L + i(base + 2 pi m)) / w real and positive
    if abs(w.real) < 1e-300:
        return math.inf
    theta = L * w.imag / w.real
    m = round((theta - base) / (2.0 * math.pi))
    best = math.inf
    for mm in (m - 1, m, m + 1):
        tc = (L + 1j * (base + 2.0 * math.pi * mm)) / w
        if abs(tc.imag) <= 1e-10 * max(1.0, abs(tc)) and tc.real > 0:
            best = min(best, tc.real)
    return best


def riccati_exact(z0, k: float, kappa0: float, t):
    """Closed-form solution of dz/dt = k z^2 - 2 kappa0 z + 2i kappa0 with z(0) = z0.

    Vectorized over z0 and t.  Values at or past a blow-up come back as complex inf.
    """
    z0 = np.asarray(z0, dtype=complex)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kappa0 == 0.0:
            den = 1.0 - k * t * z0
            z = z0 / den
        else:
            rp, rm = riccati_roots(k, kappa0)
            e = np.exp(k * (rp - rm) * t)
            num = rp * (z0 - rm) - rm * (z0 - rp) * e
            den = (z0 - rm) - (z0 - rp) * e
            z = num / den
    T = np.vectorize(lambda zz: riccati_blowup_time(zz, k, kappa0))(z0)
    past = (t >= T) | ~np.isfinite(z) | (np.abs(den) < 1e-15)
    z = np.where(past, complex(np.inf, 0.0), z)
    return z if z.ndim else complex(z)


# ---------------------------------------------------------------- running


@dataclass
class OneDTrajectory:
    times: np.ndarray
    sup_sigma: np.ndarray
    min_sigma: np.ndarray
    sup_hilbert: np.ndarray
    final_state: OneDState
    status: str
    params: ModelParams
    positions: np.ndarray | None = None  # (T, P)
    z_grid: np.ndarray | None = None  # (T, P)
    z_riccati: np.ndarray | None = None  # (T, P)

    @property
    def oracle_deviation(self) -> np.ndarray:
        return np.abs(self.z_grid - self.z_riccati).max(axis=1)


def _record(s_hat, eng: OneDEngine):
    s, hs = inverse(np.stack([s_hat, eng.H * s_hat]), eng.grid)
    return float(np.abs(s).max()), float(s.min()), float(np.abs(hs).max())


def _z_at(s_hat, eng: OneDEngine, x):
    v = evaluate_at(np.stack([s_hat, eng.H * s_hat]), eng.grid, x)
    return v[1] + 1j * v[0]


def run_1d(
    state0: OneDState,
    params: ModelParams,
    config: OneDConfig,
    positions: np.ndarray | None = None,
    source: SpectralField | None = None,
) -> OneDTrajectory:
    """RK4 integration; optional characteristics are co-advected with dx/dt = u(x)."""
    g = state0.grid
    eng = OneDEngine(g, params, config.dealias, source)
    s = eng.mask * state0.sigma.coeffs if config.dealias else state0.sigma.coeffs.copy()
    track = positions is not None
    x = np.atleast_1d(np.asarray(positions, dtype=float)) if track else np.zeros(0)
    dt, h = config.dt, g.spacing

    def f(s, x):
        d, info = eng.rhs(s)
        dx = evaluate_at(info["u_hat"], g, x) if track else x
        return d, dx, info

    times, sups, mins, hils = [], [], [], []
    xs, zg = [], []
    z0 = _z_at(s, eng, x) if track else None

    def rec(t, s, x):
        a, b, c = _record(s, eng)
        times.append(t)
        sups.append(a)
        mins.append(b)
        hils.append(c)
        if track:
            xs.append(x.copy())
            zg.append(_z_at(s, eng, x))

    t = state0.time
    rec(t, s, x)
    status = "completed"
    for i in range(1, config.n_steps + 1):
        k1, x1, info = f(s, x)
        courant = info["umax"] * dt / h
        if courant > config.cfl_guard:
            raise CFLError(courant, config.cfl_guard)
        k2, x2, _ = f(s + 0.5 * dt * k1, x + 0.5 * dt * x1)
        k3, x3, _ = f(s + 0.5 * dt * k2, x + 0.5 * dt * x2)
        k4, x4, _ = f(s + dt * k3, x + dt * x3)
        s_new = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        x_new = x + dt / 6.0 * (x1 + 2 * x2 + 2 * x3 + x4)
        if not np.all(np.isfinite(s_new)) or np.abs(s_new).sum() > config.max_norm:
            status = "blowup_flag"
            break
        s, x = s_new, x_new
        t = state0.time + i * dt
        if i % config.record_every == 0 or i == config.n_steps:
            rec(t, s, x)
    final = OneDState(SpectralField.from_coeffs(g, s), t, None if status == "completed" else status)
    times = np.array(times)
    traj = OneDTrajectory(times, np.array(sups), np.array(mins), np.array(hils), final, status, params)
    if track:
        traj.positions = np.array(xs)
        traj.z_grid = np.array(zg)
        traj.z_riccati = np.stack([riccati_exact(z0, params.k, params.kappa0, tt - state0.time) for tt in times])
    return traj


def track_characteristics(state0: OneDState, positions, params: ModelParams, config: OneDConfig) -> OneDTrajectory:
    return run_1d(state0, params, config, positions)


# ----------------------------------------------------------- blow-up time


@dataclass(frozen=True)
class BlowupEstimate:
    T_est: float
    confidence: float
    status: str  # "ok" or "refused"
    reason: str = ""


def blowup_time_estimate(
    times, norms, window: float = 0.25, min_points: int = 20, power: float = 1.0
) -> BlowupEstimate:
    """Extrapolate norm^(-1/power) linearly to zero over the trailing window.

    power = 1 is the 1/(T - t) law.  The confidence value is the rms residual of
    the fit relative to the mean of the fitted quantity.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(norms, dtype=float)
    m = max(min_points, int(math.ceil(window * t.size)))
    if t.size < min_points:
        return BlowupEstimate(math.nan, math.inf, "refused", "too few samples")
    t, v = t[-m:], v[-m:]
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        return BlowupEstimate(math.nan, math.inf, "refused", "non-positive norm")
    if np.any(np.diff(v) <= 0):
        return BlowupEstimate(math.nan, math.inf, "refused", "tail is not monotonically growing")
    y = v ** (-1.0 / power)
    slope, icpt = np.polyfit(t, y, 1)
    if slope >= 0:
        return BlowupEstimate(math.nan, math.inf, "refused", "no finite-time extrapolation")
    resid = y - (slope * t + icpt)
    conf = float(np.sqrt(np.mean(resid**2)) / np.mean(y))
    return BlowupEstimate(float(-icpt / slope), conf, "ok")
