"""Particle-path oracle for the stress equation.

Particles carry positions X(a, t), the deformation gradient F = grad_a X and the
memory accumulator J(t) = int_0^t e^{2 kappa0 s} (F^T F)^{-1} ds.  The stress is
then a closed expression,

    sigma(X(a, t), t) = F [2 kappa0 rho0(a) e^{-2 kappa0 t} J + e^{-2 kappa0 t} sigma0(a)] F^T,

which solves the upper-convected equation with linear relaxation toward rho*I
without any spatial discretization of the stress.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Protocol

import numpy as np

from oldrlab.oldroyd import (
    CFLError,
    Engine,
    ModelParams,
    OldroydState,
    SolverConfig,
)
from oldrlab.spectral import Grid, evaluate_at, inverse

DEGENERACY_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class ParticleSet:
    labels: np.ndarray  # (P, 2)
    X: np.ndarray  # (P, 2), unwrapped positions
    F: np.ndarray  # (P, 2, 2), F[p, i, j] = dX^i / da_j
    J: np.ndarray  # (P, 2, 2)
    time: float = 0.0
    degenerate: bool = False

    @classmethod
    def at_labels(cls, labels: np.ndarray, time: float = 0.0) -> "ParticleSet":
        labels = np.asarray(labels, dtype=float).reshape(-1, 2)
        P = labels.shape[0]
        eye = np.broadcast_to(np.eye(2), (P, 2, 2)).copy()
        return cls(labels, labels.copy(), eye, np.zeros((P, 2, 2)), time)

    @property
    def size(self) -> int:
        return self.labels.shape[0]

    def det_deviation(self) -> float:
        return float(np.abs(np.linalg.det(self.F) - 1.0).max())


def random_labels(rng: np.random.Generator, count: int = 256) -> np.ndarray:
    return rng.uniform(0.0, 2.0 * np.pi, size=(count, 2))


# ----------------------------------------------------------------- samplers


class VelocitySampler(Protocol):
    def __call__(self, X: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Return u(X, t) with shape (P, 2) and grad u with G[p, i, j] = d_j u^i."""


@dataclass(frozen=True)
class ConstantGradientSampler:
    """u(x) = G x with a constant traceless G."""

    G: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if abs(np.trace(G)) > 1e-14:
            raise ValueError("velocity gradient must be traceless")
        object.__setattr__(self, "G", G)

    def __call__(self, X, t):
        P = X.shape[0]
        return X @ self.G.T, np.broadcast_to(self.G, (P, 2, 2))


def rotation_sampler(rate: float = 1.0) -> ConstantGradientSampler:
    """Rigid rotation u = rate * (-x2, x1)."""
    return ConstantGradientSampler(np.array([[0.0, -rate], [rate, 0.0]]))


@dataclass(frozen=True)
class ShearSampler:
    """Steady shear u = (amplitude * sin x2, 0)."""

    amplitude: float = 1.0

    def __call__(self, X, t):
        P = X.shape[0]
        u = np.zeros((P, 2))
        u[:, 0] = self.amplitude * np.sin(X[:, 1])
        G = np.zeros((P, 2, 2))
        G[:, 0, 1] = self.amplitude * np.cos(X[:, 1])
        return u, G


@dataclass(frozen=True, eq=False)
class SpectralSampler:
    """Band-limited velocity given by coefficient snapshots, cubic in time between them.

    ``coeffs`` has shape (S, 6, *grid.coeff_shape) holding (u1, u2, g11, g12, g21, g22).
    A single snapshot means a steady field.
    """

    grid: Grid
    times: np.ndarray
    coeffs: np.ndarray
    band: int | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim == 1 + self.grid.dim:
            c = c[None]
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "times", np.atleast_1d(np.asarray(self.times, dtype=float)))
        if c.shape[0] >= 2:
            from scipy.interpolate import CubicSpline

            object.__setattr__(self, "_spline", CubicSpline(self.times, c, axis=0))

    @classmethod
    def from_velocity(cls, grid: Grid, u1_hat, u2_hat, band=None) -> "SpectralSampler":
        k1, k2 = grid.wavenumbers
        d1 = np.where(grid.nyquist, 0.0, 1j * k1)
        d2 = np.where(grid.nyquist, 0.0, 1j * k2)
        c = np.stack([u1_hat, u2_hat, d1 * u1_hat, d2 * u1_hat, d1 * u2_hat, d2 * u2_hat])
        return cls(grid, np.array([0.0]), c, band)

    def __call__(self, X, t):
        c = self.coeffs[0] if self.coeffs.shape[0] == 1 else self._spline(t)
        v = evaluate_at(c, self.grid, X, self.band)
        return _split(v)


def _split(v: np.ndarray):
    u = v[0:2].T.copy()
    G = v[2:6].T.reshape(-1, 2, 2)
    return u, G


# --------------------------------------------------------------- particles


def _particle_rhs(X, F, J, t, u, G, kappa0):
    dF = G @ F
    C = np.swapaxes(F, 1, 2) @ F
    dJ = math.exp(2.0 * kappa0 * t) * np.linalg.inv(C)
    return u, dF, dJ


def _degenerate(F) -> bool:
    return bool(np.any(np.linalg.cond(F) > DEGENERACY_CONDITION))


def advance_particles(p: ParticleSet, v: VelocitySampler, dt: float, kappa0: float) -> ParticleSet:
    """One RK4 step of X' = u(X), F' = grad u(X) F, J' = e^{2 kappa0 t} (F^T F)^{-1}."""
    t = p.time

    def f(X, F, J, s):
        u, G = v(X, s)
        return _particle_rhs(X, F, J, s, u, G, kappa0)

    k1 = f(p.X, p.F, p.J, t)
    s2 = [y + 0.5 * dt * k for y, k in zip((p.X, p.F, p.J), k1)]
    k2 = f(*s2, t + 0.5 * dt)
    s3 = [y + 0.5 * dt * k for y, k in zip((p.X, p.F, p.J), k2)]
    k3 = f(*s3, t + 0.5 * dt)
    s4 = [y + dt * k for y, k in zip((p.X, p.F, p.J), k3)]
    k4 = f(*s4, t + dt)
    new = [y + dt / 6.0 * (a + 2 * b + 2 * c + d) for y, a, b, c, d in zip((p.X, p.F, p.J), k1, k2, k3, k4)]
    J = 0.5 * (new[2] + np.swapaxes(new[2], 1, 2))
    return ParticleSet(p.labels, new[0], new[1], J, t + dt, p.degenerate or _degenerate(new[1]))


def track(p: ParticleSet, v: VelocitySampler, dt: float, t_end: float, kappa0: float) -> ParticleSet:
    steps = int(round((t_end - p.time) / dt))
    for _ in range(steps):
        p = advance_particles(p, v, dt, kappa0)
    return p


def stress_reconstruct(p: ParticleSet, rho0: np.ndarray, sigma0: np.ndarray, kappa0: float) -> np.ndarray:
    """Closed-form stress (P, 2, 2) at the particle positions."""
    if p.degenerate:
        raise FloatingPointError("deformation gradient became degenerate")
    decay = math.exp(-2.0 * kappa0 * p.time)
    inner = decay * (2.0 * kappa0 * np.asarray(rho0)[:, None, None] * p.J + np.asarray(sigma0))
    s = p.F @ inner @ np.swapaxes(p.F, 1, 2)
    return 0.5 * (s + np.swapaxes(s, 1, 2))


def density_at_particles(p: ParticleSet, rho0: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """rho is transported, so its value on a particle is rho0 at the label."""
    return np.asarray(rho0(p.labels))


def ertel_check(
    p: ParticleSet,
    grad_theta0: Callable[[np.ndarray], np.ndarray],
    grad_theta: Callable[[np.ndarray], np.ndarray],
) -> float:
    """max_p |F^T grad_x theta(X) - grad_a theta0(a)| for a transported scalar theta."""
    lhs = np.einsum("pij,pi->pj", p.F, np.asarray(grad_theta(p.X)))
    return float(np.abs(lhs - np.asarray(grad_theta0(p.labels))).max())


# ------------------------------------------------------ constant gradients


def _phi(beta: complex, t: float) -> complex:
    """int_0^t e^{beta s} ds."""
    z = beta * t
    if abs(z) < 1e-4:
        return t * (1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0)
    return (np.exp(z) - 1.0) / beta


def exp_constant_gradient(G: np.ndarray, t: float) -> np.ndarray:
    """exp(tG) for traceless 2x2 G, using G^2 = delta I with delta = -det G."""
    G = np.asarray(G, dtype=float)
    delta = -np.linalg.det(G)
    if delta > 0:
        q = math.sqrt(delta)
        return math.cosh(q * t) * np.eye(2) + math.sinh(q * t) / q * G
    if delta < 0:
        q = math.sqrt(-delta)
        return math.cos(q * t) * np.eye(2) + math.sin(q * t) / q * G
    return np.eye(2) + t * G


def _pair_integral(G: np.ndarray, t: float, b: float) -> np.ndarray:
    """int_0^t e^{b s} exp(sG) exp(sG)^T ds for traceless 2x2 G.

    Uses the eigenprojectors P+- = (I +- G/q)/2 of the eigenvalues +-q, so the
    three exponential rates are never subtracted from one another.
    """
    G = np.asarray(G, dtype=float)
    delta = -np.linalg.det(G)
    q = np.sqrt(complex(delta))
    if abs(q) * t < 1e-2:
        # exp(sG) = C I + S G with truncated series (relative error O((qt)^6))
        from numpy.polynomial import legendre

        x, w = legendre.leggauss(24)
        s = 0.5 * t * (x + 1.0)
        w = 0.5 * t * w
        C = 1.0 + delta * s**2 / 2.0 + delta**2 * s**4 / 24.0 + delta**3 * s**6 / 720.0
        S = s + delta * s**3 / 6.0 + delta**2 * s**5 / 120.0 + delta**3 * s**7 / 5040.0
        e = np.exp(b * s)
        i_cc, i_cs, i_ss = (w * e * C * C).sum(), (w * e * C * S).sum(), (w * e * S * S).sum()
        return i_cc * np.eye(2) + i_cs * (G + G.T) + i_ss * G @ G.T
    I = np.eye(2)
    Pp = 0.5 * (I + G / q)
    Pm = 0.5 * (I - G / q)
    out = (
        _phi(b + 2.0 * q, t) * Pp @ Pp.T
        + _phi(b, t) * (Pp @ Pm.T + Pm @ Pp.T)
        + _phi(b - 2.0 * q, t) * Pm @ Pm.T
    )
    return out.real


def memory_integral(G: np.ndarray, t: float, kappa0: float) -> np.ndarray:
    """J(t) = int_0^t e^{2 kappa0 s} exp(-sG) exp(-sG^T) ds in closed form."""
    return _pair_integral(-np.asarray(G, dtype=float), t, 2.0 * kappa0)


def constant_gradient_reference(
    G: np.ndarray, t: float, params: ModelParams, sigma0: np.ndarray, rho0: float
) -> np.ndarray:
    """Exact stress for u = Gx with spatially uniform initial data.

    Equal to F e^{-2 kappa0 t}(2 kappa0 rho0 J + sigma0) F^T, evaluated as
    e^{-2 kappa0 t} F sigma0 F^T + 2 kappa0 rho0 int_0^t e^{-2 kappa0 r} exp(rG) exp(rG)^T dr
    so that large horizons do not multiply huge and tiny factors.
    """
    kap = params.kappa0
    F = exp_constant_gradient(G, t)
    s = math.exp(-2.0 * kap * t) * F @ np.asarray(sigma0) @ F.T
    s = s + 2.0 * kap * rho0 * _pair_integral(G, t, -2.0 * kap)
    return 0.5 * (s + s.T)


def growth_rate(G: np.ndarray, params: ModelParams, t1: float, t2: float, sigma0=None, rho0: float = 1.0) -> float:
    """Exponential rate of |sigma| between two (late) times from the closed form."""
    s0 = np.eye(2) * 2.0 * rho0 if sigma0 is None else sigma0
    n1 = np.linalg.norm(constant_gradient_reference(G, t1, params, s0, rho0))
    n2 = np.linalg.norm(constant_gradient_reference(G, t2, params, s0, rho0))
    return math.log(n2 / n1) / (t2 - t1)


def classify_growth(G: np.ndarray, params: ModelParams, horizon: float | None = None, threshold: float = 0.1) -> bool:
    """True when the closed-form stress grows exponentially.

    The late-time rate is measured on [horizon/2, horizon] (default horizon
    50/kappa0) and compared against threshold*kappa0, so algebraic growth in the
    marginal case sqrt(delta) = kappa0 counts as bounded exponential behaviour.
    """
    kap = params.kappa0
    if kap <= 0:
        raise ValueError("classification needs kappa0 > 0")
    T = 50.0 / kap if horizon is None else horizon
    return growth_rate(G, params, 0.5 * T, T) > threshold * kap


# ------------------------------------------------- coupled Eulerian tracking


@dataclass
class CoupledResult:
    state: OldroydState
    particles: ParticleSet
    sigma_eulerian: np.ndarray  # (P, 2, 2) at the particle positions
    sigma_lagrangian: np.ndarray

    @property
    def relative_error(self) -> float:
        num = np.abs(self.sigma_eulerian - self.sigma_lagrangian).max()
        return float(num / np.abs(self.sigma_lagrangian).max())


def coupled_run(
    state0: OldroydState,
    params: ModelParams,
    config: SolverConfig,
    labels: np.ndarray,
    rho0_at: np.ndarray,
    sigma0_at: np.ndarray,
) -> CoupledResult:
    """Advance the Eulerian solver and the particles inside the same RK4 stages.

    Particles see the velocity of the current Eulerian stage, evaluated by direct
    Fourier summation over the retained band; ``rho0_at`` and ``sigma0_at`` are
    the initial data at the labels.
    """
    grid = state0.grid
    eng = Engine(grid, params, config.dealias, config.advect)
    band = grid.n // 3 if config.dealias else None
    kap = params.kappa0
    Y = eng.project(state0.stack()) if config.dealias else state0.stack()
    Y = eng.truncate(Y).copy()  # columns beyond the dealiasing band stay zero
    p = ParticleSet.at_labels(labels, state0.time)
    Z = (p.X, p.F, p.J)
    h = grid.spacing
    dt = config.dt

    def f(Y, Z, t):
        dY, info = eng.rhs(Y)
        a, b = info["a"], info["b"]
        g = eng.gradient(a, b)
        u1, u2 = info["u"]
        v = evaluate_at(np.stack([u1, u2, g[0][0], g[0][1], g[1][0]]), grid, Z[0], band)
        u, G = _split(np.concatenate([v, -v[2:3]]))
        return dY, _particle_rhs(*Z, t, u, G, kap), info

    t = state0.time
    for i in range(config.n_steps):
        k1, z1, info = f(Y, Z, t)
        courant = info["umax"] * dt / h
        if courant > config.cfl_guard:
            raise CFLError(courant, config.cfl_guard)
        k2, z2, _ = f(Y + 0.5 * dt * k1, [z + 0.5 * dt * d for z, d in zip(Z, z1)], t + 0.5 * dt)
        k3, z3, _ = f(Y + 0.5 * dt * k2, [z + 0.5 * dt * d for z, d in zip(Z, z2)], t + 0.5 * dt)
        k4, z4, _ = f(Y + dt * k3, [z + dt * d for z, d in zip(Z, z3)], t + dt)
        Y = Y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        Z = [z + dt / 6.0 * (a + 2 * b + 2 * c + d) for z, a, b, c, d in zip(Z, z1, z2, z3, z4)]
        t = state0.time + (i + 1) * dt
        if not np.all(np.isfinite(Y)):
            raise FloatingPointError("Eulerian state lost finiteness")
    J = 0.5 * (Z[2] + np.swapaxes(Z[2], 1, 2))
    p = ParticleSet(p.labels, Z[0], Z[1], J, t, _degenerate(Z[1]))
    state = OldroydState.from_stack(grid, eng.pad(Y), t)
    a, b, c = evaluate_at(Y[0:3], grid, p.X, band)
    s_e = np.empty((p.size, 2, 2))
    s_e[:, 0, 0] = 0.5 * c + a
    s_e[:, 1, 1] = 0.5 * c - a
    s_e[:, 0, 1] = s_e[:, 1, 0] = b
    s_l = stress_reconstruct(p, rho0_at, sigma0_at, kap)
    return CoupledResult(state, p, s_e, s_l)
