"""Closed 2D Oldroyd-B system in (a, b, c, rho) coupled to steady Stokes.

Two regimes share one RK4 driver:

* relaxational: a, b, c relax at rate 2*kappa0 toward rho*I (kappa0 = epsilon/R^2);
* relaxationless: kappa0 = 0 and c is slaved to the transported determinant d0,
  c = 2 sqrt(a^2 + b^2 + d0), so only (a, b, d0) are evolved.

Time is physical: the coupling k appears explicitly.  Setting k = 1/2 gives the
system measured in units of 1/(2k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from oldrlab.diagnostics import DiagnosticsRecord, holder_seminorm, matrix_holder
from oldrlab.spectral import (
    A_SYMBOL,
    B_SYMBOL,
    Grid,
    SpectralField,
    forward,
    forward_band,
    inverse,
    inverse_band,
)
from oldrlab.stokes import StressField2D, lmo_coeffs, velocity_coeffs

RELAXATIONAL = "relaxational"
RELAXATIONLESS = "relaxationless"


class CFLError(RuntimeError):
    def __init__(self, courant: float, guard: float):
        super().__init__(f"Courant number {courant:.4g} exceeds guard {guard:.4g}")
        self.courant = courant
        self.guard = guard


@dataclass(frozen=True)
class ModelParams:
    """Coupling rate k, particle diffusivity epsilon, equilibrium length R."""

    k: float
    epsilon: float
    R: float = 1.0
    corotational: bool = False

    def __post_init__(self):
        if self.k < 0 or self.epsilon < 0 or self.R <= 0:
            raise ValueError(f"invalid parameters {self}")

    @property
    def kappa0(self) -> float:
        return self.epsilon / self.R**2

    @property
    def deborah(self) -> float:
        return math.inf if self.epsilon == 0 else self.k * self.R**2 / self.epsilon

    @classmethod
    def rescaled(cls, deborah: float, R: float = 1.0) -> "ModelParams":
        """Parameters of the system written in time units 1/(2k): k = 1/2, 2*kappa0 = 1/D."""
        return cls(k=0.5, epsilon=0.5 * R**2 / deborah, R=R)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    dealias: bool = True
    mode: str = RELAXATIONAL
    cfl_guard: float = 0.5
    record_every: int = 1
    snapshot_every: int = 0
    holder_alpha: float | None = None
    advect: bool = True
    max_norm: float = 1e12

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_guard < 1:
            raise ValueError("cfl_guard must lie in (0, 1)")
        if self.mode not in (RELAXATIONAL, RELAXATIONLESS):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True, eq=False)
class OldroydState:
    a: SpectralField
    b: SpectralField
    c: SpectralField
    rho: SpectralField
    time: float = 0.0
    flag: str | None = None

    def __post_init__(self):
        g = self.a.grid
        if g.dim != 2 or not (g == self.b.grid == self.c.grid == self.rho.grid):
            raise ValueError("OldroydState fields must share one 2D grid")

    @property
    def grid(self) -> Grid:
        return self.a.grid

    @classmethod
    def from_stack(cls, grid: Grid, Y: np.ndarray, time: float, flag=None) -> "OldroydState":
        f = [SpectralField.from_coeffs(grid, y) for y in Y]
        return cls(*f, time=time, flag=flag)

    def stack(self) -> np.ndarray:
        return np.stack([self.a.coeffs, self.b.coeffs, self.c.coeffs, self.rho.coeffs])

    def stress(self) -> StressField2D:
        return StressField2D.from_abc(self.a, self.b, self.c)

    def tau(self) -> StressField2D:
        s = self.stress()
        return StressField2D(s.s11 - self.rho, s.s12, s.s22 - self.rho)

    def validate(self):
        """Raise if the t=0 positivity invariants fail (rho >= 0, c > 0, det > 0)."""
        if self.rho.values.min() < 0:
            raise ValueError("rho must be nonnegative")
        if self.c.values.min() <= 0:
            raise ValueError("trace c must be positive")
        if determinant_field(self).values.min() <= 0:
            raise ValueError("determinant c^2/4 - a^2 - b^2 must be positive")


@dataclass(frozen=True, eq=False)
class RelaxationlessState:
    """(a, b, d0) with c = 2 sqrt(a^2 + b^2 + d0); d0 is the transported determinant."""

    a: SpectralField
    b: SpectralField
    d0: SpectralField
    time: float = 0.0
    flag: str | None = None

    @property
    def grid(self) -> Grid:
        return self.a.grid

    @property
    def c(self) -> SpectralField:
        rad = self.a.values**2 + self.b.values**2 + self.d0.values
        return SpectralField(self.grid, 2.0 * np.sqrt(np.maximum(rad, 0.0)))

    @classmethod
    def from_stack(cls, grid: Grid, Y: np.ndarray, time: float, flag=None):
        f = [SpectralField.from_coeffs(grid, y) for y in Y]
        return cls(*f, time=time, flag=flag)

    @classmethod
    def from_oldroyd(cls, s: OldroydState) -> "RelaxationlessState":
        return cls(s.a, s.b, determinant_field(s), s.time)

    def stack(self) -> np.ndarray:
        return np.stack([self.a.coeffs, self.b.coeffs, self.d0.coeffs])

    def stress(self) -> StressField2D:
        return StressField2D.from_abc(self.a, self.b, self.c)


# ------------------------------------------------------------------ kernels


class Engine:
    """Precomputed transfer functions and pseudo-spectral right-hand sides on one grid."""

    def __init__(self, grid: Grid, params: ModelParams, dealias: bool = True, advect: bool = True):
        if grid.dim != 2:
            raise ValueError("the coupled solver is two-dimensional")
        self.grid = grid
        self.params = params
        self.advect = advect
        k1, k2 = grid.wavenumbers
        self.ik1 = np.where(grid.nyquist, 0.0, 1j * k1)
        self.ik2 = np.where(grid.nyquist, 0.0, 1j * k2)
        self.mask = grid.dealias_mask.astype(float) if dealias else np.ones(grid.coeff_shape)
        self.band = grid.n // 3 if dealias else grid.n // 2
        ones = np.ones(grid.coeff_shape, dtype=complex)
        zeros = np.zeros(grid.coeff_shape, dtype=complex)
        k = params.k
        # velocity is linear in (a, b); the isotropic part of the stress is absorbed by pressure
        self.ua = velocity_coeffs(grid, ones, zeros, -ones, k)
        self.ub = velocity_coeffs(grid, zeros, ones, zeros, k)
        self.lmo_a = lmo_coeffs(grid, ones, zeros, k)
        self.lmo_b = lmo_coeffs(grid, zeros, ones, k)
        self.A = A_SYMBOL.on(grid)
        self.B = B_SYMBOL.on(grid)
        self._work: dict[tuple, np.ndarray] = {}

    def _w(self, arr, like):
        # symbols restricted to the column width of ``like`` (truncated stacks stay truncated)
        return arr[..., : like.shape[-1]]

    def velocity(self, a_hat, b_hat):
        w = self._w
        return (
            w(self.ua[0], a_hat) * a_hat + w(self.ub[0], a_hat) * b_hat,
            w(self.ua[1], a_hat) * a_hat + w(self.ub[1], a_hat) * b_hat,
        )

    def _lmo(self, a_hat, b_hat):
        w = self._w
        return [w(self.lmo_a[i], a_hat) * a_hat + w(self.lmo_b[i], a_hat) * b_hat for i in range(3)]

    def lmo(self, a_hat, b_hat):
        lam, mu, om = self._lmo(a_hat, b_hat)
        if self.params.corotational:
            lam = np.zeros_like(lam)
            mu = np.zeros_like(mu)
        return lam, mu, om

    def gradient(self, a_hat, b_hat):
        """Coefficients of grad u as [[d1u1, d2u1], [d1u2, d2u2]]."""
        lam, mu, om = self._lmo(a_hat, b_hat)
        return [[lam, mu - 0.5 * om], [mu + 0.5 * om, -lam]]

    def inverse(self, stack):
        """Physical values; skips the empty columns of band-limited stacks."""
        if self.band < self.grid.n // 2 and (
            stack.shape[-1] <= self.band + 1 or not np.any(stack[..., self.band + 1 :])
        ):
            lead = stack.shape[:-2]
            if lead not in self._work:
                self._work[lead] = np.zeros(lead + self.grid.coeff_shape, dtype=complex)
            return inverse_band(stack, self.grid, self.band, self._work[lead])
        return inverse(stack, self.grid)

    def forward(self, values, width: int | None = None):
        """Masked coefficients of physical values (only retained columns are transformed).

        ``width`` matches the column count of a truncated state.
        """
        if self.band < self.grid.n // 2:
            x = forward_band(values, self.grid, self.band, width)
            return x * self._w(self.mask, x)
        return forward(values, self.grid) * self.mask

    def truncate(self, Y):
        return Y[..., : self.band + 1] if self.band < self.grid.n // 2 else Y

    def pad(self, Y):
        """Full-width copy of a (possibly truncated) coefficient stack."""
        out = np.zeros(Y.shape[:-1] + self.grid.coeff_shape[-1:], dtype=complex)
        out[..., : Y.shape[-1]] = Y
        return out

    def derivatives(self, Yc):
        return [self._w(self.ik1, Yc) * Yc, self._w(self.ik2, Yc) * Yc]

    def project(self, Y):
        return Y * self.mask

    def rhs(self, Y: np.ndarray):
        """Relaxational tendencies for Y = (a, b, c, rho) coefficients; returns (dY, info)."""
        p = self.params
        Yc = self.truncate(Y)
        a, b = Yc[0], Yc[1]
        # rho itself never enters a product, only its gradient does
        m = 11 if self.advect else 3
        key = ("rhs", m + 5) + Yc.shape[1:]
        stack = self._work.get(key)
        if stack is None:
            stack = self._work[key] = np.empty((m + 5,) + Yc.shape[1:], dtype=complex)
        stack[0:3] = Yc[:3]
        if self.advect:
            np.multiply(self._w(self.ik1, Yc), Yc, out=stack[3:7])
            np.multiply(self._w(self.ik2, Yc), Yc, out=stack[7:11])
        w = self._w
        for j, (sa, sb) in enumerate(((self.ua[0], self.ub[0]), (self.ua[1], self.ub[1]))):
            np.multiply(w(sa, a), a, out=stack[m + j])
            stack[m + j] += w(sb, a) * b
        for i in range(3):
            np.multiply(w(self.lmo_a[i], a), a, out=stack[m + 2 + i])
            stack[m + 2 + i] += w(self.lmo_b[i], a) * b
        if self.params.corotational:
            stack[m + 2 : m + 4] = 0.0
        u1, u2 = stack[m].copy(), stack[m + 1].copy()
        ph = self.inverse(stack)
        fa, fb, fc = ph[0:3]
        if self.advect:
            D1, D2 = ph[3:7], ph[7:11]
            U1, U2, LAM, MU, OM = ph[11:16]
            adv = U1 * D1 + U2 * D2
        else:
            U1, U2, LAM, MU, OM = ph[3:8]
            adv = np.zeros((4,) + fa.shape)
        N = np.empty((4,) + fa.shape)
        N[0] = -adv[0] - OM * fb + LAM * fc
        N[1] = -adv[1] + OM * fa + MU * fc
        N[2] = -adv[2] + 4.0 * LAM * fa + 4.0 * MU * fb
        N[3] = -adv[3]
        dY = self.forward(N, Y.shape[-1])
        kap = p.kappa0
        dY[0:3] -= 2.0 * kap * Y[0:3]
        dY[2] += 4.0 * kap * Y[3]
        umax = float(np.sqrt(U1**2 + U2**2).max())
        return dY, {"umax": umax, "u": (u1, u2), "a": a, "b": b}

    def rhs_relaxationless(self, Y: np.ndarray):
        """Tendencies for Y = (a, b, d0): the slaved-trace system with kappa0 = 0."""
        k = self.params.k
        Yc = self.truncate(Y)
        a, b, d = Yc
        u1, u2 = self.velocity(a, b)
        A, B = self._w(self.A, a), self._w(self.B, a)
        W = A * b - B * a
        parts = [Yc, *self.derivatives(Yc)] if self.advect else [Yc]
        stack = np.concatenate(parts + [np.stack([u1, u2, W, B * W, A * W])])
        ph = self.inverse(stack)
        fa, fb, fd = ph[0:3]
        if self.advect:
            D1, D2 = ph[3:6], ph[6:9]
            U1, U2, PW, PBW, PAW = ph[9:14]
            adv = U1 * D1 + U2 * D2
        else:
            U1, U2, PW, PBW, PAW = ph[3:8]
            adv = np.zeros_like(ph[0:3])
        rad = fa**2 + fb**2 + fd
        info = {"umax": float(np.sqrt(U1**2 + U2**2).max()), "u": (u1, u2), "a": a, "b": b}
        if rad.min() <= 0:
            info["flag"] = "positivity_loss"
        s = np.sqrt(np.maximum(rad, 0.0))
        N = np.empty_like(ph[0:3])
        N[0] = -adv[0] + 2.0 * k * (-fb * PW + 2.0 * s * PBW)
        N[1] = -adv[1] + 2.0 * k * (fa * PW - 2.0 * s * PAW)
        N[2] = -adv[2]
        return self.forward(N, Y.shape[-1]), info


def rk4_step(f: Callable, Y: np.ndarray, dt: float):
    """Classical RK4; returns (Y_new, info from the first stage)."""
    k1, info = f(Y)
    k2, i2 = f(Y + 0.5 * dt * k1)
    k3, i3 = f(Y + 0.5 * dt * k2)
    k4, i4 = f(Y + dt * k3)
    flags = [i.get("flag") for i in (info, i2, i3, i4) if i.get("flag")]
    if flags:
        info = dict(info, flag=flags[0])
    return Y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), info


# ------------------------------------------------------------- public API


def rhs(state: OldroydState, params: ModelParams, dealias: bool = True) -> OldroydState:
    """Tendencies (da, db, dc, drho)/dt packed as an OldroydState (time = state.time)."""
    eng = Engine(state.grid, params, dealias)
    dY, _ = eng.rhs(state.stack())
    flag = None if np.all(np.isfinite(dY)) else "blowup"
    return OldroydState.from_stack(state.grid, dY, state.time, flag)


def rhs_relaxationless(
    a: SpectralField, b: SpectralField, d0: SpectralField, params: ModelParams, dealias: bool = True
):
    """Tendencies (da, db, dd0)/dt of the slaved-trace system, plus a flag (or None)."""
    eng = Engine(a.grid, params, dealias)
    dY, info = eng.rhs_relaxationless(np.stack([a.coeffs, b.coeffs, d0.coeffs]))
    g = a.grid
    out = tuple(SpectralField.from_coeffs(g, y) for y in dY)
    flag = info.get("flag")
    if not np.all(np.isfinite(dY)):
        flag = "blowup"
    return out, flag


def _engine_fn(eng: Engine, mode: str):
    return eng.rhs if mode == RELAXATIONAL else eng.rhs_relaxationless


def _advance(eng: Engine, mode: str, Y: np.ndarray, config: SolverConfig):
    h = eng.grid.spacing
    Ynew, info = rk4_step(_engine_fn(eng, mode), Y, config.dt)
    courant = info["umax"] * config.dt / h
    if courant > config.cfl_guard:
        raise CFLError(courant, config.cfl_guard)
    flag = info.get("flag")
    if not np.all(np.isfinite(Ynew)) or np.abs(Ynew).max() > config.max_norm:
        flag = "blowup"
    return Ynew, flag


def step(state, params: ModelParams, config: SolverConfig, engine: Engine | None = None):
    """One RK4 step of size config.dt (either regime, chosen by state type/config.mode)."""
    mode = RELAXATIONLESS if isinstance(state, RelaxationlessState) else RELAXATIONAL
    eng = engine or Engine(state.grid, params, config.dealias, config.advect)
    Ynew, flag = _advance(eng, mode, state.stack(), config)
    return type(state).from_stack(state.grid, Ynew, state.time + config.dt, flag)


def determinant_field(state) -> SpectralField:
    if isinstance(state, RelaxationlessState):
        return state.d0
    v = 0.25 * state.c.values**2 - state.a.values**2 - state.b.values**2
    return SpectralField(state.grid, v)


def eigenvalue_fields(state) -> tuple[SpectralField, SpectralField]:
    r = np.sqrt(state.a.values**2 + state.b.values**2)
    half = 0.5 * state.c.values
    return SpectralField(state.grid, half + r), SpectralField(state.grid, half - r)


# -------------------------------------------------------------- monitoring


def state_monitor(eng: Engine, Y: np.ndarray, mode: str, t: float, holder_alpha=None) -> DiagnosticsRecord:
    """Per-step scalar diagnostics (everything except the post-hoc energy residual)."""
    g = eng.grid
    vol = g.cell_volume
    if mode == RELAXATIONAL:
        a_h, b_h, c_h, r_h = Y
        grads = eng.gradient(a_h, b_h)
        ph = inverse(np.stack([a_h, b_h, c_h, r_h, grads[0][0], grads[0][1], grads[1][0]]), g)
        a, b, c, rho = ph[0:4]
        det = 0.25 * c**2 - a**2 - b**2
    else:
        a_h, b_h, d_h = Y
        grads = eng.gradient(a_h, b_h)
        ph = inverse(np.stack([a_h, b_h, d_h, grads[0][0], grads[0][1], grads[1][0]]), g)
        a, b, det = ph[0:3]
        c = 2.0 * np.sqrt(np.maximum(a**2 + b**2 + det, 0.0))
        rho = np.zeros_like(a)
        ph = np.concatenate([ph[0:2], c[None], rho[None], ph[3:6]])
    g11, g12, g21 = ph[4], ph[5], ph[6]
    grad_sq = 2.0 * g11**2 + g12**2 + g21**2
    t11 = 0.5 * c + a - rho
    t22 = 0.5 * c - a - rho
    tau_frob = np.sqrt(t11**2 + 2.0 * b**2 + t22**2)
    W = eng.A * b_h - eng.B * a_h
    shear2 = float((g.hermitian_weight * np.abs(W) ** 2).sum() * g.volume)
    z2 = 0.5 * c - np.sqrt(a**2 + b**2)
    vals = {
        "L1_tau": float(tau_frob.sum() * vol),
        "Linf_tau": float(max(np.abs(t11).max(), np.abs(b).max(), np.abs(t22).max())),
        "L1_rho": float(np.abs(rho).sum() * vol),
        "Linf_rho": float(np.abs(rho).max()),
        "grad_u_inf": float(np.sqrt(grad_sq).max()),
        "det_min": float(det.min()),
        "det_max": float(det.max()),
        "int_det": float(det.sum() * vol),
        "int_c": float(c.sum() * vol),
        "int_rho": float(rho.sum() * vol),
        "int_shear2": shear2,
        "c_max": float(c.max()),
        "c_min": float(c.min()),
        "z2_min": float(z2.min()),
        "offdiag_ratio": float((np.abs(b) / np.maximum(0.5 * c, 1e-300)).max()),
    }
    if holder_alpha is not None:
        comps = [SpectralField(g, x) for x in (t11, b, t22)]
        vals["holder_tau"] = matrix_holder(comps, holder_alpha)
    return DiagnosticsRecord(t, vals)


@dataclass
class Trajectory:
    records: list[DiagnosticsRecord]
    status: str
    final_state: object
    params: ModelParams
    config: SolverConfig
    snapshots: list = field(default_factory=list)

    def series(self, key: str) -> np.ndarray:
        return np.array([r.get(key) for r in self.records])

    @property
    def times(self) -> np.ndarray:
        return self.series("t")


def energy_balance_residual(trajectory: Trajectory, params: ModelParams | None = None) -> np.ndarray:
    """Residual of the integrated trace balance at every record.

    int c(t) + 8k int_0^t e^{-2 kappa0 (t-s)} int |Ba - Ab|^2 ds
        - e^{-2 kappa0 t} int c0 - 2 (1 - e^{-2 kappa0 t}) int rho0,
    with the time integral by cumulative Simpson quadrature over the records.
    """
    p = params or trajectory.params
    t = trajectory.times
    C = trajectory.series("int_c")
    E = trajectory.series("int_shear2")
    P = trajectory.series("int_rho")[0]
    kap = p.kappa0
    if t.size < 2:
        return np.zeros_like(t)
    integral = cumulative_simpson(np.exp(2.0 * kap * t) * E, x=t, initial=0.0)
    decay = np.exp(-2.0 * kap * t)
    return C + 8.0 * p.k * decay * integral - decay * C[0] - 2.0 * (1.0 - decay) * P


def run(
    state0,
    params: ModelParams,
    config: SolverConfig,
    monitors: Sequence[Callable] = (),
    engine: Engine | None = None,
) -> Trajectory:
    """Integrate to config.t_end (or a blow-up flag), recording diagnostics."""
    mode = RELAXATIONLESS if isinstance(state0, RelaxationlessState) else config.mode
    if mode == RELAXATIONLESS and not isinstance(state0, RelaxationlessState):
        state0 = RelaxationlessState.from_oldroyd(state0)
    grid = state0.grid
    eng = engine or Engine(grid, params, config.dealias, config.advect)
    cls = type(state0)
    Y = eng.project(state0.stack()) if config.dealias else state0.stack()
    t = state0.time
    records, snaps = [], []

    def record(Y, t):
        rec = state_monitor(eng, Y, mode, t, config.holder_alpha)
        if monitors:
            st = cls.from_stack(grid, Y, t)
            for m in monitors:
                rec.values.update(m(st))
        records.append(rec)

    record(Y, t)
    if config.snapshot_every:
        snaps.append(cls.from_stack(grid, Y, t))
    status = "completed"
    for i in range(1, config.n_steps + 1):
        Ynew, flag = _advance(eng, mode, Y, config)
        if flag:
            status = "blowup_flag"
            records[-1].values["blowup"] = 1.0
            break
        Y = Ynew
        t = state0.time + i * config.dt
        if i % config.record_every == 0 or i == config.n_steps:
            record(Y, t)
        if config.snapshot_every and i % config.snapshot_every == 0:
            snaps.append(cls.from_stack(grid, Y, t))
    traj = Trajectory(records, status, cls.from_stack(grid, Y, t), params, config, snaps)
    if len(records) > 2 and config.record_every == 1:
        res = energy_balance_residual(traj, params)
        for r, v in zip(records, res):
            r.values["energy_residual"] = float(v)
    return traj
