"""Strain-responsive variant: the equilibrium length R grows where the strain is large.

    D_t R = delta(|grad u|) R,
    D_t sigma = (grad u) sigma + sigma (grad u)^T - (2 eps / R^2)(sigma - rho I) - 2 delta(|grad u|) sigma,

with delta vanishing below kappa/2 and equal to C0 sqrt(kappa^2 + g^2) above kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from oldrlab.oldroyd import CFLError, Engine, ModelParams, OldroydState
from oldrlab.spectral import Grid, SpectralField, evaluate_at


class ConfigurationError(ValueError):
    pass


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _smoothstep_prime(s):
    s = np.clip(s, 0.0, 1.0)
    return 30.0 * s * s * (1.0 - s) ** 2


@dataclass(frozen=True)
class DeltaResponse:
    """Threshold response delta(g).

    On (kappa/2, kappa) the upper branch is multiplied by a quintic smoothstep,
    so value and first two derivatives match at both ends.  ``max_slope`` is the
    largest |delta'| over 10^4 samples of [0, 4 kappa]; construction fails when
    ``enforce_slope`` is set and it exceeds ``slope_factor * C0``.
    """

    kappa: float
    C0: float = 1.5
    slope_factor: float = 2.0
    enforce_slope: bool = False
    max_slope: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.kappa <= 0 or self.C0 < 0:
            raise ConfigurationError("kappa must be positive and C0 nonnegative")
        g = np.linspace(0.0, 4.0 * self.kappa, 10_000)
        m = float(np.abs(self.derivative(g)).max())
        object.__setattr__(self, "max_slope", m)
        if self.enforce_slope and m > self.slope_factor * self.C0 * (1.0 + 1e-12):
            raise ConfigurationError(
                f"blend slope {m:.4g} exceeds {self.slope_factor} C0 = {self.slope_factor * self.C0:.4g}"
            )

    def __call__(self, g):
        return delta_eval(g, self)

    def derivative(self, g):
        g = np.asarray(g, dtype=float)
        k, C0 = self.kappa, self.C0
        root = np.sqrt(k * k + g * g)
        s = (g - 0.5 * k) / (0.5 * k)
        upper = C0 * g / root
        blend = _smoothstep_prime(s) * (2.0 / k) * C0 * root + _smoothstep(s) * upper
        return np.where(g <= 0.5 * k, 0.0, np.where(g >= k, upper, blend))


def delta_eval(g, d: DeltaResponse):
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ValueError("strain magnitude must be nonnegative")
    k = d.kappa
    upper = d.C0 * np.sqrt(k * k + g * g)
    s = (g - 0.5 * k) / (0.5 * k)
    out = np.where(g <= 0.5 * k, 0.0, np.where(g >= k, upper, _smoothstep(s) * upper))
    return out if out.ndim else float(out)


def trace_bound_envelope(t, sup_trace0: float, rho_inf: float, d: int, epsilon: float, R_min: float, c: float, kappa: float):
    """N0(t) = e^{2 c kappa t} [sup Tr sigma0 + d eps / (c kappa R_min^2) |rho0|_inf]."""
    return np.exp(2.0 * c * kappa * np.asarray(t)) * (sup_trace0 + d * epsilon / (c * kappa * R_min**2) * rho_inf)


@dataclass(frozen=True, eq=False)
class RegularizedState:
    a: SpectralField
    b: SpectralField
    c: SpectralField
    rho: SpectralField
    R: SpectralField
    time: float = 0.0
    flag: str | None = None

    @property
    def grid(self) -> Grid:
        return self.a.grid

    @classmethod
    def from_oldroyd(cls, s: OldroydState, R: SpectralField) -> "RegularizedState":
        return cls(s.a, s.b, s.c, s.rho, R, s.time)

    @classmethod
    def from_stack(cls, grid, Y, time, flag=None):
        return cls(*[SpectralField.from_coeffs(grid, y) for y in Y], time=time, flag=flag)

    def stack(self) -> np.ndarray:
        return np.stack([f.coeffs for f in (self.a, self.b, self.c, self.rho, self.R)])


@dataclass(frozen=True)
class RegularizedParams:
    k: float
    epsilon: float
    delta: DeltaResponse
    norm_constant: float = 1.0  # c in the damping inequality 3c|grad u| <= 2 delta


class RegularizedEngine:
    def __init__(self, grid: Grid, params: RegularizedParams, dealias: bool = True, delta_off: bool = False):
        self.grid = grid
        self.params = params
        self.base = Engine(grid, ModelParams(params.k, params.epsilon), dealias)
        self.delta_off = delta_off

    def rhs(self, Y: np.ndarray):
        e, p = self.base, self.params
        Yc = e.truncate(Y)
        a, b, c, r, R = Yc
        u1, u2 = e.velocity(a, b)
        lam, mu, om = e.lmo(a, b)
        stack = np.concatenate([Yc, *e.derivatives(Yc), np.stack([u1, u2, lam, mu, om])])
        ph = e.inverse(stack)
        F, D1, D2 = ph[0:5], ph[5:10], ph[10:15]
        U1, U2, LAM, MU, OM = ph[15:20]
        fa, fb, fc, fr, fR = F
        grad = np.sqrt(2.0 * LAM**2 + 2.0 * MU**2 + 0.5 * OM**2)
        dl = np.zeros_like(grad) if self.delta_off else delta_eval(grad, p.delta)
        # 1/R^2 is computed once per stage and shared by the relaxation terms
        relax = 2.0 * p.epsilon / fR**2
        adv = U1 * D1 + U2 * D2
        N = np.empty_like(F)
        N[0] = -adv[0] - OM * fb + LAM * fc - (relax + 2.0 * dl) * fa
        N[1] = -adv[1] + OM * fa + MU * fc - (relax + 2.0 * dl) * fb
        N[2] = -adv[2] + 4.0 * LAM * fa + 4.0 * MU * fb - (relax + 2.0 * dl) * fc + 2.0 * relax * fr
        N[3] = -adv[3]
        N[4] = -adv[4] + dl * fR
        dY = e.forward(N, Y.shape[-1])
        info = {
            "umax": float(np.sqrt(U1**2 + U2**2).max()),
            "grad": grad,
            "delta": dl,
            "u": (u1, u2),
            "phys": F,
        }
        return dY, info


def rhs_regularized(state: RegularizedState, params: RegularizedParams, dealias: bool = True, delta_off: bool = False):
    eng = RegularizedEngine(state.grid, params, dealias, delta_off)
    dY, _ = eng.rhs(state.stack())
    return RegularizedState.from_stack(state.grid, dY, state.time)


@dataclass
class RegularizedTrajectory:
    times: np.ndarray
    sup_trace: np.ndarray
    envelope: np.ndarray
    min_R: np.ndarray
    grad_u_inf: np.ndarray
    damping_violation: np.ndarray  # max of 3c|grad u| - 2 delta over {|grad u| >= kappa}
    active_fraction: np.ndarray  # share of grid points with |grad u| >= kappa
    final_state: RegularizedState
    status: str
    marker_R: np.ndarray | None = None  # (T, P)

    @property
    def bound_ratio(self) -> np.ndarray:
        return self.sup_trace / self.envelope


def run_regularized(
    state0: RegularizedState,
    params: RegularizedParams,
    dt: float,
    t_end: float,
    dealias: bool = True,
    cfl_guard: float = 0.5,
    markers: np.ndarray | None = None,
    record_every: int = 1,
) -> RegularizedTrajectory:
    g = state0.grid
    eng = RegularizedEngine(g, params, dealias)
    Y = eng.base.project(state0.stack()) if dealias else state0.stack()
    band = g.n // 3 if dealias else None
    X = np.zeros((0, 2)) if markers is None else np.asarray(markers, dtype=float).reshape(-1, 2).copy()
    d = params.delta
    cn = params.norm_constant
    ph0 = eng.base.inverse(Y)
    R_min = float(ph0[4].min())
    N0 = trace_bound_envelope(
        1.0, float(ph0[2].max()), float(np.abs(ph0[3]).max()), g.dim, params.epsilon, R_min, cn, d.kappa
    )
    base0 = N0 / math.exp(2.0 * cn * d.kappa)
    rec = {k: [] for k in ("t", "tr", "env", "R", "gu", "viol", "frac", "mR")}

    def velocity_at(Y, X):
        u1, u2 = eng.base.velocity(Y[0], Y[1])
        v = evaluate_at(np.stack([u1, u2]), g, X, band)
        return v.T

    def record(t, Y, info):
        F = info["phys"]
        grad, dl = info["grad"], info["delta"]
        act = grad >= d.kappa
        rec["t"].append(t)
        rec["tr"].append(float(F[2].max()))
        rec["env"].append(base0 * math.exp(2.0 * cn * d.kappa * t))
        rec["R"].append(float(F[4].min()))
        rec["gu"].append(float(grad.max()))
        rec["viol"].append(float((3.0 * cn * grad - 2.0 * dl)[act].max()) if act.any() else -math.inf)
        rec["frac"].append(float(act.mean()))
        if X.size:
            rec["mR"].append(evaluate_at(Y[4], g, X, band))

    h = g.spacing
    n = int(round(t_end / dt))
    t = state0.time
    status = "completed"
    k1, info = eng.rhs(Y)
    record(t, Y, info)
    for i in range(1, n + 1):
        courant = info["umax"] * dt / h
        if courant > cfl_guard:
            raise CFLError(courant, cfl_guard)
        x1 = velocity_at(Y, X) if X.size else X
        k2, _ = eng.rhs(Y + 0.5 * dt * k1)
        x2 = velocity_at(Y + 0.5 * dt * k1, X + 0.5 * dt * x1) if X.size else X
        k3, _ = eng.rhs(Y + 0.5 * dt * k2)
        x3 = velocity_at(Y + 0.5 * dt * k2, X + 0.5 * dt * x2) if X.size else X
        k4, _ = eng.rhs(Y + dt * k3)
        x4 = velocity_at(Y + dt * k3, X + dt * x3) if X.size else X
        Y = Y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        X = X + dt / 6.0 * (x1 + 2 * x2 + 2 * x3 + x4)
        t = state0.time + i * dt
        if not np.all(np.isfinite(Y)):
            status = "blowup_flag"
            break
        k1, info = eng.rhs(Y)
        if i % record_every == 0 or i == n:
            record(t, Y, info)
    return RegularizedTrajectory(
        np.array(rec["t"]),
        np.array(rec["tr"]),
        np.array(rec["env"]),
        np.array(rec["R"]),
        np.array(rec["gu"]),
        np.array(rec["viol"]),
        np.array(rec["frac"]),
        RegularizedState.from_stack(g, Y, t, None if status == "completed" else status),
        status,
        np.array(rec["mR"]) if rec["mR"] else None,
    )
