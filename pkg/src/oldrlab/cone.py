"""Galerkin-truncated coefficient dynamics d tau_l/dt = -sum_{k+j=l} tau_k alpha(j)^2 tau_j.

Coefficients live on the lattice |l|_inf <= K in one or two dimensions, stored
densely with the zero mode at the centre (index K along each axis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import convolve


def _lattice(K: int, dim: int) -> np.ndarray:
    """Integer wavevectors, shape (dim, 2K+1, ...)."""
    r = np.arange(-K, K + 1)
    return np.array(np.meshgrid(*([r] * dim), indexing="ij"))


def _mirror(a: np.ndarray) -> np.ndarray:
    """a(-l) on the centred lattice."""
    return a[(slice(None, None, -1),) * a.ndim]


@dataclass(frozen=True, eq=False)
class ConeState:
    coeffs: np.ndarray  # complex, shape (2K+1,)*dim
    time: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if len(set(c.shape)) != 1 or c.shape[0] % 2 != 1 or c.ndim not in (1, 2):
            raise ValueError("coefficients must be a centred (2K+1)^dim array with dim 1 or 2")
        object.__setattr__(self, "coeffs", c)

    @property
    def K(self) -> int:
        return self.coeffs.shape[0] // 2

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def center(self) -> tuple[int, ...]:
        return (self.K,) * self.dim

    @property
    def tau0(self) -> float:
        return float(self.coeffs[self.center].real)

    def symmetry_error(self) -> float:
        c = self.coeffs
        return float(max(np.abs(c - np.conj(_mirror(c))).max(), abs(c[self.center].imag)))

    def check_symmetry(self, tol: float = 1e-12):
        scale = max(1.0, float(np.abs(self.coeffs).max()))
        if self.symmetry_error() > tol * scale:
            raise ValueError("coefficients violate tau_{-k} = conj(tau_k)")

    def wavevectors(self) -> np.ndarray:
        return _lattice(self.K, self.dim)

    def field_values(self, m: int = 64) -> np.ndarray:
        """Physical field sum_k tau_k e^{ik.x} on an m^dim grid (m > 2K)."""
        if m <= 2 * self.K:
            raise ValueError("grid too coarse for the coefficient band")
        K = self.K
        full = np.zeros((m,) * self.dim, dtype=complex)
        idx = np.arange(-K, K + 1) % m
        full[np.ix_(*([idx] * self.dim))] = self.coeffs
        return np.fft.ifftn(full).real * m**self.dim


@dataclass(frozen=True, eq=False)
class AlphaSymbol:
    """Real, even, bounded multiplier on the lattice with alpha(0) = 0."""

    values: np.ndarray
    Gamma: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        K = v.shape[0] // 2
        if np.abs(v - _mirror(v)).max() > 0:
            raise ValueError("alpha must be even")
        if v[(K,) * v.ndim] != 0.0:
            raise ValueError("alpha(0) must vanish")
        if np.abs(v).max() > self.Gamma * (1.0 + 1e-15):
            raise ValueError("alpha exceeds its bound Gamma")

    @classmethod
    def sign_pattern(cls, K: int, dim: int = 1, Gamma: float = 1.0) -> "AlphaSymbol":
        """Gamma * (-1)^{|l|_1} off the origin."""
        lat = _lattice(K, dim)
        v = Gamma * (-1.0) ** np.abs(lat).sum(axis=0)
        v[(K,) * dim] = 0.0
        return cls(v, Gamma)

    @classmethod
    def random(cls, K: int, rng: np.random.Generator, dim: int = 1, Gamma: float = 1.0) -> "AlphaSymbol":
        v = rng.uniform(-Gamma, Gamma, size=(2 * K + 1,) * dim)
        v = 0.5 * (v + _mirror(v))
        v[(K,) * dim] = 0.0
        return cls(v, Gamma)


def rhs_cone(s: ConeState, alpha: AlphaSymbol) -> np.ndarray:
    """Truncated tendencies; interactions landing outside |l|_inf <= K are discarded."""
    s.check_symmetry()
    if alpha.values.shape != s.coeffs.shape:
        raise ValueError("alpha table and state lattice differ")
    K = s.K
    full = convolve(s.coeffs, alpha.values**2 * s.coeffs, method="direct")
    crop = tuple(slice(K, 3 * K + 1) for _ in range(s.dim))
    return -full[crop]


def dissipation(s: ConeState, alpha: AlphaSymbol) -> float:
    """-sum_{k != 0} alpha(k)^2 |tau_k|^2."""
    return float(-(alpha.values**2 * np.abs(s.coeffs) ** 2).sum())


def cone_margin(s: ConeState) -> float:
    c = s.coeffs
    side = np.abs(c).sum() - abs(c[s.center])
    return float(c[s.center].real - side)


def weighted_norm(s: ConeState, sexp: float) -> float:
    if sexp <= 0:
        raise ValueError("weight exponent must be positive")
    kabs = np.sqrt((s.wavevectors() ** 2).sum(axis=0))
    return float(((1.0 + kabs) ** sexp * np.abs(s.coeffs)).sum())


def weighted_envelope(C_s0: float, sexp: float, tau0_0: float, Gamma: float, t) -> np.ndarray:
    return C_s0 * np.exp(2.0 ** (sexp + 1) * tau0_0 * Gamma**2 * np.asarray(t))


def bound_check(s: ConeState, sexp: float, C_s0: float, t: float, Gamma: float, tau0_0: float, rtol: float = 1e-6) -> bool:
    return weighted_norm(s, sexp) <= weighted_envelope(C_s0, sexp, tau0_0, Gamma, t) * (1.0 + rtol)


def random_cone_state(
    K: int, rng: np.random.Generator, dim: int = 1, tau0: float = 1.0, fill: float | None = None
) -> ConeState:
    """Hermitian data with sum_{k != 0} |tau_k| = fill * tau0 (fill in (0, 1) keeps it in the cone)."""
    fill = rng.uniform(0.2, 0.95) if fill is None else fill
    shape = (2 * K + 1,) * dim
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * rng.uniform(0, 1, shape) ** 2
    c = 0.5 * (c + np.conj(_mirror(c)))
    c[(K,) * dim] = 0.0
    total = np.abs(c).sum()
    c = c * (fill * tau0 / total) if total > 0 else c
    c[(K,) * dim] = tau0
    return ConeState(c)


@dataclass
class ConeTrajectory:
    times: np.ndarray
    tau0: np.ndarray
    margin: np.ndarray
    weighted: dict[float, np.ndarray]
    field_min: np.ndarray
    final_state: ConeState
    status: str
    symmetry_error: float = 0.0


def stable_dt(s: ConeState, alpha: AlphaSymbol) -> float:
    return 0.1 / (alpha.Gamma**2 * max(abs(s.tau0), 1e-12))


def simulate_cone(
    s0: ConeState,
    alpha: AlphaSymbol,
    dt: float | None,
    t_end: float,
    sexps: tuple[float, ...] = (1.0,),
    record_every: int = 1,
    max_norm: float = 1e12,
) -> ConeTrajectory:
    """RK4 trajectory; dt is capped at 0.1/(Gamma^2 tau0(0))."""
    cap = stable_dt(s0, alpha)
    dt = cap if dt is None else min(dt, cap)
    n = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n
    c = s0.coeffs.copy()
    K = s0.K
    m = max(64, 4 * K + 4)
    times, tau0, margin, fmin = [], [], [], []
    weighted: dict[float, list] = {se: [] for se in sexps}

    def f(c):
        st = ConeState(c)
        return rhs_cone(st, alpha)

    def rec(t, c):
        st = ConeState(c, t)
        times.append(t)
        tau0.append(st.tau0)
        margin.append(cone_margin(st))
        fmin.append(float(st.field_values(m).min()))
        for se in sexps:
            weighted[se].append(weighted_norm(st, se))

    rec(s0.time, c)
    status = "completed"
    for i in range(1, n + 1):
        k1 = f(c)
        k2 = f(c + 0.5 * dt * k1)
        k3 = f(c + 0.5 * dt * k2)
        k4 = f(c + dt * k3)
        c_new = c + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(c_new)) or np.abs(c_new).max() > max_norm:
            status = "blowup_flag"
            break
        c = c_new
        if i % record_every == 0 or i == n:
            rec(s0.time + i * dt, c)
    final = ConeState(c, times[-1])
    return ConeTrajectory(
        np.array(times),
        np.array(tau0),
        np.array(margin),
        {se: np.array(v) for se, v in weighted.items()},
        np.array(fmin),
        final,
        status,
        final.symmetry_error(),
    )


# ------------------------------------------------------------ text tables


def write_coeff_table(path, s: ConeState):
    """One line per wavevector: 'l_x [l_y] re im'."""
    lat = s.wavevectors().reshape(s.dim, -1).T
    vals = s.coeffs.ravel()
    with open(path, "w") as fh:
        for l, v in zip(lat, vals):
            fh.write(" ".join(str(int(x)) for x in l) + f" {float(v.real)!r} {float(v.imag)!r}\n")


def read_coeff_table(path) -> ConeState:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise ValueError("empty coefficient table")
    dim = len(rows[0]) - 2
    if dim not in (1, 2) or any(len(r) != dim + 2 for r in rows):
        raise ValueError("each line must read 'l_x [l_y] re im'")
    ls = np.array([[int(x) for x in r[:dim]] for r in rows])
    K = int(np.abs(ls).max())
    c = np.zeros((2 * K + 1,) * dim, dtype=complex)
    for l, r in zip(ls, rows):
        c[tuple(l + K)] = float(r[dim]) + 1j * float(r[dim + 1])
    return ConeState(c)
