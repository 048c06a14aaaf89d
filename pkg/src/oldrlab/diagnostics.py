"""Norms, Hölder seminorm estimator, nondimensional numbers, decay fits and monitors.

Matrix-valued fields use the componentwise-max convention for sup norms and
Hölder seminorms, and the pointwise Frobenius norm under the L1 integral.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from oldrlab.spectral import Grid, SpectralField

CSV_COLUMNS = (
    "t",
    "L1_tau",
    "Linf_tau",
    "holder_tau",
    "L1_rho",
    "Linf_rho",
    "grad_u_inf",
    "energy_residual",
    "det_min",
)


# --------------------------------------------------------------------- norms


def l1(f: SpectralField) -> float:
    return float(np.abs(f.values).sum() * f.grid.cell_volume)


def l2(f: SpectralField) -> float:
    return float(np.sqrt((f.values**2).sum() * f.grid.cell_volume))


def linf(f: SpectralField) -> float:
    return f.sup()


def l2_parseval(f: SpectralField) -> float:
    """L2 norm from the coefficients (independent of grid quadrature)."""
    c = f.coeffs
    w = f.grid.hermitian_weight
    return float(np.sqrt((w * np.abs(c) ** 2).sum() * f.grid.volume))


def _offsets(grid: Grid, ladder: int) -> list[tuple[tuple[int, ...], float]]:
    """Lattice offsets: sub-dyadic ladder of multipliers along axes and diagonals."""
    mults = sorted({int(round(2 ** (j / ladder))) for j in range(ladder * int(math.log2(grid.n)) + 1)})
    mults = [m for m in mults if 1 <= m <= grid.n // 2]
    dirs = [(1,)] if grid.dim == 1 else [(1, 0), (0, 1), (1, 1), (1, -1)]
    out = []
    for d in dirs:
        norm = math.sqrt(sum(x * x for x in d))
        for m in mults:
            out.append((tuple(m * x for x in d), m * norm * grid.spacing))
    return out


def holder_seminorm(f: SpectralField, alpha: float, ladder: int = 8) -> float:
    """Lower-bound estimator of the alpha-Hölder seminorm.

    Maximizes |f(x+h) - f(x)| / |h|^alpha over grid points x and lattice
    offsets h whose lengths follow a geometric ladder with ratio 2^(1/ladder)
    (ladder=1 gives plain dyadic offsets), along axes and diagonals.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    v = f.values
    best = 0.0
    axes = tuple(range(f.grid.dim))
    for shift, dist in _offsets(f.grid, ladder):
        diff = np.abs(np.roll(v, shift, axis=axes) - v).max()
        best = max(best, diff / dist**alpha)
    return float(best)


def offset_lengths(grid: Grid, ladder: int = 8) -> np.ndarray:
    return np.array([d for _, d in _offsets(grid, ladder)])


def holder_bruteforce(
    f: SpectralField, alpha: float, rng: np.random.Generator, pairs: int = 10**6, chunk: int = 20000
) -> float:
    """Slow oracle: random continuum pairs evaluated by Fourier summation."""
    from oldrlab.spectral import active_band, evaluate_at

    g = f.grid
    band = active_band(f.coeffs, g)
    best = 0.0
    done = 0
    while done < pairs:
        m = min(chunk, pairs - done)
        x = rng.uniform(0, g.length, size=(m, g.dim))
        # torus displacement, at most half a period per axis
        h = rng.uniform(-np.pi, np.pi, size=(m, g.dim)) * rng.uniform(0, 1, size=(m, 1)) ** 2
        y = x + h
        fx = evaluate_at(f.coeffs, g, x, band)
        fy = evaluate_at(f.coeffs, g, y, band)
        dist = np.linalg.norm(h, axis=1)
        ok = dist > 0
        best = max(best, float(np.max(np.abs(fx - fy)[ok] / dist[ok] ** alpha)))
        done += m
    return best


@dataclass(frozen=True)
class NormBundle:
    L1: float
    L2: float
    Linfty: float
    holder: float | None
    timestamp: float = 0.0


def norm_bundle(f: SpectralField, alpha: float | None = 0.5, t: float = 0.0) -> NormBundle:
    h = holder_seminorm(f, alpha) if alpha is not None else None
    return NormBundle(l1(f), l2(f), linf(f), h, t)


def matrix_sup(components: Sequence[SpectralField]) -> float:
    return max(c.sup() for c in components)


def matrix_l1(components: Sequence[SpectralField], weights: Sequence[float]) -> float:
    """Integral of the pointwise Frobenius norm; weights count repeated entries."""
    sq = sum(w * c.values**2 for c, w in zip(components, weights))
    g = components[0].grid
    return float(np.sqrt(sq).sum() * g.cell_volume)


def matrix_holder(components: Sequence[SpectralField], alpha: float) -> float:
    return max(holder_seminorm(c, alpha) for c in components)


# ------------------------------------------------------ nondimensional numbers


def deborah(k: float, epsilon: float, R: float) -> tuple[float, float]:
    """(D, kappa0) = (k R^2 / epsilon, epsilon / R^2); D is inf when epsilon = 0."""
    kappa0 = epsilon / R**2
    D = math.inf if epsilon == 0 else k * R**2 / epsilon
    return D, kappa0


def smallness_B0(
    M1: float, Malpha: float, Minfty: float, D: float, d: int = 2, alpha: float = 0.5, C: float = 1.0
) -> float:
    if Minfty == 0.0:
        return 0.0
    inner = Malpha ** (d / (d + alpha)) * M1 ** (alpha / (d + alpha)) / Minfty
    return C * D * Minfty * (1.0 + math.log1p(inner))


@dataclass(frozen=True)
class SmallnessReport:
    M1: float
    Minfty: float
    Malpha: float
    D: float
    B0: float
    criterion: float
    eps1: float

    @property
    def satisfied(self) -> bool:
        return self.criterion <= self.eps1


def smallness_report(
    tau: Sequence[SpectralField],
    rho: SpectralField,
    D: float,
    alpha: float = 0.5,
    C: float = 1.0,
    eps1: float = 1.0,
) -> SmallnessReport:
    """Smallness data from (tau11, tau12, tau22) and rho at t=0."""
    d = rho.grid.dim
    M1 = l1(rho) + matrix_l1(tau, (1.0, 2.0, 1.0))
    Minf = linf(rho) + matrix_sup(tau)
    Ma = holder_seminorm(rho, alpha) + matrix_holder(tau, alpha)
    B0 = smallness_B0(M1, Ma, Minf, D, d, alpha, C)
    crit = smallness_B0(M1, Ma, Minf, D, d, alpha, 1.0)
    return SmallnessReport(M1, Minf, Ma, D, B0, crit, eps1)


# ------------------------------------------------------------------ fitting


def fit_decay_rate(t: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares rate of exponential decay and the r^2 of the log-linear fit."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 10:
        raise ValueError(f"need at least 10 samples, got {t.size}")
    if np.any(v <= 0):
        raise ValueError("decay fit needs strictly positive values")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-28 * max(1.0, float((y**2).sum())) else 1.0 - float((resid**2).sum()) / ss_tot
    return float(-slope), float(r2)


# --------------------------------------------------------- Calderon monitor


def calderon_ratio(tau, alpha: float = 0.5, k: float = 1.0) -> float:
    """sup|R tau| / (sup|tau| {1 + log[1 + |tau|_1^(a/(d+a)) [tau]_a^(d/(d+a)) / sup|tau|]}).

    ``tau`` is a StressField2D; R tau = grad u / k from the Stokes inverter.
    """
    from oldrlab.stokes import gradient_from_stress

    comps = [tau.s11, tau.s12, tau.s22]
    sup = matrix_sup(comps)
    if sup == 0.0:
        raise ValueError("calderon_ratio is undefined for the zero field")
    d = tau.grid.dim
    grad = gradient_from_stress(tau, k)
    num = max(gij.sup() for row in grad for gij in row) / k
    L1 = max(l1(c) for c in comps)
    H = matrix_holder(comps, alpha)
    den = sup * (1.0 + math.log1p(L1 ** (alpha / (d + alpha)) * H ** (d / (d + alpha)) / sup))
    return num / den


# ------------------------------------------------------------- CSV records


@dataclass
class DiagnosticsRecord:
    t: float
    values: dict[str, float] = field(default_factory=dict)

    def get(self, key: str, default: float = math.nan) -> float:
        if key == "t":
            return self.t
        return self.values.get(key, default)


def write_series_csv(path, records: Iterable[DiagnosticsRecord], extra: Sequence[str] = (), comment: str = ""):
    records = list(records)
    cols = list(CSV_COLUMNS) + [c for c in extra if c not in CSV_COLUMNS]
    with open(path, "w", newline="") as fh:
        fh.write(f"# columns: {','.join(cols)}" + (f" | {comment}" if comment else "") + "\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            w.writerow([repr(float(r.get(c))) for c in cols])


def read_series_csv(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]) if body else np.zeros((0, len(header)))
    return {h: data[:, i] for i, h in enumerate(header)}
